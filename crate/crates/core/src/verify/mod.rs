//! Executable checks of the auction's guarantees over traces, allocations
//! and pinned examples.

mod dsic;
mod examples;
mod trace_checks;

pub use dsic::{check_dsic, Mechanism};
pub use examples::{reproduce_examples, single_sample_example, tight_lw_example};
pub use trace_checks::{
    check_efficiency, check_trace, drop_chain, epsilon_gate, probe, DropChain, IterationProbe,
};

use serde_json::{json, Map, Value};

use crate::auction::run_pca;
use crate::error::Result;
use crate::market::{preprocess, MarketInstance, SellerValues};
use crate::opt::{optimal_lw_allocation_with, TieBreak};
use crate::rational::Rat;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Pass,
    Fail,
    /// A precondition (the `ε` gate) did not hold, so nothing was asserted.
    Skipped,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Pass => "pass",
            Status::Fail => "fail",
            Status::Skipped => "skipped",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: String,
    pub status: Status,
    /// Number of individual assertions evaluated.
    pub evaluated: u64,
    pub note: Option<String>,
    /// First failure: state index, subset, buyer and the exact values.
    pub witness: Option<Value>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct CheckReport {
    pub checks: Vec<Check>,
}

impl CheckReport {
    pub fn new() -> Self {
        Self::default()
    }

    fn entry(&mut self, name: &str) -> &mut Check {
        if let Some(k) = self.checks.iter().position(|c| c.name == name) {
            return &mut self.checks[k];
        }
        self.checks.push(Check {
            name: name.to_string(),
            status: Status::Pass,
            evaluated: 0,
            note: None,
            witness: None,
        });
        self.checks.last_mut().expect("just pushed")
    }

    /// Registers `name` as passing if it has not been seen yet.
    pub fn declare(&mut self, name: &str) {
        self.entry(name);
    }

    /// Records one assertion. Only the first failure keeps its witness.
    pub fn assert(&mut self, name: &str, ok: bool, witness: impl FnOnce() -> Value) {
        let check = self.entry(name);
        check.evaluated += 1;
        if !ok && check.status != Status::Fail {
            check.status = Status::Fail;
            check.witness = Some(witness());
        }
    }

    pub fn skip(&mut self, name: &str, note: impl Into<String>) {
        let check = self.entry(name);
        if check.status == Status::Pass {
            check.status = Status::Skipped;
        }
        check.note = Some(note.into());
    }

    pub fn note(&mut self, name: &str, note: impl Into<String>) {
        self.entry(name).note = Some(note.into());
    }

    pub fn get(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    /// Appends another report, prefixing its check names.
    pub fn absorb(&mut self, prefix: &str, other: CheckReport) {
        for mut c in other.checks {
            c.name = format!("{prefix}{}", c.name);
            match self.checks.iter_mut().find(|x| x.name == c.name) {
                Some(existing) => {
                    existing.evaluated += c.evaluated;
                    if existing.status != Status::Fail && c.status != Status::Pass {
                        existing.status = c.status;
                        existing.witness = c.witness;
                        existing.note = c.note.or(existing.note.take());
                    }
                }
                None => self.checks.push(c),
            }
        }
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| c.status == Status::Fail)
    }

    pub fn all_pass(&self) -> bool {
        self.failures().next().is_none()
    }

    /// 0 when everything passed, 1 on any failure, 2 when nothing failed
    /// but a gated check was skipped.
    pub fn exit_code(&self) -> i32 {
        if !self.all_pass() {
            1
        } else if self.checks.iter().any(|c| c.status == Status::Skipped) {
            2
        } else {
            0
        }
    }

    pub fn to_json(&self) -> Value {
        let checks: Vec<Value> = self
            .checks
            .iter()
            .map(|c| {
                let mut obj = Map::new();
                obj.insert("name".into(), json!(c.name));
                obj.insert("status".into(), json!(c.status.as_str()));
                obj.insert("evaluated".into(), json!(c.evaluated));
                if let Some(note) = &c.note {
                    obj.insert("note".into(), json!(note));
                }
                if let Some(w) = &c.witness {
                    obj.insert("witness".into(), w.clone());
                }
                Value::Object(obj)
            })
            .collect();
        json!({
            "all_pass": self.all_pass(),
            "exit_code": self.exit_code(),
            "checks": checks,
        })
    }
}

/// Runs the auction on the instance's bids and checks its trace and
/// efficiency. Ties in the optimum go to the higher index, the order in
/// which the auction's round-robin clock drops tied buyers.
pub fn verify_auction(instance: &MarketInstance) -> Result<CheckReport> {
    let pm = preprocess(instance, SellerValues::Bids)?;
    let run = run_pca(&pm)?;
    let opt = optimal_lw_allocation_with(&pm, TieBreak::HigherIndex)?;
    let trace = run.trace.as_ref().expect("traced run");
    let mut report = check_trace(&pm, trace, &run.allocation, &opt)?;
    report.absorb("", check_efficiency(&pm, &run, &opt));
    Ok(report)
}

pub(crate) fn r(v: &Rat) -> Value {
    Value::String(v.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        let mut rep = CheckReport::new();
        rep.assert("a", true, || json!({}));
        assert_eq!(rep.exit_code(), 0);
        rep.skip("gated", "gate does not hold");
        assert_eq!(rep.exit_code(), 2);
        rep.assert("b", false, || json!({"state": 3}));
        rep.assert("b", false, || json!({"state": 4}));
        assert_eq!(rep.exit_code(), 1);
        assert_eq!(rep.get("b").unwrap().witness, Some(json!({"state": 3})));
        assert_eq!(rep.get("b").unwrap().evaluated, 2);
    }
}
