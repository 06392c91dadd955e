//! Market instances: buyers, sellers, the bipartite trade graph and each
//! seller's supply polymatroid.

mod io;
mod preprocess;

pub use io::{parse_instance, serialize_instance};
pub use preprocess::{
    preprocess, PreprocessedBuyer, PreprocessedEdge, PreprocessedMarket, SellerValues,
};

use std::collections::HashSet;

use num_integer::Integer;
use num_traits::Signed;

use crate::error::{Error, Result};
use crate::polymatroid::{ground_limit, verify_oracle, GroundSet, SetFunction};
use crate::rational::{is_multiple_of, rational_gcd, ExtRat, Rat};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Buyer {
    pub id: String,
    pub valuation: Rat,
    pub bid: Rat,
    pub budget: ExtRat,
}

/// How a seller's supply constraint is described in an instance.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Capacity {
    /// `f(F) = min(|F| * unit, cap)`.
    Rank { unit: Rat, cap: Rat },
    /// `f(F) = sum of the per-buyer caps of the edges in F`.
    Additive { caps: Vec<(String, Rat)> },
    /// Every subset value, indexed by bitmask over the seller's edges in
    /// the order they appear in the instance edge list.
    Table { values: Vec<Rat> },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Seller {
    pub id: String,
    pub valuation: Rat,
    pub bid: Rat,
    pub sample: Option<Rat>,
    pub capacity: Capacity,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MarketInstance {
    /// Clock increment. `None` means "derive from the bids".
    pub epsilon: Option<Rat>,
    pub buyers: Vec<Buyer>,
    pub sellers: Vec<Seller>,
    /// `(buyer id, seller id)` pairs.
    pub edges: Vec<(String, String)>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Issue {
    pub entity: String,
    pub message: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub errors: Vec<Issue>,
    pub warnings: Vec<Issue>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.errors.is_empty()
    }

    /// First error as [`Error::Validation`], or the warnings on success.
    pub fn into_result(self) -> Result<Vec<Issue>> {
        match self.errors.into_iter().next() {
            Some(issue) => Err(Error::Validation {
                entity: issue.entity,
                message: issue.message,
            }),
            None => Ok(self.warnings),
        }
    }

    fn error(&mut self, entity: impl Into<String>, message: impl Into<String>) {
        self.errors.push(Issue {
            entity: entity.into(),
            message: message.into(),
        });
    }

    fn warn(&mut self, entity: impl Into<String>, message: impl Into<String>) {
        self.warnings.push(Issue {
            entity: entity.into(),
            message: message.into(),
        });
    }
}

impl MarketInstance {
    pub fn buyer_index(&self, id: &str) -> Option<usize> {
        self.buyers.iter().position(|b| b.id == id)
    }

    pub fn seller_index(&self, id: &str) -> Option<usize> {
        self.sellers.iter().position(|s| s.id == id)
    }

    /// Buyer ids adjacent to seller `j`, in edge-list order.
    pub fn seller_buyers(&self, j: usize) -> Vec<&str> {
        let sid = &self.sellers[j].id;
        self.edges
            .iter()
            .filter(|(_, s)| s == sid)
            .map(|(b, _)| b.as_str())
            .collect()
    }

    /// The seller's capacity function over its incident edges, labelled by
    /// buyer id in edge-list order.
    pub fn seller_function(&self, j: usize) -> Result<SetFunction> {
        let seller = &self.sellers[j];
        let buyers = self.seller_buyers(j);
        let ground = GroundSet::new(buyers.iter().copied())?;
        match &seller.capacity {
            Capacity::Rank { unit, cap } => SetFunction::from_fn(ground, |s| {
                let total = unit * Rat::from_integer(s.count_ones().into());
                if &total < cap {
                    total
                } else {
                    cap.clone()
                }
            }),
            Capacity::Additive { caps } => {
                let per_edge: Vec<Rat> = buyers
                    .iter()
                    .map(|b| {
                        caps.iter()
                            .find(|(id, _)| id == b)
                            .map(|(_, c)| c.clone())
                            .ok_or_else(|| Error::Validation {
                                entity: format!("seller {}", seller.id),
                                message: format!("additive capacity has no cap for buyer {b}"),
                            })
                    })
                    .collect::<Result<_>>()?;
                SetFunction::from_fn(ground, |s| crate::polymatroid::sum_over(&per_edge, s))
            }
            Capacity::Table { values } => SetFunction::from_table(ground, values.clone()),
        }
    }

    fn valuations(&self) -> impl Iterator<Item = &Rat> {
        self.buyers
            .iter()
            .map(|b| &b.valuation)
            .chain(self.sellers.iter().map(|s| &s.valuation))
    }

    /// Every reported value that the clock grid must hit exactly.
    pub fn gridded_values(&self) -> Vec<&Rat> {
        self.buyers
            .iter()
            .map(|b| &b.bid)
            .chain(self.sellers.iter().map(|s| &s.bid))
            .chain(self.sellers.iter().filter_map(|s| s.sample.as_ref()))
            .collect()
    }

    /// `v_min^2 / (v_max - v_min)` over buyer and seller valuations, or `None`
    /// when all valuations coincide (no bound applies).
    pub fn epsilon_bound(&self) -> Option<Rat> {
        let vmin = self.valuations().min()?;
        let vmax = self.valuations().max()?;
        (vmax > vmin).then(|| vmin * vmin / (vmax - vmin))
    }

    /// The explicit epsilon, or the largest grid step that divides every bid
    /// and satisfies the efficiency bound.
    pub fn resolved_epsilon(&self) -> Result<Rat> {
        if let Some(eps) = &self.epsilon {
            return Ok(eps.clone());
        }
        let gcd = rational_gcd(self.gridded_values()).ok_or_else(|| Error::Validation {
            entity: "epsilon".into(),
            message: "cannot derive a clock increment from an instance without bids".into(),
        })?;
        Ok(match self.epsilon_bound() {
            Some(bound) if gcd > bound => {
                let ratio = &gcd / &bound;
                let k = ratio.numer().div_ceil(ratio.denom());
                gcd / Rat::from_integer(k)
            }
            _ => gcd,
        })
    }

    pub fn with_epsilon(&self, epsilon: Rat) -> MarketInstance {
        MarketInstance {
            epsilon: Some(epsilon),
            ..self.clone()
        }
    }
}

/// Structural and numeric checks on an instance. Collects every problem.
pub fn validate(instance: &MarketInstance) -> ValidationReport {
    let mut report = ValidationReport::default();

    let mut seen = HashSet::new();
    for b in &instance.buyers {
        let entity = format!("buyer {}", b.id);
        if !seen.insert(b.id.as_str()) {
            report.error(&entity, "duplicate buyer id");
        }
        if !b.valuation.is_positive() {
            report.error(&entity, "valuation must be positive");
        }
        if !b.bid.is_positive() {
            report.error(&entity, "bid must be positive");
        }
        match &b.budget {
            ExtRat::Finite(v) if v.is_negative() => {
                report.error(&entity, "budget must be nonnegative")
            }
            ExtRat::PosInf => report.warn(&entity, "unbounded budget on a real buyer"),
            _ => {}
        }
    }
    let mut seen = HashSet::new();
    for s in &instance.sellers {
        let entity = format!("seller {}", s.id);
        if !seen.insert(s.id.as_str()) {
            report.error(&entity, "duplicate seller id");
        }
        if !s.valuation.is_positive() {
            report.error(&entity, "valuation must be positive");
        }
        if !s.bid.is_positive() {
            report.error(&entity, "bid must be positive");
        }
        if let Some(sample) = &s.sample {
            if !sample.is_positive() {
                report.error(&entity, "sample must be positive");
            }
        }
    }

    let buyer_ids: HashSet<&str> = instance.buyers.iter().map(|b| b.id.as_str()).collect();
    let seller_ids: HashSet<&str> = instance.sellers.iter().map(|s| s.id.as_str()).collect();
    let mut edge_set = HashSet::new();
    for (b, s) in &instance.edges {
        let entity = format!("edge ({b},{s})");
        if !buyer_ids.contains(b.as_str()) {
            report.error(&entity, format!("unknown buyer {b}"));
        }
        if !seller_ids.contains(s.as_str()) {
            report.error(&entity, format!("unknown seller {s}"));
        }
        if !edge_set.insert((b.as_str(), s.as_str())) {
            report.error(&entity, "duplicate edge");
        }
    }

    let epsilon = match instance.resolved_epsilon() {
        Ok(eps) if eps.is_positive() => Some(eps),
        Ok(_) => {
            report.error("epsilon", "epsilon must be positive");
            None
        }
        Err(e) => {
            report.error("epsilon", e.to_string());
            None
        }
    };
    if let Some(eps) = &epsilon {
        for b in &instance.buyers {
            if b.bid.is_positive() && !is_multiple_of(&b.bid, eps) {
                report.error(
                    format!("buyer {}", b.id),
                    format!("bid {} is not a multiple of epsilon {eps}", b.bid),
                );
            }
        }
        for s in &instance.sellers {
            let entity = format!("seller {}", s.id);
            if s.bid.is_positive() && !is_multiple_of(&s.bid, eps) {
                report.error(
                    &entity,
                    format!("bid {} is not a multiple of epsilon {eps}", s.bid),
                );
            }
            if let Some(sample) = &s.sample {
                if sample.is_positive() && !is_multiple_of(sample, eps) {
                    report.error(
                        &entity,
                        format!("sample {sample} is not a multiple of epsilon {eps}"),
                    );
                }
            }
        }
    }

    for (j, s) in instance.sellers.iter().enumerate() {
        let entity = format!("seller {}", s.id);
        let adjacent = instance.seller_buyers(j);
        if adjacent.is_empty() {
            report.error(&entity, "seller has no incident edges");
            continue;
        }
        if adjacent.len() + 1 > ground_limit() {
            report.error(
                &entity,
                format!(
                    "{} incident edges exceed the enumeration limit",
                    adjacent.len()
                ),
            );
            continue;
        }
        match &s.capacity {
            Capacity::Rank { unit, cap } => {
                if unit.is_negative() || cap.is_negative() {
                    report.error(&entity, "rank capacity parameters must be nonnegative");
                    continue;
                }
            }
            Capacity::Additive { caps } => {
                let mut keys = HashSet::new();
                for (b, c) in caps {
                    if !keys.insert(b.as_str()) {
                        report.error(&entity, format!("duplicate additive cap for buyer {b}"));
                    }
                    if !adjacent.contains(&b.as_str()) {
                        report.error(&entity, format!("additive cap for non-adjacent buyer {b}"));
                    }
                    if c.is_negative() {
                        report.error(&entity, format!("negative additive cap for buyer {b}"));
                    }
                }
            }
            Capacity::Table { values } => {
                let expected = 1usize << adjacent.len();
                if values.len() != expected {
                    report.error(
                        &entity,
                        format!("table has {} values, expected {expected}", values.len()),
                    );
                    continue;
                }
            }
        }
        match instance.seller_function(j).and_then(|f| verify_oracle(&f)) {
            Ok(r) if r.is_polymatroid() => {}
            Ok(r) => {
                let v = r.first_violation().expect("failing report has a witness");
                report.error(
                    &entity,
                    format!(
                        "capacity is not a polymatroid rank function ({:?} fails)",
                        v.axiom
                    ),
                );
            }
            Err(e) => report.error(&entity, e.to_string()),
        }
    }

    let participants = instance.buyers.len() + instance.sellers.len();
    if participants > ground_limit() {
        report.error(
            "market",
            format!(
                "{participants} participants exceed the enumeration limit {}",
                ground_limit()
            ),
        );
    }
    report
}

#[cfg(test)]
pub(crate) fn tight_lw_instance() -> MarketInstance {
    use crate::rational::{int, rat};
    crate::verify::tight_lw_example(&int(1), &int(3), &rat(1, 2))
}
