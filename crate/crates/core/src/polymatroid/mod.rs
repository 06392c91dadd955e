//! Tabulated set functions over small ordered ground sets.
//!
//! Subsets are bitmasks: bit `k` stands for the `k`-th element of the
//! ground set. Every function is materialized as a table of `2^n` exact
//! values, so all operations are exhaustive and exact.

pub(crate) mod ops;
pub(crate) mod remnant;

pub use ops::{
    contract_rank, contraction_table, greedy_max, intersection_max, membership, reduce_by_caps,
    reduce_table, verify_oracle, Axiom, OracleReport, Violation,
};
pub use remnant::{remnant_rank, remnant_rank_simple, RemnantTables};

use std::collections::HashMap;
use std::sync::OnceLock;

use num_traits::Zero;

use crate::error::{Error, Result};
use crate::rational::Rat;

pub type Mask = u32;

/// Default bound on ground-set size for exhaustive enumeration.
pub const DEFAULT_GROUND_LIMIT: usize = 16;
/// No override can lift the bound past this.
pub const HARD_GROUND_LIMIT: usize = 20;

/// Current enumeration bound: `CLINCH_MAX_GROUND` if set (clamped to the
/// hard limit), otherwise [`DEFAULT_GROUND_LIMIT`]. Read once per process.
pub fn ground_limit() -> usize {
    static LIMIT: OnceLock<usize> = OnceLock::new();
    *LIMIT.get_or_init(|| {
        std::env::var("CLINCH_MAX_GROUND")
            .ok()
            .and_then(|v| v.trim().parse::<usize>().ok())
            .map(|v| v.min(HARD_GROUND_LIMIT))
            .unwrap_or(DEFAULT_GROUND_LIMIT)
    })
}

pub fn check_ground(size: usize) -> Result<()> {
    let limit = ground_limit();
    if size > limit {
        return Err(Error::EnumerationRefused { size, limit });
    }
    Ok(())
}

pub fn full_mask(n: usize) -> Mask {
    if n == 0 {
        0
    } else {
        Mask::MAX >> (32 - n)
    }
}

pub fn bit(k: usize) -> Mask {
    1 << k
}

pub fn contains(mask: Mask, k: usize) -> bool {
    mask & (1 << k) != 0
}

/// Element positions of `mask`, ascending.
pub fn members(mask: Mask) -> impl Iterator<Item = usize> {
    let mut m = mask;
    std::iter::from_fn(move || {
        if m == 0 {
            None
        } else {
            let k = m.trailing_zeros() as usize;
            m &= m - 1;
            Some(k)
        }
    })
}

/// All submasks of `mask`, including `mask` itself and the empty set.
pub fn submasks(mask: Mask) -> impl Iterator<Item = Mask> {
    let mut next = Some(mask);
    std::iter::from_fn(move || {
        let cur = next?;
        next = if cur == 0 {
            None
        } else {
            Some((cur - 1) & mask)
        };
        Some(cur)
    })
}

/// All supersets of `mask` inside `full`.
pub fn supersets(mask: Mask, full: Mask) -> impl Iterator<Item = Mask> {
    let free = full & !mask;
    submasks(free).map(move |s| s | mask)
}

/// Sum of a vector over the members of `mask`.
pub fn sum_over(values: &[Rat], mask: Mask) -> Rat {
    members(mask).fold(Rat::zero(), |acc, k| acc + &values[k])
}

/// An ordered list of labelled elements.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GroundSet {
    labels: Vec<String>,
    index: HashMap<String, usize>,
}

impl GroundSet {
    pub fn new<I, S>(labels: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        let mut index = HashMap::with_capacity(labels.len());
        for (k, label) in labels.iter().enumerate() {
            if index.insert(label.clone(), k).is_some() {
                return Err(Error::ContractViolation(format!(
                    "duplicate ground element {label:?}"
                )));
            }
        }
        Ok(GroundSet { labels, index })
    }

    /// Ground set labelled `0..n`.
    pub fn indexed(n: usize) -> Self {
        Self::new((0..n).map(|k| k.to_string())).expect("indices are distinct")
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn position(&self, label: &str) -> Option<usize> {
        self.index.get(label).copied()
    }

    pub fn full(&self) -> Mask {
        full_mask(self.len())
    }

    /// Mask of the given labels; unknown labels are a contract violation.
    pub fn mask_of<'a>(&self, labels: impl IntoIterator<Item = &'a str>) -> Result<Mask> {
        let mut mask = 0;
        for label in labels {
            let k = self.position(label).ok_or_else(|| {
                Error::ContractViolation(format!("{label:?} is not in the ground set"))
            })?;
            mask |= bit(k);
        }
        Ok(mask)
    }

    pub fn labels_of(&self, mask: Mask) -> Vec<String> {
        members(mask).map(|k| self.labels[k].clone()).collect()
    }
}

/// A set function stored as a full table of exact values.
///
/// Nothing about the values is assumed at construction time; use
/// [`verify_oracle`] to establish the polymatroid axioms.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SetFunction {
    ground: GroundSet,
    values: Vec<Rat>,
}

impl SetFunction {
    pub fn from_fn(ground: GroundSet, mut f: impl FnMut(Mask) -> Rat) -> Result<Self> {
        check_ground(ground.len())?;
        let values = (0..=ground.full()).map(&mut f).collect();
        Ok(SetFunction { ground, values })
    }

    pub fn from_table(ground: GroundSet, values: Vec<Rat>) -> Result<Self> {
        check_ground(ground.len())?;
        if values.len() != 1usize << ground.len() {
            return Err(Error::ContractViolation(format!(
                "table has {} entries, expected {}",
                values.len(),
                1usize << ground.len()
            )));
        }
        Ok(SetFunction { ground, values })
    }

    pub fn ground(&self) -> &GroundSet {
        &self.ground
    }

    pub fn len(&self) -> usize {
        self.ground.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ground.is_empty()
    }

    pub fn full(&self) -> Mask {
        self.ground.full()
    }

    pub fn eval(&self, mask: Mask) -> &Rat {
        &self.values[mask as usize]
    }

    pub fn values(&self) -> &[Rat] {
        &self.values
    }

    pub(crate) fn with_values(&self, values: Vec<Rat>) -> SetFunction {
        debug_assert_eq!(values.len(), self.values.len());
        SetFunction {
            ground: self.ground.clone(),
            values,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn subset_iterators() {
        let subs: Vec<Mask> = submasks(0b101).collect();
        assert_eq!(subs, vec![0b101, 0b100, 0b001, 0]);
        let sups: Vec<Mask> = supersets(0b001, 0b111).collect();
        assert_eq!(sups.len(), 4);
        assert!(sups.iter().all(|s| s & 1 == 1));
        assert_eq!(members(0b1010).collect::<Vec<_>>(), vec![1, 3]);
        assert_eq!(full_mask(0), 0);
        assert_eq!(full_mask(3), 0b111);
    }

    #[test]
    fn ground_set_rejects_duplicates() {
        assert!(GroundSet::new(["a", "a"]).is_err());
        let g = GroundSet::new(["a", "b", "c"]).unwrap();
        assert_eq!(g.mask_of(["a", "c"]).unwrap(), 0b101);
        assert_eq!(g.labels_of(0b110), vec!["b", "c"]);
        assert!(g.mask_of(["z"]).is_err());
    }

    #[test]
    fn guard_refuses_large_ground() {
        let big = GroundSet::indexed(HARD_GROUND_LIMIT + 1);
        let err = SetFunction::from_fn(big, |_| Rat::zero()).unwrap_err();
        assert!(matches!(err, Error::EnumerationRefused { .. }));
    }
}
