//! Rank functions of the remnant supply polytope on buyers.

use num_traits::Zero;

use super::ops::{contraction_values, membership, modular_table, reduce_table};
use super::{submasks, sum_over, Mask, SetFunction};
use crate::error::{Error, Result};
use crate::rational::{ExtRat, Rat};

fn ext_sum(d: &[ExtRat], mask: Mask) -> ExtRat {
    let mut total = Rat::zero();
    for k in super::members(mask) {
        match &d[k] {
            ExtRat::Finite(v) => total += v,
            ExtRat::PosInf => return ExtRat::PosInf,
        }
    }
    ExtRat::Finite(total)
}

fn check_inputs(g: &SetFunction, x: &[Rat], d: &[ExtRat]) -> Result<()> {
    if x.len() != g.len() || d.len() != g.len() {
        return Err(Error::ContractViolation(format!(
            "state vectors have {} and {} entries, ground set has {}",
            x.len(),
            d.len(),
            g.len()
        )));
    }
    Ok(())
}

/// `g_{x,d}(S) = min_{S' ⊆ S} { min_{S'' ⊇ S'} g(S'') - x(S'') + d(S \ S') }`,
/// evaluated literally by nested enumeration.
pub fn remnant_rank(g: &SetFunction, x: &[Rat], d: &[ExtRat], set: Mask) -> Result<Rat> {
    check_inputs(g, x, d)?;
    if !membership(g, x)? {
        return Err(Error::ContractViolation(
            "aggregate allocation lies outside the polymatroid".into(),
        ));
    }
    let mut best: Option<Rat> = None;
    for inner in submasks(set) {
        let ExtRat::Finite(cap) = ext_sum(d, set & !inner) else {
            continue;
        };
        let contracted = super::supersets(inner, g.full())
            .map(|b| g.eval(b) - sum_over(x, b))
            .min()
            .expect("at least one superset");
        let value = contracted + cap;
        if best.as_ref().is_none_or(|b| &value < b) {
            best = Some(value);
        }
    }
    Ok(best.expect("S' = S is always finite"))
}

/// `min_{S' ⊆ S} g(S') - x(S') + d(S \ S')`.
///
/// Agrees with [`remnant_rank`] on states reached by the auction; for an
/// arbitrary `(x, d)` it may be larger.
pub fn remnant_rank_simple(g: &SetFunction, x: &[Rat], d: &[ExtRat], set: Mask) -> Result<Rat> {
    check_inputs(g, x, d)?;
    let mut best: Option<Rat> = None;
    for inner in submasks(set) {
        let ExtRat::Finite(cap) = ext_sum(d, set & !inner) else {
            continue;
        };
        let value = g.eval(inner) - sum_over(x, inner) + cap;
        if best.as_ref().is_none_or(|b| &value < b) {
            best = Some(value);
        }
    }
    Ok(best.expect("S' = S is always finite"))
}

/// Both remnant rank functions tabulated over every subset of buyers.
#[derive(Clone, Debug)]
pub struct RemnantTables {
    /// Contracted form, one entry per subset.
    pub full: Vec<Rat>,
    /// Uncontracted form, one entry per subset.
    pub simple: Vec<Rat>,
}

impl RemnantTables {
    pub fn new(g: &SetFunction, x: &[Rat], d: &[ExtRat]) -> Result<Self> {
        check_inputs(g, x, d)?;
        Ok(RemnantTables {
            full: remnant_table(g.values(), x, d),
            simple: simple_table(g.values(), x, d),
        })
    }
}

/// Contracted remnant rank for every subset, in `O(n 2^n)`.
pub(crate) fn remnant_table(g: &[Rat], x: &[Rat], d: &[ExtRat]) -> Vec<Rat> {
    reduce_table(&contraction_values(g, x), d)
}

pub(crate) fn simple_table(g: &[Rat], x: &[Rat], d: &[ExtRat]) -> Vec<Rat> {
    let sums = modular_table(x);
    let phi: Vec<Rat> = g.iter().zip(&sums).map(|(a, b)| a - b).collect();
    reduce_table(&phi, d)
}
