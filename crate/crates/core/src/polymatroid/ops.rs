use num_traits::Zero;

use super::{bit, check_ground, members, submasks, supersets, Mask, SetFunction};
use crate::error::{Error, Result};
use crate::rational::{ExtRat, Rat};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Axiom {
    Normalized,
    Monotone,
    Submodular,
}

/// A concrete failure of one axiom.
///
/// For `Monotone`, `s ⊂ t` with `f(s) > f(t)`. For `Submodular`,
/// `f(s) + f(t) < f(s ∩ t) + f(s ∪ t)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    pub axiom: Axiom,
    pub s: Mask,
    pub t: Mask,
    pub lhs: Rat,
    pub rhs: Rat,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OracleReport {
    pub normalized: bool,
    pub monotone: bool,
    pub submodular: bool,
    pub violations: Vec<Violation>,
}

impl OracleReport {
    pub fn is_polymatroid(&self) -> bool {
        self.normalized && self.monotone && self.submodular
    }

    pub fn first_violation(&self) -> Option<&Violation> {
        self.violations.first()
    }
}

/// Exhaustive check of normalization, monotonicity and submodularity.
///
/// Uses the local forms `f(S+a) >= f(S)` and
/// `f(S+a) + f(S+b) >= f(S+a+b) + f(S)`, which are equivalent to the global
/// axioms. At most one witness is kept per axiom.
pub fn verify_oracle(f: &SetFunction) -> Result<OracleReport> {
    check_ground(f.len())?;
    let n = f.len();
    let full = f.full();
    let mut violations = Vec::new();

    let normalized = f.eval(0).is_zero();
    if !normalized {
        violations.push(Violation {
            axiom: Axiom::Normalized,
            s: 0,
            t: 0,
            lhs: f.eval(0).clone(),
            rhs: Rat::zero(),
        });
    }

    let mut monotone = true;
    let mut submodular = true;
    for s in 0..=full {
        for a in (0..n).filter(|&a| s & bit(a) == 0) {
            let sa = s | bit(a);
            if monotone && f.eval(sa) < f.eval(s) {
                monotone = false;
                violations.push(Violation {
                    axiom: Axiom::Monotone,
                    s,
                    t: sa,
                    lhs: f.eval(s).clone(),
                    rhs: f.eval(sa).clone(),
                });
            }
            if !submodular {
                continue;
            }
            for b in (a + 1..n).filter(|&b| s & bit(b) == 0) {
                let sb = s | bit(b);
                let lhs = f.eval(sa) + f.eval(sb);
                let rhs = f.eval(sa | sb) + f.eval(s);
                if lhs < rhs {
                    submodular = false;
                    violations.push(Violation {
                        axiom: Axiom::Submodular,
                        s: sa,
                        t: sb,
                        lhs,
                        rhs,
                    });
                    break;
                }
            }
        }
    }
    Ok(OracleReport {
        normalized,
        monotone,
        submodular,
        violations,
    })
}

/// `table[S] = x(S)` for every subset of an `n`-element ground set.
pub(crate) fn modular_table(x: &[Rat]) -> Vec<Rat> {
    let size = 1usize << x.len();
    let mut table = vec![Rat::zero(); size];
    for s in 1..size {
        let low = s.trailing_zeros() as usize;
        table[s] = &table[s & (s - 1)] + &x[low];
    }
    table
}

fn check_len(f: &SetFunction, len: usize, what: &str) -> Result<()> {
    if len != f.len() {
        return Err(Error::ContractViolation(format!(
            "{what} has {len} entries, ground set has {}",
            f.len()
        )));
    }
    Ok(())
}

/// `x ∈ P(f)`: `x >= 0` and `x(S) <= f(S)` for every subset.
pub fn membership(f: &SetFunction, x: &[Rat]) -> Result<bool> {
    check_len(f, x.len(), "vector")?;
    if x.iter().any(|v| v < &Rat::zero()) {
        return Ok(false);
    }
    let sums = modular_table(x);
    Ok(sums.iter().zip(f.values()).all(|(xs, fs)| xs <= fs))
}

/// Greedy maximal point of `{y ∈ P(f) : y <= caps}` scanning `order`.
///
/// Each element receives the largest increment the already-fixed prefix
/// allows, capped by its entry in `caps`. Elements missing from `order`
/// stay at zero.
pub fn greedy_max(f: &SetFunction, order: &[usize], caps: &[ExtRat]) -> Result<Vec<Rat>> {
    check_len(f, caps.len(), "caps")?;
    let mut seen: Mask = 0;
    for &e in order {
        if e >= f.len() || seen & bit(e) != 0 {
            return Err(Error::ContractViolation(format!(
                "greedy order is not a permutation: element {e}"
            )));
        }
        seen |= bit(e);
    }
    let mut y = vec![Rat::zero(); f.len()];
    let mut prefix: Mask = 0;
    for &e in order {
        // Monotonicity lets the binding sets be restricted to prefix + e.
        let slack = submasks(prefix)
            .map(|t| f.eval(t | bit(e)) - super::sum_over(&y, t))
            .min()
            .expect("at least the empty submask");
        let inc = caps[e].min_rat(&slack);
        y[e] = if inc < Rat::zero() { Rat::zero() } else { inc };
        prefix |= bit(e);
    }
    Ok(y)
}

/// `table[A] = min_{B ⊇ A} f(B) - x(B)`, by a superset-minimum sweep.
pub fn contraction_table(f: &SetFunction, x: &[Rat]) -> Result<Vec<Rat>> {
    check_len(f, x.len(), "vector")?;
    Ok(contraction_values(f.values(), x))
}

pub(crate) fn contraction_values(f: &[Rat], x: &[Rat]) -> Vec<Rat> {
    let n = x.len();
    let sums = modular_table(x);
    let mut table: Vec<Rat> = f.iter().zip(&sums).map(|(fv, xv)| fv - xv).collect();
    for k in 0..n {
        for a in (0..table.len()).rev() {
            if a & (1 << k) == 0 {
                let up = a | (1 << k);
                if table[up] < table[a] {
                    table[a] = table[up].clone();
                }
            }
        }
    }
    table
}

/// `min_{F' ⊇ F} f(F') - x(F')` for a point `x ∈ P(f)`.
pub fn contract_rank(f: &SetFunction, x: &[Rat], set: Mask) -> Result<Rat> {
    if !membership(f, x)? {
        return Err(Error::ContractViolation(
            "contraction point lies outside the polymatroid".into(),
        ));
    }
    Ok(supersets(set, f.full())
        .map(|b| f.eval(b) - super::sum_over(x, b))
        .min()
        .expect("at least one superset"))
}

/// `out[S] = min_{T ⊆ S} phi(S \ T) + d(T)`, by peeling one element at a time.
pub fn reduce_table(phi: &[Rat], d: &[ExtRat]) -> Vec<Rat> {
    let mut out: Vec<Rat> = phi.to_vec();
    for s in 1..out.len() {
        for k in members(s as Mask) {
            if let ExtRat::Finite(dk) = &d[k] {
                let cand = &out[s & !(1 << k)] + dk;
                if cand < out[s] {
                    out[s] = cand;
                }
            }
        }
    }
    out
}

/// Reduction of `g` by demand caps: `g_d(S) = min_{T ⊆ S} g(S \ T) + d(T)`.
pub fn reduce_by_caps(g: &SetFunction, d: &[ExtRat]) -> Result<SetFunction> {
    check_len(g, d.len(), "caps")?;
    if d.iter()
        .any(|v| matches!(v, ExtRat::Finite(r) if r < &Rat::zero()))
    {
        return Err(Error::ContractViolation("negative cap".into()));
    }
    Ok(g.with_values(reduce_table(g.values(), d)))
}

/// `max{y(F) : y ∈ P(f1) ∩ P(f2)}` as the minimum of `f1(F1) + f2(F2)` over
/// every ordered cover `F1 ∪ F2 = F`.
pub fn intersection_max(f1: &SetFunction, f2: &SetFunction, set: Mask) -> Result<Rat> {
    if f1.ground() != f2.ground() {
        return Err(Error::ContractViolation(
            "intersection of functions on different ground sets".into(),
        ));
    }
    check_ground(members(set).count())?;
    let mut best: Option<Rat> = None;
    for f1_part in submasks(set) {
        let rest = set & !f1_part;
        for extra in submasks(f1_part) {
            let value = f1.eval(f1_part) + f2.eval(rest | extra);
            if best.as_ref().is_none_or(|b| &value < b) {
                best = Some(value);
            }
        }
    }
    Ok(best.expect("at least the trivial cover"))
}
