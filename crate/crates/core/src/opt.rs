//! The optimal liquid-welfare allocation and the welfare measures.
//!
//! Buyers are served in descending valuation (ties by lower index), each
//! taking as much as the supply left by higher-priority buyers allows, up to
//! `B_i / v_i`. Beyond that point extra goods add nothing to liquid welfare.

use num_traits::Zero;

use crate::error::{Error, Result};
use crate::market::PreprocessedMarket;
use crate::polymatroid::{bit, greedy_max, membership, reduce_by_caps, submasks, sum_over, Mask};
use crate::rational::{ExtRat, Rat};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OptAllocation {
    /// Goods per preprocessed buyer.
    pub x_star: Vec<Rat>,
    /// Buyers in service order.
    pub order: Vec<usize>,
    /// `H_i`: buyers served before `i`.
    pub priority: Vec<Mask>,
    pub lw_opt: Rat,
}

/// How buyers with equal valuations are ordered.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum TieBreak {
    /// Lower index first.
    #[default]
    LowerIndex,
    /// Higher index first. Under the round-robin clock a buyer with a
    /// higher index reaches a shared bid later, so this matches the order
    /// in which the auction sees tied buyers drop (last dropped first).
    HigherIndex,
}

/// Descending valuation, ties broken by lower index.
pub fn priority_order(pm: &PreprocessedMarket) -> Vec<usize> {
    priority_order_with(pm, TieBreak::LowerIndex)
}

pub fn priority_order_with(pm: &PreprocessedMarket, tie: TieBreak) -> Vec<usize> {
    let mut order: Vec<usize> = (0..pm.buyer_count()).collect();
    order.sort_by(|&a, &b| {
        let by_value = pm.buyers[b].valuation.cmp(&pm.buyers[a].valuation);
        match tie {
            TieBreak::LowerIndex => by_value.then(a.cmp(&b)),
            TieBreak::HigherIndex => by_value.then(b.cmp(&a)),
        }
    });
    order
}

/// `B_i / v_i` per buyer; unbounded budgets give `+∞`.
pub fn demand_caps(pm: &PreprocessedMarket) -> Vec<ExtRat> {
    pm.buyers
        .iter()
        .map(|b| b.budget.div_rat(&b.valuation))
        .collect()
}

/// `x*_i = min(B_i/v_i, min_{H ⊆ H_i} g(H + i) - x*(H))` in service order.
pub fn opt_recursive(pm: &PreprocessedMarket) -> Vec<Rat> {
    opt_recursive_with(pm, TieBreak::LowerIndex)
}

pub fn opt_recursive_with(pm: &PreprocessedMarket, tie: TieBreak) -> Vec<Rat> {
    let caps = demand_caps(pm);
    let mut x = vec![Rat::zero(); pm.buyer_count()];
    let mut served: Mask = 0;
    for i in priority_order_with(pm, tie) {
        let room = submasks(served)
            .map(|h| pm.g.eval(h | bit(i)) - sum_over(&x, h))
            .min()
            .expect("at least the empty set");
        x[i] = caps[i].min_rat(&room);
        served |= bit(i);
    }
    x
}

/// Greedy over `g` reduced by the caps `B/v`, in service order.
pub fn opt_greedy(pm: &PreprocessedMarket) -> Result<Vec<Rat>> {
    opt_greedy_with(pm, TieBreak::LowerIndex)
}

pub fn opt_greedy_with(pm: &PreprocessedMarket, tie: TieBreak) -> Result<Vec<Rat>> {
    let caps = demand_caps(pm);
    let reduced = reduce_by_caps(&pm.g, &caps)?;
    greedy_max(&reduced, &priority_order_with(pm, tie), &caps)
}

/// Runs both constructions and insists they agree.
pub fn optimal_lw_allocation(pm: &PreprocessedMarket) -> Result<OptAllocation> {
    optimal_lw_allocation_with(pm, TieBreak::LowerIndex)
}

pub fn optimal_lw_allocation_with(pm: &PreprocessedMarket, tie: TieBreak) -> Result<OptAllocation> {
    let order = priority_order_with(pm, tie);
    let x_star = opt_recursive_with(pm, tie);
    let greedy = opt_greedy_with(pm, tie)?;
    if greedy != x_star {
        return Err(Error::Internal(format!(
            "optimal allocation routes disagree: recursive {x_star:?}, greedy {greedy:?}"
        )));
    }
    let total: Rat = x_star.iter().sum();
    if &total != pm.total_supply() {
        return Err(Error::Internal(format!(
            "optimal allocation leaves supply unallocated: {total} of {}",
            pm.total_supply()
        )));
    }
    if !membership(&pm.g, &x_star)? {
        return Err(Error::Internal("optimal allocation is infeasible".into()));
    }
    let mut priority = vec![0; pm.buyer_count()];
    let mut served: Mask = 0;
    for &i in &order {
        priority[i] = served;
        served |= bit(i);
    }
    let lw_opt = liquid_welfare(pm, &x_star);
    Ok(OptAllocation {
        x_star,
        order,
        priority,
        lw_opt,
    })
}

/// `Σ min(v_i x_i, B_i)` over preprocessed buyers.
pub fn liquid_welfare(pm: &PreprocessedMarket, x: &[Rat]) -> Rat {
    pm.buyers
        .iter()
        .zip(x)
        .map(|(b, xi)| b.budget.min_rat(&(&b.valuation * xi)))
        .sum()
}

/// `Σ v_i x_i` over preprocessed buyers.
pub fn social_welfare(pm: &PreprocessedMarket, x: &[Rat]) -> Rat {
    pm.buyers
        .iter()
        .zip(x)
        .map(|(b, xi)| &b.valuation * xi)
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::{preprocess, tight_lw_instance, SellerValues};
    use crate::rational::{int, rat};

    #[test]
    fn tight_instance_optimum() {
        let pm = preprocess(&tight_lw_instance(), SellerValues::Bids).unwrap();
        let opt = optimal_lw_allocation(&pm).unwrap();
        assert_eq!(opt.order, vec![1, 0, 2]);
        assert_eq!(opt.x_star, vec![rat(2, 3), rat(1, 3), int(0)]);
        assert_eq!(opt.lw_opt, int(2));
        assert_eq!(opt.priority[0], 0b010);
    }

    #[test]
    fn welfare_of_nothing_is_zero() {
        let pm = preprocess(&tight_lw_instance(), SellerValues::Bids).unwrap();
        let zero = vec![Rat::zero(); 3];
        assert!(liquid_welfare(&pm, &zero).is_zero());
        assert!(social_welfare(&pm, &zero).is_zero());
        let x = vec![int(0), int(1), int(0)];
        assert_eq!(liquid_welfare(&pm, &x), int(1));
        assert_eq!(social_welfare(&pm, &x), int(3));
    }
}
