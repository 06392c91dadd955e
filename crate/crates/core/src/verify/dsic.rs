use serde_json::json;

use super::{r, CheckReport};
use crate::auction::{run_pca_untraced, Allocation};
use crate::error::{Error, Result};
use crate::market::{preprocess, MarketInstance, SellerValues};
use crate::rational::{is_multiple_of, ExtRat, Rat};
use crate::single_sample::run_mechanism_untraced;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mechanism {
    /// The clinching auction with truthful sellers.
    Pca,
    /// The single-sample mechanism; sellers are strategic too.
    SingleSample,
}

fn outcome(instance: &MarketInstance, mechanism: Mechanism) -> Result<Allocation> {
    match mechanism {
        Mechanism::Pca => {
            let pm = preprocess(instance, SellerValues::Bids)?;
            Ok(run_pca_untraced(&pm)?.allocation)
        }
        Mechanism::SingleSample => Ok(run_mechanism_untraced(instance)?.allocation),
    }
}

/// `v x - p`, or `None` (minus infinity) when the payment exceeds the budget.
fn buyer_utility(instance: &MarketInstance, alloc: &Allocation, i: usize) -> Option<Rat> {
    let b = &instance.buyers[i];
    if let ExtRat::Finite(budget) = &b.budget {
        if &alloc.payments[i] > budget {
            return None;
        }
    }
    Some(&b.valuation * &alloc.goods[i] - &alloc.payments[i])
}

fn seller_utility(instance: &MarketInstance, alloc: &Allocation, j: usize) -> Rat {
    &alloc.revenues[j] - &instance.sellers[j].valuation * &alloc.sold[j]
}

fn show(u: &Option<Rat>) -> String {
    u.as_ref()
        .map_or_else(|| "-inf".to_string(), Rat::to_string)
}

/// Compares truthful utility against every unilateral deviation to a bid
/// on the grid `step, 2·step, ..., <= 2·v_max`. Truthful means every bid
/// equals the valuation; the clock increment is pinned to the instance's.
pub fn check_dsic(
    instance: &MarketInstance,
    grid_step: &Rat,
    mechanism: Mechanism,
) -> Result<CheckReport> {
    let eps = instance.resolved_epsilon()?;
    if grid_step <= &Rat::from_integer(0.into()) || !is_multiple_of(grid_step, &eps) {
        return Err(Error::Config(format!(
            "deviation step {grid_step} must be a positive multiple of epsilon {eps}"
        )));
    }
    let mut truthful = instance.with_epsilon(eps);
    for b in &mut truthful.buyers {
        b.bid = b.valuation.clone();
    }
    for s in &mut truthful.sellers {
        s.bid = s.valuation.clone();
    }
    let vmax = truthful
        .buyers
        .iter()
        .map(|b| &b.valuation)
        .chain(truthful.sellers.iter().map(|s| &s.valuation))
        .max()
        .cloned()
        .unwrap_or_else(|| Rat::from_integer(0.into()));
    let limit = &vmax * Rat::from_integer(2.into());
    let mut grid = Vec::new();
    let mut bid = grid_step.clone();
    while bid <= limit {
        grid.push(bid.clone());
        bid += grid_step;
    }

    let base = outcome(&truthful, mechanism)?;
    let mut report = CheckReport::new();
    report.declare("buyer_dsic");
    for i in 0..truthful.buyers.len() {
        let honest = buyer_utility(&truthful, &base, i);
        for dev in &grid {
            let mut deviated = truthful.clone();
            deviated.buyers[i].bid = dev.clone();
            let alloc = outcome(&deviated, mechanism)?;
            let lied = buyer_utility(&truthful, &alloc, i);
            let ok = match (&honest, &lied) {
                (_, None) => true,
                (None, Some(_)) => false,
                (Some(h), Some(l)) => h >= l,
            };
            report.assert("buyer_dsic", ok, || {
                json!({
                    "buyer": truthful.buyers[i].id,
                    "deviation": r(dev),
                    "truthful_utility": show(&honest),
                    "deviated_utility": show(&lied),
                })
            });
        }
    }

    if mechanism == Mechanism::SingleSample {
        report.declare("seller_dsic");
        for j in 0..truthful.sellers.len() {
            let honest = seller_utility(&truthful, &base, j);
            for dev in &grid {
                let mut deviated = truthful.clone();
                deviated.sellers[j].bid = dev.clone();
                let alloc = outcome(&deviated, mechanism)?;
                let lied = seller_utility(&truthful, &alloc, j);
                report.assert("seller_dsic", honest >= lied, || {
                    json!({
                        "seller": truthful.sellers[j].id,
                        "deviation": r(dev),
                        "truthful_utility": r(&honest),
                        "deviated_utility": r(&lied),
                    })
                });
            }
        }
    }
    Ok(report)
}
