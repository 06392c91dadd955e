//! Seeded random market instances for the randomized suites.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::market::{validate, Buyer, Capacity, MarketInstance, Seller};
use crate::polymatroid::{full_mask, members};
use crate::rational::{int, rat, ExtRat, Rat};

#[derive(Clone, Debug)]
pub struct GenParams {
    pub buyers: usize,
    pub sellers: usize,
    /// Largest capacity value of any seller.
    pub max_capacity: i64,
    /// Bids are drawn from `{1..=max_bid_steps} · ε`.
    pub max_bid_steps: i64,
    /// Let some sellers have no supply at all.
    pub allow_zero_capacity: bool,
    /// Draw a sample value for every seller.
    pub with_samples: bool,
    /// Require `ε <= v_min^2 / (v_max - v_min)` over all valuations and
    /// samples.
    pub gated: bool,
}

impl Default for GenParams {
    fn default() -> Self {
        GenParams {
            buyers: 3,
            sellers: 2,
            max_capacity: 3,
            max_bid_steps: 5,
            allow_zero_capacity: false,
            with_samples: false,
            gated: true,
        }
    }
}

const EPSILONS: [(i64, i64); 4] = [(1, 1), (1, 2), (1, 4), (1, 10)];

fn gate_holds(values: &[Rat], eps: &Rat) -> bool {
    let vmin = values.iter().min().expect("nonempty");
    let vmax = values.iter().max().expect("nonempty");
    vmax == vmin || eps * (vmax - vmin) <= vmin * vmin
}

/// A table capacity: a truncated sum of concave-of-modular terms, which is
/// always a polymatroid rank function.
fn random_table(rng: &mut ChaCha8Rng, edges: usize, max_capacity: i64) -> Vec<Rat> {
    let terms = rng.gen_range(1..=2);
    let mut parts = Vec::new();
    for _ in 0..terms {
        let cap = rng.gen_range(1..=max_capacity);
        let weights: Vec<i64> = (0..edges).map(|_| rng.gen_range(0..=2)).collect();
        parts.push((cap, weights));
    }
    let total_cap = rng.gen_range(1..=max_capacity);
    (0..=full_mask(edges))
        .map(|s| {
            let sum: i64 = parts
                .iter()
                .map(|(cap, weights)| members(s).map(|k| weights[k]).sum::<i64>().min(*cap))
                .sum();
            int(sum.min(total_cap))
        })
        .collect()
}

/// Draws an instance that always passes validation.
pub fn generate_instance(params: &GenParams, seed: u64) -> MarketInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (en, ed) = *EPSILONS.choose(&mut rng).expect("nonempty");
    let eps = rat(en, ed);
    let steps = params.max_bid_steps.max(1);

    loop {
        let values: Vec<Rat> = (0..params.buyers
            + params.sellers * (1 + params.with_samples as usize))
            .map(|_| &eps * int(rng.gen_range(1..=steps)))
            .collect();
        if params.gated && !gate_holds(&values, &eps) {
            continue;
        }
        let buyers: Vec<Buyer> = (0..params.buyers)
            .map(|i| {
                let budget = if rng.gen_bool(0.15) {
                    &eps * int(rng.gen_range(20..=60))
                } else {
                    &eps * int(rng.gen_range(1..=10))
                };
                Buyer {
                    id: format!("b{}", i + 1),
                    valuation: values[i].clone(),
                    bid: values[i].clone(),
                    budget: ExtRat::Finite(budget),
                }
            })
            .collect();

        let mut edges = Vec::new();
        let mut sellers = Vec::new();
        for j in 0..params.sellers {
            let sid = format!("s{}", j + 1);
            let mut adjacent: Vec<usize> =
                (0..params.buyers).filter(|_| rng.gen_bool(0.6)).collect();
            if adjacent.is_empty() && params.buyers > 0 {
                adjacent.push(rng.gen_range(0..params.buyers));
            }
            for &i in &adjacent {
                edges.push((buyers[i].id.clone(), sid.clone()));
            }
            let zero = params.allow_zero_capacity && rng.gen_bool(0.25);
            let capacity = if zero {
                Capacity::Table {
                    values: vec![int(0); 1 << adjacent.len()],
                }
            } else {
                Capacity::Table {
                    values: random_table(&mut rng, adjacent.len(), params.max_capacity.max(1)),
                }
            };
            let value = values[params.buyers + j].clone();
            let sample = params
                .with_samples
                .then(|| values[params.buyers + params.sellers + j].clone());
            sellers.push(Seller {
                id: sid,
                valuation: value.clone(),
                bid: value,
                sample,
                capacity,
            });
        }
        // Interleave edges so seller-local order differs from buyer order.
        edges.shuffle(&mut rng);

        let instance = MarketInstance {
            epsilon: Some(eps.clone()),
            buyers,
            sellers,
            edges,
        };
        if validate(&instance).is_ok() {
            return instance;
        }
    }
}

/// Whether the efficiency gate holds for the instance's valuations.
pub fn efficiency_gate(instance: &MarketInstance, eps: &Rat) -> bool {
    let values: Vec<Rat> = instance
        .buyers
        .iter()
        .map(|b| b.valuation.clone())
        .chain(instance.sellers.iter().map(|s| s.valuation.clone()))
        .collect();
    values.is_empty() || gate_holds(&values, eps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polymatroid::{verify_oracle, GroundSet, SetFunction};

    #[test]
    fn generation_is_deterministic() {
        let p = GenParams::default();
        assert_eq!(generate_instance(&p, 7), generate_instance(&p, 7));
    }

    #[test]
    fn random_tables_are_polymatroids() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for edges in 0..5 {
            let table = random_table(&mut rng, edges, 3);
            let f = SetFunction::from_table(GroundSet::indexed(edges), table).unwrap();
            assert!(verify_oracle(&f).unwrap().is_polymatroid());
        }
    }
}
