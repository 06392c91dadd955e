use proptest::prelude::*;

use polyclinch::auction::{iteration_guard, replay, run_pca, run_pca_untraced};
use polyclinch::generate::{generate_instance, GenParams};
use polyclinch::market::{preprocess, Buyer, Capacity, MarketInstance, Seller, SellerValues};
use polyclinch::opt::{optimal_lw_allocation_with, TieBreak};
use polyclinch::polymatroid::membership;
use polyclinch::rational::{int, rat, ExtRat, Rat};
use polyclinch::verify::{check_trace, tight_lw_example};

fn one_on_one(buyer_value: Rat, budget: ExtRat, seller_value: Rat, eps: Rat) -> MarketInstance {
    MarketInstance {
        epsilon: Some(eps),
        buyers: vec![Buyer {
            id: "b".into(),
            valuation: buyer_value.clone(),
            bid: buyer_value,
            budget,
        }],
        sellers: vec![Seller {
            id: "s".into(),
            valuation: seller_value.clone(),
            bid: seller_value,
            sample: None,
            capacity: Capacity::Rank {
                unit: int(1),
                cap: int(1),
            },
        }],
        edges: vec![("b".into(), "s".into())],
    }
}

#[test]
fn budget_bound_buyer_takes_the_whole_unit_at_the_low_value() {
    let instance = tight_lw_example(&int(1), &int(3), &rat(1, 2));
    let pm = preprocess(&instance, SellerValues::Bids).unwrap();
    let a = run_pca(&pm).unwrap().allocation;
    assert_eq!(a.goods, vec![int(0), int(1)]);
    assert_eq!(a.payments, vec![int(0), int(1)]);
    assert_eq!(a.revenues, vec![int(1)]);
    assert_eq!(a.sold, vec![int(1)]);
    assert_eq!(a.retained, vec![int(0)]);
}

#[test]
fn lone_buyer_outbids_the_seller() {
    let instance = one_on_one(int(3), ExtRat::PosInf, int(1), rat(1, 2));
    let pm = preprocess(&instance, SellerValues::Bids).unwrap();
    let a = run_pca(&pm).unwrap().allocation;
    assert_eq!(a.goods, vec![int(1)]);
    // The seller's own demand drops once the clock passes its value.
    assert!(a.payments[0] >= int(1) && a.payments[0] <= rat(3, 2));
    assert_eq!(a.revenues[0], a.payments[0]);
}

#[test]
fn lone_buyer_below_the_seller_buys_nothing() {
    let instance = one_on_one(int(1), ExtRat::PosInf, int(3), rat(1, 2));
    let pm = preprocess(&instance, SellerValues::Bids).unwrap();
    let a = run_pca(&pm).unwrap().allocation;
    assert_eq!(a.goods, vec![int(0)]);
    assert_eq!(a.payments, vec![int(0)]);
    assert_eq!(a.retained, vec![int(1)]);
}

#[test]
fn zero_budget_buyer_buys_nothing() {
    let instance = one_on_one(int(3), ExtRat::Finite(int(0)), int(1), rat(1, 2));
    let pm = preprocess(&instance, SellerValues::Bids).unwrap();
    let a = run_pca(&pm).unwrap().allocation;
    assert_eq!(a.goods, vec![int(0)]);
    assert_eq!(a.payments, vec![int(0)]);
}

fn instance_strategy() -> impl Strategy<Value = MarketInstance> {
    (
        1usize..=4,
        1usize..=3,
        any::<bool>(),
        any::<bool>(),
        any::<u64>(),
    )
        .prop_map(|(buyers, sellers, gated, zero, seed)| {
            let params = GenParams {
                buyers,
                sellers,
                max_capacity: 3,
                max_bid_steps: 6,
                allow_zero_capacity: zero,
                with_samples: false,
                gated,
            };
            generate_instance(&params, seed)
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn outcome_is_feasible_balanced_and_rational(instance in instance_strategy()) {
        let pm = preprocess(&instance, SellerValues::Bids).unwrap();
        let run = run_pca(&pm).unwrap();
        let a = &run.allocation;

        let paid: Rat = a.payments.iter().sum();
        let received: Rat = a.revenues.iter().sum();
        prop_assert_eq!(paid, received);

        for (i, b) in instance.buyers.iter().enumerate() {
            prop_assert!(a.payments[i] <= &b.valuation * &a.goods[i]);
            if let ExtRat::Finite(budget) = &b.budget {
                prop_assert!(&a.payments[i] <= budget);
            }
        }
        for (j, s) in instance.sellers.iter().enumerate() {
            prop_assert!(a.revenues[j] >= &s.valuation * &a.sold[j]);
            let f = instance.seller_function(j).unwrap();
            let local: Vec<Rat> = instance
                .edges
                .iter()
                .enumerate()
                .filter(|(_, (_, sid))| sid == &s.id)
                .map(|(k, _)| a.w[k].clone())
                .collect();
            prop_assert!(membership(&f, &local).unwrap());
            prop_assert_eq!(&a.sold[j] + &a.retained[j], f.eval(f.full()).clone());
        }
        prop_assert!(run.iterations <= iteration_guard(&pm));
    }

    #[test]
    fn runs_are_deterministic_and_replayable(instance in instance_strategy()) {
        let pm = preprocess(&instance, SellerValues::Bids).unwrap();
        let traced = run_pca(&pm).unwrap();
        let again = run_pca(&pm).unwrap();
        let untraced = run_pca_untraced(&pm).unwrap();
        prop_assert_eq!(&traced.allocation, &again.allocation);
        prop_assert_eq!(&traced.trace, &again.trace);
        prop_assert_eq!(&traced.allocation, &untraced.allocation);
        let states = replay(&pm, traced.trace.as_ref().unwrap()).unwrap();
        prop_assert_eq!(states.last().unwrap(), &traced.final_state);
    }

    #[test]
    fn every_trace_check_holds(instance in instance_strategy()) {
        let pm = preprocess(&instance, SellerValues::Bids).unwrap();
        let run = run_pca(&pm).unwrap();
        let opt = optimal_lw_allocation_with(&pm, TieBreak::HigherIndex).unwrap();
        let report = check_trace(&pm, run.trace.as_ref().unwrap(), &run.allocation, &opt).unwrap();
        let failed: Vec<_> = report.failures().map(|c| (&c.name, &c.witness)).collect();
        prop_assert!(failed.is_empty(), "{:?}", failed);
    }
}
