use num_traits::Zero;
use proptest::prelude::*;

use polyclinch::generate::{generate_instance, GenParams};
use polyclinch::market::{preprocess, Buyer, Capacity, MarketInstance, Seller, SellerValues};
use polyclinch::opt::{
    demand_caps, liquid_welfare, opt_greedy, opt_recursive, optimal_lw_allocation, priority_order,
    social_welfare,
};
use polyclinch::polymatroid::{greedy_max, membership};
use polyclinch::rational::{int, rat, ExtRat, Rat};

fn two_buyers_one_unit() -> MarketInstance {
    let buyer = |id: &str, v: i64, budget: ExtRat| Buyer {
        id: id.into(),
        valuation: int(v),
        bid: int(v),
        budget,
    };
    MarketInstance {
        epsilon: Some(int(1)),
        buyers: vec![
            buyer("1", 3, ExtRat::Finite(int(1))),
            buyer("2", 2, ExtRat::PosInf),
        ],
        sellers: vec![Seller {
            id: "s".into(),
            valuation: int(1),
            bid: int(1),
            sample: None,
            capacity: Capacity::Rank {
                unit: int(1),
                cap: int(1),
            },
        }],
        edges: vec![("1".into(), "s".into()), ("2".into(), "s".into())],
    }
}

#[test]
fn budget_caps_the_top_buyer_and_the_rest_flows_down() {
    let pm = preprocess(&two_buyers_one_unit(), SellerValues::Bids).unwrap();
    let opt = optimal_lw_allocation(&pm).unwrap();
    // Buyer 1 stops at B/v = 1/3, buyer 2 takes the remaining 2/3.
    assert_eq!(opt.x_star, vec![rat(1, 3), rat(2, 3), int(0)]);
    assert_eq!(opt.lw_opt, int(1) + rat(4, 3));
    assert_eq!(opt.order, vec![0, 1, 2]);
}

fn instance_strategy() -> impl Strategy<Value = MarketInstance> {
    (1usize..=4, 1usize..=3, any::<u64>()).prop_map(|(buyers, sellers, seed)| {
        let params = GenParams {
            buyers,
            sellers,
            gated: false,
            allow_zero_capacity: seed % 3 == 0,
            ..GenParams::default()
        };
        generate_instance(&params, seed)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn routes_agree_and_respect_caps(instance in instance_strategy()) {
        let pm = preprocess(&instance, SellerValues::Bids).unwrap();
        let x = opt_recursive(&pm);
        prop_assert_eq!(&x, &opt_greedy(&pm).unwrap());
        prop_assert!(membership(&pm.g, &x).unwrap());
        for (xi, cap) in x.iter().zip(demand_caps(&pm)) {
            if let ExtRat::Finite(c) = cap {
                prop_assert!(xi <= &c);
            }
        }
    }

    #[test]
    fn optimum_beats_every_greedy_vertex(
        (instance, order_seed, cap_steps) in (instance_strategy(), any::<u64>(), prop::collection::vec(0i64..=8, 8))
    ) {
        let pm = preprocess(&instance, SellerValues::Bids).unwrap();
        let opt = optimal_lw_allocation(&pm).unwrap();
        prop_assert_eq!(liquid_welfare(&pm, &opt.x_star), opt.lw_opt.clone());
        prop_assert!(social_welfare(&pm, &opt.x_star) >= opt.lw_opt);

        // Any feasible point: greedy in a rotated order under random caps.
        let n = pm.buyer_count();
        let mut order: Vec<usize> = (0..n).collect();
        order.rotate_left(order_seed as usize % n);
        let caps: Vec<ExtRat> = (0..n)
            .map(|i| ExtRat::Finite(rat(cap_steps[i % cap_steps.len()], 4)))
            .collect();
        let y = greedy_max(&pm.g, &order, &caps).unwrap();
        prop_assert!(liquid_welfare(&pm, &y) <= opt.lw_opt);
    }
}

#[test]
fn priority_is_by_descending_valuation() {
    let pm = preprocess(&two_buyers_one_unit(), SellerValues::Bids).unwrap();
    let order = priority_order(&pm);
    let values: Vec<&Rat> = order.iter().map(|&i| &pm.buyers[i].valuation).collect();
    assert!(values.windows(2).all(|w| w[0] >= w[1]));
    assert_eq!(order.len(), pm.buyer_count());
}

#[test]
fn empty_allocation_has_no_welfare() {
    let pm = preprocess(&two_buyers_one_unit(), SellerValues::Bids).unwrap();
    let zeros = vec![Rat::zero(); pm.buyer_count()];
    assert!(liquid_welfare(&pm, &zeros).is_zero());
}
