use serde_json::json;

use super::{check_efficiency, check_trace, r, CheckReport};
use crate::auction::run_pca;
use crate::error::Result;
use crate::market::{preprocess, Buyer, Capacity, MarketInstance, Seller, SellerValues};
use crate::opt::optimal_lw_allocation;
use crate::rational::{int, rat, ExtRat, Rat};
use crate::single_sample::{pairwise_eval, run_mechanism};

fn unit_seller(valuation: Rat, sample: Option<Rat>) -> Seller {
    Seller {
        id: "1".into(),
        valuation: valuation.clone(),
        bid: valuation,
        sample,
        capacity: Capacity::Rank {
            unit: int(1),
            cap: int(1),
        },
    }
}

/// One unit of supply valued `v_min`; buyer 1 values it at `v_min + ε`
/// with no budget, buyer 2 at `v_max` with budget `v_min`.
pub fn tight_lw_example(vmin: &Rat, vmax: &Rat, epsilon: &Rat) -> MarketInstance {
    let v1 = vmin + epsilon;
    MarketInstance {
        epsilon: Some(epsilon.clone()),
        buyers: vec![
            Buyer {
                id: "1".into(),
                valuation: v1.clone(),
                bid: v1,
                budget: ExtRat::PosInf,
            },
            Buyer {
                id: "2".into(),
                valuation: vmax.clone(),
                bid: vmax.clone(),
                budget: ExtRat::Finite(vmin.clone()),
            },
        ],
        sellers: vec![unit_seller(vmin.clone(), None)],
        edges: vec![("1".into(), "1".into()), ("2".into(), "1".into())],
    }
}

/// One unit of supply with seller value `δ` and sample `2δ`; buyer 1 values
/// it at 1 with no budget, buyer 2 at `k` with budget 1. The clock
/// increment is `δ`.
pub fn single_sample_example(k: i64, delta: &Rat) -> MarketInstance {
    MarketInstance {
        epsilon: Some(delta.clone()),
        buyers: vec![
            Buyer {
                id: "1".into(),
                valuation: int(1),
                bid: int(1),
                budget: ExtRat::PosInf,
            },
            Buyer {
                id: "2".into(),
                valuation: int(k),
                bid: int(k),
                budget: ExtRat::Finite(int(1)),
            },
        ],
        sellers: vec![unit_seller(delta.clone(), Some(delta * int(2)))],
        edges: vec![("1".into(), "1".into()), ("2".into(), "1".into())],
    }
}

fn expect(rep: &mut CheckReport, name: &str, got: &Rat, want: &Rat) {
    rep.assert(
        name,
        got == want,
        || json!({ "got": r(got), "expected": r(want) }),
    );
}

fn tight_lw(rep: &mut CheckReport) -> Result<()> {
    let (vmin, vmax, eps) = (int(1), int(3), rat(1, 2));
    let instance = tight_lw_example(&vmin, &vmax, &eps);
    let pm = preprocess(&instance, SellerValues::Bids)?;
    let run = run_pca(&pm)?;
    let opt = optimal_lw_allocation(&pm)?;
    let alloc = &run.allocation;

    // LW_OPT = v_min + (v_min + ε)(1 - v_min / v_max).
    let closed_form = &vmin + (&vmin + &eps) * (int(1) - &vmin / &vmax);
    expect(rep, "tight_lw/lw_opt", &opt.lw_opt, &closed_form);
    expect(rep, "tight_lw/lw_opt", &opt.lw_opt, &int(2));
    expect(
        rep,
        "tight_lw/lw_pca",
        &alloc.liquid_welfare(&instance),
        &vmin,
    );
    expect(rep, "tight_lw/buyer2_goods", &alloc.goods[1], &int(1));
    expect(rep, "tight_lw/buyer2_payment", &alloc.payments[1], &vmin);
    expect(rep, "tight_lw/optimal_split", &opt.x_star[0], &rat(2, 3));
    expect(rep, "tight_lw/optimal_split", &opt.x_star[1], &rat(1, 3));
    let lw2 = alloc.liquid_welfare(&instance) * int(2);
    expect(rep, "tight_lw/bound_is_tight", &lw2, &opt.lw_opt);

    let trace = run.trace.as_ref().expect("traced run");
    rep.absorb("tight_lw/", check_trace(&pm, trace, alloc, &opt)?);
    rep.absorb("tight_lw/", check_efficiency(&pm, &run, &opt));

    // Past the gate the half bound breaks.
    let loose = tight_lw_example(&vmin, &vmax, &int(1));
    let pm = preprocess(&loose, SellerValues::Bids)?;
    let run = run_pca(&pm)?;
    let opt = optimal_lw_allocation(&pm)?;
    let lw = run.allocation.liquid_welfare(&loose);
    rep.assert(
        "tight_lw/beyond_gate_breaks",
        &lw * int(2) < opt.lw_opt,
        || json!({ "epsilon": "1", "lw_pca": r(&lw), "lw_opt": r(&opt.lw_opt) }),
    );
    Ok(())
}

fn single_sample(rep: &mut CheckReport, k: i64, delta: Rat) -> Result<()> {
    let tag = format!("single_sample_k{k}");
    let instance = single_sample_example(k, &delta);
    let two_delta = &delta * int(2);

    // Seller kept: all goods go to buyer 2.
    let kept = run_mechanism(&instance)?;
    let a = &kept.allocation;
    expect(
        rep,
        &format!("{tag}/kept_lw"),
        &a.liquid_welfare(&instance),
        &int(1),
    );
    expect(
        rep,
        &format!("{tag}/kept_sw"),
        &a.social_welfare(&instance),
        &int(k),
    );
    expect(
        rep,
        &format!("{tag}/kept_buyer2_goods"),
        &a.goods[1],
        &int(1),
    );
    expect(
        rep,
        &format!("{tag}/kept_revenue"),
        &a.revenues[0],
        &two_delta,
    );

    // Seller excluded: nothing trades.
    let rho_a = vec![delta.clone()];
    let rho_b = vec![two_delta.clone()];
    let mut swapped = instance.clone();
    swapped.sellers[0].valuation = two_delta.clone();
    swapped.sellers[0].bid = two_delta.clone();
    swapped.sellers[0].sample = Some(delta.clone());
    let excluded = run_mechanism(&swapped)?;
    let e = &excluded.allocation;
    expect(
        rep,
        &format!("{tag}/excluded_lw"),
        &e.liquid_welfare(&swapped),
        &two_delta,
    );
    expect(
        rep,
        &format!("{tag}/excluded_sw"),
        &e.social_welfare(&swapped),
        &two_delta,
    );

    let pair = pairwise_eval(&instance, &rho_a, &rho_b)?;
    let opt_one = int(2) - rat(1, k);
    expect(
        rep,
        &format!("{tag}/lw_sum"),
        &pair.lw_sum(),
        &(int(1) + &two_delta),
    );
    expect(
        rep,
        &format!("{tag}/sw_sum"),
        &pair.sw_sum(),
        &(int(k) + &two_delta),
    );
    expect(
        rep,
        &format!("{tag}/opt_sum"),
        &pair.opt_sum(),
        &(&opt_one * int(2)),
    );
    rep.assert(
        &format!("{tag}/lw_quarter"),
        pair.lw_quarter_holds(),
        || pair.to_json(),
    );
    rep.assert(&format!("{tag}/sw_half"), pair.sw_half_holds(), || {
        pair.to_json()
    });
    rep.assert(
        &format!("{tag}/auction_split"),
        pair.auction_split_holds(),
        || pair.to_json(),
    );
    rep.assert(
        &format!("{tag}/optimum_split"),
        pair.optimum_split_holds(),
        || pair.to_json(),
    );
    Ok(())
}

/// Runs both worked examples at pinned parameters and compares against
/// their closed-form values.
pub fn reproduce_examples() -> Result<CheckReport> {
    let mut rep = CheckReport::new();
    tight_lw(&mut rep)?;
    single_sample(&mut rep, 100, rat(1, 1000))?;
    single_sample(&mut rep, 2, rat(1, 100))?;
    Ok(rep)
}
