//! One line per acceptance criterion. Exits non-zero if any criterion fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use num_traits::Zero;
use rayon::prelude::*;

use polyclinch::auction::{run_pca, PcaRun};
use polyclinch::generate::{generate_instance, GenParams};
use polyclinch::market::{preprocess, MarketInstance, PreprocessedMarket, SellerValues};
use polyclinch::opt::{
    liquid_welfare, opt_greedy_with, opt_recursive_with, optimal_lw_allocation,
    optimal_lw_allocation_with, TieBreak,
};
use polyclinch::polymatroid::{bit, submasks, sum_over};
use polyclinch::rational::{int, rat, Rat};
use polyclinch::single_sample::{
    estimate_expectations, pairwise_eval, run_mechanism, DistributionSpec,
};
use polyclinch::verify::{
    check_dsic, check_efficiency, check_trace, epsilon_gate, single_sample_example,
    tight_lw_example, CheckReport, Mechanism, Status,
};

struct Outcome {
    ok: bool,
    detail: String,
}

fn outcome(ok: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        ok,
        detail: detail.into(),
    }
}

fn within(elapsed: Duration, limit: Duration) -> (bool, String) {
    (
        elapsed < limit,
        format!("{:.2}s of {}s", elapsed.as_secs_f64(), limit.as_secs()),
    )
}

fn failures(rep: &CheckReport) -> Vec<String> {
    rep.failures()
        .map(|c| format!("{} {}", c.name, c.witness.clone().unwrap_or_default()))
        .collect()
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let (vmin, vmax, eps) = (int(1), int(3), rat(1, 2));
    let instance = tight_lw_example(&vmin, &vmax, &eps);
    let pm = preprocess(&instance, SellerValues::Bids).unwrap();
    let run = run_pca(&pm).unwrap();
    let opt = optimal_lw_allocation(&pm).unwrap();
    let lw_pca = run.allocation.liquid_welfare(&instance);
    let closed_form = &vmin + (&vmin + &eps) * (int(1) - &vmin / &vmax);
    let (fast, time) = within(start.elapsed(), Duration::from_secs(1));
    let ok = lw_pca == int(1)
        && opt.lw_opt == int(2)
        && opt.lw_opt == closed_form
        && &lw_pca * int(2) == opt.lw_opt
        && fast;
    outcome(
        ok,
        format!(
            "LW_PCA={lw_pca} LW_OPT={} closed_form={closed_form} {time}",
            opt.lw_opt
        ),
    )
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let delta = rat(1, 1000);
    let instance = single_sample_example(100, &delta);
    let pair = pairwise_eval(&instance, std::slice::from_ref(&delta), &[&delta * int(2)]).unwrap();
    let big = pair.lw_sum() == rat(501, 500)
        && pair.opt_sum() == rat(398, 100)
        && pair.lw_quarter_holds()
        && pair.sw_sum() == int(100) + &delta * int(2)
        && pair.sw_half_holds();

    // The SW ratio is (k + 2δ) / (2(2 - 1/k)): 101/150 at k = 2, and
    // within δ of 1/2 at k = 1.
    let delta2 = rat(1, 100);
    let sw_ratio = |k: i64| {
        let inst = single_sample_example(k, &delta2);
        let pair = pairwise_eval(&inst, std::slice::from_ref(&delta2), &[&delta2 * int(2)]).unwrap();
        let closed = (int(k) + &delta2 * int(2)) / (int(2) * (int(2) - rat(1, k)));
        (pair.sw_sum() / pair.opt_sum(), closed, pair.sw_half_holds())
    };
    let (ratio2, closed2, half2) = sw_ratio(2);
    let (ratio1, closed1, half1) = sw_ratio(1);
    let tight = half2
        && half1
        && ratio2 == closed2
        && ratio1 == closed1
        && ratio1 < ratio2
        && &ratio1 - rat(1, 2) <= delta2;
    let (fast, time) = within(start.elapsed(), Duration::from_secs(5));
    outcome(
        big && tight && fast,
        format!(
            "k=100: lw_sum={} opt_sum={} sw_sum={}; sw_sum/opt_sum k=2: {ratio2}, k=1: {ratio1} {time}",
            pair.lw_sum(),
            pair.opt_sum(),
            pair.sw_sum()
        ),
    )
}

/// The randomized suite shared by criteria 3, 5 and 6.
fn suite_instances() -> Vec<MarketInstance> {
    (0..200u64)
        .map(|k| {
            let params = GenParams {
                buyers: 1 + (k % 4) as usize,
                sellers: 1 + (k / 4 % 3) as usize,
                max_capacity: 3,
                max_bid_steps: 5,
                allow_zero_capacity: k % 5 == 0,
                with_samples: false,
                gated: true,
            };
            generate_instance(&params, 10_000 + k)
        })
        .collect()
}

fn traced(pm: &PreprocessedMarket) -> (PcaRun, CheckReport) {
    let run = run_pca(pm).unwrap();
    let opt = optimal_lw_allocation_with(pm, TieBreak::HigherIndex).unwrap();
    let mut rep = check_trace(pm, run.trace.as_ref().unwrap(), &run.allocation, &opt).unwrap();
    rep.absorb("", check_efficiency(pm, &run, &opt));
    (run, rep)
}

fn criterion_3(suite: &[MarketInstance]) -> (Outcome, CheckReport) {
    let start = Instant::now();
    let reports: Vec<(bool, CheckReport)> = suite
        .par_iter()
        .map(|inst| {
            let pm = preprocess(inst, SellerValues::Bids).unwrap();
            (epsilon_gate(&pm), traced(&pm).1)
        })
        .collect();
    let mut agg = CheckReport::new();
    let mut ungated = 0;
    for (gated, rep) in reports {
        ungated += usize::from(!gated);
        agg.absorb("", rep);
    }
    let skipped: Vec<_> = agg
        .checks
        .iter()
        .filter(|c| c.status == Status::Skipped)
        .map(|c| c.name.clone())
        .collect();
    let (fast, time) = within(start.elapsed(), Duration::from_secs(120));
    let bad = failures(&agg);
    let assertions: u64 = agg.checks.iter().map(|c| c.evaluated).sum();
    (
        outcome(
            bad.is_empty() && skipped.is_empty() && ungated == 0 && fast,
            format!(
                "{} instances, {} checks, {assertions} assertions, failures={bad:?} skipped={skipped:?} {time}",
                suite.len(),
                agg.checks.len()
            ),
        ),
        agg,
    )
}

fn dsic_instances() -> Vec<MarketInstance> {
    (0..30u64)
        .map(|k| {
            let params = GenParams {
                buyers: 1 + (k % 3) as usize,
                sellers: 1 + (k / 3 % 2) as usize,
                max_capacity: 3,
                max_bid_steps: 5,
                allow_zero_capacity: false,
                with_samples: true,
                gated: false,
            };
            generate_instance(&params, 20_000 + k)
        })
        .collect()
}

fn criterion_4(instances: &[MarketInstance]) -> Outcome {
    let start = Instant::now();
    let reports: Vec<CheckReport> = instances
        .par_iter()
        .flat_map_iter(|inst| {
            let eps = inst.resolved_epsilon().unwrap();
            [Mechanism::Pca, Mechanism::SingleSample]
                .into_iter()
                .map(move |m| check_dsic(inst, &eps, m).unwrap())
        })
        .collect();
    let mut agg = CheckReport::new();
    for rep in reports {
        agg.absorb("", rep);
    }
    let comparisons: u64 = agg.checks.iter().map(|c| c.evaluated).sum();
    let bad = failures(&agg);
    let (fast, time) = within(start.elapsed(), Duration::from_secs(120));
    outcome(
        bad.is_empty() && comparisons > 0 && fast,
        format!(
            "{} instances, {comparisons} deviations, failures={bad:?} {time}",
            instances.len()
        ),
    )
}

const SPLIT_CHECKS: [&str; 3] = ["edge_split_total", "edge_split_isolation", "membership"];

fn criterion_5(suite_report: &CheckReport, dsic: &[MarketInstance]) -> Outcome {
    let mut agg = CheckReport::new();
    let keep = |rep: CheckReport| CheckReport {
        checks: rep
            .checks
            .into_iter()
            .filter(|c| SPLIT_CHECKS.contains(&c.name.as_str()))
            .collect(),
    };
    agg.absorb("", keep(suite_report.clone()));

    let tight = tight_lw_example(&int(1), &int(3), &rat(1, 2));
    let pm = preprocess(&tight, SellerValues::Bids).unwrap();
    agg.absorb("", keep(traced(&pm).1));

    // The auctions inside the single-sample mechanism, on the sample channel.
    let sampled: Vec<CheckReport> = dsic
        .par_iter()
        .filter_map(|inst| {
            let run = run_mechanism(inst).unwrap();
            let (pm, run) = run.auction?;
            let opt = optimal_lw_allocation_with(&pm, TieBreak::HigherIndex).unwrap();
            Some(check_trace(&pm, run.trace.as_ref().unwrap(), &run.allocation, &opt).unwrap())
        })
        .collect();
    for rep in sampled {
        agg.absorb("", keep(rep));
    }
    let counts: Vec<String> = agg
        .checks
        .iter()
        .map(|c| format!("{}={}", c.name, c.evaluated))
        .collect();
    let bad = failures(&agg);
    let evaluated = SPLIT_CHECKS
        .iter()
        .all(|name| agg.get(name).is_some_and(|c| c.evaluated > 0));
    outcome(
        bad.is_empty() && evaluated,
        format!("{} failures={bad:?}", counts.join(" ")),
    )
}

/// Best liquid welfare with every real buyer on the `1/64` grid and the
/// virtual buyers filled greedily, which dominates the plain grid maximum.
fn grid_maximum(pm: &PreprocessedMarket) -> Rat {
    let n = pm.buyer_count();
    let step = rat(1, 64);
    let real: Vec<usize> = (0..n).filter(|&i| !pm.is_virtual(i)).collect();
    let virtuals: Vec<usize> = (0..n).filter(|&i| pm.is_virtual(i)).collect();
    let full = pm.all_buyers();
    // Largest amount buyer `i` can add to `x` without leaving P.
    let slack = |x: &[Rat], i: usize| -> Rat {
        submasks(full)
            .filter(|&s| s & bit(i) != 0)
            .map(|s| pm.g.eval(s) - sum_over(x, s))
            .min()
            .unwrap()
    };
    let mut best: Option<Rat> = None;
    let mut x = vec![Rat::zero(); n];
    let mut stack = vec![0usize; real.len()];
    loop {
        // Place the current grid point, if feasible.
        let mut feasible = true;
        for (k, &i) in real.iter().enumerate() {
            x[i] = &step * int(stack[k] as i64);
        }
        for &i in &virtuals {
            x[i] = Rat::zero();
        }
        for &i in &real {
            let saved = std::mem::take(&mut x[i]);
            if slack(&x, i) < saved {
                feasible = false;
            }
            x[i] = saved;
        }
        if feasible {
            for &i in &virtuals {
                x[i] = slack(&x, i);
            }
            let lw = liquid_welfare(pm, &x);
            if best.as_ref().is_none_or(|b| &lw > b) {
                best = Some(lw);
            }
        }
        // Next point: odometer over the real coordinates, bounded by g({i}).
        let mut k = 0;
        loop {
            if k == real.len() {
                return best.unwrap();
            }
            stack[k] += 1;
            if &step * int(stack[k] as i64) <= *pm.g.eval(bit(real[k])) {
                break;
            }
            stack[k] = 0;
            k += 1;
        }
    }
}

fn grid_instances() -> Vec<MarketInstance> {
    (0..20u64)
        .map(|k| {
            let params = GenParams {
                buyers: 1 + (k % 2) as usize,
                sellers: 1,
                max_capacity: 2,
                max_bid_steps: 5,
                allow_zero_capacity: false,
                with_samples: false,
                gated: false,
            };
            generate_instance(&params, 30_000 + k)
        })
        .collect()
}

fn criterion_6(suite: &[MarketInstance]) -> Outcome {
    let mismatched: Vec<usize> = suite
        .par_iter()
        .enumerate()
        .filter(|(_, inst)| {
            let pm = preprocess(inst, SellerValues::Bids).unwrap();
            [TieBreak::LowerIndex, TieBreak::HigherIndex]
                .into_iter()
                .any(|tie| opt_recursive_with(&pm, tie) != opt_greedy_with(&pm, tie).unwrap())
        })
        .map(|(k, _)| k)
        .collect();

    let grid = grid_instances();
    let results: Vec<(Rat, Rat, Rat)> = grid
        .par_iter()
        .map(|inst| {
            let pm = preprocess(inst, SellerValues::Bids).unwrap();
            let opt = optimal_lw_allocation(&pm).unwrap();
            (
                grid_maximum(&pm),
                opt.lw_opt,
                pm.g.eval(pm.all_buyers()).clone(),
            )
        })
        .collect();
    let rank_ok = results.iter().all(|(_, _, rank)| rank <= &int(2));
    let exceeded: Vec<String> = results
        .iter()
        .enumerate()
        .filter(|(_, (grid, opt, _))| grid > opt)
        .map(|(k, (grid, opt, _))| format!("#{k}: grid {grid} > {opt}"))
        .collect();
    let exact = results.iter().filter(|(g, o, _)| g == o).count();
    outcome(
        mismatched.is_empty() && exceeded.is_empty() && rank_ok,
        format!(
            "routes differ on {mismatched:?}; grid exceeds optimum on {exceeded:?}; grid attains optimum on {exact}/{}",
            grid.len()
        ),
    )
}

fn criterion_7() -> Outcome {
    let delta = rat(1, 100);
    let instance = single_sample_example(10, &delta);
    let dist = DistributionSpec::parse(
        r#"{"sellers": {"*": {"kind": "discrete", "points": ["1/100", "2/100"]}}}"#,
        &instance,
    )
    .unwrap();
    let rep = estimate_expectations(&instance, &dist, 1000, 7).unwrap();
    let lw_ok = rep.ratio_lw >= 0.25 - 2.0 * rep.stderr_lw;
    let sw_ok = rep.ratio_sw >= 0.5 - 2.0 * rep.stderr_sw;
    outcome(
        lw_ok && sw_ok,
        format!(
            "1000 draws: LW ratio {:.4} (se {:.4}), SW ratio {:.4} (se {:.4})",
            rep.ratio_lw, rep.stderr_lw, rep.ratio_sw, rep.stderr_sw
        ),
    )
}

fn main() -> ExitCode {
    let mut all = true;
    let mut report = |k: usize, name: &str, o: Outcome| {
        all &= o.ok;
        println!(
            "criterion {k} [{}] {name}: {}",
            if o.ok { "PASS" } else { "FAIL" },
            o.detail
        );
    };
    report(1, "tight liquid-welfare example", criterion_1());
    report(2, "tight single-sample example", criterion_2());
    let suite = suite_instances();
    let (c3, suite_report) = criterion_3(&suite);
    report(3, "randomized guarantee suite", c3);
    let dsic = dsic_instances();
    report(4, "truthfulness", criterion_4(&dsic));
    report(5, "edge-split soundness", criterion_5(&suite_report, &dsic));
    report(6, "optimum oracle equivalence", criterion_6(&suite));
    report(7, "Monte Carlo consistency", criterion_7());
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
