use polyclinch::auction::{run_pca, Event};
use polyclinch::market::{preprocess, SellerValues};
use polyclinch::opt::{optimal_lw_allocation_with, TieBreak};
use polyclinch::rational::{int, rat};
use polyclinch::verify::{
    check_dsic, check_efficiency, check_trace, drop_chain, reproduce_examples, tight_lw_example,
    Mechanism, Status,
};

fn tight() -> polyclinch::market::PreprocessedMarket {
    preprocess(
        &tight_lw_example(&int(1), &int(3), &rat(1, 2)),
        SellerValues::Bids,
    )
    .unwrap()
}

#[test]
fn worked_examples_reproduce() {
    let report = reproduce_examples().unwrap();
    let failed: Vec<_> = report.failures().map(|c| &c.name).collect();
    assert!(failed.is_empty(), "{failed:?}");
    assert_eq!(report.exit_code(), 0);
}

#[test]
fn tampered_allocation_is_caught_by_replay() {
    let pm = tight();
    let run = run_pca(&pm).unwrap();
    let opt = optimal_lw_allocation_with(&pm, TieBreak::HigherIndex).unwrap();
    let mut forged = run.allocation.clone();
    forged.payments[1] = rat(1, 2);
    let report = check_trace(&pm, run.trace.as_ref().unwrap(), &forged, &opt).unwrap();
    assert_eq!(report.get("replay").unwrap().status, Status::Fail);
}

#[test]
fn inflated_clinch_is_caught() {
    let pm = tight();
    let run = run_pca(&pm).unwrap();
    let opt = optimal_lw_allocation_with(&pm, TieBreak::HigherIndex).unwrap();
    let mut trace = run.trace.clone().unwrap();
    let clinch = trace
        .events
        .iter_mut()
        .find_map(|e| match e {
            Event::Clinch { amounts, .. } => Some(amounts),
            _ => None,
        })
        .expect("the example clinches");
    for (_, amount) in clinch.iter_mut() {
        *amount = &*amount * int(2);
    }
    match check_trace(&pm, &trace, &run.allocation, &opt) {
        Err(_) => {}
        Ok(report) => assert!(!report.all_pass()),
    }
}

#[test]
fn wrong_optimum_is_flagged() {
    let pm = tight();
    let run = run_pca(&pm).unwrap();
    let mut opt = optimal_lw_allocation_with(&pm, TieBreak::HigherIndex).unwrap();
    // Pretend the optimum gives everything to buyer 1.
    opt.x_star = vec![int(1), int(0), int(0)];
    let report = check_trace(&pm, run.trace.as_ref().unwrap(), &run.allocation, &opt).unwrap();
    assert!(!report.all_pass());
}

#[test]
fn gate_failure_skips_the_half_bound() {
    let pm = preprocess(
        &tight_lw_example(&int(1), &int(3), &int(1)),
        SellerValues::Bids,
    )
    .unwrap();
    let run = run_pca(&pm).unwrap();
    let opt = optimal_lw_allocation_with(&pm, TieBreak::HigherIndex).unwrap();
    let report = check_efficiency(&pm, &run, &opt);
    assert_eq!(
        report.get("lw_half_of_optimum").unwrap().status,
        Status::Skipped
    );
    assert_eq!(report.exit_code(), 2);
}

#[test]
fn drops_form_a_chain() {
    let pm = tight();
    let run = run_pca(&pm).unwrap();
    let chain = drop_chain(&pm, run.trace.as_ref().unwrap()).unwrap();
    assert_eq!(chain.drops.len(), chain.sets.len());
    for w in chain.sets.windows(2) {
        assert_eq!(w[0] & w[1], w[0], "sets must grow");
    }
}

#[test]
fn truthful_bidding_is_optimal_on_the_examples() {
    let instance = tight_lw_example(&int(1), &int(3), &rat(1, 2));
    let report = check_dsic(&instance, &rat(1, 2), Mechanism::Pca).unwrap();
    assert!(report.all_pass());
    assert!(report.get("buyer_dsic").unwrap().evaluated > 0);
    assert!(check_dsic(&instance, &rat(1, 3), Mechanism::Pca).is_err());
}
