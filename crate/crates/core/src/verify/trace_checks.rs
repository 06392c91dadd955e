use num_traits::Zero;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use super::{r, CheckReport};
use crate::auction::{
    demand_at, finalize, replay_each, AuctionState, DemandCause, Event, PcaRun, TraceLog,
};
use crate::error::Result;
use crate::market::PreprocessedMarket;
use crate::opt::{liquid_welfare, social_welfare, OptAllocation};
use crate::polymatroid::remnant::{remnant_table, simple_table};
use crate::polymatroid::{bit, contains, full_mask, members, membership, submasks, sum_over, Mask};
use crate::rational::{ExtRat, Rat};

/// Subset-quantified checks enumerate every subset up to this many buyers.
const ENUMERATE_UP_TO: usize = 10;
const SAMPLED_SUBSETS: usize = 64;

/// Every subset of `universe` for small markets; otherwise all singletons,
/// `universe` itself and a fixed pseudo-random sample.
fn subsets_of(universe: Mask, n: usize) -> Vec<Mask> {
    if n <= ENUMERATE_UP_TO {
        return submasks(universe).collect();
    }
    let mut out: Vec<Mask> = vec![0, universe];
    out.extend(members(universe).map(bit));
    let mut rng = ChaCha8Rng::seed_from_u64(u64::from(universe));
    for _ in 0..SAMPLED_SUBSETS {
        out.push(rng.gen::<Mask>() & universe);
    }
    out.sort_unstable();
    out.dedup();
    out
}

/// `ε <= v_min^2 / (v_max - v_min)` over all preprocessed bids.
pub fn epsilon_gate(pm: &PreprocessedMarket) -> bool {
    let vmin = pm.buyers.iter().map(|b| &b.bid).min();
    let vmax = pm.buyers.iter().map(|b| &b.bid).max();
    match (vmin, vmax) {
        (Some(lo), Some(hi)) => lo == hi || &pm.epsilon * (hi - lo) <= lo * lo,
        _ => true,
    }
}

/// Derived sets at one state of the run.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IterationProbe {
    /// `X`: buyers with positive demand.
    pub active: Mask,
    /// `Y`: active buyers whose final allocation is at most optimal.
    pub short: Mask,
    /// Smallest clock among active real buyers, if any.
    pub min_real_clock: Option<Rat>,
}

pub fn probe(
    pm: &PreprocessedMarket,
    state: &AuctionState,
    x_final: &[Rat],
    x_star: &[Rat],
) -> IterationProbe {
    let active = state.active();
    let short = members(active)
        .filter(|&i| x_final[i] <= x_star[i])
        .fold(0, |m, i| m | bit(i));
    let min_real_clock = members(active)
        .filter(|&i| !pm.is_virtual(i))
        .map(|i| state.clocks[i].clone())
        .min();
    IterationProbe {
        active,
        short,
        min_real_clock,
    }
}

/// Buyers dropped by a price step, latest drop first, with the set of
/// buyers that had positive demand just before each drop.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DropChain {
    pub drops: Vec<usize>,
    pub sets: Vec<Mask>,
}

pub fn drop_chain(pm: &PreprocessedMarket, trace: &TraceLog) -> Result<DropChain> {
    let mut before = AuctionState::initial(pm).active();
    let mut drops = Vec::new();
    let mut sets = Vec::new();
    replay_each(pm, trace, |_, event, state| {
        if let Event::Demand {
            buyer,
            demand,
            cause: DemandCause::Price,
        } = event
        {
            if demand.is_zero() && contains(before, *buyer) {
                drops.push(*buyer);
                sets.push(before);
            }
        }
        before = state.active();
        Ok(())
    })?;
    drops.reverse();
    sets.reverse();
    Ok(DropChain { drops, sets })
}

struct Ctx<'a> {
    pm: &'a PreprocessedMarket,
    n: usize,
    all: Mask,
    x_final: Vec<Rat>,
    p_final: Vec<Rat>,
    x_star: &'a [Rat],
    probed: bool,
    report: CheckReport,
}

fn label(pm: &PreprocessedMarket, i: usize) -> &str {
    &pm.buyers[i].label
}

fn labels(pm: &PreprocessedMarket, mask: Mask) -> Vec<String> {
    members(mask).map(|i| pm.buyers[i].label.clone()).collect()
}

impl Ctx<'_> {
    fn every_state(&mut self, seq: Option<usize>, state: &AuctionState) -> Result<()> {
        let pm = self.pm;
        let mut feasible = true;
        for j in 0..pm.seller_count() {
            feasible &= membership(&pm.seller_fns[j], &pm.local_vector(j, &state.w))?;
        }
        self.report
            .assert("membership", feasible, || json!({ "state": seq }));

        let paid: Rat = state.payments.iter().sum();
        let earned: Rat = state.revenues.iter().sum();
        self.report.assert(
            "sbb",
            paid == earned,
            || json!({ "state": seq, "payments": r(&paid), "revenues": r(&earned) }),
        );

        for i in 0..self.n {
            let ok = match &pm.buyers[i].budget {
                ExtRat::Finite(b) => &state.payments[i] <= b,
                ExtRat::PosInf => true,
            };
            self.report.assert(
                "budget",
                ok,
                || json!({ "state": seq, "buyer": label(pm, i), "payment": r(&state.payments[i]) }),
            );
        }

        // No real trade on a seller while its virtual buyer's clock is
        // below the seller's value.
        for j in 0..pm.seller_count() {
            let v = pm.virtual_buyer(j);
            if state.clocks[v] < pm.buyers[v].bid {
                for &e in &pm.seller_edges[j] {
                    if pm.edges[e].instance_edge.is_some() {
                        self.report
                            .assert("no_early_trade", state.w[e].is_zero(), || {
                                json!({
                                    "state": seq,
                                    "seller": pm.instance.sellers[j].id,
                                    "buyer": label(pm, pm.edges[e].buyer),
                                    "amount": r(&state.w[e]),
                                })
                            });
                    }
                }
            }
        }
        Ok(())
    }

    /// Checks at consistent states: the start and after every demand update.
    fn checkpoint(&mut self, seq: Option<usize>, state: &AuctionState) {
        let pm = self.pm;
        let x = state.goods(pm);
        let g = pm.g.values();
        let full = remnant_table(g, &x, &state.demands);
        let simple = simple_table(g, &x, &state.demands);

        for i in 0..self.n {
            let expected = demand_at(&pm.buyers[i], &state.clocks[i], &state.payments[i]);
            self.report
                .assert("demand_rule", expected == state.demands[i], || {
                    json!({
                        "state": seq,
                        "buyer": label(pm, i),
                        "demand": state.demands[i].to_string(),
                        "expected": expected.to_string(),
                    })
                });
        }

        for s in subsets_of(self.all, self.n) {
            self.report.assert(
                "remnant_forms_agree",
                full[s as usize] == simple[s as usize],
                || {
                    json!({
                        "state": seq,
                        "subset": labels(pm, s),
                        "contracted": r(&full[s as usize]),
                        "simple": r(&simple[s as usize]),
                    })
                },
            );
        }

        let x_all = sum_over(&x, self.all);
        let expect_all = &g[self.all as usize] - &x_all;
        self.report.assert("remnant_total", full[self.all as usize] == expect_all, || {
            json!({ "state": seq, "remnant": r(&full[self.all as usize]), "expected": r(&expect_all) })
        });

        self.payment_probe(seq, state, &x);

        let pr = probe(pm, state, &self.x_final, self.x_star);
        let active = pr.active;
        let expect_active = &g[self.all as usize]
            - sum_over(&x, active)
            - sum_over(&self.x_final, self.all & !active);
        self.report.assert(
            "remnant_active",
            full[active as usize] == expect_active,
            || {
                json!({
                    "state": seq,
                    "active": labels(pm, active),
                    "remnant": r(&full[active as usize]),
                    "expected": r(&expect_active),
                })
            },
        );

        for s in subsets_of(active, active.count_ones() as usize) {
            let gap = sum_over(self.x_star, s) - sum_over(&x, s);
            self.report
                .assert("remaining_goods", full[s as usize] >= gap, || {
                    json!({
                        "state": seq,
                        "subset": labels(pm, s),
                        "remnant": r(&full[s as usize]),
                        "optimum_gap": r(&gap),
                    })
                });
        }

        // Payment invariant, vacuous while no real buyer is active.
        if let Some(c_tilde) = &pr.min_real_clock {
            let short = pr.short;
            let lhs: Rat = members(active & !short)
                .map(|i| &self.p_final[i] - &state.payments[i])
                .sum();
            let owed: Rat = members(short)
                .map(|i| (&pm.buyers[i].bid - &pm.epsilon) * (&self.x_star[i] - &self.x_final[i]))
                .sum();
            let slack = &full[active as usize] - sum_over(self.x_star, short) + sum_over(&x, short);
            let rhs = owed + c_tilde * &slack;
            self.report.assert("payment_invariant", lhs >= rhs, || {
                json!({
                    "state": seq,
                    "active": labels(pm, active),
                    "short": labels(pm, short),
                    "lhs": r(&lhs),
                    "rhs": r(&rhs),
                })
            });
        }
    }

    /// At the first state where every real clock has reached the smallest
    /// seller value, no real buyer has traded and every virtual buyer is
    /// still active.
    fn payment_probe(&mut self, seq: Option<usize>, state: &AuctionState, x: &[Rat]) {
        let pm = self.pm;
        if self.probed {
            return;
        }
        let Some(floor) = (0..pm.seller_count())
            .map(|j| &pm.buyers[pm.virtual_buyer(j)].bid)
            .min()
        else {
            return;
        };
        if (0..pm.real_count()).any(|i| &state.clocks[i] < floor) {
            return;
        }
        self.probed = true;
        let idle = (0..pm.real_count()).all(|i| x[i].is_zero() && state.payments[i].is_zero());
        let virtual_active =
            (0..pm.seller_count()).all(|j| state.demands[pm.virtual_buyer(j)].is_positive());
        self.report
            .assert("payment_probe", idle && virtual_active, || {
                json!({
                    "state": seq,
                    "real_buyers_idle": idle,
                    "virtual_buyers_active": virtual_active,
                })
            });
    }

    fn clinch(
        &mut self,
        seq: usize,
        before: &AuctionState,
        buyer: usize,
        amounts: &[(usize, Rat)],
        price: &Rat,
    ) {
        let pm = self.pm;
        let table = before.remnant(pm);
        let total = &table[self.all as usize] - &table[(self.all & !bit(buyer)) as usize];
        let sum: Rat = amounts.iter().map(|(_, a)| a).sum();
        let nonneg = amounts.iter().all(|(_, a)| a >= &Rat::zero());
        self.report
            .assert("edge_split_total", sum == total && nonneg, || {
                json!({
                    "event": seq,
                    "buyer": label(pm, buyer),
                    "split_sum": r(&sum),
                    "clinch_total": r(&total),
                    "nonnegative": nonneg,
                })
            });

        let bid = &pm.buyers[buyer].bid;
        self.report.assert(
            "clinch_below_bid",
            price < bid,
            || json!({ "event": seq, "buyer": label(pm, buyer), "price": r(price), "bid": r(bid) }),
        );
        for (e, a) in amounts {
            let edge = pm.edges[*e];
            if edge.instance_edge.is_none() || a.is_zero() {
                continue;
            }
            let seller_value = &pm.buyers[pm.virtual_buyer(edge.seller)].bid;
            self.report.assert(
                "trade_price_bounds",
                seller_value <= price && price <= bid,
                || {
                    json!({
                        "event": seq,
                        "buyer": label(pm, buyer),
                        "seller": pm.instance.sellers[edge.seller].id,
                        "price": r(price),
                        "seller_value": r(seller_value),
                        "bid": r(bid),
                    })
                },
            );
        }
    }

    /// Others' remnant ranks must survive buyer `i`'s clinch.
    fn clinch_settled(&mut self, seq: usize, buyer: usize, before: &[Rat], state: &AuctionState) {
        let pm = self.pm;
        let after = state.remnant(self.pm);
        let others = self.all & !bit(buyer);
        for s in subsets_of(others, self.n - 1) {
            self.report.assert(
                "edge_split_isolation",
                before[s as usize] == after[s as usize],
                || {
                    json!({
                        "event": seq,
                        "buyer": label(pm, buyer),
                        "subset": labels(pm, s),
                        "before": r(&before[s as usize]),
                        "after": r(&after[s as usize]),
                    })
                },
            );
        }
    }

    /// `ξ(E_{T\S}) <= g_{x,d}(T) - g_{x,d}(S)` for nested `S ⊂ T`, with `ξ`
    /// the clinches of one round and `g_{x,d}` taken at the round's start.
    fn round(&mut self, seq: usize, start: &[Rat], delta: &[Rat]) {
        let pm = self.pm;
        for t in subsets_of(self.all, self.n) {
            for s in submasks(t).filter(|&s| s != t) {
                let lhs = sum_over(delta, t & !s);
                let rhs = &start[t as usize] - &start[s as usize];
                self.report.assert("round_clinch_bound", lhs <= rhs, || {
                    json!({
                        "event": seq,
                        "outer": labels(pm, t),
                        "inner": labels(pm, s),
                        "clinched": r(&lhs),
                        "bound": r(&rhs),
                    })
                });
            }
        }
    }
}

/// Replays the trace and checks every per-state, per-clinch and final
/// property of the auction. `allocation` must be the run's final
/// allocation and `opt` the optimum of the same preprocessed market.
pub fn check_trace(
    pm: &PreprocessedMarket,
    trace: &TraceLog,
    allocation: &crate::auction::Allocation,
    opt: &OptAllocation,
) -> Result<CheckReport> {
    let final_state = replay_each(pm, trace, |_, _, _| Ok(()))?;
    let n = pm.buyer_count();
    let mut ctx = Ctx {
        pm,
        n,
        all: full_mask(n),
        x_final: final_state.goods(pm),
        p_final: final_state.payments.clone(),
        x_star: &opt.x_star,
        probed: false,
        report: CheckReport::new(),
    };
    for name in [
        "replay",
        "membership",
        "sbb",
        "budget",
        "no_early_trade",
        "demand_rule",
        "remnant_forms_agree",
        "remnant_total",
        "remnant_active",
        "remaining_goods",
        "payment_invariant",
        "edge_split_total",
        "edge_split_isolation",
        "clinch_below_bid",
        "trade_price_bounds",
        "round_clinch_bound",
        "payment_probe",
    ] {
        ctx.report.declare(name);
    }

    let replayed = finalize(pm, &final_state);
    ctx.report.assert(
        "replay",
        &replayed == allocation,
        || json!({ "message": "replayed final allocation differs from the reported one" }),
    );

    let initial = AuctionState::initial(pm);
    ctx.every_state(None, &initial)?;
    ctx.checkpoint(None, &initial);

    let mut prev = initial;
    let mut pending: Option<(usize, Vec<Rat>)> = None;
    let mut round_start: Option<Vec<Rat>> = None;
    let mut round_delta = vec![Rat::zero(); n];
    let mut failure = None;
    replay_each(pm, trace, |seq, event, state| {
        if let Err(e) = ctx.every_state(Some(seq), state) {
            failure.get_or_insert(e);
        }
        match event {
            Event::Clinch {
                buyer,
                amounts,
                price,
            } => {
                let table = prev.remnant(pm);
                ctx.clinch(seq, &prev, *buyer, amounts, price);
                if round_start.is_none() {
                    round_start = Some(table.clone());
                }
                round_delta[*buyer] += amounts.iter().map(|(_, a)| a).sum::<Rat>();
                pending = Some((*buyer, table));
            }
            Event::Price { .. } => {
                if let Some(start) = round_start.take() {
                    ctx.round(seq, &start, &round_delta);
                    round_delta.iter_mut().for_each(Rat::set_zero);
                }
            }
            Event::Demand { cause, .. } => {
                if *cause == DemandCause::Clinch {
                    if let Some((buyer, before)) = pending.take() {
                        ctx.clinch_settled(seq, buyer, &before, state);
                    }
                }
                ctx.checkpoint(Some(seq), state);
            }
        }
        prev = state.clone();
        Ok(())
    })?;
    if let Some(e) = failure {
        return Err(e);
    }

    let chain = drop_chain(pm, trace)?;
    final_checks(&mut ctx, &chain);
    Ok(ctx.report)
}

fn final_checks(ctx: &mut Ctx, chain: &DropChain) {
    let pm = ctx.pm;
    let g = pm.g.values();
    let xf = ctx.x_final.clone();
    let pf = ctx.p_final.clone();
    let xs = ctx.x_star;
    let all = ctx.all;
    let rep = &mut ctx.report;

    let total = sum_over(&xf, all);
    rep.assert(
        "final_supply",
        total == g[all as usize],
        || json!({ "allocated": r(&total), "supply": r(&g[all as usize]) }),
    );

    for i in 0..pm.real_count() {
        let b = &pm.buyers[i];
        let value = &b.valuation * &xf[i];
        rep.assert(
            "final_ir",
            value >= pf[i],
            || json!({ "buyer": b.label, "value": r(&value), "payment": r(&pf[i]) }),
        );
    }

    for i in 0..ctx.n {
        let b = &pm.buyers[i];
        if b.is_virtual() {
            rep.assert(
                "virtual_not_over_allocated",
                xf[i] <= xs[i],
                || json!({ "buyer": b.label, "final": r(&xf[i]), "optimal": r(&xs[i]) }),
            );
        } else if xf[i] > xs[i] {
            let cap = b.budget.div_rat(&b.bid);
            rep.assert("over_allocation_at_cap", cap == ExtRat::Finite(xs[i].clone()), || {
                json!({ "buyer": b.label, "final": r(&xf[i]), "optimal": r(&xs[i]), "budget_over_bid": cap.to_string() })
            });
        }
    }
    rep.declare("over_allocation_at_cap");

    // Tight-set chain from the price drops.
    let labels = |m: Mask| labels(pm, m);
    let top = chain.sets.last().copied().unwrap_or(0);
    rep.assert(
        "tight_chain",
        top == all,
        || json!({ "message": "largest chain set is not every buyer", "largest": labels(top) }),
    );
    let mut lower: Mask = 0;
    for (k, (&i_k, &x_k)) in chain.drops.iter().zip(&chain.sets).enumerate() {
        let strict = x_k & lower == lower && x_k != lower;
        let fresh = contains(x_k, i_k) && !contains(lower, i_k);
        let tight = sum_over(&xf, x_k) == g[x_k as usize];
        rep.assert("tight_chain", strict && fresh && tight, || {
            json!({
                "k": k + 1,
                "set": labels(x_k),
                "previous": labels(lower),
                "dropped": pm.buyers[i_k].label,
                "allocated": r(&sum_over(&xf, x_k)),
                "rank": r(&g[x_k as usize]),
            })
        });
        for i in members(x_k & !lower & !bit(i_k)) {
            let b = &pm.buyers[i];
            let spent = ExtRat::Finite(pf[i].clone()) == b.budget;
            rep.assert("tight_chain", b.bid >= pm.buyers[i_k].bid && spent, || {
                json!({
                    "k": k + 1,
                    "buyer": b.label,
                    "bid": r(&b.bid),
                    "dropped_bid": r(&pm.buyers[i_k].bid),
                    "payment": r(&pf[i]),
                    "budget": b.budget.to_string(),
                })
            });
        }
        lower = x_k;
    }

    if !epsilon_gate(pm) {
        for name in ["epsilon_slack", "payment_bound"] {
            rep.skip(name, "epsilon exceeds v_min^2 / (v_max - v_min)");
        }
        return;
    }
    let vmin = pm
        .buyers
        .iter()
        .map(|b| &b.bid)
        .min()
        .expect("nonempty")
        .clone();
    rep.declare("epsilon_slack");
    for i in 0..ctx.n {
        if xf[i] > xs[i] {
            let v = (&vmin + &pm.epsilon) * &xs[i] - &pm.epsilon * &xf[i];
            rep.assert(
                "epsilon_slack",
                v >= Rat::zero(),
                || json!({ "buyer": pm.buyers[i].label, "value": r(&v) }),
            );
        }
    }
    let mut lhs = Rat::zero();
    let mut rhs = Rat::zero();
    for i in 0..ctx.n {
        let v = &pm.buyers[i].bid;
        if xf[i] > xs[i] {
            lhs += &pf[i];
        } else {
            lhs += v * &xf[i];
            rhs += v * &xs[i];
        }
    }
    rep.assert(
        "payment_bound",
        lhs >= rhs,
        || json!({ "lhs": r(&lhs), "rhs": r(&rhs) }),
    );
}

/// `2·LW >= LW_OPT` when the `ε` gate holds, and `SW >= LW_OPT` always,
/// both over the preprocessed market.
pub fn check_efficiency(pm: &PreprocessedMarket, run: &PcaRun, opt: &OptAllocation) -> CheckReport {
    let x = run.final_state.goods(pm);
    let lw = liquid_welfare(pm, &x);
    let sw = social_welfare(pm, &x);
    let mut rep = CheckReport::new();
    if epsilon_gate(pm) {
        let two = Rat::from_integer(2.into());
        rep.assert(
            "lw_half_of_optimum",
            &two * &lw >= opt.lw_opt,
            || json!({ "lw_pca": r(&lw), "lw_opt": r(&opt.lw_opt) }),
        );
    } else {
        rep.skip(
            "lw_half_of_optimum",
            "epsilon exceeds v_min^2 / (v_max - v_min)",
        );
    }
    rep.assert(
        "sw_at_least_lw_optimum",
        sw >= opt.lw_opt,
        || json!({ "sw_pca": r(&sw), "lw_opt": r(&opt.lw_opt) }),
    );
    rep
}
