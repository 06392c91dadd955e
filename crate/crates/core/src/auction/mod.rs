//! The polyhedral clinching auction on a preprocessed market.
//!
//! Every buyer has an ascending price clock. In each iteration all buyers,
//! in index order, clinch the largest amount whose purchase leaves the
//! others' future possibilities intact; then the clock of the buyer under
//! the round-robin cursor moves up by `ε`. The auction ends when every
//! demand is zero.

mod split;
mod trace;

pub use split::clinch_split;
pub use trace::{replay, replay_each, trace_jsonl, DemandCause, Event, TraceLog};

use num_traits::Zero;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::market::{PreprocessedBuyer, PreprocessedMarket};
use crate::polymatroid::remnant::remnant_table;
use crate::polymatroid::{bit, membership, submasks};
use crate::rational::{ExtRat, Rat};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AuctionState {
    pub clocks: Vec<Rat>,
    pub demands: Vec<ExtRat>,
    /// Cumulative transactions per preprocessed edge.
    pub w: Vec<Rat>,
    pub payments: Vec<Rat>,
    pub revenues: Vec<Rat>,
    /// Buyer whose clock moves next.
    pub cursor: usize,
}

impl AuctionState {
    pub fn initial(pm: &PreprocessedMarket) -> Self {
        let n = pm.buyer_count();
        AuctionState {
            clocks: vec![Rat::zero(); n],
            demands: vec![ExtRat::PosInf; n],
            w: vec![Rat::zero(); pm.edges.len()],
            payments: vec![Rat::zero(); n],
            revenues: vec![Rat::zero(); pm.seller_count()],
            cursor: 0,
        }
    }

    pub fn goods(&self, pm: &PreprocessedMarket) -> Vec<Rat> {
        pm.aggregate(&self.w)
    }

    /// Buyers with positive demand.
    pub fn active(&self) -> crate::polymatroid::Mask {
        self.demands
            .iter()
            .enumerate()
            .filter(|(_, d)| d.is_positive())
            .fold(0, |m, (i, _)| m | bit(i))
    }

    /// Contracted remnant rank over every buyer subset at this state.
    pub fn remnant(&self, pm: &PreprocessedMarket) -> Vec<Rat> {
        remnant_table(pm.g.values(), &self.goods(pm), &self.demands)
    }

    /// SHA-256 over a canonical text rendering of the state.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        let mut section = |name: &str, items: &mut dyn Iterator<Item = String>| {
            h.update(name.as_bytes());
            for item in items {
                h.update(b" ");
                h.update(item.as_bytes());
            }
            h.update(b"\n");
        };
        section("c", &mut self.clocks.iter().map(|v| v.to_string()));
        section("d", &mut self.demands.iter().map(|v| v.to_string()));
        section("w", &mut self.w.iter().map(|v| v.to_string()));
        section("p", &mut self.payments.iter().map(|v| v.to_string()));
        section("r", &mut self.revenues.iter().map(|v| v.to_string()));
        section("l", &mut std::iter::once(self.cursor.to_string()));
        hex::encode(h.finalize())
    }
}

/// Demand rule: `(B - p) / c` below the bid, `0` at or above it, and `+∞`
/// while the clock is still at zero.
pub fn demand_at(buyer: &PreprocessedBuyer, clock: &Rat, payment: &Rat) -> ExtRat {
    if clock >= &buyer.bid {
        ExtRat::zero()
    } else if clock.is_zero() {
        ExtRat::PosInf
    } else {
        buyer.budget.sub_rat(payment).div_rat(clock)
    }
}

/// Final outcome in terms of the original two-sided market.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Allocation {
    /// Goods per instance edge, in instance edge order.
    pub w: Vec<Rat>,
    /// Per real buyer.
    pub goods: Vec<Rat>,
    pub payments: Vec<Rat>,
    /// Per seller.
    pub revenues: Vec<Rat>,
    pub sold: Vec<Rat>,
    /// Capacity the seller keeps, `f_j(E_j) - sold_j`.
    pub retained: Vec<Rat>,
}

impl Allocation {
    /// Per-buyer, per-seller and per-edge outcome with both welfare measures.
    pub fn to_json(&self, instance: &crate::market::MarketInstance) -> Value {
        let buyers: Vec<Value> = instance
            .buyers
            .iter()
            .enumerate()
            .map(|(i, b)| {
                json!({
                    "id": b.id,
                    "goods": self.goods[i].to_string(),
                    "payment": self.payments[i].to_string(),
                })
            })
            .collect();
        let sellers: Vec<Value> = instance
            .sellers
            .iter()
            .enumerate()
            .map(|(j, s)| {
                json!({
                    "id": s.id,
                    "sold": self.sold[j].to_string(),
                    "retained": self.retained[j].to_string(),
                    "revenue": self.revenues[j].to_string(),
                })
            })
            .collect();
        let edges: Vec<Value> = instance
            .edges
            .iter()
            .zip(&self.w)
            .map(|((b, s), w)| json!({ "buyer": b, "seller": s, "amount": w.to_string() }))
            .collect();
        json!({
            "buyers": buyers,
            "sellers": sellers,
            "edges": edges,
            "liquid_welfare": self.liquid_welfare(instance).to_string(),
            "social_welfare": self.social_welfare(instance).to_string(),
        })
    }

    /// `Σ min(v_i x_i, B_i) + Σ ρ_j · retained_j` with true valuations.
    pub fn liquid_welfare(&self, instance: &crate::market::MarketInstance) -> Rat {
        let buyers: Rat = instance
            .buyers
            .iter()
            .zip(&self.goods)
            .map(|(b, x)| b.budget.min_rat(&(&b.valuation * x)))
            .sum();
        buyers + self.seller_welfare(instance)
    }

    /// `Σ v_i x_i + Σ ρ_j · retained_j` with true valuations.
    pub fn social_welfare(&self, instance: &crate::market::MarketInstance) -> Rat {
        let buyers: Rat = instance
            .buyers
            .iter()
            .zip(&self.goods)
            .map(|(b, x)| &b.valuation * x)
            .sum();
        buyers + self.seller_welfare(instance)
    }

    fn seller_welfare(&self, instance: &crate::market::MarketInstance) -> Rat {
        instance
            .sellers
            .iter()
            .zip(&self.retained)
            .map(|(s, r)| &s.valuation * r)
            .sum()
    }

    /// No trade at all: every seller keeps everything.
    pub fn no_trade(instance: &crate::market::MarketInstance) -> Result<Self> {
        let retained = (0..instance.sellers.len())
            .map(|j| {
                instance
                    .seller_function(j)
                    .map(|f| f.eval(f.full()).clone())
            })
            .collect::<Result<_>>()?;
        Ok(Allocation {
            w: vec![Rat::zero(); instance.edges.len()],
            goods: vec![Rat::zero(); instance.buyers.len()],
            payments: vec![Rat::zero(); instance.buyers.len()],
            revenues: vec![Rat::zero(); instance.sellers.len()],
            sold: vec![Rat::zero(); instance.sellers.len()],
            retained,
        })
    }
}

/// Final allocation from a terminal state: virtual transactions are
/// cancelled and each seller's revenue is net of its virtual buyer's
/// payment.
pub fn finalize(pm: &PreprocessedMarket, state: &AuctionState) -> Allocation {
    let inst = &pm.instance;
    let mut w = vec![Rat::zero(); inst.edges.len()];
    let mut sold = vec![Rat::zero(); pm.seller_count()];
    for (e, edge) in pm.edges.iter().enumerate() {
        if let Some(k) = edge.instance_edge {
            w[k] = state.w[e].clone();
            sold[edge.seller] += &state.w[e];
        }
    }
    let goods = pm.aggregate(&state.w)[..pm.real_count()].to_vec();
    let payments = state.payments[..pm.real_count()].to_vec();
    let revenues = (0..pm.seller_count())
        .map(|j| &state.revenues[j] - &state.payments[pm.virtual_buyer(j)])
        .collect();
    let retained = (0..pm.seller_count())
        .map(|j| {
            let f = &pm.seller_fns[j];
            // Full real supply: the modified function equals it on E_j.
            f.eval(f.full() & !bit(f.len() - 1)) - &sold[j]
        })
        .collect();
    Allocation {
        w,
        goods,
        payments,
        revenues,
        sold,
        retained,
    }
}

/// Result of one auction run.
#[derive(Clone, Debug)]
pub struct PcaRun {
    pub allocation: Allocation,
    pub final_state: AuctionState,
    /// Present for traced runs.
    pub trace: Option<TraceLog>,
    /// Clock increments performed.
    pub iterations: u64,
}

/// Upper bound on clock increments: after `max ⌈v'/ε⌉` full cycles every
/// buyer has reached its bid.
pub fn iteration_guard(pm: &PreprocessedMarket) -> u64 {
    let steps = pm
        .buyers
        .iter()
        .map(|b| {
            let q = &b.bid / &pm.epsilon;
            let c = q.ceil().to_integer();
            u64::try_from(c).unwrap_or(u64::MAX)
        })
        .max()
        .unwrap_or(0);
    (pm.buyer_count() as u64)
        .saturating_mul(steps.saturating_add(1))
        .saturating_add(pm.buyer_count() as u64)
}

struct Engine<'a> {
    pm: &'a PreprocessedMarket,
    state: AuctionState,
    events: Option<Vec<Event>>,
}

impl<'a> Engine<'a> {
    fn emit(&mut self, event: Event) {
        if let Some(events) = &mut self.events {
            events.push(event);
        }
    }

    fn clinch_round(&mut self) -> Result<()> {
        let pm = self.pm;
        let all = pm.all_buyers();
        // The remnant rank of N is at most g(N) - x(N), so nothing is left
        // to clinch once all supply is allocated.
        let allocated: Rat = self.state.w.iter().sum();
        if &allocated == pm.total_supply() {
            return Ok(());
        }
        let mut table = self.state.remnant(pm);
        if table[all as usize].is_zero() {
            return Ok(());
        }
        for i in 0..pm.buyer_count() {
            if self.state.demands[i].is_zero() {
                continue;
            }
            let total = &table[all as usize] - &table[(all & !bit(i)) as usize];
            if total.is_zero() {
                continue;
            }
            if total < Rat::zero() {
                return Err(Error::Internal(format!(
                    "negative clinch total {total} for buyer {}",
                    pm.buyers[i].label
                )));
            }
            let split = clinch_split(pm, &self.state.w, &self.state.demands, i);
            self.check_split(i, &split, &total)?;

            let price = self.state.clocks[i].clone();
            for (e, amount) in &split {
                self.state.w[*e] += amount;
                self.state.revenues[pm.edges[*e].seller] += &price * amount;
            }
            self.state.payments[i] += &price * &total;
            self.emit(Event::Clinch {
                buyer: i,
                amounts: split,
                price: price.clone(),
            });
            let demand = demand_at(&pm.buyers[i], &price, &self.state.payments[i]);
            self.state.demands[i] = demand.clone();
            self.emit(Event::Demand {
                buyer: i,
                demand,
                cause: DemandCause::Clinch,
            });

            let after = self.state.remnant(pm);
            let others = all & !bit(i);
            if let Some(s) = submasks(others).find(|&s| after[s as usize] != table[s as usize]) {
                return Err(Error::Internal(format!(
                    "clinch by buyer {} changed the remnant rank of subset {s:#b}: {} -> {}",
                    pm.buyers[i].label, table[s as usize], after[s as usize]
                )));
            }
            table = after;
            if table[all as usize].is_zero() {
                break;
            }
        }
        Ok(())
    }

    fn check_split(&self, i: usize, split: &[(usize, Rat)], total: &Rat) -> Result<()> {
        let pm = self.pm;
        let label = &pm.buyers[i].label;
        if split.iter().any(|(_, a)| a < &Rat::zero()) {
            return Err(Error::Internal(format!(
                "negative edge clinch for buyer {label}"
            )));
        }
        let sum: Rat = split.iter().map(|(_, a)| a).sum();
        if &sum != total {
            return Err(Error::Internal(format!(
                "edge split for buyer {label} sums to {sum}, clinch total is {total}"
            )));
        }
        let mut w = self.state.w.clone();
        for (e, a) in split {
            w[*e] += a;
        }
        for j in 0..pm.seller_count() {
            if !membership(&pm.seller_fns[j], &pm.local_vector(j, &w))? {
                return Err(Error::Internal(format!(
                    "edge split for buyer {label} overdraws seller {}",
                    pm.instance.sellers[j].id
                )));
            }
        }
        Ok(())
    }

    fn advance_clock(&mut self) {
        let pm = self.pm;
        let l = self.state.cursor;
        let clock = &self.state.clocks[l] + &pm.epsilon;
        self.state.clocks[l] = clock.clone();
        self.state.cursor = (l + 1) % pm.buyer_count();
        self.emit(Event::Price { buyer: l, clock });
        let demand = demand_at(
            &pm.buyers[l],
            &self.state.clocks[l],
            &self.state.payments[l],
        );
        self.state.demands[l] = demand.clone();
        self.emit(Event::Demand {
            buyer: l,
            demand,
            cause: DemandCause::Price,
        });
    }
}

fn run(pm: &PreprocessedMarket, traced: bool) -> Result<PcaRun> {
    let mut engine = Engine {
        pm,
        state: AuctionState::initial(pm),
        events: traced.then(Vec::new),
    };
    let guard = iteration_guard(pm);
    let mut iterations = 0u64;
    while engine.state.demands.iter().any(|d| !d.is_zero()) {
        if iterations >= guard {
            return Err(Error::Internal(format!(
                "auction did not terminate within {guard} clock steps"
            )));
        }
        engine.clinch_round()?;
        engine.advance_clock();
        iterations += 1;
    }
    let allocation = finalize(pm, &engine.state);
    Ok(PcaRun {
        allocation,
        final_state: engine.state,
        trace: engine.events.map(|events| TraceLog { events }),
        iterations,
    })
}

/// Runs the auction and records every event.
pub fn run_pca(pm: &PreprocessedMarket) -> Result<PcaRun> {
    run(pm, true)
}

/// Runs the auction without keeping a trace.
pub fn run_pca_untraced(pm: &PreprocessedMarket) -> Result<PcaRun> {
    run(pm, false)
}
