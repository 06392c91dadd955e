use serde_json::{json, Value};

use super::AuctionState;
use crate::error::{Error, Result};
use crate::market::PreprocessedMarket;
use crate::rational::{ExtRat, Rat};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DemandCause {
    Price,
    Clinch,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Event {
    /// Buyer takes `amounts` (per preprocessed edge) at unit `price`.
    Clinch {
        buyer: usize,
        amounts: Vec<(usize, Rat)>,
        price: Rat,
    },
    /// Buyer's clock moves to `clock`; the cursor moves past the buyer.
    Price { buyer: usize, clock: Rat },
    Demand {
        buyer: usize,
        demand: ExtRat,
        cause: DemandCause,
    },
}

impl Event {
    pub fn buyer(&self) -> usize {
        match self {
            Event::Clinch { buyer, .. }
            | Event::Price { buyer, .. }
            | Event::Demand { buyer, .. } => *buyer,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Event::Clinch { .. } => "clinch",
            Event::Price { .. } => "price",
            Event::Demand { .. } => "demand",
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TraceLog {
    pub events: Vec<Event>,
}

fn apply(
    pm: &PreprocessedMarket,
    state: &mut AuctionState,
    event: &Event,
    seq: usize,
) -> Result<()> {
    let n = pm.buyer_count();
    let buyer = event.buyer();
    if buyer >= n {
        return Err(Error::Integrity(format!(
            "event {seq}: buyer {buyer} out of range"
        )));
    }
    match event {
        Event::Clinch { amounts, price, .. } => {
            if price != &state.clocks[buyer] {
                return Err(Error::Integrity(format!(
                    "event {seq}: clinch price {price} differs from clock {}",
                    state.clocks[buyer]
                )));
            }
            let mut total = Rat::from_integer(0.into());
            for (e, amount) in amounts {
                let edge = pm.edges.get(*e).ok_or_else(|| {
                    Error::Integrity(format!("event {seq}: edge {e} out of range"))
                })?;
                if edge.buyer != buyer {
                    return Err(Error::Integrity(format!(
                        "event {seq}: edge {e} does not belong to buyer {buyer}"
                    )));
                }
                state.w[*e] += amount;
                state.revenues[edge.seller] += price * amount;
                total += amount;
            }
            state.payments[buyer] += price * &total;
        }
        Event::Price { clock, .. } => {
            if buyer != state.cursor {
                return Err(Error::Integrity(format!(
                    "event {seq}: clock of buyer {buyer} moved while cursor is at {}",
                    state.cursor
                )));
            }
            if clock != &(&state.clocks[buyer] + &pm.epsilon) {
                return Err(Error::Integrity(format!(
                    "event {seq}: clock jump from {} to {clock}",
                    state.clocks[buyer]
                )));
            }
            state.clocks[buyer] = clock.clone();
            state.cursor = (buyer + 1) % n;
        }
        Event::Demand { demand, .. } => {
            state.demands[buyer] = demand.clone();
        }
    }
    Ok(())
}

/// Replays the trace, calling `visit(seq, event, state_after)` per event.
/// Returns the final state.
pub fn replay_each(
    pm: &PreprocessedMarket,
    trace: &TraceLog,
    mut visit: impl FnMut(usize, &Event, &AuctionState) -> Result<()>,
) -> Result<AuctionState> {
    let mut state = AuctionState::initial(pm);
    for (seq, event) in trace.events.iter().enumerate() {
        apply(pm, &mut state, event, seq)?;
        visit(seq, event, &state)?;
    }
    Ok(state)
}

/// Every state of the run: the initial state followed by the state after
/// each event.
pub fn replay(pm: &PreprocessedMarket, trace: &TraceLog) -> Result<Vec<AuctionState>> {
    let mut states = vec![AuctionState::initial(pm)];
    replay_each(pm, trace, |_, _, s| {
        states.push(s.clone());
        Ok(())
    })?;
    Ok(states)
}

/// One JSON object per line. Clinch lines carry every incident edge with
/// its amount; each line has the digest of the state after the event.
pub fn trace_jsonl(pm: &PreprocessedMarket, trace: &TraceLog) -> Result<String> {
    let mut out = String::new();
    replay_each(pm, trace, |seq, event, state| {
        let buyer = &pm.buyers[event.buyer()].label;
        let mut line = match event {
            Event::Clinch { amounts, price, .. } => {
                let edges: Vec<Value> = amounts
                    .iter()
                    .map(|(e, a)| {
                        json!({
                            "seller": pm.instance.sellers[pm.edges[*e].seller].id,
                            "amount": a.to_string(),
                        })
                    })
                    .collect();
                let total: Rat = amounts.iter().map(|(_, a)| a).sum();
                json!({
                    "seq": seq,
                    "kind": "clinch",
                    "buyer": buyer,
                    "edges": edges,
                    "amount": total.to_string(),
                    "clock": price.to_string(),
                })
            }
            Event::Price { clock, .. } => json!({
                "seq": seq,
                "kind": "price",
                "buyer": buyer,
                "clock": clock.to_string(),
            }),
            Event::Demand { demand, cause, .. } => json!({
                "seq": seq,
                "kind": "demand",
                "buyer": buyer,
                "demand": demand.to_string(),
                "cause": match cause {
                    DemandCause::Price => "price",
                    DemandCause::Clinch => "clinch",
                },
            }),
        };
        line["snapshot_digest"] = Value::String(state.digest());
        out.push_str(&line.to_string());
        out.push('\n');
        Ok(())
    })?;
    Ok(out)
}
