//! Per-edge split of a buyer's clinch.
//!
//! The clinching polytope of buyer `i` is the set of increments `ξ` on `E_i`
//! that leave every other buyer set's future trading possibilities
//! untouched. For a set `S ⊆ N \ i` those possibilities are
//!
//! ```text
//! rank_S(ξ) = min_{T ⊆ S} R_ξ(E_{S\T}) + d(T),
//! R_ξ(A)    = min_{B ⊇ A} f(B) - (w + ξ)(B),
//! ```
//!
//! and `R_ξ` splits into one superset minimum per seller. The greedy point
//! scans `E_i` by ascending seller and gives each edge the largest step
//! that keeps `rank_S(ξ) = rank_S(0)` for every `S`, keeps `w + ξ` feasible
//! and keeps `ξ(E_i) <= d_i`.

use num_traits::Zero;

use crate::market::PreprocessedMarket;
use crate::polymatroid::ops::{contraction_values, reduce_table};
use crate::polymatroid::{bit, full_mask, Mask};
use crate::rational::{ExtRat, Rat};

fn seller_contractions(pm: &PreprocessedMarket, w: &[Rat]) -> Vec<Vec<Rat>> {
    (0..pm.seller_count())
        .map(|j| contraction_values(pm.seller_fns[j].values(), &pm.local_vector(j, w)))
        .collect()
}

/// `table[U] = Σ_j C_j(E_U ∩ E_j ∪ extra_j)` over every buyer subset `U`.
fn edge_rank_table(
    pm: &PreprocessedMarket,
    contractions: &[Vec<Rat>],
    extra: Option<(usize, Mask)>,
) -> Vec<Rat> {
    let n = pm.buyer_count();
    let locals: Vec<Vec<Mask>> = (0..pm.seller_count())
        .map(|j| (0..n).map(|i| pm.local_mask(j, bit(i))).collect())
        .collect();
    (0..=full_mask(n))
        .map(|u| {
            (0..pm.seller_count())
                .map(|j| {
                    let mut local =
                        crate::polymatroid::members(u).fold(0, |acc, i| acc | locals[j][i]);
                    if let Some((sj, m)) = extra {
                        if sj == j {
                            local |= m;
                        }
                    }
                    contractions[j][local as usize].clone()
                })
                .sum()
        })
        .collect()
}

/// Greedy maximal point of buyer `i`'s clinching polytope, as
/// `(edge, amount)` pairs in ascending seller order. Zero amounts are kept
/// so the caller sees every incident edge.
pub fn clinch_split(
    pm: &PreprocessedMarket,
    w: &[Rat],
    demands: &[ExtRat],
    buyer: usize,
) -> Vec<(usize, Rat)> {
    let others = pm.all_buyers() & !bit(buyer);
    let base = reduce_table(
        &edge_rank_table(pm, &seller_contractions(pm, w), None),
        demands,
    );

    let mut current = w.to_vec();
    let mut taken = Rat::zero();
    let mut split = Vec::with_capacity(pm.buyer_edges[buyer].len());
    for &e in &pm.buyer_edges[buyer] {
        let edge = pm.edges[e];
        let contractions = seller_contractions(pm, &current);
        let with_edge = reduce_table(
            &edge_rank_table(pm, &contractions, Some((edge.seller, bit(edge.local)))),
            demands,
        );
        let mut step = crate::polymatroid::submasks(others)
            .map(|s| &with_edge[s as usize] - &base[s as usize])
            .min()
            .expect("at least the empty set");
        if let ExtRat::Finite(d) = &demands[buyer] {
            let room = d - &taken;
            if room < step {
                step = room;
            }
        }
        current[e] += &step;
        taken += &step;
        split.push((e, step));
    }
    split
}
