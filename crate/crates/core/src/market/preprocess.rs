//! Conversion of a two-sided market into a one-sided auction market by
//! adding one virtual buyer per seller.
//!
//! Virtual buyer `n + j` is adjacent only to seller `j`, bids the seller's
//! value and has unbounded budget. Whatever it ends up "buying" is the part
//! of the seller's supply that stays unsold.

use super::MarketInstance;
use crate::error::{Error, Result};
use crate::polymatroid::{bit, check_ground, full_mask, members, GroundSet, Mask, SetFunction};
use crate::rational::{ExtRat, Rat};

/// Which seller-side value drives the virtual buyers.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SellerValues {
    /// Virtual buyer `n + j` has valuation `ρ_j` and bid `ρ'_j`.
    Bids,
    /// Virtual buyer `n + j` has valuation and bid `ρ^s_j`.
    Samples,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PreprocessedBuyer {
    pub label: String,
    pub valuation: Rat,
    pub bid: Rat,
    pub budget: ExtRat,
    /// Seller index for virtual buyers.
    pub virtual_of: Option<usize>,
}

impl PreprocessedBuyer {
    pub fn is_virtual(&self) -> bool {
        self.virtual_of.is_some()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PreprocessedEdge {
    pub buyer: usize,
    pub seller: usize,
    /// Position of the edge in its seller's local ground set.
    pub local: usize,
    /// Index into the instance edge list; `None` for virtual edges.
    pub instance_edge: Option<usize>,
}

#[derive(Clone, Debug)]
pub struct PreprocessedMarket {
    pub instance: MarketInstance,
    pub channel: SellerValues,
    pub epsilon: Rat,
    /// Real buyers in instance order, then virtual buyers in seller order.
    pub buyers: Vec<PreprocessedBuyer>,
    pub edges: Vec<PreprocessedEdge>,
    /// Edge indices per buyer, ascending by seller.
    pub buyer_edges: Vec<Vec<usize>>,
    /// Edge indices per seller in local order; the virtual edge is last.
    pub seller_edges: Vec<Vec<usize>>,
    /// Modified seller capacity functions over local edges.
    pub seller_fns: Vec<SetFunction>,
    /// `g(S) = f(E_S)` over all buyers.
    pub g: SetFunction,
}

impl PreprocessedMarket {
    pub fn real_count(&self) -> usize {
        self.instance.buyers.len()
    }

    pub fn buyer_count(&self) -> usize {
        self.buyers.len()
    }

    pub fn seller_count(&self) -> usize {
        self.seller_fns.len()
    }

    pub fn virtual_buyer(&self, j: usize) -> usize {
        self.real_count() + j
    }

    pub fn virtual_edge(&self, j: usize) -> usize {
        *self.seller_edges[j]
            .last()
            .expect("every seller has its virtual edge")
    }

    pub fn is_virtual(&self, i: usize) -> bool {
        i >= self.real_count()
    }

    pub fn all_buyers(&self) -> Mask {
        full_mask(self.buyer_count())
    }

    pub fn real_buyers(&self) -> Mask {
        full_mask(self.real_count())
    }

    /// Local edge mask of seller `j` for the edges owned by buyers in `buyers`.
    pub fn local_mask(&self, j: usize, buyers: Mask) -> Mask {
        self.seller_edges[j]
            .iter()
            .enumerate()
            .filter(|(_, &e)| buyers & bit(self.edges[e].buyer) != 0)
            .fold(0, |m, (k, _)| m | bit(k))
    }

    /// Aggregate goods per buyer for an edge vector.
    pub fn aggregate(&self, w: &[Rat]) -> Vec<Rat> {
        self.buyer_edges
            .iter()
            .map(|es| es.iter().map(|&e| &w[e]).sum())
            .collect()
    }

    /// Per-seller restriction of an edge vector in local order.
    pub fn local_vector(&self, j: usize, w: &[Rat]) -> Vec<Rat> {
        self.seller_edges[j].iter().map(|&e| w[e].clone()).collect()
    }

    /// Total supply `f(E_N)`.
    pub fn total_supply(&self) -> &Rat {
        self.g.eval(self.all_buyers())
    }
}

/// Adds virtual buyers, modified seller functions and the aggregate buyer
/// function. The instance is expected to have passed validation.
pub fn preprocess(instance: &MarketInstance, channel: SellerValues) -> Result<PreprocessedMarket> {
    let epsilon = instance.resolved_epsilon()?;
    let n = instance.buyers.len();
    let m = instance.sellers.len();
    check_ground(n + m)?;

    let mut buyers: Vec<PreprocessedBuyer> = instance
        .buyers
        .iter()
        .map(|b| PreprocessedBuyer {
            label: b.id.clone(),
            valuation: b.valuation.clone(),
            bid: b.bid.clone(),
            budget: b.budget.clone(),
            virtual_of: None,
        })
        .collect();
    for (j, s) in instance.sellers.iter().enumerate() {
        let (valuation, bid) = match channel {
            SellerValues::Bids => (s.valuation.clone(), s.bid.clone()),
            SellerValues::Samples => {
                let sample = s
                    .sample
                    .clone()
                    .ok_or_else(|| Error::Config(format!("seller {} has no sample value", s.id)))?;
                (sample.clone(), sample)
            }
        };
        buyers.push(PreprocessedBuyer {
            label: format!("virtual:{}", s.id),
            valuation,
            bid,
            budget: ExtRat::PosInf,
            virtual_of: Some(j),
        });
    }

    let mut edges = Vec::new();
    let mut seller_edges = vec![Vec::new(); m];
    let mut seller_fns = Vec::with_capacity(m);
    for j in 0..m {
        let sid = &instance.sellers[j].id;
        for (k, (b, _)) in instance
            .edges
            .iter()
            .enumerate()
            .filter(|(_, (_, s))| s == sid)
        {
            let buyer = instance.buyer_index(b).ok_or_else(|| Error::Validation {
                entity: format!("seller {sid}"),
                message: format!("edge to unknown buyer {b}"),
            })?;
            seller_edges[j].push(edges.len());
            edges.push(PreprocessedEdge {
                buyer,
                seller: j,
                local: seller_edges[j].len() - 1,
                instance_edge: Some(k),
            });
        }
        let original = instance.seller_function(j)?;
        let real = original.len();
        let virtual_bit = bit(real);
        let everything = original.eval(original.full()).clone();
        let mut labels: Vec<String> = original.ground().labels().to_vec();
        labels.push(buyers[n + j].label.clone());
        let modified = SetFunction::from_fn(GroundSet::new(labels)?, |s| {
            if s & virtual_bit != 0 {
                everything.clone()
            } else {
                original.eval(s).clone()
            }
        })?;
        seller_edges[j].push(edges.len());
        edges.push(PreprocessedEdge {
            buyer: n + j,
            seller: j,
            local: real,
            instance_edge: None,
        });
        seller_fns.push(modified);
    }

    let mut buyer_edges = vec![Vec::new(); n + m];
    for (e, edge) in edges.iter().enumerate() {
        buyer_edges[edge.buyer].push(e);
    }
    for list in &mut buyer_edges {
        list.sort_by_key(|&e| edges[e].seller);
    }

    // Per seller, the local mask contributed by each buyer.
    let contributions: Vec<Vec<Mask>> = (0..m)
        .map(|j| {
            let mut per_buyer = vec![0; n + m];
            for (k, &e) in seller_edges[j].iter().enumerate() {
                per_buyer[edges[e].buyer] |= bit(k);
            }
            per_buyer
        })
        .collect();
    let ground = GroundSet::new(buyers.iter().map(|b| b.label.clone()))?;
    let g = SetFunction::from_fn(ground, |s| {
        (0..m)
            .map(|j| {
                let local = members(s).fold(0, |acc, i| acc | contributions[j][i]);
                seller_fns[j].eval(local).clone()
            })
            .sum()
    })?;

    Ok(PreprocessedMarket {
        instance: instance.clone(),
        channel,
        epsilon,
        buyers,
        edges,
        buyer_edges,
        seller_edges,
        seller_fns,
        g,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::tight_lw_instance;
    use crate::rational::int;

    #[test]
    fn virtual_buyer_takes_whole_supply() {
        let pm = preprocess(&tight_lw_instance(), SellerValues::Bids).unwrap();
        assert_eq!(pm.buyer_count(), 3);
        assert!(pm.buyers[2].is_virtual());
        assert_eq!(pm.buyers[2].budget, ExtRat::PosInf);
        assert_eq!(pm.buyers[2].bid, int(1));
        let f = &pm.seller_fns[0];
        assert_eq!(f.eval(0b100), &int(1));
        assert_eq!(f.eval(0b011), &int(1));
        assert_eq!(pm.g.eval(0b100), &int(1));
        assert_eq!(pm.total_supply(), &int(1));
        assert_eq!(pm.buyer_edges[2], vec![pm.virtual_edge(0)]);
    }

    #[test]
    fn samples_channel_requires_samples() {
        let err = preprocess(&tight_lw_instance(), SellerValues::Samples).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn no_sellers_is_identity() {
        let mut inst = tight_lw_instance();
        inst.sellers.clear();
        inst.edges.clear();
        let pm = preprocess(&inst, SellerValues::Bids).unwrap();
        assert_eq!(pm.buyer_count(), 2);
        assert!(pm.edges.is_empty());
        assert!(pm.g.values().iter().all(|v| v == &int(0)));
    }
}
