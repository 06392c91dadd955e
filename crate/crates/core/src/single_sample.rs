//! The single-sample mechanism: sellers whose sample is at least their bid
//! join a clinching auction in which the samples play the sellers' part;
//! every other seller keeps its goods.

use std::collections::HashMap;

use num_traits::{Signed, ToPrimitive, Zero};
use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Map, Value};

use crate::auction::{run_pca, run_pca_untraced, Allocation, PcaRun};
use crate::error::{Error, Result};
use crate::market::{preprocess, MarketInstance, PreprocessedMarket, SellerValues};
use crate::opt::{liquid_welfare, optimal_lw_allocation, social_welfare};
use crate::rational::{is_multiple_of, parse_rat, to_f64, Rat};

/// Copy of the instance with seller `j` truthfully valuing at `values[j]`
/// and holding sample `samples[j]`.
pub fn with_profile(instance: &MarketInstance, values: &[Rat], samples: &[Rat]) -> MarketInstance {
    let mut out = instance.clone();
    for (j, s) in out.sellers.iter_mut().enumerate() {
        s.valuation = values[j].clone();
        s.bid = values[j].clone();
        s.sample = Some(samples[j].clone());
    }
    out
}

/// The instance restricted to the sellers with `keep[j]` and their edges.
/// The clock increment is pinned to the parent's.
pub fn submarket(instance: &MarketInstance, keep: &[bool]) -> Result<MarketInstance> {
    let epsilon = instance.resolved_epsilon()?;
    let sellers: Vec<_> = instance
        .sellers
        .iter()
        .zip(keep)
        .filter(|(_, &k)| k)
        .map(|(s, _)| s.clone())
        .collect();
    let edges = instance
        .edges
        .iter()
        .filter(|(_, s)| sellers.iter().any(|kept| &kept.id == s))
        .cloned()
        .collect();
    Ok(MarketInstance {
        epsilon: Some(epsilon),
        buyers: instance.buyers.clone(),
        sellers,
        edges,
    })
}

#[derive(Clone, Debug)]
pub struct MechanismRun {
    pub allocation: Allocation,
    pub kept: Vec<bool>,
    /// The auction on the kept sellers, absent when nobody was kept.
    pub auction: Option<(PreprocessedMarket, PcaRun)>,
}

fn mechanism(instance: &MarketInstance, traced: bool) -> Result<MechanismRun> {
    let kept: Vec<bool> = instance
        .sellers
        .iter()
        .map(|s| {
            s.sample
                .as_ref()
                .map(|sample| sample >= &s.bid)
                .ok_or_else(|| Error::Config(format!("seller {} has no sample value", s.id)))
        })
        .collect::<Result<_>>()?;
    let mut allocation = Allocation::no_trade(instance)?;
    if !kept.iter().any(|&k| k) {
        return Ok(MechanismRun {
            allocation,
            kept,
            auction: None,
        });
    }

    let sub = submarket(instance, &kept)?;
    let pm = preprocess(&sub, SellerValues::Samples)?;
    let run = if traced {
        run_pca(&pm)?
    } else {
        run_pca_untraced(&pm)?
    };
    let inner = &run.allocation;

    allocation.goods = inner.goods.clone();
    allocation.payments = inner.payments.clone();
    for (k, (b, s)) in sub.edges.iter().enumerate() {
        let original = instance
            .edges
            .iter()
            .position(|(ob, os)| ob == b && os == s)
            .expect("submarket edges come from the instance");
        allocation.w[original] = inner.w[k].clone();
    }
    let mut sub_index = 0;
    for (j, seller) in instance.sellers.iter().enumerate() {
        if !kept[j] {
            continue;
        }
        let sold = inner.sold[sub_index].clone();
        let sample = seller.sample.as_ref().expect("kept sellers have samples");
        allocation.revenues[j] = sample * &sold;
        allocation.retained[j] = &allocation.retained[j] - &sold;
        allocation.sold[j] = sold;
        sub_index += 1;
    }
    Ok(MechanismRun {
        allocation,
        kept,
        auction: Some((pm, run)),
    })
}

/// Runs the mechanism with the instance's seller bids and samples.
pub fn run_mechanism(instance: &MarketInstance) -> Result<MechanismRun> {
    mechanism(instance, true)
}

pub fn run_mechanism_untraced(instance: &MarketInstance) -> Result<MechanismRun> {
    mechanism(instance, false)
}

/// Liquid welfare of the clinching auction on the sellers in `keep`,
/// measured on the preprocessed submarket.
fn sub_auction_lw(instance: &MarketInstance, keep: &[bool]) -> Result<(Rat, Rat)> {
    let sub = submarket(instance, keep)?;
    let pm = preprocess(&sub, SellerValues::Bids)?;
    let run = run_pca_untraced(&pm)?;
    let x = run.final_state.goods(&pm);
    let opt = optimal_lw_allocation(&pm)?;
    Ok((liquid_welfare(&pm, &x), opt.lw_opt))
}

fn opt_lw(instance: &MarketInstance) -> Result<Rat> {
    let pm = preprocess(instance, SellerValues::Bids)?;
    Ok(optimal_lw_allocation(&pm)?.lw_opt)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PairwiseReport {
    pub lw_ab: Rat,
    pub lw_ba: Rat,
    pub sw_ab: Rat,
    pub sw_ba: Rat,
    pub opt_a: Rat,
    pub opt_b: Rat,
    /// Auction and optimum on sellers with `ρ^a >= ρ^b`, valued at `ρ^a`.
    pub pca_high_a: Rat,
    pub opt_high_a: Rat,
    /// Same on sellers with `ρ^a <= ρ^b`, valued at `ρ^b`.
    pub pca_high_b: Rat,
    pub opt_high_b: Rat,
}

impl PairwiseReport {
    pub fn lw_sum(&self) -> Rat {
        &self.lw_ab + &self.lw_ba
    }

    pub fn sw_sum(&self) -> Rat {
        &self.sw_ab + &self.sw_ba
    }

    pub fn opt_sum(&self) -> Rat {
        &self.opt_a + &self.opt_b
    }

    /// Mechanism welfare dominates the two split auctions.
    pub fn auction_split_holds(&self) -> bool {
        self.lw_sum() >= &self.pca_high_a + &self.pca_high_b
    }

    /// The split optima recover at least half of the two full optima.
    pub fn optimum_split_holds(&self) -> bool {
        Rat::from_integer(2.into()) * (&self.opt_high_a + &self.opt_high_b) >= self.opt_sum()
    }

    pub fn lw_quarter_holds(&self) -> bool {
        Rat::from_integer(4.into()) * self.lw_sum() >= self.opt_sum()
    }

    pub fn sw_half_holds(&self) -> bool {
        Rat::from_integer(2.into()) * self.sw_sum() >= self.opt_sum()
    }

    pub fn to_json(&self) -> Value {
        json!({
            "lw_ab": self.lw_ab.to_string(),
            "lw_ba": self.lw_ba.to_string(),
            "sw_ab": self.sw_ab.to_string(),
            "sw_ba": self.sw_ba.to_string(),
            "lw_sum": self.lw_sum().to_string(),
            "sw_sum": self.sw_sum().to_string(),
            "opt_a": self.opt_a.to_string(),
            "opt_b": self.opt_b.to_string(),
            "opt_sum": self.opt_sum().to_string(),
            "decomposition": {
                "pca_high_a": self.pca_high_a.to_string(),
                "opt_high_a": self.opt_high_a.to_string(),
                "pca_high_b": self.pca_high_b.to_string(),
                "opt_high_b": self.opt_high_b.to_string(),
                "auction_split_holds": self.auction_split_holds(),
                "optimum_split_holds": self.optimum_split_holds(),
            },
            "lw_quarter_holds": self.lw_quarter_holds(),
            "sw_half_holds": self.sw_half_holds(),
        })
    }
}

/// Runs the mechanism on `(ρ^a, ρ^b)` and on the swap, together with both
/// optima and the split by which of the two values is higher.
pub fn pairwise_eval(
    instance: &MarketInstance,
    rho_a: &[Rat],
    rho_b: &[Rat],
) -> Result<PairwiseReport> {
    let m = instance.sellers.len();
    if rho_a.len() != m || rho_b.len() != m {
        return Err(Error::ContractViolation(format!(
            "seller value vectors must have {m} entries"
        )));
    }
    if rho_a.iter().chain(rho_b).any(|v| !v.is_positive()) {
        return Err(Error::ContractViolation(
            "seller values must be positive".into(),
        ));
    }
    let ab = with_profile(instance, rho_a, rho_b);
    let ba = with_profile(instance, rho_b, rho_a);
    let run_ab = run_mechanism_untraced(&ab)?;
    let run_ba = run_mechanism_untraced(&ba)?;

    let high_a: Vec<bool> = rho_a.iter().zip(rho_b).map(|(a, b)| a >= b).collect();
    let high_b: Vec<bool> = rho_a.iter().zip(rho_b).map(|(a, b)| a <= b).collect();
    let (pca_high_a, opt_high_a) = sub_auction_lw(&ab, &high_a)?;
    let (pca_high_b, opt_high_b) = sub_auction_lw(&ba, &high_b)?;

    Ok(PairwiseReport {
        lw_ab: run_ab.allocation.liquid_welfare(&ab),
        lw_ba: run_ba.allocation.liquid_welfare(&ba),
        sw_ab: run_ab.allocation.social_welfare(&ab),
        sw_ba: run_ba.allocation.social_welfare(&ba),
        opt_a: opt_lw(&ab)?,
        opt_b: opt_lw(&ba)?,
        pca_high_a,
        opt_high_a,
        pca_high_b,
        opt_high_b,
    })
}

/// Distribution of one seller's value on a finite grid.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SellerDistribution {
    /// Uniform on `lo, lo + step, ..., hi`.
    UniformGrid { lo: Rat, hi: Rat, step: Rat },
    /// `points[k]` with probability proportional to `weights[k]`.
    Discrete { points: Vec<Rat>, weights: Vec<u64> },
}

impl SellerDistribution {
    pub fn support(&self) -> Vec<Rat> {
        match self {
            SellerDistribution::UniformGrid { lo, hi, step } => {
                let mut out = Vec::new();
                let mut v = lo.clone();
                while &v <= hi {
                    out.push(v.clone());
                    v += step;
                }
                out
            }
            SellerDistribution::Discrete { points, .. } => points.clone(),
        }
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> Rat {
        match self {
            SellerDistribution::UniformGrid { .. } => {
                let support = self.support();
                support[rng.gen_range(0..support.len())].clone()
            }
            SellerDistribution::Discrete { points, weights } => {
                let index = WeightedIndex::new(weights).expect("validated weights");
                points[index.sample(rng)].clone()
            }
        }
    }

    fn check(&self, eps: &Rat, seller: &str) -> Result<()> {
        let bad = |msg: String| Error::Config(format!("distribution for seller {seller}: {msg}"));
        match self {
            SellerDistribution::UniformGrid { lo, hi, step } => {
                if !step.is_positive() || !lo.is_positive() || hi < lo {
                    return Err(bad("need 0 < lo <= hi and step > 0".into()));
                }
                if !((hi - lo) / step).is_integer() {
                    return Err(bad("hi - lo must be a multiple of step".into()));
                }
            }
            SellerDistribution::Discrete { points, weights } => {
                if points.is_empty() || points.len() != weights.len() {
                    return Err(bad("points and weights must be nonempty and aligned".into()));
                }
                if weights.iter().all(|&w| w == 0) {
                    return Err(bad("weights must not all be zero".into()));
                }
            }
        }
        for p in self.support() {
            if !p.is_positive() || !is_multiple_of(&p, eps) {
                return Err(bad(format!(
                    "support point {p} is not a positive multiple of epsilon {eps}"
                )));
            }
        }
        Ok(())
    }
}

/// Independent per-seller distributions, aligned with instance sellers.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DistributionSpec {
    pub sellers: Vec<SellerDistribution>,
}

impl DistributionSpec {
    /// Parses `{"sellers": {"<id>" | "*": {"kind": "uniform_grid", "lo", "hi",
    /// "step"} | {"kind": "discrete", "points": [...], "weights": [...]}}}`.
    /// `"*"` applies to every seller without its own entry.
    pub fn parse(text: &str, instance: &MarketInstance) -> Result<Self> {
        let doc: Value = serde_json::from_str(text).map_err(|e| {
            Error::parse(
                format!("line {} column {}", e.line(), e.column()),
                e.to_string(),
            )
        })?;
        let table = doc
            .get("sellers")
            .and_then(Value::as_object)
            .ok_or_else(|| Error::parse("$.sellers", "expected an object keyed by seller id"))?;
        let sellers = instance
            .sellers
            .iter()
            .map(|s| {
                let (key, entry) = table
                    .get_key_value(&s.id)
                    .or_else(|| table.get_key_value("*"))
                    .ok_or_else(|| {
                        Error::parse("$.sellers", format!("no distribution for seller {}", s.id))
                    })?;
                parse_seller_distribution(entry, &format!("$.sellers.{key}"))
            })
            .collect::<Result<_>>()?;
        Ok(DistributionSpec { sellers })
    }
}

fn parse_seller_distribution(v: &Value, path: &str) -> Result<SellerDistribution> {
    let obj = v
        .as_object()
        .ok_or_else(|| Error::parse(path, "expected an object"))?;
    let rat_at = |key: &str| -> Result<Rat> {
        let s = obj
            .get(key)
            .and_then(Value::as_str)
            .ok_or_else(|| Error::parse(format!("{path}.{key}"), "expected a rational string"))?;
        parse_rat(s).map_err(|m| Error::parse(format!("{path}.{key}"), m))
    };
    match obj.get("kind").and_then(Value::as_str) {
        Some("uniform_grid") => Ok(SellerDistribution::UniformGrid {
            lo: rat_at("lo")?,
            hi: rat_at("hi")?,
            step: rat_at("step")?,
        }),
        Some("discrete") => {
            let points = obj
                .get("points")
                .and_then(Value::as_array)
                .ok_or_else(|| Error::parse(format!("{path}.points"), "expected an array"))?
                .iter()
                .enumerate()
                .map(|(k, p)| {
                    let at = format!("{path}.points[{k}]");
                    let s = p
                        .as_str()
                        .ok_or_else(|| Error::parse(&at, "expected a rational string"))?;
                    parse_rat(s).map_err(|m| Error::parse(&at, m))
                })
                .collect::<Result<Vec<_>>>()?;
            let weights = match obj.get("weights") {
                None => vec![1; points.len()],
                Some(w) => w
                    .as_array()
                    .ok_or_else(|| Error::parse(format!("{path}.weights"), "expected an array"))?
                    .iter()
                    .enumerate()
                    .map(|(k, x)| {
                        x.as_u64().ok_or_else(|| {
                            Error::parse(
                                format!("{path}.weights[{k}]"),
                                "expected a nonnegative integer",
                            )
                        })
                    })
                    .collect::<Result<_>>()?,
            };
            Ok(SellerDistribution::Discrete { points, weights })
        }
        _ => Err(Error::parse(
            format!("{path}.kind"),
            "expected \"uniform_grid\" or \"discrete\"",
        )),
    }
}

#[derive(Clone, Debug)]
pub struct TrialRecord {
    pub rho_a: Vec<Rat>,
    pub rho_b: Vec<Rat>,
    pub lw_mech: Rat,
    pub sw_mech: Rat,
    pub lw_opt: Rat,
}

#[derive(Clone, Debug)]
pub struct MonteCarloReport {
    pub trials: u64,
    pub seed: u64,
    pub mean_lw_mech: Rat,
    pub mean_sw_mech: Rat,
    pub mean_lw_opt: Rat,
    pub ratio_lw: f64,
    pub ratio_sw: f64,
    pub stderr_lw: f64,
    pub stderr_sw: f64,
    /// Number of distinct `(ρ^a, ρ^b)` pairs that were evaluated.
    pub distinct_pairs: usize,
    pub per_trial: Vec<TrialRecord>,
}

impl MonteCarloReport {
    pub fn to_json(&self, with_trials: bool) -> Value {
        let mut obj = Map::new();
        obj.insert("trials".into(), json!(self.trials));
        obj.insert("seed".into(), json!(self.seed));
        obj.insert(
            "draw_order".into(),
            json!("ChaCha8 seeded with `seed`, stream = trial index; per trial all rho_a in seller order, then all rho_b"),
        );
        obj.insert("mean_lw_mech".into(), json!(self.mean_lw_mech.to_string()));
        obj.insert("mean_sw_mech".into(), json!(self.mean_sw_mech.to_string()));
        obj.insert("mean_lw_opt".into(), json!(self.mean_lw_opt.to_string()));
        obj.insert("ratio_lw".into(), json!(self.ratio_lw));
        obj.insert("ratio_sw".into(), json!(self.ratio_sw));
        obj.insert("stderr_lw".into(), json!(self.stderr_lw));
        obj.insert("stderr_sw".into(), json!(self.stderr_sw));
        obj.insert("distinct_pairs".into(), json!(self.distinct_pairs));
        if with_trials {
            let trials: Vec<Value> = self
                .per_trial
                .iter()
                .map(|t| {
                    json!({
                        "rho_a": t.rho_a.iter().map(Rat::to_string).collect::<Vec<_>>(),
                        "rho_b": t.rho_b.iter().map(Rat::to_string).collect::<Vec<_>>(),
                        "lw_mech": t.lw_mech.to_string(),
                        "sw_mech": t.sw_mech.to_string(),
                        "lw_opt": t.lw_opt.to_string(),
                    })
                })
                .collect();
            obj.insert("per_trial".into(), Value::Array(trials));
        }
        Value::Object(obj)
    }
}

/// Standard error of `mean(y) / mean(x)` by the delta method.
fn ratio_stderr(y: &[f64], x: &[f64]) -> f64 {
    let n = y.len() as f64;
    if y.len() < 2 {
        return 0.0;
    }
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    if mx == 0.0 {
        return f64::NAN;
    }
    let r = my / mx;
    let resid: Vec<f64> = y.iter().zip(x).map(|(a, b)| a - r * b).collect();
    let mean_resid = resid.iter().sum::<f64>() / n;
    let var = resid.iter().map(|e| (e - mean_resid).powi(2)).sum::<f64>() / (n - 1.0);
    (var / n).sqrt() / mx.abs()
}

/// Monte Carlo estimate of the mechanism's expected welfare against the
/// expected optimum. Each trial draws `(ρ^a, ρ^b)` and scores the symmetric
/// average of the pair and its swap, which has the same expectation as a
/// single draw. Results for repeated pairs are reused.
pub fn estimate_expectations(
    instance: &MarketInstance,
    dist: &DistributionSpec,
    trials: u64,
    seed: u64,
) -> Result<MonteCarloReport> {
    if trials == 0 {
        return Err(Error::Config("at least one trial is required".into()));
    }
    if dist.sellers.len() != instance.sellers.len() {
        return Err(Error::Config(format!(
            "distribution covers {} sellers, instance has {}",
            dist.sellers.len(),
            instance.sellers.len()
        )));
    }
    let eps = instance.resolved_epsilon()?;
    for (d, s) in dist.sellers.iter().zip(&instance.sellers) {
        d.check(&eps, &s.id)?;
    }

    let two = Rat::from_integer(2.into());
    let mut cache: HashMap<(Vec<Rat>, Vec<Rat>), PairwiseReport> = HashMap::new();
    let mut records = Vec::with_capacity(trials as usize);
    for t in 0..trials {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(t);
        let rho_a: Vec<Rat> = dist.sellers.iter().map(|d| d.sample(&mut rng)).collect();
        let rho_b: Vec<Rat> = dist.sellers.iter().map(|d| d.sample(&mut rng)).collect();
        let key = (rho_a.clone(), rho_b.clone());
        let report = match cache.get(&key) {
            Some(r) => r.clone(),
            None => {
                // The swapped pair has the same symmetric average.
                let swapped = (rho_b.clone(), rho_a.clone());
                let r = match cache.get(&swapped) {
                    Some(r) => r.clone(),
                    None => pairwise_eval(instance, &rho_a, &rho_b)?,
                };
                cache.insert(key, r.clone());
                r
            }
        };
        records.push(TrialRecord {
            rho_a,
            rho_b,
            lw_mech: report.lw_sum() / &two,
            sw_mech: report.sw_sum() / &two,
            lw_opt: report.opt_sum() / &two,
        });
    }

    let n = Rat::from_integer((trials as i64).into());
    let mean = |f: &dyn Fn(&TrialRecord) -> &Rat| -> Rat {
        records.iter().map(f).fold(Rat::zero(), |acc, v| acc + v) / &n
    };
    let mean_lw_mech = mean(&|t| &t.lw_mech);
    let mean_sw_mech = mean(&|t| &t.sw_mech);
    let mean_lw_opt = mean(&|t| &t.lw_opt);
    let ratio = |num: &Rat| -> f64 {
        if mean_lw_opt.is_zero() {
            f64::NAN
        } else {
            (num / &mean_lw_opt).to_f64().unwrap_or(f64::NAN)
        }
    };
    let lw: Vec<f64> = records.iter().map(|t| to_f64(&t.lw_mech)).collect();
    let sw: Vec<f64> = records.iter().map(|t| to_f64(&t.sw_mech)).collect();
    let opt: Vec<f64> = records.iter().map(|t| to_f64(&t.lw_opt)).collect();
    Ok(MonteCarloReport {
        trials,
        seed,
        ratio_lw: ratio(&mean_lw_mech),
        ratio_sw: ratio(&mean_sw_mech),
        stderr_lw: ratio_stderr(&lw, &opt),
        stderr_sw: ratio_stderr(&sw, &opt),
        mean_lw_mech,
        mean_sw_mech,
        mean_lw_opt,
        distinct_pairs: cache.len(),
        per_trial: records,
    })
}

/// Welfare of a mechanism run on the preprocessed auction market, used by
/// the checks that compare against auction-side quantities.
pub fn auction_welfare(pm: &PreprocessedMarket, run: &PcaRun) -> (Rat, Rat) {
    let x = run.final_state.goods(pm);
    (liquid_welfare(pm, &x), social_welfare(pm, &x))
}
