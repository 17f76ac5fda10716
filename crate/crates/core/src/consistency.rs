//! Agreement metrics between instrument-wise treatment-effect estimates.
//!
//! The observed statistic is the absolute gap between 2SLS estimates
//! obtained from different instruments for the same (treatment, outcome)
//! pair. Random proxy pairs drawn from the remaining dataset variables give
//! a negative control: their gap distribution calibrates how much agreement
//! chance alone produces, both as a normalizing denominator and as a null
//! distribution for one-sided p-values.

use std::collections::BTreeMap;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{standardize, PanelDataset};
use crate::error::{Error, Result};
use crate::query::CausalQuery;
use crate::regress::{two_stage_least_squares, IvEstimate};

/// Per-slot redraw budget when a random pair's 2SLS fails; the total draw
/// budget is therefore 10 per requested pair.
const REDRAWS_PER_SLOT: usize = 10;

/// Options for the estimation route used inside the metric.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[derive(Default)]
pub struct EstimationOptions {
    /// Standardize each aligned column before 2SLS. The discovery pipeline
    /// turns this on to match scale-free reporting; direct estimation on
    /// raw values leaves it off.
    pub standardize: bool,
}


/// Full consistency evaluation for one (treatment, outcome) pair.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConsistencyReport {
    /// Mean absolute gap between instrument-wise estimates over all
    /// unordered instrument pairs.
    pub delta_llm: f64,
    /// Median absolute gap over the random-proxy draws.
    pub delta_rand_summary: f64,
    /// `delta_llm / delta_rand_summary`.
    pub c_norm: f64,
    /// One-sided empirical p-value of `delta_llm` against the null samples.
    pub p_value: f64,
    /// Absolute gaps from the full null sampling run.
    pub null_samples: Vec<f64>,
    /// Per-instrument 2SLS estimates keyed by proxy variable name.
    pub instrument_betas: BTreeMap<String, IvEstimate>,
    /// Individual betas behind the random-proxy summary draws (two per
    /// draw), kept for external density plotting.
    pub rand_betas: Vec<f64>,
    /// Gaps behind the random-proxy summary.
    pub rand_deltas: Vec<f64>,
    /// Redraws consumed while assembling the random draws.
    pub rand_redraws: usize,
}

/// Absolute difference of two finite estimates.
pub fn delta(b1: f64, b2: f64) -> Result<f64> {
    if !b1.is_finite() || !b2.is_finite() {
        return Err(Error::Domain(format!("delta requires finite inputs, got {b1} and {b2}")));
    }
    Ok((b1 - b2).abs())
}

/// Mean absolute gap over all unordered pairs of estimates. With exactly
/// two estimates this reduces to their absolute difference.
pub fn mean_pairwise_delta(betas: &[f64]) -> Result<f64> {
    if betas.len() < 2 {
        return Err(Error::InsufficientInstruments(format!(
            "need at least 2 estimates, got {}",
            betas.len()
        )));
    }
    let mut total = 0.0;
    let mut count = 0usize;
    for i in 0..betas.len() {
        for j in (i + 1)..betas.len() {
            total += delta(betas[i], betas[j])?;
            count += 1;
        }
    }
    Ok(total / count as f64)
}

/// 2SLS estimate of the query's effect using `instrument` as the proxy,
/// over the complete cases of (treatment, outcome, instrument).
pub fn estimate_with_instrument(
    d: &PanelDataset,
    q: &CausalQuery,
    instrument: &str,
    opts: &EstimationOptions,
) -> Result<IvEstimate> {
    let table = d.align(&[&q.treatment, &q.outcome, instrument])?;
    if table.n() < 4 {
        return Err(Error::InsufficientData(format!(
            "only {} complete cases for ({}, {}, {instrument})",
            table.n(),
            q.treatment,
            q.outcome
        )));
    }
    let mut cols = table.columns;
    if opts.standardize {
        for c in cols.iter_mut() {
            *c = standardize(c)?;
        }
    }
    two_stage_least_squares(&cols[1], &cols[0], &cols[2], &[])
}

/// Result of `delta_llm`: the gap statistic plus its per-instrument inputs.
#[derive(Debug, Clone)]
pub struct InstrumentAgreement {
    pub value: f64,
    pub betas: BTreeMap<String, IvEstimate>,
}

/// Mean absolute gap between the 2SLS estimates produced by each grounded
/// proxy for the same query.
pub fn delta_llm(
    d: &PanelDataset,
    q: &CausalQuery,
    proxies: &[String],
    opts: &EstimationOptions,
) -> Result<InstrumentAgreement> {
    if proxies.len() < 2 {
        return Err(Error::InsufficientInstruments(format!(
            "consistency needs at least 2 grounded proxies, got {}",
            proxies.len()
        )));
    }
    let mut betas = BTreeMap::new();
    for proxy in proxies {
        let est = estimate_with_instrument(d, q, proxy, opts)?;
        betas.insert(proxy.clone(), est);
    }
    let values: Vec<f64> = proxies.iter().map(|p| betas[p].beta).collect();
    Ok(InstrumentAgreement { value: mean_pairwise_delta(&values)?, betas })
}

/// Outcome of random-proxy sampling.
#[derive(Debug, Clone)]
pub struct RandomBaseline {
    /// Median of the sampled gaps.
    pub summary: f64,
    pub deltas: Vec<f64>,
    /// Both betas of every accepted draw.
    pub betas: Vec<f64>,
    pub redraws: usize,
}

fn median(sorted: &mut [f64]) -> f64 {
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

fn candidate_pool(d: &PanelDataset, q: &CausalQuery, exclude: &[String]) -> Result<Vec<String>> {
    let pool: Vec<String> = d
        .variable_names()
        .filter(|v| *v != q.treatment && *v != q.outcome && !exclude.iter().any(|e| e == v))
        .map(ToString::to_string)
        .collect();
    if pool.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "random-proxy baseline needs at least 2 candidate variables, found {}",
            pool.len()
        )));
    }
    Ok(pool)
}

/// One random-pair gap over precomputed per-variable estimates. Streams of
/// the seeded generator are derived per slot, so sampling is reproducible no
/// matter how the slots are scheduled.
fn draw_slot(pool_betas: &[Option<f64>], seed: u64, slot: u64) -> Result<(f64, f64, f64, usize)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(slot + 1);
    let mut redraws = 0;
    for _ in 0..REDRAWS_PER_SLOT {
        let i = rng.random_range(0..pool_betas.len());
        let mut j = rng.random_range(0..pool_betas.len() - 1);
        if j >= i {
            j += 1;
        }
        match (pool_betas[i], pool_betas[j]) {
            (Some(a), Some(b)) => {
                let gap = delta(a, b)?;
                return Ok((gap, a, b, redraws));
            }
            _ => redraws += 1,
        }
    }
    Err(Error::Exhausted(format!(
        "no estimable random pair after {REDRAWS_PER_SLOT} draws in slot {slot}"
    )))
}

fn sample_random_gaps(
    d: &PanelDataset,
    q: &CausalQuery,
    exclude: &[String],
    seed: u64,
    count: usize,
    opts: &EstimationOptions,
) -> Result<RandomBaseline> {
    if count == 0 {
        return Err(Error::Config("random-proxy sampling needs at least one pair".into()));
    }
    let pool = candidate_pool(d, q, exclude)?;
    // a draw's estimate depends only on the drawn variable, so each pool
    // member is estimated once; draws then sample pairs of results
    let pool_betas: Vec<Option<f64>> = pool
        .par_iter()
        .map(|name| estimate_with_instrument(d, q, name, opts).ok().map(|e| e.beta))
        .collect();
    let slots: Vec<(f64, f64, f64, usize)> = (0..count as u64)
        .into_par_iter()
        .map(|slot| draw_slot(&pool_betas, seed, slot))
        .collect::<Result<_>>()?;
    let mut deltas: Vec<f64> = slots.iter().map(|s| s.0).collect();
    let betas: Vec<f64> = slots.iter().flat_map(|s| [s.1, s.2]).collect();
    let redraws = slots.iter().map(|s| s.3).sum();
    let mut sorted = deltas.clone();
    let summary = median(&mut sorted);
    deltas.shrink_to_fit();
    Ok(RandomBaseline { summary, deltas, betas, redraws })
}

/// Random-proxy negative control: `r` gaps between 2SLS estimates from
/// randomly drawn variable pairs, summarized by their median.
pub fn delta_rand(
    d: &PanelDataset,
    q: &CausalQuery,
    exclude: &[String],
    seed: u64,
    r: usize,
    opts: &EstimationOptions,
) -> Result<RandomBaseline> {
    sample_random_gaps(d, q, exclude, seed, r, opts)
}

/// Ratio of the observed gap to the random baseline.
pub fn c_norm(delta_llm: f64, delta_rand: f64) -> Result<f64> {
    if delta_rand <= 0.0 || delta_rand.is_nan() {
        return Err(Error::DegenerateBaseline);
    }
    Ok((delta_llm / delta_rand).abs())
}

/// Null distribution of gaps from `n_pairs` random proxy pairs.
pub fn null_distribution(
    d: &PanelDataset,
    q: &CausalQuery,
    exclude: &[String],
    seed: u64,
    n_pairs: usize,
    opts: &EstimationOptions,
) -> Result<Vec<f64>> {
    // a distinct stream family keeps the null independent of the summary draws
    sample_random_gaps(d, q, exclude, seed ^ 0x9E37_79B9_7F4A_7C15, n_pairs, opts).map(|b| b.deltas)
}

/// One-sided empirical p-value with the add-one rule:
/// `(1 + #{null_i <= observed}) / (N + 1)`, so p is always in (0, 1].
pub fn empirical_p(observed: f64, null: &[f64]) -> f64 {
    assert!(!null.is_empty(), "empirical_p requires a nonempty null sample");
    let count = null.iter().filter(|v| **v <= observed).count();
    (1 + count) as f64 / (null.len() + 1) as f64
}

/// Run the full consistency evaluation for one query.
pub fn evaluate(
    d: &PanelDataset,
    q: &CausalQuery,
    proxies: &[String],
    seed: u64,
    r: usize,
    n_pairs: usize,
    opts: &EstimationOptions,
) -> Result<ConsistencyReport> {
    let agreement = delta_llm(d, q, proxies, opts)?;
    let baseline = delta_rand(d, q, proxies, seed, r, opts)?;
    let ratio = c_norm(agreement.value, baseline.summary)?;
    let null = null_distribution(d, q, proxies, seed, n_pairs, opts)?;
    let p = empirical_p(agreement.value, &null);
    Ok(ConsistencyReport {
        delta_llm: agreement.value,
        delta_rand_summary: baseline.summary,
        c_norm: ratio,
        p_value: p,
        null_samples: null,
        instrument_betas: agreement.betas,
        rand_betas: baseline.betas,
        rand_deltas: baseline.deltas,
        rand_redraws: baseline.redraws,
    })
}
