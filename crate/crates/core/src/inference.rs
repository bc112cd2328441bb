//! Cross-lingual comparison of two gradients.
//!
//! The statistic is the cosine between unit gradients. Every resampling
//! procedure refits the closed-form single-component direction, and the
//! observed statistic is computed the same way so it is exchangeable with
//! the null draws. Replicate `t` always draws from its own RNG stream, so
//! results do not depend on how rayon schedules the work.

use ndarray::{concatenate, Array1, ArrayView1, Axis};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gradient::{closed_form_direction, pls1_direction_rows, Gradient, Pls1Kernel};
use crate::lexicon::{zscore, JoinedSample};
use crate::seed::replicate_rng;
use crate::stats;

/// Fresh attempts allowed after a degenerate refit within one replicate.
pub const MAX_RETRIES: usize = 10;
/// `|ρ|` is clamped to this before `arctanh`.
pub const FISHER_CLAMP: f64 = 1.0 - 1e-12;
/// Two-sided 95% normal quantile.
pub const Z_95: f64 = 1.96;
/// Smallest bootstrap replicate count accepted.
pub const MIN_BOOTSTRAP: usize = 100;
/// Bins in the serialized null histogram.
pub const HISTOGRAM_BINS: usize = 40;

// Largest f64 below 1; interval endpoints never reach ±1.
const BELOW_ONE: f64 = 1.0 - f64::EPSILON / 2.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tail {
    Upper,
    Lower,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PermutationResult {
    pub rho_observed: f64,
    pub null_samples: Vec<f64>,
    pub p_value: f64,
    pub n: usize,
    pub tail: Tail,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BootstrapResult {
    /// Observed ρ after clamping to `±FISHER_CLAMP`.
    pub rho_observed: f64,
    pub sigma_z: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub replicates: usize,
    pub replicate_rhos: Vec<f64>,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub bin_edges: Vec<f64>,
    pub counts: Vec<usize>,
}

/// Cosine of two unit gradients.
pub fn cosine(a: &Gradient, b: &Gradient) -> Result<f64> {
    cosine_directions(a.direction(), b.direction())
}

/// Inner product of two unit vectors, clamped to `[-1, 1]`.
pub fn cosine_directions(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    Ok(a.dot(&b).clamp(-1.0, 1.0))
}

/// `(1 + #{null at or beyond observed}) / (n + 1)`.
pub fn permutation_p_value(observed: f64, null: &[f64], tail: Tail) -> f64 {
    let extreme = null
        .iter()
        .filter(|&&r| match tail {
            Tail::Upper => r >= observed,
            Tail::Lower => r <= observed,
        })
        .count();
    (1 + extreme) as f64 / (null.len() + 1) as f64
}

/// Cosine of the closed-form K = 1 gradients of two intact samples.
pub fn observed_rho(sample_a: &JoinedSample, sample_b: &JoinedSample) -> Result<f64> {
    check_dims(sample_a, sample_b)?;
    let ga = closed_form_direction(sample_a.x.view(), &sample_a.y)?;
    let gb = closed_form_direction(sample_b.x.view(), &sample_b.y)?;
    cosine_directions(ga.view(), gb.view())
}

fn check_dims(a: &JoinedSample, b: &JoinedSample) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            left: a.dim(),
            right: b.dim(),
        });
    }
    Ok(())
}

/// Runs `draw` until it yields a non-degenerate value, up to `MAX_RETRIES`
/// extra attempts. Other errors pass straight through.
fn with_retries<T>(
    replicate: usize,
    rng: &mut ChaCha8Rng,
    mut draw: impl FnMut(&mut ChaCha8Rng) -> Result<T>,
) -> Result<T> {
    let mut attempt = 0;
    loop {
        match draw(rng) {
            Ok(v) => return Ok(v),
            Err(e) if e.is_retryable() && attempt < MAX_RETRIES => {
                log::debug!("replicate {replicate}: degenerate refit ({e}), retrying");
                attempt += 1;
            }
            Err(e) if e.is_retryable() => {
                return Err(Error::RetriesExhausted {
                    replicate,
                    attempts: attempt + 1,
                    last: Box::new(e),
                })
            }
            Err(e) => return Err(e),
        }
    }
}

fn replicate_values<F>(count: usize, seed: u64, draw: F) -> Result<Vec<f64>>
where
    F: Fn(&mut ChaCha8Rng) -> Result<f64> + Sync,
{
    (0..count)
        .into_par_iter()
        .map(|t| {
            let mut rng = replicate_rng(seed, t as u64);
            with_retries(t, &mut rng, &draw)
        })
        .collect()
}

/// Tests whether two gradients are more aligned than chance.
///
/// Each permutation shuffles the word-to-label pairing within each sample and
/// refits both gradients. Upper tail.
pub fn alignment_test(
    sample_a: &JoinedSample,
    sample_b: &JoinedSample,
    n: usize,
    seed: u64,
) -> Result<PermutationResult> {
    check_n(n)?;
    let rho = observed_rho(sample_a, sample_b)?;
    let kernel_a = Pls1Kernel::new(sample_a.x.view())?;
    let kernel_b = Pls1Kernel::new(sample_b.x.view())?;
    let za = zscore(&sample_a.y)?;
    let zb = zscore(&sample_b.y)?;
    let null = replicate_values(n, seed, |rng| {
        let mut sa = za.clone();
        let mut sb = zb.clone();
        sa.shuffle(rng);
        sb.shuffle(rng);
        let ga = kernel_a.direction(&sa)?;
        let gb = kernel_b.direction(&sb)?;
        cosine_directions(ga.view(), gb.view())
    })?;
    Ok(PermutationResult {
        rho_observed: rho,
        p_value: permutation_p_value(rho, &null, Tail::Upper),
        null_samples: null,
        n,
        tail: Tail::Upper,
        seed,
    })
}

/// Tests whether two gradients differ more than sampling alone explains.
///
/// Labels are z-scored within language, rows are pooled, and each permutation
/// reassigns rows to two groups of the original sizes. Lower tail.
pub fn difference_test(
    sample_a: &JoinedSample,
    sample_b: &JoinedSample,
    n: usize,
    seed: u64,
) -> Result<PermutationResult> {
    check_n(n)?;
    let rho = observed_rho(sample_a, sample_b)?;
    let pooled = concatenate(Axis(0), &[sample_a.x.view(), sample_b.x.view()])
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let mut labels = zscore(&sample_a.y)?;
    labels.extend(zscore(&sample_b.y)?);
    let size_a = sample_a.len();
    let null = replicate_values(n, seed, |rng| {
        let mut order: Vec<usize> = (0..labels.len()).collect();
        order.shuffle(rng);
        let (rows_a, rows_b) = order.split_at(size_a);
        let la: Vec<f64> = rows_a.iter().map(|&r| labels[r]).collect();
        let lb: Vec<f64> = rows_b.iter().map(|&r| labels[r]).collect();
        let ga = pls1_direction_rows(pooled.view(), rows_a, &la)?;
        let gb = pls1_direction_rows(pooled.view(), rows_b, &lb)?;
        cosine_directions(ga.view(), gb.view())
    })?;
    Ok(PermutationResult {
        rho_observed: rho,
        p_value: permutation_p_value(rho, &null, Tail::Lower),
        null_samples: null,
        n,
        tail: Tail::Lower,
        seed,
    })
}

fn check_n(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidArgument(
            "permutation count must be positive".into(),
        ));
    }
    Ok(())
}

fn fisher_z(rho: f64) -> f64 {
    rho.clamp(-FISHER_CLAMP, FISHER_CLAMP).atanh()
}

/// Interval `tanh(arctanh(ρ) ± 1.96 σ_z)`, kept strictly inside `(-1, 1)`.
pub fn fisher_interval(rho: f64, sigma_z: f64) -> (f64, f64) {
    let rho = rho.clamp(-FISHER_CLAMP, FISHER_CLAMP);
    if sigma_z == 0.0 {
        return (rho, rho);
    }
    let z = rho.atanh();
    let low = (z - Z_95 * sigma_z).tanh().clamp(-BELOW_ONE, BELOW_ONE);
    let high = (z + Z_95 * sigma_z).tanh().clamp(-BELOW_ONE, BELOW_ONE);
    (low.min(rho), high.max(rho))
}

/// Hybrid bootstrap interval for ρ.
///
/// The spread comes from Fisher-transformed bootstrap replicates, while the
/// center stays at the observed ρ.
pub fn bootstrap_interval(
    sample_a: &JoinedSample,
    sample_b: &JoinedSample,
    replicates: usize,
    seed: u64,
) -> Result<BootstrapResult> {
    if replicates < MIN_BOOTSTRAP {
        return Err(Error::InvalidArgument(format!(
            "bootstrap needs at least {MIN_BOOTSTRAP} replicates, got {replicates}"
        )));
    }
    let rho = observed_rho(sample_a, sample_b)?;
    let resample = |sample: &JoinedSample, rng: &mut ChaCha8Rng| -> Result<Array1<f64>> {
        let n = sample.len();
        let rows: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
        let labels: Vec<f64> = rows.iter().map(|&r| sample.y[r]).collect();
        pls1_direction_rows(sample.x.view(), &rows, &labels)
    };
    let rhos = replicate_values(replicates, seed, |rng| {
        let ga = resample(sample_a, rng)?;
        let gb = resample(sample_b, rng)?;
        cosine_directions(ga.view(), gb.view())
    })?;
    let zs: Vec<f64> = rhos.iter().map(|&r| fisher_z(r)).collect();
    let sigma_z = stats::sample_std(&zs);
    let (ci_low, ci_high) = fisher_interval(rho, sigma_z);
    Ok(BootstrapResult {
        rho_observed: rho.clamp(-FISHER_CLAMP, FISHER_CLAMP),
        sigma_z,
        ci_low,
        ci_high,
        replicates,
        replicate_rhos: rhos,
        seed,
    })
}

/// Equal-width histogram over the range of `values`.
pub fn histogram(values: &[f64], bins: usize) -> Histogram {
    let bins = bins.max(1);
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if values.is_empty() || !(hi > lo) {
        let edge = if values.is_empty() { 0.0 } else { lo };
        return Histogram {
            bin_edges: vec![edge, edge],
            counts: vec![values.len()],
        };
    }
    let width = (hi - lo) / bins as f64;
    let mut bin_edges: Vec<f64> = (0..bins).map(|i| lo + width * i as f64).collect();
    bin_edges.push(hi);
    let mut counts = vec![0; bins];
    for &v in values {
        let i = (((v - lo) / width) as usize).min(bins - 1);
        counts[i] += 1;
    }
    Histogram { bin_edges, counts }
}
