//! Pairwise checks of the two-sided Hölder bounds.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embedding::Embedding;
use crate::metric_space::FiniteMetricSpace;
use crate::params::{scale_radius, EmbeddingParams, Mode};
use crate::scalar::{euclidean, Scalar};

/// Relative slack applied to both bound comparisons.
pub const DEFAULT_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum VerifyError {
    #[error("embedding was built on space {expected}, got {actual}")]
    SpaceMismatch { expected: String, actual: String },
    #[error("embedding has {rows} rows for a space of {points} points")]
    RowCount { rows: usize, points: usize },
    #[error("need at least two points")]
    DegenerateSpace,
}

/// Level assigned to a pair distance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairLevel {
    pub k: i32,
    /// `d <= 4 r_n`: the scan would continue past `n`.
    pub clamped: bool,
}

/// Largest `k` in `[n0, n]` with `d <= 4 r_{k-1} = 4 tau^-2 r_k`.
pub fn pair_level(d: f64, tau: f64, n0: i32, n: i32) -> PairLevel {
    let mut k = n;
    while k > n0 && d > 4.0 * scale_radius(tau, k - 1) {
        k -= 1;
    }
    PairLevel {
        k,
        clamped: k == n && d <= 4.0 * scale_radius(tau, n),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairRecord {
    pub i: usize,
    pub j: usize,
    pub d: f64,
    pub embedded: f64,
    /// `|F(i) - F(j)| / d^eps`.
    pub ratio: f64,
    pub level: i32,
    pub clamped: bool,
    pub in_scope: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistortionReport {
    pub schema: u32,
    pub epsilon: f64,
    pub mode: Mode,
    /// `4 tau^(2n)`; lower bound applies to pairs at least this far apart.
    pub threshold: f64,
    /// `5 sqrt(N_n) tau^(-2(1-eps))`.
    pub upper_constant: f64,
    /// `tau^5 / 8`.
    pub lower_constant: f64,
    pub slack: f64,
    pub pairs: Vec<PairRecord>,
    /// Largest ratio over all pairs.
    pub worst_upper: Option<f64>,
    /// Smallest ratio over in-scope pairs.
    pub worst_lower: Option<f64>,
    pub upper_witness: Option<(usize, usize)>,
    pub lower_witness: Option<(usize, usize)>,
    pub upper_pass: bool,
    pub lower_pass: bool,
    pub pass: bool,
    /// True only for a passing strict-mode run.
    pub certifies_theorem_bounds: bool,
}

pub fn upper_constant(params: &EmbeddingParams) -> f64 {
    5.0 * (params.colors as f64).sqrt() * params.tau.powf(-2.0 * (1.0 - params.epsilon))
}

pub fn lower_constant(params: &EmbeddingParams) -> f64 {
    params.tau.powi(5) / 8.0
}

/// Exhaustive report for arbitrary coordinates under `params`.
pub fn report_from_coords<T: Scalar>(
    space: &FiniteMetricSpace<T>,
    coords: &[Vec<T>],
    params: &EmbeddingParams,
    slack: f64,
) -> Result<DistortionReport, VerifyError> {
    if coords.len() != space.len() {
        return Err(VerifyError::RowCount {
            rows: coords.len(),
            points: space.len(),
        });
    }
    let threshold = params.lower_threshold();
    let upper = upper_constant(params);
    let lower = lower_constant(params);
    let n = space.len();
    let pairs: Vec<PairRecord> = (0..n)
        .into_par_iter()
        .map(|i| {
            ((i + 1)..n)
                .map(|j| {
                    let d = space.distance(i, j).to_f64_lossy();
                    let embedded = euclidean(&coords[i], &coords[j]).to_f64_lossy();
                    let level = pair_level(d, params.tau, params.n0, params.n);
                    PairRecord {
                        i,
                        j,
                        d,
                        embedded,
                        ratio: embedded / d.powf(params.epsilon),
                        level: level.k,
                        clamped: level.clamped,
                        in_scope: d >= threshold,
                    }
                })
                .collect::<Vec<_>>()
        })
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect();

    let mut worst_upper: Option<(f64, (usize, usize))> = None;
    let mut worst_lower: Option<(f64, (usize, usize))> = None;
    for p in &pairs {
        if worst_upper.is_none_or(|(w, _)| p.ratio > w) {
            worst_upper = Some((p.ratio, (p.i, p.j)));
        }
        if p.in_scope && worst_lower.is_none_or(|(w, _)| p.ratio < w) {
            worst_lower = Some((p.ratio, (p.i, p.j)));
        }
    }
    let upper_pass = worst_upper.is_none_or(|(w, _)| w <= upper * (1.0 + slack));
    let lower_pass = worst_lower.is_none_or(|(w, _)| w >= lower * (1.0 - slack));
    let pass = upper_pass && lower_pass;
    Ok(DistortionReport {
        schema: 1,
        epsilon: params.epsilon,
        mode: params.mode,
        threshold,
        upper_constant: upper,
        lower_constant: lower,
        slack,
        pairs,
        worst_upper: worst_upper.map(|w| w.0),
        worst_lower: worst_lower.map(|w| w.0),
        upper_witness: worst_upper.filter(|_| !upper_pass).map(|w| w.1),
        lower_witness: worst_lower.filter(|_| !lower_pass).map(|w| w.1),
        upper_pass,
        lower_pass,
        pass,
        certifies_theorem_bounds: pass && params.mode == Mode::Strict,
    })
}

/// Report for an embedding, refusing spaces other than the one it was built on.
pub fn distortion_report<T: Scalar>(
    space: &FiniteMetricSpace<T>,
    embedding: &Embedding<T>,
) -> Result<DistortionReport, VerifyError> {
    report_for_fingerprint(
        space,
        &embedding.metadata.space_fingerprint,
        &embedding.coords,
        &embedding.params,
    )
}

/// [`report_from_coords`] after checking `space` against a recorded fingerprint.
pub fn report_for_fingerprint<T: Scalar>(
    space: &FiniteMetricSpace<T>,
    fingerprint: &str,
    coords: &[Vec<T>],
    params: &EmbeddingParams,
) -> Result<DistortionReport, VerifyError> {
    let actual = space.fingerprint();
    if actual != fingerprint {
        return Err(VerifyError::SpaceMismatch {
            expected: fingerprint.to_string(),
            actual,
        });
    }
    report_from_coords(space, coords, params, DEFAULT_SLACK)
}

/// `max_{x != y} |f(x) - f(y)| / d(x,y)^exponent`.
pub fn lipschitz_norm<T, F>(f: F, space: &FiniteMetricSpace<T>, exponent: f64) -> Result<f64, VerifyError>
where
    T: Scalar,
    F: Fn(usize) -> Vec<T> + Sync,
{
    let n = space.len();
    if n < 2 {
        return Err(VerifyError::DegenerateSpace);
    }
    let values: Vec<Vec<T>> = (0..n).into_par_iter().map(&f).collect();
    let e = T::of(exponent);
    Ok((0..n)
        .into_par_iter()
        .map(|i| {
            ((i + 1)..n)
                .filter(|&j| space.distance(i, j) > T::zero())
                .map(|j| {
                    (euclidean(&values[i], &values[j]) / space.distance(i, j).powf(e)).to_f64_lossy()
                })
                .fold(0.0, f64::max)
        })
        .reduce(|| 0.0, f64::max))
}
