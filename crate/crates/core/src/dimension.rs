//! Covering numbers and the dimension estimators built on them.
//!
//! All covers are intrinsic: ball centers are points of the space. Greedy
//! covers come from a farthest-point traversal, whose prefix of length `m`
//! is both an `r`-cover (once the insertion radius drops to `r`) and, at
//! radius `2r`, a packing that certifies a lower bound.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metric_space::FiniteMetricSpace;
use crate::scalar::Scalar;

/// Largest subset size accepted by the exact branch-and-bound cover.
pub const EXACT_COVER_CAP: usize = 16;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DimensionError {
    #[error("exact covering requested for {size} points; the cap is {cap}")]
    ExactTooLarge { size: usize, cap: usize },
    #[error("need at least {needed} distinct scales, got {got}")]
    InsufficientScales { needed: usize, got: usize },
    #[error("theta = {0} is outside (0, 1)")]
    ThetaOutOfRange(f64),
    #[error("covering radius must be positive, got {0}")]
    NonPositiveRadius(f64),
    #[error("cannot cover an empty subset")]
    EmptySubset,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoverMethod {
    #[default]
    GreedyCover,
    ExactCover,
}

/// Result of a covering computation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoverCount {
    /// Size of the cover found (exact minimum for [`CoverMethod::ExactCover`]).
    pub count: usize,
    /// Packing lower bound: points pairwise more than `2r` apart.
    pub lower_bound: usize,
    pub method: CoverMethod,
}

/// Farthest-point traversal of `subset`, started at `subset[0]`.
///
/// Returns the visiting order and the insertion radius of each visited point
/// (infinite for the first). Ties go to the earliest position in `subset`.
/// Insertion radii are nonincreasing.
pub fn farthest_point_traversal<T: Scalar>(
    space: &FiniteMetricSpace<T>,
    subset: &[usize],
) -> (Vec<usize>, Vec<T>) {
    if subset.is_empty() {
        return (Vec::new(), Vec::new());
    }
    let mut order = Vec::with_capacity(subset.len());
    let mut radii = Vec::with_capacity(subset.len());
    let mut min_dist: Vec<T> = subset.iter().map(|&s| space.distance(subset[0], s)).collect();
    let mut visited = vec![false; subset.len()];
    visited[0] = true;
    order.push(subset[0]);
    radii.push(T::infinity());
    for _ in 1..subset.len() {
        let mut best: Option<usize> = None;
        for (pos, &d) in min_dist.iter().enumerate() {
            if visited[pos] {
                continue;
            }
            match best {
                Some(b) if min_dist[b] >= d => {}
                _ => best = Some(pos),
            }
        }
        let pos = best.expect("unvisited point remains");
        visited[pos] = true;
        order.push(subset[pos]);
        radii.push(min_dist[pos]);
        let row = space.row(subset[pos]);
        for (q, &s) in subset.iter().enumerate() {
            if row[s] < min_dist[q] {
                min_dist[q] = row[s];
            }
        }
    }
    (order, radii)
}

/// Number of traversal prefix points needed before the covering radius is `<= r`.
fn greedy_count_from_radii<T: Scalar>(radii: &[T], r: T) -> usize {
    radii.iter().filter(|&&rad| rad > r).count().max(1)
}

fn greedy_cover<T: Scalar>(space: &FiniteMetricSpace<T>, subset: &[usize], r: T) -> CoverCount {
    let (_, radii) = farthest_point_traversal(space, subset);
    CoverCount {
        count: greedy_count_from_radii(&radii, r),
        lower_bound: greedy_count_from_radii(&radii, r + r),
        method: CoverMethod::GreedyCover,
    }
}

/// Minimum number of closed `r`-balls centered at points of `space` covering `subset`.
pub fn covering_number<T: Scalar>(
    space: &FiniteMetricSpace<T>,
    subset: &[usize],
    r: T,
    method: CoverMethod,
) -> Result<CoverCount, DimensionError> {
    if r <= T::zero() || r.is_nan() {
        return Err(DimensionError::NonPositiveRadius(r.to_f64_lossy()));
    }
    if subset.is_empty() {
        return Err(DimensionError::EmptySubset);
    }
    let greedy = greedy_cover(space, subset, r);
    match method {
        CoverMethod::GreedyCover => Ok(greedy),
        CoverMethod::ExactCover => {
            if subset.len() > EXACT_COVER_CAP {
                return Err(DimensionError::ExactTooLarge {
                    size: subset.len(),
                    cap: EXACT_COVER_CAP,
                });
            }
            let count = exact_cover(space, subset, r, greedy.count);
            Ok(CoverCount {
                count,
                lower_bound: count,
                method: CoverMethod::ExactCover,
            })
        }
    }
}

/// Depth-first branch and bound over candidate centers, seeded with a known upper bound.
fn exact_cover<T: Scalar>(
    space: &FiniteMetricSpace<T>,
    subset: &[usize],
    r: T,
    upper: usize,
) -> usize {
    let full: u32 = if subset.len() == 32 {
        u32::MAX
    } else {
        (1u32 << subset.len()) - 1
    };
    let mut masks: Vec<u32> = (0..space.len())
        .map(|c| {
            subset.iter().enumerate().fold(0u32, |m, (bit, &s)| {
                if space.distance(c, s) <= r {
                    m | (1 << bit)
                } else {
                    m
                }
            })
        })
        .filter(|&m| m != 0)
        .collect();
    masks.sort_unstable_by(|a, b| b.count_ones().cmp(&a.count_ones()).then(a.cmp(b)));
    masks.dedup();
    let undominated: Vec<u32> = masks
        .iter()
        .enumerate()
        .filter(|&(i, &m)| {
            !masks
                .iter()
                .enumerate()
                .any(|(j, &o)| j != i && o & m == m && (o != m || j < i))
        })
        .map(|(_, &m)| m)
        .collect();
    let widest = undominated.iter().map(|m| m.count_ones()).max().unwrap_or(1) as usize;

    fn search(covered: u32, full: u32, used: usize, best: &mut usize, masks: &[u32], widest: usize) {
        if covered == full {
            *best = (*best).min(used);
            return;
        }
        let remaining = (full & !covered).count_ones() as usize;
        if used + remaining.div_ceil(widest) >= *best {
            return;
        }
        let bit = (full & !covered).trailing_zeros();
        for &m in masks.iter().filter(|&&m| m & (1 << bit) != 0) {
            search(covered | m, full, used + 1, best, masks, widest);
        }
    }

    let mut best = upper;
    search(0, full, 0, &mut best, &undominated, widest);
    best
}

/// A fitted dimension value with the data behind it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimensionEstimate {
    pub value: f64,
    /// `(r, count)` pairs, strictly decreasing in `r`.
    pub scales_used: Vec<(f64, usize)>,
    /// Maximum absolute residual of the log-log fit.
    pub fit_residual: f64,
    pub method: CoverMethod,
}

/// Ordinary least squares slope and max absolute residual.
pub(crate) fn fit_slope(xs: &[f64], ys: &[f64]) -> Option<(f64, f64)> {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx <= 0.0 {
        return None;
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (y - (intercept + slope * x)).abs())
        .fold(0.0, f64::max);
    Some((slope, residual))
}

/// Deduplicated, strictly decreasing copy of a scale grid.
fn sorted_grid(grid: &[f64]) -> Vec<f64> {
    let mut g: Vec<f64> = grid.iter().copied().filter(|r| *r > 0.0).collect();
    g.sort_by(|a, b| b.partial_cmp(a).expect("finite scales"));
    g.dedup();
    g
}

const MIN_SCALES: usize = 4;

/// Geometric grid `2^-2 .. 2^-10` clipped to `[min positive distance, diameter]`.
pub fn default_scale_grid<T: Scalar>(space: &FiniteMetricSpace<T>) -> Vec<f64> {
    let grid: Vec<f64> = (2..=10).map(|i| 2f64.powi(-i)).collect();
    match space.min_positive_distance() {
        None => grid,
        Some(min) => {
            let (lo, hi) = (min.to_f64_lossy(), space.diameter().to_f64_lossy());
            grid.into_iter().filter(|&r| r >= lo && r <= hi).collect()
        }
    }
}

/// Outer radii `R = 2^-1 .. 2^-10` whose inner radius `R^(1/theta)` is at least
/// the smallest positive distance.
pub fn default_spectrum_grid<T: Scalar>(space: &FiniteMetricSpace<T>, theta: f64) -> Vec<f64> {
    let grid: Vec<f64> = (1..=10).map(|i| 2f64.powi(-i)).collect();
    match space.min_positive_distance() {
        None => grid,
        Some(min) => {
            let lo = min.to_f64_lossy();
            grid.into_iter()
                .filter(|&r| r.powf(1.0 / theta) >= lo)
                .collect()
        }
    }
}

/// Box-counting slope of `log N_r(X)` against `log(1/r)`.
pub fn estimate_minkowski<T: Scalar>(
    space: &FiniteMetricSpace<T>,
    scale_grid: &[f64],
) -> Result<DimensionEstimate, DimensionError> {
    let grid = sorted_grid(scale_grid);
    if grid.len() < MIN_SCALES {
        return Err(DimensionError::InsufficientScales {
            needed: MIN_SCALES,
            got: grid.len(),
        });
    }
    let all: Vec<usize> = (0..space.len()).collect();
    let (_, radii) = farthest_point_traversal(space, &all);
    let scales_used: Vec<(f64, usize)> = grid
        .iter()
        .map(|&r| (r, greedy_count_from_radii(&radii, T::of(r))))
        .collect();
    let xs: Vec<f64> = scales_used.iter().map(|(r, _)| (1.0 / r).ln()).collect();
    let ys: Vec<f64> = scales_used.iter().map(|(_, c)| (*c as f64).ln()).collect();
    let (slope, fit_residual) = fit_slope(&xs, &ys).ok_or(DimensionError::InsufficientScales {
        needed: MIN_SCALES,
        got: 1,
    })?;
    Ok(DimensionEstimate {
        value: slope.max(0.0),
        scales_used,
        fit_residual,
        method: CoverMethod::GreedyCover,
    })
}

/// `sup_x N_{R^(1/theta)}(B(x, R))` with greedy covers; also returns the maximizing point.
fn sup_local_cover<T: Scalar>(space: &FiniteMetricSpace<T>, outer: f64, inner: f64) -> (usize, usize) {
    let (outer, inner) = (T::of(outer), T::of(inner));
    (0..space.len())
        .into_par_iter()
        .map(|x| {
            let ball = space.ball_members(x, outer);
            (greedy_cover(space, &ball, inner).count, x)
        })
        .reduce(
            || (0, usize::MAX),
            |a, b| {
                if b.0 > a.0 || (b.0 == a.0 && b.1 < a.1) {
                    b
                } else {
                    a
                }
            },
        )
}

fn check_theta(theta: f64) -> Result<(), DimensionError> {
    if theta > 0.0 && theta < 1.0 {
        Ok(())
    } else {
        Err(DimensionError::ThetaOutOfRange(theta))
    }
}

/// Slope of `log sup_x N_{R^(1/theta)}(B(x,R))` against `log(R / R^(1/theta))`.
///
/// `scales_used` records `(R, count)`.
pub fn estimate_assouad_spectrum<T: Scalar>(
    space: &FiniteMetricSpace<T>,
    theta: f64,
    outer_grid: &[f64],
) -> Result<DimensionEstimate, DimensionError> {
    check_theta(theta)?;
    let grid: Vec<f64> = sorted_grid(outer_grid)
        .into_iter()
        .filter(|&r| r < 1.0)
        .collect();
    if grid.len() < MIN_SCALES {
        return Err(DimensionError::InsufficientScales {
            needed: MIN_SCALES,
            got: grid.len(),
        });
    }
    let scales_used: Vec<(f64, usize)> = grid
        .iter()
        .map(|&big| (big, sup_local_cover(space, big, big.powf(1.0 / theta)).0))
        .collect();
    let xs: Vec<f64> = grid
        .iter()
        .map(|&big| big.ln() - big.powf(1.0 / theta).ln())
        .collect();
    let ys: Vec<f64> = scales_used.iter().map(|(_, c)| (*c as f64).ln()).collect();
    let (slope, fit_residual) = fit_slope(&xs, &ys).ok_or(DimensionError::InsufficientScales {
        needed: MIN_SCALES,
        got: 1,
    })?;
    Ok(DimensionEstimate {
        value: slope.max(0.0),
        scales_used,
        fit_residual,
        method: CoverMethod::GreedyCover,
    })
}

/// One `(R, lambda)` sample of the quasidoubling inequality.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSample {
    pub radius: f64,
    pub lambda: f64,
}

/// Default `(R, lambda)` samples: `R = 2^-1 .. 2^-10`, `lambda = 1, 2, 4, ...` with `lambda R < 1`.
pub fn default_quasidoubling_grid() -> Vec<GridSample> {
    let mut grid = Vec::new();
    for i in 1..=10 {
        let radius = 2f64.powi(-i);
        let mut lambda = 1.0;
        while lambda * radius < 1.0 {
            grid.push(GridSample { radius, lambda });
            lambda *= 2.0;
        }
    }
    grid
}

/// Samples matching the neighbor-count bound at level radius `r_k`: a ball of
/// radius `r_k^theta` covered by balls of radius `r_k / 3`.
pub fn level_samples(level_radii: &[f64], theta: f64) -> Vec<GridSample> {
    level_radii
        .iter()
        .map(|&r| GridSample {
            radius: (r / 3.0).powf(theta),
            lambda: 3f64.powf(theta),
        })
        .collect()
}

/// Worst point for one grid sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub point: usize,
    pub radius: f64,
    pub lambda: f64,
    pub cover_size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuasidoublingEstimate {
    pub theta: f64,
    pub delta: f64,
    #[serde(rename = "C")]
    pub constant: f64,
    pub witnesses: Vec<Witness>,
    pub warnings: Vec<String>,
}

/// `lambda^delta R^((1 - 1/theta) delta)`: the bound per unit of `C`.
pub fn quasidoubling_scale(theta: f64, delta: f64, radius: f64, lambda: f64) -> f64 {
    lambda.powf(delta) * radius.powf((1.0 - 1.0 / theta) * delta)
}

impl QuasidoublingEstimate {
    /// Re-evaluates `cover <= lambda^delta C R^((1-1/theta) delta)` for every witness.
    pub fn witnesses_validate(&self) -> bool {
        self.witnesses.iter().all(|w| {
            w.cover_size as f64
                <= self.constant * quasidoubling_scale(self.theta, self.delta, w.radius, w.lambda)
        })
    }
}

/// Largest ratio `cover / (lambda^delta R^((1-1/theta) delta))` over the sampled grid, floored at 1.
pub fn estimate_quasidoubling_constant<T: Scalar>(
    space: &FiniteMetricSpace<T>,
    theta: f64,
    delta: f64,
    grid: &[GridSample],
) -> Result<QuasidoublingEstimate, DimensionError> {
    check_theta(theta)?;
    let mut witnesses = Vec::with_capacity(grid.len());
    let mut constant: f64 = 1.0;
    for sample in grid {
        let inner = sample.radius.powf(1.0 / theta);
        let (cover_size, point) = sup_local_cover(space, sample.lambda * sample.radius, inner);
        let ratio = cover_size as f64 / quasidoubling_scale(theta, delta, sample.radius, sample.lambda);
        constant = constant.max(ratio);
        witnesses.push(Witness {
            point,
            radius: sample.radius,
            lambda: sample.lambda,
            cover_size,
        });
    }
    // Rounding in the ratio can leave the defining inequality short by an ulp.
    while !witnesses.iter().all(|w| {
        w.cover_size as f64 <= constant * quasidoubling_scale(theta, delta, w.radius, w.lambda)
    }) {
        constant = f64::from_bits(constant.to_bits() + 1);
    }

    let mut warnings = Vec::new();
    let spectrum_grid = default_spectrum_grid(space, theta);
    if let Ok(spec) = estimate_assouad_spectrum(space, theta, &spectrum_grid) {
        if delta <= spec.value {
            warnings.push(format!(
                "delta = {delta} does not exceed the estimated theta-Assouad spectrum {:.4}",
                spec.value
            ));
        }
    }
    Ok(QuasidoublingEstimate {
        theta,
        delta,
        constant,
        witnesses,
        warnings,
    })
}
