//! Finite metric spaces stored as exact distance matrices.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::scalar::{fmax, Scalar};

/// Default additive slack for the triangle-inequality check.
pub const DEFAULT_TRIANGLE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricError {
    #[error("space has no points")]
    EmptySpace,
    #[error("distance matrix is not square: row {row} has {len} entries, expected {expected}")]
    NotSquare {
        row: usize,
        len: usize,
        expected: usize,
    },
    #[error("{labels} labels supplied for {points} points")]
    LabelCount { labels: usize, points: usize },
    #[error("non-finite distance at ({i}, {j})")]
    NonFinite { i: usize, j: usize },
    #[error("nonzero diagonal entry {value} at point {i}")]
    NonzeroDiagonal { i: usize, value: f64 },
    #[error("negative distance {value} at ({i}, {j})")]
    NegativeDistance { i: usize, j: usize, value: f64 },
    #[error("asymmetric distances: d({i},{j}) = {forward}, d({j},{i}) = {backward}")]
    Asymmetry {
        i: usize,
        j: usize,
        forward: f64,
        backward: f64,
    },
    #[error("triangle inequality fails for ({i}, {j}) via {k}: {direct} > {via}")]
    TriangleViolation {
        i: usize,
        j: usize,
        k: usize,
        direct: f64,
        via: f64,
    },
    #[error("points {i} and {j} coincide (distance 0)")]
    DuplicatePoints { i: usize, j: usize },
    #[error("all points coincide; diameter is zero")]
    DegenerateSpace,
    #[error("set distance to an empty set")]
    EmptySet,
    #[error("point index {index} out of range for a space of {len} points")]
    IndexOutOfRange { index: usize, len: usize },
}

/// What to do with distinct labels at distance zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DuplicatePolicy {
    #[default]
    Reject,
    /// Keep the first occurrence and drop later coincident points.
    Merge,
}

#[derive(Debug, Clone, Copy)]
pub struct ValidateOptions {
    pub triangle_tolerance: f64,
    pub duplicates: DuplicatePolicy,
}

impl Default for ValidateOptions {
    fn default() -> Self {
        Self {
            triangle_tolerance: DEFAULT_TRIANGLE_TOLERANCE,
            duplicates: DuplicatePolicy::Reject,
        }
    }
}

/// A labeled finite point set with a symmetric distance matrix.
///
/// Immutable once validated. Distances are stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteMetricSpace<T> {
    labels: Vec<String>,
    dist: Vec<T>,
    len: usize,
    diameter: T,
}

impl<T: Scalar> FiniteMetricSpace<T> {
    /// Validates a full distance matrix with default options.
    pub fn validate(matrix: Vec<Vec<T>>, labels: Vec<String>) -> Result<Self, MetricError> {
        validate_space(matrix, labels, ValidateOptions::default())
    }

    /// Space of points on the real line with `|a - b|` distances. Labels are the indices.
    pub fn from_line(points: &[T]) -> Result<Self, MetricError> {
        let matrix = points
            .iter()
            .map(|&a| points.iter().map(|&b| (a - b).abs()).collect())
            .collect();
        Self::validate(matrix, default_labels(points.len()))
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn diameter(&self) -> T {
        self.diameter
    }

    #[inline]
    pub fn distance(&self, i: usize, j: usize) -> T {
        self.dist[i * self.len + j]
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.dist[i * self.len..(i + 1) * self.len]
    }

    pub fn to_rows(&self) -> Vec<Vec<T>> {
        (0..self.len).map(|i| self.row(i).to_vec()).collect()
    }

    /// Smallest strictly positive distance, if any pair is distinct.
    pub fn min_positive_distance(&self) -> Option<T> {
        self.dist
            .iter()
            .copied()
            .filter(|&d| d > T::zero())
            .fold(None, |acc, d| match acc {
                Some(m) if m <= d => Some(m),
                _ => Some(d),
            })
    }

    /// Rescales so the diameter becomes exactly 1/2. Returns the scale factor applied.
    pub fn normalize_diameter(&self) -> Result<(Self, f64), MetricError> {
        if self.diameter <= T::zero() {
            return Err(MetricError::DegenerateSpace);
        }
        let two_diam = self.diameter + self.diameter;
        let dist: Vec<T> = self.dist.iter().map(|&d| d / two_diam).collect();
        let diameter = dist.iter().copied().fold(T::zero(), fmax);
        let scale = 1.0 / two_diam.to_f64_lossy();
        Ok((
            Self {
                labels: self.labels.clone(),
                dist,
                len: self.len,
                diameter,
            },
            scale,
        ))
    }

    /// Indices of the closed ball `B(center, radius)`, ascending.
    pub fn ball_members(&self, center: usize, radius: T) -> Vec<usize> {
        self.row(center)
            .iter()
            .enumerate()
            .filter(|(_, &d)| d <= radius)
            .map(|(i, _)| i)
            .collect()
    }

    /// `min_{s in set} d(x, s)`.
    pub fn set_distance(&self, x: usize, set: &[usize]) -> Result<T, MetricError> {
        let row = self.row(x);
        set.iter()
            .map(|&s| row[s])
            .reduce(|a, b| if b < a { b } else { a })
            .ok_or(MetricError::EmptySet)
    }

    /// Applies `d -> d^alpha` entrywise. Only metric for `alpha` in `(0, 1]`.
    pub fn snowflake(&self, alpha: f64) -> Self {
        let a = T::of(alpha);
        let dist: Vec<T> = self
            .dist
            .iter()
            .map(|&d| if d == T::zero() { d } else { d.powf(a) })
            .collect();
        let diameter = dist.iter().copied().fold(T::zero(), fmax);
        Self {
            labels: self.labels.clone(),
            dist,
            len: self.len,
            diameter,
        }
    }

    /// Multiplies every distance by `factor > 0`.
    pub fn scaled(&self, factor: T) -> Self {
        Self {
            labels: self.labels.clone(),
            dist: self.dist.iter().map(|&d| d * factor).collect(),
            len: self.len,
            diameter: self.diameter * factor,
        }
    }

    /// Content hash over labels and distance bits, used to tie artifacts to a space.
    pub fn fingerprint(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update((self.len as u64).to_le_bytes());
        for label in &self.labels {
            hasher.update((label.len() as u64).to_le_bytes());
            hasher.update(label.as_bytes());
        }
        for &d in &self.dist {
            hasher.update(d.to_f64_lossy().to_bits().to_le_bytes());
        }
        hex::encode(hasher.finalize())
    }
}

pub fn default_labels(n: usize) -> Vec<String> {
    (0..n).map(|i| i.to_string()).collect()
}

/// Checks the metric axioms on a full matrix and builds the space.
pub fn validate_space<T: Scalar>(
    matrix: Vec<Vec<T>>,
    labels: Vec<String>,
    options: ValidateOptions,
) -> Result<FiniteMetricSpace<T>, MetricError> {
    let n = matrix.len();
    if n == 0 {
        return Err(MetricError::EmptySpace);
    }
    if labels.len() != n {
        return Err(MetricError::LabelCount {
            labels: labels.len(),
            points: n,
        });
    }
    for (row, entries) in matrix.iter().enumerate() {
        if entries.len() != n {
            return Err(MetricError::NotSquare {
                row,
                len: entries.len(),
                expected: n,
            });
        }
    }
    for i in 0..n {
        for j in 0..n {
            let d = matrix[i][j];
            if !d.is_finite() {
                return Err(MetricError::NonFinite { i, j });
            }
            if i == j && d != T::zero() {
                return Err(MetricError::NonzeroDiagonal {
                    i,
                    value: d.to_f64_lossy(),
                });
            }
            if d < T::zero() {
                return Err(MetricError::NegativeDistance {
                    i,
                    j,
                    value: d.to_f64_lossy(),
                });
            }
        }
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if matrix[i][j] != matrix[j][i] {
                return Err(MetricError::Asymmetry {
                    i,
                    j,
                    forward: matrix[i][j].to_f64_lossy(),
                    backward: matrix[j][i].to_f64_lossy(),
                });
            }
        }
    }
    // Symmetry is established, so d(k, j) can be read from row j. Terms with
    // k = i or k = j reduce to `direct > direct + tol` and never fire.
    let tol = T::of(options.triangle_tolerance);
    let violation = (0..n).into_par_iter().find_map_first(|i| {
        let ri = &matrix[i];
        ((i + 1)..n).find_map(|j| {
            let rj = &matrix[j];
            let direct = ri[j];
            ri.iter()
                .zip(rj)
                .position(|(&a, &b)| direct > a + b + tol)
                .map(|k| (i, j, k, direct, ri[k] + rj[k]))
        })
    });
    if let Some((i, j, k, direct, via)) = violation {
        return Err(MetricError::TriangleViolation {
            i,
            j,
            k,
            direct: direct.to_f64_lossy(),
            via: via.to_f64_lossy(),
        });
    }

    let keep: Vec<usize> = match options.duplicates {
        DuplicatePolicy::Reject => {
            for i in 0..n {
                for j in (i + 1)..n {
                    if matrix[i][j] == T::zero() {
                        return Err(MetricError::DuplicatePoints { i, j });
                    }
                }
            }
            (0..n).collect()
        }
        DuplicatePolicy::Merge => {
            let mut keep: Vec<usize> = Vec::with_capacity(n);
            for i in 0..n {
                if keep.iter().all(|&k| matrix[k][i] != T::zero()) {
                    keep.push(i);
                }
            }
            keep
        }
    };

    let len = keep.len();
    let mut dist = Vec::with_capacity(len * len);
    for &i in &keep {
        for &j in &keep {
            dist.push(matrix[i][j]);
        }
    }
    let diameter = dist.iter().copied().fold(T::zero(), fmax);
    let labels = keep.iter().map(|&i| labels[i].clone()).collect();
    Ok(FiniteMetricSpace {
        labels,
        dist,
        len,
        diameter,
    })
}
