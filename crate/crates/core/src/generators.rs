//! Deterministic test spaces: intervals, Cantor sets, stars, Galton–Watson
//! trees and snowflaked copies of any of them.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metric_space::{default_labels, FiniteMetricSpace, MetricError};
use crate::scalar::Scalar;

/// Identifier of the random source, stored alongside generated artifacts.
pub const PRNG_ID: &str = "chacha20/rand_chacha-0.3/seed_from_u64";

/// Rejection attempts before conditioned tree sampling gives up.
pub const GW_MAX_ATTEMPTS: usize = 10_000;

pub const MAX_CANTOR_DEPTH: u32 = 10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeneratorError {
    #[error("bad parameters: {0}")]
    BadParameters(String),
    #[error("no Galton-Watson tree of size {size} after {attempts} attempts")]
    RejectionExhausted { size: usize, attempts: usize },
    #[error(transparent)]
    Metric(#[from] MetricError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Family {
    /// `points` evenly spaced points on `[0, 1]`.
    Interval { points: usize },
    /// Left endpoints of the `2^depth` middle-thirds intervals.
    Cantor { depth: u32 },
    /// Center plus `arms` leaves at distances `2^-i`.
    Star { arms: usize },
    /// Critical geometric Galton–Watson tree conditioned on `vertices`.
    GwTree { vertices: usize },
    /// `d -> d^alpha` applied to another family.
    SnowflakeOf { alpha: f64, base: Box<Family> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    #[serde(flatten)]
    pub family: Family,
    pub seed: u64,
}

impl GeneratorSpec {
    pub fn new(family: Family, seed: u64) -> Self {
        Self { family, seed }
    }
}

pub fn gen_space<T: Scalar>(spec: &GeneratorSpec) -> Result<FiniteMetricSpace<T>, GeneratorError> {
    let mut rng = ChaCha20Rng::seed_from_u64(spec.seed);
    generate(&spec.family, &mut rng)
}

fn generate<T: Scalar>(family: &Family, rng: &mut ChaCha20Rng) -> Result<FiniteMetricSpace<T>, GeneratorError> {
    match family {
        Family::Interval { points } => interval(*points),
        Family::Cantor { depth } => cantor(*depth),
        Family::Star { arms } => star(*arms),
        Family::GwTree { vertices } => gw_tree(*vertices, rng),
        Family::SnowflakeOf { alpha, base } => {
            if !(*alpha > 0.0 && *alpha <= 1.0) {
                return Err(GeneratorError::BadParameters(format!(
                    "snowflake exponent {alpha} must lie in (0, 1]"
                )));
            }
            let space: FiniteMetricSpace<T> = generate(base, rng)?;
            let flaked = space.snowflake(*alpha);
            // Re-validate: d^alpha is a metric for alpha <= 1, up to rounding.
            Ok(FiniteMetricSpace::validate(flaked.to_rows(), flaked.labels().to_vec())?)
        }
    }
}

fn interval<T: Scalar>(points: usize) -> Result<FiniteMetricSpace<T>, GeneratorError> {
    if points == 0 {
        return Err(GeneratorError::BadParameters("interval needs at least one point".into()));
    }
    let denom = (points.max(2) - 1) as f64;
    let xs: Vec<T> = (0..points).map(|i| T::of(i as f64 / denom)).collect();
    Ok(FiniteMetricSpace::from_line(&xs)?)
}

fn cantor<T: Scalar>(depth: u32) -> Result<FiniteMetricSpace<T>, GeneratorError> {
    if depth > MAX_CANTOR_DEPTH {
        return Err(GeneratorError::BadParameters(format!(
            "cantor depth {depth} exceeds {MAX_CANTOR_DEPTH}"
        )));
    }
    // Integer numerators over 3^depth keep distances exact until the final division.
    let denom = 3u64.pow(depth);
    let mut nums: Vec<u64> = vec![0];
    for level in 1..=depth {
        let step = 2 * 3u64.pow(depth - level);
        let shifted: Vec<u64> = nums.iter().map(|&a| a + step).collect();
        nums.extend(shifted);
    }
    nums.sort_unstable();
    let n = nums.len();
    let matrix: Vec<Vec<T>> = nums
        .iter()
        .map(|&a| {
            nums.iter()
                .map(|&b| T::of(a.abs_diff(b) as f64 / denom as f64))
                .collect()
        })
        .collect();
    Ok(FiniteMetricSpace::validate(matrix, default_labels(n))?)
}

fn star<T: Scalar>(arms: usize) -> Result<FiniteMetricSpace<T>, GeneratorError> {
    if arms == 0 || arms > 60 {
        return Err(GeneratorError::BadParameters(format!("star arms {arms} outside 1..=60")));
    }
    let arm = |i: usize| 2f64.powi(-(i as i32));
    let n = arms + 1;
    let matrix: Vec<Vec<T>> = (0..n)
        .map(|a| {
            (0..n)
                .map(|b| {
                    T::of(match (a, b) {
                        _ if a == b => 0.0,
                        (0, i) | (i, 0) => arm(i),
                        (i, j) => arm(i) + arm(j),
                    })
                })
                .collect()
        })
        .collect();
    let mut labels = vec!["center".to_string()];
    labels.extend((1..=arms).map(|i| format!("arm{i}")));
    Ok(FiniteMetricSpace::validate(matrix, labels)?)
}

/// Parent array of a Galton–Watson tree with geometric(1/2) offspring, or `None`
/// once the progeny exceeds `target`.
fn sample_gw(target: usize, rng: &mut ChaCha20Rng) -> Option<Vec<Option<usize>>> {
    let mut parent: Vec<Option<usize>> = vec![None];
    let mut next = 0;
    while next < parent.len() {
        // P(k children) = 2^-(k+1).
        let mut children = 0;
        while rng.gen_bool(0.5) {
            children += 1;
            if parent.len() + children > target {
                return None;
            }
        }
        parent.extend(std::iter::repeat_n(Some(next), children));
        next += 1;
    }
    (parent.len() == target).then_some(parent)
}

fn gw_tree<T: Scalar>(vertices: usize, rng: &mut ChaCha20Rng) -> Result<FiniteMetricSpace<T>, GeneratorError> {
    if vertices == 0 || vertices > 4096 {
        return Err(GeneratorError::BadParameters(format!(
            "tree size {vertices} outside 1..=4096"
        )));
    }
    let parent = (0..GW_MAX_ATTEMPTS)
        .find_map(|_| sample_gw(vertices, rng))
        .ok_or(GeneratorError::RejectionExhausted {
            size: vertices,
            attempts: GW_MAX_ATTEMPTS,
        })?;
    let mut adj = vec![Vec::new(); vertices];
    for (v, p) in parent.iter().enumerate() {
        if let Some(p) = *p {
            adj[v].push(p);
            adj[p].push(v);
        }
    }
    let matrix: Vec<Vec<T>> = (0..vertices)
        .map(|s| {
            let mut hops = vec![usize::MAX; vertices];
            hops[s] = 0;
            let mut queue = std::collections::VecDeque::from([s]);
            while let Some(u) = queue.pop_front() {
                for &w in &adj[u] {
                    if hops[w] == usize::MAX {
                        hops[w] = hops[u] + 1;
                        queue.push_back(w);
                    }
                }
            }
            hops.into_iter().map(|h| T::of(h as f64)).collect()
        })
        .collect();
    Ok(FiniteMetricSpace::validate(matrix, default_labels(vertices))?)
}
