//! Coordinate maps and the direct-product embedding.
//!
//! For each color `xi` and each direction (forward and reversed net order) a
//! coordinate map `F^xi(x) = sum_k r_k^eps sum_{j in J_k(xi)} v_j^k phi_j(x)`
//! is built level by level. Each vector `v_j^k` is the first lattice
//! candidate that keeps `F_k(x')` away from `G_{k,j}(y')` for every `x'` in
//! the ball `B_j` and every `y'` in the annulus `B(x_j, 10 tau^-2 r_k) \ 2B_j`.

pub mod lattice;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metric_space::FiniteMetricSpace;
use crate::nets::{build_hierarchy, NetError, NetHierarchy, NetOrder};
use crate::params::{EmbeddingParams, Mode};
use crate::scalar::Scalar;

pub use lattice::{candidate_vectors, CandidateLattice, LatticeCount, LatticeExhausted};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EmbedError {
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Lattice(#[from] LatticeExhausted),
    #[error("space diameter {diameter} must be below 1 and match the parameters ({expected})")]
    NotNormalized { diameter: f64, expected: f64 },
    #[error(
        "selection failed at level {k}, point {point}, color {color} ({direction:?}): \
         {supplied} candidates tried for {pairs} pairs, {killed} rejected"
    )]
    SelectionFailed {
        k: i32,
        point: usize,
        color: usize,
        direction: Direction,
        supplied: u128,
        pairs: usize,
        killed: usize,
    },
    #[error(
        "lattice count {lattice} does not exceed |E1||E2| = {pairs} at level {k}, point {point}, color {color}"
    )]
    CountingFailed {
        k: i32,
        point: usize,
        color: usize,
        lattice: u128,
        pairs: usize,
    },
    #[error("level {k}, color {color}: point {point} lies in the support of two bumps")]
    OverlappingSupports { k: i32, color: usize, point: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Forward,
    Reverse,
}

/// Separation demanded of each selected vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Threshold {
    /// `tau^3 r_k^eps` against the exact sets `E1`, `E2`.
    #[default]
    Direct,
    /// `3 tau^3 r_k^eps`, the discretized surrogate.
    Surrogate,
}

impl Threshold {
    pub fn value(self, tau: f64, weight: f64) -> f64 {
        let base = tau * tau * tau * weight;
        match self {
            Threshold::Direct => base,
            Threshold::Surrogate => 3.0 * base,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct BuildOptions {
    pub threshold: Threshold,
    pub net_order: NetOrder,
}

/// `phi(x) = max(0, 1 - dist(x, ball) / r)`.
pub fn bump_from_ball<T: Scalar>(space: &FiniteMetricSpace<T>, ball: &[usize], radius: T, x: usize) -> T {
    let row = space.row(x);
    let dist = ball
        .iter()
        .map(|&b| row[b])
        .fold(T::infinity(), |a, b| if b < a { b } else { a });
    let v = T::one() - dist / radius;
    if v > T::zero() {
        v
    } else {
        T::zero()
    }
}

/// Bump of the net ball `B(center, radius)` evaluated at `x`.
pub fn bump<T: Scalar>(space: &FiniteMetricSpace<T>, center: usize, radius: T, x: usize) -> T {
    bump_from_ball(space, &space.ball_members(center, radius), radius, x)
}

/// The point sets a selection must separate.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseSubsets {
    /// All points of `B_j`.
    pub inner: Vec<usize>,
    /// All points of `B(x_j, 10 tau^-2 r_k) \ 2B_j`.
    pub outer: Vec<usize>,
    /// Density scale `tau^3 r_k^(1/theta)`; finite sets are dense in themselves at any scale.
    pub eta: f64,
}

pub fn dense_subsets<T: Scalar>(
    space: &FiniteMetricSpace<T>,
    center: usize,
    radius: T,
    tau: f64,
    theta: f64,
) -> DenseSubsets {
    let t = T::of(tau);
    let far = T::of(10.0) * radius / (t * t);
    let double = radius + radius;
    let row = space.row(center);
    let inner = space.ball_members(center, radius);
    let outer = (0..space.len())
        .filter(|&y| row[y] <= far && row[y] > double)
        .collect();
    DenseSubsets {
        inner,
        outer,
        eta: tau.powi(3) * radius.to_f64_lossy().powf(1.0 / theta),
    }
}

/// One selected vector `v_j^k` together with its ball.
#[derive(Debug, Clone, PartialEq)]
pub struct Entry<T> {
    pub point: usize,
    pub ball: Vec<usize>,
    pub lattice: Vec<i64>,
    pub vector: Vec<T>,
}

/// Vectors of one level in selection order.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelVectors<T> {
    pub k: i32,
    pub radius: T,
    /// `r_k^eps`.
    pub weight: T,
    pub entries: Vec<Entry<T>>,
}

/// Bookkeeping for one call of the selection rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionRecord {
    pub k: i32,
    pub point: usize,
    pub inner: usize,
    pub outer: usize,
    /// Lower bound on the lattice size (exact when `lattice_exact`).
    pub lattice: f64,
    pub lattice_exact: bool,
    pub candidates_tried: usize,
    pub rejected: usize,
}

/// `F^xi` or its reversed-order twin.
#[derive(Debug, Clone, PartialEq)]
pub struct CoordinateMap<T> {
    pub color: usize,
    pub direction: Direction,
    pub dimension: usize,
    pub levels: Vec<LevelVectors<T>>,
    pub selections: Vec<SelectionRecord>,
}

impl<T: Scalar> CoordinateMap<T> {
    /// Sum over all levels before `level_index`, then the first `upto` entries of that level.
    ///
    /// Terms are accumulated one entry at a time in a fixed order, so every
    /// partial sum is a bit-exact prefix of the full evaluation.
    pub fn partial(&self, space: &FiniteMetricSpace<T>, x: usize, level_index: usize, upto: usize) -> Vec<T> {
        let mut acc = vec![T::zero(); self.dimension];
        for (li, level) in self.levels.iter().enumerate().take(level_index + 1) {
            let count = if li < level_index {
                level.entries.len()
            } else {
                upto.min(level.entries.len())
            };
            for entry in &level.entries[..count] {
                let phi = bump_from_ball(space, &entry.ball, level.radius, x);
                if phi == T::zero() {
                    continue;
                }
                for (a, &v) in acc.iter_mut().zip(&entry.vector) {
                    *a = *a + level.weight * (v * phi);
                }
            }
        }
        acc
    }

    fn level_index(&self, k: i32) -> Option<usize> {
        self.levels.iter().position(|l| l.k == k)
    }

    /// `F^xi(x)`.
    pub fn eval(&self, space: &FiniteMetricSpace<T>, x: usize) -> Vec<T> {
        self.partial(space, x, self.levels.len(), 0)
    }

    /// `F^xi_k(x)`: levels up to and including `k`.
    pub fn eval_through(&self, space: &FiniteMetricSpace<T>, x: usize, k: i32) -> Vec<T> {
        match self.level_index(k) {
            Some(i) => self.partial(space, x, i + 1, 0),
            None if self.levels.first().is_some_and(|l| k < l.k) => vec![T::zero(); self.dimension],
            None => self.eval(space, x),
        }
    }

    /// `G^xi_{k,j}(y)`: `F_{k-1}(y)` plus the level-`k` entries selected before `position`.
    pub fn partial_before(&self, space: &FiniteMetricSpace<T>, y: usize, k: i32, position: usize) -> Vec<T> {
        let i = self.level_index(k).expect("level present");
        self.partial(space, y, i, position)
    }

    /// `f^xi_k(x) = sum_j v_j^k phi_j(x)` (unweighted).
    pub fn level_component(&self, space: &FiniteMetricSpace<T>, x: usize, k: i32) -> Vec<T> {
        let mut acc = vec![T::zero(); self.dimension];
        if let Some(i) = self.level_index(k) {
            let level = &self.levels[i];
            for entry in &level.entries {
                let phi = bump_from_ball(space, &entry.ball, level.radius, x);
                for (a, &v) in acc.iter_mut().zip(&entry.vector) {
                    *a = *a + v * phi;
                }
            }
        }
        acc
    }
}

/// Outcome of [`select_vector`].
#[derive(Debug, Clone, PartialEq)]
pub struct Selected<T> {
    pub lattice: Vec<i64>,
    pub vector: Vec<T>,
    pub candidates_tried: usize,
    pub rejected: usize,
}

/// Squared distance `|a + w v - b|^2`.
fn gap_sq<T: Scalar>(a: &[T], weight: T, v: &[T], b: &[T]) -> T {
    a.iter()
        .zip(v)
        .zip(b)
        .map(|((&a, &v), &b)| {
            let d = a + weight * v - b;
            d * d
        })
        .sum()
}

/// First candidate `v` with `|F_{k-1}(x') + r_k^eps v - G_{k,j}(y')| >= threshold`
/// for all `x'` in `inner_values` and `y'` in `outer_values`.
///
/// `inner_values` holds `F_{k-1}(x')`, `outer_values` holds `G_{k,j}(y')`.
/// Returns `None` after `|E1||E2| + 1` rejected candidates or an exhausted lattice.
pub fn select_vector<T: Scalar>(
    lattice: &CandidateLattice,
    inner_values: &[Vec<T>],
    outer_values: &[Vec<T>],
    weight: T,
    threshold: T,
) -> Result<Selected<T>, (usize, usize)> {
    let pairs = inner_values.len() * outer_values.len();
    let limit = pairs + 1;
    let thr_sq = threshold * threshold;
    let mut tried = 0;
    for z in lattice.iter() {
        if tried >= limit {
            break;
        }
        tried += 1;
        let v: Vec<T> = lattice.vector(&z);
        let ok = inner_values.iter().all(|a| {
            outer_values
                .iter()
                .all(|b| gap_sq(a, weight, &v, b) >= thr_sq)
        });
        if ok {
            return Ok(Selected {
                lattice: z,
                vector: v,
                candidates_tried: tried,
                rejected: tried - 1,
            });
        }
    }
    Err((tried, tried))
}

/// Checks that no point lies in the support of two same-color bumps at any level.
pub fn check_disjoint_supports<T: Scalar>(
    space: &FiniteMetricSpace<T>,
    hierarchy: &NetHierarchy<T>,
) -> Result<(), EmbedError> {
    for level in &hierarchy.levels {
        let r = level.net.radius;
        let balls: Vec<Vec<usize>> = level
            .net
            .members
            .iter()
            .map(|&m| space.ball_members(m, r))
            .collect();
        for x in 0..space.len() {
            let mut seen = vec![false; hierarchy.colors + 1];
            for (pos, ball) in balls.iter().enumerate() {
                if bump_from_ball(space, ball, r, x) > T::zero() {
                    let c = level.coloring.colors[pos];
                    if seen[c] {
                        return Err(EmbedError::OverlappingSupports {
                            k: level.k,
                            color: c,
                            point: x,
                        });
                    }
                    seen[c] = true;
                }
            }
        }
    }
    Ok(())
}

/// Builds `F^xi` (forward) or `F~^xi` (reverse) level by level.
pub fn build_color_map<T: Scalar>(
    space: &FiniteMetricSpace<T>,
    hierarchy: &NetHierarchy<T>,
    params: &EmbeddingParams,
    color: usize,
    direction: Direction,
    threshold: Threshold,
) -> Result<CoordinateMap<T>, EmbedError> {
    let lattice = CandidateLattice::new(params.dimension, params.tau);
    let lattice_count = lattice.count();
    let mut map = CoordinateMap {
        color,
        direction,
        dimension: params.dimension,
        levels: Vec::new(),
        selections: Vec::new(),
    };
    for level in &hierarchy.levels {
        let k = level.k;
        let r = params.radius(k);
        let weight = r.powf(params.epsilon);
        let radius = level.net.radius;
        let thr = T::of(threshold.value(params.tau, weight));
        let mut points: Vec<usize> = level
            .coloring
            .fiber(color)
            .into_iter()
            .map(|pos| level.net.members[pos])
            .collect();
        if direction == Direction::Reverse {
            points.reverse();
        }
        let li = map.levels.len();
        map.levels.push(LevelVectors {
            k,
            radius,
            weight: T::of(weight),
            entries: Vec::with_capacity(points.len()),
        });
        for (position, &point) in points.iter().enumerate() {
            let sets = dense_subsets(space, point, radius, params.tau, params.theta);
            let pairs = sets.inner.len() * sets.outer.len();
            if params.mode == Mode::Strict && lattice_count.value <= pairs as u128 {
                return Err(EmbedError::CountingFailed {
                    k,
                    point,
                    color,
                    lattice: lattice_count.value,
                    pairs,
                });
            }
            let inner_values: Vec<Vec<T>> = sets
                .inner
                .iter()
                .map(|&x| map.partial(space, x, li, 0))
                .collect();
            let outer_values: Vec<Vec<T>> = sets
                .outer
                .iter()
                .map(|&y| map.partial(space, y, li, position))
                .collect();
            let selected = select_vector(&lattice, &inner_values, &outer_values, T::of(weight), thr)
                .map_err(|(supplied, killed)| EmbedError::SelectionFailed {
                    k,
                    point,
                    color,
                    direction,
                    supplied: supplied as u128,
                    pairs,
                    killed,
                })?;
            map.selections.push(SelectionRecord {
                k,
                point,
                inner: sets.inner.len(),
                outer: sets.outer.len(),
                lattice: lattice_count.value as f64,
                lattice_exact: lattice_count.exact,
                candidates_tried: selected.candidates_tried,
                rejected: selected.rejected,
            });
            map.levels[li].entries.push(Entry {
                point,
                ball: sets.inner,
                lattice: selected.lattice,
                vector: selected.vector,
            });
        }
    }
    Ok(map)
}

/// Provenance stamped into every embedding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingMetadata {
    pub net_order: NetOrder,
    pub mode: Mode,
    pub threshold: Threshold,
    /// Fingerprint of the normalized space the embedding was built on.
    pub space_fingerprint: String,
    pub colors_used: usize,
    pub budget_grown: bool,
    pub seed: Option<u64>,
    pub normalization_scale: Option<f64>,
    pub build_timestamp: Option<String>,
}

/// The direct product of all coordinate maps.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding<T> {
    /// Row per point, `2 N_colors M` columns: for each color, `F^xi` then `F~^xi`.
    pub coords: Vec<Vec<T>>,
    pub params: EmbeddingParams,
    pub metadata: EmbeddingMetadata,
    pub hierarchy: NetHierarchy<T>,
    /// Nonzero maps only, ordered by (color, direction).
    pub maps: Vec<CoordinateMap<T>>,
}

impl<T: Scalar> Embedding<T> {
    pub fn dimension(&self) -> usize {
        self.params.output_dimension()
    }

    /// Column offset of a color block (`color` is 1-based).
    pub fn block_offset(&self, color: usize, direction: Direction) -> usize {
        let m = self.params.dimension;
        (color - 1) * 2 * m + if direction == Direction::Reverse { m } else { 0 }
    }

    pub fn map(&self, color: usize, direction: Direction) -> Option<&CoordinateMap<T>> {
        self.maps
            .iter()
            .find(|m| m.color == color && m.direction == direction)
    }
}

/// Builds nets, colorings and both coordinate maps per color, then concatenates.
pub fn build_embedding<T: Scalar>(
    space: &FiniteMetricSpace<T>,
    params: &EmbeddingParams,
    options: BuildOptions,
) -> Result<Embedding<T>, EmbedError> {
    let diameter = space.diameter().to_f64_lossy();
    let fits = diameter < 1.0
        && (space.len() == 1
            || (params.radius(params.n0) >= diameter
                && crate::params::scale_radius(params.tau, params.n0 + 1) < diameter));
    if !fits {
        return Err(EmbedError::NotNormalized {
            diameter,
            expected: params.diameter,
        });
    }
    let hierarchy = build_hierarchy(space, params, options.net_order)?;
    check_disjoint_supports(space, &hierarchy)?;

    let mut params = params.clone();
    let budget_grown = hierarchy.colors > params.colors && !params.colors_from_coloring;
    params.colors = hierarchy.colors;
    params.colors_from_coloring = false;

    let used: Vec<usize> = (1..=hierarchy.colors)
        .filter(|&c| {
            hierarchy
                .levels
                .iter()
                .any(|l| l.coloring.colors.contains(&c))
        })
        .collect();
    let jobs: Vec<(usize, Direction)> = used
        .iter()
        .flat_map(|&c| [(c, Direction::Forward), (c, Direction::Reverse)])
        .collect();
    let maps = jobs
        .par_iter()
        .map(|&(c, d)| build_color_map(space, &hierarchy, &params, c, d, options.threshold))
        .collect::<Result<Vec<_>, _>>()?;

    let m = params.dimension;
    let width = params.output_dimension();
    let coords: Vec<Vec<T>> = (0..space.len())
        .into_par_iter()
        .map(|x| {
            let mut row = vec![T::zero(); width];
            for map in &maps {
                let offset = (map.color - 1) * 2 * m
                    + if map.direction == Direction::Reverse { m } else { 0 };
                row[offset..offset + m].copy_from_slice(&map.eval(space, x));
            }
            row
        })
        .collect();

    Ok(Embedding {
        coords,
        metadata: EmbeddingMetadata {
            net_order: options.net_order,
            mode: params.mode,
            threshold: options.threshold,
            space_fingerprint: space.fingerprint(),
            colors_used: used.len(),
            budget_grown,
            seed: None,
            normalization_scale: None,
            build_timestamp: None,
        },
        params,
        hierarchy,
        maps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::{derive_practical, PracticalInputs, DEFAULT_BUDGET_CAP};

    fn line(points: &[f64]) -> FiniteMetricSpace<f64> {
        FiniteMetricSpace::from_line(points).unwrap()
    }

    fn practical(tau: f64, n: i32, dimension: usize) -> EmbeddingParams {
        derive_practical(&PracticalInputs {
            epsilon: 0.75,
            theta: 0.5,
            delta: 1.0,
            c: 1.0,
            tau,
            n: Some(n),
            colors: None,
            dimension: Some(dimension),
            diameter: 0.5,
            budget_cap: DEFAULT_BUDGET_CAP,
        })
        .unwrap()
    }

    #[test]
    fn bump_values() {
        let s = line(&[0.0, 0.05, 0.15, 0.3]);
        assert_eq!(bump(&s, 0, 0.1, 1), 1.0);
        assert_eq!(bump(&s, 0, 0.1, 3), 0.0);
        // dist(0.15, {0, 0.05}) = 0.1 -> 1 - 0.1/0.2
        let phi = bump(&s, 0, 0.2, 3);
        assert!((phi - (1.0 - (0.3 - 0.15) / 0.2)).abs() < 1e-15);
        assert!(bump(&s, 0, 0.1, 2).abs() < 1e-15);
        // dist(0.15, {0, 0.1}) = r/2
        let s2 = line(&[0.0, 0.1, 0.15]);
        assert!((bump(&s2, 0, 0.1, 2) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn dense_subsets_examples() {
        let s = line(&[0.0, 0.5]);
        let d = dense_subsets(&s, 0, 0.1, 0.2, 0.5);
        assert_eq!(d.inner, vec![0]);
        assert_eq!(d.outer, vec![1]);

        let s = line(&[0.0, 0.01]);
        let d = dense_subsets(&s, 0, 0.1, 0.2, 0.5);
        assert_eq!(d.inner, vec![0, 1]);
        assert!(d.outer.is_empty());

        let s = line(&[0.0, 0.9]);
        let d = dense_subsets(&s, 0, 0.001, 0.2, 0.5);
        assert_eq!(d.inner, vec![0]);
        assert!(d.outer.is_empty());
    }

    #[test]
    fn empty_outer_set_selects_zero() {
        let lattice = CandidateLattice::new(3, 0.1);
        let sel = select_vector::<f64>(&lattice, &[vec![0.0; 3]], &[], 1.0, 1.0).unwrap();
        assert_eq!(sel.vector, vec![0.0; 3]);
        assert_eq!(sel.candidates_tried, 1);
    }

    #[test]
    fn base_level_selection_takes_first_long_enough_vector() {
        let tau = 0.1;
        let lattice = CandidateLattice::new(2, tau);
        let weight = 0.5;
        let thr = Threshold::Direct.value(tau, weight);
        let sel = select_vector::<f64>(&lattice, &[vec![0.0; 2]], &[vec![0.0; 2]], weight, thr).unwrap();
        // Zero fails, (-1, 0) is the next candidate and has norm 7 tau^3 >= tau^3.
        assert_eq!(sel.lattice, vec![-1, 0]);
        assert_eq!(sel.rejected, 1);
    }

    #[test]
    fn each_pair_kills_at_most_one_candidate() {
        // Targets placed exactly on candidates: with |V| = pairs + 1 a survivor remains.
        let tau = 0.1;
        let lattice = CandidateLattice::new(1, tau);
        let weight = 1.0;
        let vs: Vec<Vec<f64>> = lattice.iter().map(|z| lattice.vector(&z)).collect();
        assert_eq!(vs.len(), 3);
        let outer = vec![vs[0].clone(), vs[1].clone()];
        let thr = Threshold::Surrogate.value(tau, weight);
        let sel = select_vector(&lattice, &[vec![0.0]], &outer, weight, thr).unwrap();
        assert_eq!(sel.vector, vs[2]);
        assert_eq!(sel.rejected, 2);
    }

    #[test]
    fn two_point_practical_embedding() {
        let s = line(&[0.0, 0.5]);
        let p = practical(0.1, 1, 2);
        let e = build_embedding(&s, &p, BuildOptions::default()).unwrap();
        assert_eq!(e.params.colors, 1);
        assert_eq!(e.coords.len(), 2);
        assert_eq!(e.coords[0].len(), 4);
        assert!(crate::scalar::euclidean(&e.coords[0], &e.coords[1]) > 0.0);
    }

    #[test]
    fn single_point_embedding_is_constant() {
        let s = line(&[0.0]);
        let mut p = practical(0.1, 1, 3);
        p.diameter = 0.5;
        let e = build_embedding(&s, &p, BuildOptions::default()).unwrap();
        assert_eq!(e.coords, vec![vec![0.0; 6]]);
        for map in &e.maps {
            assert!(map.selections.iter().all(|r| r.outer == 0));
        }
    }

    #[test]
    fn unnormalized_space_rejected() {
        let s = line(&[0.0, 2.0]);
        let p = practical(0.1, 1, 2);
        assert!(matches!(
            build_embedding(&s, &p, BuildOptions::default()),
            Err(EmbedError::NotNormalized { .. })
        ));
    }

    #[test]
    fn g_is_independent_of_the_new_vector() {
        let s = line(&[0.0, 0.1, 0.2, 0.35, 0.5]);
        let p = practical(0.12, 2, 2);
        let e = build_embedding(&s, &p, BuildOptions::default()).unwrap();
        for map in &e.maps {
            for level in &map.levels {
                for (pos, _) in level.entries.iter().enumerate() {
                    for y in 0..s.len() {
                        let before = map.partial_before(&s, y, level.k, pos);
                        let mut altered = map.clone();
                        let li = altered.levels.iter().position(|l| l.k == level.k).unwrap();
                        altered.levels[li].entries[pos].vector = vec![1.0, -1.0];
                        assert_eq!(before, altered.partial_before(&s, y, level.k, pos));
                    }
                }
            }
        }
    }
}
