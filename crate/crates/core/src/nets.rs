//! Separated nets per level and their greedy colorings.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dimension::farthest_point_traversal;
use crate::metric_space::FiniteMetricSpace;
use crate::params::{EmbeddingParams, Mode};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NetError {
    #[error("level {level}: point {point} needs color {needed}, budget is {budget}")]
    BudgetExceeded {
        level: i32,
        point: usize,
        needed: usize,
        budget: usize,
    },
    #[error("net radius must be positive, got {0}")]
    NonPositiveRadius(f64),
}

/// Enumeration used to scan points when building nets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NetOrder {
    /// Input label order.
    #[default]
    Input,
    /// Farthest-point traversal from the first point.
    FarthestPoint,
}

impl NetOrder {
    pub fn enumerate<T: Scalar>(self, space: &FiniteMetricSpace<T>) -> Vec<usize> {
        let all: Vec<usize> = (0..space.len()).collect();
        match self {
            NetOrder::Input => all,
            NetOrder::FarthestPoint => farthest_point_traversal(space, &all).0,
        }
    }
}

/// A maximal `r`-separated subset, members listed in enumeration order.
#[derive(Debug, Clone, PartialEq)]
pub struct Net<T> {
    pub level: i32,
    pub radius: T,
    pub members: Vec<usize>,
}

/// Greedy scan admitting a point iff it is at least `r` from every admitted point.
pub fn build_net<T: Scalar>(
    space: &FiniteMetricSpace<T>,
    level: i32,
    r: T,
    order: &[usize],
) -> Result<Net<T>, NetError> {
    if !(r > T::zero()) {
        return Err(NetError::NonPositiveRadius(r.to_f64_lossy()));
    }
    let mut members: Vec<usize> = Vec::new();
    for &p in order {
        let row = space.row(p);
        if members.iter().all(|&m| row[m] >= r) {
            members.push(p);
        }
    }
    Ok(Net {
        level,
        radius: r,
        members,
    })
}

/// Number of net members within `radius` of `x`.
pub fn neighbor_count<T: Scalar>(space: &FiniteMetricSpace<T>, net: &Net<T>, x: usize, radius: T) -> usize {
    let row = space.row(x);
    net.members.iter().filter(|&&m| row[m] <= radius).count()
}

/// Colors of net members, aligned with `Net::members`. Colors start at 1.
#[derive(Debug, Clone, PartialEq)]
pub struct Coloring<T> {
    pub colors: Vec<usize>,
    pub budget: usize,
    pub separation_radius: T,
    pub max_color: usize,
    /// Practical mode raised the budget to fit the greedy coloring.
    pub budget_grown: bool,
}

impl<T: Scalar> Coloring<T> {
    /// Member positions per color `1..=budget`, enumeration order preserved.
    pub fn fibers(&self) -> Vec<Vec<usize>> {
        let mut fibers = vec![Vec::new(); self.budget];
        for (pos, &c) in self.colors.iter().enumerate() {
            fibers[c - 1].push(pos);
        }
        fibers
    }

    pub fn fiber(&self, color: usize) -> Vec<usize> {
        self.colors
            .iter()
            .enumerate()
            .filter(|(_, &c)| c == color)
            .map(|(pos, _)| pos)
            .collect()
    }
}

/// Smallest color not used by an earlier member within `sep`.
///
/// With `grow` unset, exceeding `budget` is an error naming the first offending point.
pub fn color_net<T: Scalar>(
    space: &FiniteMetricSpace<T>,
    net: &Net<T>,
    sep: T,
    budget: usize,
    grow: bool,
) -> Result<Coloring<T>, NetError> {
    let mut colors: Vec<usize> = Vec::with_capacity(net.members.len());
    let mut max_color = 0;
    for (pos, &p) in net.members.iter().enumerate() {
        let row = space.row(p);
        let mut taken: Vec<usize> = net.members[..pos]
            .iter()
            .zip(&colors)
            .filter(|(&q, _)| row[q] <= sep)
            .map(|(_, &c)| c)
            .collect();
        taken.sort_unstable();
        taken.dedup();
        let color = taken
            .iter()
            .enumerate()
            .find(|&(i, &c)| c != i + 1)
            .map_or(taken.len() + 1, |(i, _)| i + 1);
        if color > budget && !grow {
            return Err(NetError::BudgetExceeded {
                level: net.level,
                point: p,
                needed: color,
                budget,
            });
        }
        max_color = max_color.max(color);
        colors.push(color);
    }
    Ok(Coloring {
        colors,
        budget: budget.max(max_color),
        separation_radius: sep,
        max_color,
        budget_grown: max_color > budget,
    })
}

/// Net and coloring at one level `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct Level<T> {
    pub k: i32,
    pub net: Net<T>,
    pub coloring: Coloring<T>,
}

impl<T: Scalar> Level<T> {
    /// `r_k^theta > 2 r_k`; when false, each color class must be checked to have disjoint bump supports.
    pub fn separation_exceeds_double_radius(&self) -> bool {
        self.coloring.separation_radius > self.net.radius + self.net.radius
    }
}

/// Nets and colorings for levels `n0..=n`.
#[derive(Debug, Clone, PartialEq)]
pub struct NetHierarchy<T> {
    pub order: NetOrder,
    pub levels: Vec<Level<T>>,
    /// Colors available at every level (`N_n`, or the grown practical count).
    pub colors: usize,
}

impl<T: Scalar> NetHierarchy<T> {
    pub fn level(&self, k: i32) -> Option<&Level<T>> {
        self.levels.iter().find(|l| l.k == k)
    }

    pub fn max_color_used(&self) -> usize {
        self.levels.iter().map(|l| l.coloring.max_color).max().unwrap_or(0)
    }

    pub fn to_record(&self) -> HierarchyRecord {
        HierarchyRecord {
            schema: 1,
            order: self.order,
            colors: self.colors,
            levels: self
                .levels
                .iter()
                .map(|l| LevelRecord {
                    k: l.k,
                    r_k: l.net.radius.to_f64_lossy(),
                    separation: l.coloring.separation_radius.to_f64_lossy(),
                    members: l.net.members.clone(),
                    colors: l.coloring.colors.clone(),
                })
                .collect(),
        }
    }
}

/// Builds every level for `params`. Strict mode aborts when a level needs more than `N_n` colors.
pub fn build_hierarchy<T: Scalar>(
    space: &FiniteMetricSpace<T>,
    params: &EmbeddingParams,
    order: NetOrder,
) -> Result<NetHierarchy<T>, NetError> {
    let enumeration = order.enumerate(space);
    let grow = params.mode == Mode::Practical;
    let budget = if params.colors_from_coloring { 1 } else { params.colors };
    let mut levels = Vec::new();
    for k in params.levels() {
        let r = params.radius(k);
        let net = build_net(space, k, T::of(r), &enumeration)?;
        let coloring = color_net(space, &net, T::of(r.powf(params.theta)), budget, grow)?;
        levels.push(Level { k, net, coloring });
    }
    let used = levels.iter().map(|l| l.coloring.max_color).max().unwrap_or(1);
    let colors = if params.colors_from_coloring {
        used.max(1)
    } else {
        params.colors.max(used)
    };
    for level in &mut levels {
        level.coloring.budget = colors;
    }
    Ok(NetHierarchy {
        order,
        levels,
        colors,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelRecord {
    pub k: i32,
    pub r_k: f64,
    pub separation: f64,
    pub members: Vec<usize>,
    pub colors: Vec<usize>,
}

/// Serializable form of a [`NetHierarchy`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HierarchyRecord {
    pub schema: u32,
    pub order: NetOrder,
    pub colors: usize,
    pub levels: Vec<LevelRecord>,
}
