//! Candidate vectors: points of the cubic lattice of spacing `7 tau^3` inside
//! the closed ball of radius `tau^2` in `R^M`, enumerated by squared norm and
//! then lexicographically.

use thiserror::Error;

use crate::scalar::Scalar;

/// Squared-norm shells beyond this are not counted; counts become lower bounds.
const COUNT_SHELL_LIMIT: u64 = 4096;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("lattice holds only {count} candidates, {needed} more than requested needed")]
pub struct LatticeExhausted {
    pub count: u128,
    pub needed: usize,
}

/// Number of candidates; `exact` is false when only shells up to a limit were counted.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LatticeCount {
    pub value: u128,
    pub exact: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CandidateLattice {
    dimension: usize,
    spacing: f64,
    radius: f64,
    max_shell: u64,
}

fn isqrt(t: u64) -> u64 {
    let mut r = (t as f64).sqrt() as u64;
    while r * r > t {
        r -= 1;
    }
    while (r + 1) * (r + 1) <= t {
        r += 1;
    }
    r
}

/// Whether `t` is a sum of `d` integer squares.
fn representable(d: usize, t: u64) -> bool {
    match d {
        0 => t == 0,
        1 => {
            let r = isqrt(t);
            r * r == t
        }
        2 => (0..=isqrt(t)).any(|a| representable(1, t - a * a)),
        3 => {
            let mut u = t;
            while u > 0 && u.is_multiple_of(4) {
                u /= 4;
            }
            u % 8 != 7
        }
        _ => true,
    }
}

impl CandidateLattice {
    pub fn new(dimension: usize, tau: f64) -> Self {
        let spacing = 7.0 * tau * tau * tau;
        let radius = tau * tau;
        let ratio = radius / spacing;
        let mut max_shell = (ratio * ratio).floor().max(0.0) as u64;
        while ((max_shell + 1) as f64).sqrt() * spacing <= radius {
            max_shell += 1;
        }
        while max_shell > 0 && (max_shell as f64).sqrt() * spacing > radius {
            max_shell -= 1;
        }
        Self {
            dimension,
            spacing,
            radius,
            max_shell,
        }
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// Largest admissible squared integer norm.
    pub fn max_shell(&self) -> u64 {
        self.max_shell
    }

    /// Counts lattice points by dynamic programming over coordinates (saturating).
    pub fn count(&self) -> LatticeCount {
        let limit = self.max_shell.min(COUNT_SHELL_LIMIT) as usize;
        let mut ways = vec![0u128; limit + 1];
        ways[0] = 1;
        for _ in 0..self.dimension {
            let mut next = vec![0u128; limit + 1];
            for (t, &w) in ways.iter().enumerate() {
                if w == 0 {
                    continue;
                }
                let mut c: u64 = 0;
                while t as u64 + c * c <= limit as u64 {
                    let mult = if c == 0 { 1 } else { 2 };
                    let slot = &mut next[t + (c * c) as usize];
                    *slot = slot.saturating_add(w.saturating_mul(mult));
                    c += 1;
                }
            }
            ways = next;
        }
        let value = ways.iter().fold(0u128, |acc, &w| acc.saturating_add(w));
        LatticeCount {
            value,
            exact: self.max_shell as usize == limit && value != u128::MAX,
        }
    }

    pub fn iter(&self) -> LatticeIter<'_> {
        LatticeIter {
            lattice: self,
            shell: 0,
            current: None,
            done: false,
        }
    }

    /// Real vector for integer coordinates.
    pub fn vector<T: Scalar>(&self, coords: &[i64]) -> Vec<T> {
        coords
            .iter()
            .map(|&z| T::of(z as f64 * self.spacing))
            .collect()
    }
}

/// Lazy enumeration in (squared norm, lexicographic) order.
pub struct LatticeIter<'a> {
    lattice: &'a CandidateLattice,
    shell: u64,
    current: Option<Vec<i64>>,
    done: bool,
}

impl LatticeIter<'_> {
    /// Fills positions `from..` with the lexicographically smallest completion.
    fn fill(z: &mut [i64], from: usize, mut rem: u64) {
        let m = z.len();
        for i in from..m {
            let top = isqrt(rem) as i64;
            let c = (-top..=top)
                .find(|&c| representable(m - i - 1, rem - (c * c) as u64))
                .expect("remainder is representable");
            z[i] = c;
            rem -= (c * c) as u64;
        }
    }

    fn first_in_shell(m: usize, s: u64) -> Option<Vec<i64>> {
        if !representable(m, s) {
            return None;
        }
        let mut z = vec![0; m];
        Self::fill(&mut z, 0, s);
        Some(z)
    }

    fn advance(z: &mut [i64], s: u64) -> bool {
        let m = z.len();
        for i in (0..m).rev() {
            let used: u64 = z[..i].iter().map(|&c| (c * c) as u64).sum();
            let rem = s - used;
            let top = isqrt(rem) as i64;
            if let Some(c) = ((z[i] + 1)..=top).find(|&c| representable(m - i - 1, rem - (c * c) as u64)) {
                z[i] = c;
                Self::fill(z, i + 1, rem - (c * c) as u64);
                return true;
            }
        }
        false
    }
}

impl Iterator for LatticeIter<'_> {
    type Item = Vec<i64>;

    fn next(&mut self) -> Option<Vec<i64>> {
        if self.done {
            return None;
        }
        let m = self.lattice.dimension;
        let advanced = match self.current.as_mut() {
            Some(z) => Self::advance(z, self.shell),
            None => false,
        };
        if !advanced {
            let start = if self.current.is_some() { self.shell + 1 } else { self.shell };
            let mut found = None;
            for s in start..=self.lattice.max_shell {
                if let Some(z) = Self::first_in_shell(m, s) {
                    found = Some((s, z));
                    break;
                }
            }
            match found {
                Some((s, z)) => {
                    self.shell = s;
                    self.current = Some(z);
                }
                None => {
                    self.done = true;
                    return None;
                }
            }
        }
        self.current.clone()
    }
}

/// First `needed + 1` candidates in enumeration order.
pub fn candidate_vectors<T: Scalar>(
    dimension: usize,
    tau: f64,
    needed: usize,
) -> Result<Vec<Vec<T>>, LatticeExhausted> {
    let lattice = CandidateLattice::new(dimension, tau);
    let out: Vec<Vec<T>> = lattice
        .iter()
        .take(needed + 1)
        .map(|z| lattice.vector(&z))
        .collect();
    if out.len() <= needed {
        return Err(LatticeExhausted {
            count: out.len() as u128,
            needed,
        });
    }
    Ok(out)
}
