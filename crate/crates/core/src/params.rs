//! Construction constants: the scale ratio `tau`, the scales `r_k = tau^(2k)`,
//! the base level, the color budget and the target vector dimension.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default cap on the color budget `N_n`.
pub const DEFAULT_BUDGET_CAP: u64 = 1 << 20;

/// Default spacing of the `tau` search grid.
pub const DEFAULT_TAU_STEP: f64 = 0.001;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParamError {
    #[error("invalid parameter: {0}")]
    Invalid(String),
    #[error("no feasible tau on a grid of step {grid_step}; closed-form cap is {:e}", caps.overall)]
    NoFeasibleTau { grid_step: f64, caps: AnalyticCaps },
    #[error("color budget 10^{log10_value:.3} exceeds the cap {cap}")]
    BudgetOverflow { log10_value: f64, cap: u64 },
    #[error("scale tau^(2k) underflows for tau = {tau}, k = {k}")]
    Underflow { tau: f64, k: i32 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Every constant derived as in the existence proof.
    #[default]
    Strict,
    /// User-supplied overrides; reports never certify the theorem bounds.
    Practical,
}

/// Base of the logarithms in the `tau` conditions involving `log`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LogBase {
    #[default]
    Natural,
    Ten,
}

impl LogBase {
    pub fn log(self, x: f64) -> f64 {
        match self {
            LogBase::Natural => x.ln(),
            LogBase::Ten => x.log10(),
        }
    }
}

/// The five conditions `tau` must meet, in order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TauCondition {
    /// `tau < min(2^(-2 eps), 1 - eps)`
    Tau0,
    /// `tau^(2(theta-1)) > 2`
    Tau1,
    /// `exp(-2 tau log(1/tau)) <= 1 - tau log(1/tau)`
    Tau2,
    /// `1 - 4 tau^(2 eps - 1) >= 1/2`
    Tau3,
    /// `-7 log(7 tau) > max(log(40^delta C^2), log 21)`
    Tau4,
}

impl TauCondition {
    pub const ALL: [TauCondition; 5] = [
        TauCondition::Tau0,
        TauCondition::Tau1,
        TauCondition::Tau2,
        TauCondition::Tau3,
        TauCondition::Tau4,
    ];
}

/// Inputs the `tau` conditions depend on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TauInputs {
    pub epsilon: f64,
    pub theta: f64,
    pub delta: f64,
    #[serde(rename = "C")]
    pub c: f64,
    pub log_base: LogBase,
}

impl TauInputs {
    pub fn new(epsilon: f64, theta: f64, delta: f64, c: f64) -> Self {
        Self {
            epsilon,
            theta,
            delta,
            c,
            log_base: LogBase::Natural,
        }
    }

    fn validate(&self) -> Result<(), ParamError> {
        if !(self.epsilon > 0.5 && self.epsilon < 1.0) {
            return Err(ParamError::Invalid(format!(
                "epsilon = {} must lie in (1/2, 1)",
                self.epsilon
            )));
        }
        check_theta(self.theta)?;
        if !(self.delta > 0.0) {
            return Err(ParamError::Invalid(format!("delta = {} must be positive", self.delta)));
        }
        if !(self.c >= 1.0) {
            return Err(ParamError::Invalid(format!("C = {} must be at least 1", self.c)));
        }
        Ok(())
    }

    /// Evaluates one condition literally at `tau`.
    pub fn holds(&self, condition: TauCondition, tau: f64) -> bool {
        let log = |x: f64| self.log_base.log(x);
        match condition {
            TauCondition::Tau0 => {
                tau < (2f64.powf(-2.0 * self.epsilon)).min(1.0 - self.epsilon)
            }
            TauCondition::Tau1 => tau.powf(2.0 * (self.theta - 1.0)) > 2.0,
            TauCondition::Tau2 => {
                let u = tau * log(1.0 / tau);
                (-2.0 * u).exp() <= 1.0 - u
            }
            TauCondition::Tau3 => 1.0 - 4.0 * tau.powf(2.0 * self.epsilon - 1.0) >= 0.5,
            TauCondition::Tau4 => {
                let rhs = (self.delta * log(40.0) + 2.0 * log(self.c)).max(log(21.0));
                -7.0 * log(7.0 * tau) > rhs
            }
        }
    }

    pub fn failing(&self, tau: f64) -> Vec<TauCondition> {
        TauCondition::ALL
            .into_iter()
            .filter(|&c| !self.holds(c, tau))
            .collect()
    }

    pub fn all_hold(&self, tau: f64) -> bool {
        TauCondition::ALL.into_iter().all(|c| self.holds(c, tau))
    }

    /// Closed-form upper limits on `tau` from the invertible conditions.
    pub fn analytic_caps(&self) -> AnalyticCaps {
        let tau0 = (2f64.powf(-2.0 * self.epsilon)).min(1.0 - self.epsilon);
        let tau1 = 2f64.powf(-1.0 / (2.0 * (1.0 - self.theta)));
        let tau3 = 8f64.powf(-1.0 / (2.0 * self.epsilon - 1.0));
        // The log base cancels: every term of the condition is a logarithm.
        let rhs = (self.delta * 40f64.ln() + 2.0 * self.c.ln()).max(21f64.ln());
        let tau4 = (-rhs / 7.0).exp() / 7.0;
        AnalyticCaps {
            tau0,
            tau1,
            tau3,
            tau4,
            overall: tau0.min(tau1).min(tau3).min(tau4).min(0.5),
        }
    }
}

/// Upper limits on `tau` from the conditions with closed-form inverses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalyticCaps {
    pub tau0: f64,
    pub tau1: f64,
    pub tau3: f64,
    pub tau4: f64,
    pub overall: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TauSolution {
    pub tau: f64,
    pub grid_step: f64,
    /// Conditions violated at the next grid point; empty if that point is at or above 1/2.
    pub binding: Vec<TauCondition>,
}

/// Largest grid value `i * grid_step < 1/2` satisfying all five conditions.
pub fn solve_tau(inputs: &TauInputs, grid_step: f64) -> Result<TauSolution, ParamError> {
    inputs.validate()?;
    if !(grid_step > 0.0 && grid_step < 0.5) {
        return Err(ParamError::Invalid(format!(
            "grid step {grid_step} must lie in (0, 1/2)"
        )));
    }
    let caps = inputs.analytic_caps();
    let at = |i: u64| i as f64 * grid_step;
    // Start just above the closed-form cap; the literal checks decide.
    let mut i = (caps.overall / grid_step).floor() as u64 + 1;
    while i > 0 && at(i) >= 0.5 {
        i -= 1;
    }
    while i > 0 {
        let tau = at(i);
        if inputs.all_hold(tau) {
            let next = at(i + 1);
            let binding = if next < 0.5 { inputs.failing(next) } else { Vec::new() };
            return Ok(TauSolution {
                tau,
                grid_step,
                binding,
            });
        }
        i -= 1;
    }
    Err(ParamError::NoFeasibleTau { grid_step, caps })
}

/// `r_k = tau^(2k)`.
///
/// Small `|k|` uses repeated multiplication by `tau^2`, so consecutive scales
/// differ by exactly one rounded product; large `|k|` goes through logs.
pub fn scale_radius(tau: f64, k: i32) -> f64 {
    const DIRECT_LIMIT: i32 = 64;
    if k.abs() <= DIRECT_LIMIT {
        let step = tau * tau;
        let mut r = 1.0;
        if k >= 0 {
            for _ in 0..k {
                r *= step;
            }
        } else {
            for _ in 0..(-k) {
                r /= step;
            }
        }
        r
    } else {
        (2.0 * k as f64 * tau.ln()).exp()
    }
}

/// [`scale_radius`] that flags results below the smallest positive normal.
pub fn scale_radius_checked(tau: f64, k: i32) -> Result<f64, ParamError> {
    let r = scale_radius(tau, k);
    if r < f64::MIN_POSITIVE {
        Err(ParamError::Underflow { tau, k })
    } else {
        Ok(r)
    }
}

/// Largest `k` with `r_k >= diameter`.
pub fn base_level(tau: f64, diameter: f64) -> i32 {
    let mut k = (diameter.ln() / (2.0 * tau.ln())).floor() as i32;
    while scale_radius(tau, k + 1) >= diameter {
        k += 1;
    }
    while scale_radius(tau, k) < diameter {
        k -= 1;
    }
    k
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ColorBudget {
    pub value: u64,
    pub log10: f64,
}

/// `N_n = ceil(3^delta C r_n^(delta(theta-1)))`.
pub fn color_budget(
    theta: f64,
    delta: f64,
    c: f64,
    tau: f64,
    n: i32,
    cap: u64,
) -> Result<ColorBudget, ParamError> {
    let exponent = delta * (theta - 1.0);
    let log10 = delta * 3f64.log10() + c.log10() + exponent * 2.0 * n as f64 * tau.log10();
    if log10 > (cap as f64).log10() + 1e-9 {
        return Err(ParamError::BudgetOverflow {
            log10_value: log10,
            cap,
        });
    }
    let raw = 3f64.powf(delta) * c * scale_radius(tau, n).powf(exponent);
    let value = raw.ceil() as u64;
    if value > cap {
        return Err(ParamError::BudgetOverflow {
            log10_value: log10,
            cap,
        });
    }
    Ok(ColorBudget { value, log10 })
}

/// `M_n = ceil(6 delta (2 theta + n (1 - theta)) / theta) + 1`. Independent of epsilon.
pub fn vector_dimension(theta: f64, delta: f64, n: i32) -> usize {
    (6.0 * delta * (2.0 * theta + n as f64 * (1.0 - theta)) / theta).ceil() as usize + 1
}

fn check_theta(theta: f64) -> Result<(), ParamError> {
    if theta > 0.0 && theta < 1.0 {
        Ok(())
    } else {
        Err(ParamError::Invalid(format!("theta = {theta} must lie in (0, 1)")))
    }
}

/// Every scalar the construction consumes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingParams {
    pub epsilon: f64,
    pub theta: f64,
    pub delta: f64,
    #[serde(rename = "C")]
    pub c: f64,
    pub tau: f64,
    pub n0: i32,
    pub n: i32,
    /// Number of colors `N_n`.
    #[serde(rename = "N_colors")]
    pub colors: usize,
    /// Per-color vector dimension `M_n`.
    #[serde(rename = "M")]
    pub dimension: usize,
    pub mode: Mode,
    /// `r_k` for `k = n0..=n`.
    pub radii: Vec<f64>,
    /// Diameter of the (normalized) space the levels were fitted to.
    pub diameter: f64,
    pub log_base: LogBase,
    pub tau_grid_step: f64,
    /// `log10` of the formula value of `N_n` (reported even when overridden).
    pub log10_color_budget: Option<f64>,
    /// Practical mode: the color count is taken from the greedy coloring.
    pub colors_from_coloring: bool,
}

impl EmbeddingParams {
    pub fn levels(&self) -> impl Iterator<Item = i32> + Clone {
        self.n0..=self.n
    }

    /// `r_k`; `k` must lie in `n0..=n`, other levels are computed directly.
    pub fn radius(&self, k: i32) -> f64 {
        if (self.n0..=self.n).contains(&k) {
            self.radii[(k - self.n0) as usize]
        } else {
            scale_radius(self.tau, k)
        }
    }

    /// Output width `2 N_n M_n`.
    pub fn output_dimension(&self) -> usize {
        2 * self.colors * self.dimension
    }

    /// Weak-embedding threshold `4 tau^(2n)`.
    pub fn lower_threshold(&self) -> f64 {
        4.0 * self.radius(self.n)
    }

    pub fn tau_inputs(&self) -> TauInputs {
        TauInputs {
            epsilon: self.epsilon,
            theta: self.theta,
            delta: self.delta,
            c: self.c,
            log_base: self.log_base,
        }
    }
}

/// Inputs for strict-mode derivation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StrictInputs {
    pub tau: TauInputs,
    /// Top level; defaults to `n0 + 1`.
    pub n: Option<i32>,
    pub diameter: f64,
    pub grid_step: f64,
    pub budget_cap: u64,
}

impl StrictInputs {
    pub fn new(tau: TauInputs, diameter: f64) -> Self {
        Self {
            tau,
            n: None,
            diameter,
            grid_step: DEFAULT_TAU_STEP,
            budget_cap: DEFAULT_BUDGET_CAP,
        }
    }
}

fn check_diameter(diameter: f64) -> Result<(), ParamError> {
    if diameter > 0.0 && diameter < 1.0 {
        Ok(())
    } else {
        Err(ParamError::Invalid(format!(
            "diameter = {diameter} must lie in (0, 1); normalize the space first"
        )))
    }
}

fn resolve_levels(tau: f64, diameter: f64, n: Option<i32>) -> Result<(i32, i32, Vec<f64>), ParamError> {
    let n0 = base_level(tau, diameter);
    let n = n.unwrap_or(n0 + 1);
    if n <= n0 {
        return Err(ParamError::Invalid(format!("n = {n} must exceed n0 = {n0}")));
    }
    let radii = (n0..=n)
        .map(|k| scale_radius_checked(tau, k))
        .collect::<Result<Vec<_>, _>>()?;
    Ok((n0, n, radii))
}

/// Derives every constant from `(epsilon, theta, delta, C, n, diameter)`.
pub fn derive_strict(inputs: &StrictInputs) -> Result<EmbeddingParams, ParamError> {
    check_diameter(inputs.diameter)?;
    let t = inputs.tau;
    let tau = solve_tau(&t, inputs.grid_step)?.tau;
    let (n0, n, radii) = resolve_levels(tau, inputs.diameter, inputs.n)?;
    let budget = color_budget(t.theta, t.delta, t.c, tau, n, inputs.budget_cap)?;
    Ok(EmbeddingParams {
        epsilon: t.epsilon,
        theta: t.theta,
        delta: t.delta,
        c: t.c,
        tau,
        n0,
        n,
        colors: budget.value as usize,
        dimension: vector_dimension(t.theta, t.delta, n),
        mode: Mode::Strict,
        radii,
        diameter: inputs.diameter,
        log_base: t.log_base,
        tau_grid_step: inputs.grid_step,
        log10_color_budget: Some(budget.log10),
        colors_from_coloring: false,
    })
}

/// Practical-mode inputs; any `None` falls back to the strict formula where one exists.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PracticalInputs {
    pub epsilon: f64,
    pub theta: f64,
    pub delta: f64,
    pub c: f64,
    pub tau: f64,
    pub n: Option<i32>,
    pub colors: Option<usize>,
    pub dimension: Option<usize>,
    pub diameter: f64,
    pub budget_cap: u64,
}

/// Builds practical-mode parameters from user-chosen `tau` (and optional overrides).
///
/// Without a color override the count is left to the greedy coloring.
pub fn derive_practical(inputs: &PracticalInputs) -> Result<EmbeddingParams, ParamError> {
    check_diameter(inputs.diameter)?;
    check_theta(inputs.theta)?;
    // Above 1/7 the candidate spacing 7 tau^3 exceeds the radius tau^2 and
    // only the zero vector is left to choose from.
    if !(inputs.tau > 0.0 && inputs.tau < 1.0 / 7.0) {
        return Err(ParamError::Invalid(format!(
            "tau = {} must lie in (0, 1/7)",
            inputs.tau
        )));
    }
    for (name, v) in [("epsilon", inputs.epsilon), ("delta", inputs.delta), ("C", inputs.c)] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(ParamError::Invalid(format!("{name} = {v} must be positive")));
        }
    }
    if inputs.epsilon > 1.0 {
        return Err(ParamError::Invalid(format!(
            "epsilon = {} must not exceed 1",
            inputs.epsilon
        )));
    }
    let (n0, n, radii) = resolve_levels(inputs.tau, inputs.diameter, inputs.n)?;
    let formula = color_budget(
        inputs.theta,
        inputs.delta,
        inputs.c,
        inputs.tau,
        n,
        inputs.budget_cap,
    );
    let log10_color_budget = match &formula {
        Ok(b) => Some(b.log10),
        Err(ParamError::BudgetOverflow { log10_value, .. }) => Some(*log10_value),
        Err(_) => None,
    };
    let (colors, colors_from_coloring) = match inputs.colors {
        Some(c) if c >= 1 => (c, false),
        Some(_) => return Err(ParamError::Invalid("color count must be at least 1".into())),
        None => (1, true),
    };
    let dimension = match inputs.dimension {
        Some(0) => return Err(ParamError::Invalid("vector dimension must be at least 1".into())),
        Some(m) => m,
        None => vector_dimension(inputs.theta, inputs.delta, n),
    };
    Ok(EmbeddingParams {
        epsilon: inputs.epsilon,
        theta: inputs.theta,
        delta: inputs.delta,
        c: inputs.c,
        tau: inputs.tau,
        n0,
        n,
        colors,
        dimension,
        mode: Mode::Practical,
        radii,
        diameter: inputs.diameter,
        log_base: LogBase::Natural,
        tau_grid_step: 0.0,
        log10_color_budget,
        colors_from_coloring,
    })
}
