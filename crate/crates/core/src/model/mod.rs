//! Parametric short-rate diffusions `dX = μ(X;θ)dt + σ(X;θ)dB`.
//!
//! Five families are supported:
//!
//! | family    | drift μ(x)                          | diffusion σ(x) | θ                      |
//! |-----------|-------------------------------------|----------------|------------------------|
//! | Vasicek   | κ(α − x)                            | √σ²            | (κ, α, σ²)             |
//! | CIR       | κ(α − x)                            | √(σ² x)        | (κ, α, σ²)             |
//! | ICIR      | x{κ − (σ² − κα)x}                   | σ x^{3/2}      | (κ, α, σ)              |
//! | CEV       | κ(α − x)                            | σ x^ρ          | (κ, α, σ, ρ)           |
//! | NLDrift   | α₋₁/x + α₀ + α₁x + α₂x²             | σ x^{3/2}      | (α₋₁, α₀, α₁, α₂, σ)   |
//!
//! Vasicek and CIR carry exact Gaussian / noncentral-χ² transition densities
//! and exact one-step samplers. The other three use the Euler pseudo-density
//! `N(x + μΔ, σ²Δ)` (optionally refined by sub-step convolution) and
//! Euler–Maruyama simulation.

mod density;
mod fit;
mod simulate;
mod stationary;

pub use density::euler_density_profile;
pub use fit::{fit_mle, log_likelihood, FitMethod, FitResult};
pub use simulate::{sample_stationary, simulate_path, STATE_FLOOR};
pub use stationary::StationaryLaw;

use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Model family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Family {
    Vasicek,
    Cir,
    Icir,
    Cev,
    NlDrift,
}

/// How the transition density is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DensityKind {
    ExactClosedForm,
    EulerApprox,
}

impl Family {
    pub const ALL: [Family; 5] = [Family::Vasicek, Family::Cir, Family::Icir, Family::Cev, Family::NlDrift];

    pub fn name(self) -> &'static str {
        match self {
            Family::Vasicek => "vasicek",
            Family::Cir => "cir",
            Family::Icir => "icir",
            Family::Cev => "cev",
            Family::NlDrift => "nldrift",
        }
    }

    pub fn param_names(self) -> &'static [&'static str] {
        match self {
            Family::Vasicek | Family::Cir => &["kappa", "alpha", "sigma2"],
            Family::Icir => &["kappa", "alpha", "sigma"],
            Family::Cev => &["kappa", "alpha", "sigma", "rho"],
            Family::NlDrift => &["alpha_m1", "alpha_0", "alpha_1", "alpha_2", "sigma"],
        }
    }

    pub fn param_dim(self) -> usize {
        self.param_names().len()
    }

    pub fn density_kind(self) -> DensityKind {
        match self {
            Family::Vasicek | Family::Cir => DensityKind::ExactClosedForm,
            _ => DensityKind::EulerApprox,
        }
    }

    /// Whether the state space is `(0, ∞)` rather than the real line.
    pub fn positive_state(self) -> bool {
        !matches!(self, Family::Vasicek)
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "vasicek" => Ok(Family::Vasicek),
            "cir" => Ok(Family::Cir),
            "icir" | "inverse-cir" => Ok(Family::Icir),
            "cev" => Ok(Family::Cev),
            "nldrift" | "nl" | "nonlinear-drift" => Ok(Family::NlDrift),
            other => Err(Error::InvalidInput(format!("unknown model family '{other}'"))),
        }
    }
}

/// Parameter vector θ, validated against its family's domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamVector(Vec<f64>);

impl ParamVector {
    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn get(&self, i: usize) -> f64 {
        self.0[i]
    }
}

/// A parametric diffusion with its numerical settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiffusionModel {
    pub family: Family,
    /// Euler sub-steps used when evaluating pseudo-densities (1 = plain Euler).
    pub density_substeps: usize,
    /// Euler sub-steps per sampling interval when simulating.
    pub sim_substeps: usize,
}

impl DiffusionModel {
    pub fn new(family: Family) -> Self {
        Self {
            family,
            density_substeps: 1,
            sim_substeps: 20,
        }
    }

    pub fn vasicek() -> Self {
        Self::new(Family::Vasicek)
    }

    pub fn cir() -> Self {
        Self::new(Family::Cir)
    }

    pub fn param_dim(&self) -> usize {
        self.family.param_dim()
    }

    pub fn density_kind(&self) -> DensityKind {
        self.family.density_kind()
    }

    /// Validates `values` against the family's parameter domain.
    ///
    /// Vasicek admits σ² = 0 (deterministic paths); every density and the
    /// stationary law then report a domain error.
    pub fn params(&self, values: &[f64]) -> Result<ParamVector> {
        let names = self.family.param_names();
        if values.len() != names.len() {
            return Err(Error::Domain(format!(
                "{} expects {} parameters, got {}",
                self.family,
                names.len(),
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("{} is not finite", names[i])));
        }
        let positive = |i: usize| -> Result<()> {
            if values[i] > 0.0 {
                Ok(())
            } else {
                Err(Error::Domain(format!("{} must be positive, got {}", names[i], values[i])))
            }
        };
        match self.family {
            Family::Vasicek => {
                positive(0)?;
                if values[2] < 0.0 {
                    return Err(Error::Domain(format!("sigma2 must be nonnegative, got {}", values[2])));
                }
            }
            Family::Cir => {
                positive(0)?;
                positive(1)?;
                positive(2)?;
            }
            // Stationary only when σ² > κα; that is checked by the stationary law.
            Family::Icir => {
                positive(0)?;
                positive(2)?;
            }
            Family::Cev => {
                positive(0)?;
                positive(1)?;
                positive(2)?;
                if !(values[3] > 0.0 && values[3] < 2.0) {
                    return Err(Error::Domain(format!("rho must lie in (0, 2), got {}", values[3])));
                }
            }
            Family::NlDrift => positive(4)?,
        }
        Ok(ParamVector(values.to_vec()))
    }

    /// Named-parameter constructor, in any order.
    pub fn params_named(&self, named: &[(&str, f64)]) -> Result<ParamVector> {
        let names = self.family.param_names();
        let mut values = vec![f64::NAN; names.len()];
        for (key, v) in named {
            let i = names
                .iter()
                .position(|n| n == key)
                .ok_or_else(|| Error::InvalidInput(format!("{} has no parameter '{key}'", self.family)))?;
            values[i] = *v;
        }
        if let Some(i) = values.iter().position(|v| v.is_nan()) {
            return Err(Error::InvalidInput(format!("missing parameter '{}'", names[i])));
        }
        self.params(&values)
    }

    pub(crate) fn check_theta(&self, theta: &ParamVector) -> Result<()> {
        if theta.0.len() != self.param_dim() {
            return Err(Error::Domain(format!(
                "{} expects {} parameters, got {}",
                self.family,
                self.param_dim(),
                theta.0.len()
            )));
        }
        Ok(())
    }

    pub fn in_state_space(&self, x: f64) -> bool {
        x.is_finite() && (!self.family.positive_state() || x > 0.0)
    }

    /// Drift μ(x; θ).
    pub fn drift(&self, x: f64, theta: &ParamVector) -> Result<f64> {
        self.check_theta(theta)?;
        if !self.in_state_space(x) {
            return Err(Error::Domain(format!("state {x} outside the {} state space", self.family)));
        }
        Ok(self.drift_unchecked(x, theta.values()))
    }

    /// Diffusion σ(x; θ) > 0.
    pub fn diffusion(&self, x: f64, theta: &ParamVector) -> Result<f64> {
        self.check_theta(theta)?;
        let s = self.diffusion_unchecked(x, theta.values());
        if s > 0.0 && s.is_finite() {
            Ok(s)
        } else {
            Err(Error::Domain(format!("diffusion is not positive at x = {x}")))
        }
    }

    pub(crate) fn drift_unchecked(&self, x: f64, th: &[f64]) -> f64 {
        match self.family {
            Family::Vasicek | Family::Cir | Family::Cev => th[0] * (th[1] - x),
            Family::Icir => x * (th[0] - (th[2] * th[2] - th[0] * th[1]) * x),
            Family::NlDrift => th[0] / x + th[1] + th[2] * x + th[3] * x * x,
        }
    }

    /// Squared diffusion σ²(x). May be nonpositive or NaN outside the state space.
    pub(crate) fn diffusion2_unchecked(&self, x: f64, th: &[f64]) -> f64 {
        match self.family {
            Family::Vasicek => th[2],
            Family::Cir => th[2] * x,
            Family::Icir => th[2] * th[2] * x * x * x,
            Family::Cev => {
                if x > 0.0 {
                    th[2] * th[2] * x.powf(2.0 * th[3])
                } else {
                    f64::NAN
                }
            }
            Family::NlDrift => th[4] * th[4] * x * x * x,
        }
    }

    pub(crate) fn diffusion_unchecked(&self, x: f64, th: &[f64]) -> f64 {
        if self.family.positive_state() && x <= 0.0 {
            return f64::NAN;
        }
        self.diffusion2_unchecked(x, th).sqrt()
    }

    /// Anchor `x₀` of the stationary-density exponent: α where the family has
    /// one, otherwise the drift root nearest the data scale.
    pub(crate) fn anchor(&self, th: &[f64]) -> f64 {
        match self.family {
            Family::Vasicek | Family::Cir | Family::Cev => th[1],
            // Drift root κ/(σ² − κα) when it exists.
            Family::Icir if th[2] * th[2] > th[0] * th[1] => th[0] / (th[2] * th[2] - th[0] * th[1]),
            Family::Icir | Family::NlDrift => {
                // Scan for a sign change of the drift on (0, 10].
                let mut prev_x = 1e-4;
                let mut prev = self.drift_unchecked(prev_x, th);
                let mut x = prev_x;
                while x < 10.0 {
                    x *= 1.05;
                    let cur = self.drift_unchecked(x, th);
                    if prev > 0.0 && cur <= 0.0 {
                        let (mut lo, mut hi) = (prev_x, x);
                        for _ in 0..100 {
                            let mid = 0.5 * (lo + hi);
                            if self.drift_unchecked(mid, th) > 0.0 {
                                lo = mid;
                            } else {
                                hi = mid;
                            }
                        }
                        return 0.5 * (lo + hi);
                    }
                    prev_x = x;
                    prev = cur;
                }
                0.1
            }
        }
    }
}

/// Equally spaced observations `X_1 … X_{n+1}` with spacing `delta` (years).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservedPath {
    values: Vec<f64>,
    delta: f64,
    /// Euler excursions clamped at the positivity floor while simulating.
    #[serde(default)]
    pub floor_hits: usize,
}

impl ObservedPath {
    pub fn new(values: Vec<f64>, delta: f64) -> Result<Self> {
        if values.len() < 3 {
            return Err(Error::InvalidInput(format!(
                "a path needs at least 3 observations, got {}",
                values.len()
            )));
        }
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(Error::InvalidInput(format!("sampling interval must be positive, got {delta}")));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("observation {} is not finite", i + 1)));
        }
        Ok(Self {
            values,
            delta,
            floor_hits: 0,
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Number of transitions `n` (the path holds `n + 1` values).
    pub fn n(&self) -> usize {
        self.values.len() - 1
    }

    /// Consecutive pairs `(X_t, X_{t+1})`, `t = 1..n`.
    pub fn pairs(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.values.windows(2).map(|w| (w[0], w[1]))
    }

    /// Checks every observation against the model's state space.
    pub fn check_state_space(&self, model: &DiffusionModel) -> Result<()> {
        match self.values.iter().position(|&v| !model.in_state_space(v)) {
            Some(i) => Err(Error::Domain(format!(
                "observation {} = {} lies outside the {} state space",
                i + 1,
                self.values[i],
                model.family
            ))),
            None => Ok(()),
        }
    }
}

/// Parameter sets used in the simulation designs.
pub mod presets {
    /// Vasicek "Model 0": κ = 0.85837, α = 0.089102, σ² = 0.0021854.
    pub const VASICEK_0: [f64; 3] = [0.85837, 0.089102, 0.0021854];
    /// Vasicek "Model −2": κ and σ² of Model 0 quadrupled.
    pub const VASICEK_M2: [f64; 3] = [4.0 * 0.85837, 0.089102, 4.0 * 0.0021854];
    /// Vasicek "Model 2": κ and σ² of Model 0 halved twice.
    pub const VASICEK_2: [f64; 3] = [0.25 * 0.85837, 0.089102, 0.25 * 0.0021854];
    pub const CIR_0: [f64; 3] = [0.89218, 0.09045, 0.032742];
    pub const CIR_1: [f64; 3] = [0.44609, 0.09045, 0.016371];
    pub const CIR_2: [f64; 3] = [0.22305, 0.09045, 0.008186];
    /// Monthly sampling.
    pub const MONTHLY: f64 = 1.0 / 12.0;
}
