use std::f64::consts::PI;

use super::{DiffusionModel, Family, ParamVector};
use crate::bessel::ln_bessel_i;
use crate::error::{Error, Result};

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

fn ln_normal_pdf(y: f64, mean: f64, var: f64) -> f64 {
    let d = y - mean;
    -LN_SQRT_2PI - 0.5 * var.ln() - 0.5 * d * d / var
}

/// Points of the convolution grid used for sub-stepped Euler densities.
const CK_GRID: usize = 1201;

impl DiffusionModel {
    /// Transition density `p_θ(y | x, Δ)`.
    pub fn transition_density(&self, y: f64, x: f64, delta: f64, theta: &ParamVector) -> Result<f64> {
        self.validate_density_args(x, delta, theta)?;
        if self.family.density_kind() == super::DensityKind::EulerApprox && self.density_substeps > 1 {
            let v = euler_density_profile(self, x, delta, theta, self.density_substeps, &[y])?;
            return Ok(v[0]);
        }
        Ok(self.ln_transition_unchecked(y, x, delta, theta.values()).exp())
    }

    /// `ln p_θ(y | x, Δ)`; `−∞` outside the support.
    pub fn ln_transition_density(&self, y: f64, x: f64, delta: f64, theta: &ParamVector) -> Result<f64> {
        self.validate_density_args(x, delta, theta)?;
        if self.family.density_kind() == super::DensityKind::EulerApprox && self.density_substeps > 1 {
            let v = euler_density_profile(self, x, delta, theta, self.density_substeps, &[y])?;
            return Ok(v[0].ln());
        }
        Ok(self.ln_transition_unchecked(y, x, delta, theta.values()))
    }

    fn validate_density_args(&self, x: f64, delta: f64, theta: &ParamVector) -> Result<()> {
        self.check_theta(theta)?;
        if !(delta > 0.0) {
            return Err(Error::Domain(format!("sampling interval must be positive, got {delta}")));
        }
        if !self.in_state_space(x) {
            return Err(Error::Domain(format!("conditioning state {x} outside the state space")));
        }
        if self.family == Family::Vasicek && !(theta.get(2) > 0.0) {
            return Err(Error::Domain("Vasicek density needs sigma2 > 0".into()));
        }
        Ok(())
    }

    /// Plain one-step log density without argument checks (hot path).
    pub(crate) fn ln_transition_unchecked(&self, y: f64, x: f64, delta: f64, th: &[f64]) -> f64 {
        match self.family {
            Family::Vasicek => {
                let (kappa, alpha, s2) = (th[0], th[1], th[2]);
                let e = (-kappa * delta).exp();
                let mean = alpha + (x - alpha) * e;
                let var = s2 * (-(-2.0 * kappa * delta).exp_m1()) / (2.0 * kappa);
                ln_normal_pdf(y, mean, var)
            }
            Family::Cir => ln_cir_density(y, x, delta, th[0], th[1], th[2]),
            _ => {
                let var = self.diffusion2_unchecked(x, th) * delta;
                if !(var > 0.0) {
                    return f64::NEG_INFINITY;
                }
                ln_normal_pdf(y, x + self.drift_unchecked(x, th) * delta, var)
            }
        }
    }

    /// Conditional mean and variance of the Vasicek transition.
    pub fn vasicek_moments(x: f64, delta: f64, theta: &ParamVector) -> (f64, f64) {
        let th = theta.values();
        let e = (-th[0] * delta).exp();
        (
            th[1] + (x - th[1]) * e,
            th[2] * (-(-2.0 * th[0] * delta).exp_m1()) / (2.0 * th[0]),
        )
    }
}

/// Noncentral χ² transition density of the CIR process in log scale:
/// `c·exp(−u−v)(v/u)^{q/2} I_q(2√(uv))` with `c = 2κ/(σ²(1−e^{−κΔ}))`,
/// `u = c x e^{−κΔ}`, `v = c y`, `q = 2κα/σ² − 1`.
pub(crate) fn ln_cir_density(y: f64, x: f64, delta: f64, kappa: f64, alpha: f64, s2: f64) -> f64 {
    if y <= 0.0 || x <= 0.0 {
        return f64::NEG_INFINITY;
    }
    let c = 2.0 * kappa / (s2 * (-(-kappa * delta).exp_m1()));
    let u = c * x * (-kappa * delta).exp();
    let v = c * y;
    let q = 2.0 * kappa * alpha / s2 - 1.0;
    if q <= -1.0 {
        return f64::NEG_INFINITY;
    }
    let z = 2.0 * (u * v).sqrt();
    c.ln() - u - v + 0.5 * q * (v / u).ln() + ln_bessel_i(q, z)
}

/// Euler pseudo-density after `substeps` Euler steps of size `Δ/substeps`,
/// evaluated at every point of `ys`.
///
/// Intermediate densities are carried on a uniform grid and propagated by
/// the Chapman–Kolmogorov sum with trapezoid weights. `substeps = 1` is the
/// plain Gaussian `N(x + μΔ, σ²Δ)`.
pub fn euler_density_profile(
    model: &DiffusionModel,
    x: f64,
    delta: f64,
    theta: &ParamVector,
    substeps: usize,
    ys: &[f64],
) -> Result<Vec<f64>> {
    model.check_theta(theta)?;
    if substeps == 0 || !(delta > 0.0) {
        return Err(Error::InvalidInput("need substeps >= 1 and delta > 0".into()));
    }
    let th = theta.values();
    let dt = delta / substeps as f64;
    let step = |from: f64, to: f64| -> f64 {
        let var = model.diffusion2_unchecked(from, th) * dt;
        if !(var > 0.0) {
            return 0.0;
        }
        let d = to - from - model.drift_unchecked(from, th) * dt;
        (-0.5 * d * d / var).exp() / (2.0 * PI * var).sqrt()
    };
    if substeps == 1 {
        return Ok(ys.iter().map(|&y| step(x, y)).collect());
    }

    let sd = model.diffusion_unchecked(x, th);
    if !(sd > 0.0) {
        return Err(Error::Domain(format!("diffusion vanishes at x = {x}")));
    }
    let half = 10.0 * sd * delta.sqrt() + (model.drift_unchecked(x, th) * delta).abs();
    let mut lo = x - half;
    let hi = x + half;
    if model.family.positive_state() {
        lo = lo.max(1e-10);
    }
    let h = (hi - lo) / (CK_GRID - 1) as f64;
    let grid: Vec<f64> = (0..CK_GRID).map(|i| lo + h * i as f64).collect();
    let weight = |i: usize| if i == 0 || i + 1 == CK_GRID { 0.5 * h } else { h };

    let mut dens: Vec<f64> = grid.iter().map(|&z| step(x, z)).collect();
    for _ in 1..substeps - 1 {
        let src: Vec<(f64, f64)> = grid
            .iter()
            .enumerate()
            .filter(|&(i, _)| dens[i] > 0.0)
            .map(|(i, &z)| (z, dens[i] * weight(i)))
            .collect();
        dens = grid
            .iter()
            .map(|&to| src.iter().map(|&(from, w)| w * step(from, to)).sum())
            .collect();
    }
    Ok(ys
        .iter()
        .map(|&y| {
            grid.iter()
                .enumerate()
                .map(|(i, &from)| dens[i] * weight(i) * step(from, y))
                .sum()
        })
        .collect())
}
