//! Maximum-likelihood fitting.
//!
//! Vasicek uses the closed-form Gaussian AR(1) estimator. CIR maximizes the
//! exact noncentral-χ² likelihood; ICIR, CEV and NLDrift maximize the Euler
//! pseudo-likelihood. Numerical fits run a Nelder–Mead search from a
//! moments-based AR(1) start, in coordinates where positivity constraints
//! become unconstrained (`ln κ`, `ln α`, `ln σ²` or `ln σ`).

use serde::{Deserialize, Serialize};

use super::{DiffusionModel, Family, ObservedPath, ParamVector};
use crate::error::{Error, Result};
use crate::numerics::{nelder_mead, SimplexOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FitMethod {
    ClosedForm,
    NumericalExactLik,
    EulerPseudoLik,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub theta_hat: ParamVector,
    /// Conditional log-likelihood `Σ ln p(X_{t+1}|X_t)` at `theta_hat`.
    pub loglik: f64,
    /// Closed form: always true. Numerical: the simplex met its value and
    /// diameter tolerances (1e−10 relative, 1e−9 in transformed coordinates).
    pub converged: bool,
    pub iterations: usize,
    pub method: FitMethod,
}

/// Conditional log-likelihood of a path under θ (pseudo-likelihood for the
/// Euler families). `−∞` if any transition has zero density.
pub fn log_likelihood(model: &DiffusionModel, path: &ObservedPath, theta: &ParamVector) -> Result<f64> {
    model.check_theta(theta)?;
    Ok(loglik_unchecked(model, path, theta.values()))
}

fn loglik_unchecked(model: &DiffusionModel, path: &ObservedPath, th: &[f64]) -> f64 {
    let delta = path.delta();
    let mut total = 0.0;
    for (x, y) in path.pairs() {
        let l = model.ln_transition_unchecked(y, x, delta, th);
        if !l.is_finite() {
            return f64::NEG_INFINITY;
        }
        total += l;
    }
    total
}

/// Least-squares AR(1) fit `X_{t+1} = c + φ X_t + e`: returns `(φ, c, residual variance)`.
fn ar1(path: &ObservedPath) -> (f64, f64, f64) {
    let n = path.n() as f64;
    let (mut sx, mut sy) = (0.0, 0.0);
    for (x, y) in path.pairs() {
        sx += x;
        sy += y;
    }
    let (mx, my) = (sx / n, sy / n);
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for (x, y) in path.pairs() {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
    }
    let phi = sxy / sxx;
    let c = my - phi * mx;
    let rss: f64 = path.pairs().map(|(x, y)| (y - c - phi * x).powi(2)).sum();
    (phi, c, rss / n)
}

/// Mean-reversion speed and level implied by an AR(1) fit, clamped into
/// the stationary region for use as a starting value.
fn ar1_start(path: &ObservedPath) -> (f64, f64, f64) {
    let (phi, c, v) = ar1(path);
    let phi_c = if phi.is_finite() { phi.clamp(0.05, 0.995) } else { 0.9 };
    let kappa = -phi_c.ln() / path.delta();
    let mean = path.values().iter().sum::<f64>() / path.values().len() as f64;
    let alpha = if (0.05..0.995).contains(&phi) { c / (1.0 - phi) } else { mean };
    (kappa, alpha, v)
}

/// Fits θ by (pseudo-)maximum likelihood.
pub fn fit_mle(model: &DiffusionModel, path: &ObservedPath) -> Result<FitResult> {
    path.check_state_space(model)?;
    match model.family {
        Family::Vasicek => fit_vasicek(model, path),
        _ => fit_numerical(model, path),
    }
}

fn fit_vasicek(model: &DiffusionModel, path: &ObservedPath) -> Result<FitResult> {
    let (phi, c, v) = ar1(path);
    if !(phi > 0.0 && phi < 1.0) {
        return Err(Error::FitFailed(format!(
            "AR(1) coefficient {phi:.6} outside (0, 1): no mean-reverting Vasicek fit"
        )));
    }
    let delta = path.delta();
    let kappa = -phi.ln() / delta;
    let alpha = c / (1.0 - phi);
    let sigma2 = 2.0 * kappa * v / (1.0 - phi * phi);
    let theta = model.params(&[kappa, alpha, sigma2])?;
    let loglik = if sigma2 > 0.0 {
        loglik_unchecked(model, path, theta.values())
    } else {
        f64::INFINITY
    };
    Ok(FitResult {
        theta_hat: theta,
        loglik,
        converged: true,
        iterations: 0,
        method: FitMethod::ClosedForm,
    })
}

/// Maps between θ and the unconstrained search coordinates.
struct Transform {
    family: Family,
    /// Level used to scale the NLDrift coefficients.
    level: f64,
}

impl Transform {
    fn to_search(&self, th: &[f64]) -> Vec<f64> {
        match self.family {
            Family::Cir => th.iter().map(|v| v.ln()).collect(),
            Family::Icir => vec![th[0].ln(), th[1], th[2].ln()],
            Family::Cev => vec![th[0].ln(), th[1].ln(), th[2].ln(), th[3]],
            Family::NlDrift => {
                let l = self.level;
                vec![th[0] / l, th[1], th[2] * l, th[3] * l * l, th[4].ln()]
            }
            Family::Vasicek => vec![th[0].ln(), th[1], th[2].ln()],
        }
    }

    fn from_search(&self, z: &[f64]) -> Vec<f64> {
        match self.family {
            Family::Cir => z.iter().map(|v| v.exp()).collect(),
            Family::Icir => vec![z[0].exp(), z[1], z[2].exp()],
            Family::Cev => vec![z[0].exp(), z[1].exp(), z[2].exp(), z[3]],
            Family::NlDrift => {
                let l = self.level;
                vec![z[0] * l, z[1], z[2] / l, z[3] / (l * l), z[4].exp()]
            }
            Family::Vasicek => vec![z[0].exp(), z[1], z[2].exp()],
        }
    }
}

fn starting_value(model: &DiffusionModel, path: &ObservedPath) -> Vec<f64> {
    let (kappa, alpha, v) = ar1_start(path);
    let delta = path.delta();
    let xs = &path.values()[..path.n()];
    let mean_pow = |p: f64| xs.iter().map(|x| x.powf(p)).sum::<f64>() / xs.len() as f64;
    match model.family {
        Family::Vasicek => vec![kappa, alpha, 2.0 * kappa * v / (1.0 - (-2.0 * kappa * delta).exp())],
        Family::Cir => {
            let alpha = alpha.max(1e-4);
            // Residual variance ≈ σ² x Δ near the mean.
            vec![kappa, alpha, (v / (delta * mean_pow(1.0))).max(1e-8)]
        }
        Family::Icir => {
            // The drift root κ/(σ² − κα) is put at the sample mean; the
            // local reversion speed there equals κ.
            let sigma = (v / (delta * mean_pow(3.0))).sqrt().max(1e-4);
            let m = mean_pow(1.0);
            vec![kappa, (sigma * sigma - kappa / m) / kappa, sigma]
        }
        Family::Cev => {
            let alpha = alpha.max(1e-4);
            let sigma = (v / (delta * mean_pow(1.0))).sqrt().max(1e-4);
            vec![kappa, alpha, sigma, 0.5]
        }
        Family::NlDrift => {
            let sigma = (v / (delta * mean_pow(3.0))).sqrt().max(1e-4);
            vec![0.0, kappa * alpha, -kappa, 0.0, sigma]
        }
    }
}

fn fit_numerical(model: &DiffusionModel, path: &ObservedPath) -> Result<FitResult> {
    let level = path.values().iter().sum::<f64>() / path.values().len() as f64;
    let tr = Transform {
        family: model.family,
        level: level.abs().max(1e-6),
    };
    let start_theta = starting_value(model, path);
    let start = tr.to_search(&start_theta);
    if start.iter().any(|v| !v.is_finite()) {
        return Err(Error::FitFailed("could not form a finite starting value".into()));
    }
    let steps: Vec<f64> = match model.family {
        Family::NlDrift => {
            let s = start[1].abs().max(start[2].abs()).max(1e-3) * 0.2;
            vec![s, s, s, s, 0.2]
        }
        Family::Icir => vec![0.2, 0.2 * start[1].abs().max(1.0), 0.2],
        Family::Cev => vec![0.2, 0.2, 0.2, 0.1],
        _ => vec![0.2; start.len()],
    };
    let objective = |z: &[f64]| -> f64 {
        let th = tr.from_search(z);
        if model.params(&th).is_err() {
            return f64::INFINITY;
        }
        -loglik_unchecked(model, path, &th)
    };
    let res = nelder_mead(objective, &start, &steps, SimplexOptions::default());
    if !res.value.is_finite() {
        return Err(Error::FitFailed(format!("{} likelihood is not finite at any trial point", model.family)));
    }
    let theta = model.params(&tr.from_search(&res.x))?;
    let method = if model.family == Family::Cir {
        FitMethod::NumericalExactLik
    } else {
        FitMethod::EulerPseudoLik
    };
    Ok(FitResult {
        theta_hat: theta,
        loglik: -res.value,
        converged: res.converged,
        iterations: res.iterations,
        method,
    })
}

/// Exact-likelihood Vasicek fit by simplex search, bypassing the closed form.
/// Used to cross-check the AR(1) estimator.
#[cfg(test)]
pub fn fit_vasicek_numerical(path: &ObservedPath) -> Result<FitResult> {
    let model = DiffusionModel::vasicek();
    let tr = Transform {
        family: Family::Vasicek,
        level: 1.0,
    };
    let start = tr.to_search(&starting_value(&model, path));
    let res = nelder_mead(
        |z| -loglik_unchecked(&model, path, &tr.from_search(z)),
        &start,
        &[0.2, 0.01, 0.2],
        SimplexOptions::default(),
    );
    Ok(FitResult {
        theta_hat: model.params(&tr.from_search(&res.x))?,
        loglik: -res.value,
        converged: res.converged,
        iterations: res.iterations,
        method: FitMethod::NumericalExactLik,
    })
}
