//! Biweight kernel, its convolution functionals, and the kernel smoothers
//! of the transition density.
//!
//! All smoothers run on a [`PathIndex`], which keeps the observations
//! sorted so that every kernel sum only touches the points inside the
//! bandwidth window.

use std::ops::Range;
use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::model::{euler_density_profile, DensityKind, DiffusionModel, ParamVector};
use crate::numerics::{gauss_legendre5, integrate};

/// `R(K) = ∫K²` for the biweight.
pub const R_K: f64 = 5.0 / 7.0;
/// `σ_K² = ∫u²K` for the biweight.
pub const SIGMA2_K: f64 = 1.0 / 7.0;

/// Relative threshold below which the local-linear denominator counts as degenerate.
pub const LL_DEGENERACY: f64 = 1e-12;

/// Biweight kernel `K(u) = 15/16 (1 − u²)²` on `[−1, 1]`.
#[inline]
pub fn biweight(u: f64) -> f64 {
    if u.abs() < 1.0 {
        let v = 1.0 - u * u;
        0.9375 * v * v
    } else {
        0.0
    }
}

/// Scaled kernel `K_h(u) = K(u/h)/h`.
#[inline]
pub fn kernel_h(u: f64, h: f64) -> f64 {
    biweight(u / h) / h
}

/// `K^(2)(z, c) = ∫K(u)K(z + cu) du`.
///
/// The integrand is a degree-8 polynomial on the overlap of the two
/// supports, so five-point Gauss–Legendre is exact.
pub fn k2(z: f64, c: f64) -> f64 {
    let lo = (-1.0_f64).max((-1.0 - z) / c);
    let hi = 1.0_f64.min((1.0 - z) / c);
    if hi <= lo {
        return 0.0;
    }
    gauss_legendre5(|u| biweight(u) * biweight(z + c * u), lo, hi)
}

/// `MK^(2)(t) = ∫uK(u)K(t + u) du` (degree-9 integrand, exact).
pub fn mk2(t: f64) -> f64 {
    let lo = (-1.0_f64).max(-1.0 - t);
    let hi = 1.0_f64.min(1.0 - t);
    if hi <= lo {
        return 0.0;
    }
    gauss_legendre5(|u| u * biweight(u) * biweight(t + u), lo, hi)
}

/// Integrates a piecewise polynomial over panels split at `breaks`.
fn piecewise(f: impl Fn(f64) -> f64, mut breaks: Vec<f64>) -> f64 {
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();
    breaks.windows(2).map(|w| integrate(&f, w[0], w[1], 1e-300, 1e-14)).sum()
}

/// `∫{K^(2)(v, t)}² dv`.
fn k2_square_integral(t: f64) -> f64 {
    let (a, b) = (1.0 + t, (1.0 - t).abs());
    piecewise(|v| k2(v, t).powi(2), vec![-a, -b, 0.0, b, a])
}

/// `K^(4)(0) = ∫{K^(2)(v, 1)}² dv`.
pub fn k4_zero() -> f64 {
    static CELL: OnceLock<f64> = OnceLock::new();
    *CELL.get_or_init(|| k2_square_integral(1.0))
}

/// `ν(t) = ∫{K^(2)(tu, t)}² du · ∫{K^(2)(v, t)}² dv`.
pub fn nu(t: f64) -> f64 {
    assert!(t > 0.0, "nu needs t > 0");
    let (a, b) = ((1.0 + t) / t, (1.0 - t).abs() / t);
    let first = piecewise(|u| k2(t * u, t).powi(2), vec![-a, -b, 0.0, b, a]);
    first * k2_square_integral(t)
}

/// Named kernel functionals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelConstant {
    R,
    Sigma2,
    K2 { z: f64, c: f64 },
    K4Zero,
    Mk2(f64),
    Nu(f64),
}

/// Evaluates one of the kernel functionals.
pub fn kernel_constant(which: KernelConstant) -> f64 {
    match which {
        KernelConstant::R => R_K,
        KernelConstant::Sigma2 => SIGMA2_K,
        KernelConstant::K2 { z, c } => k2(z, c),
        KernelConstant::K4Zero => k4_zero(),
        KernelConstant::Mk2(t) => mk2(t),
        KernelConstant::Nu(t) => nu(t),
    }
}

/// Indices `i` of `keys` (sorted) with `|keys[i] − x| < h`.
#[inline]
fn window(keys: &[f64], x: f64, h: f64) -> Range<usize> {
    let lo = keys.partition_point(|&v| v <= x - h);
    let hi = keys.partition_point(|&v| v < x + h);
    lo..hi.max(lo)
}

/// How the local-linear weights at a point were formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeightKind {
    LocalLinear,
    /// Degenerate local-linear system; Nadaraya–Watson weights used.
    NadarayaWatson,
    /// No observation within one bandwidth.
    Empty,
}

/// Observations of a path, sorted for window lookups.
#[derive(Debug, Clone)]
pub struct PathIndex {
    values: Vec<f64>,
    /// All `n + 1` observations, sorted.
    obs_keys: Vec<f64>,
    obs_ids: Vec<usize>,
    /// Pairs `(X_t, X_{t+1})`, `t < n`, sorted by `X_t`.
    pair_keys: Vec<f64>,
    pair_next: Vec<f64>,
}

impl PathIndex {
    pub fn new(values: &[f64]) -> Self {
        let mut ids: Vec<usize> = (0..values.len()).collect();
        ids.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
        let obs_keys = ids.iter().map(|&i| values[i]).collect();
        let mut pairs: Vec<usize> = (0..values.len().saturating_sub(1)).collect();
        pairs.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
        PathIndex {
            values: values.to_vec(),
            obs_keys,
            obs_ids: ids,
            pair_keys: pairs.iter().map(|&t| values[t]).collect(),
            pair_next: pairs.iter().map(|&t| values[t + 1]).collect(),
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Number of observations `n + 1`.
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Number of transition pairs `n`.
    pub fn pairs(&self) -> usize {
        self.pair_keys.len()
    }

    /// `π̂(x) = (n+1)^{-1} Σ_t K_h(x − X_t)`.
    pub fn pi_hat(&self, x: f64, h: f64) -> f64 {
        let r = window(&self.obs_keys, x, h);
        let s: f64 = self.obs_keys[r].iter().map(|&v| kernel_h(x - v, h)).sum();
        s / self.len() as f64
    }

    /// Appends the nonzero products `K_h(x − X_t)K_h(y − X_{t+1})`.
    pub fn pair_products(&self, x: f64, y: f64, h: f64, out: &mut Vec<f64>) {
        out.clear();
        for i in window(&self.pair_keys, x, h) {
            let ky = kernel_h(y - self.pair_next[i], h);
            if ky > 0.0 {
                let kx = kernel_h(x - self.pair_keys[i], h);
                if kx > 0.0 {
                    out.push(kx * ky);
                }
            }
        }
    }

    /// `n^{-1} Σ_t K_h(x − X_t)K_h(y − X_{t+1})`, the joint kernel estimate.
    pub fn joint_hat(&self, x: f64, y: f64, h: f64) -> f64 {
        let mut s = 0.0;
        for i in window(&self.pair_keys, x, h) {
            s += kernel_h(x - self.pair_keys[i], h) * kernel_h(y - self.pair_next[i], h);
        }
        s / self.pairs() as f64
    }

    /// Local-linear weights at `y` over all `n + 1` observations, written as
    /// `(observation index, weight)` for the observations in the window.
    pub fn local_linear(&self, y: f64, h: f64, out: &mut Vec<(usize, f64)>) -> WeightKind {
        out.clear();
        let r = window(&self.obs_keys, y, h);
        let (mut s0, mut s1, mut s2) = (0.0, 0.0, 0.0);
        for i in r.clone() {
            let d = y - self.obs_keys[i];
            let k = kernel_h(d, h);
            s0 += k;
            s1 += k * d;
            s2 += k * d * d;
        }
        if !(s0 > 0.0) {
            return WeightKind::Empty;
        }
        let den = s2 * s0 - s1 * s1;
        if den > LL_DEGENERACY * s2 * s0 {
            for i in r {
                let d = y - self.obs_keys[i];
                out.push((self.obs_ids[i], kernel_h(d, h) * (s2 - s1 * d) / den));
            }
            WeightKind::LocalLinear
        } else {
            for i in r {
                out.push((self.obs_ids[i], kernel_h(y - self.obs_keys[i], h) / s0));
            }
            WeightKind::NadarayaWatson
        }
    }

    /// Joint smoothed parametric density
    /// `p̃(x, y) = (n+1)^{-1} Σ_t K_h(x − X_t) Σ_s w_s(y) p(X_s | X_t)`.
    pub fn p_tilde_joint(
        &self,
        x: f64,
        y: f64,
        h: f64,
        p: &ParamMatrix,
        weights: &mut Vec<(usize, f64)>,
    ) -> (f64, WeightKind) {
        let kind = self.local_linear(y, h, weights);
        if kind == WeightKind::Empty {
            return (0.0, kind);
        }
        let mut total = 0.0;
        for i in window(&self.obs_keys, x, h) {
            let kx = kernel_h(x - self.obs_keys[i], h);
            if kx > 0.0 {
                let row = p.row(self.obs_ids[i]);
                let inner: f64 = weights.iter().map(|&(s, w)| w * row[s]).sum();
                total += kx * inner;
            }
        }
        (total / self.len() as f64, kind)
    }
}

/// Parametric transition densities between all pairs of observations:
/// row `t`, column `s` holds `p_θ(X_s | X_t)`.
#[derive(Debug, Clone)]
pub struct ParamMatrix {
    size: usize,
    data: Vec<f64>,
}

impl ParamMatrix {
    pub fn from_model(model: &DiffusionModel, theta: &ParamVector, values: &[f64], delta: f64) -> Result<Self> {
        model.check_theta(theta)?;
        if !(delta > 0.0) {
            return Err(Error::InvalidInput(format!("sampling interval must be positive, got {delta}")));
        }
        if let Some(&x) = values.iter().find(|&&x| !model.in_state_space(x)) {
            return Err(Error::Domain(format!("observation {x} outside the state space")));
        }
        let size = values.len();
        let th = theta.values();
        let mut data = Vec::with_capacity(size * size);
        if model.family.density_kind() == DensityKind::EulerApprox && model.density_substeps > 1 {
            for &x in values {
                data.extend(euler_density_profile(model, x, delta, theta, model.density_substeps, values)?);
            }
        } else {
            for &x in values {
                data.extend(values.iter().map(|&y| model.ln_transition_unchecked(y, x, delta, th).exp()));
            }
        }
        Ok(ParamMatrix { size, data })
    }

    /// Matrix with entries `f(t, s)`.
    pub fn from_fn(size: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(size * size);
        for t in 0..size {
            data.extend((0..size).map(|s| f(t, s)));
        }
        ParamMatrix { size, data }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    #[inline]
    pub fn row(&self, t: usize) -> &[f64] {
        &self.data[t * self.size..(t + 1) * self.size]
    }
}

/// Kernel and smoothed parametric densities on a set of points.
#[derive(Debug, Clone)]
pub struct SmoothedDensities {
    pub h: f64,
    pub grid: Vec<(f64, f64)>,
    /// `p̂(y|x)`; zero where `π̂(x) = 0`.
    pub p_hat: Vec<f64>,
    /// `p̃_θ(y|x)`; zero where `π̂(x) = 0`. May dip below zero where the
    /// local-linear weights are negative.
    pub p_tilde: Vec<f64>,
    pub pi_hat: Vec<f64>,
    /// Points where the local-linear weights fell back to Nadaraya–Watson.
    pub ll_fallbacks: usize,
}

impl SmoothedDensities {
    pub fn compute(index: &PathIndex, h: f64, p: &ParamMatrix, grid: &[(f64, f64)]) -> Self {
        let mut weights = Vec::new();
        let mut out = SmoothedDensities {
            h,
            grid: grid.to_vec(),
            p_hat: Vec::with_capacity(grid.len()),
            p_tilde: Vec::with_capacity(grid.len()),
            pi_hat: Vec::with_capacity(grid.len()),
            ll_fallbacks: 0,
        };
        for &(x, y) in grid {
            let pi = index.pi_hat(x, h);
            let (joint_tilde, kind) = index.p_tilde_joint(x, y, h, p, &mut weights);
            if kind == WeightKind::NadarayaWatson {
                out.ll_fallbacks += 1;
            }
            if pi > 0.0 {
                out.p_hat.push(index.joint_hat(x, y, h) / pi);
                out.p_tilde.push(joint_tilde / pi);
            } else {
                out.p_hat.push(0.0);
                out.p_tilde.push(0.0);
            }
            out.pi_hat.push(pi);
        }
        out
    }

    /// `p̂(x, y) = p̂(y|x) π̂(x)` at point `i`.
    pub fn joint_hat(&self, i: usize) -> f64 {
        self.p_hat[i] * self.pi_hat[i]
    }

    /// `p̃(x, y) = p̃(y|x) π̂(x)` at point `i`.
    pub fn joint_tilde(&self, i: usize) -> f64 {
        self.p_tilde[i] * self.pi_hat[i]
    }
}

/// Stationary kernel density estimate `π̂(x)` over all observations.
pub fn stationary_kde(values: &[f64], h: f64, x: f64) -> f64 {
    values.iter().map(|&v| kernel_h(x - v, h)).sum::<f64>() / values.len() as f64
}

/// Kernel transition density estimate `p̂(y|x)`.
pub fn transition_kde(values: &[f64], h: f64, x: f64, y: f64) -> Result<f64> {
    if values.len() < 2 {
        return Err(Error::InvalidInput("need at least one transition pair".into()));
    }
    let pi = stationary_kde(values, h, x);
    if !(pi > 0.0) {
        return Err(Error::EmptyWindow { x, y });
    }
    let n = (values.len() - 1) as f64;
    let joint: f64 = values.windows(2).map(|w| kernel_h(x - w[0], h) * kernel_h(y - w[1], h)).sum();
    Ok(joint / n / pi)
}

/// Local-linear weights `w_t(y)` for every observation.
pub fn local_linear_weights(values: &[f64], h: f64, y: f64) -> Result<Vec<f64>> {
    let index = PathIndex::new(values);
    let mut sparse = Vec::new();
    match index.local_linear(y, h, &mut sparse) {
        WeightKind::LocalLinear => {
            let mut w = vec![0.0; values.len()];
            for (i, v) in sparse {
                w[i] = v;
            }
            Ok(w)
        }
        WeightKind::NadarayaWatson | WeightKind::Empty => Err(Error::DegenerateWindow { at: y }),
    }
}

/// Smoothed parametric transition density `p̃_θ(y|x)`.
pub fn smoothed_param_density(
    values: &[f64],
    delta: f64,
    h: f64,
    theta: &ParamVector,
    model: &DiffusionModel,
    x: f64,
    y: f64,
) -> Result<f64> {
    let p = ParamMatrix::from_model(model, theta, values, delta)?;
    smoothed_density_with(values, h, &p, x, y)
}

/// `p̃(y|x)` for an arbitrary matrix of `p(X_s | X_t)` values.
pub fn smoothed_density_with(values: &[f64], h: f64, p: &ParamMatrix, x: f64, y: f64) -> Result<f64> {
    if p.size() != values.len() {
        return Err(Error::InvalidInput("density matrix does not match the path".into()));
    }
    let index = PathIndex::new(values);
    let pi = index.pi_hat(x, h);
    if !(pi > 0.0) {
        return Err(Error::EmptyWindow { x, y });
    }
    let mut weights = Vec::new();
    let (joint, kind) = index.p_tilde_joint(x, y, h, p, &mut weights);
    if kind != WeightKind::LocalLinear {
        return Err(Error::DegenerateWindow { at: y });
    }
    Ok(joint / pi)
}
