//! Bandwidth selection: Scott's reference rule, least-squares cross-validation
//! for the conditional density, and construction of bandwidth sets.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{k2, kernel_h};
use crate::model::ObservedPath;

/// Scott reference bandwidth `ŝ n^{-1/6}`, with `ŝ` the sample standard
/// deviation of all observations and `n` the number of transitions.
pub fn scott_rule(path: &ObservedPath) -> Result<f64> {
    let n = path.n();
    if n < 10 {
        return Err(Error::InvalidInput(format!("Scott rule needs n >= 10 transitions, got {n}")));
    }
    let sd = sample_sd(path.values());
    if !(sd > 0.0) {
        return Err(Error::InvalidInput("Scott rule needs non-constant data".into()));
    }
    Ok(sd * (n as f64).powf(-1.0 / 6.0))
}

fn sample_sd(v: &[f64]) -> f64 {
    let m = v.len() as f64;
    let mean = v.iter().sum::<f64>() / m;
    (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (m - 1.0)).sqrt()
}

/// Least-squares cross-validation criterion at bandwidth `h`.
///
/// `CV(h) = n^{-1} Σ_t ∫p̂_{−t}(y|X_t)² dy − 2 n^{-1} Σ_t p̂_{−t}(X_{t+1}|X_t)`,
/// where `p̂_{−t}` drops pairs `t − 1, t, t + 1`. A pair whose conditioning
/// window is empty after the leave-out contributes zero; if that happens for
/// more than half of the pairs the criterion is `+∞`.
pub fn cv_criterion(path: &ObservedPath, h: f64) -> f64 {
    let v = path.values();
    let n = path.n();
    // Pairs sorted by their conditioning value.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| v[a].total_cmp(&v[b]).then(a.cmp(&b)));
    let keys: Vec<f64> = order.iter().map(|&t| v[t]).collect();

    let mut total = 0.0;
    let mut empty = 0usize;
    let mut kept: Vec<(f64, f64)> = Vec::new();
    for t in 0..n {
        let x = v[t];
        let lo = keys.partition_point(|&k| k <= x - h);
        let hi = keys.partition_point(|&k| k < x + h);
        kept.clear();
        let mut den = 0.0;
        for &s in &order[lo..hi.max(lo)] {
            if s.abs_diff(t) <= 1 {
                continue;
            }
            let w = kernel_h(x - v[s], h);
            if w > 0.0 {
                den += w;
                kept.push((w, v[s + 1]));
            }
        }
        if !(den > 0.0) {
            empty += 1;
            continue;
        }
        // ∫K_h(y − a)K_h(y − b) dy = K^(2)((a − b)/h, 1)/h.
        let mut sq = 0.0;
        for (i, &(wi, ai)) in kept.iter().enumerate() {
            sq += wi * wi * k2(0.0, 1.0) / h;
            for &(wj, aj) in &kept[..i] {
                sq += 2.0 * wi * wj * k2((ai - aj) / h, 1.0) / h;
            }
        }
        let fit: f64 = kept.iter().map(|&(w, a)| w * kernel_h(v[t + 1] - a, h)).sum();
        total += sq / (den * den) - 2.0 * fit / den;
    }
    if 2 * empty > n {
        return f64::INFINITY;
    }
    total / n as f64
}

/// Cross-validated bandwidth: the minimizer of [`cv_criterion`] over `h_grid`.
pub fn cv_select(path: &ObservedPath, h_grid: &[f64]) -> Result<f64> {
    if h_grid.is_empty() {
        return Err(Error::InvalidInput("empty bandwidth grid".into()));
    }
    if path.n() < 20 {
        return Err(Error::InvalidInput(format!("cross-validation needs n >= 20, got {}", path.n())));
    }
    if let Some(h) = h_grid.iter().find(|h| !(**h > 0.0)) {
        return Err(Error::InvalidInput(format!("bandwidths must be positive, got {h}")));
    }
    let scores: Vec<f64> = h_grid.par_iter().map(|&h| cv_criterion(path, h)).collect();
    h_grid
        .iter()
        .zip(&scores)
        .filter(|(_, s)| s.is_finite())
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(&h, _)| h)
        .ok_or_else(|| Error::Numerical("cross-validation criterion is not finite on the grid".into()))
}

/// Geometric grid of `m` bandwidths from `lo` to `hi`.
pub fn geometric_grid(lo: f64, hi: f64, m: usize) -> Vec<f64> {
    if m == 1 {
        return vec![lo];
    }
    let r = (hi / lo).powf(1.0 / (m - 1) as f64);
    (0..m).map(|i| lo * r.powi(i as i32)).collect()
}

/// Default CV search grid around the Scott bandwidth.
pub fn default_cv_grid(path: &ObservedPath) -> Result<Vec<f64>> {
    let h = scott_rule(path)?;
    Ok(geometric_grid(0.2 * h, 2.0 * h, 40))
}

/// Increasing set of bandwidths `h_1 < … < h_J`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandwidthSet {
    values: Vec<f64>,
    /// `h_k/h_{k+1}` for geometric sets; the geometric-mean ratio
    /// `(h_1/h_J)^{1/(J−1)}` otherwise (1 when `J = 1`).
    ratio: f64,
    geometric: bool,
}

/// How the anchor bandwidth is placed in the set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SetScheme {
    /// Anchor at position 2, in the lower range of the set.
    CvLowerRange,
    /// Anchor at position 3.
    RefThirdSmallest,
}

impl BandwidthSet {
    /// Geometric set with the anchor at 1-based position `pos` (clamped to `J`).
    pub fn around(anchor: f64, pos: usize, j: usize, a: f64) -> Result<Self> {
        if !(anchor > 0.0) || j == 0 {
            return Err(Error::InvalidInput(format!("need anchor > 0 and J >= 1, got {anchor}, {j}")));
        }
        if j == 1 {
            return Ok(BandwidthSet { values: vec![anchor], ratio: 1.0, geometric: true });
        }
        if !(a > 0.0 && a < 1.0) {
            return Err(Error::InvalidInput(format!("ratio a must lie in (0, 1), got {a}")));
        }
        let pos = pos.clamp(1, j) as i32;
        let values = (1..=j as i32).map(|k| anchor * a.powi(pos - k)).collect();
        Ok(BandwidthSet { values, ratio: a, geometric: true })
    }

    pub fn build(anchor: f64, scheme: SetScheme, j: usize, a: f64) -> Result<Self> {
        match scheme {
            SetScheme::CvLowerRange => Self::around(anchor, 2, j, a),
            SetScheme::RefThirdSmallest => Self::around(anchor, 3, j, a),
        }
    }

    /// Geometric set from its endpoints: `a = (h_1/h_J)^{1/(J−1)}`.
    pub fn endpoints(h1: f64, hj: f64, j: usize) -> Result<Self> {
        if j == 1 {
            if h1 != hj {
                return Err(Error::InvalidInput("J = 1 needs h_1 = h_J".into()));
            }
            return Self::around(h1, 1, 1, 0.5);
        }
        if !(h1 > 0.0 && hj > h1) {
            return Err(Error::InvalidInput(format!("need 0 < h_1 < h_J, got {h1}, {hj}")));
        }
        let a = (h1 / hj).powf(1.0 / (j - 1) as f64);
        let mut set = Self::around(h1, 1, j, a)?;
        *set.values.last_mut().unwrap() = hj;
        Ok(set)
    }

    /// Set given verbatim; need not be geometric.
    pub fn explicit(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidInput("empty bandwidth set".into()));
        }
        if values.iter().any(|h| !(*h > 0.0 && h.is_finite())) || values.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidInput(format!("bandwidths must be positive and increasing, got {values:?}")));
        }
        let j = values.len();
        let ratio = if j == 1 {
            1.0
        } else {
            (values[0] / values[j - 1]).powf(1.0 / (j - 1) as f64)
        };
        let geometric = values.windows(2).all(|w| (w[0] / w[1] - ratio).abs() <= 1e-12);
        Ok(BandwidthSet { values: values.to_vec(), ratio, geometric })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn ratio(&self) -> f64 {
        self.ratio
    }

    pub fn is_geometric(&self) -> bool {
        self.geometric
    }
}

/// Fixed bandwidth sets of the simulation designs, as printed.
pub mod presets {
    pub const VASICEK_M2_125: [f64; 6] = [0.030, 0.032, 0.034, 0.036, 0.0386, 0.041];
    pub const VASICEK_M2_250: [f64; 6] = [0.022, 0.023, 0.024, 0.026, 0.0269, 0.0284];
    pub const VASICEK_M2_500: [f64; 6] = [0.02, 0.021, 0.022, 0.023, 0.0245, 0.0258];
    pub const VASICEK_0_125: [f64; 6] = [0.016, 0.017, 0.019, 0.020, 0.022, 0.024];
    pub const VASICEK_0_250: [f64; 6] = [0.014, 0.015, 0.017, 0.018, 0.02, 0.022];
    pub const VASICEK_0_500: [f64; 6] = [0.01, 0.011, 0.012, 0.013, 0.015, 0.016];
    pub const VASICEK_2_125: [f64; 6] = [0.008, 0.009, 0.010, 0.011, 0.013, 0.014];
    pub const VASICEK_2_250: [f64; 6] = [0.006, 0.007, 0.008, 0.009, 0.01, 0.011];
    pub const VASICEK_2_500: [f64; 6] = [0.004, 0.005, 0.0054, 0.0063, 0.0074, 0.0086];
    pub const CIR_0_125: [f64; 6] = [0.022, 0.025, 0.029, 0.033, 0.038, 0.044];
    pub const CIR_0_250: [f64; 6] = [0.018, 0.021, 0.024, 0.028, 0.032, 0.037];
    pub const CIR_0_500: [f64; 6] = [0.016, 0.018, 0.021, 0.024, 0.027, 0.031];
    pub const CIR_1_125: [f64; 6] = [0.017, 0.02, 0.022, 0.026, 0.03, 0.035];
    pub const CIR_1_250: [f64; 6] = [0.014, 0.016, 0.018, 0.021, 0.024, 0.028];
    pub const CIR_1_500: [f64; 6] = [0.012, 0.014, 0.016, 0.018, 0.021, 0.024];
    pub const CIR_2_125: [f64; 6] = [0.012, 0.014, 0.016, 0.018, 0.021, 0.024];
    pub const CIR_2_250: [f64; 6] = [0.01, 0.012, 0.013, 0.015, 0.017, 0.02];
    pub const CIR_2_500: [f64; 6] = [0.008, 0.009, 0.011, 0.012, 0.014, 0.016];
    pub const POWER_125: [f64; 5] = [0.0199, 0.0219, 0.0241, 0.0265, 0.0291];
    pub const POWER_250: [f64; 5] = [0.0141, 0.0158, 0.0177, 0.0199, 0.0223];
    pub const POWER_500: [f64; 5] = [0.0113, 0.0126, 0.0141, 0.0157, 0.0175];
    /// Case study: `J = 7` from 0.007 to 0.020.
    pub const CASE_STUDY_ENDPOINTS: (f64, f64, usize) = (0.007, 0.020, 7);
}
