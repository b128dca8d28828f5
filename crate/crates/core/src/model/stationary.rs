//! Stationary laws `π_θ(x) = ξ(θ)/σ²(x) · exp{∫_{x₀}^x 2μ/σ² dt}`.

use rand::Rng as _;
use rand_distr::{Distribution, Gamma, Normal};
use statrs::function::gamma::ln_gamma;

use super::{DiffusionModel, Family, ParamVector};
use crate::error::{Error, Result};
use crate::numerics::{integrate, Rng};

/// Log-density drop (relative to the peak) that delimits the tabulated support.
const TAIL_DROP: f64 = 45.0;
const TABLE_POINTS: usize = 4001;

/// Stationary law of a model under fixed θ.
#[derive(Debug, Clone)]
pub enum StationaryLaw {
    Normal { mean: f64, var: f64 },
    Gamma { shape: f64, rate: f64 },
    Generic(GenericLaw),
}

/// Numerically normalized stationary density with a tabulated CDF.
#[derive(Debug, Clone)]
pub struct GenericLaw {
    model: DiffusionModel,
    theta: Vec<f64>,
    anchor: f64,
    lo: f64,
    hi: f64,
    ln_norm: f64,
    grid: Vec<f64>,
    cdf: Vec<f64>,
}

impl StationaryLaw {
    /// Closed form for Vasicek and CIR, generic formula otherwise.
    pub fn new(model: &DiffusionModel, theta: &ParamVector) -> Result<Self> {
        model.check_theta(theta)?;
        let th = theta.values();
        match model.family {
            Family::Vasicek => {
                if !(th[2] > 0.0) {
                    return Err(Error::Domain("Vasicek stationary law needs sigma2 > 0".into()));
                }
                Ok(StationaryLaw::Normal {
                    mean: th[1],
                    var: th[2] / (2.0 * th[0]),
                })
            }
            Family::Cir => Ok(StationaryLaw::Gamma {
                shape: 2.0 * th[0] * th[1] / th[2],
                rate: 2.0 * th[0] / th[2],
            }),
            _ => Self::generic(model, theta),
        }
    }

    /// Always uses the generic route, including for Vasicek and CIR.
    pub fn generic(model: &DiffusionModel, theta: &ParamVector) -> Result<Self> {
        model.check_theta(theta)?;
        GenericLaw::build(model, theta.values()).map(StationaryLaw::Generic)
    }

    pub fn density(&self, x: f64) -> f64 {
        match self {
            StationaryLaw::Normal { mean, var } => {
                let d = x - mean;
                (-0.5 * d * d / var).exp() / (2.0 * std::f64::consts::PI * var).sqrt()
            }
            StationaryLaw::Gamma { shape, rate } => {
                if x <= 0.0 {
                    return 0.0;
                }
                (shape * rate.ln() - ln_gamma(*shape) + (shape - 1.0) * x.ln() - rate * x).exp()
            }
            StationaryLaw::Generic(g) => g.density(x),
        }
    }

    pub fn mean_and_variance(&self) -> (f64, f64) {
        match self {
            StationaryLaw::Normal { mean, var } => (*mean, *var),
            StationaryLaw::Gamma { shape, rate } => (shape / rate, shape / (rate * rate)),
            StationaryLaw::Generic(g) => {
                let m = integrate(|x| x * g.density(x), g.lo, g.hi, 1e-14, 1e-11);
                let v = integrate(|x| (x - m) * (x - m) * g.density(x), g.lo, g.hi, 1e-16, 1e-11);
                (m, v)
            }
        }
    }

    pub fn sample(&self, rng: &mut Rng) -> f64 {
        match self {
            StationaryLaw::Normal { mean, var } => Normal::new(*mean, var.sqrt()).expect("valid normal").sample(rng),
            StationaryLaw::Gamma { shape, rate } => Gamma::new(*shape, 1.0 / rate).expect("valid gamma").sample(rng),
            StationaryLaw::Generic(g) => g.sample_inverse_cdf(rng.random::<f64>()),
        }
    }
}

impl GenericLaw {
    fn build(model: &DiffusionModel, th: &[f64]) -> Result<Self> {
        let anchor = model.anchor(th);
        if !model.in_state_space(anchor) || !(model.diffusion2_unchecked(anchor, th) > 0.0) {
            return Err(Error::Domain(format!("stationary anchor {anchor} is not an interior state")));
        }
        let mut law = GenericLaw {
            model: *model,
            theta: th.to_vec(),
            anchor,
            lo: anchor,
            hi: anchor,
            ln_norm: 0.0,
            grid: Vec::new(),
            cdf: Vec::new(),
        };

        // Walk outwards until the unnormalized log density has dropped by
        // TAIL_DROP below the highest value seen.
        let peak0 = law.ln_unnormalized(anchor);
        let scale = model.diffusion_unchecked(anchor, th).max(1e-3 * anchor.abs().max(1e-3));
        let mut peak = peak0;
        let mut hi = anchor;
        let mut found_hi = false;
        for k in 0..200 {
            let x = anchor + scale * 0.01 * 1.5_f64.powi(k);
            let s = law.ln_unnormalized(x);
            if !s.is_nan() {
                peak = peak.max(s);
            }
            hi = x;
            if s.is_nan() || s < peak - TAIL_DROP {
                found_hi = true;
                break;
            }
        }
        let mut lo = anchor;
        let mut found_lo = false;
        for k in 0..200 {
            let x = if model.family.positive_state() {
                anchor * 0.9_f64.powi(k + 1)
            } else {
                anchor - scale * 0.01 * 1.5_f64.powi(k)
            };
            let s = if x > 0.0 || !model.family.positive_state() {
                law.ln_unnormalized(x)
            } else {
                f64::NEG_INFINITY
            };
            if !s.is_nan() {
                peak = peak.max(s);
            }
            lo = x;
            if s < peak - TAIL_DROP || (model.family.positive_state() && x < 1e-300) {
                found_lo = s < peak - TAIL_DROP;
                break;
            }
        }
        // Polynomial tails: the density behaves like x^p, which must satisfy
        // p < −1 at infinity and p > −1 at zero.
        let log_slope = |a: f64, b: f64| (law.ln_unnormalized(b) - law.ln_unnormalized(a)) / (b / a).ln();
        if found_hi && hi > 1e3 * anchor.abs().max(1.0) && log_slope(hi / 1.5, hi) > -1.05 {
            found_hi = false;
        }
        if found_lo && model.family.positive_state() && lo < 1e-3 * anchor && log_slope(lo, lo / 0.9) < -0.95 {
            found_lo = false;
        }
        if !found_hi || !found_lo {
            return Err(Error::NotStationary(format!(
                "{} density does not decay on ({lo:e}, {hi:e})",
                model.family
            )));
        }
        law.lo = lo;
        law.hi = hi;

        // Normalize on panels bounded by the table grid so the CDF table and
        // the normalizer come from the same quadrature.
        // Log-uniform for positive states, where tails are often polynomial.
        let n = TABLE_POINTS;
        let grid: Vec<f64> = if model.family.positive_state() {
            let (a, b) = (lo.ln(), hi.ln());
            (0..n).map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp()).collect()
        } else {
            (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
        };
        let mut cdf = Vec::with_capacity(n);
        cdf.push(0.0);
        let mut acc = 0.0;
        for w in grid.windows(2) {
            acc += integrate(|x| (law.ln_unnormalized(x) - peak).exp(), w[0], w[1], 1e-300, 1e-13);
            cdf.push(acc);
        }
        if !(acc.is_finite() && acc > 0.0) {
            return Err(Error::NotStationary(format!("{} normalizer is not finite", model.family)));
        }
        for c in cdf.iter_mut() {
            *c /= acc;
        }
        law.ln_norm = peak + acc.ln();
        law.grid = grid;
        law.cdf = cdf;
        Ok(law)
    }

    /// `−ln σ²(x) + ∫_{x₀}^x 2μ/σ² dt`.
    fn ln_unnormalized(&self, x: f64) -> f64 {
        let th = &self.theta;
        let s2 = self.model.diffusion2_unchecked(x, th);
        if !(s2 > 0.0) {
            return f64::NAN;
        }
        let g = |t: f64| 2.0 * self.model.drift_unchecked(t, th) / self.model.diffusion2_unchecked(t, th);
        // Panels of geometric width keep the quadrature accurate for
        // integrands that vary on the scale of x itself near zero.
        let exponent = if self.model.family.positive_state() {
            let (a, b, sign) = if x >= self.anchor { (self.anchor, x, 1.0) } else { (x, self.anchor, -1.0) };
            sign * integrate(|u| u.exp() * g(u.exp()), a.ln(), b.ln(), 1e-15, 1e-14)
        } else {
            integrate(g, self.anchor, x, 1e-15, 1e-14)
        };
        exponent - s2.ln()
    }

    pub fn density(&self, x: f64) -> f64 {
        if !self.model.in_state_space(x) || x < self.lo || x > self.hi {
            // Beyond the tabulated support the density is below e^{-60} of its peak.
            if self.model.in_state_space(x) {
                let s = self.ln_unnormalized(x);
                return if s.is_nan() { 0.0 } else { (s - self.ln_norm).exp() };
            }
            return 0.0;
        }
        (self.ln_unnormalized(x) - self.ln_norm).exp()
    }

    pub fn support(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    fn sample_inverse_cdf(&self, u: f64) -> f64 {
        let i = self.cdf.partition_point(|&c| c < u).clamp(1, self.cdf.len() - 1);
        let (c0, c1) = (self.cdf[i - 1], self.cdf[i]);
        let (x0, x1) = (self.grid[i - 1], self.grid[i]);
        if c1 > c0 {
            let w = (u - c0) / (c1 - c0);
            if self.model.family.positive_state() {
                (x0.ln() + (x1.ln() - x0.ln()) * w).exp()
            } else {
                x0 + (x1 - x0) * w
            }
        } else {
            x0
        }
    }
}

impl DiffusionModel {
    /// Stationary density `π_θ(x)`.
    pub fn stationary_density(&self, x: f64, theta: &ParamVector) -> Result<f64> {
        Ok(StationaryLaw::new(self, theta)?.density(x))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::presets;

    #[test]
    fn vasicek_closed_form_variance() {
        let m = DiffusionModel::vasicek();
        let th = m.params(&presets::VASICEK_0).unwrap();
        let (mean, var) = StationaryLaw::new(&m, &th).unwrap().mean_and_variance();
        assert_eq!(mean, presets::VASICEK_0[1]);
        assert!((var - 0.001_273_0).abs() < 1e-7);
    }

    #[test]
    fn generic_matches_closed_forms() {
        for (m, theta) in [
            (DiffusionModel::vasicek(), presets::VASICEK_0.to_vec()),
            (DiffusionModel::cir(), presets::CIR_0.to_vec()),
            (DiffusionModel::cir(), presets::CIR_2.to_vec()),
        ] {
            let th = m.params(&theta).unwrap();
            let exact = StationaryLaw::new(&m, &th).unwrap();
            let generic = StationaryLaw::generic(&m, &th).unwrap();
            let (mu, var) = exact.mean_and_variance();
            let sd = var.sqrt();
            // ±3.3 sd covers 99.9% of the mass.
            for i in 0..=200 {
                let x = mu - 3.3 * sd + 6.6 * sd * i as f64 / 200.0;
                if !m.in_state_space(x) {
                    continue;
                }
                let (a, b) = (exact.density(x), generic.density(x));
                assert!((a - b).abs() < 1e-8, "{:?} x={x}: {a} vs {b}", m.family);
            }
        }
    }

    #[test]
    fn every_family_normalizes() {
        let cases: Vec<(Family, Vec<f64>)> = vec![
            (Family::Vasicek, presets::VASICEK_0.to_vec()),
            (Family::Cir, presets::CIR_0.to_vec()),
            (Family::Icir, vec![0.9, 0.02, 0.2]),
            (Family::Cev, vec![0.9, 0.09, 0.5, 0.9]),
            (Family::NlDrift, vec![0.0004, -0.01, 0.2, -1.5, 0.8]),
        ];
        for (family, theta) in cases {
            let m = DiffusionModel::new(family);
            let th = m.params(&theta).unwrap();
            let law = StationaryLaw::generic(&m, &th).unwrap();
            let StationaryLaw::Generic(g) = &law else { unreachable!() };
            let (lo, hi) = g.support();
            let total = integrate(|x| law.density(x), lo, hi, 1e-14, 1e-12);
            assert!((total - 1.0).abs() < 1e-6, "{family:?}: {total}");
        }
    }

    #[test]
    fn icir_is_inverse_gamma() {
        // 1/X of this ICIR parameterization is CIR with mean level
        // a' = (2σ² − κα)/κ, the same κ and σ.
        let (k, a, s) = (0.9, 0.02, 0.2);
        let a_cir = (2.0 * s * s - k * a) / k;
        let m = DiffusionModel::new(Family::Icir);
        let th = m.params(&[k, a, s]).unwrap();
        let law = StationaryLaw::new(&m, &th).unwrap();
        let cir = StationaryLaw::Gamma {
            shape: 2.0 * k * a_cir / (s * s),
            rate: 2.0 * k / (s * s),
        };
        for &x in &[4.0, 8.0, 11.0, 20.0, 60.0] {
            let expect = cir.density(1.0 / x) / (x * x);
            assert!((law.density(x) - expect).abs() < 1e-8 * expect.max(1e-3), "x={x}: {} vs {expect}", law.density(x));
        }
    }

    #[test]
    fn non_stationary_is_rejected() {
        // σ² < κα: the ICIR drift is positive for large x and the tail is x^{-0.95}.
        let m = DiffusionModel::new(Family::Icir);
        let th = m.params(&[0.9, 0.09, 0.2]).unwrap();
        assert!(matches!(StationaryLaw::new(&m, &th), Err(Error::NotStationary(_))));

        // Positive quadratic drift pushes mass to infinity.
        let m = DiffusionModel::new(Family::NlDrift);
        let th = m.params(&[0.0, 0.1, 0.5, 2.0, 0.1]).unwrap();
        assert!(matches!(StationaryLaw::new(&m, &th), Err(Error::NotStationary(_))));
    }
}
