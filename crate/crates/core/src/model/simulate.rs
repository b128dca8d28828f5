use rand_distr::{Distribution, Gamma, Poisson, StandardNormal};

use super::{DiffusionModel, Family, ObservedPath, ParamVector, StationaryLaw};
use crate::error::{Error, Result};
use crate::numerics::Rng;

/// Positivity floor for Euler simulation of positive-state families.
pub const STATE_FLOOR: f64 = 1e-7;

/// Simulates `n` transitions at spacing `delta` starting from `x0`.
///
/// Vasicek uses the exact Gaussian AR(1) update, CIR the exact
/// Poisson-mixture noncentral χ² draw, and the remaining families
/// Euler–Maruyama with `model.sim_substeps` sub-steps, clamping at
/// [`STATE_FLOOR`] (the clamp count is kept in `floor_hits`).
pub fn simulate_path(
    model: &DiffusionModel,
    theta: &ParamVector,
    n: usize,
    delta: f64,
    x0: f64,
    rng: &mut Rng,
) -> Result<ObservedPath> {
    model.check_theta(theta)?;
    if n < 2 {
        return Err(Error::InvalidInput(format!("need n >= 2 transitions, got {n}")));
    }
    if !model.in_state_space(x0) {
        return Err(Error::Domain(format!("initial state {x0} outside the state space")));
    }
    if !(delta > 0.0) {
        return Err(Error::InvalidInput(format!("sampling interval must be positive, got {delta}")));
    }
    let th = theta.values();
    let mut values = Vec::with_capacity(n + 1);
    values.push(x0);
    let mut floor_hits = 0;
    match model.family {
        Family::Vasicek => {
            let e = (-th[0] * delta).exp();
            let sd = (th[2] * (-(-2.0 * th[0] * delta).exp_m1()) / (2.0 * th[0])).sqrt();
            let mut x = x0;
            for _ in 0..n {
                let z: f64 = StandardNormal.sample(rng);
                x = th[1] + (x - th[1]) * e + sd * z;
                values.push(x);
            }
        }
        Family::Cir => {
            let mut x = x0;
            for _ in 0..n {
                x = cir_step(x, delta, th[0], th[1], th[2], rng);
                values.push(x);
            }
        }
        _ => {
            let m = model.sim_substeps.max(1);
            let dt = delta / m as f64;
            let sq = dt.sqrt();
            let mut x = x0;
            for _ in 0..n {
                for _ in 0..m {
                    let z: f64 = StandardNormal.sample(rng);
                    x += model.drift_unchecked(x, th) * dt + model.diffusion_unchecked(x, th) * sq * z;
                    if !(x > STATE_FLOOR) {
                        x = STATE_FLOOR;
                        floor_hits += 1;
                    }
                }
                values.push(x);
            }
        }
    }
    let mut path = ObservedPath::new(values, delta)?;
    path.floor_hits = floor_hits;
    Ok(path)
}

/// One exact CIR transition: `2c·X_{t+Δ} ~ χ'²(4κα/σ², 2u)`, drawn as a
/// Poisson(u) mixture of central χ² (Gamma) variates.
pub(crate) fn cir_step(x: f64, delta: f64, kappa: f64, alpha: f64, s2: f64, rng: &mut Rng) -> f64 {
    let c = 2.0 * kappa / (s2 * (-(-kappa * delta).exp_m1()));
    let u = c * x * (-kappa * delta).exp();
    let df = 4.0 * kappa * alpha / s2;
    let k = if u > 0.0 {
        Poisson::new(u).expect("positive rate").sample(rng)
    } else {
        0.0
    };
    let y: f64 = Gamma::new(0.5 * df + k, 2.0).expect("positive shape").sample(rng);
    y / (2.0 * c)
}

/// Draws one state from the stationary law `π_θ`.
pub fn sample_stationary(model: &DiffusionModel, theta: &ParamVector, rng: &mut Rng) -> Result<f64> {
    Ok(StationaryLaw::new(model, theta)?.sample(rng))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::presets;
    use crate::numerics::stream;

    #[test]
    fn noiseless_vasicek_is_deterministic() {
        let m = DiffusionModel::vasicek();
        let th = m.params(&[0.8, 0.1, 0.0]).unwrap();
        let p = simulate_path(&m, &th, 20, 0.25, 0.3, &mut stream(1, &[])).unwrap();
        let e = (-0.8_f64 * 0.25).exp();
        for w in p.values().windows(2) {
            assert!((w[1] - (0.1 + (w[0] - 0.1) * e)).abs() < 1e-15);
        }
    }

    #[test]
    fn vasicek_ergodic_moments() {
        let m = DiffusionModel::vasicek();
        let th = m.params(&presets::VASICEK_0).unwrap();
        let mut rng = stream(11, &[]);
        let x0 = sample_stationary(&m, &th, &mut rng).unwrap();
        let p = simulate_path(&m, &th, 100_000, presets::MONTHLY, x0, &mut rng).unwrap();
        let v = p.values();
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let (k, a, s2) = (presets::VASICEK_0[0], presets::VASICEK_0[1], presets::VASICEK_0[2]);
        let stat_var = s2 / (2.0 * k);
        // AR(1) long-run standard error of the mean.
        let phi = (-k / 12.0).exp();
        let se = (stat_var / n * (1.0 + phi) / (1.0 - phi)).sqrt();
        assert!((mean - a).abs() < 3.0 * se, "mean {mean}, se {se}");
        assert!((var / stat_var - 1.0).abs() < 0.10, "var {var} vs {stat_var}");
    }

    #[test]
    fn cir_paths_stay_positive() {
        let (k, a, s2) = (presets::CIR_0[0], presets::CIR_0[1], presets::CIR_0[2]);
        assert!(2.0 * k * a > s2);
        let m = DiffusionModel::cir();
        let th = m.params(&presets::CIR_0).unwrap();
        let p = simulate_path(&m, &th, 20_000, presets::MONTHLY, 0.09, &mut stream(3, &[])).unwrap();
        assert!(p.values().iter().all(|&x| x > 0.0));
    }

    #[test]
    fn euler_families_respect_floor() {
        let m = DiffusionModel::new(Family::Cev);
        // Huge volatility forces excursions towards zero.
        let th = m.params(&[0.1, 0.05, 3.0, 0.5]).unwrap();
        let p = simulate_path(&m, &th, 500, 1.0, 0.05, &mut stream(5, &[])).unwrap();
        assert!(p.values().iter().all(|&x| x >= STATE_FLOOR));
        assert!(p.floor_hits > 0);
    }

    #[test]
    fn stationary_draws() {
        let m = DiffusionModel::vasicek();
        let th = m.params(&presets::VASICEK_0).unwrap();
        let mut rng = stream(8, &[]);
        let draws: Vec<f64> = (0..100_000).map(|_| sample_stationary(&m, &th, &mut rng).unwrap()).collect();
        let n = draws.len() as f64;
        let mean = draws.iter().sum::<f64>() / n;
        let var = draws.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let sv = presets::VASICEK_0[2] / (2.0 * presets::VASICEK_0[0]);
        assert!((mean - presets::VASICEK_0[1]).abs() < 4.0 * (sv / n).sqrt());
        assert!((var / sv - 1.0).abs() < 0.02);

        let c = DiffusionModel::cir();
        let th = c.params(&presets::CIR_0).unwrap();
        assert!((0..10_000).all(|_| sample_stationary(&c, &th, &mut rng).unwrap() > 0.0));
    }

    #[test]
    fn tabulated_sampler_matches_normal_sampler() {
        let m = DiffusionModel::vasicek();
        let th = m.params(&presets::VASICEK_0).unwrap();
        let exact = StationaryLaw::new(&m, &th).unwrap();
        let table = StationaryLaw::generic(&m, &th).unwrap();
        let mut rng = stream(21, &[]);
        let n = 20_000;
        let mut a: Vec<f64> = (0..n).map(|_| exact.sample(&mut rng)).collect();
        let mut b: Vec<f64> = (0..n).map(|_| table.sample(&mut rng)).collect();
        a.sort_by(f64::total_cmp);
        b.sort_by(f64::total_cmp);
        // Two-sample Kolmogorov–Smirnov statistic.
        let (mut i, mut j, mut d) = (0, 0, 0.0_f64);
        while i < n && j < n {
            if a[i] <= b[j] {
                i += 1;
            } else {
                j += 1;
            }
            d = d.max((i as f64 - j as f64).abs() / n as f64);
        }
        // c(0.01) = 1.628 for equal sample sizes.
        let crit = 1.628 * (2.0 / n as f64).sqrt();
        assert!(d < crit, "KS {d} >= {crit}");
    }
}
