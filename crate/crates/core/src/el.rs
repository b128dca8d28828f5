//! Local empirical-likelihood ratios and the global statistics built from them.
//!
//! At a point `(x, y)` the deviations are
//! `T_t = K_h(x − X_t)K_h(y − X_{t+1}) − p̃(x, y)` for the `n` pairs, where
//! `p̃(x, y)` is the joint smoothed parametric density. Only pairs inside the
//! kernel window have a nonzero product; the rest share `T_t = −p̃(x, y)`,
//! which the solvers handle as one repeated value.

use nalgebra::{DMatrix, SymmetricEigen};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::kernel::{nu, ParamMatrix, PathIndex, WeightKind, R_K};
use crate::model::{DiffusionModel, ObservedPath, ParamVector};
use crate::numerics::Rng;
use crate::region::{GridPoint, Region};

/// Local ratio used inside `N(h)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum Variant {
    El,
    #[default]
    Lsel,
}

/// How `N(h)` integrates the local ratios.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum Mode {
    /// Riemann sum over a midpoint grid of the region, uniform weight.
    #[default]
    GridIntegral,
    /// Average of the local ratios over the observed pairs inside the region.
    DataAverage,
}

impl std::str::FromStr for Variant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "el" => Ok(Variant::El),
            "lsel" => Ok(Variant::Lsel),
            _ => Err(Error::InvalidInput(format!("unknown variant '{s}' (expected el or lsel)"))),
        }
    }
}

impl std::str::FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "grid" | "gridintegral" => Ok(Mode::GridIntegral),
            "data" | "dataaverage" => Ok(Mode::DataAverage),
            _ => Err(Error::InvalidInput(format!("unknown mode '{s}' (expected grid or data)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalELResult {
    pub lambda: f64,
    pub ratio: f64,
    /// All `1 + λT_t > 0`.
    pub weights_ok: bool,
    /// `Σ T_t/(1 + λT_t)` at the returned `λ`.
    pub constraint_residual: f64,
}

/// Deviations as a list of distinct values plus one value repeated `count` times.
#[derive(Debug, Clone, Copy)]
struct Deviations<'a> {
    distinct: &'a [f64],
    repeated: f64,
    count: usize,
    /// `|target|` when the deviations were formed as `value − target`.
    offset: f64,
}

impl Deviations<'_> {
    fn n(&self) -> usize {
        self.distinct.len() + self.count
    }

    fn fold(&self, f: impl Fn(f64) -> f64) -> f64 {
        let mut s: f64 = self.distinct.iter().map(|&t| f(t)).sum();
        if self.count > 0 {
            s += self.count as f64 * f(self.repeated);
        }
        s
    }

    fn extremes(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for &t in self.distinct {
            lo = lo.min(t);
            hi = hi.max(t);
        }
        if self.count > 0 {
            lo = lo.min(self.repeated);
            hi = hi.max(self.repeated);
        }
        (lo, hi)
    }

    /// `Σ T_t` together with the scale of its rounding error.
    fn sum_and_scale(&self) -> (f64, f64) {
        (self.fold(|t| t), self.fold(|t| t.abs() + self.offset))
    }
}

/// True when `Σ T_t` is zero up to rounding.
fn balanced(sum: f64, abs_sum: f64, n: usize) -> bool {
    sum.abs() <= 4.0 * f64::EPSILON * abs_sum * (n as f64).sqrt().max(1.0)
}

fn solve_el(d: Deviations<'_>) -> Result<LocalELResult> {
    let n = d.n();
    let (sum, abs_sum) = d.sum_and_scale();
    if abs_sum == 0.0 || balanced(sum, abs_sum, n) {
        return Ok(LocalELResult { lambda: 0.0, ratio: 0.0, weights_ok: true, constraint_residual: sum });
    }
    let (lo_t, hi_t) = d.extremes();
    if !(lo_t < 0.0 && hi_t > 0.0) {
        return Err(Error::ConvexHull);
    }
    // g(λ) = Σ T/(1 + λT) decreases on (−1/max T, −1/min T).
    let eval = |lam: f64| -> (f64, f64, f64) {
        let mut g = 0.0;
        let mut dg = 0.0;
        let mut scale = 0.0;
        let mut acc = |t: f64, m: f64| {
            let r = t / (1.0 + lam * t);
            g += m * r;
            dg -= m * r * r;
            scale += m * r.abs();
        };
        for &t in d.distinct {
            acc(t, 1.0);
        }
        if d.count > 0 {
            acc(d.repeated, d.count as f64);
        }
        (g, dg, scale)
    };
    let (mut a, mut b) = if sum > 0.0 { (0.0, -1.0 / lo_t) } else { (-1.0 / hi_t, 0.0) };
    let mut lam = 0.0;
    let mut g = sum;
    for _ in 0..500 {
        let (gv, dg, scale) = eval(lam);
        g = gv;
        if g.abs() <= 2.0 * f64::EPSILON * scale * (n as f64).sqrt() {
            break;
        }
        if g > 0.0 {
            a = lam;
        } else {
            b = lam;
        }
        let mut next = lam - g / dg;
        if !(next > a && next < b) {
            next = 0.5 * (a + b);
        }
        if next == lam || b - a <= f64::EPSILON * a.abs().max(b.abs()) {
            break;
        }
        lam = next;
    }
    let weights_ok = d.fold(|t| if 1.0 + lam * t > 0.0 { 0.0 } else { 1.0 }) == 0.0;
    if !weights_ok {
        return Err(Error::ConvexHull);
    }
    let ratio = 2.0 * d.fold(|t| (lam * t).ln_1p());
    Ok(LocalELResult { lambda: lam, ratio: ratio.max(0.0), weights_ok, constraint_residual: g })
}

fn solve_lsel(d: Deviations<'_>) -> f64 {
    let (sum, abs_sum) = d.sum_and_scale();
    let s = d.fold(|t| t * t);
    if s == 0.0 || balanced(sum, abs_sum, d.n()) {
        return 0.0;
    }
    sum * sum / s
}

/// EL ratio `2Σ log(1 + λT_t)` for explicit deviations `T_t`.
pub fn el_from_deviations(t: &[f64]) -> Result<LocalELResult> {
    solve_el(Deviations { distinct: t, repeated: 0.0, count: 0, offset: 0.0 })
}

/// LSEL ratio `T²/S` with `T = ΣT_t`, `S = ΣT_t²`; zero when `S = 0`.
pub fn lsel_from_deviations(t: &[f64]) -> f64 {
    solve_lsel(Deviations { distinct: t, repeated: 0.0, count: 0, offset: 0.0 })
}

/// EL weights `q_t = n^{-1}(1 + λT_t)^{-1}`.
pub fn el_weights(t: &[f64], lambda: f64) -> Vec<f64> {
    let n = t.len() as f64;
    t.iter().map(|&v| 1.0 / (n * (1.0 + lambda * v))).collect()
}

fn path_products(values: &[f64], h: f64, x: f64, y: f64) -> (Vec<f64>, usize) {
    let index = PathIndex::new(values);
    let mut kk = Vec::new();
    index.pair_products(x, y, h, &mut kk);
    (kk, index.pairs())
}

fn shifted(kk: &[f64], target: f64) -> Vec<f64> {
    kk.iter().map(|&k| k - target).collect()
}

/// Local EL ratio at `(x, y)` for the joint-density target `target`.
pub fn el_ratio(values: &[f64], h: f64, target: f64, x: f64, y: f64) -> Result<LocalELResult> {
    let (kk, n) = path_products(values, h, x, y);
    let t = shifted(&kk, target);
    solve_el(Deviations { distinct: &t, repeated: -target, count: n - kk.len(), offset: target.abs() })
}

/// Local LSEL ratio at `(x, y)` for the joint-density target `target`.
pub fn lsel_ratio(values: &[f64], h: f64, target: f64, x: f64, y: f64) -> f64 {
    let (kk, n) = path_products(values, h, x, y);
    let t = shifted(&kk, target);
    solve_lsel(Deviations { distinct: &t, repeated: -target, count: n - kk.len(), offset: target.abs() })
}

/// Value used for a local EL ratio whose target lies outside the convex hull.
pub fn hull_cap(n: usize) -> f64 {
    let n = n as f64;
    2.0 * n * n.ln()
}

/// `L_n = max_k (N(h_k) − 1)/(√2 h_k)`.
pub fn l_n(per_h: &[(f64, f64)]) -> Result<f64> {
    if per_h.is_empty() {
        return Err(Error::InvalidInput("empty bandwidth list".into()));
    }
    if let Some((h, _)) = per_h.iter().find(|(h, _)| !(*h > 0.0)) {
        return Err(Error::InvalidInput(format!("bandwidths must be positive, got {h}")));
    }
    Ok(per_h.iter().map(|&(h, n)| standardize(h, n)).fold(f64::NEG_INFINITY, f64::max))
}

/// `(N(h) − 1)/(√2 h)`.
#[inline]
pub fn standardize(h: f64, n_h: f64) -> f64 {
    (n_h - 1.0) / (std::f64::consts::SQRT_2 * h)
}

/// Resolution of the Riemann-sum grid in rotated coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridSpec {
    pub m_u: usize,
    pub m_v: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec { m_u: 40, m_v: 40 }
    }
}

/// Everything `N(h)` needs besides the data, θ and the bandwidths.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StatSettings {
    pub region: Region,
    pub grid: GridSpec,
    pub variant: Variant,
    pub mode: Mode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandwidthStat {
    pub h: f64,
    pub n_h: f64,
    pub standardized: f64,
    pub hull_errors: usize,
    pub ll_fallbacks: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestStatistics {
    pub per_h: Vec<BandwidthStat>,
    pub l_n: f64,
    pub mode: Mode,
    pub variant: Variant,
}

impl TestStatistics {
    pub fn standardized(&self) -> Vec<f64> {
        self.per_h.iter().map(|b| b.standardized).collect()
    }

    pub fn hull_errors(&self) -> usize {
        self.per_h.iter().map(|b| b.hull_errors).sum()
    }

    /// CSV with one row per bandwidth.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("h,N_h,standardized,hull_error_count\n");
        for b in &self.per_h {
            s.push_str(&format!("{},{},{},{}\n", b.h, b.n_h, b.standardized, b.hull_errors));
        }
        s
    }
}

/// Evaluation points with their weight times cell area.
fn evaluation_points(values: &[f64], settings: &StatSettings) -> Result<Vec<(f64, f64, f64)>> {
    let region = &settings.region;
    if region.is_empty() {
        return Err(Error::InvalidInput("integration region is empty".into()));
    }
    let w = 1.0 / region.area();
    Ok(match settings.mode {
        Mode::GridIntegral => region
            .grid(settings.grid.m_u, settings.grid.m_v)?
            .into_iter()
            .map(|GridPoint { x, y, area }| (x, y, w * area))
            .collect(),
        Mode::DataAverage => {
            let inside: Vec<(f64, f64)> =
                values.windows(2).filter(|p| region.contains(p[0], p[1])).map(|p| (p[0], p[1])).collect();
            let m = inside.len() as f64;
            inside.into_iter().map(|(x, y)| (x, y, 1.0 / m)).collect()
        }
    })
}

/// `N(h)` from a prepared index and density matrix. `points` holds
/// `(x, y, ω·ΔA)` triples.
pub fn n_of_h_prepared(
    index: &PathIndex,
    p: &ParamMatrix,
    h: f64,
    points: &[(f64, f64, f64)],
    variant: Variant,
) -> BandwidthStat {
    let mut weights = Vec::new();
    let mut ll_fallbacks = 0;
    let mut stat = n_of_h_with(index, h, points, variant, |x, y| {
        let (target, kind) = index.p_tilde_joint(x, y, h, p, &mut weights);
        if kind == WeightKind::NadarayaWatson {
            ll_fallbacks += 1;
        }
        target
    });
    stat.ll_fallbacks = ll_fallbacks;
    stat
}

/// `N(h)` for an arbitrary joint-density target at each point.
fn n_of_h_with(
    index: &PathIndex,
    h: f64,
    points: &[(f64, f64, f64)],
    variant: Variant,
    mut target_at: impl FnMut(f64, f64) -> f64,
) -> BandwidthStat {
    let n = index.pairs();
    let mut kk = Vec::new();
    let mut t = Vec::new();
    let mut total = 0.0;
    let mut hull_errors = 0;
    for &(x, y, w) in points {
        let target = target_at(x, y);
        index.pair_products(x, y, h, &mut kk);
        t.clear();
        t.extend(kk.iter().map(|&k| k - target));
        let d = Deviations { distinct: &t, repeated: -target, count: n - kk.len(), offset: target.abs() };
        let ell = match variant {
            Variant::Lsel => solve_lsel(d),
            Variant::El => match solve_el(d) {
                Ok(r) => r.ratio,
                Err(_) => {
                    hull_errors += 1;
                    hull_cap(n)
                }
            },
        };
        total += ell * w;
    }
    BandwidthStat { h, n_h: total, standardized: standardize(h, total), hull_errors, ll_fallbacks: 0 }
}

/// Computes `N(h)` for every bandwidth and the maximum statistic `L_n`.
pub fn compute_statistics(
    path: &ObservedPath,
    model: &DiffusionModel,
    theta: &ParamVector,
    bandwidths: &[f64],
    settings: &StatSettings,
) -> Result<TestStatistics> {
    if bandwidths.is_empty() {
        return Err(Error::InvalidInput("empty bandwidth set".into()));
    }
    let values = path.values();
    let index = PathIndex::new(values);
    let p = ParamMatrix::from_model(model, theta, values, path.delta())?;
    let points = evaluation_points(values, settings)?;
    let per_h: Vec<BandwidthStat> =
        bandwidths.iter().map(|&h| n_of_h_prepared(&index, &p, h, &points, settings.variant)).collect();
    let pairs: Vec<(f64, f64)> = per_h.iter().map(|b| (b.h, b.n_h)).collect();
    let l = l_n(&pairs)?;
    if !l.is_finite() {
        return Err(Error::Numerical("test statistic is not finite".into()));
    }
    Ok(TestStatistics { per_h, l_n: l, mode: settings.mode, variant: settings.variant })
}

/// `N(h)` by the grid Riemann sum with uniform weight on the region.
pub fn n_of_h_grid(
    path: &ObservedPath,
    h: f64,
    theta: &ParamVector,
    model: &DiffusionModel,
    region: &Region,
    grid: GridSpec,
    variant: Variant,
) -> Result<f64> {
    let s = StatSettings { region: *region, grid, variant, mode: Mode::GridIntegral };
    Ok(compute_statistics(path, model, theta, &[h], &s)?.per_h[0].n_h)
}

/// `N(h)` as the average of the local ratios over observed pairs inside the region.
/// Zero when no pair falls inside.
pub fn n_of_h_data(
    path: &ObservedPath,
    h: f64,
    theta: &ParamVector,
    model: &DiffusionModel,
    region: &Region,
    variant: Variant,
) -> Result<f64> {
    let s = StatSettings { region: *region, grid: GridSpec::default(), variant, mode: Mode::DataAverage };
    Ok(compute_statistics(path, model, theta, &[h], &s)?.per_h[0].n_h)
}

/// Reference distribution of `L_n` from the limit theorem:
/// `max_k Z_k` with `Z ~ N(β 1_J, Σ_J)`.
#[derive(Debug, Clone)]
pub struct AsymptoticRef {
    pub bandwidths: Vec<f64>,
    /// Plug-in `β̂_k = (√2 R(K))^{-1} Σ p̂(x,y)/π̂(y) ω ΔA` per bandwidth.
    pub beta: Vec<f64>,
    /// Same with the `1/R(K)` normalization.
    pub beta_unscaled: Vec<f64>,
    /// `Σ_J`, row-major `J × J`.
    pub sigma: Vec<f64>,
    /// Sorted Monte Carlo draws of `max_k Z_k` (may be empty).
    pub max_draws: Vec<f64>,
}

impl AsymptoticRef {
    pub fn j(&self) -> usize {
        self.bandwidths.len()
    }

    pub fn sigma_at(&self, i: usize, k: usize) -> f64 {
        self.sigma[i * self.j() + k]
    }

    /// Critical value of the single-bandwidth test at bandwidth `k`.
    pub fn single_critical(&self, k: usize, alpha: f64) -> f64 {
        let z = Normal::new(0.0, 1.0).expect("standard normal").inverse_cdf(1.0 - alpha);
        self.beta[k] + z * self.sigma_at(k, k).sqrt()
    }

    /// `p`-quantile of `max_k Z_k` from the stored draws.
    pub fn max_quantile(&self, p: f64) -> Option<f64> {
        if self.max_draws.is_empty() {
            return None;
        }
        let m = self.max_draws.len();
        let i = ((p * m as f64).ceil() as usize).clamp(1, m) - 1;
        Some(self.max_draws[i])
    }
}

/// `Σ_J` entries `(2/R⁴) ∬ω² ν(t)` with `t = h_j/h_i` taken for `i ≤ j`
/// and mirrored, so `t ≥ 1` throughout.
pub fn sigma_j(bandwidths: &[f64], region: &Region) -> Vec<f64> {
    let j = bandwidths.len();
    let c = 2.0 / R_K.powi(4) * region.weight_square_integral();
    let mut s = vec![0.0; j * j];
    for a in 0..j {
        for b in a..j {
            let (lo, hi) = if bandwidths[a] <= bandwidths[b] {
                (bandwidths[a], bandwidths[b])
            } else {
                (bandwidths[b], bandwidths[a])
            };
            let v = c * nu(hi / lo);
            s[a * j + b] = v;
            s[b * j + a] = v;
        }
    }
    s
}

/// Plug-in reference quantities and `draws` Monte Carlo draws of `max_k Z_k`.
pub fn asymptotic_ref(
    path: &ObservedPath,
    bandwidths: &[f64],
    region: &Region,
    grid: GridSpec,
    draws: usize,
    rng: &mut Rng,
) -> Result<AsymptoticRef> {
    if bandwidths.is_empty() {
        return Err(Error::InvalidInput("empty bandwidth set".into()));
    }
    let index = PathIndex::new(path.values());
    let points = region.grid(grid.m_u, grid.m_v)?;
    let w = 1.0 / region.area();
    let mut beta = Vec::with_capacity(bandwidths.len());
    for &h in bandwidths {
        let mut acc = 0.0;
        for p in &points {
            let pi_y = index.pi_hat(p.y, h);
            if pi_y > 0.0 {
                acc += index.joint_hat(p.x, p.y, h) / pi_y * w * p.area;
            }
        }
        beta.push(acc / R_K);
    }
    let beta_unscaled = beta.clone();
    let beta: Vec<f64> = beta.iter().map(|b| b / std::f64::consts::SQRT_2).collect();
    let sigma = sigma_j(bandwidths, region);
    let j = bandwidths.len();

    let mut max_draws = Vec::with_capacity(draws);
    if draws > 0 {
        let eig = SymmetricEigen::new(DMatrix::from_row_slice(j, j, &sigma));
        let root = DMatrix::from_fn(j, j, |r, c| eig.eigenvectors[(r, c)] * eig.eigenvalues[c].max(1e-12).sqrt());
        let mut g = vec![0.0; j];
        for _ in 0..draws {
            for v in g.iter_mut() {
                *v = StandardNormal.sample(rng);
            }
            let mut m = f64::NEG_INFINITY;
            for r in 0..j {
                let z = beta[r] + (0..j).map(|c| root[(r, c)] * g[c]).sum::<f64>();
                m = m.max(z);
            }
            max_draws.push(m);
        }
        max_draws.sort_by(f64::total_cmp);
    }
    Ok(AsymptoticRef { bandwidths: bandwidths.to_vec(), beta, beta_unscaled, sigma, max_draws })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{k4_zero, kernel_h};
    use crate::model::presets;
    use crate::numerics::stream;

    /// Independent bisection for λ on the open hull interval.
    fn bisect_lambda(t: &[f64]) -> f64 {
        let g = |l: f64| t.iter().map(|&v| v / (1.0 + l * v)).sum::<f64>();
        let hi_t = t.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lo_t = t.iter().cloned().fold(f64::INFINITY, f64::min);
        let (mut a, mut b) = (-1.0 / hi_t, -1.0 / lo_t);
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            if g(m) > 0.0 {
                a = m;
            } else {
                b = m;
            }
        }
        0.5 * (a + b)
    }

    #[test]
    fn balanced_deviations_give_zero() {
        let r = el_from_deviations(&[0.5, -0.3, -0.2]).unwrap();
        assert_eq!(r.lambda, 0.0);
        assert_eq!(r.ratio, 0.0);
        assert_eq!(lsel_from_deviations(&[0.0, 0.0]), 0.0);
    }

    #[test]
    fn three_point_el_matches_bisection() {
        let t = [1.0, -0.5, -0.2];
        let r = el_from_deviations(&t).unwrap();
        let lam = bisect_lambda(&t);
        assert!((r.lambda - lam).abs() < 1e-12);
        let ratio: f64 = 2.0 * t.iter().map(|&v| (1.0 + lam * v).ln()).sum::<f64>();
        assert!((r.ratio - ratio).abs() < 1e-12);
        let q = el_weights(&t, r.lambda);
        assert!((q.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(q.iter().all(|&v| v > 0.0));
    }

    #[test]
    fn lsel_arithmetic() {
        assert!((lsel_from_deviations(&[1.0, 2.0, 3.0]) - 36.0 / 14.0).abs() < 1e-15);
    }

    #[test]
    fn hull_violation() {
        assert!(matches!(el_from_deviations(&[1.0, 2.0, 0.5]), Err(Error::ConvexHull)));
        assert!(matches!(el_from_deviations(&[-1.0, -2.0]), Err(Error::ConvexHull)));
    }

    #[test]
    fn kernel_value_target_gives_zero() {
        let v: Vec<f64> = (0..50).map(|i| 0.1 + 0.02 * (i as f64 * 0.9).sin()).collect();
        let (x, y, h) = (v[10], v[11], 0.01);
        let n = (v.len() - 1) as f64;
        let kernel_value: f64 = v.windows(2).map(|w| kernel_h(x - w[0], h) * kernel_h(y - w[1], h)).sum::<f64>() / n;
        assert!(kernel_value > 0.0);
        let r = el_ratio(&v, h, kernel_value, x, y).unwrap();
        assert_eq!(r.ratio, 0.0);
        assert_eq!(lsel_ratio(&v, h, kernel_value, x, y), 0.0);
        // Away from the kernel value both are positive.
        assert!(el_ratio(&v, h, 0.9 * kernel_value, x, y).unwrap().ratio > 0.0);
        assert!(lsel_ratio(&v, h, 0.9 * kernel_value, x, y) > 0.0);
    }

    #[test]
    fn l_n_values() {
        assert_eq!(l_n(&[(0.01, 1.0), (0.02, 1.0)]).unwrap(), 0.0);
        assert!((l_n(&[(0.01, 1.1)]).unwrap() - 7.0710678).abs() < 1e-6);
        assert!(l_n(&[]).is_err());
        let a = l_n(&[(0.01, 1.3), (0.02, 1.5), (0.03, 0.9)]).unwrap();
        let b = l_n(&[(0.03, 0.9), (0.01, 1.3), (0.02, 1.5)]).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn sigma_single_and_limit() {
        let r = Region::new(0.03, 0.22, -0.02, 0.02).unwrap();
        let s = sigma_j(&[0.02], &r);
        let expect = 2.0 / R_K.powi(4) / r.area() * k4_zero().powi(2);
        assert!((s[0] - expect).abs() < 1e-9 * expect);
        let s = sigma_j(&[0.02, 0.02 * (1.0 + 1e-9)], &r);
        assert!((s[1] - s[0]).abs() < 1e-6 * s[0]);
    }

    #[test]
    fn n_of_h_zero_at_kernel_targets_and_linear_in_weight() {
        let m = DiffusionModel::vasicek();
        let th = m.params(&presets::VASICEK_0).unwrap();
        let mut rng = stream(12, &[]);
        let x0 = crate::model::sample_stationary(&m, &th, &mut rng).unwrap();
        let path = crate::model::simulate_path(&m, &th, 250, presets::MONTHLY, x0, &mut rng).unwrap();
        let index = PathIndex::new(path.values());
        let p = ParamMatrix::from_model(&m, &th, path.values(), path.delta()).unwrap();
        let region = crate::region::presets::VASICEK_0;
        let pts: Vec<(f64, f64, f64)> =
            region.grid(20, 20).unwrap().iter().map(|g| (g.x, g.y, g.area / region.area())).collect();
        let a = n_of_h_prepared(&index, &p, 0.02, &pts, Variant::Lsel);
        let doubled: Vec<(f64, f64, f64)> = pts.iter().map(|&(x, y, w)| (x, y, 2.0 * w)).collect();
        let b = n_of_h_prepared(&index, &p, 0.02, &doubled, Variant::Lsel);
        assert!((b.n_h - 2.0 * a.n_h).abs() < 1e-12 * a.n_h.abs().max(1.0));
        assert!(a.n_h >= 0.0);
        for variant in [Variant::El, Variant::Lsel] {
            let zero = n_of_h_with(&index, 0.02, &pts, variant, |x, y| index.joint_hat(x, y, 0.02));
            assert_eq!(zero.n_h, 0.0);
        }
    }
}
