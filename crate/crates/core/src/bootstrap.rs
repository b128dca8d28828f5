//! Parametric bootstrap calibration of `L_n`: replicate paths from the
//! fitted null, refit, recompute the statistic, and read off the critical
//! value and p-value.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bandwidth::{cv_select, default_cv_grid, scott_rule, BandwidthSet, SetScheme};
use crate::el::{compute_statistics, StatSettings, TestStatistics};
use crate::error::{Error, Result};
use crate::model::{fit_mle, sample_stationary, simulate_path, DiffusionModel, FitResult, ObservedPath, ParamVector};
use crate::numerics::stream;

/// Largest tolerated fraction of skipped replicates.
pub const MAX_FAILURE_FRACTION: f64 = 0.10;

/// How the bandwidth set is obtained from a path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum BandwidthRule {
    /// The same set for every path.
    Fixed(BandwidthSet),
    /// Geometric set anchored at the Scott bandwidth.
    Scott { scheme: SetScheme, j: usize, a: f64 },
    /// Geometric set anchored at the cross-validated bandwidth.
    Cv { scheme: SetScheme, j: usize, a: f64 },
}

impl BandwidthRule {
    pub fn resolve(&self, path: &ObservedPath) -> Result<BandwidthSet> {
        match self {
            BandwidthRule::Fixed(set) => Ok(set.clone()),
            BandwidthRule::Scott { scheme, j, a } => BandwidthSet::build(scott_rule(path)?, *scheme, *j, *a),
            BandwidthRule::Cv { scheme, j, a } => {
                let h = cv_select(path, &default_cv_grid(path)?)?;
                BandwidthSet::build(h, *scheme, *j, *a)
            }
        }
    }

    pub fn is_data_driven(&self) -> bool {
        !matches!(self, BandwidthRule::Fixed(_))
    }
}

/// Bootstrap settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapConfig {
    /// Number of replicates `B`.
    pub b: usize,
    pub alpha: f64,
    /// Master seed; replicate `b` uses the stream `(seed, b, attempt)`.
    pub seed: u64,
    /// Reselect the bandwidth set on each replicate path. `None` picks
    /// reuse for a fixed rule and reselection for a data-driven one.
    pub reselect: Option<bool>,
}

impl BootstrapConfig {
    pub fn new(b: usize, alpha: f64, seed: u64) -> Self {
        BootstrapConfig { b, alpha, seed, reselect: None }
    }

    fn validate(&self) -> Result<()> {
        if self.b < 99 {
            return Err(Error::InvalidInput(format!("bootstrap needs B >= 99, got {}", self.b)));
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::InvalidInput(format!("alpha must lie in (0, 1], got {}", self.alpha)));
        }
        Ok(())
    }
}

/// One successful replicate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Replicate {
    pub index: usize,
    pub l_n: f64,
    /// Standardized `N(h_k)` per bandwidth position.
    pub standardized: Vec<f64>,
    pub theta: Vec<f64>,
    /// Whether the replicate needed its second draw.
    pub redrawn: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapResult {
    pub observed_l_n: f64,
    /// Sorted replicate statistics (length `B` effective).
    pub replicates: Vec<f64>,
    /// Replicates in index order.
    pub details: Vec<Replicate>,
    pub critical_value: f64,
    pub p_value: f64,
    pub alpha: f64,
    /// Requested number of replicates.
    pub b: usize,
    /// Replicates skipped after a failed redraw.
    pub per_replicate_fit_failures: usize,
    /// Replicates that succeeded on the redraw.
    pub redraws: usize,
    pub reject: bool,
}

impl BootstrapResult {
    pub fn b_effective(&self) -> usize {
        self.replicates.len()
    }

    /// Bootstrap critical value of the single-bandwidth test at position `k`.
    pub fn single_critical(&self, k: usize) -> f64 {
        let mut v: Vec<f64> = self.details.iter().map(|r| r.standardized[k]).collect();
        v.sort_by(f64::total_cmp);
        critical_value(&v, self.alpha)
    }

    /// Replicates as CSV: index, `L_n*`, then the standardized statistics.
    pub fn replicates_csv(&self) -> String {
        let j = self.details.first().map_or(0, |r| r.standardized.len());
        let mut s = String::from("replicate,l_n");
        for k in 1..=j {
            s.push_str(&format!(",stat_h{k}"));
        }
        s.push('\n');
        for r in &self.details {
            s.push_str(&format!("{},{}", r.index, r.l_n));
            for v in &r.standardized {
                s.push_str(&format!(",{v}"));
            }
            s.push('\n');
        }
        s
    }
}

/// `(1 + #{b : L*_b ≥ observed})/(B + 1)`.
pub fn p_value(observed: f64, replicates: &[f64]) -> Result<f64> {
    if replicates.is_empty() {
        return Err(Error::InvalidInput("no bootstrap replicates".into()));
    }
    let count = replicates.iter().filter(|&&r| r >= observed).count();
    Ok((1 + count) as f64 / (replicates.len() + 1) as f64)
}

/// Order statistic `⌊B(1 − α)⌋ + 1` (1-based) of the sorted replicates.
/// For `α = 1` the test always rejects, so the critical value is `−∞`.
pub fn critical_value(sorted: &[f64], alpha: f64) -> f64 {
    if alpha >= 1.0 || sorted.is_empty() {
        return f64::NEG_INFINITY;
    }
    let k = (sorted.len() as f64 * (1.0 - alpha)).floor() as usize + 1;
    sorted[k.min(sorted.len()) - 1]
}

/// Bootstrap test of a path against `model` at the fitted `theta`.
///
/// `observed` holds the statistics already computed on the path and
/// `observed_set` the bandwidth set used for them.
#[allow(clippy::too_many_arguments)]
pub fn bootstrap_test(
    path: &ObservedPath,
    model: &DiffusionModel,
    theta: &ParamVector,
    observed: &TestStatistics,
    observed_set: &BandwidthSet,
    rule: &BandwidthRule,
    settings: &StatSettings,
    config: &BootstrapConfig,
) -> Result<BootstrapResult> {
    config.validate()?;
    let reselect = config.reselect.unwrap_or(rule.is_data_driven());
    let n = path.n();
    let delta = path.delta();

    let one = |b: usize, attempt: u64| -> Result<Replicate> {
        let mut rng = stream(config.seed, &[b as u64, attempt]);
        let x0 = sample_stationary(model, theta, &mut rng)?;
        let sim = simulate_path(model, theta, n, delta, x0, &mut rng)?;
        let fit = fit_mle(model, &sim)?;
        let set = if reselect { rule.resolve(&sim)? } else { observed_set.clone() };
        let stats = compute_statistics(&sim, model, &fit.theta_hat, set.values(), settings)?;
        Ok(Replicate {
            index: b,
            l_n: stats.l_n,
            standardized: stats.standardized(),
            theta: fit.theta_hat.values().to_vec(),
            redrawn: attempt > 0,
        })
    };

    let outcomes: Vec<Option<Replicate>> =
        (0..config.b).into_par_iter().map(|b| one(b, 0).or_else(|_| one(b, 1)).ok()).collect();
    let failures = outcomes.iter().filter(|o| o.is_none()).count();
    if failures as f64 > MAX_FAILURE_FRACTION * config.b as f64 {
        return Err(Error::TooManyFailures { what: "bootstrap replicates", failed: failures, total: config.b });
    }
    let details: Vec<Replicate> = outcomes.into_iter().flatten().collect();
    let redraws = details.iter().filter(|r| r.redrawn).count();
    let mut replicates: Vec<f64> = details.iter().map(|r| r.l_n).collect();
    replicates.sort_by(f64::total_cmp);

    let critical = critical_value(&replicates, config.alpha);
    Ok(BootstrapResult {
        observed_l_n: observed.l_n,
        p_value: p_value(observed.l_n, &replicates)?,
        critical_value: critical,
        reject: observed.l_n >= critical,
        replicates,
        details,
        alpha: config.alpha,
        b: config.b,
        per_replicate_fit_failures: failures,
        redraws,
    })
}

/// Fit, statistics and bootstrap calibration for one observed path.
#[derive(Debug, Clone)]
pub struct TestOutcome {
    pub fit: FitResult,
    pub bandwidths: BandwidthSet,
    pub statistics: TestStatistics,
    pub bootstrap: BootstrapResult,
}

/// Full test: fit the null model, compute `L_n`, calibrate by bootstrap.
pub fn run_test(
    path: &ObservedPath,
    model: &DiffusionModel,
    rule: &BandwidthRule,
    settings: &StatSettings,
    config: &BootstrapConfig,
) -> Result<TestOutcome> {
    config.validate()?;
    let fit = fit_mle(model, path)?;
    let bandwidths = rule.resolve(path)?;
    let statistics = compute_statistics(path, model, &fit.theta_hat, bandwidths.values(), settings)?;
    let bootstrap =
        bootstrap_test(path, model, &fit.theta_hat, &statistics, &bandwidths, rule, settings, config)?;
    Ok(TestOutcome { fit, bandwidths, statistics, bootstrap })
}
