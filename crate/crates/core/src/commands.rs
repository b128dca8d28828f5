//! Command implementations behind the CLI and their reports.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::bandwidth::{cv_select, default_cv_grid, scott_rule};
use crate::bootstrap::run_test;
use crate::el::{BandwidthStat, GridSpec, Mode, Variant};
use crate::error::{Error, Result};
use crate::io::{format_series, ingest_series, Config};
use crate::model::{fit_mle, sample_stationary, simulate_path, DiffusionModel, FitMethod, ObservedPath};
use crate::numerics::{stream, RNG_ID};
use crate::region::Region;
use crate::study::{preset, run_preset, Scale, StudyResult};

/// Result of `test`: the fit, per-bandwidth statistics and the bootstrap decision.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub rng: String,
    pub seed: u64,
    pub family: String,
    pub param_names: Vec<String>,
    pub theta_hat: Vec<f64>,
    pub loglik: f64,
    pub converged: bool,
    pub fit_method: FitMethod,
    pub n: usize,
    pub delta: f64,
    pub region: Region,
    pub variant: Variant,
    pub mode: Mode,
    pub grid: GridSpec,
    pub bandwidths: Vec<f64>,
    pub per_h: Vec<BandwidthStat>,
    pub l_n: f64,
    pub critical_value: f64,
    pub p_value: f64,
    pub alpha: f64,
    pub b: usize,
    pub b_effective: usize,
    pub replicate_failures: usize,
    pub reject: bool,
    pub hull_errors: usize,
    pub warnings: Vec<String>,
}

impl TestReport {
    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Io(e.to_string()))
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Parse { line: 0, message: e.to_string() })
    }

    /// Row layout: test statistic, critical value and p-value, followed by diagnostics.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        s.push_str(&format!("Model\tTest statistic L_n\tCritical value l*_{}\tp-value\n", self.alpha));
        s.push_str(&format!("{}\t{}\t{}\t{}\n", self.family, self.l_n, self.critical_value, self.p_value));
        s.push_str(&format!("decision: {}\n", if self.reject { "reject" } else { "do not reject" }));
        s.push_str("\nparameters:");
        for (name, v) in self.param_names.iter().zip(&self.theta_hat) {
            s.push_str(&format!(" {name}={v}"));
        }
        s.push_str(&format!("\nfit: {:?}, converged={}, loglik={}\n", self.fit_method, self.converged, self.loglik));
        s.push_str(&format!(
            "n={} delta={} variant={:?} mode={:?} grid={}x{}\n",
            self.n, self.delta, self.variant, self.mode, self.grid.m_u, self.grid.m_v
        ));
        s.push_str(&format!(
            "region: u [{}, {}) v [{}, {})\n",
            self.region.u_min, self.region.u_max, self.region.v_min, self.region.v_max
        ));
        s.push_str("h\tN(h)\tstandardized\thull_errors\n");
        for b in &self.per_h {
            s.push_str(&format!("{}\t{}\t{}\t{}\n", b.h, b.n_h, b.standardized, b.hull_errors));
        }
        s.push_str(&format!(
            "bootstrap: B={} effective={} failures={}\n",
            self.b, self.b_effective, self.replicate_failures
        ));
        s.push_str(&format!("rng: {} seed={}\n", self.rng, self.seed));
        for w in &self.warnings {
            s.push_str(&format!("warning: {w}\n"));
        }
        s
    }
}

fn load_data(config: &Config, model: &DiffusionModel) -> Result<ObservedPath> {
    let file = config.require("data")?;
    ingest_series(Path::new(file), config.delta()?, model)
}

/// Fits the null model, computes `L_n` and calibrates it by bootstrap.
/// Returns the report and the replicate CSV.
pub fn cmd_test(config: &Config) -> Result<(TestReport, String)> {
    let model = config.model()?;
    let path = load_data(config, &model)?;
    let settings = config.stat_settings(path.values(), Mode::DataAverage)?;
    let rule = config.bandwidth_rule()?;
    let boot = config.bootstrap()?;
    if !(boot.alpha > 0.0 && boot.alpha < 1.0) {
        return Err(Error::Config(format!("alpha must lie in (0, 1), got {}", boot.alpha)));
    }
    let out = run_test(&path, &model, &rule, &settings, &boot)?;
    let mut warnings = Vec::new();
    if !out.fit.converged {
        warnings.push("parameter fit did not meet its convergence tolerances".to_string());
    }
    let hull_errors = out.statistics.hull_errors();
    if hull_errors > 0 {
        warnings.push(format!("{hull_errors} grid points hit the convex-hull cap"));
    }
    let bs = &out.bootstrap;
    let report = TestReport {
        rng: RNG_ID.to_string(),
        seed: boot.seed,
        family: model.family.name().to_string(),
        param_names: model.family.param_names().iter().map(|s| s.to_string()).collect(),
        theta_hat: out.fit.theta_hat.values().to_vec(),
        loglik: out.fit.loglik,
        converged: out.fit.converged,
        fit_method: out.fit.method,
        n: path.n(),
        delta: path.delta(),
        region: settings.region,
        variant: settings.variant,
        mode: settings.mode,
        grid: settings.grid,
        bandwidths: out.bandwidths.values().to_vec(),
        per_h: out.statistics.per_h.clone(),
        l_n: out.statistics.l_n,
        critical_value: bs.critical_value,
        p_value: bs.p_value,
        alpha: bs.alpha,
        b: bs.b,
        b_effective: bs.b_effective(),
        replicate_failures: bs.per_replicate_fit_failures,
        reject: bs.reject,
        hull_errors,
        warnings,
    };
    Ok((report, bs.replicates_csv()))
}

/// Simulates `n` transitions of the configured model; returns the series file text.
pub fn cmd_simulate(config: &Config) -> Result<String> {
    let model = config.model()?;
    let theta = config.theta(&model)?;
    let n: usize = config.require("n")?.parse().map_err(|e| Error::Config(format!("n: {e}")))?;
    let mut rng = stream(config.u64_or("seed", 1)?, &[]);
    let x0 = match config.get("x0") {
        Some(_) => config.f64_or("x0", 0.0)?,
        None => sample_stationary(&model, &theta, &mut rng)?,
    };
    let path = simulate_path(&model, &theta, n, config.delta()?, x0, &mut rng)?;
    Ok(format_series(path.values()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub family: String,
    pub param_names: Vec<String>,
    pub theta_hat: Vec<f64>,
    pub loglik: f64,
    pub converged: bool,
    pub method: FitMethod,
    pub n: usize,
}

pub fn cmd_fit(config: &Config) -> Result<FitReport> {
    let model = config.model()?;
    let path = load_data(config, &model)?;
    let fit = fit_mle(&model, &path)?;
    Ok(FitReport {
        family: model.family.name().to_string(),
        param_names: model.family.param_names().iter().map(|s| s.to_string()).collect(),
        theta_hat: fit.theta_hat.values().to_vec(),
        loglik: fit.loglik,
        converged: fit.converged,
        method: fit.method,
        n: path.n(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandwidthReport {
    pub scott: f64,
    pub cv: Option<f64>,
    pub set: Vec<f64>,
    pub ratio: f64,
}

/// Scott and (when the path is long enough) CV bandwidths plus the configured set.
pub fn cmd_bandwidth(config: &Config) -> Result<BandwidthReport> {
    let model = config.model()?;
    let path = load_data(config, &model)?;
    let cv = if path.n() >= 20 { Some(cv_select(&path, &default_cv_grid(&path)?)?) } else { None };
    let set = config.bandwidth_rule()?.resolve(&path)?;
    Ok(BandwidthReport { scott: scott_rule(&path)?, cv, set: set.values().to_vec(), ratio: set.ratio() })
}

/// Runs a named study preset, with optional overrides of its size.
pub fn cmd_study(config: &Config) -> Result<StudyResult> {
    let name = config.require("preset")?;
    let scale = match config.get("scale").unwrap_or("desk") {
        "desk" => Scale::Desk,
        "full" => Scale::Full,
        other => return Err(Error::Config(format!("scale = '{other}': expected desk or full"))),
    };
    let mut design = preset(name, config.usize_or("study_n", 125)?, scale, config.u64_or("seed", 1)?)?;
    design.n_reps = config.usize_or("n_reps", design.n_reps)?;
    design.b = config.usize_or("b", design.b)?;
    design.alpha = config.f64_or("alpha", design.alpha)?;
    design.asymptotic = config.bool_or("asymptotic", design.asymptotic)?;
    if config.get("grid").is_some() {
        design.settings.grid = config.grid()?;
    }
    if let Some(v) = config.parsed::<Variant>("variant")? {
        design.settings.variant = v;
    }
    if let Some(f) = config.get("truth_family") {
        design.truth = DiffusionModel::new(f.parse()?);
    }
    if let Some(t) = config.list("truth_theta")? {
        design.theta_truth = t;
    }
    run_preset(&design)
}

/// Writes `contents` to the path stored under `key`, if any.
pub fn write_output(config: &Config, key: &str, contents: &str) -> Result<()> {
    if let Some(p) = config.get(key) {
        std::fs::write(p, contents).map_err(|e| Error::Io(format!("{p}: {e}")))?;
    }
    Ok(())
}
