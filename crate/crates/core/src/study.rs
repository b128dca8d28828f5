//! Monte Carlo size and power studies: repeated simulation, fitting and
//! bootstrap testing under a chosen truth, with rejection rates per
//! bandwidth and for the maximum statistic.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bandwidth::{presets as bp, BandwidthSet};
use crate::bootstrap::{run_test, BandwidthRule, BootstrapConfig};
use crate::el::{asymptotic_ref, GridSpec, Mode, StatSettings, Variant};
use crate::error::{Error, Result};
use crate::model::{presets as mp, sample_stationary, simulate_path, DiffusionModel};
use crate::numerics::{derive_seed, stream, RNG_ID};
use crate::region::{presets as rp, Region};

/// Largest tolerated fraction of failed repetitions.
pub const MAX_REP_FAILURE_FRACTION: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyDesign {
    pub name: String,
    pub truth: DiffusionModel,
    pub theta_truth: Vec<f64>,
    pub null: DiffusionModel,
    /// Transitions per simulated path.
    pub n: usize,
    pub delta: f64,
    pub settings: StatSettings,
    pub rule: BandwidthRule,
    pub b: usize,
    pub alpha: f64,
    pub n_reps: usize,
    pub seed: u64,
    pub reselect: Option<bool>,
    /// Also run the single-bandwidth asymptotic tests.
    pub asymptotic: bool,
}

impl StudyDesign {
    pub fn validate(&self) -> Result<()> {
        if self.n_reps < 10 {
            return Err(Error::InvalidInput(format!("study needs n_reps >= 10, got {}", self.n_reps)));
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::InvalidInput(format!("alpha must lie in (0, 1], got {}", self.alpha)));
        }
        self.truth.params(&self.theta_truth)?;
        if self.settings.region.is_empty() {
            return Err(Error::InvalidInput("study region is empty".into()));
        }
        Ok(())
    }

    fn bootstrap_config(&self, rep_seed: u64) -> BootstrapConfig {
        BootstrapConfig { b: self.b, alpha: self.alpha, seed: derive_seed(rep_seed, 1), reselect: self.reselect }
    }
}

/// Outcome of one repetition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepRecord {
    pub rep: usize,
    pub seed: u64,
    pub theta_hat: Vec<f64>,
    pub bandwidths: Vec<f64>,
    pub l_n: f64,
    pub critical_value: f64,
    pub p_value: f64,
    pub reject: bool,
    /// Bootstrap single-bandwidth decisions.
    pub single_reject: Vec<bool>,
    /// Asymptotic single-bandwidth decisions (empty when disabled).
    pub asymptotic_reject: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyResult {
    pub design: String,
    pub rng: String,
    pub reps_ok: usize,
    pub rep_failures: usize,
    pub rejection_rate: f64,
    pub binomial_se: f64,
    pub per_bandwidth_rates: Vec<f64>,
    pub asymptotic_rates: Vec<f64>,
    /// Smallest asymptotic single-bandwidth rate, when enabled.
    pub asymptotic_rate: Option<f64>,
    /// Bandwidths of the first repetition (identical across reps for a fixed rule).
    pub bandwidths: Vec<f64>,
    pub wall_time_secs: f64,
    pub records: Vec<RepRecord>,
}

impl StudyResult {
    /// One row per repetition.
    pub fn to_csv(&self) -> String {
        let p = self.records.first().map_or(0, |r| r.theta_hat.len());
        let mut s = String::from("rep,seed");
        for i in 1..=p {
            s.push_str(&format!(",theta{i}"));
        }
        s.push_str(",l_n,critical_value,p_value,reject\n");
        for r in &self.records {
            s.push_str(&format!("{},{}", r.rep, r.seed));
            for t in &r.theta_hat {
                s.push_str(&format!(",{t}"));
            }
            s.push_str(&format!(",{},{},{},{}\n", r.l_n, r.critical_value, r.p_value, r.reject as u8));
        }
        s
    }

    /// Text table: bandwidths, single-bandwidth sizes (asymptotic in
    /// parentheses) and the rate of the maximum test, in percent.
    pub fn to_table(&self) -> String {
        let pct = |r: f64| format!("{:.1}", 100.0 * r);
        let mut s = format!("{}  (reps {}, failures {})\n", self.design, self.reps_ok, self.rep_failures);
        s.push_str("Bandwidths");
        for h in &self.bandwidths {
            s.push_str(&format!("\t{h}"));
        }
        s.push_str("\tmax\n");
        s.push_str("Rate");
        for r in &self.per_bandwidth_rates {
            s.push_str(&format!("\t{}", pct(*r)));
        }
        s.push_str(&format!("\t{} (se {})\n", pct(self.rejection_rate), pct(self.binomial_se)));
        if !self.asymptotic_rates.is_empty() {
            for r in &self.asymptotic_rates {
                s.push_str(&format!("\t({})", pct(*r)));
            }
            s.push('\n');
        }
        s
    }
}

fn run_rep(design: &StudyDesign, rep: usize) -> Result<RepRecord> {
    let rep_seed = derive_seed(design.seed, rep as u64);
    let theta = design.truth.params(&design.theta_truth)?;
    let mut rng = stream(rep_seed, &[0]);
    let x0 = sample_stationary(&design.truth, &theta, &mut rng)?;
    let path = simulate_path(&design.truth, &theta, design.n, design.delta, x0, &mut rng)?;
    let out = run_test(&path, &design.null, &design.rule, &design.settings, &design.bootstrap_config(rep_seed))?;
    let bs = &out.bootstrap;
    let observed = out.statistics.standardized();
    let single_reject = (0..observed.len()).map(|k| observed[k] >= bs.single_critical(k)).collect();
    let asymptotic_reject = if design.asymptotic {
        let reference = asymptotic_ref(
            &path,
            out.bandwidths.values(),
            &design.settings.region,
            design.settings.grid,
            0,
            &mut rng,
        )?;
        (0..observed.len()).map(|k| observed[k] >= reference.single_critical(k, design.alpha)).collect()
    } else {
        Vec::new()
    };
    Ok(RepRecord {
        rep,
        seed: rep_seed,
        theta_hat: out.fit.theta_hat.values().to_vec(),
        bandwidths: out.bandwidths.values().to_vec(),
        l_n: out.statistics.l_n,
        critical_value: bs.critical_value,
        p_value: bs.p_value,
        reject: bs.reject,
        single_reject,
        asymptotic_reject,
    })
}

fn run_study(design: &StudyDesign) -> Result<StudyResult> {
    design.validate()?;
    let start = Instant::now();
    let outcomes: Vec<Result<RepRecord>> = (0..design.n_reps).into_par_iter().map(|r| run_rep(design, r)).collect();
    let failures = outcomes.iter().filter(|o| o.is_err()).count();
    if failures as f64 > MAX_REP_FAILURE_FRACTION * design.n_reps as f64 {
        let first = outcomes.iter().find_map(|o| o.as_ref().err()).map(|e| e.to_string()).unwrap_or_default();
        return Err(Error::Numerical(format!(
            "{}: {failures} of {} repetitions failed (first: {first})",
            design.name, design.n_reps
        )));
    }
    let records: Vec<RepRecord> = outcomes.into_iter().filter_map(|o| o.ok()).collect();
    let m = records.len() as f64;
    let rate = |f: &dyn Fn(&RepRecord) -> bool| records.iter().filter(|r| f(r)).count() as f64 / m;
    let rejection_rate = rate(&|r| r.reject);
    let j = records.first().map_or(0, |r| r.single_reject.len());
    let per_bandwidth_rates = (0..j).map(|k| rate(&|r| r.single_reject[k])).collect();
    let asymptotic_rates: Vec<f64> =
        if design.asymptotic { (0..j).map(|k| rate(&|r| r.asymptotic_reject[k])).collect() } else { Vec::new() };
    let asymptotic_rate = asymptotic_rates.iter().copied().reduce(f64::min);
    Ok(StudyResult {
        design: design.name.clone(),
        rng: RNG_ID.to_string(),
        reps_ok: records.len(),
        rep_failures: failures,
        rejection_rate,
        binomial_se: (rejection_rate * (1.0 - rejection_rate) / m).sqrt(),
        per_bandwidth_rates,
        asymptotic_rates,
        asymptotic_rate,
        bandwidths: records.first().map(|r| r.bandwidths.clone()).unwrap_or_default(),
        wall_time_secs: start.elapsed().as_secs_f64(),
        records,
    })
}

/// Size study: the truth is the null family.
pub fn run_size_study(design: &StudyDesign) -> Result<StudyResult> {
    if design.truth.family != design.null.family {
        return Err(Error::InvalidInput(format!(
            "size study needs truth = null family, got {} vs {}",
            design.truth.family, design.null.family
        )));
    }
    run_study(design)
}

/// Power study: the truth differs from the null family (a matching truth
/// degenerates to a size study).
pub fn run_power_study(design: &StudyDesign) -> Result<StudyResult> {
    run_study(design)
}

/// Scale of a preset design.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Scale {
    /// `B = 99`, 200 reps for size and 100 for power.
    Desk,
    /// `B = 250`, 500 reps.
    Full,
}

/// Names accepted by [`preset`].
pub const PRESET_NAMES: [&str; 7] = [
    "vasicek-table1",
    "vasicek-m2-table1",
    "vasicek-2-table1",
    "cir-table3",
    "cir1-table3",
    "cir2-table3",
    "power-table4a",
];

/// Named simulation design with its fixed bandwidth set for `n ∈ {125, 250, 500}`.
pub fn preset(name: &str, n: usize, scale: Scale, seed: u64) -> Result<StudyDesign> {
    let pick = |sets: [&[f64]; 3]| -> Result<BandwidthSet> {
        let i = match n {
            125 => 0,
            250 => 1,
            500 => 2,
            _ => return Err(Error::InvalidInput(format!("preset {name} is defined for n = 125, 250, 500, got {n}"))),
        };
        BandwidthSet::explicit(sets[i])
    };
    let vas = DiffusionModel::vasicek();
    let cir = DiffusionModel::cir();
    let (truth, theta, null, region, set, power): (DiffusionModel, &[f64], DiffusionModel, Region, BandwidthSet, bool) =
        match name {
            "vasicek-table1" => (vas, &mp::VASICEK_0, vas, rp::VASICEK_0, pick([&bp::VASICEK_0_125, &bp::VASICEK_0_250, &bp::VASICEK_0_500])?, false),
            "vasicek-m2-table1" => (vas, &mp::VASICEK_M2, vas, rp::VASICEK_M2, pick([&bp::VASICEK_M2_125, &bp::VASICEK_M2_250, &bp::VASICEK_M2_500])?, false),
            "vasicek-2-table1" => (vas, &mp::VASICEK_2, vas, rp::VASICEK_2, pick([&bp::VASICEK_2_125, &bp::VASICEK_2_250, &bp::VASICEK_2_500])?, false),
            "cir-table3" => (cir, &mp::CIR_0, cir, rp::CIR_0, pick([&bp::CIR_0_125, &bp::CIR_0_250, &bp::CIR_0_500])?, false),
            "cir1-table3" => (cir, &mp::CIR_1, cir, rp::CIR_1, pick([&bp::CIR_1_125, &bp::CIR_1_250, &bp::CIR_1_500])?, false),
            "cir2-table3" => (cir, &mp::CIR_2, cir, rp::CIR_2, pick([&bp::CIR_2_125, &bp::CIR_2_250, &bp::CIR_2_500])?, false),
            "power-table4a" => (cir, &mp::CIR_0, vas, rp::POWER, pick([&bp::POWER_125, &bp::POWER_250, &bp::POWER_500])?, true),
            _ => return Err(Error::InvalidInput(format!("unknown preset {name}; expected one of {PRESET_NAMES:?}"))),
        };
    let (b, n_reps) = match (scale, power) {
        (Scale::Desk, false) => (99, 200),
        (Scale::Desk, true) => (99, 100),
        (Scale::Full, _) => (250, 500),
    };
    Ok(StudyDesign {
        name: format!("{name} n={n}"),
        truth,
        theta_truth: theta.to_vec(),
        null,
        n,
        delta: mp::MONTHLY,
        settings: StatSettings { region, grid: GridSpec::default(), variant: Variant::Lsel, mode: Mode::GridIntegral },
        rule: BandwidthRule::Fixed(set),
        b,
        alpha: 0.05,
        n_reps,
        seed,
        reselect: None,
        asymptotic: !power,
    })
}

/// Runs a preset as a size or power study according to its families.
pub fn run_preset(design: &StudyDesign) -> Result<StudyResult> {
    if design.truth.family == design.null.family {
        run_size_study(design)
    } else {
        run_power_study(design)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny(name: &str) -> StudyDesign {
        let mut d = preset(name, 125, Scale::Desk, 3).unwrap();
        d.n_reps = 10;
        d.settings.grid = GridSpec { m_u: 10, m_v: 10 };
        d
    }

    #[test]
    fn presets_resolve() {
        for name in PRESET_NAMES {
            for n in [125, 250, 500] {
                let d = preset(name, n, Scale::Desk, 1).unwrap();
                d.validate().unwrap();
            }
        }
        assert!(preset("vasicek-table1", 300, Scale::Desk, 1).is_err());
        assert!(preset("nope", 125, Scale::Desk, 1).is_err());
        let d = preset("power-table4a", 125, Scale::Full, 1).unwrap();
        assert_eq!((d.b, d.n_reps), (250, 500));
    }

    #[test]
    fn alpha_one_always_rejects() {
        let mut d = tiny("vasicek-table1");
        d.alpha = 1.0;
        d.asymptotic = false;
        let r = run_size_study(&d).unwrap();
        assert_eq!(r.rejection_rate, 1.0);
        assert_eq!(r.binomial_se, 0.0);
    }

    #[test]
    fn study_is_reproducible() {
        let d = tiny("vasicek-table1");
        let a = run_size_study(&d).unwrap();
        let b = run_size_study(&d).unwrap();
        assert_eq!(a.records, b.records);
        assert!(a.per_bandwidth_rates.iter().chain(&a.asymptotic_rates).all(|r| (0.0..=1.0).contains(r)));
        let se = (a.rejection_rate * (1.0 - a.rejection_rate) / a.reps_ok as f64).sqrt();
        assert!((a.binomial_se - se).abs() < 1e-15);
        assert_eq!(a.to_csv().lines().count(), a.reps_ok + 1);
        assert!(a.to_table().contains("Bandwidths"));
    }

    #[test]
    fn size_study_requires_matching_families() {
        let d = tiny("power-table4a");
        assert!(run_size_study(&d).is_err());
        let mut d = tiny("vasicek-table1");
        d.n_reps = 5;
        assert!(run_size_study(&d).is_err());
    }
}
