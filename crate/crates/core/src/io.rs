//! Series ingestion and the flat `key = value` configuration format.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use crate::bandwidth::{BandwidthSet, SetScheme};
use crate::bootstrap::{BandwidthRule, BootstrapConfig};
use crate::el::{GridSpec, Mode, StatSettings, Variant};
use crate::error::{Error, Result};
use crate::model::{DiffusionModel, Family, ObservedPath, ParamVector};
use crate::region::Region;

/// Parses one observation per line. Blank lines and `#` comments are
/// skipped, a non-numeric first line is taken as a header, and for
/// comma-separated lines the last field is read.
pub fn parse_series(text: &str) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    let mut seen_content = false;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let field = line.rsplit(',').next().unwrap_or(line).trim();
        match field.parse::<f64>() {
            Ok(v) if v.is_finite() => out.push(v),
            Ok(v) => return Err(Error::Parse { line: i + 1, message: format!("non-finite value {v}") }),
            Err(_) if !seen_content => {}
            Err(_) => return Err(Error::Parse { line: i + 1, message: format!("not a number: '{field}'") }),
        }
        seen_content = true;
    }
    Ok(out)
}

/// Reads a series file into a path checked against the model's state space.
pub fn ingest_series(file: &Path, delta: f64, model: &DiffusionModel) -> Result<ObservedPath> {
    let text = std::fs::read_to_string(file).map_err(|e| Error::Io(format!("{}: {e}", file.display())))?;
    let values = parse_series(&text)?;
    if values.len() < 3 {
        return Err(Error::InvalidInput(format!(
            "{}: need at least 3 observations, found {}",
            file.display(),
            values.len()
        )));
    }
    let path = ObservedPath::new(values, delta)?;
    path.check_state_space(model)?;
    Ok(path)
}

/// Writes a series one value per line under a `value` header.
pub fn format_series(values: &[f64]) -> String {
    let mut s = String::from("value\n");
    for v in values {
        s.push_str(&format!("{v}\n"));
    }
    s
}

/// Recognized configuration keys with a one-line description.
pub const KNOWN_KEYS: [(&str, &str); 32] = [
    ("family", "model family: vasicek, cir, icir, cev, nldrift"),
    ("theta", "comma-separated parameters in the family's order"),
    ("data", "path of the observed series"),
    ("delta", "sampling interval in years, e.g. 1/12"),
    ("n", "number of transitions to simulate"),
    ("x0", "initial state for simulation (default: stationary draw)"),
    ("region", "auto, or u_min,u_max,v_min,v_max in rotated coordinates"),
    ("bandwidth_rule", "fixed, scott, cv or endpoints"),
    ("bandwidths", "comma-separated increasing bandwidths for the fixed rule"),
    ("bandwidth_scheme", "anchor position: ref-third or cv-lower"),
    ("bandwidth_j", "number of bandwidths J"),
    ("bandwidth_a", "geometric ratio a in (0, 1)"),
    ("bandwidth_h1", "smallest bandwidth for the endpoints rule"),
    ("bandwidth_hj", "largest bandwidth for the endpoints rule"),
    ("reselect", "reselect bandwidths per bootstrap replicate: true or false"),
    ("variant", "local statistic: lsel or el"),
    ("mode", "grid or data"),
    ("grid", "grid resolution as MUxMV, e.g. 40x40"),
    ("b", "number of bootstrap replicates"),
    ("alpha", "nominal level"),
    ("seed", "master seed"),
    ("threads", "worker threads (0 = all cores)"),
    ("output_json", "path of the JSON output"),
    ("output_text", "path of the text report"),
    ("output_csv", "path of the CSV output"),
    ("preset", "study preset name"),
    ("study_n", "sample size of the study preset"),
    ("scale", "study scale: desk or full"),
    ("n_reps", "number of study repetitions"),
    ("asymptotic", "also run asymptotic single-bandwidth tests: true or false"),
    ("truth_family", "data-generating family of a study (default: preset)"),
    ("truth_theta", "data-generating parameters of a study (default: preset)"),
];

fn is_known(key: &str) -> bool {
    KNOWN_KEYS.iter().any(|(k, _)| *k == key)
}

/// Flat configuration; later assignments (command-line overrides) win.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Config {
    entries: BTreeMap<String, String>,
}

impl Config {
    pub fn parse(text: &str) -> Result<Self> {
        let mut c = Config::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Parse { line: i + 1, message: format!("expected key = value, got '{line}'") })?;
            let key = k.trim();
            if !is_known(key) {
                return Err(Error::Parse { line: i + 1, message: format!("unknown key '{key}'") });
            }
            if c.entries.insert(key.to_string(), v.trim().to_string()).is_some() {
                return Err(Error::Parse { line: i + 1, message: format!("duplicate key '{key}'") });
            }
        }
        Ok(c)
    }

    pub fn from_file(file: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(file).map_err(|e| Error::Io(format!("{}: {e}", file.display())))?;
        Config::parse(&text).map_err(|e| Error::Config(format!("{}: {e}", file.display())))
    }

    /// Sets `key`, replacing any earlier value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        if !is_known(key) {
            return Err(Error::Config(format!("unknown key '{key}'")));
        }
        self.entries.insert(key.to_string(), value.trim().to_string());
        Ok(())
    }

    /// Applies `key=value` overrides.
    pub fn apply_overrides<S: AsRef<str>>(&mut self, overrides: &[S]) -> Result<()> {
        for o in overrides {
            let o = o.as_ref();
            let (k, v) = o.split_once('=').ok_or_else(|| Error::Config(format!("override '{o}' is not key=value")))?;
            self.set(k.trim(), v)?;
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    /// Parses the value under `key`, if present.
    pub fn parsed<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        self.get(key)
            .map(|v| v.parse::<T>().map_err(|e| Error::Config(format!("{key} = '{v}': {e}"))))
            .transpose()
    }

    pub fn require(&self, key: &str) -> Result<&str> {
        self.get(key).ok_or_else(|| Error::Config(format!("missing required key '{key}'")))
    }

    pub fn f64_or(&self, key: &str, default: f64) -> Result<f64> {
        Ok(self.parsed(key)?.unwrap_or(default))
    }

    pub fn usize_or(&self, key: &str, default: usize) -> Result<usize> {
        Ok(self.parsed(key)?.unwrap_or(default))
    }

    pub fn u64_or(&self, key: &str, default: u64) -> Result<u64> {
        Ok(self.parsed(key)?.unwrap_or(default))
    }

    pub fn bool_or(&self, key: &str, default: bool) -> Result<bool> {
        Ok(self.parsed(key)?.unwrap_or(default))
    }

    pub fn list(&self, key: &str) -> Result<Option<Vec<f64>>> {
        self.get(key)
            .map(|v| {
                v.split(',')
                    .map(|s| s.trim().parse::<f64>().map_err(|e| Error::Config(format!("{key} = '{v}': {e}"))))
                    .collect()
            })
            .transpose()
    }

    /// Sampling interval; accepts a fraction such as `1/12`. Default monthly.
    pub fn delta(&self) -> Result<f64> {
        let Some(v) = self.get("delta") else {
            return Ok(1.0 / 12.0);
        };
        let parse = |s: &str| s.trim().parse::<f64>().map_err(|e| Error::Config(format!("delta = '{v}': {e}")));
        let d = match v.split_once('/') {
            Some((a, b)) => parse(a)? / parse(b)?,
            None => parse(v)?,
        };
        if !(d > 0.0 && d.is_finite()) {
            return Err(Error::Config(format!("delta must be positive, got '{v}'")));
        }
        Ok(d)
    }

    pub fn family(&self, key: &str) -> Result<Family> {
        self.get(key).map_or(Ok(Family::Vasicek), Family::from_str)
    }

    pub fn model(&self) -> Result<DiffusionModel> {
        Ok(DiffusionModel::new(self.family("family")?))
    }

    pub fn theta(&self, model: &DiffusionModel) -> Result<ParamVector> {
        let v = self.list("theta")?.ok_or_else(|| Error::Config("missing required key 'theta'".into()))?;
        model.params(&v)
    }

    /// Region from the config, or the automatic region of `values`.
    pub fn region(&self, values: &[f64]) -> Result<Region> {
        match self.get("region") {
            None | Some("auto") => Region::auto(values),
            Some(_) => {
                let v = self.list("region")?.unwrap_or_default();
                if v.len() != 4 {
                    return Err(Error::Config(format!("region needs 4 numbers, got {}", v.len())));
                }
                Region::new(v[0], v[1], v[2], v[3])
            }
        }
    }

    pub fn grid(&self) -> Result<GridSpec> {
        let Some(v) = self.get("grid") else {
            return Ok(GridSpec::default());
        };
        let (a, b) = v.split_once(['x', 'X']).ok_or_else(|| Error::Config(format!("grid = '{v}': expected MUxMV")))?;
        let p = |s: &str| s.trim().parse::<usize>().map_err(|e| Error::Config(format!("grid = '{v}': {e}")));
        Ok(GridSpec { m_u: p(a)?, m_v: p(b)? })
    }

    /// Statistic settings; `default_mode` applies when `mode` is unset.
    pub fn stat_settings(&self, values: &[f64], default_mode: Mode) -> Result<StatSettings> {
        Ok(StatSettings {
            region: self.region(values)?,
            grid: self.grid()?,
            variant: self.parsed::<Variant>("variant")?.unwrap_or_default(),
            mode: self.parsed::<Mode>("mode")?.unwrap_or(default_mode),
        })
    }

    /// Bandwidth rule; the default is the Scott anchor at position 3 of 6 with `a = 0.95`.
    pub fn bandwidth_rule(&self) -> Result<BandwidthRule> {
        let scheme = match self.get("bandwidth_scheme").unwrap_or("ref-third") {
            "ref-third" => SetScheme::RefThirdSmallest,
            "cv-lower" => SetScheme::CvLowerRange,
            other => return Err(Error::Config(format!("bandwidth_scheme = '{other}': expected ref-third or cv-lower"))),
        };
        let j = self.usize_or("bandwidth_j", 6)?;
        let a = self.f64_or("bandwidth_a", 0.95)?;
        match self.get("bandwidth_rule").unwrap_or("scott") {
            "fixed" => {
                let v = self.list("bandwidths")?.ok_or_else(|| Error::Config("fixed rule needs 'bandwidths'".into()))?;
                Ok(BandwidthRule::Fixed(BandwidthSet::explicit(&v)?))
            }
            "endpoints" => {
                let h1 = self.parsed::<f64>("bandwidth_h1")?;
                let hj = self.parsed::<f64>("bandwidth_hj")?;
                match (h1, hj) {
                    (Some(h1), Some(hj)) => Ok(BandwidthRule::Fixed(BandwidthSet::endpoints(h1, hj, j)?)),
                    _ => Err(Error::Config("endpoints rule needs 'bandwidth_h1' and 'bandwidth_hj'".into())),
                }
            }
            "scott" => Ok(BandwidthRule::Scott { scheme, j, a }),
            "cv" => Ok(BandwidthRule::Cv { scheme, j, a }),
            other => Err(Error::Config(format!("bandwidth_rule = '{other}': expected fixed, scott, cv or endpoints"))),
        }
    }

    pub fn bootstrap(&self) -> Result<BootstrapConfig> {
        Ok(BootstrapConfig {
            b: self.usize_or("b", 250)?,
            alpha: self.f64_or("alpha", 0.05)?,
            seed: self.u64_or("seed", 1)?,
            reselect: self.parsed::<bool>("reselect")?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn series_formats() {
        assert_eq!(parse_series("0.05\n0.051\n0.049").unwrap(), vec![0.05, 0.051, 0.049]);
        assert_eq!(parse_series("rate\n0.05\n\n0.051\n").unwrap(), vec![0.05, 0.051]);
        assert_eq!(parse_series("date,rate\n1990-01,0.08\n1990-02,0.081").unwrap(), vec![0.08, 0.081]);
        let text = "rate\n0.1\n0.1\n0.1\n0.1\n0.1\nabc\n0.1";
        assert_eq!(parse_series(text), Err(Error::Parse { line: 7, message: "not a number: 'abc'".into() }));
        assert!(matches!(parse_series("0.1\nnan"), Err(Error::Parse { line: 2, .. })));
    }

    #[test]
    fn config_parsing() {
        let c = Config::parse("family = cir # comment\n\ndelta = 1/12\nb=99\n").unwrap();
        assert_eq!(c.family("family").unwrap(), Family::Cir);
        assert!((c.delta().unwrap() - 1.0 / 12.0).abs() < 1e-15);
        assert_eq!(c.bootstrap().unwrap().b, 99);
        assert!(matches!(Config::parse("bogus = 1"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(Config::parse("b = 1\nb = 2"), Err(Error::Parse { line: 2, .. })));
        assert!(Config::parse("no equals sign").is_err());
    }

    #[test]
    fn overrides_win() {
        let mut c = Config::parse("seed = 3\nalpha = 0.1").unwrap();
        c.apply_overrides(&["seed=9"]).unwrap();
        assert_eq!(c.u64_or("seed", 0).unwrap(), 9);
        assert!(c.apply_overrides(&["nope=1"]).is_err());
        assert!(c.apply_overrides(&["seed"]).is_err());
    }

    #[test]
    fn typed_sections() {
        let c = Config::parse(
            "region = 0.005,0.4,-0.03,0.03\nbandwidth_rule = endpoints\nbandwidth_h1 = 0.007\nbandwidth_hj = 0.02\nbandwidth_j = 7\ngrid = 20x30\nvariant = el\n",
        )
        .unwrap();
        let s = c.stat_settings(&[0.1, 0.2, 0.3], Mode::DataAverage).unwrap();
        assert_eq!(s.region, Region::new(0.005, 0.4, -0.03, 0.03).unwrap());
        assert_eq!(s.grid, GridSpec { m_u: 20, m_v: 30 });
        assert_eq!((s.variant, s.mode), (Variant::El, Mode::DataAverage));
        match c.bandwidth_rule().unwrap() {
            BandwidthRule::Fixed(set) => assert_eq!(set.len(), 7),
            other => panic!("{other:?}"),
        }
        let bad = Config::parse("bandwidth_rule = fixed").unwrap();
        assert!(bad.bandwidth_rule().is_err());
        let bad = Config::parse("grid = 40").unwrap();
        assert!(bad.grid().is_err());
    }
}
