use std::path::PathBuf;

use elspec::bootstrap::{bootstrap_test, BandwidthRule, BootstrapConfig};
use elspec::commands::{cmd_bandwidth, cmd_fit, cmd_simulate, cmd_test, TestReport};
use elspec::el::{compute_statistics, GridSpec, Mode, StatSettings, Variant};
use elspec::error::Error;
use elspec::io::{ingest_series, parse_series, Config};
use elspec::model::presets::{MONTHLY, VASICEK_0};
use elspec::model::{fit_mle, simulate_path, DiffusionModel};
use elspec::numerics::stream;
use elspec::region::Region;

fn temp_file(name: &str, contents: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("elspec-commands-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let p = dir.join(name);
    std::fs::write(&p, contents).unwrap();
    p
}

fn config(pairs: &[(&str, &str)]) -> Config {
    let mut c = Config::default();
    for (k, v) in pairs {
        c.set(k, v).unwrap();
    }
    c
}

fn simulated(n: usize, seed: u64) -> String {
    let theta = VASICEK_0.map(|v| v.to_string()).join(",");
    cmd_simulate(&config(&[("family", "vasicek"), ("theta", &theta), ("n", &n.to_string()), ("seed", &seed.to_string())]))
        .unwrap()
}

#[test]
fn simulate_is_deterministic_per_seed() {
    assert_eq!(simulated(300, 4), simulated(300, 4));
    assert_ne!(simulated(300, 4), simulated(300, 5));
    assert_eq!(parse_series(&simulated(300, 4)).unwrap().len(), 301);
}

#[test]
fn fit_recovers_long_run_mean() {
    let file = temp_file("long.csv", &simulated(2000, 9));
    let report = cmd_fit(&config(&[("family", "vasicek"), ("data", file.to_str().unwrap())])).unwrap();
    assert!(report.converged);
    let alpha = report.theta_hat[1];
    assert!((alpha - VASICEK_0[1]).abs() <= 0.2 * VASICEK_0[1], "alpha_hat = {alpha}");
}

#[test]
fn test_report_round_trips_and_prints_its_numbers() {
    let file = temp_file("short.csv", &simulated(150, 2));
    let c = config(&[("family", "vasicek"), ("data", file.to_str().unwrap()), ("b", "99"), ("seed", "3")]);
    let (report, csv) = cmd_test(&c).unwrap();
    let json = report.to_json().unwrap();
    assert_eq!(TestReport::from_json(&json).unwrap(), report);

    let text = report.to_text();
    let header: Vec<&str> = text.lines().next().unwrap().split('\t').collect();
    assert_eq!(header[1], "Test statistic L_n");
    let row: Vec<&str> = text.lines().nth(1).unwrap().split('\t').collect();
    assert_eq!(row[1].parse::<f64>().unwrap(), report.l_n);
    assert_eq!(row[2].parse::<f64>().unwrap(), report.critical_value);
    assert_eq!(row[3].parse::<f64>().unwrap(), report.p_value);
    assert!(text.contains(&report.rng));
    assert_eq!(report.mode, Mode::DataAverage);
    assert_eq!(csv.lines().count(), report.b_effective + 1);

    let (again, _) = cmd_test(&c).unwrap();
    assert_eq!(again, report);
}

#[test]
fn bandwidth_report_orders_the_set() {
    let file = temp_file("bw.csv", &simulated(250, 6));
    let r = cmd_bandwidth(&config(&[("family", "vasicek"), ("data", file.to_str().unwrap())])).unwrap();
    assert!(r.scott > 0.0 && r.cv.unwrap() > 0.0);
    assert!(r.set.windows(2).all(|w| w[0] < w[1]));
}

#[test]
fn ingest_names_the_bad_line() {
    let file = temp_file("bad.csv", "value\n0.05\n0.06\nabc\n0.07\n");
    match ingest_series(&file, MONTHLY, &DiffusionModel::vasicek()) {
        Err(Error::Parse { line, .. }) => assert_eq!(line, 4),
        other => panic!("expected a parse error, got {other:?}"),
    }
    let negative = temp_file("neg.csv", "0.05\n-0.01\n0.02\n");
    assert!(ingest_series(&negative, MONTHLY, &DiffusionModel::cir()).unwrap_err().is_validation());
    let short = temp_file("short2.csv", "0.05\n0.06\n");
    assert!(ingest_series(&short, MONTHLY, &DiffusionModel::vasicek()).is_err());
}

#[test]
fn config_rejects_unknown_keys_with_line() {
    let err = Config::parse("family = vasicek\nbogus = 1\n").unwrap_err();
    assert!(err.to_string().contains('2'), "{err}");
    assert!(err.is_validation());
}

#[test]
fn bootstrap_is_reproducible_and_sized() {
    let model = DiffusionModel::vasicek();
    let theta = model.params(&VASICEK_0).unwrap();
    let mut rng = stream(12, &[]);
    let path = simulate_path(&model, &theta, 125, MONTHLY, VASICEK_0[1], &mut rng).unwrap();
    let fit = fit_mle(&model, &path).unwrap();
    let set = elspec::bandwidth::BandwidthSet::explicit(&[0.016, 0.02, 0.024]).unwrap();
    let settings = StatSettings {
        region: Region::new(0.035, 0.25, -0.03, 0.03).unwrap(),
        grid: GridSpec { m_u: 20, m_v: 20 },
        variant: Variant::Lsel,
        mode: Mode::GridIntegral,
    };
    let observed = compute_statistics(&path, &model, &fit.theta_hat, set.values(), &settings).unwrap();
    let rule = BandwidthRule::Fixed(set.clone());
    let cfg = BootstrapConfig::new(99, 0.05, 8);
    let a = bootstrap_test(&path, &model, &fit.theta_hat, &observed, &set, &rule, &settings, &cfg).unwrap();
    let b = bootstrap_test(&path, &model, &fit.theta_hat, &observed, &set, &rule, &settings, &cfg).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.b_effective(), 99);
    assert!(a.replicates.windows(2).all(|w| w[0] <= w[1]));
    assert_eq!(a.reject, a.observed_l_n >= a.critical_value);
}
