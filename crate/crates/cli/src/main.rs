//! `elspec` command-line interface.
//!
//! Every command reads an optional `key = value` config file; `--set
//! key=value` and the dedicated flags override it. Exit codes: 0 success,
//! 2 validation error, 3 numerical failure.

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use elspec::commands::{cmd_bandwidth, cmd_fit, cmd_simulate, cmd_study, cmd_test, write_output};
use elspec::error::{Error, Result};
use elspec::io::{Config, KNOWN_KEYS};

#[derive(Parser)]
#[command(name = "elspec", version, about = "Empirical-likelihood specification tests for diffusion models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit the null model, compute L_n and calibrate it by parametric bootstrap.
    Test(Common),
    /// Simulate a path from the configured model.
    Simulate(Common),
    /// Maximum-likelihood fit of the configured model.
    Fit(Common),
    /// Scott and cross-validated bandwidths and the configured bandwidth set.
    Bandwidth(Common),
    /// Monte Carlo size or power study from a named preset.
    Study(Common),
    /// List the recognized config keys.
    Keys,
}

#[derive(Args)]
struct Common {
    /// Config file of `key = value` lines.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Override a config entry (repeatable).
    #[arg(short = 's', long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Input series.
    #[arg(long)]
    data: Option<String>,
    /// Model family.
    #[arg(long)]
    family: Option<String>,
    /// Master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Study preset.
    #[arg(long)]
    preset: Option<String>,
    /// JSON output path.
    #[arg(long)]
    json: Option<String>,
    /// Text or series output path.
    #[arg(long)]
    out: Option<String>,
}

impl Common {
    fn config(&self) -> Result<Config> {
        let mut c = match &self.config {
            Some(p) => Config::from_file(p)?,
            None => Config::default(),
        };
        c.apply_overrides(&self.set)?;
        let flags = [
            ("data", self.data.clone()),
            ("family", self.family.clone()),
            ("seed", self.seed.map(|s| s.to_string())),
            ("preset", self.preset.clone()),
            ("output_json", self.json.clone()),
            ("output_text", self.out.clone()),
        ];
        for (k, v) in flags {
            if let Some(v) = v {
                c.set(k, &v)?;
            }
        }
        let threads = c.usize_or("threads", 0)?;
        if threads > 0 {
            // Ignored if a pool already exists; results do not depend on it.
            let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
        }
        Ok(c)
    }
}

fn json<T: serde::Serialize>(v: &T) -> Result<String> {
    serde_json::to_string_pretty(v).map_err(|e| Error::Io(e.to_string()))
}

/// Writes to stdout, ignoring a closed pipe.
fn emit(s: &str) {
    let _ = std::io::stdout().lock().write_all(s.as_bytes());
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Test(c) => {
            let config = c.config()?;
            let (report, replicates) = cmd_test(&config)?;
            let text = report.to_text();
            emit(&text);
            write_output(&config, "output_json", &report.to_json()?)?;
            write_output(&config, "output_text", &text)?;
            write_output(&config, "output_csv", &replicates)?;
        }
        Command::Simulate(c) => {
            let config = c.config()?;
            let series = cmd_simulate(&config)?;
            if config.get("output_text").is_none() && config.get("output_csv").is_none() {
                emit(&series);
            }
            write_output(&config, "output_text", &series)?;
            write_output(&config, "output_csv", &series)?;
        }
        Command::Fit(c) => {
            let config = c.config()?;
            let report = json(&cmd_fit(&config)?)?;
            emit(&format!("{report}\n"));
            write_output(&config, "output_json", &report)?;
        }
        Command::Bandwidth(c) => {
            let config = c.config()?;
            let report = json(&cmd_bandwidth(&config)?)?;
            emit(&format!("{report}\n"));
            write_output(&config, "output_json", &report)?;
        }
        Command::Study(c) => {
            let config = c.config()?;
            let result = cmd_study(&config)?;
            let table = result.to_table();
            emit(&table);
            write_output(&config, "output_json", &json(&result)?)?;
            write_output(&config, "output_text", &table)?;
            write_output(&config, "output_csv", &result.to_csv())?;
        }
        Command::Keys => {
            let keys: String = KNOWN_KEYS.iter().map(|(k, d)| format!("{k:<18} {d}\n")).collect();
            emit(&keys);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 2 } else { 3 })
        }
    }
}
