//! `run`, `validate` and `sweep` subcommands.

use super::config::{parse_table, ConfigDocument, ConfigError};
use super::csv::write_csv;
use super::manifest::RunManifest;
use super::plot::{emit_plot, PlotError};
use crate::simulator::{run_batch, RunResult, SimError, Simulator, TimeSeriesRecord};
use clap::{Parser, Subcommand};
use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use toml::{Table, Value};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_SOLVER: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "gfl-emt", version, about = "EMT simulation of a grid-following inverter")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate one configuration and write CSV plus manifest.
    Run {
        config: PathBuf,
        #[arg(long, default_value = ".")]
        out: PathBuf,
        /// Comma-separated signal names to plot to SVG.
        #[arg(long, value_delimiter = ',')]
        plot: Vec<String>,
    },
    /// Parse and validate a configuration without simulating.
    Validate { config: PathBuf },
    /// One independent run per value of a single parameter.
    Sweep {
        config: PathBuf,
        /// Dotted key such as `frequency_support.kf`.
        #[arg(long)]
        param: String,
        #[arg(long, value_delimiter = ',', required = true, allow_negative_numbers = true)]
        values: Vec<f64>,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
}

struct Failure {
    code: i32,
    message: String,
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Self { code: EXIT_INVALID, message: e.to_string() }
    }
}

impl From<PlotError> for Failure {
    fn from(e: PlotError) -> Self {
        Self { code: EXIT_INVALID, message: e.to_string() }
    }
}

fn io_failure(path: &Path, e: impl std::fmt::Display) -> Failure {
    Failure { code: EXIT_INVALID, message: format!("{}: {e}", path.display()) }
}

/// Runs the command line and returns the process exit code. Diagnostics go to stderr.
pub fn cli_main<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
        }
    };
    let result = match cli.command {
        Command::Run { config, out, plot } => run(&config, &out, &plot),
        Command::Validate { config } => validate(&config),
        Command::Sweep { config, param, values, out } => sweep(&config, &param, &values, &out),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    }
}

fn read(path: &Path) -> Result<(Vec<u8>, Table), Failure> {
    let bytes = fs::read(path).map_err(|e| io_failure(path, e))?;
    let text = std::str::from_utf8(&bytes).map_err(|e| io_failure(path, e))?;
    let table = parse_table(text)?;
    Ok((bytes, table))
}

fn document(table: &Table) -> Result<ConfigDocument, Failure> {
    let doc = ConfigDocument::from_table(table)?;
    doc.resolve()?;
    Ok(doc)
}

fn validate(config: &Path) -> Result<(), Failure> {
    let (_, table) = read(config)?;
    document(&table)?;
    println!("{}: ok", config.display());
    Ok(())
}

fn stem(path: &Path) -> String {
    path.file_stem().map_or_else(|| "run".to_string(), |s| s.to_string_lossy().into_owned())
}

fn sim_failure(e: &SimError) -> Failure {
    let code = match e {
        SimError::Solver { .. } => EXIT_SOLVER,
        SimError::Invalid(_) | SimError::InitResidualTooLarge { .. } => EXIT_INVALID,
    };
    Failure { code, message: e.to_string() }
}

/// Writes `<name>.csv` and `<name>.manifest.toml`; the CSV is skipped when nothing was logged.
fn write_outputs(
    out: &Path,
    name: &str,
    input: &[u8],
    doc: &ConfigDocument,
    result: &RunResult,
) -> Result<Vec<TimeSeriesRecord>, Failure> {
    fs::create_dir_all(out).map_err(|e| io_failure(out, e))?;
    let (records, status) = match result {
        Ok(r) => (r.clone(), "ok".to_string()),
        Err(e) => (e.partial.clone(), format!("failed: {}", e.error)),
    };
    if !records.is_empty() {
        let path = out.join(format!("{name}.csv"));
        let file = fs::File::create(&path).map_err(|e| io_failure(&path, e))?;
        write_csv(&records, std::io::BufWriter::new(file)).map_err(|e| io_failure(&path, e))?;
    }
    let path = out.join(format!("{name}.manifest.toml"));
    let manifest = RunManifest::new(input, records.len(), status, doc.clone());
    fs::write(&path, manifest.to_toml()).map_err(|e| io_failure(&path, e))?;
    Ok(records)
}

fn run(config: &Path, out: &Path, plot: &[String]) -> Result<(), Failure> {
    let (input, table) = read(config)?;
    let doc = document(&table)?;
    let signals: Vec<&str> = plot.iter().map(String::as_str).collect();
    if let Some(name) = signals.iter().find(|s| TimeSeriesRecord::column(s).is_none()) {
        return Err(PlotError::UnknownSignal { name: name.to_string() }.into());
    }
    let (scenario, sim_config) = doc.resolve()?;
    let result = Simulator::new(scenario, sim_config).map_err(|e| sim_failure(&e))?.run();
    let name = stem(config);
    let records = write_outputs(out, &name, &input, &doc, &result)?;
    if let Err(e) = &result {
        return Err(sim_failure(&e.error));
    }
    if !signals.is_empty() {
        emit_plot(&records, &signals, &out.join(format!("{name}.svg")))?;
    }
    println!("{}: {} records written to {}", config.display(), records.len(), out.display());
    Ok(())
}

fn with_override(table: &Table, param: &str, value: f64) -> Result<Table, Failure> {
    let bad = |m: &str| Failure { code: EXIT_INVALID, message: format!("--param {param}: {m}") };
    let (section, key) = param.split_once('.').ok_or_else(|| bad("expected section.key"))?;
    if section == "events" {
        return Err(bad("events cannot be swept"));
    }
    let mut t = table.clone();
    let entry = t.entry(section.to_string()).or_insert_with(|| Value::Table(Table::new()));
    let Value::Table(s) = entry else {
        return Err(bad("section is not a table"));
    };
    let v = if value.fract() == 0.0 && value.abs() < 2f64.powi(53) { Value::Integer(value as i64) } else { Value::Float(value) };
    s.insert(key.to_string(), v);
    Ok(t)
}

fn sweep(config: &Path, param: &str, values: &[f64], out: &Path) -> Result<(), Failure> {
    let (input, table) = read(config)?;
    let mut docs = Vec::with_capacity(values.len());
    let mut jobs = Vec::with_capacity(values.len());
    for &v in values {
        let doc = document(&with_override(&table, param, v)?)?;
        jobs.push(doc.resolve()?);
        docs.push(doc);
    }
    let results = run_batch(&jobs);
    let base = stem(config);
    let key = param.rsplit('.').next().unwrap_or(param);
    let mut failure = None;
    for ((v, doc), result) in values.iter().zip(&docs).zip(&results) {
        let name = format!("{base}_{key}_{v}");
        let records = write_outputs(out, &name, &input, doc, result)?;
        match result {
            Ok(_) => println!("{name}: {} records", records.len()),
            Err(e) => {
                let f = sim_failure(&e.error);
                eprintln!("error: {name}: {}", f.message);
                failure = Some(failure.map_or(f.code, |c: i32| c.max(f.code)));
            }
        }
    }
    match failure {
        None => Ok(()),
        Some(code) => Err(Failure { code, message: "one or more sweep runs failed".into() }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const GOOD: &str = "[grid]\nvm = 1.0\nf = 60\n\n[simulation]\ndt = 1e-4\nt_end = 0.02\n";

    fn call(args: &[&str]) -> i32 {
        cli_main(std::iter::once("gfl-emt").chain(args.iter().copied()))
    }

    fn write(dir: &Path, name: &str, text: &str) -> String {
        let p = dir.join(name);
        fs::write(&p, text).unwrap();
        p.to_string_lossy().into_owned()
    }

    #[test]
    fn validate_exit_codes() {
        let dir = tempfile::tempdir().unwrap();
        assert_eq!(call(&["validate", &write(dir.path(), "good.toml", GOOD)]), EXIT_OK);
        assert_eq!(call(&["validate", &write(dir.path(), "bad.toml", "[grid\nvm = 1\n")]), EXIT_INVALID);
        let unstable = GOOD.replace("dt = 1e-4", "dt = 1e-2");
        assert_eq!(call(&["validate", &write(dir.path(), "unstable.toml", &unstable)]), EXIT_INVALID);
        assert_eq!(call(&["validate", &dir.path().join("missing.toml").to_string_lossy()]), EXIT_INVALID);
        assert_eq!(call(&["frobnicate"]), EXIT_INVALID);
    }

    #[test]
    fn run_writes_csv_manifest_and_plot() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = write(dir.path(), "case.toml", GOOD);
        let out = dir.path().join("out");
        let code = call(&["run", &cfg, "--out", &out.to_string_lossy(), "--plot", "theta_pll_rad,p_g"]);
        assert_eq!(code, EXIT_OK);
        let csv = fs::read_to_string(out.join("case.csv")).unwrap();
        assert_eq!(csv.lines().count(), 1 + 201);
        let manifest = fs::read_to_string(out.join("case.manifest.toml")).unwrap();
        assert!(manifest.contains(&super::super::sha256_hex(GOOD.as_bytes())));
        assert!(fs::metadata(out.join("case.svg")).unwrap().len() > 0);
    }

    #[test]
    fn unknown_plot_signal_is_rejected_before_running() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = write(dir.path(), "case.toml", GOOD);
        let out = dir.path().join("out");
        assert_eq!(call(&["run", &cfg, "--out", &out.to_string_lossy(), "--plot", "nope"]), EXIT_INVALID);
        assert!(!out.join("case.csv").exists());
    }

    #[test]
    fn solver_failure_exits_two_with_partial_csv() {
        let dir = tempfile::tempdir().unwrap();
        let text = format!(
            "{GOOD}max_iter = 1\n\n[[events]]\ntime = 0.01\nkind = \"phase_jump\"\nvalue = 1.0\n"
        );
        let cfg = write(dir.path(), "fail.toml", &text);
        let out = dir.path().join("out");
        assert_eq!(call(&["run", &cfg, "--out", &out.to_string_lossy()]), EXIT_SOLVER);
        let csv = fs::read_to_string(out.join("fail.csv")).unwrap();
        assert!(csv.lines().count() > 1 && csv.lines().count() < 202);
        let manifest = fs::read_to_string(out.join("fail.manifest.toml")).unwrap();
        assert!(manifest.contains("status = \"failed"));
    }

    #[test]
    fn sweep_fans_out() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = write(dir.path(), "cfg.toml", GOOD);
        let out = dir.path().join("sweep");
        let code = call(&[
            "sweep",
            &cfg,
            "--param",
            "frequency_support.kf",
            "--values",
            "10,20,40",
            "--out",
            &out.to_string_lossy(),
        ]);
        assert_eq!(code, EXIT_OK);
        for v in ["10", "20", "40"] {
            assert!(out.join(format!("cfg_kf_{v}.csv")).exists());
            let m = fs::read_to_string(out.join(format!("cfg_kf_{v}.manifest.toml"))).unwrap();
            assert!(m.contains(&format!("kf = {v}.0")), "{m}");
        }
        let bad = ["sweep", &cfg, "--param", "frequency_support.gain", "--values", "1"];
        assert_eq!(call(&bad), EXIT_INVALID);
    }
}
