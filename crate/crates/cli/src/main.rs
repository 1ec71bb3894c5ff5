mod manifest;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::Value;

use spectra_core::fmt::float;
use spectra_core::incoherence::{self, IncoherenceEstimate};
use spectra_core::montecarlo::{self, CalibrationGrid, CompareConfig, ExperimentConfig, SweepConfig};
use spectra_core::sandwich;
use spectra_core::{DistributionSpec, Error};

use manifest::{canonical_hash, RunManifest};

const EXIT_VIOLATION: u8 = 2;
const EXIT_PARSE: u8 = 64;
const EXIT_SPEC: u8 = 65;
const EXIT_IO: u8 = 1;

#[derive(Parser)]
#[command(name = "spectra", version, about = "Relative eigenvalue bounds for empirical covariance matrices")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check the generalized Ostrowski sandwich and both counting lemmas on random instances
    ValidateSandwich(ValidateArgs),
    /// Measure coverage of the selected bounds
    Coverage(RunArgs),
    /// Fit the log-log rate of the median max relative deviation
    Sweep(RunArgs),
    /// Estimate the incoherence parameter m
    Incoherence(RunArgs),
    /// Compare uniform (Weyl) and relative intervals on a decaying spectrum
    Compare(RunArgs),
    /// Fit the free constant of a bound to a target coverage
    Calibrate(RunArgs),
}

#[derive(Args)]
struct ValidateArgs {
    /// Number of random instances
    #[arg(long, default_value_t = 1000)]
    instances: usize,
    /// Largest n and d drawn
    #[arg(long, default_value_t = 64)]
    max_dim: usize,
    /// Master seed
    #[arg(long, env = "SPECTRA_SEED", default_value_t = 0)]
    seed: u64,
    /// Corrupt the first instance (negative-path test hook)
    #[arg(long)]
    inject_violation: bool,
    /// Worker threads (default: logical cores)
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Args)]
struct RunArgs {
    /// JSON config file
    config: PathBuf,
    /// Output directory (overrides the config's output_path)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Master seed (overrides the config's master_seed)
    #[arg(long, env = "SPECTRA_SEED")]
    seed: Option<u64>,
    /// Worker threads (default: logical cores)
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Debug)]
enum Failure {
    Parse(String),
    Spec(String),
    Io(String),
    Violation(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Parse(_) => EXIT_PARSE,
            Failure::Spec(_) => EXIT_SPEC,
            Failure::Io(_) => EXIT_IO,
            Failure::Violation(_) => EXIT_VIOLATION,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Parse(m) | Failure::Spec(m) | Failure::Io(m) | Failure::Violation(m) => m,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Parse(_) => Failure::Parse(e.to_string()),
            e if e.is_spec_error() => Failure::Spec(e.to_string()),
            e => Failure::Io(e.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Io(e.to_string())
    }
}

type Outcome = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::ValidateSandwich(a) => validate_sandwich(a),
        Command::Coverage(a) => run(a, "coverage", coverage),
        Command::Sweep(a) => run(a, "sweep", sweep),
        Command::Incoherence(a) => run(a, "incoherence", incoherence_cmd),
        Command::Compare(a) => run(a, "compare", compare),
        Command::Calibrate(a) => run(a, "calibrate", calibrate),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}

fn validate_sandwich(a: ValidateArgs) -> Outcome {
    let mut checks = montecarlo::with_workers(a.workers, || sandwich::validate_random(a.instances, a.max_dim, a.seed))??;
    if a.inject_violation {
        if let Some(c) = checks.first_mut() {
            c.sandwich_ok = false;
            c.worst_excess = f64::INFINITY;
        }
    }
    let count = |f: fn(&sandwich::InstanceCheck) -> bool| checks.iter().filter(|c| !f(c)).count();
    let rows = [
        ("ostrowski sandwich", count(|c| c.sandwich_ok)),
        ("counting lemma (lower)", count(|c| c.lower_lemma_ok)),
        ("counting lemma (upper)", count(|c| c.upper_lemma_ok)),
    ];
    let worst = checks.iter().map(|c| c.worst_excess).fold(f64::NEG_INFINITY, f64::max);
    println!("{:<24} {:>9} {:>10}  status", "check", "instances", "violations");
    for (name, bad) in rows {
        println!("{name:<24} {:>9} {bad:>10}  {}", checks.len(), if bad == 0 { "pass" } else { "FAIL" });
    }
    println!("worst relative excess: {}", float(worst));
    let total: usize = rows.iter().map(|r| r.1).sum();
    if total > 0 {
        return Err(Failure::Violation(format!("{total} violations")));
    }
    Ok(())
}

/// A loaded config: the typed document plus what the manifest needs.
struct Loaded<T> {
    config: T,
    hash: String,
    seed: u64,
    out_dir: PathBuf,
}

#[derive(Deserialize)]
struct Header {
    schema: Option<u64>,
}

fn load<T: DeserializeOwned>(args: &RunArgs, command: &str) -> Result<Loaded<T>, Failure> {
    let text = fs::read_to_string(&args.config)
        .map_err(|e| Failure::Parse(format!("cannot read {}: {e}", args.config.display())))?;
    let mut value: Value = serde_json::from_str(&text)
        .map_err(|e| Failure::Parse(format!("{}: {e}", args.config.display())))?;
    let header: Header = serde_json::from_value(value.clone()).map_err(|e| Failure::Parse(e.to_string()))?;
    match header.schema {
        Some(1) => {}
        Some(v) => return Err(Failure::Parse(format!("unsupported schema version {v}"))),
        None => return Err(Failure::Parse("config is missing \"schema\": 1".into())),
    }
    let obj = value.as_object_mut().ok_or_else(|| Failure::Parse("config must be a JSON object".into()))?;
    obj.remove("schema");
    let configured_out = obj.remove("output_path").and_then(|v| v.as_str().map(PathBuf::from));
    if let Some(seed) = args.seed {
        obj.insert("master_seed".into(), Value::from(seed));
    }
    let seed = obj.get("master_seed").and_then(Value::as_u64).unwrap_or(0);
    let hash = canonical_hash(&value);
    let config = serde_json::from_value(value).map_err(|e| Failure::Parse(format!("{}: {e}", args.config.display())))?;
    let out_dir = args
        .out
        .clone()
        .or(configured_out)
        .unwrap_or_else(|| PathBuf::from("out").join(command));
    Ok(Loaded { config, hash, seed, out_dir })
}

fn write(dir: &Path, name: &str, body: &str, outputs: &mut Vec<String>) -> Outcome {
    fs::write(dir.join(name), body)?;
    outputs.push(name.to_string());
    Ok(())
}

fn to_json<T: serde::Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

type Handler<T> = fn(&T, &Path, &mut Vec<String>) -> Outcome;

fn run<T: DeserializeOwned + Sync>(args: RunArgs, command: &str, handler: Handler<T>) -> Outcome {
    let loaded: Loaded<T> = load(&args, command)?;
    let mut manifest = RunManifest::start(command, &loaded.hash, loaded.seed);
    fs::create_dir_all(&loaded.out_dir)?;
    let mut outputs = Vec::new();
    let dir = loaded.out_dir.as_path();
    let result = montecarlo::with_workers(args.workers, || handler(&loaded.config, dir, &mut outputs))?;
    manifest.finish(outputs);
    fs::write(dir.join("manifest.json"), to_json(&manifest))?;
    result
}

fn coverage(cfg: &ExperimentConfig, dir: &Path, outputs: &mut Vec<String>) -> Outcome {
    let run = montecarlo::run_coverage(cfg)?;
    let reports = run.reports();
    write(dir, "summary.csv", &montecarlo::summary_csv(&reports), outputs)?;
    write(dir, "diagnostics.csv", &montecarlo::diagnostics_csv(&run), outputs)?;
    let intervals: Vec<_> = run.cells.iter().flat_map(|c| c.intervals.iter().copied()).collect();
    write(dir, "intervals.csv", &montecarlo::intervals_csv(&intervals), outputs)?;
    write(dir, "summary.json", &to_json(&reports), outputs)?;

    println!(
        "{:<24} {:>10} {:>12} {:>12} {:>10} {:>7}",
        "theorem", "t", "theoretical", "empirical_failure", "wilson", "trials"
    );
    for r in &reports {
        println!(
            "{:<24} {:>10.4} {:>12.4e} {:>17.4} {:>10.4} {:>7}",
            r.theorem.as_str(),
            r.t,
            r.theoretical_failure,
            r.empirical_failure,
            r.wilson_halfwidth,
            r.trials
        );
    }
    if !run.guardrail_ok() {
        return Err(Failure::Violation(format!(
            "realized-deviation sandwich violated in {} trials",
            run.guardrail.failures()
        )));
    }
    Ok(())
}

fn sweep(cfg: &SweepConfig, dir: &Path, outputs: &mut Vec<String>) -> Outcome {
    let fit = montecarlo::run_rate_fit(cfg)?;
    let mut csv = String::from("x,median_max_relative_deviation\n");
    for (x, y) in fit.x_values.iter().zip(&fit.y_values) {
        csv.push_str(&format!("{},{}\n", float(*x), float(*y)));
    }
    write(dir, "rate_fit.csv", &csv, outputs)?;
    write(dir, "rate_fit.json", &to_json(&fit), outputs)?;
    println!("slope {:.4}  intercept {:.4}  r^2 {:.4}", fit.slope, fit.intercept, fit.r_squared);
    Ok(())
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct IncoherenceConfig {
    spec: DistributionSpec,
    n: usize,
    trials: usize,
    master_seed: u64,
}

fn incoherence_cmd(cfg: &IncoherenceConfig, dir: &Path, outputs: &mut Vec<String>) -> Outcome {
    let est: IncoherenceEstimate = incoherence::empirical_incoherence(&cfg.spec, cfg.n, cfg.trials, cfg.master_seed)?;
    write(dir, "incoherence.json", &to_json(&est), outputs)?;
    println!("empirical_m {}  (n = {}, d = {}, trials = {})", float(est.empirical_m), est.n, est.d, est.trials);
    Ok(())
}

fn compare(cfg: &CompareConfig, dir: &Path, outputs: &mut Vec<String>) -> Outcome {
    let table = montecarlo::run_uniform_vs_relative(cfg)?;
    write(dir, "compare.csv", &montecarlo::compare_csv(&table), outputs)?;
    write(dir, "compare.json", &to_json(&table), outputs)?;
    println!("median ‖Σ̂ − Σ‖₂ = {:.6}, t = {:.6}", table.spectral_deviation, table.t);
    println!(
        "{:>5} {:>12} {:>13} {:>14}  uniform vacuous",
        "index", "lambda", "uniform_lower", "relative_lower"
    );
    for r in &table.rows {
        println!(
            "{:>5} {:>12.4e} {:>13.4e} {:>14.4e}  {}",
            r.index,
            r.population,
            r.uniform_lower,
            r.relative_lower,
            if r.uniform_vacuous { "yes" } else { "" }
        );
    }
    match table.threshold_index {
        Some(i) => println!("uniform lower bound vacuous for every index >= {i}"),
        None => println!("no index threshold found"),
    }
    Ok(())
}

fn calibrate(grid: &CalibrationGrid, dir: &Path, outputs: &mut Vec<String>) -> Outcome {
    let cal = montecarlo::calibrate_constant(grid)?;
    let mut csv = String::from("family,n,d,coverage\n");
    for e in &cal.evidence {
        csv.push_str(&format!("{:?},{},{},{}\n", e.family, e.n, e.d, float(e.coverage)));
    }
    write(dir, "evidence.csv", &csv, outputs)?;
    write(dir, "calibration.json", &to_json(&cal), outputs)?;
    println!("{} = {}  (target coverage {})", cal.constant, float(cal.value), grid.target_coverage);
    Ok(())
}
