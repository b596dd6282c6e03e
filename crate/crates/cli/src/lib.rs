//! Command-line front end: `estimate`, `simulate`, `check` and `tables`.
//!
//! Exit codes: 0 success (including a failing consistency report), 1 usage
//! error, 2 input parse error, 3 numeric failure.

pub mod config;
pub mod error;
pub mod input;
pub mod output;

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand};
use rankscope::criteria::{estimate, CandidateRange};
use rankscope::montecarlo::{builtin_tables, run_table_observed};
use rankscope::spectra::{spectrum_of, EigenSpectrum, ObservationSet};
use rankscope::theory::{consistency_for, default_gaic_gamma};
use rankscope::EstimatorSpec;
use sha2::{Digest, Sha256};

use crate::config::{plan_from_config, plan_from_table, KeyValues, Overrides};
use crate::error::{CliError, CliResult};
use crate::input::{read_input, Input};
use crate::output::{EstimatePayload, ExperimentPayload, Payload, ResultDocument, RunManifest};

pub const SEED_ENV: &str = "RANKSCOPE_SEED";

#[derive(Debug, Parser)]
#[command(
    name = "rankscope",
    version,
    about = "Estimate the number of signals in a spiked covariance model"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Select k from a data matrix or a line of eigenvalues.
    Estimate(EstimateArgs),
    /// Run a Monte Carlo grid (built-in table or config file).
    Simulate(SimulateArgs),
    /// Evaluate the closed-form consistency conditions.
    Check(CheckArgs),
    /// List the built-in simulation tables.
    Tables,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    /// CSV matrix (rows are observations) or a single line of eigenvalues.
    pub input: PathBuf,
    /// Number of observations behind an eigenvalue line.
    #[arg(long)]
    pub n: Option<usize>,
    /// Estimator tag, repeatable (default: mil, bic, aic, aic-mod, gaic, bfc, kn).
    #[arg(short, long = "estimator", value_name = "TAG")]
    pub estimators: Vec<String>,
    /// Largest candidate k' (default min(p-1, 15)).
    #[arg(long)]
    pub k_max: Option<usize>,
    /// Subtract column means before forming the covariance.
    #[arg(long)]
    pub center: bool,
    /// Write the result document as JSON.
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
    /// Write the criterion curves as CSV.
    #[arg(long, value_name = "PATH")]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[command(group = clap::ArgGroup::new("grid").required(true).args(["table", "config"]))]
pub struct SimulateArgs {
    /// Built-in table name (see `rankscope tables`).
    #[arg(long)]
    pub table: Option<String>,
    /// Flat key/value config file.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Write the result document as JSON.
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
    /// Write one CSV row per (cell, estimator).
    #[arg(long, value_name = "PATH")]
    pub csv: Option<PathBuf>,
    /// Worker threads (results do not depend on this).
    #[arg(long, default_value_t = default_workers())]
    pub workers: usize,
    /// Replicates per cell (default 200 or the config value).
    #[arg(long)]
    pub reps: Option<usize>,
    /// Master seed; overrides the config and the environment.
    #[arg(long, env = SEED_ENV)]
    pub seed: Option<u64>,
    /// Write every replicate spectrum as a one-line CSV into this directory.
    #[arg(long, value_name = "DIR")]
    pub dump: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub p: usize,
    #[arg(long)]
    pub k: usize,
    /// Smallest spike in noise units.
    #[arg(long = "lambda-k")]
    pub lambda_k: f64,
    /// AIC-type tuning parameter (default 1.1*phi(p/n)).
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Write the result document as JSON.
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

fn default_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn estimator_help() -> String {
    let mut s = String::from("Estimator tags (tag[:key=value,...]) and defaults:\n");
    for (tag, about) in EstimatorSpec::catalogue() {
        s.push_str(&format!("  {tag:<10} {about}\n"));
    }
    s.push_str("\nExit codes: 0 ok, 1 usage error, 2 input parse error, 3 numeric failure.");
    s
}

pub fn command() -> clap::Command {
    let help = estimator_help();
    Cli::command()
        .after_help(help.clone())
        .mut_subcommand("estimate", |c| c.after_help(help))
}

/// Parses `args` and runs the command, writing reports to `out` and
/// diagnostics to `err`. Returns the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match command()
        .try_get_matches_from(args)
        .and_then(|m| Cli::from_arg_matches(&m))
    {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() {
                CliError::EXIT_USAGE
            } else {
                CliError::EXIT_OK
            };
            let rendered = e.render().to_string();
            let _ = if e.use_stderr() {
                write!(err, "{rendered}")
            } else {
                write!(out, "{rendered}")
            };
            return code;
        }
    };
    match dispatch(cli.command, out, err) {
        Ok(()) => CliError::EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(command: Command, out: &mut dyn Write, err: &mut dyn Write) -> CliResult<()> {
    match command {
        Command::Estimate(a) => {
            let doc = cmd_estimate(&a, err)?;
            emit(&doc, out, a.out.as_deref(), a.csv.as_deref())
        }
        Command::Simulate(a) => {
            let doc = cmd_simulate(&a)?;
            emit(&doc, out, a.out.as_deref(), a.csv.as_deref())
        }
        Command::Check(a) => {
            let doc = cmd_check(&a)?;
            emit(&doc, out, a.out.as_deref(), None)
        }
        Command::Tables => {
            for t in builtin_tables() {
                writeln!(out, "{:<8} {:>3} cells  {}", t.name, t.cells.len(), t.title)
                    .map_err(|e| CliError::io("writing output", e))?;
            }
            Ok(())
        }
    }
}

fn write_file(path: &Path, text: &str) -> CliResult<()> {
    std::fs::write(path, text).map_err(|e| CliError::io(format!("writing {}", path.display()), e))
}

fn emit(doc: &ResultDocument, out: &mut dyn Write, json: Option<&Path>, csv: Option<&Path>) -> CliResult<()> {
    out.write_all(doc.to_human().as_bytes())
        .map_err(|e| CliError::io("writing output", e))?;
    if let Some(p) = json {
        write_file(p, &doc.to_json())?;
    }
    if let Some(p) = csv {
        write_file(p, &doc.to_csv())?;
    }
    Ok(())
}

fn parse_specs(tags: &[String]) -> CliResult<Vec<EstimatorSpec>> {
    if tags.is_empty() {
        return Ok(EstimatorSpec::standard_set());
    }
    tags.iter()
        .map(|t| t.parse::<EstimatorSpec>().map_err(|e| CliError::Usage(e.to_string())))
        .collect()
}

pub fn cmd_estimate(a: &EstimateArgs, err: &mut dyn Write) -> CliResult<ResultDocument> {
    let specs = parse_specs(&a.estimators)?;
    let (input, text) = read_input(&a.input)?;
    let spectrum = match input {
        Input::Eigenvalues(values) => {
            let n =
                a.n.ok_or_else(|| CliError::Usage("eigenvalue input needs --n (the number of observations)".into()))?;
            if a.center {
                return Err(CliError::Usage("--center applies to matrix input only".into()));
            }
            let (spec, sorted) = EigenSpectrum::from_unsorted(values, n)?;
            if sorted {
                let _ = writeln!(err, "warning: eigenvalues were not descending; sorted them");
            }
            spec
        }
        Input::Matrix(m) => {
            if let Some(n) = a.n {
                if n != m.nrows() {
                    return Err(CliError::Usage(format!(
                        "--n {n} does not match the {} rows of the matrix input",
                        m.nrows()
                    )));
                }
            }
            spectrum_of(&ObservationSet::new(m)?, a.center)?
        }
    };
    let p = spectrum.p();
    let range = match a.k_max {
        Some(k) => CandidateRange::new(k, p).map_err(|e| CliError::Usage(e.to_string()))?,
        None => CandidateRange::default_for(p),
    };
    let estimates = specs
        .iter()
        .map(|s| estimate(s, &spectrum, &range).map_err(|e| CliError::Numeric(format!("{s}: {e}"))))
        .collect::<CliResult<Vec<_>>>()?;
    let mut kv = KeyValues::default();
    kv.set("command", "estimate");
    kv.set("input_sha256", hex::encode(Sha256::digest(text.as_bytes())));
    kv.set(
        "estimators",
        specs.iter().map(|s| s.to_string()).collect::<Vec<_>>().join(";"),
    );
    kv.set("k_max", range.k_max().to_string());
    kv.set("center", a.center.to_string());
    kv.set("n", spectrum.n().to_string());
    Ok(ResultDocument {
        manifest: RunManifest::new("estimate", kv.digest(), None),
        payload: Payload::Estimate(EstimatePayload {
            source: a.input.display().to_string(),
            n: spectrum.n(),
            p,
            centered: a.center,
            eigenvalues: spectrum.values().to_vec(),
            estimates,
        }),
    })
}

pub fn cmd_simulate(a: &SimulateArgs) -> CliResult<ResultDocument> {
    if a.workers == 0 {
        return Err(CliError::Usage("--workers must be at least 1".into()));
    }
    if a.reps == Some(0) {
        return Err(CliError::Usage("--reps must be at least 1".into()));
    }
    let overrides = Overrides {
        reps: a.reps,
        seed: a.seed,
    };
    let plan = match (&a.table, &a.config) {
        (Some(name), None) => plan_from_table(name, overrides)?,
        (None, Some(path)) => {
            let text =
                std::fs::read_to_string(path).map_err(|e| CliError::io(format!("reading {}", path.display()), e))?;
            plan_from_config(&text, overrides)?
        }
        _ => return Err(CliError::Usage("give exactly one of --table or --config".into())),
    };
    let reports = match &a.dump {
        None => rankscope::montecarlo::run_table(&plan.cells, a.workers)?,
        Some(dir) => dump_run(&plan, dir, a.workers)?,
    };
    Ok(ResultDocument {
        manifest: RunManifest::new("simulate", plan.digest.clone(), Some(plan.seed())),
        payload: Payload::Experiment(ExperimentPayload {
            table: plan.name,
            title: plan.title,
            reports,
        }),
    })
}

/// Runs the plan while writing `cell{c}_rep{r}.csv` (one line of
/// eigenvalues) per replicate, plus an `index.csv` with the parameters
/// needed to re-estimate each file.
fn dump_run(
    plan: &config::SimulationPlan,
    dir: &Path,
    workers: usize,
) -> CliResult<Vec<rankscope::montecarlo::ExperimentReport>> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(format!("creating {}", dir.display()), e))?;
    let written = Mutex::new(Vec::new());
    let failure = Mutex::new(None);
    let observe = |cell: usize, rep: u64, d: &EigenSpectrum<f64>| {
        let name = file_name(cell, rep);
        let line: Vec<String> = d.values().iter().map(|v| format!("{v}")).collect();
        match std::fs::write(dir.join(&name), line.join(",") + "\n") {
            Ok(()) => written.lock().unwrap().push((cell, rep)),
            Err(e) => {
                failure
                    .lock()
                    .unwrap()
                    .get_or_insert(CliError::io(format!("writing {name}"), e));
            }
        }
    };
    let reports = run_table_observed(&plan.cells, workers, &observe)?;
    if let Some(e) = failure.into_inner().unwrap() {
        return Err(e);
    }
    let mut written = written.into_inner().unwrap();
    written.sort_unstable();
    let mut index = String::from("file,cell,rep,n,p,k,delta,snr,seed\n");
    for (cell, rep) in written {
        let r = &reports[cell];
        let c = &r.config;
        index.push_str(&format!(
            "{},{cell},{rep},{},{},{},{},{},{}\n",
            file_name(cell, rep),
            c.n,
            c.p,
            c.k,
            c.schedule.label(),
            r.snr,
            c.seed
        ));
    }
    write_file(&dir.join("index.csv"), &index)?;
    Ok(reports)
}

fn file_name(cell: usize, rep: u64) -> String {
    format!("cell{cell:03}_rep{rep:04}.csv")
}

pub fn cmd_check(a: &CheckArgs) -> CliResult<ResultDocument> {
    if a.k == 0 {
        return Err(CliError::Usage("--k must be at least 1".into()));
    }
    if a.n == 0 || a.p == 0 {
        return Err(CliError::Usage("--n and --p must be positive".into()));
    }
    if a.k >= a.p {
        return Err(CliError::Usage(format!("--k {} must be below --p {}", a.k, a.p)));
    }
    let gamma = match a.gamma {
        Some(g) if g > 0.0 => g,
        Some(g) => return Err(CliError::Usage(format!("--gamma must be positive, got {g}"))),
        None => default_gaic_gamma(a.n, a.p)?,
    };
    let report = consistency_for(a.n, a.p, a.k, a.lambda_k, gamma)?;
    let mut kv = KeyValues::default();
    kv.set("command", "check");
    kv.set("n", a.n.to_string());
    kv.set("p", a.p.to_string());
    kv.set("k", a.k.to_string());
    kv.set("lambda_k", format!("{}", a.lambda_k));
    kv.set("gamma", format!("{gamma}"));
    Ok(ResultDocument {
        manifest: RunManifest::new("check", kv.digest(), None),
        payload: Payload::Consistency(report),
    })
}
