//! Command-line interface: single runs, sweeps, verification suites, rate
//! fits, and the benchmark catalog.
//!
//! Exit codes: 0 success, 1 verification/acceptance failure, 2 usage or
//! configuration error.

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::{
    config_hash, fit_rate, parse_thm, persist_trajectory, read_json, run_sweep, summary_points,
    write_json, ExperimentConfig, ProblemRef, SweepSummary,
};
use crate::lemma_lab::{run_suite, Fault, Suite};
use crate::optimizer::{run, MomentumOption, Recorder, ScheduleConstants, Target};
use crate::problems::{make_benchmark, BENCHMARK_NAMES};
use crate::util::fmt_f64;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Parser)]
#[command(
    name = "nesgd",
    about = "Non-Euclidean stochastic gradient methods: runs, sweeps, \
             inequality verification, and rate fits",
    version
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Execute a single scheduled trajectory and persist it as CSV.
    Run {
        /// JSON config: {problem:{name,params}, thm, eps, option?, c_mult?}
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output directory (CSV lands under <out>/runs/).
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Run an accuracy sweep over (eps, seed) and summarize hitting times.
    Sweep {
        /// JSON config: {problem, thm, option?, eps_list, seeds, c_mult?,
        /// output_dir}
        #[arg(long)]
        config: PathBuf,
        /// Overrides the config's output_dir.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a verification suite and write a JSONL report.
    Verify {
        #[arg(long, default_value = "all")]
        suite: String,
        /// Trials per deterministic check.
        #[arg(long, default_value_t = 1000)]
        trials: u64,
        /// Samples per Monte-Carlo check.
        #[arg(long, default_value_t = 10_000)]
        mc_samples: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "verify.jsonl")]
        out: PathBuf,
        /// Testing hook: corrupt the duality check to exercise the failure
        /// path.
        #[arg(long, hide = true)]
        inject_fault: bool,
    },
    /// Fit the accuracy exponent from a sweep summary.
    Rates {
        /// Path to a summary.json produced by `sweep`.
        #[arg(long)]
        input: PathBuf,
        /// Where to write the fit (default: ratefit.json next to the input).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List the built-in benchmark generators.
    BenchList,
}

/// Config document for `run`: one problem, one schedule, one accuracy.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    pub problem: ProblemRef,
    pub thm: String,
    pub eps: f64,
    #[serde(default)]
    pub option: Option<MomentumOption>,
    #[serde(default = "default_c_mult")]
    pub c_mult: f64,
}

fn default_c_mult() -> f64 {
    1.0
}

fn usage_error(e: &Error) -> bool {
    matches!(
        e,
        Error::InvalidConfig(_)
            | Error::InvalidParameter(_)
            | Error::Json(_)
            | Error::Io(_)
            | Error::Csv(_)
            | Error::MissingColumn(_)
            | Error::ShapeMismatch { .. }
    )
}

/// Parses arguments and runs; returns the process exit code.
pub fn main_entry<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            // clap prints help/version on stdout with success
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            if usage_error(&e) {
                EXIT_USAGE
            } else {
                EXIT_FAILURE
            }
        }
    }
}

fn dispatch(cli: Cli) -> Result<i32> {
    match cli.cmd {
        Cmd::Run { config, seed, out } => cmd_run(&config, seed, &out),
        Cmd::Sweep { config, out } => cmd_sweep(&config, out),
        Cmd::Verify {
            suite,
            trials,
            mc_samples,
            seed,
            out,
            inject_fault,
        } => cmd_verify(&suite, trials, mc_samples, seed, &out, inject_fault),
        Cmd::Rates { input, out } => cmd_rates(&input, out),
        Cmd::BenchList => {
            for name in BENCHMARK_NAMES {
                println!("{name}");
            }
            Ok(EXIT_OK)
        }
    }
}

fn require_file(path: &Path) -> Result<()> {
    if !path.is_file() {
        return Err(Error::InvalidConfig(format!(
            "config file not found: {}",
            path.display()
        )));
    }
    Ok(())
}

fn cmd_run(config: &Path, seed: u64, out: &Path) -> Result<i32> {
    require_file(config)?;
    let rc: RunConfig = read_json(config)?;
    if !(rc.eps > 0.0) {
        return Err(Error::InvalidConfig("eps must be positive".into()));
    }
    let (family_option, regime) = parse_thm(&rc.thm)?;
    let option = rc.option.unwrap_or(family_option);
    let p = make_benchmark(&rc.problem.to_benchmark()?)?;
    let x0 = p.x_opt.zeros_like();
    let constants = ScheduleConstants::from_problem(&p, &x0)?;
    let mut sched = crate::optimizer::schedule(family_option, regime, rc.eps, &constants, rc.c_mult)?;
    sched.option = option;
    let rec = Recorder {
        stride: None,
        target: Some(Target {
            eps: rc.eps,
            use_f_gap: regime == crate::optimizer::Regime::Convex,
        }),
    };
    let record = run(&p, &sched, x0, seed, &rec)?;

    // single-run experiment hash reuses the sweep naming scheme
    let as_experiment = ExperimentConfig {
        problem: rc.problem.clone(),
        thm: rc.thm.clone(),
        option: rc.option,
        eps_list: vec![rc.eps],
        seeds: vec![seed],
        c_mult: rc.c_mult,
        output_dir: out.to_path_buf(),
    };
    let hash = config_hash(&as_experiment, rc.eps);
    let runs_dir = out.join("runs");
    std::fs::create_dir_all(&runs_dir)?;
    let csv = runs_dir.join(format!("{hash}_{seed}.csv"));
    persist_trajectory(&csv, &record)?;

    for row in &record.rows {
        if sched.radius.is_finite() && row.r_x > sched.radius + 1e-12 {
            eprintln!(
                "feasibility breach at k={}: R(x) = {} exceeds {}",
                row.k, row.r_x, sched.radius
            );
            return Ok(EXIT_FAILURE);
        }
    }
    let last = record.rows.last().expect("at least one row");
    println!(
        "K={} k_hit={} f_gap={} criterion={} csv={}",
        sched.iterations,
        record
            .k_hit
            .map_or_else(|| "censored".to_string(), |k| k.to_string()),
        fmt_f64(last.f_gap),
        fmt_f64(last.criterion),
        csv.display()
    );
    Ok(EXIT_OK)
}

fn cmd_sweep(config: &Path, out: Option<PathBuf>) -> Result<i32> {
    require_file(config)?;
    let mut cfg: ExperimentConfig = read_json(config)?;
    if let Some(out) = out {
        cfg.output_dir = out;
    }
    let summary = run_sweep(&cfg)?;
    for e in &summary.per_eps {
        println!(
            "eps={} K={} mean_k_hit={} censored={}/{}",
            e.eps,
            e.schedule.iterations,
            e.mean_k_hit,
            e.censored_count,
            e.runs.len()
        );
    }
    match fit_rate(&summary_points(&summary)) {
        Ok(fit) => println!(
            "slope={:.4} +- {:.4} (r^2={:.4})",
            fit.slope, fit.slope_stderr, fit.r_squared
        ),
        Err(e) => println!("no rate fit: {e}"),
    }
    println!("summary={}", cfg.output_dir.join("summary.json").display());
    Ok(EXIT_OK)
}

fn cmd_verify(
    suite: &str,
    trials: u64,
    mc_samples: u64,
    seed: u64,
    out: &Path,
    inject_fault: bool,
) -> Result<i32> {
    if trials == 0 || mc_samples == 0 {
        return Err(Error::InvalidConfig(
            "trials and mc-samples must be positive".into(),
        ));
    }
    let suite: Suite = suite.parse()?;
    let fault = if inject_fault {
        Fault::DualScale
    } else {
        Fault::None
    };
    let reports = run_suite(suite, trials, mc_samples, seed, fault)?;
    let mut jsonl = String::new();
    for r in &reports {
        jsonl.push_str(&serde_json::to_string(r)?);
        jsonl.push('\n');
    }
    if let Some(parent) = out.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    std::fs::write(out, jsonl)?;
    let failing: Vec<&str> = reports
        .iter()
        .filter(|r| !r.pass)
        .map(|r| r.lemma_id.as_str())
        .collect();
    println!(
        "{} checks, {} failed, report={}",
        reports.len(),
        failing.len(),
        out.display()
    );
    if failing.is_empty() {
        Ok(EXIT_OK)
    } else {
        eprintln!("failing checks: {}", failing.join(", "));
        Ok(EXIT_FAILURE)
    }
}

fn cmd_rates(input: &Path, out: Option<PathBuf>) -> Result<i32> {
    require_file(input)?;
    let summary: SweepSummary = read_json(input)?;
    let fit = match fit_rate(&summary_points(&summary)) {
        Ok(f) => f,
        Err(e @ Error::NotEnoughPoints { .. }) => {
            eprintln!("error: {e}");
            return Ok(EXIT_FAILURE);
        }
        Err(e) => return Err(e),
    };
    let out = out.unwrap_or_else(|| {
        input
            .parent()
            .unwrap_or_else(|| Path::new("."))
            .join("ratefit.json")
    });
    write_json(&out, &fit)?;
    println!(
        "slope={:.4} +- {:.4} (r^2={:.4}) fit={}",
        fit.slope,
        fit.slope_stderr,
        fit.r_squared,
        out.display()
    );
    Ok(EXIT_OK)
}
