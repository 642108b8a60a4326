//! Experiment orchestration: accuracy sweeps driven by the parameter
//! recipes, hitting-time collection, rate-exponent fitting, geometry
//! comparisons, and CSV/JSON persistence.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::optimizer::{
    euclidean_baseline, run, schedule, MomentumOption, OptimizerConfig, Recorder, Regime,
    ScheduleConstants, Target, TrajectoryRecord, TrajectoryRow,
};
use crate::problems::{make_benchmark, scalarize, BenchmarkConfig, ProblemSpec};
use crate::util::{fmt_f64, map_indexed};

/// Benchmark reference as it appears in config files: a generator name plus
/// a free-form parameter object.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProblemRef {
    pub name: String,
    #[serde(default)]
    pub params: serde_json::Value,
}

impl ProblemRef {
    pub fn to_benchmark(&self) -> Result<BenchmarkConfig> {
        let mut map = match &self.params {
            serde_json::Value::Null => serde_json::Map::new(),
            serde_json::Value::Object(m) => m.clone(),
            other => {
                return Err(Error::InvalidConfig(format!(
                    "problem params must be an object, got {other}"
                )))
            }
        };
        map.insert(
            "name".to_string(),
            serde_json::Value::String(self.name.clone()),
        );
        Ok(serde_json::from_value(serde_json::Value::Object(map))?)
    }
}

/// A full sweep description (the CLI config document).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub problem: ProblemRef,
    /// Schedule selector, e.g. `"t3-convex"`: family t1/t2/t3 picks the
    /// momentum estimator's recipe, the suffix the regime.
    pub thm: String,
    /// Momentum estimator; defaults to the one matching the schedule family.
    #[serde(default)]
    pub option: Option<MomentumOption>,
    pub eps_list: Vec<f64>,
    pub seeds: Vec<u64>,
    #[serde(default = "default_c_mult")]
    pub c_mult: f64,
    pub output_dir: PathBuf,
}

fn default_c_mult() -> f64 {
    1.0
}

/// Splits `"t1-nonconvex"`-style selectors into the matching estimator and
/// regime.
pub fn parse_thm(thm: &str) -> Result<(MomentumOption, Regime)> {
    let lower = thm.to_ascii_lowercase();
    let (family, regime) = lower.split_once('-').ok_or_else(|| {
        Error::InvalidConfig(format!(
            "schedule selector '{thm}' must look like t1-nonconvex or t3-convex"
        ))
    })?;
    let option = match family {
        "t1" => MomentumOption::M1,
        "t2" => MomentumOption::M2,
        "t3" => MomentumOption::M3,
        other => {
            return Err(Error::InvalidConfig(format!(
                "unknown schedule family '{other}' (expected t1|t2|t3)"
            )))
        }
    };
    Ok((option, regime.parse()?))
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.eps_list.is_empty() {
            return Err(Error::InvalidConfig("eps_list must be non-empty".into()));
        }
        if !self.eps_list.iter().all(|e| *e > 0.0) {
            return Err(Error::InvalidConfig("eps values must be positive".into()));
        }
        if !self.eps_list.windows(2).all(|w| w[0] > w[1]) {
            return Err(Error::InvalidConfig(
                "eps_list must be strictly decreasing".into(),
            ));
        }
        if self.seeds.is_empty() {
            return Err(Error::InvalidConfig("seeds must be non-empty".into()));
        }
        if !(self.c_mult > 0.0) {
            return Err(Error::InvalidConfig("c_mult must be positive".into()));
        }
        parse_thm(&self.thm)?;
        self.problem.to_benchmark()?;
        Ok(())
    }
}

/// Short content hash identifying a (config, eps) pair in file names.
pub fn config_hash(cfg: &ExperimentConfig, eps: f64) -> String {
    let mut hasher = Sha256::new();
    let doc = serde_json::json!({
        "problem": cfg.problem,
        "thm": cfg.thm,
        "option": cfg.option,
        "c_mult": cfg.c_mult,
        "eps": fmt_f64(eps),
    });
    hasher.update(doc.to_string().as_bytes());
    hex::encode(&hasher.finalize()[..6])
}

/// One run's condensed outcome.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunSummary {
    pub seed: u64,
    pub k_hit: u64,
    pub censored: bool,
    pub final_f_gap: f64,
    pub final_criterion: f64,
    pub descent_max_violation: Option<f64>,
    pub csv: String,
}

/// Aggregate over seeds at one accuracy level.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpsSummary {
    pub eps: f64,
    pub hash: String,
    pub schedule: OptimizerConfig,
    pub runs: Vec<RunSummary>,
    /// Mean hitting time with censored runs counted at the scheduled K.
    pub mean_k_hit: f64,
    pub censored_count: u64,
}

/// The sweep's summary document.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepSummary {
    pub thm: String,
    pub option: MomentumOption,
    pub c_mult: f64,
    pub problem: ProblemRef,
    pub seeds: Vec<u64>,
    pub per_eps: Vec<EpsSummary>,
}

/// Runs the full (eps x seed) grid, writing one CSV per run plus
/// `summary.json` (and `ratefit.json` when at least two accuracy levels
/// finish uncensored) under the configured output directory.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<SweepSummary> {
    cfg.validate()?;
    let (family_option, regime) = parse_thm(&cfg.thm)?;
    let option = cfg.option.unwrap_or(family_option);
    let bench = cfg.problem.to_benchmark()?;
    let p = make_benchmark(&bench)?;
    let x0 = p.x_opt.zeros_like();
    let constants = ScheduleConstants::from_problem(&p, &x0)?;
    let runs_dir = cfg.output_dir.join("runs");
    fs::create_dir_all(&runs_dir)?;

    let mut schedules = Vec::new();
    for &eps in &cfg.eps_list {
        let mut sched = schedule(family_option, regime, eps, &constants, cfg.c_mult)?;
        sched.option = option;
        schedules.push(sched);
    }

    // independent (eps, seed) runs, collected in grid order
    let n_seeds = cfg.seeds.len();
    let grid: Vec<Result<TrajectoryRecord>> =
        map_indexed(cfg.eps_list.len() * n_seeds, |idx| {
            let (ei, si) = (idx / n_seeds, idx % n_seeds);
            let rec = Recorder {
                stride: None,
                target: Some(Target {
                    eps: cfg.eps_list[ei],
                    use_f_gap: regime == Regime::Convex,
                }),
            };
            run(&p, &schedules[ei], x0.clone(), cfg.seeds[si], &rec)
        });

    let mut per_eps = Vec::new();
    let mut grid_iter = grid.into_iter();
    for (ei, &eps) in cfg.eps_list.iter().enumerate() {
        let hash = config_hash(cfg, eps);
        let sched = schedules[ei];
        let mut runs = Vec::new();
        let mut k_sum = 0.0;
        let mut censored_count = 0;
        for &seed in &cfg.seeds {
            let record = grid_iter.next().expect("grid size matches")?;
            let csv_name = format!("{hash}_{seed}.csv");
            persist_trajectory(&runs_dir.join(&csv_name), &record)?;
            let k_hit = record.k_hit.unwrap_or(sched.iterations);
            if record.censored {
                censored_count += 1;
            }
            k_sum += k_hit as f64;
            let last = record.rows.last().expect("at least the initial row");
            runs.push(RunSummary {
                seed,
                k_hit,
                censored: record.censored,
                final_f_gap: last.f_gap,
                final_criterion: last.criterion,
                descent_max_violation: record.descent_max_violation,
                csv: format!("runs/{csv_name}"),
            });
        }
        per_eps.push(EpsSummary {
            eps,
            hash,
            schedule: sched,
            runs,
            mean_k_hit: k_sum / n_seeds as f64,
            censored_count,
        });
    }
    let summary = SweepSummary {
        thm: cfg.thm.clone(),
        option,
        c_mult: cfg.c_mult,
        problem: cfg.problem.clone(),
        seeds: cfg.seeds.clone(),
        per_eps,
    };
    write_json(&cfg.output_dir.join("summary.json"), &summary)?;
    if let Ok(fit) = fit_rate(&summary_points(&summary)) {
        write_json(&cfg.output_dir.join("ratefit.json"), &fit)?;
    }
    Ok(summary)
}

/// Rate-fit input extracted from a sweep summary: one point per accuracy
/// level, censored when every seed was.
pub fn summary_points(summary: &SweepSummary) -> Vec<RatePoint> {
    summary
        .per_eps
        .iter()
        .map(|e| RatePoint {
            eps: e.eps,
            k_hit: e.mean_k_hit,
            censored: e.censored_count as usize == e.runs.len(),
        })
        .collect()
}

/// One (accuracy, hitting time) observation.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct RatePoint {
    pub eps: f64,
    pub k_hit: f64,
    pub censored: bool,
}

/// Least-squares fit of `log k_hit` against `log(1/eps)`; the slope
/// estimates the accuracy exponent of the iteration complexity.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub slope_stderr: f64,
    pub points: Vec<RatePoint>,
}

/// Fits the exponent on the uncensored points (at least two required).
pub fn fit_rate(points: &[RatePoint]) -> Result<RateFit> {
    let used: Vec<&RatePoint> = points
        .iter()
        .filter(|p| !p.censored && p.eps > 0.0 && p.k_hit > 0.0)
        .collect();
    if used.len() < 2 {
        return Err(Error::NotEnoughPoints {
            required: 2,
            got: used.len(),
        });
    }
    let n = used.len() as f64;
    let xs: Vec<f64> = used.iter().map(|p| (1.0 / p.eps).ln()).collect();
    let ys: Vec<f64> = used.iter().map(|p| p.k_hit.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidParameter(
            "all accuracy levels coincide; cannot fit a slope".into(),
        ));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_tot: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    let ss_res: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| {
            let r = y - (intercept + slope * x);
            r * r
        })
        .sum();
    let r_squared = if ss_tot == 0.0 {
        1.0
    } else {
        (1.0 - ss_res / ss_tot).clamp(0.0, 1.0)
    };
    let slope_stderr = if used.len() > 2 {
        (ss_res / (n - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    Ok(RateFit {
        slope,
        intercept,
        r_squared,
        slope_stderr,
        points: points.to_vec(),
    })
}

/// Hitting times of one geometry in a comparison.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GeometryResult {
    pub space: String,
    pub scheduled_k: u64,
    pub mean_k_hit: f64,
    pub censored_count: u64,
}

/// Structured-vs-Euclidean comparison on one benchmark family at a matched
/// accuracy.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GeometryComparison {
    pub family: String,
    pub eps: f64,
    pub structured: GeometryResult,
    pub scalar: GeometryResult,
    pub baseline_mean_k_hit: f64,
    pub baseline_censored: u64,
    /// Observed mean hitting-time ratio scalar / structured.
    pub k_hit_ratio: f64,
    /// Ratio of smoothness trace norms, the constant the structured
    /// geometry is predicted to save.
    pub predicted_ratio: f64,
}

fn run_matched(
    p: &ProblemSpec,
    option: MomentumOption,
    eps: f64,
    seeds: &[u64],
    c_mult: f64,
) -> Result<GeometryResult> {
    let x0 = p.x_opt.zeros_like();
    let constants = ScheduleConstants::from_problem(p, &x0)?;
    let sched = schedule(option, Regime::Convex, eps, &constants, c_mult)?;
    let rec = Recorder {
        stride: None,
        target: Some(Target {
            eps,
            use_f_gap: true,
        }),
    };
    let results = map_indexed(seeds.len(), |i| run(p, &sched, x0.clone(), seeds[i], &rec));
    let mut k_sum = 0.0;
    let mut censored = 0;
    for r in results {
        let r = r?;
        k_sum += r.k_hit.unwrap_or(sched.iterations) as f64;
        if r.censored {
            censored += 1;
        }
    }
    Ok(GeometryResult {
        space: format!("{:?}", p.space),
        scheduled_k: sched.iterations,
        mean_k_hit: k_sum / seeds.len() as f64,
        censored_count: censored,
    })
}

/// Runs one benchmark family under its structured geometry, the Euclidean
/// rebinding of the same objective, and a plain SGD baseline, at a matched
/// target accuracy with matched convex recipes.
pub fn compare_geometries(
    bench: &BenchmarkConfig,
    eps: f64,
    seeds: &[u64],
    c_mult: f64,
) -> Result<GeometryComparison> {
    if seeds.is_empty() {
        return Err(Error::InvalidConfig("seeds must be non-empty".into()));
    }
    let p = make_benchmark(bench)?;
    let ps = scalarize(&p)?;
    let option = MomentumOption::M3;
    let structured = run_matched(&p, option, eps, seeds, c_mult)?;
    let scalar = run_matched(&ps, option, eps, seeds, c_mult)?;

    // baseline: plain SGD at the scalar recipe's step budget and stepsize
    let x0s = ps.x_opt.zeros_like();
    let constants = ScheduleConstants::from_problem(&ps, &x0s)?;
    let sched = schedule(option, Regime::Convex, eps, &constants, c_mult)?;
    let rec = Recorder {
        stride: None,
        target: Some(Target {
            eps,
            use_f_gap: true,
        }),
    };
    let baseline_runs = map_indexed(seeds.len(), |i| {
        euclidean_baseline(&ps, sched.iterations, sched.eta, seeds[i], &rec)
    });
    let mut base_sum = 0.0;
    let mut base_censored = 0;
    for r in baseline_runs {
        let r = r?;
        base_sum += r.k_hit.unwrap_or(sched.iterations) as f64;
        if r.censored {
            base_censored += 1;
        }
    }
    Ok(GeometryComparison {
        family: bench.name.clone(),
        eps,
        k_hit_ratio: scalar.mean_k_hit / structured.mean_k_hit.max(1.0),
        predicted_ratio: ps.smoothness.trace_norm() / p.smoothness.trace_norm(),
        structured,
        scalar,
        baseline_mean_k_hit: base_sum / seeds.len() as f64,
        baseline_censored: base_censored,
    })
}

pub const CSV_HEADER: &str = "k,f,f_gap,criterion,R_x,momentum_err,step_norm";

/// Writes one trajectory as CSV: two comment lines of provenance, the fixed
/// header, then one row per recorded iteration with round-trip-exact floats.
pub fn persist_trajectory(path: &Path, record: &TrajectoryRecord) -> Result<()> {
    let mut out = String::new();
    out.push_str(&format!("# seed={}\n", record.seed));
    out.push_str(&format!(
        "# alpha={} beta={} eta={} iterations={}\n",
        fmt_f64(record.config.alpha),
        fmt_f64(record.config.beta),
        fmt_f64(record.config.eta),
        record.config.iterations
    ));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in &record.rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.k,
            fmt_f64(r.f),
            fmt_f64(r.f_gap),
            fmt_f64(r.criterion),
            fmt_f64(r.r_x),
            fmt_f64(r.momentum_err),
            fmt_f64(r.step_norm)
        ));
    }
    let mut file = fs::File::create(path)?;
    file.write_all(out.as_bytes())?;
    Ok(())
}

/// Reads rows back; errors name the first missing column.
pub fn load_trajectory(path: &Path) -> Result<Vec<TrajectoryRow>> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(path)?;
    let headers = reader.headers()?.clone();
    let mut idx = Vec::new();
    for col in CSV_HEADER.split(',') {
        let i = headers
            .iter()
            .position(|h| h == col)
            .ok_or_else(|| Error::MissingColumn(col.to_string()))?;
        idx.push(i);
    }
    let parse = |rec: &csv::StringRecord, j: usize| -> Result<f64> {
        rec.get(idx[j])
            .ok_or_else(|| Error::MissingColumn(CSV_HEADER.split(',').nth(j).unwrap().into()))?
            .parse()
            .map_err(|e| Error::InvalidParameter(format!("bad float in CSV: {e}")))
    };
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec?;
        let k: u64 = rec
            .get(idx[0])
            .ok_or_else(|| Error::MissingColumn("k".into()))?
            .parse()
            .map_err(|e| Error::InvalidParameter(format!("bad iteration index: {e}")))?;
        rows.push(TrajectoryRow {
            k,
            f: parse(&rec, 1)?,
            f_gap: parse(&rec, 2)?,
            criterion: parse(&rec, 3)?,
            r_x: parse(&rec, 4)?,
            momentum_err: parse(&rec, 5)?,
            step_norm: parse(&rec, 6)?,
        });
    }
    Ok(rows)
}

/// Pretty JSON with a trailing newline (byte-stable for fixed input).
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// Reads a JSON document.
pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::Rng;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn small_config(dir: &Path) -> ExperimentConfig {
        ExperimentConfig {
            problem: ProblemRef {
                name: "dense-diag".into(),
                params: serde_json::json!({"dim": 4}),
            },
            thm: "t3-convex".into(),
            option: None,
            eps_list: vec![0.3, 0.2],
            seeds: vec![1, 2, 1],
            c_mult: 1.0,
            output_dir: dir.to_path_buf(),
        }
    }

    #[test]
    fn fit_exact_power_law() {
        let points: Vec<RatePoint> = [0.2, 0.1, 0.05, 0.025]
            .iter()
            .map(|&eps: &f64| RatePoint {
                eps,
                k_hit: 3.0 / eps.powi(4),
                censored: false,
            })
            .collect();
        let fit = fit_rate(&points).unwrap();
        assert_relative_eq!(fit.slope, 4.0, epsilon = 1e-9);
        assert_relative_eq!(fit.r_squared, 1.0, epsilon = 1e-9);
    }

    #[test]
    fn fit_noisy_power_law() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let points: Vec<RatePoint> = (1..=8)
            .map(|i| {
                let eps = 0.5f64.powi(i);
                let noise: f64 = 1.0 + 0.1 * (rng.gen::<f64>() * 2.0 - 1.0);
                RatePoint {
                    eps,
                    k_hit: 5.0 * noise / (eps * eps),
                    censored: false,
                }
            })
            .collect();
        let fit = fit_rate(&points).unwrap();
        assert!((fit.slope - 2.0).abs() < 0.2, "slope {}", fit.slope);
    }

    #[test]
    fn fit_requires_two_uncensored_points() {
        let one = [RatePoint { eps: 0.1, k_hit: 100.0, censored: false }];
        assert!(matches!(
            fit_rate(&one),
            Err(Error::NotEnoughPoints { required: 2, got: 1 })
        ));
        let censored = [
            RatePoint { eps: 0.1, k_hit: 100.0, censored: true },
            RatePoint { eps: 0.05, k_hit: 400.0, censored: true },
        ];
        assert!(fit_rate(&censored).is_err());
    }

    #[test]
    fn sweep_writes_outputs_and_repeats_seeds() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = small_config(dir.path());
        let summary = run_sweep(&cfg).unwrap();
        assert_eq!(summary.per_eps.len(), 2);
        for e in &summary.per_eps {
            // duplicated seed 1 must reproduce its hitting time
            assert_eq!(e.runs[0].k_hit, e.runs[2].k_hit);
            for r in &e.runs {
                assert!(dir.path().join(&r.csv).exists());
            }
        }
        assert!(dir.path().join("summary.json").exists());
        // easy target: uncensored with small hitting times
        assert_eq!(summary.per_eps[0].censored_count, 0);

        // byte-identical reruns
        let bytes1 = fs::read(dir.path().join("summary.json")).unwrap();
        run_sweep(&cfg).unwrap();
        let bytes2 = fs::read(dir.path().join("summary.json")).unwrap();
        assert_eq!(bytes1, bytes2);
    }

    #[test]
    fn sweep_flags_censored_runs() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = small_config(dir.path());
        // far below the noise floor at a tiny iteration budget
        // (c_mult divides K: 15e12 / 1e12 leaves ~15 iterations)
        cfg.eps_list = vec![1e-6];
        cfg.c_mult = 1e12;
        let summary = run_sweep(&cfg).unwrap();
        assert!(summary.per_eps[0].censored_count > 0);
    }

    #[test]
    fn config_validation_rules() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = small_config(dir.path());
        cfg.eps_list = vec![0.1, 0.2];
        assert!(cfg.validate().is_err());
        let mut cfg = small_config(dir.path());
        cfg.thm = "t4-convex".into();
        assert!(cfg.validate().is_err());
        let mut cfg = small_config(dir.path());
        cfg.problem.params = serde_json::json!({"dim": 4, "bogus": 1});
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn trajectory_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = small_config(dir.path());
        let summary = run_sweep(&cfg).unwrap();
        let csv = dir.path().join(&summary.per_eps[0].runs[0].csv);
        let rows = load_trajectory(&csv).unwrap();
        assert!(!rows.is_empty());
        // write back and reload: exact reproduction of every float
        let record = TrajectoryRecord {
            rows: rows.clone(),
            seed: 1,
            config: summary.per_eps[0].schedule,
            k_hit: None,
            censored: false,
            descent_max_violation: None,
            final_x: crate::point::Point::vector([0.0]),
        };
        let path2 = dir.path().join("copy.csv");
        persist_trajectory(&path2, &record).unwrap();
        let rows2 = load_trajectory(&path2).unwrap();
        assert_eq!(rows, rows2);
    }

    #[test]
    fn load_names_missing_column() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        fs::write(&path, "k,f,f_gap,criterion,R_x,momentum_err\n0,1,1,1,1,1\n").unwrap();
        match load_trajectory(&path) {
            Err(Error::MissingColumn(c)) => assert_eq!(c, "step_norm"),
            other => panic!("expected missing-column error, got {other:?}"),
        }
    }

    #[test]
    fn geometry_comparison_favors_structure() {
        let mut bench = BenchmarkConfig::named("sparse-diag");
        bench.dim = Some(32);
        bench.delta = Some(1e-3);
        let cmp = compare_geometries(&bench, 0.1, &[0, 1], 1.0).unwrap();
        assert!(cmp.predicted_ratio > 10.0);
        assert!(
            cmp.k_hit_ratio > 2.0,
            "scalar {} vs structured {}",
            cmp.scalar.mean_k_hit,
            cmp.structured.mean_k_hit
        );
    }

    #[test]
    fn dense_family_predicts_no_advantage() {
        let mut bench = BenchmarkConfig::named("dense-diag");
        bench.dim = Some(8);
        let cmp = compare_geometries(&bench, 0.25, &[0], 1.0).unwrap();
        assert_relative_eq!(cmp.predicted_ratio, 1.0, epsilon = 1e-12);
    }
}
