use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use branchmax::pgf::{exact_max_cdf, exact_two_type_max_cdf, Conditioning, ProcessSpec};
use branchmax::simulate::{last_max, monte_carlo_map, run_bisexual, run_two_type_scored, EmpiricalDistribution};
use branchmax::suite::{
    load_config, load_suite, resolved_toml, run_experiment, Experiment, ExperimentConfig, Normalizer, Outcome,
};
use branchmax::verify::VerificationReport;
use branchmax::Error;
use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

/// Offspring maxima in branching processes: exact laws, simulation and
/// limit-law verification driven by TOML experiment files.
#[derive(Parser)]
#[command(name = "branchmax", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate the configured process; writes per-replicate values and the ECDF.
    Simulate(Common),
    /// Exact law of the maximum from the generating-function oracle.
    Exact(Common),
    /// Evaluate the configured limit law on its grid.
    Limit(Common),
    /// Run one experiment and write its report.
    Verify(Common),
    /// Run every experiment listed in a suite file.
    Suite(Common),
}

#[derive(Args)]
struct Common {
    /// Experiment file, or a suite file for `suite`.
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Overrides the seed of every experiment.
    #[arg(long, value_name = "U64")]
    seed: Option<u64>,
    /// Worker threads; defaults to all cores.
    #[arg(long, value_name = "N")]
    jobs: Option<usize>,
    #[arg(long, value_name = "DIR", default_value = "out")]
    out: PathBuf,
}

const SUMMARY_HEADER: [&str; 6] = ["experiment_id", "kind", "n", "sup_distance", "tolerance", "pass"];

/// Exit status of a failed command.
#[derive(Debug)]
enum Failure {
    Verification,
    Config(String),
    Numerical(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Verification => 1,
            Failure::Config(_) => 2,
            Failure::Numerical(_) => 3,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_numerical() {
            Failure::Numerical(e.to_string())
        } else {
            Failure::Config(e.to_string())
        }
    }
}

fn io_failure(path: &Path, e: impl std::fmt::Display) -> Failure {
    Failure::Config(format!("cannot write {}: {e}", path.display()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Simulate(c) => with_pool(c, simulate),
        Command::Exact(c) => with_pool(c, exact),
        Command::Limit(c) => with_pool(c, limit),
        Command::Verify(c) => with_pool(c, verify),
        Command::Suite(c) => with_pool(c, suite),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            match &f {
                Failure::Verification => {}
                Failure::Config(m) | Failure::Numerical(m) => eprintln!("error: {m}"),
            }
            ExitCode::from(f.code())
        }
    }
}

fn with_pool(c: &Common, f: fn(&Common) -> Result<(), Failure>) -> Result<(), Failure> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(j) = c.jobs {
        if j == 0 {
            return Err(Failure::Config("--jobs must be at least 1".into()));
        }
        builder = builder.num_threads(j);
    }
    let pool = builder.build().map_err(|e| Failure::Config(format!("cannot start worker pool: {e}")))?;
    pool.install(|| f(c))
}

fn load(c: &Common) -> Result<ExperimentConfig, Failure> {
    let mut cfg = load_config(&c.config)?;
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn out_dir(c: &Common) -> Result<&Path, Failure> {
    fs::create_dir_all(&c.out).map_err(|e| io_failure(&c.out, e))?;
    Ok(&c.out)
}

fn write_csv(path: &Path, header: &[String], rows: impl IntoIterator<Item = Vec<String>>) -> Result<(), Failure> {
    let mut w = csv::Writer::from_path(path).map_err(|e| io_failure(path, e))?;
    w.write_record(header).map_err(|e| io_failure(path, e))?;
    for row in rows {
        w.write_record(&row).map_err(|e| io_failure(path, e))?;
    }
    w.flush().map_err(|e| io_failure(path, e))
}

fn header(names: &[&str]) -> Vec<String> {
    names.iter().map(|s| s.to_string()).collect()
}

fn num(x: f64) -> String {
    if x.is_nan() {
        String::new()
    } else {
        x.to_string()
    }
}

fn require_process(cfg: &ExperimentConfig) -> Result<&ProcessSpec, Failure> {
    cfg.experiment.process().ok_or_else(|| {
        Failure::Config(format!("experiment kind '{}' does not define a process", cfg.experiment.kind()))
    })
}

fn final_horizon(cfg: &ExperimentConfig) -> Result<u64, Failure> {
    cfg.experiment.horizons().last().copied().ok_or_else(|| Failure::Config("experiment has no horizon".into()))
}

fn simulate(c: &Common) -> Result<(), Failure> {
    let cfg = load(c)?;
    let process = require_process(&cfg)?;
    let n = final_horizon(&cfg)?;
    let cond = cfg.experiment.conditioning();
    let dir = out_dir(c)?;
    let (values, attempts) = match process {
        ProcessSpec::TwoType { .. } => monte_carlo_map(cfg.replicates, cfg.seed, |rng| {
            let r = run_two_type_scored(process, n, rng)?;
            Ok((r.survived || cond == Conditioning::None).then_some(r.max_score))
        })?,
        ProcessSpec::Bisexual { .. } => {
            let (recs, attempts) =
                monte_carlo_map(cfg.replicates, cfg.seed, |rng| Ok(Some(run_bisexual(process, n, rng)?)))?;
            let path = dir.join(format!("{}.samples.csv", cfg.id));
            let rows = recs
                .iter()
                .enumerate()
                .map(|(i, r)| vec![i.to_string(), r.max.0.to_string(), r.max.1.to_string(), num(r.normalized)]);
            write_csv(&path, &header(&["replicate", "female_max", "male_max", "normalized"]), rows)?;
            println!("{}: {} replicates of the bisexual process to n = {n} ({attempts} attempts)", cfg.id, recs.len());
            return Ok(());
        }
        _ => monte_carlo_map(cfg.replicates, cfg.seed, |rng| Ok(last_max(process, n, cond, rng)?.map(|m| m as f64)))?,
    };
    let path = dir.join(format!("{}.samples.csv", cfg.id));
    write_csv(
        &path,
        &header(&["replicate", "max"]),
        values.iter().enumerate().map(|(i, v)| vec![i.to_string(), num(*v)]),
    )?;
    let e = EmpiricalDistribution::from_run(values, attempts);
    let support = e.support();
    // at most 1000 bins, at evenly spaced order statistics
    let step = support.len().div_ceil(1000).max(1);
    let mut points: Vec<f64> = support.iter().copied().step_by(step).collect();
    if let Some(last) = support.last() {
        if points.last() != Some(last) {
            points.push(*last);
        }
    }
    let path = dir.join(format!("{}.ecdf.csv", cfg.id));
    write_csv(&path, &header(&["x", "ecdf"]), points.iter().map(|x| vec![num(*x), num(e.cdf(*x))]))?;
    println!(
        "{}: {} replicates at n = {n}, acceptance rate {:.4}, mean maximum {:.6}",
        cfg.id,
        e.replicates(),
        e.acceptance_rate(),
        e.mean()
    );
    Ok(())
}

/// Cap on the integer levels written by `exact` when the cdf is slow to reach one.
const MAX_LEVELS: u64 = 10_000;

fn exact(c: &Common) -> Result<(), Failure> {
    let cfg = load(c)?;
    let process = require_process(&cfg)?;
    if matches!(process, ProcessSpec::Bisexual { .. }) {
        return Err(Failure::Config("the bisexual process has no exact oracle".into()));
    }
    let cond = cfg.experiment.conditioning();
    let grid = match &cfg.experiment {
        Experiment::ExactVsLimit { norming, .. } if *norming != Normalizer::Identity => cfg.experiment.grid_points()?,
        _ => None,
    };
    let eval = |n: u64, x: f64| match process {
        ProcessSpec::TwoType { .. } => exact_two_type_max_cdf(process, n, x),
        _ => exact_max_cdf(process, n, x, cond),
    };
    let mut rows = Vec::new();
    for n in cfg.experiment.horizons() {
        match (&grid, &cfg.experiment) {
            (Some(points), Experiment::ExactVsLimit { norming, .. }) => {
                for x in points {
                    let level = norming.level(process, n, *x)?;
                    rows.push(vec![n.to_string(), num(level), num(eval(n, level)?), "0".into()]);
                }
            }
            _ => {
                for k in 0..=MAX_LEVELS {
                    let v = eval(n, k as f64)?;
                    rows.push(vec![n.to_string(), k.to_string(), num(v), "0".into()]);
                    if v >= 1.0 - 1e-12 {
                        break;
                    }
                }
            }
        }
    }
    let dir = out_dir(c)?;
    let path = dir.join(format!("{}.exact.csv", cfg.id));
    let count = rows.len();
    write_csv(&path, &header(&["n", "x", "value", "truncation_mass"]), rows)?;
    println!("{}: {count} exact values written to {}", cfg.id, path.display());
    Ok(())
}

fn limit(c: &Common) -> Result<(), Failure> {
    let cfg = load(c)?;
    let law = cfg.experiment.limit().ok_or_else(|| {
        Failure::Config(format!("experiment kind '{}' has no scalar limit law", cfg.experiment.kind()))
    })?;
    let grid = match cfg.experiment.grid_points()? {
        Some(g) => g,
        None => law.quantile_grid()?,
    };
    // laws without a closed-form mean leave the column empty
    let mean = law.mean().map(num).unwrap_or_default();
    let rows: Vec<Vec<String>> =
        grid.iter().map(|x| Ok(vec![num(*x), num(law.cdf(*x)?), mean.clone()])).collect::<Result<_, Error>>()?;
    let dir = out_dir(c)?;
    let path = dir.join(format!("{}.limit.csv", cfg.id));
    write_csv(&path, &header(&["x", "cdf", "mean_formula_value"]), rows)?;
    println!("{}: limit law evaluated at {} points", cfg.id, grid.len());
    Ok(())
}

fn write_outcome(dir: &Path, cfg: &ExperimentConfig, out: &Outcome) -> Result<(), Failure> {
    let json = serde_json::to_string_pretty(&out.report)
        .map_err(|e| Failure::Numerical(format!("cannot serialize report: {e}")))?;
    let path = dir.join(format!("{}.json", cfg.id));
    fs::write(&path, json + "\n").map_err(|e| io_failure(&path, e))?;
    let path = dir.join(format!("{}.resolved.toml", cfg.id));
    fs::write(&path, resolved_toml(cfg)?).map_err(|e| io_failure(&path, e))?;
    let path = dir.join(format!("{}.csv", cfg.id));
    write_csv(&path, &out.table.header, out.table.rows.iter().map(|r| r.iter().map(|v| num(*v)).collect()))
}

fn write_summary(dir: &Path, reports: &[&VerificationReport]) -> Result<(), Failure> {
    let rows = reports.iter().map(|r| {
        vec![
            r.experiment_id.clone(),
            r.kind.as_str().to_string(),
            r.n.to_string(),
            num(r.sup_distance),
            num(r.tolerance),
            r.pass.to_string(),
        ]
    });
    write_csv(&dir.join("summary.csv"), &header(&SUMMARY_HEADER), rows)
}

fn print_report(r: &VerificationReport) {
    let verdict = if r.pass { "PASS" } else { "FAIL" };
    println!(
        "{verdict} {} [{}] n = {}: sup distance {:.4e}, tolerance {:.4e} ({:.1} s)",
        r.experiment_id,
        r.kind.as_str(),
        r.n,
        r.sup_distance,
        r.tolerance,
        r.runtime
    );
    if !r.pass {
        for note in &r.notes {
            println!("    {note}");
        }
    }
}

fn verify(c: &Common) -> Result<(), Failure> {
    let cfg = load(c)?;
    let dir = out_dir(c)?;
    let out = run_experiment(&cfg)?;
    write_outcome(dir, &cfg, &out)?;
    write_summary(dir, &[&out.report])?;
    print_report(&out.report);
    if out.report.pass {
        Ok(())
    } else {
        Err(Failure::Verification)
    }
}

fn suite(c: &Common) -> Result<(), Failure> {
    let mut configs = load_suite(&c.config)?;
    if let Some(s) = c.seed {
        for cfg in &mut configs {
            cfg.seed = s;
        }
    }
    let dir = out_dir(c)?;
    let results: Vec<_> = configs.par_iter().map(run_experiment).collect();
    let mut reports = Vec::new();
    // a config error outranks a numerical one, which outranks a failed check
    let mut errored: Option<Failure> = None;
    for (cfg, res) in configs.iter().zip(&results) {
        match res {
            Ok(out) => {
                write_outcome(dir, cfg, out)?;
                print_report(&out.report);
                reports.push(&out.report);
            }
            Err(e) => {
                eprintln!("error in {}: {e}", cfg.id);
                if !matches!(errored, Some(Failure::Config(_))) {
                    errored = Some(Failure::from(e.clone()));
                }
            }
        }
    }
    write_summary(dir, &reports)?;
    let passed = reports.iter().filter(|r| r.pass).count();
    println!("{passed}/{} experiments passed", configs.len());
    let skipped = format!("{} experiment(s) could not run", configs.len() - reports.len());
    match errored {
        Some(Failure::Config(_)) => Err(Failure::Config(skipped)),
        Some(_) => Err(Failure::Numerical(skipped)),
        None if passed < reports.len() => Err(Failure::Verification),
        None => Ok(()),
    }
}
