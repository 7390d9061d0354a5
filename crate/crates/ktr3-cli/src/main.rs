//! Command-line driver: data generation, rate experiments, the identity
//! check suite, and λ sweeps. Exit codes are uniform across subcommands:
//! 0 success, 1 at least one check failed, 2 configuration or usage error.

mod config;
mod svg;

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context, Result};
use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use ktr3::algorithm::online_pass;
use ktr3::checks::{ridge_objective_value, standard_suite, CheckReport, Relation};
use ktr3::datagen::{default_n_test, write_csv, Problem};
use ktr3::evaluation::{best_lambda_sweep, fit_rate, RiskMode, SweepOutcome, SweepRecord};
use ktr3::seed::derive_seed;

use config::Config;

#[derive(Parser)]
#[command(
    name = "ktr3",
    version,
    about = "Kernel truncated randomized ridge regression experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw one train/test pair from the configured problem and write both as CSV
    Gen(GenArgs),
    /// Sweep sample sizes, fit the excess-risk decay on log-log axes, render a plot
    Rates(RatesArgs),
    /// Run the identity and inequality check suite over seeded instances
    Check(CheckArgs),
    /// Sweep the lambda grid at one sample size and report the argmin
    Sweep(SweepArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// INI configuration file; flags override its values
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Master seed, overriding the configured one
    #[arg(long, value_name = "S")]
    seed: Option<u64>,
}

#[derive(Args)]
struct GenArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Output directory
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
    /// Training-set size (default: the configured n_max)
    #[arg(long, value_name = "N")]
    n: Option<usize>,
}

#[derive(Args)]
struct RatesArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Output directory for results.csv, rates.svg, summary.json
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
    /// Worker threads (default: one per core); results do not depend on it
    #[arg(long, value_name = "N")]
    jobs: Option<usize>,
    /// Comma-separated lambda grid overriding the configured one
    #[arg(long, value_name = "L1,L2,..")]
    lambda: Option<String>,
    /// Risk estimator: k_average or single_draw
    #[arg(long, value_name = "MODE")]
    risk_mode: Option<RiskMode>,
}

#[derive(Args)]
struct CheckArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Also append every report to DIR/checks.jsonl
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Negative control: corrupt one leverage increment, which must fail
    #[arg(long)]
    tamper_dt: bool,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Sample size to sweep at
    #[arg(long, value_name = "N")]
    n: usize,
    /// Directory for the per-cell CSV
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Comma-separated lambda grid overriding the configured one
    #[arg(long, value_name = "L1,L2,..")]
    lambda: Option<String>,
    /// Risk estimator: k_average or single_draw
    #[arg(long, value_name = "MODE")]
    risk_mode: Option<RiskMode>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let run = match cli.command {
        Command::Gen(args) => cmd_gen(args),
        Command::Rates(args) => cmd_rates(args),
        Command::Check(args) => cmd_check(args),
        Command::Sweep(args) => cmd_sweep(args),
    };
    match run {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}

fn resolve(common: &CommonArgs) -> Result<Config> {
    let mut cfg = Config::load(common.config.as_deref())?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn parse_lambda_list(text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|v| {
            let v = v.trim();
            v.parse::<f64>()
                .map_err(|_| anyhow!("bad lambda value {v:?} in --lambda"))
        })
        .collect()
}

/// Compact scientific notation for log lines; the CSVs use the exact
/// shortest round-trip form instead.
fn sci(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else {
        format!("{v:e}")
    }
}

/// Theoretical decay slope drawn as the reference line: the capacity rate
/// for the noisy spline benchmark, the interpolation rate for the
/// noiseless in-space target.
fn reference_slope(problem: &Problem) -> f64 {
    match *problem {
        Problem::Spline { b, beta, .. } => -(2.0 * beta) / (2.0 * beta + b),
        Problem::ZeroNoise { .. } => -1.0,
    }
}

/// Canonical record layout: timings zeroed unless requested (so reruns are
/// byte-identical), sorted by size, then lambda, then repetition.
fn finalize_records(mut records: Vec<SweepRecord>, timing: bool) -> Vec<SweepRecord> {
    if !timing {
        for r in &mut records {
            r.elapsed_ms = 0;
        }
    }
    records.sort_by(|a, b| {
        a.n.cmp(&b.n)
            .then(a.lambda.total_cmp(&b.lambda))
            .then(a.rep.cmp(&b.rep))
    });
    records
}

fn write_records_csv(path: &Path, records: &[SweepRecord]) -> Result<()> {
    let mut text = String::from("n,lambda,rep,seed,excess_risk,std_error,mode,elapsed_ms\n");
    for r in records {
        use std::fmt::Write as _;
        writeln!(
            text,
            "{},{},{},{},{},{},{},{}",
            r.n, r.lambda, r.rep, r.seed, r.excess_risk, r.std_error, r.mode, r.elapsed_ms
        )?;
    }
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn cmd_gen(args: GenArgs) -> Result<ExitCode> {
    let cfg = resolve(&args.common)?;
    let n = args.n.unwrap_or(cfg.n_max);
    let generated = cfg.problem.generate(n, default_n_test(n), cfg.seed)?;
    fs::create_dir_all(&args.out)
        .with_context(|| format!("creating {}", args.out.display()))?;
    for (prefix, dataset) in [("train", &generated.train), ("test", &generated.test)] {
        let path = args
            .out
            .join(format!("{prefix}_n{:05}_seed{:016x}.csv", dataset.len(), cfg.seed));
        write_csv(dataset, &path)?;
        println!("wrote {} ({} rows)", path.display(), dataset.len());
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_rates(args: RatesArgs) -> Result<ExitCode> {
    let mut cfg = resolve(&args.common)?;
    if let Some(list) = &args.lambda {
        cfg.lambda_grid = parse_lambda_list(list)?;
    }
    if let Some(mode) = args.risk_mode {
        cfg.risk_mode = mode;
    }
    let sizes = cfg.n_grid()?;
    fs::create_dir_all(&args.out)
        .with_context(|| format!("creating {}", args.out.display()))?;

    // Sizes are independent jobs; every cell derives its own seeds from the
    // master, so the parallel schedule cannot leak into the results.
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(args.jobs.unwrap_or(0))
        .build()
        .context("building worker pool")?;
    let outcomes: Vec<SweepOutcome> = pool.install(|| {
        sizes
            .par_iter()
            .map(|&n| {
                best_lambda_sweep(
                    &cfg.problem,
                    &cfg.lambda_grid,
                    n,
                    cfg.repetitions,
                    cfg.seed,
                    cfg.risk_mode,
                    cfg.tail_fraction,
                )
            })
            .collect::<ktr3::Result<Vec<_>>>()
    })?;

    let mut records = Vec::new();
    let mut points = Vec::with_capacity(sizes.len());
    for (&n, outcome) in sizes.iter().zip(&outcomes) {
        println!(
            "n={n} best_lambda={} best_excess={}",
            sci(outcome.best_lambda),
            sci(outcome.best_excess)
        );
        points.push((n as f64, outcome.best_excess));
        records.extend(outcome.records.iter().copied());
    }
    let records = finalize_records(records, cfg.timing);
    write_records_csv(&args.out.join("results.csv"), &records)?;

    let fit = fit_rate(&points)?;
    let reference = reference_slope(&cfg.problem);
    if cfg.svg {
        let title = format!("excess risk against n, {}", cfg.problem);
        let plot = svg::render_rate_plot(&points, &fit, reference, &title);
        fs::write(args.out.join("rates.svg"), plot)?;
    }
    let summary = serde_json::json!({
        "slope": fit.slope,
        "intercept": fit.intercept,
        "r_squared": fit.r_squared,
        "reference_slope": reference,
        "points": points
            .iter()
            .map(|&(n, e)| serde_json::json!({"n": n, "best_mean_excess": e}))
            .collect::<Vec<_>>(),
    });
    fs::write(
        args.out.join("summary.json"),
        serde_json::to_string_pretty(&summary)? + "\n",
    )?;
    println!(
        "slope={:.4} r_squared={:.4} reference={:.4}",
        fit.slope, fit.r_squared, reference
    );
    Ok(ExitCode::SUCCESS)
}

const TAMPER_TAG: u64 = 0xd7;

/// Negative control for the check suite: run one online pass, corrupt the
/// first leverage increment before the discounted average is formed, and
/// re-judge the objective identity. An honest pipeline must report failure.
fn tampered_identity_report(cfg: &Config) -> Result<CheckReport> {
    const TAMPER_N: usize = 40;
    const TAMPER_LAMBDA: f64 = 1e-2;
    let seed = derive_seed(cfg.seed, &[TAMPER_TAG]);
    let generated = cfg.problem.generate(TAMPER_N, 10, seed)?;
    let mut trace = online_pass(&generated.train, generated.kernel, TAMPER_LAMBDA, None, seed)?;
    trace.d[0] += 0.5;
    let lhs = trace.weighted_loss_average();
    let rhs = ridge_objective_value(&generated.train, generated.kernel, TAMPER_LAMBDA)?;
    Ok(CheckReport::evaluate(
        "online_objective_identity_tampered",
        lhs,
        rhs,
        Relation::Equal,
        1e-8,
        seed,
    ))
}

fn cmd_check(args: CheckArgs) -> Result<ExitCode> {
    let cfg = resolve(&args.common)?;
    let reports = if args.tamper_dt {
        vec![tampered_identity_report(&cfg)?]
    } else {
        standard_suite(cfg.seed, cfg.check_max_n, cfg.check_instances)?
    };

    let mut sink = match &args.out {
        Some(dir) => {
            fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            let file = fs::File::create(dir.join("checks.jsonl"))?;
            Some(std::io::BufWriter::new(file))
        }
        None => None,
    };
    let stdout = std::io::stdout();
    let mut stdout = std::io::BufWriter::new(stdout.lock());
    for report in &reports {
        let line = report.to_json_line();
        writeln!(stdout, "{line}")?;
        if let Some(sink) = &mut sink {
            writeln!(sink, "{line}")?;
        }
    }
    stdout.flush()?;
    if let Some(mut sink) = sink {
        sink.flush()?;
    }

    let failed = reports.iter().filter(|r| !r.passed).count();
    match reports.iter().find(|r| !r.passed) {
        Some(first) => {
            eprintln!(
                "{failed} of {} checks failed; first failure: {} (lhs={}, rhs={})",
                reports.len(),
                first.name,
                first.lhs,
                first.rhs
            );
            Ok(ExitCode::from(1))
        }
        None => Ok(ExitCode::SUCCESS),
    }
}

fn cmd_sweep(args: SweepArgs) -> Result<ExitCode> {
    let mut cfg = resolve(&args.common)?;
    if let Some(list) = &args.lambda {
        cfg.lambda_grid = parse_lambda_list(list)?;
    }
    if let Some(mode) = args.risk_mode {
        cfg.risk_mode = mode;
    }
    let outcome = best_lambda_sweep(
        &cfg.problem,
        &cfg.lambda_grid,
        args.n,
        cfg.repetitions,
        cfg.seed,
        cfg.risk_mode,
        cfg.tail_fraction,
    )?;
    for &(lambda, mean) in &outcome.mean_by_lambda {
        println!("lambda={} mean_excess={}", sci(lambda), sci(mean));
    }
    println!(
        "best_lambda={} best_excess={}",
        sci(outcome.best_lambda),
        sci(outcome.best_excess)
    );
    if let Some(dir) = &args.out {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let records = finalize_records(outcome.records, cfg.timing);
        let path = dir.join(format!("sweep_n{:05}.csv", args.n));
        write_records_csv(&path, &records)?;
        println!("wrote {}", path.display());
    }
    Ok(ExitCode::SUCCESS)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_slopes_for_both_benchmarks() {
        let noisy = Problem::Spline {
            b: 0.125,
            beta: 0.4375,
            epsilon: 0.1,
        };
        assert!((reference_slope(&noisy) + 0.875).abs() < 1e-12);
        let medium = Problem::Spline {
            b: 1.0 / 6.0,
            beta: 0.25,
            epsilon: 0.1,
        };
        assert!((reference_slope(&medium) + 0.75).abs() < 1e-12);
        assert_eq!(reference_slope(&Problem::ZeroNoise { q: 2.0 }), -1.0);
    }

    #[test]
    fn sci_formatting() {
        assert_eq!(sci(0.0), "0");
        assert_eq!(sci(1e-6), "1e-6");
        assert_eq!(sci(1.84e-5), "1.84e-5");
    }

    #[test]
    fn records_are_sorted_and_timings_zeroed() {
        let rec = |n, lambda, rep, ms| SweepRecord {
            n,
            lambda,
            rep,
            seed: 1,
            excess_risk: 0.5,
            std_error: 0.1,
            mode: RiskMode::KAverage,
            elapsed_ms: ms,
        };
        let out = finalize_records(
            vec![rec(200, 0.1, 0, 7), rec(100, 0.1, 1, 7), rec(100, 0.0, 0, 7)],
            false,
        );
        let key: Vec<(usize, f64, usize)> = out.iter().map(|r| (r.n, r.lambda, r.rep)).collect();
        assert_eq!(key, vec![(100, 0.0, 0), (100, 0.1, 1), (200, 0.1, 0)]);
        assert!(out.iter().all(|r| r.elapsed_ms == 0));

        let kept = finalize_records(vec![rec(100, 0.0, 0, 7)], true);
        assert_eq!(kept[0].elapsed_ms, 7);
    }

    #[test]
    fn lambda_lists_parse_or_reject() {
        assert_eq!(
            parse_lambda_list("0, 1e-4,0.5").unwrap(),
            vec![0.0, 1e-4, 0.5]
        );
        assert!(parse_lambda_list("0,abc").is_err());
    }
}
