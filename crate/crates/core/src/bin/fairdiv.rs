use std::io::{ErrorKind, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use fairdiv::experiment::suites::{efe_suite, grid_suite, proportional_suite, robust_suite, SuiteReport};
use fairdiv::experiment::{demo_lower_bound, run_config, ExperimentConfig};
use fairdiv::lp::{build_fair_lp, build_robust_lp, solve_optimal_fair, solve_robust_fair, to_lp_format};
use fairdiv::transform::{efe_slack_transform_observed, proportional_slack_transform};
use fairdiv::{ConfidenceBox, Error, Family, FractionalAllocation, Matrix, MeanMatrix};

/// Online fair division simulator and solvers.
#[derive(Parser)]
#[command(name = "fairdiv", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every (horizon, seed) pair of a config and write traces plus a summary.
    Simulate { config: PathBuf },
    /// Like simulate, but only the summary is written.
    Sweep { config: PathBuf },
    /// Solve the fair welfare LP, or the robust one when radii are given.
    Lp {
        /// JSON matrix of mean values.
        #[arg(long)]
        mu: PathBuf,
        /// JSON matrix of confidence radii.
        #[arg(long)]
        eps: Option<PathBuf>,
        #[arg(long, value_enum)]
        family: FamilyArg,
        /// Lower value bound; defaults to the smallest mean.
        #[arg(long)]
        a: Option<f64>,
        /// Upper value bound; defaults to the largest mean.
        #[arg(long)]
        b: Option<f64>,
        /// Also write the program in LP format to this file.
        #[arg(long)]
        dump_lp: Option<PathBuf>,
    },
    /// Apply the slack transform to an allocation.
    Transform {
        #[arg(long)]
        mu: PathBuf,
        #[arg(long)]
        y: PathBuf,
        #[arg(long)]
        gamma: f64,
        #[arg(long, value_enum)]
        family: FamilyArg,
        #[arg(long)]
        a: Option<f64>,
        #[arg(long)]
        b: Option<f64>,
        /// Print each iteration to stderr.
        #[arg(long)]
        verbose: bool,
    },
    /// Run the randomized cross-check suites.
    Verify {
        #[arg(long, value_enum, default_value = "all")]
        suite: SuiteArg,
        #[arg(long, default_value_t = 0x5EED)]
        seed: u64,
    },
    /// Show that only the uniform allocation is envy-free for two nearby instances.
    DemoLowerBound {
        #[arg(long = "T")]
        horizon: u64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum FamilyArg {
    Efe,
    Pe,
}

impl From<FamilyArg> for Family {
    fn from(f: FamilyArg) -> Self {
        match f {
            FamilyArg::Efe => Family::Efe,
            FamilyArg::Pe => Family::Pe,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SuiteArg {
    All,
    Lp,
    Transform,
}

enum Failure {
    Error(Error),
    /// A check ran to completion and did not hold.
    Check(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Error(e)
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Invariant(_) | Error::Numeric(_) | Error::Infeasible | Error::Unbounded => 3,
        _ => 1,
    }
}

fn read_matrix(path: &Path) -> Result<Matrix, Error> {
    let text = std::fs::read_to_string(path)?;
    let rows: Vec<Vec<f64>> = serde_json::from_str(&text)?;
    Matrix::from_rows(rows)
}

fn bounds(mu: &Matrix, a: Option<f64>, b: Option<f64>) -> (f64, f64) {
    let lo = mu.as_slice().iter().copied().fold(f64::INFINITY, f64::min);
    let hi = mu.as_slice().iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (a.unwrap_or(lo), b.unwrap_or(hi))
}

fn print_json<T: Serialize>(value: &T) -> Result<(), Error> {
    let text = serde_json::to_string_pretty(value)?;
    match writeln!(std::io::stdout().lock(), "{text}") {
        Err(e) if e.kind() != ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

#[derive(Serialize)]
struct LpOutput {
    family: Family,
    value: f64,
    allocation: Vec<Vec<f64>>,
    pivots: usize,
}

fn lp(
    mu: &Path,
    eps: Option<&Path>,
    family: Family,
    a: Option<f64>,
    b: Option<f64>,
    dump: Option<&Path>,
) -> Result<(), Failure> {
    let raw = read_matrix(mu)?;
    let (a, b) = bounds(&raw, a, b);
    let (sol, program) = match eps {
        Some(eps) => {
            let bx = ConfidenceBox::new(MeanMatrix::new(raw)?, read_matrix(eps)?, a, b)?;
            let program = dump.map(|_| build_robust_lp(&bx, family)).transpose()?;
            (solve_robust_fair(&bx, family)?, program)
        }
        None => {
            let mu = MeanMatrix::new(raw)?;
            if !mu.within(a, b) {
                return Err(Error::InvalidInput(format!("means must lie in [{a}, {b}]")).into());
            }
            let program = dump.map(|_| build_fair_lp(&mu, family)).transpose()?;
            (solve_optimal_fair(&mu, family)?, program)
        }
    };
    if let (Some(path), Some(program)) = (dump, program) {
        std::fs::write(path, to_lp_format(&program)).map_err(Error::from)?;
    }
    print_json(&LpOutput {
        family,
        value: sol.value,
        allocation: sol.allocation.to_rows(),
        pivots: sol.pivots,
    })?;
    Ok(())
}

fn transform(
    mu: &Path,
    y: &Path,
    gamma: f64,
    family: Family,
    a: Option<f64>,
    b: Option<f64>,
    verbose: bool,
) -> Result<(), Failure> {
    let raw = read_matrix(mu)?;
    let (a, b) = bounds(&raw, a, b);
    let mu = MeanMatrix::new(raw)?;
    let y = FractionalAllocation::new(read_matrix(y)?)?;
    let report = match family {
        Family::Efe => efe_slack_transform_observed(&mu, &y, gamma, a, b, &mut |rec| {
            if verbose {
                eprintln!("{rec}");
            }
        })?,
        Family::Pe => {
            let r = proportional_slack_transform(&mu, &y, gamma, a, b)?;
            if verbose {
                r.log.iter().for_each(|rec| eprintln!("{rec}"));
            }
            r
        }
    };
    print_json(&report)?;
    if !report.all_hold() {
        return Err(Failure::Check("some constraint holds neither with slack nor by equal rows".into()));
    }
    Ok(())
}

fn verify(suite: SuiteArg, seed: u64) -> Result<(), Failure> {
    let mut reports: Vec<SuiteReport> = Vec::new();
    if suite != SuiteArg::Transform {
        reports.push(robust_suite(200, seed));
        reports.push(grid_suite(100, seed));
    }
    if suite != SuiteArg::Lp {
        reports.push(proportional_suite(500, seed));
        reports.push(efe_suite(300, seed));
    }
    let mut failed = 0;
    for r in &reports {
        let status = if r.passed() { "PASS" } else { "FAIL" };
        println!(
            "{status} {}: {} instances, {} failures, worst ratio {:.4}, {:.2}s",
            r.name,
            r.instances,
            r.failures.len(),
            r.worst_ratio,
            r.elapsed_secs
        );
        for f in r.failures.iter().take(10) {
            println!("  {f}");
        }
        failed += usize::from(!r.passed());
    }
    if failed > 0 {
        return Err(Failure::Check(format!("{failed} suite(s) failed")));
    }
    Ok(())
}

fn demo(horizon: u64) -> Result<(), Failure> {
    let report = demo_lower_bound(horizon)?;
    print_json(&report)?;
    if report.max_deviation > 2e-3 {
        return Err(Failure::Check(format!(
            "coordinates not pinned to 1/2: deviation {:e}",
            report.max_deviation
        )));
    }
    Ok(())
}

fn simulate(path: &Path, traces: bool) -> Result<(), Failure> {
    let cfg = ExperimentConfig::load(path)?;
    let report = run_config(&cfg, traces)?;
    for h in &report.mean_regret {
        println!("T={} runs={} mean regret {:.6}", h.horizon, h.runs, h.mean_cumulative_regret);
    }
    match (&report.slope, &report.slope_note) {
        (Some(fit), _) => println!("slope {:.4} ± {:.4}", fit.slope, fit.stderr),
        (None, Some(note)) => println!("no slope: {note}"),
        (None, None) => {}
    }
    println!("summary written to {}", cfg.output_dir.join("summary.json").display());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate { config } => simulate(&config, true),
        Command::Sweep { config } => simulate(&config, false),
        Command::Lp {
            mu,
            eps,
            family,
            a,
            b,
            dump_lp,
        } => lp(&mu, eps.as_deref(), family.into(), a, b, dump_lp.as_deref()),
        Command::Transform {
            mu,
            y,
            gamma,
            family,
            a,
            b,
            verbose,
        } => transform(&mu, &y, gamma, family.into(), a, b, verbose),
        Command::Verify { suite, seed } => verify(suite, seed),
        Command::DemoLowerBound { horizon } => demo(horizon),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Error(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
        Err(Failure::Check(msg)) => {
            eprintln!("check failed: {msg}");
            ExitCode::from(2)
        }
    }
}
