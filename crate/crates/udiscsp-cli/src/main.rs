//! `udiscsp`: generate meeting-scheduling instances, run one solver on
//! one instance, or sweep a benchmark grid.
//!
//! Exit codes: 0 success, 1 usage or runtime error, 2 unusable instance
//! file.

use std::fmt;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::{self, ExitCode};

use clap::{Args, Parser, Subcommand};

use udiscsp::bench::{run_batch, to_csv, SweepSpec};
use udiscsp::generator::{generate, DistributionKind, GenParams};
use udiscsp::model::{load_instance, save_instance, Instance};
use udiscsp::runtime::{RiskSettings, SchedulerPolicy};
use udiscsp::solvers::{solve, Algo};
use udiscsp::utility::{load_stats, save_stats, FutilityStats, RiskMode, StatsFile};

const EXIT_USAGE: u8 = 1;
const EXIT_BAD_INSTANCE: u8 = 2;

#[derive(Debug)]
struct CodedError {
    code: u8,
    message: String,
}

impl CodedError {
    fn usage(message: impl fmt::Display) -> Self {
        CodedError {
            code: EXIT_USAGE,
            message: message.to_string(),
        }
    }

    fn bad_instance(path: &Path, cause: impl fmt::Display) -> Self {
        CodedError {
            code: EXIT_BAD_INSTANCE,
            message: format!("invalid instance file {}: {cause}", path.display()),
        }
    }
}

/// Writes to stdout, exiting quietly when the reader hangs up (for
/// example `solve --trace | head`); any other write failure is fatal.
fn out(args: fmt::Arguments<'_>) {
    let mut stdout = io::stdout().lock();
    if let Err(e) = stdout.write_fmt(args) {
        if e.kind() == io::ErrorKind::BrokenPipe {
            process::exit(0);
        }
        eprintln!("error: cannot write to stdout: {e}");
        process::exit(i32::from(EXIT_USAGE));
    }
}

macro_rules! outln {
    ($fmt:literal $($arg:tt)*) => { out(format_args!(concat!($fmt, "\n") $($arg)*)) };
}

#[derive(Parser)]
#[command(
    name = "udiscsp",
    version,
    about = "Distributed meeting scheduling with privacy-aware solvers"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a random instance and write it as JSON.
    Generate(GenerateArgs),
    /// Run one solver on one instance file.
    Solve(SolveArgs),
    /// Sweep a density grid and aggregate per-algorithm metrics as CSV.
    Bench(BenchArgs),
}

fn parse_algo(s: &str) -> Result<Algo, String> {
    Algo::from_name(s)
        .ok_or_else(|| format!("unknown algorithm '{s}' (expected syncbt, abt, syncbtu, or abtu)"))
}

fn parse_dist(s: &str) -> Result<DistributionKind, String> {
    DistributionKind::from_name(s)
        .ok_or_else(|| format!("unknown distribution '{s}' (expected uniform or tail)"))
}

fn parse_risk_mode(s: &str) -> Result<RiskMode, String> {
    RiskMode::from_name(s)
        .ok_or_else(|| format!("unknown risk mode '{s}' (expected offline or online)"))
}

#[derive(Args)]
struct GenerateArgs {
    /// Number of agents.
    #[arg(long)]
    n: usize,
    /// Number of values per variable.
    #[arg(long)]
    d: usize,
    /// Expected fraction of forbidden (agent, value) pairs, in [0, 1).
    #[arg(long)]
    density: f64,
    /// Availability distribution: uniform, or tail (half the agents
    /// sparse, half dense).
    #[arg(long, default_value = "uniform", value_parser = parse_dist)]
    dist: DistributionKind,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Smallest possible revelation cost.
    #[arg(long, default_value_t = 0)]
    cost_min: u64,
    /// Largest possible revelation cost (inclusive).
    #[arg(long, default_value_t = 9)]
    cost_max: u64,
    /// Reward every agent collects on agreement.
    #[arg(long, default_value_t = 20)]
    reward: u64,
    /// Output path for the instance JSON.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SolveArgs {
    /// One of syncbt, abt, syncbtu, abtu.
    #[arg(long, value_parser = parse_algo)]
    algo: Algo,
    /// Instance JSON to solve.
    #[arg(long)]
    instance: PathBuf,
    /// Message scheduling: priority (deterministic) or random (seeded).
    #[arg(long, default_value = "priority")]
    scheduler: String,
    #[arg(long, default_value_t = 0)]
    sched_seed: u64,
    /// Delivery budget; default is 10000 per agent.
    #[arg(long)]
    step_limit: Option<u64>,
    /// offline: risk frozen at start; online: refreshed per send.
    #[arg(long, default_value = "offline", value_parser = parse_risk_mode)]
    risk_mode: RiskMode,
    /// Risk assumed when no statistics are available.
    #[arg(long, default_value_t = 0.5)]
    risk_default: f64,
    /// Futility statistics JSON from earlier runs.
    #[arg(long)]
    stats: Option<PathBuf>,
    /// Print the delivered-message trace before the summary.
    #[arg(long)]
    trace: bool,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, default_value_t = 10)]
    n: usize,
    #[arg(long, default_value_t = 10)]
    d: usize,
    /// Either start:end:step (inclusive) or a comma-separated list.
    #[arg(long, default_value = "0.1:0.5:0.1")]
    densities: String,
    /// Instances per density point, shared across algorithms.
    #[arg(long, default_value_t = 50)]
    runs: usize,
    #[arg(long, default_value = "uniform", value_parser = parse_dist)]
    dist: DistributionKind,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0)]
    cost_min: u64,
    #[arg(long, default_value_t = 9)]
    cost_max: u64,
    #[arg(long, default_value_t = 20)]
    reward: u64,
    /// Comma-separated subset of syncbt, abt, syncbtu, abtu.
    #[arg(long, default_value = "syncbt,abt,syncbtu,abtu")]
    algos: String,
    #[arg(long, default_value = "offline", value_parser = parse_risk_mode)]
    risk_mode: RiskMode,
    #[arg(long, default_value_t = 0.5)]
    risk_default: f64,
    #[arg(long)]
    step_limit: Option<u64>,
    /// Futility statistics consumed by the utilitarian solvers.
    #[arg(long)]
    stats_in: Option<PathBuf>,
    /// Where to write the statistics observed during this sweep.
    #[arg(long)]
    stats_out: Option<PathBuf>,
    /// CSV output path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            use clap::error::ErrorKind;
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => EXIT_USAGE,
            };
            let _ = err.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {}", err.message);
            ExitCode::from(err.code)
        }
    }
}

fn run(cli: Cli) -> Result<(), CodedError> {
    match cli.command {
        Command::Generate(args) => run_generate(args),
        Command::Solve(args) => run_solve(args),
        Command::Bench(args) => run_bench(args),
    }
}

fn run_generate(args: GenerateArgs) -> Result<(), CodedError> {
    let params = GenParams {
        n: args.n,
        d: args.d,
        density: args.density,
        distribution: args.dist,
        cost_range: (args.cost_min, args.cost_max),
        reward: args.reward,
        seed: args.seed,
    };
    let instance = generate(&params).map_err(CodedError::usage)?;
    save_instance(&instance, &args.out)
        .map_err(|e| CodedError::usage(format!("cannot write {}: {e}", args.out.display())))
}

fn load_instance_arg(path: &Path) -> Result<Instance, CodedError> {
    load_instance(path).map_err(|e| CodedError::bad_instance(path, e))
}

fn load_stats_arg(path: &Path) -> Result<StatsFile, CodedError> {
    load_stats(path)
        .map_err(|e| CodedError::usage(format!("cannot read stats {}: {e}", path.display())))
}

fn scheduler_policy(name: &str, seed: u64) -> Result<SchedulerPolicy, CodedError> {
    match name {
        "priority" => Ok(SchedulerPolicy::PriorityOrder),
        "random" => Ok(SchedulerPolicy::SeededRandom { seed }),
        other => Err(CodedError::usage(format!(
            "unknown scheduler '{other}' (expected priority or random)"
        ))),
    }
}

fn run_solve(args: SolveArgs) -> Result<(), CodedError> {
    let instance = load_instance_arg(&args.instance)?;
    let policy = scheduler_policy(&args.scheduler, args.sched_seed)?;
    let stats: Option<FutilityStats> = match &args.stats {
        Some(path) => Some(load_stats_arg(path)?.global),
        None => None,
    };
    let risk = RiskSettings {
        mode: args.risk_mode,
        default_risk: args.risk_default,
        stats,
    };
    let outcome = solve(&instance, args.algo, policy, risk, args.step_limit);

    if args.trace {
        for line in &outcome.trace {
            outln!("{}", line);
        }
    }
    outln!("algo: {}", args.algo);
    outln!("status: {}", outcome.status);
    if let Some(assignment) = &outcome.final_assignment {
        let values: Vec<String> = assignment
            .values
            .iter()
            .map(|v| match v {
                Some(v) => (v + 1).to_string(),
                None => "-".to_string(),
            })
            .collect();
        outln!("assignment: {}", values.join(" "));
    }
    if let Some(agent) = outcome.stopped_by {
        outln!("stopped-by: a{}", agent + 1);
    }
    if let Some(estimate) = outcome.interrupt_estimate {
        outln!("interrupt-estimate: {}", estimate);
    }
    outln!("messages: {}", outcome.messages);
    outln!("privacy-loss-total: {}", outcome.ledger.total_loss());
    let per_agent: Vec<String> = outcome
        .ledger
        .loss_per_agent()
        .iter()
        .map(u64::to_string)
        .collect();
    outln!("privacy-loss-per-agent: {}", per_agent.join(" "));
    Ok(())
}

fn run_bench(args: BenchArgs) -> Result<(), CodedError> {
    let densities = parse_densities(&args.densities).map_err(CodedError::usage)?;
    let algos = parse_algos(&args.algos).map_err(CodedError::usage)?;
    let stats_in = match &args.stats_in {
        Some(path) => Some(load_stats_arg(path)?),
        None => None,
    };
    let spec = SweepSpec {
        n: args.n,
        d: args.d,
        densities,
        runs_per_density: args.runs,
        distribution: args.dist,
        cost_range: (args.cost_min, args.cost_max),
        reward: args.reward,
        algos,
        risk_mode: args.risk_mode,
        default_risk: args.risk_default,
        step_limit: args.step_limit,
        seed: args.seed,
    };
    let result = run_batch(&spec, stats_in.as_ref()).map_err(CodedError::usage)?;
    let csv = to_csv(&result.rows);
    match &args.out {
        Some(path) => std::fs::write(path, csv)
            .map_err(|e| CodedError::usage(format!("cannot write {}: {e}", path.display())))?,
        None => out(format_args!("{csv}")),
    }
    if let Some(path) = &args.stats_out {
        save_stats(&result.learned_stats_file(), path)
            .map_err(|e| CodedError::usage(format!("cannot write {}: {e}", path.display())))?;
    }
    Ok(())
}

/// Accepts `start:end:step` (inclusive range) or a comma-separated
/// list of densities.
fn parse_densities(text: &str) -> Result<Vec<f64>, String> {
    let text = text.trim();
    if text.contains(':') {
        let parts: Vec<&str> = text.split(':').collect();
        if parts.len() != 3 {
            return Err(format!(
                "density range must be start:end:step, got '{text}'"
            ));
        }
        let nums: Vec<f64> = parts
            .iter()
            .map(|p| {
                p.trim()
                    .parse::<f64>()
                    .map_err(|_| format!("bad number '{p}'"))
            })
            .collect::<Result<_, _>>()?;
        let (start, end, step) = (nums[0], nums[1], nums[2]);
        if !step.is_finite() || step <= 0.0 {
            return Err(format!("density step must be positive, got {step}"));
        }
        if end < start {
            return Err(format!("density range end {end} is below start {start}"));
        }
        let mut out = Vec::new();
        let mut k = 0u32;
        loop {
            let v = start + f64::from(k) * step;
            if v > end + step * 1e-9 {
                break;
            }
            out.push(v);
            k += 1;
        }
        Ok(out)
    } else {
        text.split(',')
            .map(|p| {
                let p = p.trim();
                p.parse::<f64>().map_err(|_| format!("bad density '{p}'"))
            })
            .collect()
    }
}

fn parse_algos(text: &str) -> Result<Vec<Algo>, String> {
    let algos: Vec<Algo> = text
        .split(',')
        .map(|p| parse_algo(p.trim()))
        .collect::<Result<_, _>>()?;
    if algos.is_empty() {
        return Err("at least one algorithm is required".to_string());
    }
    Ok(algos)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn density_range_is_inclusive() {
        let got = parse_densities("0.1:0.5:0.1").unwrap();
        assert_eq!(got.len(), 5);
        assert!((got[0] - 0.1).abs() < 1e-12);
        assert!((got[4] - 0.5).abs() < 1e-9);
    }

    #[test]
    fn density_list_and_single_value() {
        assert_eq!(parse_densities("0.25").unwrap(), vec![0.25]);
        assert_eq!(parse_densities("0.1, 0.3").unwrap(), vec![0.1, 0.3]);
    }

    #[test]
    fn bad_density_inputs_are_rejected() {
        assert!(parse_densities("0.1:0.5").is_err());
        assert!(parse_densities("0.5:0.1:0.1").is_err());
        assert!(parse_densities("0.1:0.5:0").is_err());
        assert!(parse_densities("x").is_err());
    }

    #[test]
    fn algo_lists_parse() {
        assert_eq!(
            parse_algos("syncbt,abtu").unwrap(),
            vec![Algo::SyncBt, Algo::AbtU]
        );
        assert!(parse_algos("syncbt,nope").is_err());
    }
}
