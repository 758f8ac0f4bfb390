//! Benchmark sweeps: generate instances across a density range, run
//! each algorithm on the same instances with the same schedules, and
//! aggregate privacy loss, message counts, and outcome rates.
//!
//! All randomness flows from one base seed through a ChaCha8 stream, so
//! a sweep is reproducible bit-for-bit; only wall-clock times vary
//! between executions.

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::generator::{generate, DistributionKind, GenError, GenParams};
use crate::runtime::{RiskSettings, SchedulerPolicy, Status};
use crate::solvers::{solve, Algo};
use crate::utility::{FutilityStats, RiskMode, StatsFile};

/// One sweep: a grid of densities, a fixed number of instances per
/// density, and the algorithms to pit against each other.
#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub n: usize,
    pub d: usize,
    /// Expected fraction of forbidden (agent, value) pairs.
    pub densities: Vec<f64>,
    pub runs_per_density: usize,
    pub distribution: DistributionKind,
    pub cost_range: (u64, u64),
    pub reward: u64,
    pub algos: Vec<Algo>,
    pub risk_mode: RiskMode,
    pub default_risk: f64,
    pub step_limit: Option<u64>,
    /// Base seed; instance and schedule seeds derive from it.
    pub seed: u64,
}

impl SweepSpec {
    /// The standard ten-agent comparison: ten values per agent, costs
    /// drawn from 0..=9, reward 20, densities 0.1 through 0.5, fifty
    /// paired instances per point, all four algorithms.
    pub fn standard(seed: u64, distribution: DistributionKind) -> Self {
        SweepSpec {
            n: 10,
            d: 10,
            densities: (1..=5).map(|k| k as f64 / 10.0).collect(),
            runs_per_density: 50,
            distribution,
            cost_range: (0, 9),
            reward: 20,
            algos: Algo::ALL.to_vec(),
            risk_mode: RiskMode::Offline,
            default_risk: 0.5,
            step_limit: None,
            seed,
        }
    }
}

/// One solver execution inside a sweep.
#[derive(Debug, Clone)]
pub struct RunMetrics {
    pub algo: Algo,
    pub density: f64,
    pub instance_seed: u64,
    pub sched_seed: u64,
    pub status: Status,
    pub total_loss: u64,
    pub messages: u64,
    pub protocol_sends: u64,
    pub wall: Duration,
}

/// Per (algorithm, density) aggregate over a sweep's runs.
#[derive(Debug, Clone)]
pub struct AggregateRow {
    pub algo: Algo,
    pub density: f64,
    pub distribution: DistributionKind,
    pub instances: usize,
    /// Mean over runs of (total privacy loss / number of agents).
    pub privacy_loss_mean: f64,
    pub messages_mean: f64,
    pub solved_rate: f64,
    pub interrupted_rate: f64,
    pub step_limit_rate: f64,
    pub walltime_ms_mean: f64,
}

#[derive(Debug, Clone)]
pub struct BatchResult {
    pub rows: Vec<AggregateRow>,
    pub runs: Vec<RunMetrics>,
    /// Futility statistics observed across every run of the sweep.
    pub learned: FutilityStats,
    pub learned_by_density: BTreeMap<String, FutilityStats>,
}

impl BatchResult {
    /// The observed statistics in persistable form, for feeding a later
    /// sweep's offline risk estimates.
    pub fn learned_stats_file(&self) -> StatsFile {
        StatsFile {
            global: self.learned,
            by_density: self.learned_by_density.clone(),
        }
    }
}

/// Statistics backing a run at the given density: the density's own
/// bucket when present, the global counters otherwise.
fn stats_for_density(file: Option<&StatsFile>, density: f64) -> Option<FutilityStats> {
    let file = file?;
    Some(
        file.by_density
            .get(&StatsFile::density_key(density))
            .copied()
            .unwrap_or(file.global),
    )
}

/// Runs the sweep. Every algorithm sees the same instance and the same
/// schedule seed for a given (density, run) slot, so differences in a
/// column are attributable to the algorithm alone.
pub fn run_batch(spec: &SweepSpec, stats_in: Option<&StatsFile>) -> Result<BatchResult, GenError> {
    let mut seeder = ChaCha8Rng::seed_from_u64(spec.seed);
    let seeds: Vec<Vec<(u64, u64)>> = spec
        .densities
        .iter()
        .map(|_| {
            (0..spec.runs_per_density)
                .map(|_| (seeder.gen(), seeder.gen()))
                .collect()
        })
        .collect();

    let mut runs =
        Vec::with_capacity(spec.densities.len() * spec.algos.len() * spec.runs_per_density);
    let mut learned = FutilityStats::default();
    let mut learned_by_density: BTreeMap<String, FutilityStats> = BTreeMap::new();

    for (di, &density) in spec.densities.iter().enumerate() {
        let run_stats = stats_for_density(stats_in, density);
        for &algo in &spec.algos {
            for &(instance_seed, sched_seed) in &seeds[di] {
                let params = GenParams {
                    n: spec.n,
                    d: spec.d,
                    density,
                    distribution: spec.distribution,
                    cost_range: spec.cost_range,
                    reward: spec.reward,
                    seed: instance_seed,
                };
                let instance = generate(&params)?;
                let risk = RiskSettings {
                    mode: spec.risk_mode,
                    default_risk: spec.default_risk,
                    stats: run_stats,
                };
                let started = Instant::now();
                let outcome = solve(
                    &instance,
                    algo,
                    SchedulerPolicy::SeededRandom { seed: sched_seed },
                    risk,
                    spec.step_limit,
                );
                let wall = started.elapsed();

                let terminated = matches!(outcome.status, Status::Agreement | Status::NoSolution);
                let delta = FutilityStats {
                    count: outcome.protocol_sends,
                    termination_count: u64::from(terminated && outcome.protocol_sends > 0),
                };
                learned.merge(&delta);
                learned_by_density
                    .entry(StatsFile::density_key(density))
                    .or_default()
                    .merge(&delta);

                runs.push(RunMetrics {
                    algo,
                    density,
                    instance_seed,
                    sched_seed,
                    status: outcome.status,
                    total_loss: outcome.ledger.total_loss(),
                    messages: outcome.messages,
                    protocol_sends: outcome.protocol_sends,
                    wall,
                });
            }
        }
    }

    let rows = aggregate(spec, &runs);
    Ok(BatchResult {
        rows,
        runs,
        learned,
        learned_by_density,
    })
}

/// Folds runs into one row per (algorithm, density), algorithms in
/// spec order, densities in spec order. Means come from integer sums,
/// so they are exactly reproducible; only wall time is hardware-bound.
fn aggregate(spec: &SweepSpec, runs: &[RunMetrics]) -> Vec<AggregateRow> {
    let mut rows = Vec::with_capacity(spec.algos.len() * spec.densities.len());
    for &algo in &spec.algos {
        for &density in &spec.densities {
            let group: Vec<&RunMetrics> = runs
                .iter()
                .filter(|r| r.algo == algo && r.density == density)
                .collect();
            if group.is_empty() {
                continue;
            }
            let count = group.len() as f64;
            let loss_sum: u64 = group.iter().map(|r| r.total_loss).sum();
            let message_sum: u64 = group.iter().map(|r| r.messages).sum();
            let solved = group
                .iter()
                .filter(|r| r.status == Status::Agreement)
                .count();
            let interrupted = group
                .iter()
                .filter(|r| r.status == Status::Interrupted)
                .count();
            let limited = group
                .iter()
                .filter(|r| r.status == Status::StepLimit)
                .count();
            let wall_ms: f64 = group.iter().map(|r| r.wall.as_secs_f64() * 1e3).sum();
            rows.push(AggregateRow {
                algo,
                density,
                distribution: spec.distribution,
                instances: group.len(),
                privacy_loss_mean: loss_sum as f64 / (count * spec.n as f64),
                messages_mean: message_sum as f64 / count,
                solved_rate: solved as f64 / count,
                interrupted_rate: interrupted as f64 / count,
                step_limit_rate: limited as f64 / count,
                walltime_ms_mean: wall_ms / count,
            });
        }
    }
    rows
}

pub const CSV_HEADER: &str = "algo,density,dist,instances,privacy_loss_mean,messages_mean,solved_rate,interrupted_rate,step_limit_rate,walltime_ms_mean";

/// Renders aggregate rows as CSV, one line per row plus the header.
pub fn to_csv(rows: &[AggregateRow]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{:.3},{},{},{:.4},{:.2},{:.4},{:.4},{:.4},{:.3}\n",
            r.algo,
            r.density,
            r.distribution.name(),
            r.instances,
            r.privacy_loss_mean,
            r.messages_mean,
            r.solved_rate,
            r.interrupted_rate,
            r.step_limit_rate,
            r.walltime_ms_mean,
        ));
    }
    out
}

/// Drops the trailing wall-time column from every line, leaving only
/// the seed-determined columns for byte-for-byte comparisons.
pub fn strip_walltime_column(csv: &str) -> String {
    let mut out = String::with_capacity(csv.len());
    for line in csv.lines() {
        out.push_str(line.rsplit_once(',').map_or(line, |(head, _)| head));
        out.push('\n');
    }
    out
}
