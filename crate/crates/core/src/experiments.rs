//! Multi-drop orchestration, aggregation and CSV output.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::baselines::{self, BaselineError};
use crate::config::{ConfigError, ExperimentConfig, Method, Precision};
use crate::dqn::{self, DqnError, QNetwork};
use crate::env::{Env, EnvError};
use crate::geometry::{generate_topology, GeometryError};
use crate::scalar::Scalar;
use crate::tabular::{self, TabularError};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("geometry: {0}")]
    Geometry(#[from] GeometryError),
    #[error("environment: {0}")]
    Env(#[from] EnvError),
    #[error("training: {0}")]
    Dqn(#[from] DqnError),
    #[error("tabular learning: {0}")]
    Tabular(#[from] TabularError),
    #[error("baseline: {0}")]
    Baseline(#[from] BaselineError),
    #[error("accounting mismatch for {method} on drop {drop}: total {total} vs user sum {sum}")]
    Accounting {
        method: &'static str,
        drop: usize,
        total: f64,
        sum: f64,
    },
    #[error("output {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("csv {path}: {source}")]
    Csv { path: String, source: csv::Error },
    #[error("worker pool: {0}")]
    Pool(String),
}

impl ExperimentError {
    /// Process exit code: 1 for configuration problems, 2 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            ExperimentError::Config(_) => 1,
            _ => 2,
        }
    }
}

/// Network dimensions and connectivity limits of one experiment point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Scenario {
    pub num_users: usize,
    pub num_aps: usize,
    pub k_max: usize,
    pub f_max: usize,
}

impl Scenario {
    pub fn new(num_users: usize, num_aps: usize, k_max: usize, f_max: usize) -> Self {
        Self {
            num_users,
            num_aps,
            k_max,
            f_max,
        }
    }
}

/// Cartesian product of the configured user counts, AP counts and `(k, f)`
/// pairs.
pub fn sweep_scenarios(cfg: &ExperimentConfig) -> Vec<Scenario> {
    let mut out = Vec::new();
    for &m in &cfg.ap_counts {
        for &(k, f) in &cfg.kf_pairs {
            for &n in &cfg.user_counts {
                out.push(Scenario::new(n, m, k, f));
            }
        }
    }
    out
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn mix(parts: &[u64]) -> u64 {
    parts.iter().fold(0x5EED_u64, |acc, &p| splitmix(acc ^ splitmix(p)))
}

/// Seed of the topology for `drop`. Independent of the method and of
/// `(k, f)`, so every method and connectivity setting sees the same drops.
pub fn topology_seed(base: u64, scenario: &Scenario, drop: usize) -> u64 {
    mix(&[base, 1, scenario.num_users as u64, scenario.num_aps as u64, drop as u64])
}

/// Seed of the policy randomness (exploration, initialization, baseline
/// draws), disjoint from the topology stream.
pub fn policy_seed(base: u64, scenario: &Scenario, drop: usize, method: Method) -> u64 {
    mix(&[
        base,
        2,
        scenario.num_users as u64,
        scenario.num_aps as u64,
        scenario.k_max as u64,
        scenario.f_max as u64,
        drop as u64,
        method as u64,
    ])
}

/// Outcome of one method on one drop.
#[derive(Debug, Clone, PartialEq)]
pub struct DropResult {
    pub scenario: Scenario,
    pub drop: usize,
    pub method: Method,
    pub total_bps: f64,
    pub avg_user_bps: f64,
    pub user_rates: Vec<f64>,
    /// Per-episode summed reward for learning methods.
    pub trace: Option<Vec<f64>>,
}

/// Everything an experiment produced, sorted by (scenario, drop, method).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MetricsRecord {
    pub rows: Vec<DropResult>,
}

/// Mean over drops of one (method, scenario) cell.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub method: Method,
    pub scenario: Scenario,
    pub drops: usize,
    pub mean_total_bps: f64,
    pub mean_avg_user_bps: f64,
}

impl MetricsRecord {
    pub fn summary(&self) -> Vec<SummaryRow> {
        let mut cells: BTreeMap<(Method, Scenario), (usize, f64, f64)> = BTreeMap::new();
        for r in &self.rows {
            let cell = cells.entry((r.method, r.scenario)).or_default();
            cell.0 += 1;
            cell.1 += r.total_bps;
            cell.2 += r.avg_user_bps;
        }
        cells
            .into_iter()
            .map(|((method, scenario), (count, total, avg))| SummaryRow {
                method,
                scenario,
                drops: count,
                mean_total_bps: total / count as f64,
                mean_avg_user_bps: avg / count as f64,
            })
            .collect()
    }

    pub fn mean_total(&self, method: Method, scenario: &Scenario) -> Option<f64> {
        self.summary()
            .into_iter()
            .find(|s| s.method == method && s.scenario == *scenario)
            .map(|s| s.mean_total_bps)
    }

    /// Element-wise mean of the learning traces of `method` in `scenario`.
    pub fn mean_trace(&self, method: Method, scenario: &Scenario) -> Option<Vec<f64>> {
        let traces: Vec<&Vec<f64>> = self
            .rows
            .iter()
            .filter(|r| r.method == method && r.scenario == *scenario)
            .filter_map(|r| r.trace.as_ref())
            .collect();
        let first = traces.first()?;
        let mut mean = vec![0.0; first.len()];
        for t in &traces {
            for (m, v) in mean.iter_mut().zip(t.iter()) {
                *m += v;
            }
        }
        let n = traces.len() as f64;
        Some(mean.into_iter().map(|v| v / n).collect())
    }
}

/// Divides a trace by its maximum; an all-zero trace maps to zeros.
pub fn normalize_trace(rewards: &[f64]) -> Vec<f64> {
    let max = rewards.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(max > 0.0) {
        return vec![0.0; rewards.len()];
    }
    rewards.iter().map(|r| r / max).collect()
}

/// Runs one method on one drop at precision `T`.
pub fn run_drop<T: Scalar>(
    cfg: &ExperimentConfig,
    scenario: Scenario,
    drop: usize,
    method: Method,
    initial: Option<Vec<QNetwork<T>>>,
) -> Result<(DropResult, Option<Vec<QNetwork<T>>>), ExperimentError> {
    let topology = generate_topology::<T>(
        &cfg.drop_params(scenario.num_aps, scenario.num_users),
        topology_seed(cfg.seed, &scenario, drop),
    )?;
    let env_cfg = cfg.env_config::<T>(scenario.k_max, scenario.f_max);
    let seed = policy_seed(cfg.seed, &scenario, drop, method);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let to_f64 = |v: &[T]| v.iter().map(|x| x.as_f64()).collect::<Vec<f64>>();

    let (total, rates, trace, nets) = match method {
        Method::Madqn => {
            let mut env = Env::new(topology, env_cfg)?;
            let out = dqn::train(&mut env, &cfg.train, seed, initial)?;
            let nets = out.agents.into_iter().map(|a| a.online).collect();
            (
                out.final_utility.as_f64(),
                to_f64(&out.final_user_rates),
                Some(to_f64(&out.episode_rewards)),
                Some(nets),
            )
        }
        Method::Tabular => {
            let mut env = Env::new(topology, env_cfg)?;
            let out = tabular::train_tabular(&mut env, &cfg.tabular_config(), seed)?;
            (
                out.greedy_utility.as_f64(),
                to_f64(&out.greedy_user_rates),
                Some(to_f64(&out.episode_rewards)),
                None,
            )
        }
        Method::MaxRsrp => {
            let v = baselines::max_rsrp_policy(&topology, &env_cfg, &mut rng)?;
            (v.utility.as_f64(), to_f64(&v.user_rates), None, None)
        }
        Method::Random => {
            let v = baselines::random_policy(&topology, &env_cfg, &mut rng)?;
            (v.utility.as_f64(), to_f64(&v.user_rates), None, None)
        }
        Method::BruteForce => {
            let v = baselines::brute_force_optimum(&topology, &env_cfg)?;
            (v.utility.as_f64(), to_f64(&v.user_rates), None, None)
        }
    };

    let sum: f64 = rates.iter().sum();
    let tol = 1e-6 * total.abs().max(1.0);
    if (sum - total).abs() > tol {
        return Err(ExperimentError::Accounting {
            method: method.as_str(),
            drop,
            total,
            sum,
        });
    }
    Ok((
        DropResult {
            scenario,
            drop,
            method,
            total_bps: total,
            avg_user_bps: total / scenario.num_users as f64,
            user_rates: rates,
            trace,
        },
        nets,
    ))
}

fn run_drop_dyn(
    cfg: &ExperimentConfig,
    scenario: Scenario,
    drop: usize,
    method: Method,
) -> Result<DropResult, ExperimentError> {
    match cfg.precision {
        Precision::F32 => run_drop::<f32>(cfg, scenario, drop, method, None).map(|r| r.0),
        Precision::F64 => run_drop::<f64>(cfg, scenario, drop, method, None).map(|r| r.0),
    }
}

fn with_pool<R: Send>(
    threads: usize,
    work: impl FnOnce() -> R + Send,
) -> Result<R, ExperimentError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| ExperimentError::Pool(e.to_string()))?;
    Ok(pool.install(work))
}

/// Runs every (scenario, drop, method) job on the worker pool. Brute-force
/// jobs whose search space is too large are skipped. Rows come back in
/// deterministic order regardless of scheduling.
pub fn run_experiment(
    cfg: &ExperimentConfig,
    scenarios: &[Scenario],
    methods: &[Method],
) -> Result<MetricsRecord, ExperimentError> {
    cfg.validate()?;
    let jobs: Vec<(Scenario, usize, Method)> = scenarios
        .iter()
        .flat_map(|&s| {
            (0..cfg.drops).flat_map(move |d| methods.iter().map(move |&m| (s, d, m)))
        })
        .collect();
    let results: Vec<Result<Option<DropResult>, ExperimentError>> = with_pool(cfg.threads, || {
        jobs.par_iter()
            .map(|&(s, d, m)| match run_drop_dyn(cfg, s, d, m) {
                Ok(r) => Ok(Some(r)),
                Err(ExperimentError::Baseline(BaselineError::SearchSpace { size, .. })) => {
                    log::info!("skipping brute force for {s:?}: {size} assignments");
                    Ok(None)
                }
                Err(e) => Err(e),
            })
            .collect()
    })?;
    let mut rows = Vec::with_capacity(results.len());
    for r in results {
        if let Some(row) = r? {
            rows.push(row);
        }
    }
    rows.sort_by(|a, b| {
        (a.scenario, a.drop, a.method).cmp(&(b.scenario, b.drop, b.method))
    });
    Ok(MetricsRecord { rows })
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ExperimentError + '_ {
    move |source| ExperimentError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> ExperimentError + '_ {
    move |source| ExperimentError::Csv {
        path: path.display().to_string(),
        source,
    }
}

pub fn ensure_dir(dir: &Path) -> Result<(), ExperimentError> {
    fs::create_dir_all(dir).map_err(io_err(dir))
}

fn write_csv<W: FnOnce(&mut csv::Writer<fs::File>) -> csv::Result<()>>(
    path: &Path,
    fill: W,
) -> Result<(), ExperimentError> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    fill(&mut w).map_err(csv_err(path))?;
    w.flush().map_err(io_err(path))
}

/// `episode,reward,normalized_reward`, episodes numbered from 1.
pub fn write_trace(path: &Path, rewards: &[f64]) -> Result<(), ExperimentError> {
    let normalized = normalize_trace(rewards);
    write_csv(path, |w| {
        w.write_record(["episode", "reward", "normalized_reward"])?;
        for (e, (r, n)) in rewards.iter().zip(&normalized).enumerate() {
            w.write_record([(e + 1).to_string(), r.to_string(), n.to_string()])?;
        }
        Ok(())
    })
}

pub const THROUGHPUT_HEADER: [&str; 8] =
    ["drop", "method", "N", "M", "k", "f", "total_bps", "avg_user_bps"];
pub const SUMMARY_HEADER: [&str; 8] = [
    "method",
    "N",
    "M",
    "k",
    "f",
    "drops",
    "mean_total_bps",
    "mean_avg_user_bps",
];

pub fn write_throughput(path: &Path, record: &MetricsRecord) -> Result<(), ExperimentError> {
    write_csv(path, |w| {
        w.write_record(THROUGHPUT_HEADER)?;
        for r in &record.rows {
            let s = r.scenario;
            w.write_record([
                r.drop.to_string(),
                r.method.as_str().to_string(),
                s.num_users.to_string(),
                s.num_aps.to_string(),
                s.k_max.to_string(),
                s.f_max.to_string(),
                r.total_bps.to_string(),
                r.avg_user_bps.to_string(),
            ])?;
        }
        Ok(())
    })
}

pub fn write_summary(path: &Path, record: &MetricsRecord) -> Result<(), ExperimentError> {
    write_csv(path, |w| {
        w.write_record(SUMMARY_HEADER)?;
        for s in record.summary() {
            let sc = s.scenario;
            w.write_record([
                s.method.as_str().to_string(),
                sc.num_users.to_string(),
                sc.num_aps.to_string(),
                sc.k_max.to_string(),
                sc.f_max.to_string(),
                s.drops.to_string(),
                s.mean_total_bps.to_string(),
                s.mean_avg_user_bps.to_string(),
            ])?;
        }
        Ok(())
    })
}

/// Reads `throughput.csv` back into rows (without traces or user rates).
pub fn read_throughput(path: &Path) -> Result<Vec<DropResult>, ExperimentError> {
    let mut rdr = csv::Reader::from_path(path).map_err(csv_err(path))?;
    let parse_err = |field: &str, value: &str| {
        ExperimentError::Config(ConfigError::new(field, format!("cannot parse '{value}'")))
    };
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(csv_err(path))?;
        let get = |i: usize| rec.get(i).unwrap_or("");
        let num = |i: usize| get(i).parse::<usize>().map_err(|_| parse_err(THROUGHPUT_HEADER[i], get(i)));
        let real = |i: usize| get(i).parse::<f64>().map_err(|_| parse_err(THROUGHPUT_HEADER[i], get(i)));
        rows.push(DropResult {
            drop: num(0)?,
            method: get(1).parse().map_err(|_| parse_err("method", get(1)))?,
            scenario: Scenario::new(num(2)?, num(3)?, num(4)?, num(5)?),
            total_bps: real(6)?,
            avg_user_bps: real(7)?,
            user_rates: Vec::new(),
            trace: None,
        });
    }
    Ok(rows)
}

/// Writes the configuration actually used next to the results.
pub fn write_config(path: &Path, cfg: &ExperimentConfig) -> Result<(), ExperimentError> {
    let mut f = fs::File::create(path).map_err(io_err(path))?;
    f.write_all(cfg.to_kv_string().as_bytes()).map_err(io_err(path))
}

/// Output of the `train` command.
pub struct TrainRun {
    pub record: MetricsRecord,
    pub mean_trace: Vec<f64>,
}

/// MADQN on `cfg.drops` drops of the single scenario
/// `(num_users, num_aps, k_max, f_max)`. Writes `trace.csv` (mean over
/// drops), `throughput.csv`, `summary.csv` and per-agent checkpoints under
/// `models/drop_<d>/`. With `init_from`, drop 0's agents start from the
/// checkpoints found there.
pub fn train_command(
    cfg: &ExperimentConfig,
    out: &Path,
    init_from: Option<&Path>,
) -> Result<TrainRun, ExperimentError> {
    match cfg.precision {
        Precision::F32 => train_command_typed::<f32>(cfg, out, init_from),
        Precision::F64 => train_command_typed::<f64>(cfg, out, init_from),
    }
}

fn train_command_typed<T: Scalar>(
    cfg: &ExperimentConfig,
    out: &Path,
    init_from: Option<&Path>,
) -> Result<TrainRun, ExperimentError> {
    cfg.validate()?;
    ensure_dir(out)?;
    let scenario = Scenario::new(cfg.num_users, cfg.num_aps, cfg.k_max, cfg.f_max);
    let initial = match init_from {
        Some(dir) => Some(
            (0..cfg.num_users)
                .map(|i| dqn::load_network::<T>(&dir.join(agent_file(i))))
                .collect::<Result<Vec<_>, _>>()?,
        ),
        None => None,
    };
    let results = with_pool(cfg.threads, || {
        (0..cfg.drops)
            .into_par_iter()
            .map(|d| {
                let init = if d == 0 { initial.clone() } else { None };
                run_drop::<T>(cfg, scenario, d, Method::Madqn, init)
            })
            .collect::<Vec<_>>()
    })?;
    let mut record = MetricsRecord::default();
    for (d, r) in results.into_iter().enumerate() {
        let (row, nets) = r?;
        let dir = out.join("models").join(format!("drop_{d}"));
        ensure_dir(&dir)?;
        for (i, net) in nets.into_iter().flatten().enumerate() {
            dqn::save_network(&net, &dir.join(agent_file(i)))?;
        }
        record.rows.push(row);
    }
    let mean_trace = record
        .mean_trace(Method::Madqn, &scenario)
        .unwrap_or_default();
    write_trace(&out.join("trace.csv"), &mean_trace)?;
    write_throughput(&out.join("throughput.csv"), &record)?;
    write_summary(&out.join("summary.csv"), &record)?;
    write_config(&out.join("config.txt"), cfg)?;
    Ok(TrainRun { record, mean_trace })
}

pub fn agent_file(agent: usize) -> String {
    format!("agent_{agent:02}.qnet")
}

/// Runs `scenarios x methods` and writes `throughput.csv` and `summary.csv`.
pub fn sweep_command(
    cfg: &ExperimentConfig,
    scenarios: &[Scenario],
    methods: &[Method],
    out: &Path,
) -> Result<MetricsRecord, ExperimentError> {
    cfg.validate()?;
    ensure_dir(out)?;
    let record = run_experiment(cfg, scenarios, methods)?;
    write_throughput(&out.join("throughput.csv"), &record)?;
    write_summary(&out.join("summary.csv"), &record)?;
    write_config(&out.join("config.txt"), cfg)?;
    Ok(record)
}
