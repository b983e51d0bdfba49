//! Run configuration, pipeline driver and report writers behind the `macc` binary.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use clap::{Parser, ValueEnum};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use macc_core::decompose::{decompose, Decomposition};
use macc_core::milp::{plan_sequential, solver_by_name, PlanError, PlanOptions, SequentialPlan, SolverAdapter};
use macc_core::ordering::{dependencies, order_substructures, parallel_schedule, BuildOrder};
use macc_core::parallel::{plan_parallel, ParallelPlan};
use macc_core::reachability::{dump, traversability};
use macc_core::simulate::{replay, replay_trace, snapshot_rows, ActionSchedule};
use macc_core::world::{corpus_band, generate_random_structure, load_structure, GridDims, HeightMap, WorldError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Decompose,
    Order,
    PlanSequential,
    PlanParallel,
    Simulate,
    Bench,
}

/// Which planners a bench run exercises.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BenchPlan {
    None,
    Sequential,
    Parallel,
    Both,
}

#[derive(Debug, Clone, PartialEq, Parser, Serialize, Deserialize)]
#[command(name = "macc", version, about = "Plan multi-robot block construction")]
pub struct RunConfig {
    /// Structure file (text grid, or `.json`).
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub mode: Mode,
    /// Robot cap; defaults to 20 on 10x10x4, 6 on 7x7x4 and 4 elsewhere.
    #[arg(long)]
    pub max_robots: Option<usize>,
    #[arg(long, default_value = "highs")]
    pub solver: String,
    /// Wall-clock budget per structure, in seconds.
    #[arg(long, default_value_t = 10_000.0)]
    pub budget_s: f64,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Write the traversability matrix and contours of every environment planned against.
    #[arg(long)]
    pub dump_traversability: bool,
    /// Largest makespan tried per solve.
    #[arg(long, default_value_t = 200)]
    pub tmax: usize,
    /// Schedule to replay in `simulate` mode.
    #[arg(long)]
    pub schedule: Option<PathBuf>,
    /// Bench grid size.
    #[arg(long, num_args = 3, value_names = ["X", "Y", "Z"])]
    pub dims: Option<Vec<usize>>,
    /// Bench corpus size.
    #[arg(long, default_value_t = 8)]
    pub count: usize,
    /// Bench worker threads.
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
    #[arg(long, value_enum, default_value = "both")]
    pub bench_plan: BenchPlan,
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        if self.mode != Mode::Bench && self.input.is_none() {
            return Err(CliError::Config("--input is required".into()));
        }
        if self.mode == Mode::Simulate && self.schedule.is_none() {
            return Err(CliError::Config("--schedule is required for simulate".into()));
        }
        if self.mode == Mode::Bench && self.seed.is_none() {
            return Err(CliError::Config("--seed is required for bench".into()));
        }
        if let Some(d) = &self.dims {
            if d.len() != 3 {
                return Err(CliError::Config("--dims takes three values".into()));
            }
        }
        if !(self.budget_s > 0.0 && self.budget_s.is_finite()) {
            return Err(CliError::Config(format!("bad budget {}", self.budget_s)));
        }
        if self.max_robots == Some(0) {
            return Err(CliError::Config("--max-robots must be positive".into()));
        }
        if solver_by_name(&self.solver).is_none() {
            return Err(CliError::Config(format!("unknown solver `{}`", self.solver)));
        }
        Ok(())
    }

    fn plan_options(&self) -> PlanOptions {
        PlanOptions {
            tmax: self.tmax,
            budget: Duration::from_secs_f64(self.budget_s),
            seed: self.seed.unwrap_or(0),
        }
    }

    fn robots_for(&self, dims: GridDims) -> usize {
        self.max_robots.unwrap_or_else(|| default_robots(dims))
    }
}

pub fn default_robots(dims: GridDims) -> usize {
    match (dims.x_size, dims.y_size, dims.z_size) {
        (10, 10, 4) => 20,
        (7, 7, 4) => 6,
        _ => 4,
    }
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error("input: {0}")]
    Input(#[from] WorldError),
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error("schedule: {0}")]
    Schedule(String),
    #[error("replay check failed: {0}")]
    ReplayCheck(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Input(_) | CliError::Schedule(_) | CliError::Json(_) => 2,
            CliError::Plan(PlanError::Infeasible { .. }) => 3,
            CliError::Plan(PlanError::Timeout { .. }) => 4,
            CliError::Plan(PlanError::Replay(_) | PlanError::Mismatch) | CliError::ReplayCheck(_) => 5,
            _ => 1,
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub config: RunConfig,
    pub input_sha256: Option<String>,
    pub seeds: Vec<u64>,
    pub outputs: Vec<String>,
}

/// Reads a manifest and returns its configuration, writing into `out` when given.
pub fn config_from_manifest(path: &Path, out: Option<PathBuf>) -> Result<RunConfig, CliError> {
    let m: Manifest = serde_json::from_str(&fs::read_to_string(path)?)?;
    let mut config = m.config;
    if let Some(out) = out {
        config.out = out;
    }
    Ok(config)
}

/// What a run wrote.
#[derive(Debug, Default)]
pub struct Outcome {
    pub outputs: Vec<String>,
    /// Worst failure seen by a bench run that still produced its tables.
    pub bench_failure: Option<i32>,
}

struct Writer {
    dir: PathBuf,
    written: Vec<String>,
}

impl Writer {
    fn put(&mut self, name: &str, body: impl AsRef<[u8]>) -> Result<(), CliError> {
        let path = self.dir.join(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(path, body)?;
        self.written.push(name.to_string());
        Ok(())
    }

    fn csv<R: Serialize>(&mut self, name: &str, rows: &[R]) -> Result<(), CliError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in rows {
            w.serialize(r)?;
        }
        let bytes = w.into_inner().map_err(|e| CliError::Io(e.into_error()))?;
        self.put(name, bytes)
    }

    fn json<T: Serialize>(&mut self, name: &str, v: &T) -> Result<(), CliError> {
        let mut body = serde_json::to_string_pretty(v)?;
        body.push('\n');
        self.put(name, body)
    }
}

pub fn run(config: &RunConfig) -> Result<Outcome, CliError> {
    config.validate()?;
    fs::create_dir_all(&config.out)?;
    let mut w = Writer {
        dir: config.out.clone(),
        written: Vec::new(),
    };
    let adapter = solver_by_name(&config.solver).expect("validated solver");
    let input = match &config.input {
        Some(p) if config.mode != Mode::Bench => Some((load_structure(p)?, digest(p)?)),
        _ => None,
    };
    let mut seeds = config.seed.into_iter().collect::<Vec<_>>();
    let mut bench_failure = None;

    match config.mode {
        Mode::Decompose => {
            let (map, _) = input.as_ref().expect("validated input");
            let d = decompose(map);
            w.put("substructures.json", d.to_json() + "\n")?;
            if config.dump_traversability {
                w.put("traversability.txt", dump(&traversability(map)))?;
            }
        }
        Mode::Order => {
            let (map, _) = input.as_ref().expect("validated input");
            let d = decompose(map);
            let order = order_substructures(&d);
            write_order(&mut w, &d, &order)?;
            if config.dump_traversability {
                w.put("traversability.txt", prefix_dumps(map.dims(), &order))?;
            }
        }
        Mode::PlanSequential => {
            let (map, _) = input.as_ref().expect("validated input");
            let order = order_substructures(&decompose(map));
            let robots = config.robots_for(map.dims());
            let plan = plan_sequential(
                &order,
                &HeightMap::empty(map.dims()),
                robots,
                adapter.as_ref(),
                &config.plan_options(),
            )?;
            replay_check(map, &plan.schedule)?;
            write_sequential(&mut w, &plan, robots)?;
            w.put("final.txt", plan.final_env.to_text())?;
            if config.dump_traversability {
                w.put("traversability.txt", prefix_dumps(map.dims(), &order))?;
            }
        }
        Mode::PlanParallel => {
            let (map, _) = input.as_ref().expect("validated input");
            let schedule = parallel_schedule(&decompose(map));
            let robots = config.robots_for(map.dims());
            let plan = plan_parallel(
                &schedule,
                &HeightMap::empty(map.dims()),
                robots,
                adapter.as_ref(),
                &config.plan_options(),
            )?;
            replay_check(map, &plan.schedule)?;
            write_parallel(&mut w, &plan, robots)?;
            w.put("final.txt", plan.final_env.to_text())?;
            if config.dump_traversability {
                let mut out = String::new();
                for (i, s) in plan.stages.iter().enumerate() {
                    let _ = writeln!(out, "stage {} start", i + 1);
                    out.push_str(&dump(&traversability(&s.start_env)));
                }
                w.put("traversability.txt", out)?;
            }
        }
        Mode::Simulate => {
            let (map, _) = input.as_ref().expect("validated input");
            let path = config.schedule.as_ref().expect("validated schedule");
            let text = fs::read_to_string(path)?;
            let schedule = ActionSchedule::from_json(&text).map_err(CliError::Schedule)?;
            let start = HeightMap::empty(map.dims());
            let trace = replay_trace(&start, &schedule).map_err(|e| CliError::ReplayCheck(e.to_string()))?;
            w.put("trace.txt", snapshot_rows(&trace).join("\n") + "\n")?;
            replay_check(map, &schedule)?;
            let m = schedule.metrics();
            w.json(
                "summary.json",
                &SimulateSummary {
                    makespan: m.makespan,
                    sum_of_costs: m.sum_of_costs,
                    robots: schedule.robot_count(),
                    matches_target: true,
                },
            )?;
        }
        Mode::Bench => {
            let (rows, timings, structures) = bench(config, adapter.as_ref())?;
            seeds = rows.iter().map(|r| r.seed).collect();
            for (row, map) in rows.iter().zip(&structures) {
                w.put(&format!("corpus/{:03}.txt", row.index), map.to_text())?;
            }
            bench_failure = rows.iter().filter_map(|r| status_code(&r.status)).max();
            let summary = bench_summary(&rows);
            w.csv("metrics.csv", &rows)?;
            w.csv("timings.csv", &timings)?;
            w.json("summary.json", &summary)?;
        }
    }

    let manifest = Manifest {
        tool: "macc".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        config: config.clone(),
        input_sha256: input.map(|(_, d)| d),
        seeds,
        outputs: w.written.clone(),
    };
    w.json("manifest.json", &manifest)?;
    Ok(Outcome {
        outputs: w.written,
        bench_failure,
    })
}

fn digest(path: &Path) -> Result<String, CliError> {
    let bytes = fs::read(path)?;
    let hash = Sha256::digest(&bytes);
    Ok(hash.iter().map(|b| format!("{b:02x}")).collect())
}

/// A report is only written once the schedule rebuilds the target from the empty world.
fn replay_check(target: &HeightMap, schedule: &ActionSchedule) -> Result<(), CliError> {
    let out = replay(&HeightMap::empty(target.dims()), schedule).map_err(|e| CliError::ReplayCheck(e.to_string()))?;
    if &out != target {
        return Err(CliError::ReplayCheck("final heightmap differs from the input".into()));
    }
    Ok(())
}

fn prefix_dumps(dims: GridDims, order: &BuildOrder) -> String {
    let mut env = HeightMap::empty(dims);
    let mut out = String::new();
    for s in order.in_order() {
        let _ = writeln!(out, "before substructure {}", s.index);
        out.push_str(&dump(&traversability(&env)));
        for b in s.blocks.iter() {
            if b.z as u32 > env.get(b.x, b.y) {
                env.set(b.x, b.y, b.z as u32).expect("block inside grid");
            }
        }
    }
    out
}

#[derive(Serialize)]
struct OrderDoc<'a> {
    sequence: &'a [usize],
    merges: &'a [macc_core::ordering::MergeEvent],
    stages: Vec<Vec<usize>>,
    dependencies: Vec<macc_core::ordering::DependencyEdge>,
}

fn write_order(w: &mut Writer, d: &Decomposition, order: &BuildOrder) -> Result<(), CliError> {
    let deps = dependencies(d);
    w.json(
        "order.json",
        &OrderDoc {
            sequence: &order.sequence,
            merges: &order.merges,
            stages: parallel_schedule(d).stages,
            dependencies: deps.clone(),
        },
    )?;
    w.csv("dependencies.csv", &deps)
}

/// One row of the per-substructure table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    #[serde(rename = "Stage")]
    pub stage: Option<usize>,
    #[serde(rename = "Substructure")]
    pub substructure: usize,
    #[serde(rename = "Makespan")]
    pub makespan: usize,
    #[serde(rename = "Sum-of-costs")]
    pub sum_of_costs: usize,
    #[serde(rename = "Solve Time")]
    pub solve_time: f64,
    #[serde(rename = "Total Solve Time")]
    pub total_solve_time: f64,
}

/// Structure-level totals, in the same numbers as the rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanSummary {
    pub mode: Mode,
    pub max_robots: usize,
    pub robots_used: usize,
    pub substructures: usize,
    pub stages: usize,
    #[serde(rename = "Sum of costs")]
    pub sum_of_costs: usize,
    #[serde(rename = "No. of timesteps")]
    pub timesteps: usize,
    #[serde(rename = "Final Computation Time")]
    pub final_time: f64,
    #[serde(rename = "Total Computation Time")]
    pub total_time: f64,
    pub rows: Vec<MetricRow>,
}

#[derive(Serialize)]
struct SimulateSummary {
    makespan: usize,
    sum_of_costs: usize,
    robots: usize,
    matches_target: bool,
}

fn write_summary(w: &mut Writer, schedule: &ActionSchedule, summary: PlanSummary) -> Result<(), CliError> {
    w.put("schedule.json", schedule.to_json() + "\n")?;
    w.csv("metrics.csv", &summary.rows)?;
    w.json("summary.json", &summary)
}

pub fn sequential_summary(plan: &SequentialPlan, max_robots: usize) -> PlanSummary {
    let rows: Vec<MetricRow> = plan
        .steps
        .iter()
        .map(|(i, p)| MetricRow {
            stage: None,
            substructure: *i,
            makespan: p.makespan,
            sum_of_costs: p.sum_of_costs,
            solve_time: p.solve_seconds(),
            total_solve_time: p.total_solve_seconds(),
        })
        .collect();
    let m = plan.schedule.metrics();
    PlanSummary {
        mode: Mode::PlanSequential,
        max_robots,
        robots_used: plan.schedule.robot_count(),
        substructures: rows.len(),
        stages: rows.len(),
        sum_of_costs: m.sum_of_costs,
        timesteps: m.makespan,
        final_time: rows.iter().map(|r| r.solve_time).sum(),
        total_time: rows.iter().map(|r| r.total_solve_time).sum(),
        rows,
    }
}

pub fn parallel_summary(plan: &ParallelPlan, max_robots: usize) -> PlanSummary {
    let mut rows = Vec::new();
    for (k, stage) in plan.stages.iter().enumerate() {
        for m in &stage.member_schedules {
            rows.push(MetricRow {
                stage: Some(k + 1),
                substructure: m.index,
                makespan: m.plan.makespan,
                sum_of_costs: m.plan.sum_of_costs,
                solve_time: m.plan.solve_seconds(),
                total_solve_time: m.total_solve_seconds(),
            });
        }
    }
    let m = plan.schedule.metrics();
    PlanSummary {
        mode: Mode::PlanParallel,
        max_robots,
        robots_used: plan.schedule.robot_count(),
        substructures: rows.len(),
        stages: plan.stages.len(),
        sum_of_costs: m.sum_of_costs,
        timesteps: m.makespan,
        final_time: rows.iter().map(|r| r.solve_time).sum(),
        total_time: rows.iter().map(|r| r.total_solve_time).sum(),
        rows,
    }
}

fn write_sequential(w: &mut Writer, plan: &SequentialPlan, robots: usize) -> Result<(), CliError> {
    write_summary(w, &plan.schedule, sequential_summary(plan, robots))
}

fn write_parallel(w: &mut Writer, plan: &ParallelPlan, robots: usize) -> Result<(), CliError> {
    write_summary(w, &plan.schedule, parallel_summary(plan, robots))?;
    let stages: Vec<StageRow> = plan
        .stages
        .iter()
        .enumerate()
        .map(|(k, s)| {
            let m = s.merged.metrics();
            StageRow {
                stage: k + 1,
                members: join(&s.stage),
                deferred: join(&s.deferred),
                makespan: m.makespan,
                sum_of_costs: m.sum_of_costs,
            }
        })
        .collect();
    w.csv("stages.csv", &stages)
}

fn join(v: &[usize]) -> String {
    v.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(" ")
}

#[derive(Serialize)]
struct StageRow {
    #[serde(rename = "Stage")]
    stage: usize,
    #[serde(rename = "Members")]
    members: String,
    #[serde(rename = "Deferred")]
    deferred: String,
    #[serde(rename = "Makespan")]
    makespan: usize,
    #[serde(rename = "Sum-of-costs")]
    sum_of_costs: usize,
}

/// Deterministic per-structure bench metrics; wall-clock numbers live in [`TimingRow`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub index: usize,
    pub seed: u64,
    pub occupancy: f64,
    pub blocks: usize,
    pub substructures: usize,
    pub merges: usize,
    pub stages: usize,
    pub seq_makespan: Option<usize>,
    pub seq_cost: Option<usize>,
    pub par_makespan: Option<usize>,
    pub par_cost: Option<usize>,
    pub status: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingRow {
    pub index: usize,
    pub seq_total_solve_s: Option<f64>,
    pub par_total_solve_s: Option<f64>,
    pub wall_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchSummary {
    pub structures: usize,
    pub merges: usize,
    pub planned_both: usize,
    pub mean_seq_makespan: Option<f64>,
    pub mean_par_makespan: Option<f64>,
    /// Mean of 1 - par/seq over structures with at least two stages.
    pub mean_reduction_multi_stage: Option<f64>,
    pub failures: usize,
}

fn status_code(status: &str) -> Option<i32> {
    match status {
        "ok" => None,
        "infeasible" => Some(3),
        "timeout" => Some(4),
        "mismatch" => Some(5),
        _ => Some(1),
    }
}

fn status_of(e: &CliError) -> &'static str {
    match e.exit_code() {
        3 => "infeasible",
        4 => "timeout",
        5 => "mismatch",
        _ => "error",
    }
}

type BenchOutput = (Vec<BenchRow>, Vec<TimingRow>, Vec<HeightMap>);

fn bench(config: &RunConfig, adapter: &dyn SolverAdapter) -> Result<BenchOutput, CliError> {
    let d = config.dims.clone().unwrap_or_else(|| vec![7, 7, 4]);
    let dims = GridDims::new(d[0], d[1], d[2])?;
    let base = config.seed.expect("validated seed");
    let structures = (0..config.count)
        .map(|i| generate_random_structure(dims, corpus_band(i), base.wrapping_add(i as u64)))
        .collect::<Result<Vec<_>, _>>()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers.max(1))
        .build()
        .map_err(|e| CliError::Config(e.to_string()))?;
    let results: Vec<(BenchRow, TimingRow)> = pool.install(|| {
        use rayon::prelude::*;
        structures
            .par_iter()
            .enumerate()
            .map(|(i, map)| bench_one(config, adapter, i, base.wrapping_add(i as u64), map))
            .collect()
    });
    let (rows, timings) = results.into_iter().unzip();
    Ok((rows, timings, structures))
}

fn bench_one(
    config: &RunConfig,
    adapter: &dyn SolverAdapter,
    index: usize,
    seed: u64,
    map: &HeightMap,
) -> (BenchRow, TimingRow) {
    let t0 = Instant::now();
    let dec = decompose(map);
    let order = order_substructures(&dec);
    let stages = parallel_schedule(&dec);
    let robots = config.robots_for(map.dims());
    let opts = config.plan_options();
    let start = HeightMap::empty(map.dims());
    let mut row = BenchRow {
        index,
        seed,
        occupancy: (map.occupancy().as_f64() * 100.0).round() / 100.0,
        blocks: map.total_blocks(),
        substructures: order.sequence.len(),
        merges: order.merges.len(),
        stages: stages.stages.len(),
        seq_makespan: None,
        seq_cost: None,
        par_makespan: None,
        par_cost: None,
        status: "ok".into(),
    };
    let mut timing = TimingRow {
        index,
        seq_total_solve_s: None,
        par_total_solve_s: None,
        wall_s: 0.0,
    };
    let fail = |row: &mut BenchRow, e: CliError| {
        if row.status == "ok" {
            row.status = status_of(&e).into();
        }
        log::warn!("structure {index}: {e}");
    };
    if matches!(config.bench_plan, BenchPlan::Sequential | BenchPlan::Both) {
        let r = plan_sequential(&order, &start, robots, adapter, &opts)
            .map_err(CliError::from)
            .and_then(|p| replay_check(map, &p.schedule).map(|_| p));
        match r {
            Ok(p) => {
                let m = p.schedule.metrics();
                row.seq_makespan = Some(m.makespan);
                row.seq_cost = Some(m.sum_of_costs);
                timing.seq_total_solve_s = Some(sequential_summary(&p, robots).total_time);
            }
            Err(e) => fail(&mut row, e),
        }
    }
    if matches!(config.bench_plan, BenchPlan::Parallel | BenchPlan::Both) {
        let r = plan_parallel(&stages, &start, robots, adapter, &opts)
            .map_err(CliError::from)
            .and_then(|p| replay_check(map, &p.schedule).map(|_| p));
        match r {
            Ok(p) => {
                let m = p.schedule.metrics();
                row.par_makespan = Some(m.makespan);
                row.par_cost = Some(m.sum_of_costs);
                timing.par_total_solve_s = Some(parallel_summary(&p, robots).total_time);
            }
            Err(e) => fail(&mut row, e),
        }
    }
    timing.wall_s = t0.elapsed().as_secs_f64();
    (row, timing)
}

fn mean(v: impl Iterator<Item = f64>) -> Option<f64> {
    let (n, s) = v.fold((0usize, 0.0), |(n, s), x| (n + 1, s + x));
    (n > 0).then(|| s / n as f64)
}

pub fn bench_summary(rows: &[BenchRow]) -> BenchSummary {
    let both: Vec<(&BenchRow, usize, usize)> = rows
        .iter()
        .filter_map(|r| Some((r, r.seq_makespan?, r.par_makespan?)))
        .collect();
    BenchSummary {
        structures: rows.len(),
        merges: rows.iter().map(|r| r.merges).sum(),
        planned_both: both.len(),
        mean_seq_makespan: mean(both.iter().map(|&(_, s, _)| s as f64)),
        mean_par_makespan: mean(both.iter().map(|&(_, _, p)| p as f64)),
        mean_reduction_multi_stage: mean(
            both.iter()
                .filter(|(r, s, _)| r.stages >= 2 && *s > 0)
                .map(|&(_, s, p)| 1.0 - p as f64 / s as f64),
        ),
        failures: rows.iter().filter(|r| r.status != "ok").count(),
    }
}
