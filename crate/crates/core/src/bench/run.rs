//! Benchmark runner: timed repetitions and their verification.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use super::{flops_estimate, read_distributed, reference_dft, relative_error, truncate_last_axis, write_distributed};
use crate::kernels::ORACLE_LIMIT;
use crate::layout::ProcessGrid;
use crate::plan::{Decomposition, ExchangeMode, ExchangeOptions, Plan, PlanOptions, TransformKind};
use crate::tensor::{DistTensor, GlobalTensor};
use crate::transport::socket::spawn_socket_world;
use crate::transport::{spawn_world_with, Communicator, CostModel, GridComms, WorldOptions};
use crate::{Direction, Error, Result, Scalar, TimingBreakdown};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    InProcess,
    CostModel,
    Socket,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    Double,
    Single,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VerifyMode {
    /// Verify when the tensor has at most 2^16 elements.
    Auto,
    On,
    Off,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GridSpec {
    Shape(Vec<usize>),
    /// Factor this many ranks automatically.
    Ranks(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub dims: Vec<usize>,
    pub grid: GridSpec,
    /// C2C and R2C run forward, C2R runs backward.
    pub kind: TransformKind,
    pub decomposition: Decomposition,
    pub backend: Backend,
    pub precision: Precision,
    pub exchange: ExchangeOptions,
    pub normalize: bool,
    pub reps: usize,
    pub warmup: usize,
    pub seed: u64,
    /// Used by the cost-model backend only.
    pub cost_model: CostModel,
    pub verify: VerifyMode,
    pub input: Option<PathBuf>,
    pub output: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            dims: vec![8, 8, 8],
            grid: GridSpec::Ranks(1),
            kind: TransformKind::C2C,
            decomposition: Decomposition::Pencil,
            backend: Backend::InProcess,
            precision: Precision::Double,
            exchange: ExchangeOptions::default(),
            normalize: true,
            reps: 5,
            warmup: 1,
            seed: 0,
            cost_model: CostModel::default(),
            verify: VerifyMode::Auto,
            input: None,
            output: None,
        }
    }
}

impl RunConfig {
    fn grid_axes(&self) -> usize {
        match self.decomposition {
            Decomposition::Slab => 1,
            Decomposition::Pencil => 2,
            Decomposition::General => self.dims.len().saturating_sub(1).max(1),
        }
    }

    /// Checks the configuration and resolves the process grid.
    pub fn validate(&self) -> Result<ProcessGrid> {
        if self.reps == 0 {
            return Err(Error::Config("repetitions must be at least 1".into()));
        }
        if self.dims.len() < 2 {
            return Err(Error::RankTooLow(self.dims.len()));
        }
        if self.exchange.chunks == 0 {
            return Err(Error::Config("chunks must be at least 1".into()));
        }
        if self.exchange.mode == ExchangeMode::Pipelined && self.exchange.staging_buffers < 2 {
            return Err(Error::ArenaExhausted(format!(
                "pipelined exchange needs at least 2 staging buffers, got {}",
                self.exchange.staging_buffers
            )));
        }
        if self.backend == Backend::CostModel {
            self.cost_model.validate()?;
        }
        let grid = match &self.grid {
            GridSpec::Shape(s) => ProcessGrid::new(s.clone())?,
            GridSpec::Ranks(p) => ProcessGrid::auto(*p, self.grid_axes())?,
        };
        Ok(grid)
    }

    fn plan_options(&self) -> PlanOptions {
        PlanOptions {
            exchange: self.exchange,
            normalize: self.normalize,
            ..PlanOptions::default()
        }
    }

    fn verify_enabled(&self) -> bool {
        match self.verify {
            VerifyMode::On => true,
            VerifyMode::Off => false,
            VerifyMode::Auto => self.dims.iter().product::<usize>() <= ORACLE_LIMIT,
        }
    }
}

/// The configuration as it ran.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportConfig {
    pub dims: Vec<usize>,
    pub grid: Vec<usize>,
    pub ranks: usize,
    pub kind: TransformKind,
    pub direction: Direction,
    pub decomposition: Decomposition,
    pub backend: Backend,
    pub precision: Precision,
    pub exchange: ExchangeMode,
    pub chunks: usize,
    pub staging_buffers: usize,
    pub normalize: bool,
    pub reps: usize,
    pub warmup: usize,
    pub seed: u64,
    pub cost_model: Option<CostModel>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VerifyStatus {
    Passed,
    Failed,
    Skipped,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verification {
    pub status: VerifyStatus,
    /// `oracle` compares against a direct DFT, `roundtrip` against the
    /// field the spectrum was made from.
    pub method: Option<String>,
    pub relative_error: Option<f64>,
    pub tolerance: Option<f64>,
}

impl Verification {
    fn skipped() -> Self {
        Self {
            status: VerifyStatus::Skipped,
            method: None,
            relative_error: None,
            tolerance: None,
        }
    }
}

/// Timings are reduced with a field-wise max over ranks per repetition.
/// `timing_min` and `timing_median` are the repetitions with the smallest
/// and the median (lower median) total.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema_version: u32,
    pub config: ReportConfig,
    pub flops: f64,
    pub timing_min: TimingBreakdown,
    pub timing_median: TimingBreakdown,
    pub repetitions: Vec<TimingBreakdown>,
    /// `flops / timing_min.total / 1e9`.
    pub gflops: f64,
    pub gflops_median: f64,
    pub verified: bool,
    pub verification: Verification,
}

const CSV_HEADER: &str = "row,dims,grid,kind,decomposition,backend,exchange,local_fft,pack,unpack,staging_copy,wire_comm,total,gflops,verification";

impl Report {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports always serialize")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("bad report: {e}")))
    }

    /// One row each for min, median and every repetition.
    pub fn to_csv(&self) -> String {
        let join = |v: &[usize]| v.iter().map(usize::to_string).collect::<Vec<_>>().join("x");
        let c = &self.config;
        let status = serde_json::to_value(self.verification.status).unwrap();
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        let rows = [("min".to_string(), &self.timing_min), ("median".to_string(), &self.timing_median)]
            .into_iter()
            .chain(self.repetitions.iter().enumerate().map(|(i, t)| (format!("rep{i}"), t)));
        for (name, t) in rows {
            let gflops = gflops(self.flops, t.total);
            out.push_str(&format!(
                "{name},{},{},{},{},{},{},{:e},{:e},{:e},{:e},{:e},{:e},{gflops:e},{}\n",
                join(&c.dims),
                join(&c.grid),
                c.kind,
                c.decomposition,
                serde_json::to_value(c.backend).unwrap().as_str().unwrap(),
                serde_json::to_value(c.exchange).unwrap().as_str().unwrap(),
                t.local_fft,
                t.pack,
                t.unpack,
                t.staging_copy,
                t.wire_comm,
                t.total,
                status.as_str().unwrap(),
            ));
        }
        out
    }
}

fn gflops(flops: f64, seconds: f64) -> f64 {
    if seconds > 0.0 {
        flops / seconds / 1e9
    } else {
        0.0
    }
}

struct Prepared<T> {
    grid: ProcessGrid,
    plan: Plan<T>,
    /// The R2C plan that produces C2R input spectra.
    source: Option<Plan<T>>,
}

fn prepare<T: Scalar>(config: &RunConfig) -> Result<Prepared<T>> {
    let grid = config.validate()?;
    let direction = match config.kind {
        TransformKind::C2R => Direction::Backward,
        _ => Direction::Forward,
    };
    let options = config.plan_options();
    let plan = Plan::new(config.decomposition, &config.dims, &grid, config.kind, direction, options)?;
    let source = match config.kind {
        TransformKind::C2R => Some(Plan::new(
            config.decomposition,
            &config.dims,
            &grid,
            TransformKind::R2C,
            Direction::Forward,
            options,
        )?),
        _ => None,
    };
    Ok(Prepared { grid, plan, source })
}

fn world_options(config: &RunConfig) -> WorldOptions {
    match config.backend {
        Backend::CostModel => WorldOptions::with_cost_model(config.cost_model),
        _ => WorldOptions::default(),
    }
}

/// Runs `config` on a world spawned in this process.
pub fn run(config: &RunConfig) -> Result<Report> {
    match config.precision {
        Precision::Double => run_typed::<f64>(config),
        Precision::Single => run_typed::<f32>(config),
    }
}

fn run_typed<T: Scalar>(config: &RunConfig) -> Result<Report> {
    let prep = prepare::<T>(config)?;
    let opts = world_options(config);
    let body = |comm: Communicator| rank_body(comm, config, &prep);
    let mut reports = match config.backend {
        Backend::Socket => spawn_socket_world(prep.grid.size(), &opts, body)?,
        _ => spawn_world_with(prep.grid.size(), &opts, body)?,
    };
    Ok(reports.swap_remove(0).expect("rank 0 assembles the report"))
}

/// Runs `config` as one rank of an existing world whose size matches the
/// grid. Collective; rank 0 returns the report.
pub fn run_on(comm: Communicator, config: &RunConfig) -> Result<Option<Report>> {
    match config.precision {
        Precision::Double => {
            let prep = prepare::<f64>(config)?;
            rank_body(comm, config, &prep)
        }
        Precision::Single => {
            let prep = prepare::<f32>(config)?;
            rank_body(comm, config, &prep)
        }
    }
}

fn rank_body<T: Scalar>(comm: Communicator, config: &RunConfig, prep: &Prepared<T>) -> Result<Option<Report>> {
    if comm.size() != prep.grid.size() {
        return Err(Error::Config(format!(
            "world of {} ranks cannot host grid {:?}",
            comm.size(),
            prep.grid.shape()
        )));
    }
    let comms = GridComms::new(comm, &prep.grid)?;
    let world = comms.world();
    let rank = comms.rank();
    let plan = &prep.plan;

    let mut origin = None;
    let input = match (&config.input, &prep.source) {
        (Some(path), _) => read_distributed(world, 0, path, plan.input_layout().clone())?,
        (None, Some(source)) => {
            let x = DistTensor::random(source.input_layout().clone(), rank, config.seed);
            let spectrum = source.execute(&comms, x.clone(), &mut TimingBreakdown::default())?;
            origin = Some(x);
            spectrum
        }
        (None, None) => DistTensor::random(plan.input_layout().clone(), rank, config.seed),
    };

    let mut repetitions = Vec::with_capacity(config.reps);
    let mut output = None;
    for i in 0..config.warmup + config.reps {
        let start = world.allreduce_max(world.now())?;
        world.advance_to(start);
        let mut timing = TimingBreakdown::default();
        let out = plan.execute(&comms, input.clone(), &mut timing)?;
        let reduced = timing.reduce_max(world)?;
        if i >= config.warmup {
            repetitions.push(reduced);
        }
        output = Some(out);
    }
    let output = output.expect("at least one repetition");

    let verification = if config.verify_enabled() {
        let reference = origin.as_ref().unwrap_or(&input).gather(world, 0)?;
        let result = output.gather(world, 0)?;
        match (reference, result) {
            (Some(reference), Some(result)) => verify(config, plan, &reference, &result, origin.is_some()),
            _ => Verification::skipped(),
        }
    } else {
        Verification::skipped()
    };

    if let Some(path) = &config.output {
        write_distributed(world, 0, path, &output)?;
    }
    world.barrier()?;
    if rank != 0 {
        return Ok(None);
    }

    let mut sorted = repetitions.clone();
    sorted.sort_by(|a, b| a.total.total_cmp(&b.total));
    let timing_min = sorted[0];
    let timing_median = sorted[(sorted.len() - 1) / 2];
    let flops = flops_estimate(&config.dims);
    let options = plan.options();
    Ok(Some(Report {
        schema_version: REPORT_SCHEMA_VERSION,
        config: ReportConfig {
            dims: config.dims.clone(),
            grid: prep.grid.shape().to_vec(),
            ranks: prep.grid.size(),
            kind: config.kind,
            direction: plan.direction(),
            decomposition: config.decomposition,
            backend: config.backend,
            precision: config.precision,
            exchange: options.exchange.mode,
            chunks: options.exchange.chunks,
            staging_buffers: options.exchange.staging_buffers,
            normalize: options.normalize,
            reps: config.reps,
            warmup: config.warmup,
            seed: config.seed,
            cost_model: world.cost_model().copied(),
        },
        flops,
        timing_min,
        timing_median,
        repetitions,
        gflops: gflops(flops, timing_min.total),
        gflops_median: gflops(flops, timing_median.total),
        verified: verification.status == VerifyStatus::Passed,
        verification,
    }))
}

/// Compares a gathered result against a direct DFT of the gathered input,
/// or against the spatial field a C2R input spectrum was made from.
fn verify<T: Scalar>(
    config: &RunConfig,
    plan: &Plan<T>,
    reference: &GlobalTensor<T>,
    result: &GlobalTensor<T>,
    round_trip: bool,
) -> Verification {
    let dims = &config.dims;
    let n = dims.iter().product::<usize>() as f64;
    let double = config.precision == Precision::Double;
    let got = result.data().to_complex_f64();
    let (method, want, tolerance) = match config.kind {
        TransformKind::C2R if round_trip => {
            let scale = if plan.options().normalize { 1.0 } else { n };
            let want = reference.data().to_complex_f64().into_iter().map(|v| v * scale).collect();
            ("roundtrip", want, if double { 1e-12 } else { 1e-4 })
        }
        TransformKind::C2R => {
            // The result must transform back to the given spectrum.
            let scale = if plan.options().normalize { 1.0 } else { 1.0 / n };
            let back = truncate_last_axis(&reference_dft(&got, dims, Direction::Forward), dims);
            let back: Vec<_> = back.into_iter().map(|v| v * scale).collect();
            let err = relative_error(&back, &reference.data().to_complex_f64());
            return finish("oracle", err, if double { 1e-10 } else { 1e-4 });
        }
        kind => {
            let full = reference_dft(&reference.data().to_complex_f64(), dims, Direction::Forward);
            let want = if kind == TransformKind::R2C {
                truncate_last_axis(&full, dims)
            } else {
                full
            };
            ("oracle", want, if double { 1e-10 } else { 1e-4 })
        }
    };
    finish(method, relative_error(&got, &want), tolerance)
}

fn finish(method: &str, err: f64, tolerance: f64) -> Verification {
    Verification {
        status: if err <= tolerance {
            VerifyStatus::Passed
        } else {
            VerifyStatus::Failed
        },
        method: Some(method.into()),
        relative_error: Some(err),
        tolerance: Some(tolerance),
    }
}
