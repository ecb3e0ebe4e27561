//! Forward and backward transform plans.
//!
//! A plan is an ordered list of [`Stage`]s. Every decomposition follows the
//! same recipe: transform the axes from last to first (forward) or first to
//! last (backward); before transforming axis `m`, move the tensor into the
//! layout where `m` is whole on every rank. Consecutive layouts differ in one
//! grid axis, so each move is a single transpose over one grid
//! sub-communicator, and moves that would not change ownership are skipped.
//!
//! * slab: one grid axis; a forward 3-D transform is FFT(2), FFT(1),
//!   transpose, FFT(0).
//! * pencil: a 3-D tensor on a 2-D grid; FFT(2), transpose over the row
//!   communicator, FFT(1), transpose over the column communicator, FFT(0).
//! * general: a `d+1`-axis tensor on a `d`-axis grid; `d+1` FFT stages
//!   interleaved with `d` transposes.
//!
//! Forward transforms are unnormalized. Backward plans end with a
//! [`Stage::Normalize`] by `1/N` unless disabled in [`PlanOptions`].

use std::sync::Arc;
use std::time::Instant;

use num_complex::Complex;
use serde::{Deserialize, Serialize};

pub use crate::exchange::{ExchangeMode, ExchangeOptions};

use crate::exchange::{global_transpose, local_transpose};
use crate::kernels::{fft_batched_with, irfft_lanes, rfft_lanes, BatchSpec, Fft1d, FftPlanner, RealFft};
use crate::layout::{frequency_layout, spatial_layout, Distribution, ElementKind, GlobalDims, ProcessGrid};
use crate::tensor::{DistTensor, GlobalTensor, LocalData};
use crate::timing::{metered, TimingBreakdown};
use crate::transport::{spawn_world_with, CostModel, GridComms, WorldOptions};
use crate::{Direction, Error, Result, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TransformKind {
    C2C,
    R2C,
    C2R,
}

impl std::fmt::Display for TransformKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            TransformKind::C2C => "c2c",
            TransformKind::R2C => "r2c",
            TransformKind::C2R => "c2r",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Decomposition {
    Slab,
    Pencil,
    General,
}

impl std::fmt::Display for Decomposition {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Decomposition::Slab => "slab",
            Decomposition::Pencil => "pencil",
            Decomposition::General => "general",
        })
    }
}

/// How strided axes are fed to the 1-D kernels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LaneStrategy {
    /// Transform lanes in place through their stride.
    Strided,
    /// Transpose each `n × h′` slab to contiguous lanes and back.
    Contiguous,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlanOptions {
    pub exchange: ExchangeOptions,
    /// Apply `1/N` at the end of backward plans.
    pub normalize: bool,
    pub lanes: LaneStrategy,
    /// Reject non-finite input samples before executing.
    pub validate: bool,
}

impl Default for PlanOptions {
    fn default() -> Self {
        Self {
            exchange: ExchangeOptions::default(),
            normalize: true,
            lanes: LaneStrategy::Strided,
            validate: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum KernelKind {
    Complex,
    RealToComplex,
    ComplexToReal,
}

/// Local block viewed as `h × n × h′` around the transformed axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LoopVars {
    pub h: usize,
    pub n: usize,
    pub h_prime: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Stage {
    LocalFft {
        axis: usize,
        kernel: KernelKind,
        direction: Direction,
        input: Distribution,
        output: Distribution,
    },
    Transpose {
        from: Distribution,
        to: Distribution,
        grid_axis: usize,
        mode: ExchangeMode,
    },
    /// Reserved for layouts that need an explicit super-element transpose;
    /// the builders never emit it because unpacking already writes xyz order.
    LocalTranspose {
        rows: usize,
        cols: usize,
        super_element: usize,
    },
    Normalize {
        factor: f64,
    },
}

impl Stage {
    pub fn is_fft(&self) -> bool {
        matches!(self, Stage::LocalFft { .. })
    }

    pub fn is_transpose(&self) -> bool {
        matches!(self, Stage::Transpose { .. })
    }

    /// `h`, `n`, `h′` of a local FFT stage on `rank`.
    pub fn loop_vars(&self, rank: usize) -> Option<LoopVars> {
        let Stage::LocalFft { axis, input, .. } = self else {
            return None;
        };
        let shape = input.local_shape(rank);
        Some(LoopVars {
            h: shape[..*axis].iter().product(),
            n: input.lengths()[*axis],
            h_prime: shape[axis + 1..].iter().product(),
        })
    }

    /// Lanes of one `n × h′` slab of a local FFT stage; the stage runs this
    /// batch `h` times at offsets `b·n·h′`.
    pub fn batch_spec(&self, rank: usize) -> Option<BatchSpec> {
        let v = self.loop_vars(rank)?;
        Some(BatchSpec {
            length: v.n,
            stride: v.h_prime.max(1),
            dist: 1,
            count: v.h_prime,
        })
    }
}

pub struct Plan<T> {
    direction: Direction,
    kind: TransformKind,
    decomposition: Decomposition,
    dims: GlobalDims,
    grid: ProcessGrid,
    stages: Vec<Stage>,
    input: Distribution,
    output: Distribution,
    options: PlanOptions,
    kernels: FftPlanner<T>,
    real: Option<Arc<RealFft<T>>>,
}

fn check_kind(kind: TransformKind, direction: Direction) -> Result<()> {
    match (kind, direction) {
        (TransformKind::R2C, Direction::Backward) | (TransformKind::C2R, Direction::Forward) => {
            Err(Error::InvalidKindDirection {
                kind: kind.to_string(),
                direction: direction.to_string(),
            })
        }
        _ => Ok(()),
    }
}

fn grid_mismatch(dims: &[usize], grid: &ProcessGrid, reason: &str) -> Error {
    Error::GridMismatch {
        dims: dims.to_vec(),
        grid: grid.shape().to_vec(),
        reason: reason.into(),
    }
}

/// Slab decomposition over `p` ranks along axis 0.
pub fn plan_slab<T: Scalar>(
    dims: &[usize],
    p: usize,
    kind: TransformKind,
    direction: Direction,
    options: PlanOptions,
) -> Result<Plan<T>> {
    Plan::new(Decomposition::Slab, dims, &ProcessGrid::new(vec![p])?, kind, direction, options)
}

/// Pencil decomposition of a 3-D tensor over a `P0 × P1` grid.
pub fn plan_pencil<T: Scalar>(
    dims: &[usize],
    grid: &ProcessGrid,
    kind: TransformKind,
    direction: Direction,
    options: PlanOptions,
) -> Result<Plan<T>> {
    Plan::new(Decomposition::Pencil, dims, grid, kind, direction, options)
}

/// `d`-axis grid decomposition of a `d+1`-axis tensor.
pub fn plan_general<T: Scalar>(
    dims: &[usize],
    grid: &ProcessGrid,
    kind: TransformKind,
    direction: Direction,
    options: PlanOptions,
) -> Result<Plan<T>> {
    Plan::new(Decomposition::General, dims, grid, kind, direction, options)
}

impl<T: Scalar> Plan<T> {
    pub fn new(
        decomposition: Decomposition,
        dims: &[usize],
        grid: &ProcessGrid,
        kind: TransformKind,
        direction: Direction,
        options: PlanOptions,
    ) -> Result<Self> {
        if dims.len() < 2 {
            return Err(Error::RankTooLow(dims.len()));
        }
        let gdims = GlobalDims::new(dims.to_vec())?;
        check_kind(kind, direction)?;
        let g = grid.ndims();
        match decomposition {
            Decomposition::Slab if g != 1 => {
                return Err(grid_mismatch(dims, grid, "slab needs a one-axis grid"))
            }
            Decomposition::Pencil if dims.len() != 3 || g != 2 => {
                return Err(grid_mismatch(dims, grid, "pencil needs a 3-axis tensor and a 2-axis grid"))
            }
            Decomposition::General if g + 1 != dims.len() => {
                return Err(grid_mismatch(dims, grid, "grid needs one axis fewer than the tensor"))
            }
            _ => {}
        }
        let spatial = spatial_layout(&gdims, grid, kind)?;
        let frequency = frequency_layout(&gdims, grid, kind)?;
        let (input, output) = match direction {
            Direction::Forward => (spatial, frequency),
            Direction::Backward => (frequency, spatial),
        };
        let stages = build_stages(&gdims, grid, &input, kind, direction, &options)?;
        let last_layout = stages.iter().rev().find_map(|s| match s {
            Stage::LocalFft { output, .. } => Some(output),
            _ => None,
        });
        debug_assert_eq!(last_layout, Some(&output));

        let kernels = FftPlanner::new();
        let mut real = None;
        for s in &stages {
            if let Stage::LocalFft {
                axis,
                kernel,
                direction,
                ..
            } = s
            {
                let n = dims[*axis];
                match kernel {
                    KernelKind::Complex => {
                        kernels.plan(n, *direction)?;
                    }
                    _ => real = Some(Arc::new(RealFft::new(n)?)),
                }
            }
        }
        Ok(Self {
            direction,
            kind,
            decomposition,
            dims: gdims,
            grid: grid.clone(),
            stages,
            input,
            output,
            options,
            kernels,
            real,
        })
    }

    pub fn direction(&self) -> Direction {
        self.direction
    }

    pub fn kind(&self) -> TransformKind {
        self.kind
    }

    pub fn decomposition(&self) -> Decomposition {
        self.decomposition
    }

    pub fn dims(&self) -> &GlobalDims {
        &self.dims
    }

    pub fn grid(&self) -> &ProcessGrid {
        &self.grid
    }

    pub fn stages(&self) -> &[Stage] {
        &self.stages
    }

    pub fn input_layout(&self) -> &Distribution {
        &self.input
    }

    pub fn output_layout(&self) -> &Distribution {
        &self.output
    }

    pub fn options(&self) -> &PlanOptions {
        &self.options
    }

    /// Runs every stage. Collective over `comms`; the input must be this
    /// rank's block in the plan's input layout.
    pub fn execute(
        &self,
        comms: &GridComms,
        input: DistTensor<T>,
        timing: &mut TimingBreakdown,
    ) -> Result<DistTensor<T>> {
        if input.distribution() != &self.input {
            return Err(Error::LayoutMismatch(
                "input is not in the plan's input layout".into(),
            ));
        }
        if input.rank() != comms.rank() || comms.grid() != &self.grid {
            return Err(Error::LayoutMismatch(format!(
                "block of rank {} executed on rank {} of grid {:?}",
                input.rank(),
                comms.rank(),
                comms.grid().shape()
            )));
        }
        if self.options.validate {
            if let Some(i) = input.data().all_finite() {
                return Err(Error::NonFinite(i));
            }
        }
        let world = comms.world();
        let wall = Instant::now();
        let t0 = world.now();
        let mut t = input;
        for stage in &self.stages {
            t = self.run_stage(stage, comms, t, timing)?;
        }
        timing.total += match world.cost_model() {
            Some(_) => world.now() - t0,
            None => wall.elapsed().as_secs_f64(),
        };
        Ok(t)
    }

    fn run_stage(
        &self,
        stage: &Stage,
        comms: &GridComms,
        t: DistTensor<T>,
        timing: &mut TimingBreakdown,
    ) -> Result<DistTensor<T>> {
        let rank = comms.rank();
        match stage {
            Stage::Transpose { to, mode, .. } => {
                let options = ExchangeOptions {
                    mode: *mode,
                    ..self.options.exchange
                };
                global_transpose(comms, t, to, &options, timing)
            }
            Stage::LocalFft {
                kernel,
                direction,
                output,
                ..
            } => {
                let v = stage.loop_vars(rank).unwrap();
                let (_, _, data) = t.into_parts();
                let lanes = v.h * v.h_prime;
                let data = metered(
                    comms.world(),
                    &mut timing.local_fft,
                    |c| fft_cost(c, v.n, lanes, *kernel != KernelKind::Complex),
                    || self.local_fft(*kernel, *direction, v, data),
                )?;
                DistTensor::new(output.clone(), rank, data)
            }
            Stage::Normalize { factor } => {
                let (dist, _, mut data) = t.into_parts();
                let f = T::from_f64_lossy(*factor);
                match &mut data {
                    LocalData::Real(v) => v.iter_mut().for_each(|x| *x *= f),
                    LocalData::Complex(v) => v.iter_mut().for_each(|x| *x = x.scale(f)),
                }
                DistTensor::new(dist, rank, data)
            }
            Stage::LocalTranspose {
                rows,
                cols,
                super_element,
            } => {
                let (dist, _, data) = t.into_parts();
                let data = match data {
                    LocalData::Complex(v) => {
                        LocalData::Complex(local_transpose(&v, *rows, *cols, *super_element)?)
                    }
                    LocalData::Real(v) => {
                        LocalData::Real(local_transpose(&v, *rows, *cols, *super_element)?)
                    }
                };
                DistTensor::new(dist, rank, data)
            }
        }
    }

    fn local_fft(
        &self,
        kernel: KernelKind,
        direction: Direction,
        v: LoopVars,
        data: LocalData<T>,
    ) -> Result<LocalData<T>> {
        match kernel {
            KernelKind::RealToComplex => {
                let plan = self.real.as_ref().unwrap();
                let input = data.into_real();
                let mut out = vec![Complex::new(T::zero(), T::zero()); v.h * plan.spectrum_len()];
                rfft_lanes(plan, &input, &mut out)?;
                Ok(LocalData::Complex(out))
            }
            KernelKind::ComplexToReal => {
                let plan = self.real.as_ref().unwrap();
                let LocalData::Complex(input) = data else {
                    return Err(Error::LayoutMismatch("inverse real stage needs complex data".into()));
                };
                let mut out = vec![T::zero(); v.h * plan.len()];
                irfft_lanes(plan, &input, &mut out)?;
                Ok(LocalData::Real(out))
            }
            KernelKind::Complex => {
                let fft = self.kernels.plan(v.n, direction)?;
                let mut buf = data.into_complex();
                if v.h * v.h_prime > 0 {
                    run_lanes(&fft, &mut buf, v, self.options.lanes)?;
                }
                Ok(LocalData::Complex(buf))
            }
        }
    }
}

fn run_lanes<T: Scalar>(fft: &Fft1d<T>, buf: &mut [Complex<T>], v: LoopVars, lanes: LaneStrategy) -> Result<()> {
    let LoopVars { h, n, h_prime } = v;
    if h_prime == 1 {
        return fft_batched_with(fft, buf, BatchSpec::contiguous(n, h));
    }
    let slab = n * h_prime;
    for block in buf.chunks_exact_mut(slab) {
        match lanes {
            LaneStrategy::Strided => fft_batched_with(
                fft,
                block,
                BatchSpec {
                    length: n,
                    stride: h_prime,
                    dist: 1,
                    count: h_prime,
                },
            )?,
            LaneStrategy::Contiguous => {
                let mut t = local_transpose(block, n, h_prime, 1)?;
                fft_batched_with(fft, &mut t, BatchSpec::contiguous(n, h_prime))?;
                block.copy_from_slice(&local_transpose(&t, h_prime, n, 1)?);
            }
        }
    }
    Ok(())
}

/// Modelled seconds for `lanes` transforms of length `n`: `5·n·log2 n`
/// flops per complex lane, half that per real lane.
fn fft_cost(c: &CostModel, n: usize, lanes: usize, real: bool) -> f64 {
    let per_lane = 5.0 * n as f64 * (n as f64).log2();
    let per_lane = if real { per_lane / 2.0 } else { per_lane };
    per_lane * lanes as f64 * c.flop_time
}

fn build_stages(
    dims: &GlobalDims,
    grid: &ProcessGrid,
    input: &Distribution,
    kind: TransformKind,
    direction: Direction,
    options: &PlanOptions,
) -> Result<Vec<Stage>> {
    let d = dims.rank();
    let order: Vec<usize> = match direction {
        Direction::Forward => (0..d).rev().collect(),
        Direction::Backward => (0..d).collect(),
    };
    let mut stages = Vec::with_capacity(2 * d + 1);
    let mut cur = input.clone();
    for axis in order {
        let target = Distribution::staged(
            grid,
            cur.lengths().to_vec(),
            axis,
            cur.hatted().to_vec(),
            cur.element(),
        )?;
        if target != cur {
            let grid_axis = (0..grid.ndims())
                .find(|&g| cur.axis_of_grid(g) != target.axis_of_grid(g))
                .unwrap();
            stages.push(Stage::Transpose {
                from: cur.clone(),
                to: target.clone(),
                grid_axis,
                mode: options.exchange.mode,
            });
        }
        let mut lengths = target.lengths().to_vec();
        let mut hatted = target.hatted().to_vec();
        let (kernel, element) = match (direction, target.element()) {
            (Direction::Forward, ElementKind::Real) => {
                lengths[axis] = dims[axis] / 2 + 1;
                (KernelKind::RealToComplex, ElementKind::Complex)
            }
            (Direction::Backward, _) if kind == TransformKind::C2R && axis == d - 1 => {
                lengths[axis] = dims[axis];
                (KernelKind::ComplexToReal, ElementKind::Real)
            }
            _ => (KernelKind::Complex, ElementKind::Complex),
        };
        hatted[axis] = direction == Direction::Forward;
        let output = Distribution::staged(grid, lengths, axis, hatted, element)?;
        stages.push(Stage::LocalFft {
            axis,
            kernel,
            direction,
            input: target,
            output: output.clone(),
        });
        cur = output;
    }
    if direction == Direction::Backward && options.normalize {
        stages.push(Stage::Normalize {
            factor: 1.0 / dims.total() as f64,
        });
    }
    Ok(stages)
}

/// Forward real transform followed by its inverse; the result should equal
/// the input.
pub fn execute_r2c_c2r_roundtrip<T: Scalar>(
    forward: &Plan<T>,
    backward: &Plan<T>,
    comms: &GridComms,
    input: DistTensor<T>,
    timing: &mut TimingBreakdown,
) -> Result<DistTensor<T>> {
    if forward.kind != TransformKind::R2C || backward.kind != TransformKind::C2R {
        return Err(Error::InvalidKindDirection {
            kind: format!("{}/{}", forward.kind, backward.kind),
            direction: "forward/backward".into(),
        });
    }
    if forward.dims != backward.dims || forward.grid != backward.grid {
        return Err(Error::LayoutMismatch("plans differ in dims or grid".into()));
    }
    let spectrum = forward.execute(comms, input, timing)?;
    backward.execute(comms, spectrum, timing)
}

/// Runs `plan` on an in-process world, each rank starting from its block
/// of `input`, and reassembles the result. Returns the field-wise maximum of
/// the per-rank timings.
pub fn run_global<T: Scalar>(
    plan: &Plan<T>,
    world: &WorldOptions,
    input: &GlobalTensor<T>,
) -> Result<(GlobalTensor<T>, TimingBreakdown)> {
    let results = spawn_world_with(plan.grid.size(), world, |comm| {
        let comms = GridComms::new(comm, &plan.grid)?;
        let block = DistTensor::from_global(input, plan.input.clone(), comms.rank())?;
        let mut timing = TimingBreakdown::default();
        let out = plan.execute(&comms, block, &mut timing)?;
        Ok((out, timing))
    })?;
    let timing = results
        .iter()
        .fold(TimingBreakdown::default(), |acc, (_, t)| acc.max(t));
    let blocks: Vec<_> = results.into_iter().map(|(b, _)| b).collect();
    Ok((GlobalTensor::assemble(&blocks)?, timing))
}

#[cfg(test)]
mod tests;
