//! Inputs shared by the criterion benchmarks.

use dfft_core::layout::ElementKind;
use dfft_core::plan::run_global;
use dfft_core::{Complex, Decomposition, Direction, GlobalTensor, Plan, PlanOptions, ProcessGrid, TransformKind, WorldOptions};

/// Deterministic complex samples in `[-1, 1)`.
pub fn complex_signal(n: usize, seed: u64) -> Vec<Complex<f64>> {
    GlobalTensor::<f64>::random(vec![1, n], ElementKind::Complex, seed)
        .into_data()
        .into_complex()
}

/// Deterministic real samples in `[-1, 1)`.
pub fn real_signal(n: usize, seed: u64) -> Vec<f64> {
    GlobalTensor::<f64>::random(vec![1, n], ElementKind::Real, seed)
        .into_data()
        .into_real()
}

pub fn global_input(dims: &[usize], kind: TransformKind, seed: u64) -> GlobalTensor<f64> {
    let element = match kind {
        TransformKind::C2C => ElementKind::Complex,
        _ => ElementKind::Real,
    };
    GlobalTensor::random(dims.to_vec(), element, seed)
}

/// Forward plan for `dims` on `grid`.
pub fn forward_plan(
    decomposition: Decomposition,
    dims: &[usize],
    grid: &[usize],
    kind: TransformKind,
    options: PlanOptions,
) -> Plan<f64> {
    let grid = ProcessGrid::new(grid.to_vec()).expect("valid grid");
    Plan::new(decomposition, dims, &grid, kind, Direction::Forward, options).expect("valid plan")
}

/// One in-process execution of `plan`; returns the gathered output.
pub fn execute_once(plan: &Plan<f64>, world: &WorldOptions, input: &GlobalTensor<f64>) -> GlobalTensor<f64> {
    run_global(plan, world, input).expect("plan executes").0
}
