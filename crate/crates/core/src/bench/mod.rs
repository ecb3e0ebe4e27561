//! Complexity models and the benchmark runner.

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::transport::CostModel;
use crate::{Direction, Error, Result};

mod io;
mod run;

pub use io::{decode_tensor, encode_tensor, read_distributed, read_tensor, write_distributed, write_tensor};
pub use run::{
    run, run_on, Backend, GridSpec, Precision, Report, ReportConfig, RunConfig, Verification, VerifyMode,
    VerifyStatus, REPORT_SCHEMA_VERSION,
};

/// `‖a − b‖₂ / ‖b‖₂`, or the absolute norm when `b` is zero. Infinite when
/// the lengths differ.
pub fn relative_error(a: &[Complex<f64>], b: &[Complex<f64>]) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum();
    let norm: f64 = b.iter().map(|y| y.norm_sqr()).sum();
    if norm == 0.0 {
        diff.sqrt()
    } else {
        (diff / norm).sqrt()
    }
}

/// `5·N·log2(N)` with `N` the product of `dims`.
pub fn flops_estimate(dims: &[usize]) -> f64 {
    let n: f64 = dims.iter().map(|&d| d as f64).product();
    if n <= 1.0 {
        0.0
    } else {
        5.0 * n * n.log2()
    }
}

/// [`flops_estimate`] in integer arithmetic; `None` unless `N` is a power of
/// two.
pub fn flops_estimate_exact(dims: &[usize]) -> Option<u128> {
    let n = dims.iter().try_fold(1u128, |acc, &d| acc.checked_mul(d as u128))?;
    if !n.is_power_of_two() {
        return None;
    }
    Some(5 * n * u128::from(n.trailing_zeros()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Topology {
    Hypercube,
    Torus3d,
}

/// `T = c1·N·log2(N)/P + c2·N/σ(P)` where `σ(P)` is `P` on a hypercube and
/// `P^(2/3)` on a 3-D torus.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComplexityModel {
    pub topology: Topology,
    /// Seconds per `N·log2(N)` unit of local work.
    pub c1: f64,
    /// Seconds per element moved across the bisection.
    pub c2: f64,
}

impl ComplexityModel {
    pub fn new(topology: Topology, c1: f64, c2: f64) -> Result<Self> {
        if !(c1 > 0.0 && c2 > 0.0 && c1.is_finite() && c2.is_finite()) {
            return Err(Error::Config(format!("model constants must be > 0 (c1 = {c1}, c2 = {c2})")));
        }
        Ok(Self { topology, c1, c2 })
    }

    /// Constants implied by a cost model for complex elements of
    /// `element_bytes` bytes.
    pub fn from_cost_model(topology: Topology, cost: &CostModel, element_bytes: usize) -> Result<Self> {
        Self::new(topology, 5.0 * cost.flop_time, element_bytes as f64 * cost.inv_bandwidth)
    }

    /// Computation and communication terms separately.
    pub fn terms(&self, dims: &[usize], p: usize) -> (f64, f64) {
        let n: f64 = dims.iter().map(|&d| d as f64).product();
        let p = p as f64;
        let compute = self.c1 * n * n.log2() / p;
        let bisection = match self.topology {
            Topology::Hypercube => p,
            Topology::Torus3d => p.cbrt() * p.cbrt(),
        };
        (compute, self.c2 * n / bisection)
    }
}

pub fn predict_tfft(dims: &[usize], p: usize, model: &ComplexityModel) -> f64 {
    let (compute, comm) = model.terms(dims, p);
    compute + comm
}

/// Unnormalized DFT by direct summation along one axis at a time.
/// Independent of the library kernels; `O(N·Σn)`.
pub fn reference_dft(data: &[Complex<f64>], dims: &[usize], direction: Direction) -> Vec<Complex<f64>> {
    let total: usize = dims.iter().product();
    assert_eq!(data.len(), total, "reference_dft: data does not match dims");
    let mut cur = data.to_vec();
    let mut next = vec![Complex::new(0.0, 0.0); total];
    for a in 0..dims.len() {
        let n = dims[a];
        let inner: usize = dims[a + 1..].iter().product();
        let outer = total / (n * inner);
        let roots: Vec<Complex<f64>> = (0..n)
            .map(|j| Complex::from_polar(1.0, direction.sign() * 2.0 * std::f64::consts::PI * j as f64 / n as f64))
            .collect();
        for o in 0..outer {
            for i in 0..inner {
                let base = o * n * inner + i;
                for k in 0..n {
                    let mut acc = Complex::new(0.0, 0.0);
                    for j in 0..n {
                        acc += cur[base + j * inner] * roots[(j * k) % n];
                    }
                    next[base + k * inner] = acc;
                }
            }
        }
        std::mem::swap(&mut cur, &mut next);
    }
    cur
}

/// Keeps the first `⌊n/2⌋+1` bins of the last axis.
pub fn truncate_last_axis(full: &[Complex<f64>], dims: &[usize]) -> Vec<Complex<f64>> {
    let n = *dims.last().unwrap();
    let h = n / 2 + 1;
    full.chunks(n).flat_map(|row| row[..h].iter().copied()).collect()
}
