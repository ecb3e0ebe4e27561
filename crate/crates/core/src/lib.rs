//! Distributed-memory multidimensional FFTs.
//!
//! The crate is organised bottom-up:
//!
//! * [`kernels`]: sequential 1-D transforms for any length, real-input
//!   variants and batched strided execution.
//! * [`layout`]: process grids and per-rank block ownership.
//! * [`transport`]: a small message-passing contract with an in-process
//!   harness (optionally driven by a latency/bandwidth cost model) and a TCP
//!   backend.
//! * [`exchange`]: pack / all-to-all / unpack global transposes and the
//!   chunked exchange that overlaps staging copies with the wire.
//! * [`plan`]: slab, pencil and general decompositions.
//! * [`spectral`]: wavenumbers and differential operators.
//! * [`bench`]: complexity models and the benchmark runner.

pub mod bench;
pub mod error;
pub mod exchange;
pub mod kernels;
pub mod layout;
pub mod plan;
pub mod scalar;
pub mod spectral;
pub mod tensor;
pub mod timing;
pub mod transport;

pub use error::{Error, Result};
pub use kernels::{Direction, FftPlanner};
pub use layout::{Distribution, GlobalDims, ProcessGrid};
pub use num_complex::Complex;
pub use plan::{Decomposition, ExchangeMode, Plan, PlanOptions, TransformKind};
pub use scalar::Scalar;
pub use tensor::{DistTensor, GlobalTensor, LocalData};
pub use timing::TimingBreakdown;
pub use transport::{spawn_world, Communicator, CostModel, GridComms, WorldOptions};
