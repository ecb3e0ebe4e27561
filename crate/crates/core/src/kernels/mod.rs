//! Sequential FFT kernels.
//!
//! All kernels are unnormalized in both directions: `Forward` computes
//! `X_k = Σ_j x_j e^{-2πi jk/n}` and `Backward` the same sum with `+i`.
//! Scaling by `1/N` is applied once by the distributed plan.
//!
//! Algorithm selection per length:
//! * powers of two: iterative radix-2,
//! * composites whose largest prime factor is at most [`MAX_MIXED_RADIX`]:
//!   recursive mixed radix,
//! * anything else: Bluestein's chirp-z over a power-of-two convolution.

mod batch;
mod bluestein;
mod mixed;
mod oracle;
mod radix2;
mod real;

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::{Error, Result, Scalar};

pub use batch::{fft_batched, fft_batched_with, BatchSpec};
pub use oracle::{dft_oracle, ORACLE_LIMIT};
pub use real::{irfft_1d, irfft_lanes, rfft_1d, rfft_lanes, RealFft};

/// Largest prime handled by the mixed-radix path.
pub const MAX_MIXED_RADIX: usize = 13;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Forward,
    Backward,
}

impl Direction {
    /// Sign of the exponent: -1 forward, +1 backward.
    pub fn sign(self) -> f64 {
        match self {
            Direction::Forward => -1.0,
            Direction::Backward => 1.0,
        }
    }

    pub fn inverse(self) -> Self {
        match self {
            Direction::Forward => Direction::Backward,
            Direction::Backward => Direction::Forward,
        }
    }
}

impl std::fmt::Display for Direction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Direction::Forward => f.write_str("forward"),
            Direction::Backward => f.write_str("backward"),
        }
    }
}

/// Which code path a length resolves to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelPath {
    Trivial,
    Radix2,
    MixedRadix,
    Bluestein,
}

impl KernelPath {
    pub fn for_len(n: usize) -> KernelPath {
        if n == 1 {
            KernelPath::Trivial
        } else if n.is_power_of_two() {
            KernelPath::Radix2
        } else if prime_factors(n).last().copied().unwrap_or(1) <= MAX_MIXED_RADIX {
            KernelPath::MixedRadix
        } else {
            KernelPath::Bluestein
        }
    }
}

pub(crate) fn prime_factors(mut n: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut p = 2;
    while p * p <= n {
        while n.is_multiple_of(p) {
            out.push(p);
            n /= p;
        }
        p += 1;
    }
    if n > 1 {
        out.push(n);
    }
    out
}

/// `e^{sign·2πi·num/den}` evaluated in double precision.
pub(crate) fn unit_root(sign: f64, num: usize, den: usize) -> Complex<f64> {
    let angle = sign * 2.0 * std::f64::consts::PI * (num % den) as f64 / den as f64;
    Complex::new(angle.cos(), angle.sin())
}

pub(crate) fn cast<T: Scalar>(c: Complex<f64>) -> Complex<T> {
    Complex::new(T::from_f64_lossy(c.re), T::from_f64_lossy(c.im))
}

enum Algorithm<T> {
    Trivial,
    Radix2(radix2::Radix2<T>),
    Mixed(mixed::MixedRadix<T>),
    Bluestein(bluestein::Bluestein<T>),
}

/// A complex transform of fixed length and direction with its twiddles
/// precomputed. Immutable once built; share it behind an `Arc`.
pub struct Fft1d<T> {
    len: usize,
    direction: Direction,
    algo: Algorithm<T>,
}

impl<T: Scalar> Fft1d<T> {
    pub fn new(len: usize, direction: Direction) -> Result<Self> {
        if len == 0 {
            return Err(Error::ZeroLength);
        }
        let algo = match KernelPath::for_len(len) {
            KernelPath::Trivial => Algorithm::Trivial,
            KernelPath::Radix2 => Algorithm::Radix2(radix2::Radix2::new(len, direction)),
            KernelPath::MixedRadix => Algorithm::Mixed(mixed::MixedRadix::new(len, direction)),
            KernelPath::Bluestein => {
                Algorithm::Bluestein(bluestein::Bluestein::new(len, direction))
            }
        };
        Ok(Self {
            len,
            direction,
            algo,
        })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn direction(&self) -> Direction {
        self.direction
    }

    pub fn path(&self) -> KernelPath {
        match self.algo {
            Algorithm::Trivial => KernelPath::Trivial,
            Algorithm::Radix2(_) => KernelPath::Radix2,
            Algorithm::Mixed(_) => KernelPath::MixedRadix,
            Algorithm::Bluestein(_) => KernelPath::Bluestein,
        }
    }

    /// Scratch elements required by [`Fft1d::process_with_scratch`].
    pub fn scratch_len(&self) -> usize {
        match &self.algo {
            Algorithm::Trivial | Algorithm::Radix2(_) => 0,
            Algorithm::Mixed(_) => self.len,
            Algorithm::Bluestein(b) => b.scratch_len(),
        }
    }

    /// In-place transform of `buf`, which must hold exactly `len` values.
    pub fn process(&self, buf: &mut [Complex<T>]) {
        let mut scratch = vec![Complex::new(T::zero(), T::zero()); self.scratch_len()];
        self.process_with_scratch(buf, &mut scratch);
    }

    pub fn process_with_scratch(&self, buf: &mut [Complex<T>], scratch: &mut [Complex<T>]) {
        assert_eq!(buf.len(), self.len, "buffer length does not match plan");
        match &self.algo {
            Algorithm::Trivial => {}
            Algorithm::Radix2(r) => r.process(buf),
            Algorithm::Mixed(m) => m.process(buf, &mut scratch[..self.len]),
            Algorithm::Bluestein(b) => b.process(buf, scratch),
        }
    }
}

type PlanCache<T> = HashMap<(usize, Direction), Arc<Fft1d<T>>>;

/// Cache of [`Fft1d`] instances keyed by `(length, direction)`.
///
/// Twiddles for a given key are computed exactly once; later lookups hand out
/// the same `Arc`.
pub struct FftPlanner<T> {
    cache: Mutex<PlanCache<T>>,
}

impl<T: Scalar> Default for FftPlanner<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> FftPlanner<T> {
    pub fn new() -> Self {
        Self {
            cache: Mutex::new(HashMap::new()),
        }
    }

    pub fn plan(&self, len: usize, direction: Direction) -> Result<Arc<Fft1d<T>>> {
        let mut cache = self.cache.lock().unwrap();
        if let Some(fft) = cache.get(&(len, direction)) {
            return Ok(Arc::clone(fft));
        }
        let fft = Arc::new(Fft1d::new(len, direction)?);
        cache.insert((len, direction), Arc::clone(&fft));
        Ok(fft)
    }

    pub fn cached_len(&self) -> usize {
        self.cache.lock().unwrap().len()
    }
}

/// One-shot unnormalized transform of `data`.
pub fn fft_1d<T: Scalar>(data: &[Complex<T>], direction: Direction) -> Result<Vec<Complex<T>>> {
    let fft = Fft1d::new(data.len(), direction)?;
    let mut out = data.to_vec();
    fft.process(&mut out);
    Ok(out)
}
