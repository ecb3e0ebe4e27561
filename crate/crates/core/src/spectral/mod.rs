//! Spectral differential operators on distributed tensors.
//!
//! Wavenumbers use the signed convention: index `j` of an axis of length `N`
//! maps to `j` when `2j < N` and to `j − N` otherwise, so the Nyquist index
//! of an even axis maps to `−N/2`. The half-spectrum axis of a real
//! transform keeps `0..=N/2`. Physical wavenumbers are scaled by `2π/L`,
//! with `L = 2π` unless configured.
//!
//! First derivatives zero the Nyquist bin of the differentiated axis;
//! `|k|²` keeps it.

use std::f64::consts::PI;

use num_complex::Complex;

use crate::layout::{Distribution, ElementKind, ProcessGrid};
use crate::plan::{Decomposition, Plan, PlanOptions, TransformKind};
use crate::tensor::{DistTensor, LocalData};
use crate::timing::TimingBreakdown;
use crate::transport::GridComms;
use crate::{Direction, Error, Result, Scalar};

/// Wavenumbers of the frequency coordinates owned by one rank.
#[derive(Debug, Clone, PartialEq)]
pub struct WavenumberMap {
    /// Per axis, the signed integer index of every owned position.
    pub indices: Vec<Vec<i64>>,
    /// Per axis, the physical wavenumber `2π·index/L` of every owned position.
    pub k: Vec<Vec<f64>>,
    /// Per axis, whether the owned position is the Nyquist bin.
    pub nyquist: Vec<Vec<bool>>,
}

impl WavenumberMap {
    pub fn local_shape(&self) -> Vec<usize> {
        self.k.iter().map(Vec::len).collect()
    }
}

fn signed_index(j: usize, n: usize, half: bool) -> i64 {
    if half || 2 * j < n {
        j as i64
    } else {
        j as i64 - n as i64
    }
}

/// Wavenumbers for `rank`'s block of a frequency layout produced by a
/// transform of `kind`. `spatial` is the untransformed shape and `domain`
/// the physical length of every axis.
pub fn wavenumbers(
    dist: &Distribution,
    rank: usize,
    kind: TransformKind,
    spatial: &[usize],
    domain: &[f64],
) -> Result<WavenumberMap> {
    if !dist.is_frequency() || dist.element() != ElementKind::Complex {
        return Err(Error::NotFrequencyLayout);
    }
    let d = dist.lengths().len();
    if spatial.len() != d || domain.len() != d {
        return Err(Error::DimMismatch(format!(
            "{} spatial dims and {} domain lengths for a {d}-axis layout",
            spatial.len(),
            domain.len()
        )));
    }
    let mut map = WavenumberMap {
        indices: Vec::with_capacity(d),
        k: Vec::with_capacity(d),
        nyquist: Vec::with_capacity(d),
    };
    for (a, (off, len)) in dist.extents(rank).into_iter().enumerate() {
        let n = spatial[a];
        let half = a == d - 1 && kind != TransformKind::C2C;
        let idx: Vec<i64> = (off..off + len).map(|j| signed_index(j, n, half)).collect();
        map.k.push(idx.iter().map(|&i| 2.0 * PI * i as f64 / domain[a]).collect());
        map.nyquist.push(idx.iter().map(|&i| n.is_multiple_of(2) && i.unsigned_abs() as usize == n / 2).collect());
        map.indices.push(idx);
    }
    Ok(map)
}

/// Forward and backward plans plus domain geometry for one grid.
pub struct SpectralOps<T> {
    forward: Plan<T>,
    backward: Plan<T>,
    domain: Vec<f64>,
}

impl<T: Scalar> SpectralOps<T> {
    /// `real` selects real-to-complex transforms and real fields.
    pub fn new(
        decomposition: Decomposition,
        dims: &[usize],
        grid: &ProcessGrid,
        real: bool,
        options: PlanOptions,
    ) -> Result<Self> {
        let (fk, bk) = if real {
            (TransformKind::R2C, TransformKind::C2R)
        } else {
            (TransformKind::C2C, TransformKind::C2C)
        };
        let options = PlanOptions {
            normalize: true,
            ..options
        };
        Ok(Self {
            forward: Plan::new(decomposition, dims, grid, fk, Direction::Forward, options)?,
            backward: Plan::new(decomposition, dims, grid, bk, Direction::Backward, options)?,
            domain: vec![2.0 * PI; dims.len()],
        })
    }

    /// Physical domain length per axis.
    pub fn with_domain(mut self, domain: Vec<f64>) -> Result<Self> {
        if domain.len() != self.domain.len() || domain.iter().any(|l| !(l.is_finite() && *l > 0.0)) {
            return Err(Error::Config(format!("invalid domain lengths {domain:?}")));
        }
        self.domain = domain;
        Ok(self)
    }

    pub fn forward_plan(&self) -> &Plan<T> {
        &self.forward
    }

    pub fn backward_plan(&self) -> &Plan<T> {
        &self.backward
    }

    /// Layout of the fields the operators accept and return.
    pub fn field_layout(&self) -> &Distribution {
        self.forward.input_layout()
    }

    pub fn wavenumbers(&self, rank: usize) -> Result<WavenumberMap> {
        wavenumbers(
            self.forward.output_layout(),
            rank,
            self.forward.kind(),
            self.forward.dims().as_slice(),
            &self.domain,
        )
    }

    fn field_to_spectrum(&self, comms: &GridComms, x: &DistTensor<T>) -> Result<DistTensor<T>> {
        self.forward.execute(comms, x.clone(), &mut TimingBreakdown::default())
    }

    fn spectrum_to_field(&self, comms: &GridComms, s: DistTensor<T>) -> Result<DistTensor<T>> {
        self.backward.execute(comms, s, &mut TimingBreakdown::default())
    }

    /// Multiplies every owned bin by `f(k, nyquist)` where `k` and `nyquist`
    /// hold the per-axis wavenumber and Nyquist flag of the bin.
    fn apply(
        &self,
        spectrum: &mut DistTensor<T>,
        map: &WavenumberMap,
        f: impl Fn(&[f64], &[bool]) -> Complex<f64>,
    ) {
        let shape = map.local_shape();
        let d = shape.len();
        let LocalData::Complex(v) = spectrum.data_mut() else {
            unreachable!("spectra are complex")
        };
        let mut idx = vec![0usize; d];
        let mut k = vec![0.0; d];
        let mut nyq = vec![false; d];
        for value in v.iter_mut() {
            for a in 0..d {
                k[a] = map.k[a][idx[a]];
                nyq[a] = map.nyquist[a][idx[a]];
            }
            let m = f(&k, &nyq);
            let m = Complex::new(T::from_f64_lossy(m.re), T::from_f64_lossy(m.im));
            *value *= m;
            for a in (0..d).rev() {
                idx[a] += 1;
                if idx[a] < shape[a] {
                    break;
                }
                idx[a] = 0;
            }
        }
    }

    fn check_field(&self, x: &DistTensor<T>) -> Result<()> {
        if x.distribution() != self.field_layout() {
            return Err(Error::LayoutMismatch("field is not in the spatial layout".into()));
        }
        Ok(())
    }

    /// `∂x/∂x_j` for every axis `j`.
    pub fn gradient(&self, comms: &GridComms, x: &DistTensor<T>) -> Result<Vec<DistTensor<T>>> {
        self.check_field(x)?;
        let spectrum = self.field_to_spectrum(comms, x)?;
        let map = self.wavenumbers(comms.rank())?;
        (0..map.k.len())
            .map(|j| {
                let mut s = spectrum.clone();
                self.apply(&mut s, &map, |k, nyq| {
                    if nyq[j] {
                        Complex::new(0.0, 0.0)
                    } else {
                        Complex::new(0.0, k[j])
                    }
                });
                self.spectrum_to_field(comms, s)
            })
            .collect()
    }

    /// `Σ_j ∂u_j/∂x_j` of a vector field with one component per axis.
    pub fn divergence(&self, comms: &GridComms, u: &[DistTensor<T>]) -> Result<DistTensor<T>> {
        let d = self.domain.len();
        if u.len() != d {
            return Err(Error::DimMismatch(format!("{} components for {d} axes", u.len())));
        }
        let map = self.wavenumbers(comms.rank())?;
        let mut sum: Option<DistTensor<T>> = None;
        for (j, uj) in u.iter().enumerate() {
            self.check_field(uj)?;
            let mut s = self.field_to_spectrum(comms, uj)?;
            self.apply(&mut s, &map, |k, nyq| {
                if nyq[j] {
                    Complex::new(0.0, 0.0)
                } else {
                    Complex::new(0.0, k[j])
                }
            });
            sum = Some(match sum {
                None => s,
                Some(mut acc) => {
                    if let (LocalData::Complex(a), LocalData::Complex(b)) = (acc.data_mut(), s.data()) {
                        a.iter_mut().zip(b).for_each(|(x, y)| *x += *y);
                    }
                    acc
                }
            });
        }
        self.spectrum_to_field(comms, sum.unwrap())
    }

    /// `∇²x`, multiplying each mode by `−|k|²`.
    pub fn laplacian(&self, comms: &GridComms, x: &DistTensor<T>) -> Result<DistTensor<T>> {
        self.check_field(x)?;
        let mut s = self.field_to_spectrum(comms, x)?;
        let map = self.wavenumbers(comms.rank())?;
        self.apply(&mut s, &map, |k, _| {
            Complex::new(-k.iter().map(|v| v * v).sum::<f64>(), 0.0)
        });
        self.spectrum_to_field(comms, s)
    }

    /// Solves `∇²y = x` for zero-mean `x`; the mean of `y` is zero.
    pub fn inverse_laplacian(&self, comms: &GridComms, x: &DistTensor<T>) -> Result<DistTensor<T>> {
        self.check_field(x)?;
        let world = comms.world();
        let largest = x
            .data()
            .to_complex_f64()
            .iter()
            .map(|v| v.norm())
            .fold(0.0, f64::max);
        let largest = world.allreduce_max(largest)?;
        let mut s = self.field_to_spectrum(comms, x)?;
        let origin = vec![0; self.domain.len()];
        let dc = s.get(&origin).map_or(0.0, |v| {
            Complex::new(v.re.to_f64_lossless(), v.im.to_f64_lossless()).norm()
        });
        let mean = world.allreduce_max(dc)? / self.forward.dims().total() as f64;
        if mean > 1e-12 * largest.max(1.0) {
            return Err(Error::NonZeroMean { mean });
        }
        let map = self.wavenumbers(comms.rank())?;
        self.apply(&mut s, &map, |k, _| {
            let k2: f64 = k.iter().map(|v| v * v).sum();
            if k2 == 0.0 {
                Complex::new(0.0, 0.0)
            } else {
                Complex::new(-1.0 / k2, 0.0)
            }
        });
        self.spectrum_to_field(comms, s)
    }
}
