//! Distributed and global tensors.

use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::layout::{Distribution, ElementKind};
use crate::scalar::{decode_complex, encode_complex};
use crate::transport::Communicator;
use crate::{Error, Result, Scalar};

/// Sample storage, real or complex, row-major with the last axis fastest.
#[derive(Debug, Clone, PartialEq)]
pub enum LocalData<T> {
    Real(Vec<T>),
    Complex(Vec<Complex<T>>),
}

impl<T: Scalar> LocalData<T> {
    pub fn zeros(kind: ElementKind, len: usize) -> Self {
        match kind {
            ElementKind::Real => LocalData::Real(vec![T::zero(); len]),
            ElementKind::Complex => LocalData::Complex(vec![Complex::new(T::zero(), T::zero()); len]),
        }
    }

    pub fn len(&self) -> usize {
        match self {
            LocalData::Real(v) => v.len(),
            LocalData::Complex(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn element(&self) -> ElementKind {
        match self {
            LocalData::Real(_) => ElementKind::Real,
            LocalData::Complex(_) => ElementKind::Complex,
        }
    }

    pub fn as_real(&self) -> Option<&[T]> {
        match self {
            LocalData::Real(v) => Some(v),
            LocalData::Complex(_) => None,
        }
    }

    pub fn as_complex(&self) -> Option<&[Complex<T>]> {
        match self {
            LocalData::Complex(v) => Some(v),
            LocalData::Real(_) => None,
        }
    }

    /// Real samples are promoted with zero imaginary part.
    pub fn into_complex(self) -> Vec<Complex<T>> {
        match self {
            LocalData::Complex(v) => v,
            LocalData::Real(v) => v.into_iter().map(|x| Complex::new(x, T::zero())).collect(),
        }
    }

    /// Real parts of complex data; real data is returned unchanged.
    pub fn into_real(self) -> Vec<T> {
        match self {
            LocalData::Real(v) => v,
            LocalData::Complex(v) => v.into_iter().map(|c| c.re).collect(),
        }
    }

    /// Every sample widened to complex `f64`.
    pub fn to_complex_f64(&self) -> Vec<Complex<f64>> {
        match self {
            LocalData::Real(v) => v.iter().map(|x| Complex::new(x.to_f64_lossless(), 0.0)).collect(),
            LocalData::Complex(v) => v
                .iter()
                .map(|c| Complex::new(c.re.to_f64_lossless(), c.im.to_f64_lossless()))
                .collect(),
        }
    }

    pub fn all_finite(&self) -> Option<usize> {
        match self {
            LocalData::Real(v) => v.iter().position(|x| !x.is_finite()),
            LocalData::Complex(v) => v.iter().position(|c| !c.re.is_finite() || !c.im.is_finite()),
        }
    }

    pub(crate) fn to_bytes(&self) -> Vec<u8> {
        match self {
            LocalData::Complex(v) => encode_complex(v),
            LocalData::Real(v) => {
                let mut out = Vec::with_capacity(v.len() * T::BYTES);
                for x in v {
                    x.write_le(&mut out);
                }
                out
            }
        }
    }

    pub(crate) fn from_bytes(kind: ElementKind, bytes: &[u8]) -> Result<Self> {
        match kind {
            ElementKind::Complex => {
                let mut v = Vec::with_capacity(bytes.len() / (2 * T::BYTES));
                decode_complex(bytes, &mut v)?;
                Ok(LocalData::Complex(v))
            }
            ElementKind::Real => {
                if !bytes.len().is_multiple_of(T::BYTES) {
                    return Err(Error::CountMismatch(format!(
                        "{} bytes is not a whole number of {} samples",
                        bytes.len(),
                        T::NAME
                    )));
                }
                Ok(LocalData::Real(bytes.chunks_exact(T::BYTES).map(T::read_le).collect()))
            }
        }
    }

    fn gather_runs(&self, runs: &[(usize, usize, usize)], len: usize) -> Self {
        match self {
            LocalData::Real(v) => {
                let mut out = Vec::with_capacity(len);
                for &(src, _, n) in runs {
                    out.extend_from_slice(&v[src..src + n]);
                }
                LocalData::Real(out)
            }
            LocalData::Complex(v) => {
                let mut out = Vec::with_capacity(len);
                for &(src, _, n) in runs {
                    out.extend_from_slice(&v[src..src + n]);
                }
                LocalData::Complex(out)
            }
        }
    }

    fn scatter_runs(&mut self, block: &Self, runs: &[(usize, usize, usize)]) -> Result<()> {
        match (self, block) {
            (LocalData::Real(dst), LocalData::Real(src)) => {
                for &(g, l, n) in runs {
                    dst[g..g + n].copy_from_slice(&src[l..l + n]);
                }
            }
            (LocalData::Complex(dst), LocalData::Complex(src)) => {
                for &(g, l, n) in runs {
                    dst[g..g + n].copy_from_slice(&src[l..l + n]);
                }
            }
            _ => return Err(Error::LayoutMismatch("element kinds differ".into())),
        }
        Ok(())
    }
}

/// Contiguous last-axis runs of a block: `(global offset, local offset,
/// length)` in local storage order.
fn block_runs(dims: &[usize], extents: &[(usize, usize)]) -> Vec<(usize, usize, usize)> {
    let d = dims.len();
    let count: usize = extents.iter().map(|e| e.1).product();
    let run = extents[d - 1].1;
    if count == 0 {
        return Vec::new();
    }
    let mut runs = Vec::with_capacity(count / run);
    let mut idx = vec![0usize; d - 1];
    let mut local = 0;
    loop {
        let mut g = 0;
        for a in 0..d - 1 {
            g = g * dims[a] + extents[a].0 + idx[a];
        }
        g = g * dims[d - 1] + extents[d - 1].0;
        runs.push((g, local, run));
        local += run;
        let mut a = d - 1;
        loop {
            if a == 0 {
                return runs;
            }
            a -= 1;
            idx[a] += 1;
            if idx[a] < extents[a].1 {
                break;
            }
            idx[a] = 0;
        }
    }
}

/// A whole tensor held by one party.
#[derive(Debug, Clone, PartialEq)]
pub struct GlobalTensor<T> {
    dims: Vec<usize>,
    data: LocalData<T>,
}

impl<T: Scalar> GlobalTensor<T> {
    pub fn new(dims: Vec<usize>, data: LocalData<T>) -> Result<Self> {
        let total: usize = dims.iter().product();
        if dims.is_empty() || data.len() != total {
            return Err(Error::DimMismatch(format!(
                "dims {dims:?} hold {total} samples, got {}",
                data.len()
            )));
        }
        Ok(Self { dims, data })
    }

    /// Uniform samples in `[-1, 1)` identical to those of
    /// [`DistTensor::random`] with the same seed.
    pub fn random(dims: Vec<usize>, kind: ElementKind, seed: u64) -> Self {
        let total = dims.iter().product();
        let data = random_run(kind, seed, 0, total);
        Self { dims, data }
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn data(&self) -> &LocalData<T> {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut LocalData<T> {
        &mut self.data
    }

    pub fn into_data(self) -> LocalData<T> {
        self.data
    }

    pub fn element(&self) -> ElementKind {
        self.data.element()
    }

    /// Reassembles from every rank's block, in any order.
    pub fn assemble(blocks: &[DistTensor<T>]) -> Result<Self> {
        let first = blocks
            .first()
            .ok_or_else(|| Error::LayoutMismatch("no blocks to assemble".into()))?;
        let dims = first.dist.lengths().to_vec();
        let mut data = LocalData::zeros(first.dist.element(), first.dist.total());
        for b in blocks {
            if b.dist != first.dist {
                return Err(Error::LayoutMismatch("blocks disagree on distribution".into()));
            }
            data.scatter_runs(&b.data, &block_runs(&dims, &b.dist.extents(b.rank)))?;
        }
        Ok(Self { dims, data })
    }
}

fn random_run<T: Scalar>(kind: ElementKind, seed: u64, start: usize, len: usize) -> LocalData<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let per = match kind {
        ElementKind::Real => 2,
        ElementKind::Complex => 4,
    };
    rng.set_word_pos((start * per) as u128);
    let mut sample = move || T::from_f64_lossy(rng.gen::<f64>() * 2.0 - 1.0);
    match kind {
        ElementKind::Real => LocalData::Real((0..len).map(|_| sample()).collect()),
        ElementKind::Complex => LocalData::Complex(
            (0..len)
                .map(|_| {
                    let re = sample();
                    Complex::new(re, sample())
                })
                .collect(),
        ),
    }
}

/// One rank's block of a distributed tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct DistTensor<T> {
    dist: Distribution,
    rank: usize,
    data: LocalData<T>,
}

impl<T: Scalar> DistTensor<T> {
    pub fn new(dist: Distribution, rank: usize, data: LocalData<T>) -> Result<Self> {
        let expected = dist.local_len(rank);
        if data.len() != expected {
            return Err(Error::LayoutMismatch(format!(
                "rank {rank} block needs {expected} samples, got {}",
                data.len()
            )));
        }
        if data.element() != dist.element() {
            return Err(Error::LayoutMismatch(format!(
                "distribution holds {:?} samples, data is {:?}",
                dist.element(),
                data.element()
            )));
        }
        Ok(Self { dist, rank, data })
    }

    pub fn zeros(dist: Distribution, rank: usize) -> Self {
        let data = LocalData::zeros(dist.element(), dist.local_len(rank));
        Self { dist, rank, data }
    }

    /// Seeded uniform samples in `[-1, 1)`, keyed by global index so every
    /// grid sees the same tensor.
    pub fn random(dist: Distribution, rank: usize, seed: u64) -> Self {
        let kind = dist.element();
        let runs = block_runs(dist.lengths(), &dist.extents(rank));
        let mut data = LocalData::zeros(kind, dist.local_len(rank));
        for &(g, l, n) in &runs {
            let part = random_run::<T>(kind, seed, g, n);
            data.scatter_runs(&part, &[(l, 0, n)]).unwrap();
        }
        Self { dist, rank, data }
    }

    /// Cuts this rank's block out of a global tensor.
    pub fn from_global(global: &GlobalTensor<T>, dist: Distribution, rank: usize) -> Result<Self> {
        if global.dims != dist.lengths() {
            return Err(Error::DimMismatch(format!(
                "tensor dims {:?} do not match layout {:?}",
                global.dims,
                dist.lengths()
            )));
        }
        let runs = block_runs(dist.lengths(), &dist.extents(rank));
        let data = global.data.gather_runs(&runs, dist.local_len(rank));
        Self::new(dist, rank, data)
    }

    pub fn distribution(&self) -> &Distribution {
        &self.dist
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn extents(&self) -> Vec<(usize, usize)> {
        self.dist.extents(self.rank)
    }

    pub fn local_shape(&self) -> Vec<usize> {
        self.dist.local_shape(self.rank)
    }

    pub fn data(&self) -> &LocalData<T> {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut LocalData<T> {
        &mut self.data
    }

    pub fn into_parts(self) -> (Distribution, usize, LocalData<T>) {
        (self.dist, self.rank, self.data)
    }

    /// Sample at a global coordinate, if this rank owns it.
    pub fn get(&self, coord: &[usize]) -> Option<Complex<T>> {
        let (owner, off) = self.dist.local_index(coord).ok()?;
        (owner == self.rank).then(|| match &self.data {
            LocalData::Real(v) => Complex::new(v[off], T::zero()),
            LocalData::Complex(v) => v[off],
        })
    }

    /// Collects every block on `root`. `comm` ranks must match grid ranks.
    pub fn gather(&self, comm: &Communicator, root: usize) -> Result<Option<GlobalTensor<T>>> {
        let parts = comm.gather_bytes(root, self.data.to_bytes())?;
        let Some(parts) = parts else {
            return Ok(None);
        };
        let blocks = parts
            .iter()
            .enumerate()
            .map(|(r, bytes)| {
                let data = LocalData::from_bytes(self.dist.element(), bytes)?;
                DistTensor::new(self.dist.clone(), r, data)
            })
            .collect::<Result<Vec<_>>>()?;
        GlobalTensor::assemble(&blocks).map(Some)
    }

    /// Distributes a tensor held on `root`; real samples are promoted when
    /// the layout is complex.
    pub fn scatter(
        comm: &Communicator,
        root: usize,
        global: Option<&GlobalTensor<T>>,
        dist: Distribution,
    ) -> Result<Self> {
        let parts = if comm.rank() == root {
            let global = global.ok_or_else(|| Error::Config("scatter root needs the tensor".into()))?;
            let promoted;
            let global = match (global.element(), dist.element()) {
                (ElementKind::Real, ElementKind::Complex) => {
                    promoted = GlobalTensor {
                        dims: global.dims.clone(),
                        data: LocalData::Complex(global.data.clone().into_complex()),
                    };
                    &promoted
                }
                (ElementKind::Complex, ElementKind::Real) => {
                    return Err(Error::UnsupportedFormat(
                        "complex samples cannot feed a real layout".into(),
                    ))
                }
                _ => global,
            };
            Some(
                (0..comm.size())
                    .map(|r| DistTensor::from_global(global, dist.clone(), r).map(|b| b.data.to_bytes()))
                    .collect::<Result<Vec<_>>>()?,
            )
        } else {
            None
        };
        let mine = comm.scatter_bytes(root, parts)?;
        let data = LocalData::from_bytes(dist.element(), &mine)?;
        DistTensor::new(dist, comm.rank(), data)
    }
}
