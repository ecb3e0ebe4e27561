//! Tensor files: magic `DTNS`, `u32` version, `u8` element kind, `u32` axis
//! count, `u64` per axis, then the little-endian row-major payload.
//!
//! Kinds: 0 real f64, 1 complex f64, 2 real f32, 3 complex f32. Files of the
//! other precision are converted on read.

use std::path::Path;

use num_complex::Complex;

use crate::layout::{Distribution, ElementKind};
use crate::tensor::{DistTensor, GlobalTensor, LocalData};
use crate::transport::Communicator;
use crate::{Error, Result, Scalar};

const MAGIC: [u8; 4] = *b"DTNS";
const VERSION: u32 = 1;

fn kind_tag<T: Scalar>(kind: ElementKind) -> u8 {
    match kind {
        ElementKind::Real => T::REAL_TAG,
        ElementKind::Complex => T::COMPLEX_TAG,
    }
}

pub fn encode_tensor<T: Scalar>(tensor: &GlobalTensor<T>) -> Vec<u8> {
    let dims = tensor.dims();
    let payload = tensor.data().to_bytes();
    let mut out = Vec::with_capacity(13 + 8 * dims.len() + payload.len());
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.push(kind_tag::<T>(tensor.element()));
    out.extend_from_slice(&(dims.len() as u32).to_le_bytes());
    for &d in dims {
        out.extend_from_slice(&(d as u64).to_le_bytes());
    }
    out.extend_from_slice(&payload);
    out
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos + n;
        if end > self.bytes.len() {
            return Err(Error::TruncatedFile {
                expected: end,
                found: self.bytes.len(),
            });
        }
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}

fn convert<S: Scalar, T: Scalar>(data: LocalData<S>) -> LocalData<T> {
    let c = |v: S| T::from_f64_lossy(v.to_f64_lossless());
    match data {
        LocalData::Real(v) => LocalData::Real(v.into_iter().map(c).collect()),
        LocalData::Complex(v) => LocalData::Complex(v.into_iter().map(|z| Complex::new(c(z.re), c(z.im))).collect()),
    }
}

pub fn decode_tensor<T: Scalar>(bytes: &[u8]) -> Result<GlobalTensor<T>> {
    let mut cur = Cursor { bytes, pos: 0 };
    let magic: [u8; 4] = cur.take(4)?.try_into().unwrap();
    if magic != MAGIC {
        return Err(Error::BadMagic(magic));
    }
    let version = cur.u32()?;
    if version != VERSION {
        return Err(Error::UnsupportedFormat(format!("version {version}")));
    }
    let tag = cur.take(1)?[0];
    let (kind, width) = match tag {
        0 => (ElementKind::Real, 8),
        1 => (ElementKind::Complex, 16),
        2 => (ElementKind::Real, 4),
        3 => (ElementKind::Complex, 8),
        other => return Err(Error::UnsupportedFormat(format!("element kind {other}"))),
    };
    let axes = cur.u32()? as usize;
    if axes == 0 {
        return Err(Error::DimMismatch("file declares zero axes".into()));
    }
    let mut dims = Vec::with_capacity(axes.min(64));
    for _ in 0..axes {
        let d = u64::from_le_bytes(cur.take(8)?.try_into().unwrap());
        dims.push(usize::try_from(d).map_err(|_| Error::DimMismatch(format!("axis length {d}")))?);
    }
    let count = dims
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .and_then(|n| n.checked_mul(width))
        .ok_or_else(|| Error::DimMismatch(format!("dims {dims:?} overflow")))?;
    let payload = cur.take(count)?;
    if cur.pos != bytes.len() {
        return Err(Error::DimMismatch(format!(
            "{} bytes after the payload of dims {dims:?}",
            bytes.len() - cur.pos
        )));
    }
    let data = match tag {
        0 | 1 => convert::<f64, T>(LocalData::from_bytes(kind, payload)?),
        _ => convert::<f32, T>(LocalData::from_bytes(kind, payload)?),
    };
    GlobalTensor::new(dims, data)
}

pub fn write_tensor<T: Scalar>(path: impl AsRef<Path>, tensor: &GlobalTensor<T>) -> Result<()> {
    std::fs::write(path, encode_tensor(tensor))?;
    Ok(())
}

pub fn read_tensor<T: Scalar>(path: impl AsRef<Path>) -> Result<GlobalTensor<T>> {
    decode_tensor(&std::fs::read(path)?)
}

/// Reads `path` on `root` and scatters it into `dist`. Real files feeding a
/// complex layout are promoted. Collective; when the read fails the root
/// returns the cause and every other rank [`Error::Aborted`].
pub fn read_distributed<T: Scalar>(
    comm: &Communicator,
    root: usize,
    path: impl AsRef<Path>,
    dist: Distribution,
) -> Result<DistTensor<T>> {
    let loaded = if comm.rank() == root {
        Some(read_tensor::<T>(path).and_then(|t| {
            if t.dims() != dist.lengths() {
                Err(Error::DimMismatch(format!(
                    "file holds {:?}, layout expects {:?}",
                    t.dims(),
                    dist.lengths()
                )))
            } else if t.element() == ElementKind::Complex && dist.element() == ElementKind::Real {
                Err(Error::UnsupportedFormat("complex file cannot feed a real layout".into()))
            } else {
                Ok(t)
            }
        }))
    } else {
        None
    };
    let failed = loaded.as_ref().map(|r| vec![u8::from(r.is_err())]);
    let failed = comm.broadcast_bytes(root, failed)?;
    match loaded {
        Some(Err(e)) => return Err(e),
        _ if failed[0] != 0 => return Err(Error::Aborted),
        _ => {}
    }
    let global = loaded.and_then(Result::ok);
    DistTensor::scatter(comm, root, global.as_ref(), dist)
}

/// Gathers `tensor` on `root`, which writes it to `path`. Collective; a
/// failed write aborts the other ranks as in [`read_distributed`].
pub fn write_distributed<T: Scalar>(
    comm: &Communicator,
    root: usize,
    path: impl AsRef<Path>,
    tensor: &DistTensor<T>,
) -> Result<()> {
    let result = tensor.gather(comm, root)?.map(|global| write_tensor(path, &global));
    let failed = result.as_ref().map(|r| vec![u8::from(r.is_err())]);
    let failed = comm.broadcast_bytes(root, failed)?;
    match result {
        Some(r) => r,
        None if failed[0] == 0 => Ok(()),
        None => Err(Error::Aborted),
    }
}
