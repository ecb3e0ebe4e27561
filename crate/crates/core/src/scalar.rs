//! Floating-point element types.

use std::fmt::{Debug, Display};

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};

/// Real sample type: `f32` or `f64`.
///
/// Twiddles and oracle sums are always evaluated in `f64` and converted, so
/// the single-precision path only loses accuracy in the butterflies.
pub trait Scalar:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    const BYTES: usize;
    /// Tensor-file element tags for real and complex payloads.
    const REAL_TAG: u8;
    const COMPLEX_TAG: u8;
    const NAME: &'static str;

    fn from_f64_lossy(v: f64) -> Self;
    fn to_f64_lossless(self) -> f64;
    fn write_le(self, out: &mut Vec<u8>);
    /// Reads one value from the first `BYTES` bytes of `bytes`.
    fn read_le(bytes: &[u8]) -> Self;

    /// Relative tolerance used for Hermitian-consistency checks.
    fn hermitian_tolerance() -> f64 {
        Self::epsilon().to_f64().unwrap().sqrt()
    }
}

impl Scalar for f64 {
    const BYTES: usize = 8;
    const REAL_TAG: u8 = 0;
    const COMPLEX_TAG: u8 = 1;
    const NAME: &'static str = "f64";

    fn from_f64_lossy(v: f64) -> Self {
        v
    }
    fn to_f64_lossless(self) -> f64 {
        self
    }
    fn write_le(self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.to_le_bytes());
    }
    fn read_le(bytes: &[u8]) -> Self {
        f64::from_le_bytes(bytes[..8].try_into().unwrap())
    }
}

impl Scalar for f32 {
    const BYTES: usize = 4;
    const REAL_TAG: u8 = 2;
    const COMPLEX_TAG: u8 = 3;
    const NAME: &'static str = "f32";

    fn from_f64_lossy(v: f64) -> Self {
        v as f32
    }
    fn to_f64_lossless(self) -> f64 {
        self as f64
    }
    fn write_le(self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.to_le_bytes());
    }
    fn read_le(bytes: &[u8]) -> Self {
        f32::from_le_bytes(bytes[..4].try_into().unwrap())
    }
}

pub(crate) fn encode_complex<T: Scalar>(data: &[num_complex::Complex<T>]) -> Vec<u8> {
    let mut out = Vec::with_capacity(data.len() * 2 * T::BYTES);
    for c in data {
        c.re.write_le(&mut out);
        c.im.write_le(&mut out);
    }
    out
}

pub(crate) fn decode_complex<T: Scalar>(
    bytes: &[u8],
    out: &mut Vec<num_complex::Complex<T>>,
) -> crate::Result<()> {
    let width = 2 * T::BYTES;
    if !bytes.len().is_multiple_of(width) {
        return Err(crate::Error::CountMismatch(format!(
            "payload of {} bytes is not a whole number of {}-byte complex values",
            bytes.len(),
            width
        )));
    }
    out.extend(
        bytes
            .chunks_exact(width)
            .map(|c| num_complex::Complex::new(T::read_le(c), T::read_le(&c[T::BYTES..]))),
    );
    Ok(())
}
