use num_complex::Complex;
use serde::{Deserialize, Serialize};

use super::{Direction, Fft1d};
use crate::{Error, Result, Scalar};

/// `count` transforms of `length` elements; lane `b` element `j` lives at
/// `b·dist + j·stride`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BatchSpec {
    pub length: usize,
    pub stride: usize,
    pub dist: usize,
    pub count: usize,
}

impl BatchSpec {
    pub fn contiguous(length: usize, count: usize) -> Self {
        Self {
            length,
            stride: 1,
            dist: length,
            count,
        }
    }

    /// One past the highest element index the batch touches (0 if empty).
    pub fn extent(&self) -> usize {
        if self.count == 0 {
            0
        } else {
            (self.count - 1) * self.dist + (self.length - 1) * self.stride + 1
        }
    }

    pub fn validate(&self, buffer_len: usize) -> Result<()> {
        if self.length == 0 {
            return Err(Error::ZeroLength);
        }
        if self.stride == 0 || self.dist == 0 {
            return Err(Error::InvalidDims(format!(
                "batch stride and dist must be positive: {self:?}"
            )));
        }
        let extent = self.extent();
        if extent > buffer_len {
            return Err(Error::OutOfBounds {
                needed: extent,
                len: buffer_len,
            });
        }
        Ok(())
    }
}

/// Transforms every lane described by `spec` in place.
pub fn fft_batched<T: Scalar>(
    data: &mut [Complex<T>],
    spec: BatchSpec,
    direction: Direction,
) -> Result<()> {
    spec.validate(data.len())?;
    if spec.count == 0 {
        return Ok(());
    }
    let fft = Fft1d::new(spec.length, direction)?;
    fft_batched_with(&fft, data, spec)
}

/// As [`fft_batched`] with a prebuilt kernel; one scratch and one lane buffer
/// are reused across the whole batch.
pub fn fft_batched_with<T: Scalar>(
    fft: &Fft1d<T>,
    data: &mut [Complex<T>],
    spec: BatchSpec,
) -> Result<()> {
    spec.validate(data.len())?;
    if spec.length != fft.len() {
        return Err(Error::LengthMismatch {
            expected: fft.len(),
            actual: spec.length,
        });
    }
    let zero = Complex::new(T::zero(), T::zero());
    let mut scratch = vec![zero; fft.scratch_len()];
    if spec.stride == 1 {
        for b in 0..spec.count {
            let start = b * spec.dist;
            fft.process_with_scratch(&mut data[start..start + spec.length], &mut scratch);
        }
        return Ok(());
    }
    let mut lane = vec![zero; spec.length];
    for b in 0..spec.count {
        let base = b * spec.dist;
        for (j, v) in lane.iter_mut().enumerate() {
            *v = data[base + j * spec.stride];
        }
        fft.process_with_scratch(&mut lane, &mut scratch);
        for (j, v) in lane.iter().enumerate() {
            data[base + j * spec.stride] = *v;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::super::fft_1d;
    use super::super::test_util::*;
    use super::*;

    fn c(re: f64, im: f64) -> Complex<f64> {
        Complex::new(re, im)
    }

    #[test]
    fn empty_batch_leaves_buffer() {
        let mut data = random_complex(5, 1);
        let before = data.clone();
        let spec = BatchSpec {
            length: 4,
            stride: 1,
            dist: 4,
            count: 0,
        };
        fft_batched(&mut data, spec, Direction::Forward).unwrap();
        assert_eq!(data, before);
    }

    #[test]
    fn two_contiguous_lanes() {
        let z = c(0.0, 0.0);
        let one = c(1.0, 0.0);
        let mut data = vec![one, z, z, z, z, one, z, z];
        fft_batched(&mut data, BatchSpec::contiguous(4, 2), Direction::Forward).unwrap();
        let expected = [one, one, one, one, one, c(0.0, -1.0), c(-1.0, 0.0), c(0.0, 1.0)];
        assert!(rel_err(&data, &expected) < 1e-15);
    }

    #[test]
    fn column_transforms_of_row_major_matrix() {
        let m = random_complex(9, 3);
        let mut data = m.clone();
        let spec = BatchSpec {
            length: 3,
            stride: 3,
            dist: 1,
            count: 3,
        };
        fft_batched(&mut data, spec, Direction::Forward).unwrap();
        for col in 0..3 {
            let gathered: Vec<_> = (0..3).map(|r| m[r * 3 + col]).collect();
            let expected = naive_dft(&gathered, -1.0);
            let got: Vec<_> = (0..3).map(|r| data[r * 3 + col]).collect();
            assert!(rel_err(&got, &expected) < 1e-12);
        }
    }

    #[test]
    fn strided_lanes_are_bit_identical_to_gathered_fft() {
        for &(len, inner) in &[(8usize, 3usize), (6, 4), (17, 2), (12, 5)] {
            let m = random_complex(len * inner, (len * inner) as u64);
            let mut data = m.clone();
            let spec = BatchSpec {
                length: len,
                stride: inner,
                dist: 1,
                count: inner,
            };
            fft_batched(&mut data, spec, Direction::Backward).unwrap();
            for i in 0..inner {
                let gathered: Vec<_> = (0..len).map(|j| m[j * inner + i]).collect();
                let expected = fft_1d(&gathered, Direction::Backward).unwrap();
                let got: Vec<_> = (0..len).map(|j| data[j * inner + i]).collect();
                assert_eq!(got, expected);
            }
        }
    }

    #[test]
    fn out_of_bounds_is_reported() {
        let mut data = random_complex(7, 1);
        let spec = BatchSpec::contiguous(4, 2);
        assert_eq!(
            fft_batched(&mut data, spec, Direction::Forward),
            Err(Error::OutOfBounds { needed: 8, len: 7 })
        );
    }
}
