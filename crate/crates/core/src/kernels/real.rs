//! Real-to-complex and complex-to-real transforms.

use num_complex::Complex;

use super::{Direction, Fft1d};
use crate::{Error, Result, Scalar};

/// Paired forward/backward complex kernels of length `n` used for the
/// half-spectrum transforms.
pub struct RealFft<T> {
    len: usize,
    forward: Fft1d<T>,
    backward: Fft1d<T>,
}

impl<T: Scalar> RealFft<T> {
    pub fn new(len: usize) -> Result<Self> {
        Ok(Self {
            len,
            forward: Fft1d::new(len, Direction::Forward)?,
            backward: Fft1d::new(len, Direction::Backward)?,
        })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spectrum_len(&self) -> usize {
        self.len / 2 + 1
    }

    fn scratch_len(&self) -> usize {
        self.len + self.forward.scratch_len().max(self.backward.scratch_len())
    }

    fn forward_lane(&self, input: &[T], output: &mut [Complex<T>], scratch: &mut [Complex<T>]) {
        let (lane, rest) = scratch.split_at_mut(self.len);
        for (d, &s) in lane.iter_mut().zip(input) {
            *d = Complex::new(s, T::zero());
        }
        self.forward.process_with_scratch(lane, rest);
        output.copy_from_slice(&lane[..self.spectrum_len()]);
    }

    fn backward_lane(
        &self,
        input: &[Complex<T>],
        output: &mut [T],
        scratch: &mut [Complex<T>],
    ) -> Result<()> {
        check_hermitian(input, self.len)?;
        let (lane, rest) = scratch.split_at_mut(self.len);
        let half = self.spectrum_len();
        lane[..half].copy_from_slice(input);
        // Bin 0 and (even n) the Nyquist bin are real by construction.
        lane[0].im = T::zero();
        if self.len.is_multiple_of(2) {
            lane[self.len / 2].im = T::zero();
        }
        for k in half..self.len {
            lane[k] = input[self.len - k].conj();
        }
        self.backward.process_with_scratch(lane, rest);
        for (d, s) in output.iter_mut().zip(lane.iter()) {
            *d = s.re;
        }
        Ok(())
    }
}

fn check_hermitian<T: Scalar>(spectrum: &[Complex<T>], n: usize) -> Result<()> {
    let scale = spectrum
        .iter()
        .map(|c| c.norm().to_f64_lossless())
        .fold(0.0f64, f64::max);
    let tol = T::hermitian_tolerance() * scale.max(1.0);
    let mut bins = vec![0];
    if n.is_multiple_of(2) {
        bins.push(n / 2);
    }
    for bin in bins {
        let imag = spectrum[bin].im.to_f64_lossless();
        if imag.abs() > tol {
            return Err(Error::NonHermitian { bin, imag });
        }
    }
    Ok(())
}

/// Forward real-input transform returning the `⌊n/2⌋+1` non-redundant bins.
pub fn rfft_1d<T: Scalar>(data: &[T]) -> Result<Vec<Complex<T>>> {
    let plan = RealFft::new(data.len())?;
    let zero = Complex::new(T::zero(), T::zero());
    let mut out = vec![zero; plan.spectrum_len()];
    let mut scratch = vec![zero; plan.scratch_len()];
    plan.forward_lane(data, &mut out, &mut scratch);
    Ok(out)
}

/// Unnormalized inverse of [`rfft_1d`]: `irfft_1d(rfft_1d(x), n) = n·x`.
pub fn irfft_1d<T: Scalar>(data: &[Complex<T>], n: usize) -> Result<Vec<T>> {
    if n == 0 {
        return Err(Error::ZeroLength);
    }
    if data.len() != n / 2 + 1 {
        return Err(Error::LengthMismatch {
            expected: n / 2 + 1,
            actual: data.len(),
        });
    }
    let plan = RealFft::new(n)?;
    let zero = Complex::new(T::zero(), T::zero());
    let mut out = vec![T::zero(); n];
    let mut scratch = vec![zero; plan.scratch_len()];
    plan.backward_lane(data, &mut out, &mut scratch)?;
    Ok(out)
}

/// Forward transforms of contiguous real lanes of length `plan.len()` into
/// contiguous half-spectrum lanes.
pub fn rfft_lanes<T: Scalar>(plan: &RealFft<T>, input: &[T], output: &mut [Complex<T>]) -> Result<()> {
    let (n, h) = (plan.len(), plan.spectrum_len());
    let lanes = input.len() / n;
    if !input.len().is_multiple_of(n) || output.len() != lanes * h {
        return Err(Error::LengthMismatch {
            expected: lanes * h,
            actual: output.len(),
        });
    }
    let mut scratch = vec![Complex::new(T::zero(), T::zero()); plan.scratch_len()];
    for (src, dst) in input.chunks_exact(n).zip(output.chunks_exact_mut(h)) {
        plan.forward_lane(src, dst, &mut scratch);
    }
    Ok(())
}

/// Inverse of [`rfft_lanes`], unnormalized.
pub fn irfft_lanes<T: Scalar>(plan: &RealFft<T>, input: &[Complex<T>], output: &mut [T]) -> Result<()> {
    let (n, h) = (plan.len(), plan.spectrum_len());
    let lanes = output.len() / n;
    if !output.len().is_multiple_of(n) || input.len() != lanes * h {
        return Err(Error::LengthMismatch {
            expected: lanes * h,
            actual: input.len(),
        });
    }
    let mut scratch = vec![Complex::new(T::zero(), T::zero()); plan.scratch_len()];
    for (src, dst) in input.chunks_exact(h).zip(output.chunks_exact_mut(n)) {
        plan.backward_lane(src, dst, &mut scratch)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::super::test_util::*;
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex<f64> {
        Complex::new(re, im)
    }

    #[test]
    fn constant_input() {
        assert_eq!(rfft_1d(&[1.0f64; 4]).unwrap(), vec![c(4.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]);
    }

    #[test]
    fn cosine_puts_energy_in_first_bin() {
        let out = rfft_1d(&[1.0f64, 0.0, -1.0, 0.0]).unwrap();
        let expected = [c(0.0, 0.0), c(2.0, 0.0), c(0.0, 0.0)];
        assert!(rel_err(&out, &expected) < 1e-15);
    }

    #[test]
    fn odd_length_is_truncated_oracle() {
        let x = [1.0f64, 2.0, 3.0, 4.0, 5.0];
        let full = naive_dft(&x.map(|v| c(v, 0.0)), -1.0);
        let out = rfft_1d(&x).unwrap();
        assert_eq!(out.len(), 3);
        assert!(rel_err(&out, &full[..3]) < 1e-14);
    }

    #[test]
    fn dc_only_inverse() {
        let out = irfft_1d(&[c(4.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)], 4).unwrap();
        assert_eq!(out, vec![4.0; 4]);
    }

    #[test]
    fn round_trip_scales_by_n() {
        let out = irfft_1d(&rfft_1d(&[1.0f64, 2.0, 3.0, 4.0]).unwrap(), 4).unwrap();
        for (a, b) in out.iter().zip([4.0, 8.0, 12.0, 16.0]) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn random_round_trip_n8() {
        let x = random_real(8, 42);
        let y = irfft_1d(&rfft_1d(&x).unwrap(), 8).unwrap();
        let norm: f64 = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        let err: f64 = x.iter().zip(&y).map(|(a, b)| (8.0 * a - b).powi(2)).sum::<f64>().sqrt();
        assert!(err / (8.0 * norm) < 1e-12);
    }

    #[test]
    fn length_and_hermitian_errors() {
        assert_eq!(
            irfft_1d(&[c(1.0, 0.0); 2], 4),
            Err(Error::LengthMismatch { expected: 3, actual: 2 })
        );
        assert!(matches!(
            irfft_1d(&[c(1.0, 0.5), c(0.0, 0.0), c(0.0, 0.0)], 4),
            Err(Error::NonHermitian { bin: 0, .. })
        ));
        assert!(matches!(
            irfft_1d(&[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 2.0)], 4),
            Err(Error::NonHermitian { bin: 2, .. })
        ));
        // Odd n has no Nyquist bin, so the last entry may be complex.
        assert!(irfft_1d(&[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 2.0)], 5).is_ok());
        assert_eq!(rfft_1d::<f64>(&[]), Err(Error::ZeroLength));
    }

    proptest! {
        #[test]
        fn rfft_is_truncated_complex_fft(n in 1usize..80, seed in any::<u64>()) {
            let x = random_real(n, seed);
            let full = naive_dft(&x.iter().map(|&v| c(v, 0.0)).collect::<Vec<_>>(), -1.0);
            let half = rfft_1d(&x).unwrap();
            prop_assert!(rel_err(&half, &full[..n / 2 + 1]) < 1e-10);
        }
    }
}
