use num_complex::Complex;

use super::{cast, radix2::Radix2, Direction};
use crate::Scalar;

/// Chirp-z transform: an arbitrary-length DFT as a power-of-two circular
/// convolution with the chirp `w_j = e^{±iπ j²/n}`.
pub(super) struct Bluestein<T> {
    len: usize,
    chirp: Vec<Complex<T>>,
    /// Forward spectrum of the conjugate chirp, pre-scaled by `1/m`.
    kernel: Vec<Complex<T>>,
    inner_fwd: Radix2<T>,
    inner_bwd: Radix2<T>,
}

impl<T: Scalar> Bluestein<T> {
    pub(super) fn new(n: usize, direction: Direction) -> Self {
        let m = (2 * n - 1).next_power_of_two();
        let chirp64: Vec<Complex<f64>> = (0..n)
            .map(|j| {
                let jj = (j * j) % (2 * n);
                let angle = direction.sign() * std::f64::consts::PI * jj as f64 / n as f64;
                Complex::new(angle.cos(), angle.sin())
            })
            .collect();

        let inner_fwd = Radix2::<f64>::new(m, Direction::Forward);
        let mut b = vec![Complex::new(0.0, 0.0); m];
        b[0] = chirp64[0].conj();
        for j in 1..n {
            b[j] = chirp64[j].conj();
            b[m - j] = chirp64[j].conj();
        }
        inner_fwd.process(&mut b);
        let scale = 1.0 / m as f64;
        let kernel = b.into_iter().map(|v| cast(v * scale)).collect();

        Self {
            len: n,
            chirp: chirp64.into_iter().map(cast).collect(),
            kernel,
            inner_fwd: Radix2::new(m, Direction::Forward),
            inner_bwd: Radix2::new(m, Direction::Backward),
        }
    }

    pub(super) fn scratch_len(&self) -> usize {
        self.kernel.len()
    }

    pub(super) fn process(&self, buf: &mut [Complex<T>], scratch: &mut [Complex<T>]) {
        let m = self.kernel.len();
        let work = &mut scratch[..m];
        let zero = Complex::new(T::zero(), T::zero());
        for (j, w) in work.iter_mut().enumerate() {
            *w = if j < self.len { buf[j] * self.chirp[j] } else { zero };
        }
        self.inner_fwd.process(work);
        for (w, k) in work.iter_mut().zip(&self.kernel) {
            *w *= *k;
        }
        self.inner_bwd.process(work);
        for (k, out) in buf.iter_mut().enumerate() {
            *out = work[k] * self.chirp[k];
        }
    }
}
