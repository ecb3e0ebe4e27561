use num_complex::Complex;

use super::{cast, prime_factors, unit_root, Direction, MAX_MIXED_RADIX};
use crate::Scalar;

/// Recursive decimation-in-time transform over the prime factorisation of n.
///
/// One table of `n` roots `W_n^j` serves every recursion level: a sub-problem
/// of length `m` reads it with stride `n/m`.
pub(super) struct MixedRadix<T> {
    factors: Vec<usize>,
    roots: Vec<Complex<T>>,
}

impl<T: Scalar> MixedRadix<T> {
    pub(super) fn new(n: usize, direction: Direction) -> Self {
        let factors = prime_factors(n);
        debug_assert!(factors.iter().all(|&p| p <= MAX_MIXED_RADIX));
        let roots = (0..n).map(|j| cast(unit_root(direction.sign(), j, n))).collect();
        Self { factors, roots }
    }

    pub(super) fn process(&self, buf: &mut [Complex<T>], scratch: &mut [Complex<T>]) {
        self.recurse(buf, 0, 1, scratch, &self.factors, 1);
        buf.copy_from_slice(scratch);
    }

    fn recurse(
        &self,
        input: &[Complex<T>],
        offset: usize,
        stride: usize,
        out: &mut [Complex<T>],
        factors: &[usize],
        root_stride: usize,
    ) {
        let n = out.len();
        if n == 1 {
            out[0] = input[offset];
            return;
        }
        let radix = factors[0];
        let m = n / radix;
        for s in 0..radix {
            self.recurse(
                input,
                offset + s * stride,
                stride * radix,
                &mut out[s * m..(s + 1) * m],
                &factors[1..],
                root_stride * radix,
            );
        }

        let table = self.roots.len();
        let zero = Complex::new(T::zero(), T::zero());
        let mut tmp = [zero; MAX_MIXED_RADIX];
        for k in 0..m {
            for (s, t) in tmp.iter_mut().enumerate().take(radix) {
                *t = out[s * m + k] * self.roots[(s * k * root_stride) % table];
            }
            for q in 0..radix {
                let mut acc = tmp[0];
                for (s, t) in tmp.iter().enumerate().take(radix).skip(1) {
                    acc += *t * self.roots[((s * q) % radix) * m * root_stride];
                }
                out[k + q * m] = acc;
            }
        }
    }
}
