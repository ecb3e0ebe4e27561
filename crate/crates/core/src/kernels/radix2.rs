use num_complex::Complex;

use super::{cast, unit_root, Direction};
use crate::Scalar;

/// Iterative decimation-in-time radix-2 transform.
pub(super) struct Radix2<T> {
    twiddles: Vec<Complex<T>>,
    bitrev: Vec<u32>,
}

impl<T: Scalar> Radix2<T> {
    pub(super) fn new(n: usize, direction: Direction) -> Self {
        debug_assert!(n.is_power_of_two() && n >= 2);
        let bits = n.trailing_zeros();
        let twiddles = (0..n / 2)
            .map(|j| cast(unit_root(direction.sign(), j, n)))
            .collect();
        let bitrev = (0..n as u32)
            .map(|i| i.reverse_bits() >> (32 - bits))
            .collect();
        Self { twiddles, bitrev }
    }

    pub(super) fn process(&self, buf: &mut [Complex<T>]) {
        let n = buf.len();
        for (i, &j) in self.bitrev.iter().enumerate() {
            let j = j as usize;
            if i < j {
                buf.swap(i, j);
            }
        }
        let mut len = 2;
        while len <= n {
            let half = len / 2;
            let step = n / len;
            for start in (0..n).step_by(len) {
                for j in 0..half {
                    let w = self.twiddles[j * step];
                    let u = buf[start + j];
                    let v = buf[start + j + half] * w;
                    buf[start + j] = u + v;
                    buf[start + j + half] = u - v;
                }
            }
            len *= 2;
        }
    }
}
