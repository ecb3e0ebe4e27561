use num_complex::Complex;

use super::{cast, unit_root, Direction};
use crate::{Error, Result, Scalar};

/// Element-count guard for [`dft_oracle`].
pub const ORACLE_LIMIT: usize = 1 << 16;

/// Unnormalized multidimensional DFT by direct summation over every input
/// element for every output element. O(N²); ground truth for everything else.
///
/// `data` is row-major with the last of `dims` fastest. Accumulation runs in
/// `f64` regardless of `T`.
pub fn dft_oracle<T: Scalar>(
    data: &[Complex<T>],
    dims: &[usize],
    direction: Direction,
) -> Result<Vec<Complex<T>>> {
    let total: usize = dims.iter().product();
    if dims.is_empty() || total == 0 {
        return Err(Error::ZeroLength);
    }
    if total > ORACLE_LIMIT {
        return Err(Error::TooLarge {
            elements: total,
            limit: ORACLE_LIMIT,
        });
    }
    if data.len() != total {
        return Err(Error::LengthMismatch {
            expected: total,
            actual: data.len(),
        });
    }
    let input: Vec<Complex<f64>> = data
        .iter()
        .map(|c| Complex::new(c.re.to_f64_lossless(), c.im.to_f64_lossless()))
        .collect();
    let tables: Vec<Vec<Complex<f64>>> = dims
        .iter()
        .map(|&n| (0..n).map(|j| unit_root(direction.sign(), j, n)).collect())
        .collect();

    let rank = dims.len();
    let mut out = Vec::with_capacity(total);
    let mut k = vec![0usize; rank];
    let mut j = vec![0usize; rank];
    for _ in 0..total {
        let mut acc = Complex::new(0.0, 0.0);
        j.iter_mut().for_each(|v| *v = 0);
        for x in &input {
            let mut phase = Complex::new(1.0, 0.0);
            for a in 0..rank {
                phase *= tables[a][(j[a] * k[a]) % dims[a]];
            }
            acc += x * phase;
            increment(&mut j, dims);
        }
        out.push(cast(acc));
        increment(&mut k, dims);
    }
    Ok(out)
}

fn increment(index: &mut [usize], dims: &[usize]) {
    for a in (0..dims.len()).rev() {
        index[a] += 1;
        if index[a] < dims[a] {
            return;
        }
        index[a] = 0;
    }
}
