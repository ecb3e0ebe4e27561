//! Global transposes.
//!
//! A transpose moves one grid axis from tensor axis `x` to tensor axis `y`
//! (or back). Each rank packs the part of its block every peer will own into
//! one contiguous section per peer. Received sections are unpacked straight
//! into the target block in its natural axis order, so no separate local
//! transpose is needed to keep xyz order.
//!
//! Three exchange strategies share the packing code:
//!
//! * [`ExchangeMode::Direct`]: one message per peer, no staging.
//! * [`ExchangeMode::Staged`]: every outgoing section is staged before any
//!   send, and every incoming section is staged after the last receive.
//! * [`ExchangeMode::Pipelined`]: sections are cut into chunks; each chunk is
//!   staged and sent on its own so staging overlaps the wire.

mod alltoall;
mod schedule;

use num_complex::Complex;
use serde::{Deserialize, Serialize};

pub use alltoall::{all_to_all, exchange, pipelined_all_to_all, staged_all_to_all};
pub use schedule::{ChunkOp, ChunkStep, ExchangeSchedule, StagingArena};

use crate::layout::{block_map, BlockMap, Distribution, ElementKind};
use crate::tensor::{DistTensor, LocalData};
use crate::timing::{metered, TimingBreakdown};
use crate::transport::GridComms;
use crate::{Error, Result, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExchangeMode {
    Direct,
    Staged,
    Pipelined,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ExchangeOptions {
    pub mode: ExchangeMode,
    /// Chunks per peer section in pipelined mode.
    pub chunks: usize,
    /// Staging buffers available to the pipelined exchange.
    pub staging_buffers: usize,
}

impl Default for ExchangeOptions {
    fn default() -> Self {
        Self {
            mode: ExchangeMode::Direct,
            chunks: 4,
            staging_buffers: 2,
        }
    }
}

/// Geometry of one transpose on one rank.
///
/// The block is viewed as `[batch, rows, mid, cols, super_element]`, where
/// `rows` and `cols` are the two tensor axes trading the grid axis. With
/// `gather_rows` the rows axis starts split and ends whole while the cols
/// axis starts whole and ends split; otherwise the reverse.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransposeSpec {
    pub batch: usize,
    pub rows: BlockMap,
    pub mid: usize,
    pub cols: BlockMap,
    pub super_element: usize,
    pub rank: usize,
    pub gather_rows: bool,
}

type Shape5 = [usize; 5];
type Region = ((usize, usize), (usize, usize));

impl TransposeSpec {
    pub fn peers(&self) -> usize {
        self.rows.counts.len()
    }

    fn shape(&self, rows_split: bool) -> Shape5 {
        let r = self.rank;
        let (x, y) = if rows_split {
            (self.rows.counts[r], self.cols.len)
        } else {
            (self.rows.len, self.cols.counts[r])
        };
        [self.batch, x, self.mid, y, self.super_element]
    }

    pub fn input_shape(&self) -> Shape5 {
        self.shape(self.gather_rows)
    }

    pub fn output_shape(&self) -> Shape5 {
        self.shape(!self.gather_rows)
    }

    /// Part of the input block destined for peer `s`, as `(rows, cols)`
    /// `(offset, length)` pairs.
    fn send_region(&self, s: usize) -> Region {
        let r = self.rank;
        if self.gather_rows {
            ((0, self.rows.counts[r]), (self.cols.offsets[s], self.cols.counts[s]))
        } else {
            ((self.rows.offsets[s], self.rows.counts[s]), (0, self.cols.counts[r]))
        }
    }

    /// Part of the output block received from peer `s`.
    fn recv_region(&self, s: usize) -> Region {
        let r = self.rank;
        if self.gather_rows {
            ((self.rows.offsets[s], self.rows.counts[s]), (0, self.cols.counts[r]))
        } else {
            ((0, self.rows.counts[r]), (self.cols.offsets[s], self.cols.counts[s]))
        }
    }

    fn region_len(&self, ((_, nx), (_, ny)): Region) -> usize {
        self.batch * nx * self.mid * ny * self.super_element
    }

    pub fn send_counts(&self) -> Vec<usize> {
        (0..self.peers()).map(|s| self.region_len(self.send_region(s))).collect()
    }

    pub fn recv_counts(&self) -> Vec<usize> {
        (0..self.peers()).map(|s| self.region_len(self.recv_region(s))).collect()
    }
}

/// Copies the `nx × ny` window at `from` in a `[b, X, m, Y, s]` array into the
/// window at `to` of another such array.
fn copy_window<T: Copy>(
    src: &[T],
    src_shape: Shape5,
    from: (usize, usize),
    dst: &mut [T],
    dst_shape: Shape5,
    to: (usize, usize),
    (nx, ny): (usize, usize),
) {
    let [batch, sx, mid, sy, s] = src_shape;
    let [_, dx, _, dy, _] = dst_shape;
    let run = ny * s;
    if run == 0 {
        return;
    }
    for b in 0..batch {
        for x in 0..nx {
            for m in 0..mid {
                let si = (((b * sx + from.0 + x) * mid + m) * sy + from.1) * s;
                let di = (((b * dx + to.0 + x) * mid + m) * dy + to.1) * s;
                dst[di..di + run].copy_from_slice(&src[si..si + run]);
            }
        }
    }
}

fn shape_len(s: Shape5) -> usize {
    s.iter().product()
}

/// Groups the block into one contiguous section per destination, in rank
/// order.
pub fn pack<T: Copy + Default>(block: &[T], spec: &TransposeSpec) -> Result<Vec<T>> {
    let shape = spec.input_shape();
    if block.len() != shape_len(shape) {
        return Err(Error::CountMismatch(format!(
            "block of {} elements, spec expects {}",
            block.len(),
            shape_len(shape)
        )));
    }
    let mut out = vec![T::default(); block.len()];
    let mut at = 0;
    for s in 0..spec.peers() {
        let region = spec.send_region(s);
        let ((x0, nx), (y0, ny)) = region;
        let len = spec.region_len(region);
        let packed = [spec.batch, nx, spec.mid, ny, spec.super_element];
        copy_window(block, shape, (x0, y0), &mut out[at..at + len], packed, (0, 0), (nx, ny));
        at += len;
    }
    Ok(out)
}

/// Places the sections received from every source into the target block.
pub fn unpack<T: Copy + Default>(recv: &[T], spec: &TransposeSpec) -> Result<Vec<T>> {
    let shape = spec.output_shape();
    if recv.len() != shape_len(shape) {
        return Err(Error::CountMismatch(format!(
            "received {} elements, spec expects {}",
            recv.len(),
            shape_len(shape)
        )));
    }
    let mut out = vec![T::default(); recv.len()];
    let mut at = 0;
    for s in 0..spec.peers() {
        let region = spec.recv_region(s);
        let ((x0, nx), (y0, ny)) = region;
        let len = spec.region_len(region);
        let packed = [spec.batch, nx, spec.mid, ny, spec.super_element];
        copy_window(&recv[at..at + len], packed, (0, 0), &mut out, shape, (x0, y0), (nx, ny));
        at += len;
    }
    Ok(out)
}

/// Out-of-place transpose of a `rows × cols` matrix of `super_element`-wide
/// blocks: `out[(c·rows + r)·s + k] = buf[(r·cols + c)·s + k]`.
pub fn local_transpose<T: Copy + Default>(
    buf: &[T],
    rows: usize,
    cols: usize,
    super_element: usize,
) -> Result<Vec<T>> {
    let expected = rows * cols * super_element;
    if buf.len() != expected {
        return Err(Error::LengthMismatch {
            expected,
            actual: buf.len(),
        });
    }
    let s = super_element;
    let mut out = vec![T::default(); expected];
    for r in 0..rows {
        for c in 0..cols {
            let src = (r * cols + c) * s;
            let dst = (c * rows + r) * s;
            out[dst..dst + s].copy_from_slice(&buf[src..src + s]);
        }
    }
    Ok(out)
}

/// Works out the transpose taking `from` to `to` for the rank at `coords`.
/// Returns the grid axis carrying the exchange and the rank's spec.
pub fn transpose_spec(
    from: &Distribution,
    to: &Distribution,
    coords: &[usize],
) -> Result<(usize, TransposeSpec)> {
    let incompatible = |why: &str| Err(Error::IncompatibleLayouts(why.to_string()));
    if from.grid() != to.grid() {
        return incompatible("grids differ");
    }
    if from.lengths() != to.lengths() || from.hatted() != to.hatted() {
        return incompatible("axis lengths or transform state differ");
    }
    if from.element() != ElementKind::Complex || to.element() != ElementKind::Complex {
        return incompatible("only complex layouts are exchanged");
    }
    let moved: Vec<usize> = (0..from.grid().ndims())
        .filter(|&g| from.axis_of_grid(g) != to.axis_of_grid(g))
        .collect();
    let [g] = moved[..] else {
        return incompatible("exactly one grid axis must move");
    };
    let (Some(xf), Some(xt)) = (from.axis_of_grid(g), to.axis_of_grid(g)) else {
        return incompatible("the moving grid axis must split a tensor axis on both sides");
    };
    let (a, b) = (xf.min(xt), xf.max(xt));
    let ext = from.extents(from.grid().rank_of(coords));
    let prod = |r: std::ops::Range<usize>| ext[r].iter().map(|e| e.1).product::<usize>();
    let p = from.grid().shape()[g];
    let lengths = from.lengths();
    Ok((
        g,
        TransposeSpec {
            batch: prod(0..a),
            rows: block_map(lengths[a], p),
            mid: prod(a + 1..b),
            cols: block_map(lengths[b], p),
            super_element: prod(b + 1..lengths.len()),
            rank: coords[g],
            gather_rows: xf == a,
        },
    ))
}

/// Redistributes `tensor` into layout `to` over the grid communicator that
/// owns the moving axis. Collective over that communicator.
pub fn global_transpose<T: Scalar>(
    comms: &GridComms,
    tensor: DistTensor<T>,
    to: &Distribution,
    options: &ExchangeOptions,
    timing: &mut TimingBreakdown,
) -> Result<DistTensor<T>> {
    let (from, rank, data) = tensor.into_parts();
    if from == *to {
        return DistTensor::new(from, rank, data);
    }
    let (g, spec) = transpose_spec(&from, to, comms.coords())?;
    let comm = comms.axis(g);
    let LocalData::Complex(block) = data else {
        return Err(Error::IncompatibleLayouts("real data cannot be exchanged".into()));
    };
    let bytes = |n: usize| n * 2 * T::BYTES;
    let packed = metered(comm, &mut timing.pack, |c| c.copy_time(bytes(block.len())), || {
        pack(&block, &spec)
    })?;
    drop(block);
    let received = exchange(
        comm,
        &packed,
        &spec.send_counts(),
        &spec.recv_counts(),
        options,
        timing,
    )?;
    let out = metered(comm, &mut timing.unpack, |c| c.copy_time(bytes(received.len())), || {
        unpack::<Complex<T>>(&received, &spec)
    })?;
    DistTensor::new(to.clone(), rank, LocalData::Complex(out))
}
