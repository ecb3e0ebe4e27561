//! Process grids and block ownership.
//!
//! Storage is row-major with the last axis fastest. Every division of an axis
//! among ranks uses the ceil-block rule: rank `r` of `p` owns
//! `[r·⌈n/p⌉, min((r+1)·⌈n/p⌉, n))`, so trailing ranks may own nothing.
//!
//! A [`Distribution`] records which grid axis (if any) splits each tensor
//! axis. The spatial layout splits tensor axes `0..g` by grid axes `0..g` and
//! keeps the last axis local; the frequency layout splits axes `1..=g`
//! instead and keeps axis 0 local. Axis order is the same in both.

use serde::{Deserialize, Serialize};

use crate::plan::TransformKind;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GlobalDims(Vec<usize>);

impl GlobalDims {
    pub fn new(dims: impl Into<Vec<usize>>) -> Result<Self> {
        let dims = dims.into();
        if dims.len() < 2 {
            return Err(Error::InvalidDims(format!(
                "need at least two axes, got {dims:?}"
            )));
        }
        if dims.contains(&0) {
            return Err(Error::InvalidDims(format!("zero-length axis in {dims:?}")));
        }
        Ok(Self(dims))
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn rank(&self) -> usize {
        self.0.len()
    }

    pub fn total(&self) -> usize {
        self.0.iter().product()
    }

    pub fn last(&self) -> usize {
        *self.0.last().unwrap()
    }
}

impl std::ops::Index<usize> for GlobalDims {
    type Output = usize;
    fn index(&self, i: usize) -> &usize {
        &self.0[i]
    }
}

/// Transformed sizes: the last axis of a real transform keeps `⌊n/2⌋+1` bins.
///
/// For C2R the argument is still the spatial shape; the result is the shape
/// of the spectrum the transform consumes.
pub fn hat_dims(dims: &GlobalDims, kind: TransformKind) -> GlobalDims {
    let mut out = dims.0.clone();
    if kind != TransformKind::C2C {
        let last = out.len() - 1;
        out[last] = out[last] / 2 + 1;
    }
    GlobalDims(out)
}

/// Inverse of [`hat_dims`] for real transforms; the parity of the original
/// last axis is not recoverable from the spectrum and must be supplied.
pub fn unhat_dims(hatted: &GlobalDims, last_is_odd: bool) -> GlobalDims {
    let mut out = hatted.0.clone();
    let last = out.len() - 1;
    out[last] = 2 * (out[last] - 1) + usize::from(last_is_odd);
    GlobalDims(out)
}

/// Ranks arranged on a Cartesian grid; rank ↔ coordinates is row-major.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ProcessGrid {
    shape: Vec<usize>,
}

impl ProcessGrid {
    pub fn new(shape: impl Into<Vec<usize>>) -> Result<Self> {
        let shape = shape.into();
        if shape.is_empty() || shape.contains(&0) {
            return Err(Error::InvalidDims(format!("invalid process grid {shape:?}")));
        }
        Ok(Self { shape })
    }

    /// Factor `p` ranks over `axes` grid axes: factors are non-increasing and
    /// as close to equal as possible; among equally balanced candidates the
    /// one with the larger leading factor wins.
    pub fn auto(p: usize, axes: usize) -> Result<Self> {
        if p == 0 || axes == 0 {
            return Err(Error::InvalidDims(format!(
                "cannot factor {p} ranks over {axes} axes"
            )));
        }
        let mut best: Option<Vec<usize>> = None;
        let mut current = Vec::with_capacity(axes);
        factorizations(p, axes, p, &mut current, &mut |f| {
            let spread = f[0] - f[f.len() - 1];
            let better = match &best {
                None => true,
                Some(b) => {
                    let bs = b[0] - b[b.len() - 1];
                    spread < bs || (spread == bs && f > b.as_slice())
                }
            };
            if better {
                best = Some(f.to_vec());
            }
        });
        Self::new(best.unwrap())
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn ndims(&self) -> usize {
        self.shape.len()
    }

    pub fn size(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn coords_of(&self, rank: usize) -> Vec<usize> {
        let mut rest = rank;
        let mut coords = vec![0; self.shape.len()];
        for (c, &p) in coords.iter_mut().zip(&self.shape).rev() {
            *c = rest % p;
            rest /= p;
        }
        coords
    }

    pub fn rank_of(&self, coords: &[usize]) -> usize {
        coords
            .iter()
            .zip(&self.shape)
            .fold(0, |acc, (&c, &p)| acc * p + c)
    }
}

fn factorizations(
    p: usize,
    axes: usize,
    max: usize,
    current: &mut Vec<usize>,
    visit: &mut dyn FnMut(&[usize]),
) {
    if axes == 1 {
        if p <= max {
            current.push(p);
            visit(current);
            current.pop();
        }
        return;
    }
    for f in (1..=max.min(p)).rev() {
        if p.is_multiple_of(f) {
            current.push(f);
            factorizations(p / f, axes - 1, f, current, visit);
            current.pop();
        }
    }
}

/// Ceil-block split of one axis of length `n` among `p` ranks.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockMap {
    pub len: usize,
    pub block: usize,
    pub counts: Vec<usize>,
    pub offsets: Vec<usize>,
}

impl BlockMap {
    /// Index of the rank owning element `i`.
    pub fn owner(&self, i: usize) -> usize {
        i / self.block
    }

    pub fn range(&self, r: usize) -> std::ops::Range<usize> {
        self.offsets[r]..self.offsets[r] + self.counts[r]
    }
}

pub fn block_map(n: usize, p: usize) -> BlockMap {
    assert!(p >= 1, "block_map needs at least one rank");
    let block = n.div_ceil(p).max(1);
    let offsets: Vec<usize> = (0..p).map(|r| (r * block).min(n)).collect();
    let counts = (0..p)
        .map(|r| ((r + 1) * block).min(n) - offsets[r])
        .collect();
    BlockMap {
        len: n,
        block,
        counts,
        offsets,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ElementKind {
    Real,
    Complex,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LayoutWarning {
    EmptyBlock { rank: usize },
}

/// How a (possibly partially transformed) tensor is spread over a grid.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Distribution {
    grid: ProcessGrid,
    /// Current logical length of every axis (hatted lengths once transformed).
    lengths: Vec<usize>,
    /// Grid axis splitting each tensor axis.
    axis_grid: Vec<Option<usize>>,
    hatted: Vec<bool>,
    element: ElementKind,
}

impl Distribution {
    pub fn new(
        grid: ProcessGrid,
        lengths: Vec<usize>,
        axis_grid: Vec<Option<usize>>,
        hatted: Vec<bool>,
        element: ElementKind,
    ) -> Result<Self> {
        let rank = lengths.len();
        if axis_grid.len() != rank || hatted.len() != rank {
            return Err(Error::InvalidDims("per-axis vectors differ in length".into()));
        }
        let mut used = vec![false; grid.ndims()];
        for g in axis_grid.iter().flatten() {
            if *g >= grid.ndims() || used[*g] {
                return Err(Error::GridMismatch {
                    dims: lengths.clone(),
                    grid: grid.shape().to_vec(),
                    reason: format!("grid axis {g} used twice or out of range"),
                });
            }
            used[*g] = true;
        }
        Ok(Self {
            grid,
            lengths,
            axis_grid,
            hatted,
            element,
        })
    }

    /// Layout in which tensor axis `local` is whole on every rank: axes
    /// before it are split by grid axes of the same index, axes after it by
    /// grid axis `a − 1`.
    pub(crate) fn staged(
        grid: &ProcessGrid,
        lengths: Vec<usize>,
        local: usize,
        hatted: Vec<bool>,
        element: ElementKind,
    ) -> Result<Self> {
        let g = grid.ndims();
        let axis_grid = (0..lengths.len())
            .map(|a| {
                if a < local && a < g {
                    Some(a)
                } else if a > local && a - 1 < g {
                    Some(a - 1)
                } else {
                    None
                }
            })
            .collect();
        Self::new(grid.clone(), lengths, axis_grid, hatted, element)
    }

    pub fn grid(&self) -> &ProcessGrid {
        &self.grid
    }

    pub fn lengths(&self) -> &[usize] {
        &self.lengths
    }

    pub fn axis_grid(&self) -> &[Option<usize>] {
        &self.axis_grid
    }

    pub fn hatted(&self) -> &[bool] {
        &self.hatted
    }

    pub fn element(&self) -> ElementKind {
        self.element
    }

    pub fn total(&self) -> usize {
        self.lengths.iter().product()
    }

    /// Tensor axis split by grid axis `g`, if any.
    pub fn axis_of_grid(&self, g: usize) -> Option<usize> {
        self.axis_grid.iter().position(|&x| x == Some(g))
    }

    /// True when axis 0 is local and every hat is set.
    pub fn is_frequency(&self) -> bool {
        self.axis_grid[0].is_none() && self.hatted.iter().all(|&h| h)
    }

    pub fn block_map(&self, axis: usize) -> BlockMap {
        match self.axis_grid[axis] {
            Some(g) => block_map(self.lengths[axis], self.grid.shape()[g]),
            None => block_map(self.lengths[axis], 1),
        }
    }

    /// `(offset, length)` per axis of the block owned by `rank`.
    pub fn extents(&self, rank: usize) -> Vec<(usize, usize)> {
        let coords = self.grid.coords_of(rank);
        (0..self.lengths.len())
            .map(|a| match self.axis_grid[a] {
                Some(g) => {
                    let map = block_map(self.lengths[a], self.grid.shape()[g]);
                    (map.offsets[coords[g]], map.counts[coords[g]])
                }
                None => (0, self.lengths[a]),
            })
            .collect()
    }

    pub fn local_shape(&self, rank: usize) -> Vec<usize> {
        self.extents(rank).into_iter().map(|(_, n)| n).collect()
    }

    pub fn local_len(&self, rank: usize) -> usize {
        self.local_shape(rank).iter().product()
    }

    /// Owner rank and row-major offset within the owner's block.
    pub fn local_index(&self, coord: &[usize]) -> Result<(usize, usize)> {
        if coord.len() != self.lengths.len() || coord.iter().zip(&self.lengths).any(|(c, n)| c >= n)
        {
            return Err(Error::OutOfRange {
                coord: coord.to_vec(),
                dims: self.lengths.clone(),
            });
        }
        let mut grid_coords = vec![0; self.grid.ndims()];
        for (a, g) in self.axis_grid.iter().enumerate() {
            if let Some(g) = g {
                grid_coords[*g] = self.block_map(a).owner(coord[a]);
            }
        }
        let rank = self.grid.rank_of(&grid_coords);
        let offset = self
            .extents(rank)
            .iter()
            .zip(coord)
            .fold(0, |acc, (&(off, n), &c)| acc * n + (c - off));
        Ok((rank, offset))
    }

    /// Global coordinates of every element owned by `rank`, in storage order.
    pub fn owned_coords(&self, rank: usize) -> Vec<Vec<usize>> {
        let ext = self.extents(rank);
        let count: usize = ext.iter().map(|e| e.1).product();
        let mut out = Vec::with_capacity(count);
        let mut idx = vec![0usize; ext.len()];
        for _ in 0..count {
            out.push(idx.iter().zip(&ext).map(|(i, e)| e.0 + i).collect());
            for a in (0..ext.len()).rev() {
                idx[a] += 1;
                if idx[a] < ext[a].1 {
                    break;
                }
                idx[a] = 0;
            }
        }
        out
    }

    pub fn warnings(&self) -> Vec<LayoutWarning> {
        (0..self.grid.size())
            .filter(|&r| self.local_len(r) == 0)
            .map(|rank| LayoutWarning::EmptyBlock { rank })
            .collect()
    }
}

fn check_grid(dims: &GlobalDims, grid: &ProcessGrid) -> Result<()> {
    if grid.ndims() >= dims.rank() {
        return Err(Error::GridMismatch {
            dims: dims.as_slice().to_vec(),
            grid: grid.shape().to_vec(),
            reason: "grid must have fewer axes than the tensor".into(),
        });
    }
    if grid.ndims() == 1 && grid.size() > dims[0] {
        return Err(Error::SlabTooManyRanks {
            ranks: grid.size(),
            n0: dims[0],
        });
    }
    Ok(())
}

/// Input layout of a forward transform: `N0/P0 × … × N_{g-1}/P_{g-1} × … × N_d`.
pub fn spatial_layout(dims: &GlobalDims, grid: &ProcessGrid, kind: TransformKind) -> Result<Distribution> {
    check_grid(dims, grid)?;
    let element = match kind {
        TransformKind::C2C => ElementKind::Complex,
        TransformKind::R2C | TransformKind::C2R => ElementKind::Real,
    };
    Distribution::staged(
        grid,
        dims.as_slice().to_vec(),
        dims.rank() - 1,
        vec![false; dims.rank()],
        element,
    )
}

/// Output layout of a forward transform: `N̂0 × N̂1/P0 × … × N̂_g/P_{g-1} × …`.
pub fn frequency_layout(dims: &GlobalDims, grid: &ProcessGrid, kind: TransformKind) -> Result<Distribution> {
    check_grid(dims, grid)?;
    let hat = hat_dims(dims, kind);
    Distribution::staged(
        grid,
        hat.as_slice().to_vec(),
        0,
        vec![true; dims.rank()],
        ElementKind::Complex,
    )
}
