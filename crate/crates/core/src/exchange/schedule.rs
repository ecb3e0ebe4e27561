use crate::transport::CostModel;
use crate::{Error, Result};

/// One chunk of the pipelined exchange, as seen by the rank that owns the
/// schedule.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChunkStep {
    /// Position in the rotation, `1..size`.
    pub step: usize,
    pub chunk: usize,
    /// Peer this chunk is sent to.
    pub send_to: usize,
    /// Peer the matching incoming chunk comes from.
    pub recv_from: usize,
    /// Staging buffer carrying the outgoing chunk.
    pub buffer: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ChunkOp {
    StageIn(usize),
    Send(usize),
    Recv(usize),
    StageOut(usize),
}

/// Rotating chunk order: at step `j` rank `i` sends to `(i + j) mod P` and
/// receives from `(i − j) mod P`. The rank's own section never enters the
/// schedule; it is copied directly.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExchangeSchedule {
    rank: usize,
    size: usize,
    chunks: usize,
    buffers: usize,
}

impl ExchangeSchedule {
    pub fn rotating(rank: usize, size: usize, chunks: usize, buffers: usize) -> Result<Self> {
        if rank >= size {
            return Err(Error::InvalidRank { rank, size });
        }
        if chunks == 0 {
            return Err(Error::Config("pipelined exchange needs at least one chunk".into()));
        }
        if buffers < 2 {
            return Err(Error::ArenaExhausted(format!(
                "pipelining needs at least two staging buffers, got {buffers}"
            )));
        }
        Ok(Self {
            rank,
            size,
            chunks,
            buffers,
        })
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn chunks(&self) -> usize {
        self.chunks
    }

    pub fn buffers(&self) -> usize {
        self.buffers
    }

    pub fn send_order(&self) -> Vec<usize> {
        (1..self.size).map(|j| (self.rank + j) % self.size).collect()
    }

    pub fn recv_order(&self) -> Vec<usize> {
        (1..self.size)
            .map(|j| (self.rank + self.size - j) % self.size)
            .collect()
    }

    pub fn steps(&self) -> Vec<ChunkStep> {
        let mut out = Vec::with_capacity((self.size - 1) * self.chunks);
        for j in 1..self.size {
            for k in 0..self.chunks {
                out.push(ChunkStep {
                    step: j,
                    chunk: k,
                    send_to: (self.rank + j) % self.size,
                    recv_from: (self.rank + self.size - j) % self.size,
                    buffer: out.len() % self.buffers,
                });
            }
        }
        out
    }

    /// Ordering constraints between chunk operations, indexed by position in
    /// [`steps`](Self::steps): each send follows its stage-in, each stage-out
    /// follows its receive, and a staging buffer is refilled only once the
    /// send that used it has completed.
    pub fn dependencies(&self) -> Vec<(ChunkOp, ChunkOp)> {
        let n = (self.size - 1) * self.chunks;
        let mut edges = Vec::with_capacity(3 * n);
        for c in 0..n {
            edges.push((ChunkOp::StageIn(c), ChunkOp::Send(c)));
            edges.push((ChunkOp::Recv(c), ChunkOp::StageOut(c)));
            if c + self.buffers < n {
                edges.push((ChunkOp::Send(c), ChunkOp::StageIn(c + self.buffers)));
            }
        }
        edges
    }
}

struct Slot {
    data: Vec<u8>,
    free_at: f64,
    in_use: bool,
}

/// Rank-private pool of staging buffers. Copies in and out are metered by
/// the cost model on two independent copy engines; without a model the
/// virtual times stay zero.
pub struct StagingArena {
    slots: Vec<Slot>,
    cost: Option<CostModel>,
    in_engine: f64,
    out_engine: f64,
}

impl StagingArena {
    pub fn new(buffers: usize, cost: Option<CostModel>) -> Result<Self> {
        if buffers < 2 {
            return Err(Error::ArenaExhausted(format!(
                "need at least two staging buffers, got {buffers}"
            )));
        }
        Ok(Self {
            slots: (0..buffers)
                .map(|_| Slot {
                    data: Vec::new(),
                    free_at: 0.0,
                    in_use: false,
                })
                .collect(),
            cost,
            in_engine: 0.0,
            out_engine: 0.0,
        })
    }

    pub fn buffers(&self) -> usize {
        self.slots.len()
    }

    /// Resets both copy engines to `t`.
    pub fn start(&mut self, t: f64) {
        self.in_engine = t;
        self.out_engine = t;
        for s in &mut self.slots {
            s.free_at = s.free_at.max(t);
        }
    }

    fn copy_cost(&self, bytes: usize) -> f64 {
        self.cost.map_or(0.0, |c| c.staging_time(bytes))
    }

    /// Claims buffer `slot`; fails if its previous contents were not released.
    pub fn acquire(&mut self, slot: usize) -> Result<()> {
        let s = self
            .slots
            .get_mut(slot)
            .ok_or_else(|| Error::ArenaExhausted(format!("no staging buffer {slot}")))?;
        if s.in_use {
            return Err(Error::ArenaExhausted(format!("staging buffer {slot} still in flight")));
        }
        s.in_use = true;
        Ok(())
    }

    /// Fills an acquired buffer. Returns the payload and the virtual time the
    /// copy finishes.
    pub fn stage_in(&mut self, slot: usize, fill: impl FnOnce(&mut Vec<u8>)) -> (Vec<u8>, f64) {
        let s = &mut self.slots[slot];
        let mut data = std::mem::take(&mut s.data);
        data.clear();
        fill(&mut data);
        let start = self.in_engine.max(s.free_at);
        let done = start + self.copy_cost(data.len());
        self.in_engine = done;
        (data, done)
    }

    /// Returns a buffer to the pool once its send completes at `at`.
    pub fn release(&mut self, slot: usize, at: f64) {
        let s = &mut self.slots[slot];
        s.in_use = false;
        s.free_at = at;
    }

    /// Meters the copy of a received chunk that arrived at `arrival`;
    /// returns the time it finishes.
    pub fn stage_out(&mut self, bytes: usize, arrival: f64) -> f64 {
        let done = self.out_engine.max(arrival) + self.copy_cost(bytes);
        self.out_engine = done;
        done
    }
}
