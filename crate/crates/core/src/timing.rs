use serde::{Deserialize, Serialize};

use std::time::Instant;

use crate::transport::{Communicator, CostModel};
use crate::Result;

/// Runs `f`, adding its cost to `bucket`: the modelled cost (also charged to
/// the rank clock) under a cost model, measured wall time otherwise.
pub(crate) fn metered<R>(
    comm: &Communicator,
    bucket: &mut f64,
    model: impl FnOnce(&CostModel) -> f64,
    f: impl FnOnce() -> R,
) -> R {
    match comm.cost_model() {
        Some(c) => {
            let s = model(c);
            *bucket += comm.charge(s);
            f()
        }
        None => {
            let start = Instant::now();
            let out = f();
            *bucket += start.elapsed().as_secs_f64();
            out
        }
    }
}

/// Seconds spent per activity during one plan execution. Virtual seconds
/// under a cost model, wall seconds otherwise.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct TimingBreakdown {
    pub local_fft: f64,
    pub pack: f64,
    pub unpack: f64,
    pub staging_copy: f64,
    pub wire_comm: f64,
    pub total: f64,
}

impl TimingBreakdown {
    pub fn components(&self) -> [f64; 5] {
        [
            self.local_fft,
            self.pack,
            self.unpack,
            self.staging_copy,
            self.wire_comm,
        ]
    }

    pub fn component_sum(&self) -> f64 {
        self.components().iter().sum()
    }

    /// Communication share: everything spent inside exchanges.
    pub fn transpose_time(&self) -> f64 {
        self.pack + self.unpack + self.staging_copy + self.wire_comm
    }

    pub fn accumulate(&mut self, other: &TimingBreakdown) {
        self.local_fft += other.local_fft;
        self.pack += other.pack;
        self.unpack += other.unpack;
        self.staging_copy += other.staging_copy;
        self.wire_comm += other.wire_comm;
        self.total += other.total;
    }

    /// Field-wise maximum.
    pub fn max(&self, other: &TimingBreakdown) -> TimingBreakdown {
        TimingBreakdown {
            local_fft: self.local_fft.max(other.local_fft),
            pack: self.pack.max(other.pack),
            unpack: self.unpack.max(other.unpack),
            staging_copy: self.staging_copy.max(other.staging_copy),
            wire_comm: self.wire_comm.max(other.wire_comm),
            total: self.total.max(other.total),
        }
    }

    fn to_bytes(self) -> Vec<u8> {
        let mut out = Vec::with_capacity(48);
        for v in self.components().into_iter().chain([self.total]) {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    fn from_bytes(b: &[u8]) -> Self {
        let f = |i: usize| f64::from_le_bytes(b[8 * i..8 * i + 8].try_into().unwrap());
        Self {
            local_fft: f(0),
            pack: f(1),
            unpack: f(2),
            staging_copy: f(3),
            wire_comm: f(4),
            total: f(5),
        }
    }

    /// Field-wise maximum over all members of `comm`. Collective.
    pub fn reduce_max(&self, comm: &Communicator) -> Result<TimingBreakdown> {
        Ok(comm
            .allgather_bytes(&self.to_bytes())?
            .iter()
            .map(|b| Self::from_bytes(b))
            .fold(TimingBreakdown::default(), |acc, t| acc.max(&t)))
    }
}
