//! Rank communication.
//!
//! A [`Communicator`] offers non-blocking point-to-point messages matched by
//! `(source, tag)` in FIFO order, collective splitting into
//! sub-communicators, and a few untimed control collectives. Sends are eager:
//! the payload is handed to the transport immediately and `isend` never
//! blocks.
//!
//! Backends:
//! * in-process ([`spawn_world`]): one thread per rank sharing mailboxes;
//! * the same harness with a [`CostModel`], where every rank carries a
//!   virtual clock advanced by messages and local work;
//! * TCP ([`socket`]): length-prefixed frames between processes.

mod local;
mod mailbox;
pub mod socket;

use std::cell::Cell;
use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

pub use mailbox::{Envelope, Mailbox};

use crate::layout::ProcessGrid;
use crate::{Error, Result};

/// User tags must stay below this value; the range above is reserved.
pub const USER_TAG_LIMIT: u32 = 0xE000;
pub(crate) const TAG_EXCHANGE: u32 = 0xE001;
pub(crate) const TAG_SPLIT: u32 = 0xF001;
pub(crate) const TAG_ALLGATHER: u32 = 0xF002;
pub(crate) const TAG_GATHER: u32 = 0xF003;
pub(crate) const TAG_BCAST: u32 = 0xF004;

/// Delivery mechanism for one rank; addresses are world ranks.
pub trait Transport: Send + Sync {
    fn rank(&self) -> usize;
    fn size(&self) -> usize;
    fn send(&self, dest: usize, env: Envelope) -> Result<()>;
    fn mailbox(&self) -> &Mailbox;
}

/// Latency/bandwidth model driving the virtual clocks.
///
/// `staging_inv_bandwidth` meters the copy between device and host buffers
/// that precedes a send and follows a receive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostModel {
    /// Seconds per message.
    pub latency: f64,
    /// Seconds per byte on the wire.
    pub inv_bandwidth: f64,
    /// Seconds per byte for a staging copy.
    pub staging_inv_bandwidth: f64,
    /// Seconds per floating-point operation in local FFTs.
    pub flop_time: f64,
    /// Seconds per byte for local reshuffles (pack, unpack, transposes).
    pub mem_inv_bandwidth: f64,
}

impl Default for CostModel {
    fn default() -> Self {
        Self {
            latency: 1e-6,
            inv_bandwidth: 1e-10,
            staging_inv_bandwidth: 1.6e-10,
            flop_time: 1e-10,
            mem_inv_bandwidth: 5e-11,
        }
    }
}

impl CostModel {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            self.latency,
            self.inv_bandwidth,
            self.staging_inv_bandwidth,
            self.flop_time,
            self.mem_inv_bandwidth,
        ];
        if fields.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::Config(format!("cost model parameters must be >= 0: {self:?}")));
        }
        Ok(())
    }

    pub fn message_time(&self, bytes: usize) -> f64 {
        self.latency + bytes as f64 * self.inv_bandwidth
    }

    pub fn wire_time(&self, bytes: usize) -> f64 {
        bytes as f64 * self.inv_bandwidth
    }

    pub fn staging_time(&self, bytes: usize) -> f64 {
        bytes as f64 * self.staging_inv_bandwidth
    }

    pub fn copy_time(&self, bytes: usize) -> f64 {
        bytes as f64 * self.mem_inv_bandwidth
    }
}

#[derive(Debug, Clone)]
pub struct WorldOptions {
    /// Receive timeout after which a wait reports a deadlock.
    pub timeout: Duration,
    pub cost_model: Option<CostModel>,
    /// Randomly delays deliveries to shake out ordering assumptions.
    pub jitter_seed: Option<u64>,
}

impl Default for WorldOptions {
    fn default() -> Self {
        Self {
            timeout: Duration::from_secs(30),
            cost_model: None,
            jitter_seed: None,
        }
    }
}

impl WorldOptions {
    pub fn with_cost_model(cost: CostModel) -> Self {
        Self {
            cost_model: Some(cost),
            ..Self::default()
        }
    }
}

/// Per-rank time source shared by a rank's communicators.
struct RankClock {
    cost: Option<CostModel>,
    virtual_now: Mutex<f64>,
    epoch: Instant,
}

/// A rank's handle on a group of ranks. Owned by exactly one worker.
pub struct Communicator {
    transport: Arc<dyn Transport>,
    members: Arc<[usize]>,
    rank: usize,
    ctx: u16,
    splits: Cell<u32>,
    clock: Arc<RankClock>,
    timeout: Duration,
}

/// Handle for a posted send. Sends are eager, so it only carries the virtual
/// completion time.
#[must_use]
pub struct PendingSend {
    completes_at: f64,
}

/// Handle for a posted receive.
#[must_use]
pub struct PendingRecv {
    source: usize,
    tag: u32,
}

/// A completed receive with its virtual arrival time.
pub struct Received {
    pub payload: Vec<u8>,
    pub arrival: f64,
}

impl PendingSend {
    /// Virtual time at which the payload has left the sender.
    pub fn completes_at(&self) -> f64 {
        self.completes_at
    }

    pub fn wait(self, comm: &Communicator) -> Result<()> {
        comm.advance_to(self.completes_at);
        Ok(())
    }
}

impl PendingRecv {
    pub fn source(&self) -> usize {
        self.source
    }

    /// Blocks for the matching message and advances the virtual clock to its
    /// arrival.
    pub fn wait(self, comm: &Communicator) -> Result<Vec<u8>> {
        let got = self.wait_detached(comm)?;
        comm.advance_to(got.arrival);
        Ok(got.payload)
    }

    /// Blocks for the matching message without touching the clock.
    pub fn wait_detached(self, comm: &Communicator) -> Result<Received> {
        let env = comm.take(self.source, self.tag)?;
        let arrival = match &comm.clock.cost {
            Some(cost) => env.sent_at + cost.message_time(env.payload.len()),
            None => 0.0,
        };
        Ok(Received {
            payload: env.payload,
            arrival,
        })
    }
}

impl Communicator {
    pub(crate) fn from_transport(
        transport: Arc<dyn Transport>,
        cost: Option<CostModel>,
        timeout: Duration,
    ) -> Self {
        let size = transport.size();
        let rank = transport.rank();
        Self {
            transport,
            members: (0..size).collect::<Vec<_>>().into(),
            rank,
            ctx: 0,
            splits: Cell::new(0),
            clock: Arc::new(RankClock {
                cost,
                virtual_now: Mutex::new(0.0),
                epoch: Instant::now(),
            }),
            timeout,
        }
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn size(&self) -> usize {
        self.members.len()
    }

    pub fn world_rank(&self) -> usize {
        self.members[self.rank]
    }

    pub fn cost_model(&self) -> Option<&CostModel> {
        self.clock.cost.as_ref()
    }

    /// Current time: virtual seconds under a cost model, otherwise wall
    /// seconds since the world started.
    pub fn now(&self) -> f64 {
        if self.clock.cost.is_some() {
            *self.clock.virtual_now.lock().unwrap()
        } else {
            self.clock.epoch.elapsed().as_secs_f64()
        }
    }

    /// Elapsed virtual seconds, or `None` without a cost model.
    pub fn simulated_clock(&self) -> Option<f64> {
        self.clock.cost.map(|_| *self.clock.virtual_now.lock().unwrap())
    }

    /// Moves the virtual clock forward to `t` (never backwards).
    pub fn advance_to(&self, t: f64) {
        if self.clock.cost.is_some() {
            let mut now = self.clock.virtual_now.lock().unwrap();
            if t > *now {
                *now = t;
            }
        }
    }

    /// Charges `seconds` of local work; returns the amount charged (zero
    /// without a cost model).
    pub fn charge(&self, seconds: f64) -> f64 {
        if self.clock.cost.is_some() {
            *self.clock.virtual_now.lock().unwrap() += seconds;
            seconds
        } else {
            0.0
        }
    }

    fn check_rank(&self, r: usize) -> Result<()> {
        if r >= self.size() {
            return Err(Error::InvalidRank {
                rank: r,
                size: self.size(),
            });
        }
        Ok(())
    }

    fn wire_tag(&self, tag: u32) -> u32 {
        (u32::from(self.ctx) << 16) | (tag & 0xFFFF)
    }

    fn take(&self, source: usize, tag: u32) -> Result<Envelope> {
        self.transport
            .mailbox()
            .take(self.world_rank(), self.members[source], tag, self.timeout)
    }

    pub fn isend(&self, dest: usize, tag: u32, payload: Vec<u8>) -> Result<PendingSend> {
        if tag >= USER_TAG_LIMIT {
            return Err(Error::InvalidTag(tag));
        }
        self.isend_at(dest, tag, payload, self.now())
    }

    pub fn irecv(&self, source: usize, tag: u32) -> Result<PendingRecv> {
        if tag >= USER_TAG_LIMIT {
            return Err(Error::InvalidTag(tag));
        }
        self.irecv_internal(source, tag)
    }

    /// Send stamped with an explicit virtual departure time.
    pub(crate) fn isend_at(
        &self,
        dest: usize,
        tag: u32,
        payload: Vec<u8>,
        depart: f64,
    ) -> Result<PendingSend> {
        self.check_rank(dest)?;
        let completes_at = match &self.clock.cost {
            Some(c) => depart + c.wire_time(payload.len()),
            None => 0.0,
        };
        let env = Envelope {
            source: self.world_rank(),
            tag: self.wire_tag(tag),
            sent_at: if self.clock.cost.is_some() { depart } else { 0.0 },
            payload,
        };
        self.transport.send(self.members[dest], env)?;
        Ok(PendingSend { completes_at })
    }

    pub(crate) fn irecv_internal(&self, source: usize, tag: u32) -> Result<PendingRecv> {
        self.check_rank(source)?;
        Ok(PendingRecv {
            source,
            tag: self.wire_tag(tag),
        })
    }

    fn send_control(&self, dest: usize, tag: u32, payload: Vec<u8>) -> Result<()> {
        self.isend_at(dest, tag, payload, 0.0).map(|_| ())
    }

    fn recv_control(&self, source: usize, tag: u32) -> Result<Vec<u8>> {
        Ok(self.irecv_internal(source, tag)?.wait_detached(self)?.payload)
    }

    /// Every member's payload, indexed by rank. Untimed.
    pub fn allgather_bytes(&self, payload: &[u8]) -> Result<Vec<Vec<u8>>> {
        self.allgather_tagged(payload, TAG_ALLGATHER)
    }

    fn allgather_tagged(&self, payload: &[u8], tag: u32) -> Result<Vec<Vec<u8>>> {
        for r in 0..self.size() {
            if r != self.rank {
                self.send_control(r, tag, payload.to_vec())?;
            }
        }
        (0..self.size())
            .map(|r| {
                if r == self.rank {
                    Ok(payload.to_vec())
                } else {
                    self.recv_control(r, tag)
                }
            })
            .collect()
    }

    /// Payloads gathered on `root` (rank order); `None` elsewhere. Untimed.
    pub fn gather_bytes(&self, root: usize, payload: Vec<u8>) -> Result<Option<Vec<Vec<u8>>>> {
        self.check_rank(root)?;
        if self.rank != root {
            self.send_control(root, TAG_GATHER, payload)?;
            return Ok(None);
        }
        let mut own = Some(payload);
        (0..self.size())
            .map(|r| {
                if r == root {
                    Ok(own.take().unwrap())
                } else {
                    self.recv_control(r, TAG_GATHER)
                }
            })
            .collect::<Result<Vec<_>>>()
            .map(Some)
    }

    /// Sends one payload per rank from `root`; returns this rank's part.
    pub fn scatter_bytes(&self, root: usize, parts: Option<Vec<Vec<u8>>>) -> Result<Vec<u8>> {
        self.check_rank(root)?;
        if self.rank == root {
            let parts = parts.ok_or_else(|| Error::Config("scatter root needs payloads".into()))?;
            if parts.len() != self.size() {
                return Err(Error::CountMismatch(format!(
                    "scatter of {} parts over {} ranks",
                    parts.len(),
                    self.size()
                )));
            }
            let mut mine = Vec::new();
            for (r, p) in parts.into_iter().enumerate() {
                if r == root {
                    mine = p;
                } else {
                    self.send_control(r, TAG_BCAST, p)?;
                }
            }
            Ok(mine)
        } else {
            self.recv_control(root, TAG_BCAST)
        }
    }

    pub fn broadcast_bytes(&self, root: usize, payload: Option<Vec<u8>>) -> Result<Vec<u8>> {
        let parts = payload.map(|p| vec![p; self.size()]);
        self.scatter_bytes(root, parts)
    }

    /// Blocks until every member has entered. Does not move virtual clocks.
    pub fn barrier(&self) -> Result<()> {
        self.allgather_bytes(&[]).map(|_| ())
    }

    pub fn allreduce_max(&self, value: f64) -> Result<f64> {
        Ok(self
            .allgather_bytes(&value.to_le_bytes())?
            .iter()
            .map(|b| f64::from_le_bytes(b[..8].try_into().unwrap()))
            .fold(f64::NEG_INFINITY, f64::max))
    }

    pub fn allreduce_sum(&self, value: f64) -> Result<f64> {
        Ok(self
            .allgather_bytes(&value.to_le_bytes())?
            .iter()
            .map(|b| f64::from_le_bytes(b[..8].try_into().unwrap()))
            .sum())
    }

    /// Collective: members sharing `color` form a new communicator ordered by
    /// `key`, then by rank in `self`.
    pub fn split(&self, color: u64, key: i64) -> Result<Communicator> {
        let mut msg = Vec::with_capacity(16);
        msg.extend_from_slice(&color.to_le_bytes());
        msg.extend_from_slice(&key.to_le_bytes());
        let all = self.allgather_tagged(&msg, TAG_SPLIT)?;
        let mut group: Vec<(i64, usize)> = all
            .iter()
            .enumerate()
            .filter_map(|(r, b)| {
                let c = u64::from_le_bytes(b[..8].try_into().unwrap());
                let k = i64::from_le_bytes(b[8..16].try_into().unwrap());
                (c == color).then_some((k, r))
            })
            .collect();
        group.sort_unstable();
        let members: Vec<usize> = group.iter().map(|&(_, r)| self.members[r]).collect();
        let rank = group.iter().position(|&(_, r)| r == self.rank).unwrap();

        let seq = self.splits.get();
        self.splits.set(seq + 1);
        let mut h = DefaultHasher::new();
        (self.ctx, seq, color).hash(&mut h);
        let ctx = match (h.finish() & 0xFFFF) as u16 {
            0 => 1,
            c => c,
        };
        Ok(Communicator {
            transport: Arc::clone(&self.transport),
            members: members.into(),
            rank,
            ctx,
            splits: Cell::new(0),
            clock: Arc::clone(&self.clock),
            timeout: self.timeout,
        })
    }
}

/// Runs `body` on `p` in-process ranks with default options.
pub fn spawn_world<R, F>(p: usize, body: F) -> Result<Vec<R>>
where
    R: Send,
    F: Fn(Communicator) -> Result<R> + Sync,
{
    spawn_world_with(p, &WorldOptions::default(), body)
}

/// Runs `body` once per rank on its own thread and collects the results in
/// rank order. The first failure (error or panic) aborts the other ranks'
/// pending waits and is returned.
pub fn spawn_world_with<R, F>(p: usize, options: &WorldOptions, body: F) -> Result<Vec<R>>
where
    R: Send,
    F: Fn(Communicator) -> Result<R> + Sync,
{
    if p == 0 {
        return Err(Error::Config("world needs at least one rank".into()));
    }
    if let Some(c) = &options.cost_model {
        c.validate()?;
    }
    let world = local::LocalWorld::new(p);
    let comms: Vec<Communicator> = (0..p)
        .map(|r| {
            let t = local::LocalTransport::new(Arc::clone(&world), r, options.jitter_seed);
            Communicator::from_transport(Arc::new(t), options.cost_model, options.timeout)
        })
        .collect();
    run_ranks(comms, &body, || world.abort_all())
}

pub(crate) fn run_ranks<R, F>(
    comms: Vec<Communicator>,
    body: &F,
    abort: impl Fn() + Sync,
) -> Result<Vec<R>>
where
    R: Send,
    F: Fn(Communicator) -> Result<R> + Sync,
{
    let failure: Mutex<Option<Error>> = Mutex::new(None);
    let results: Vec<Option<R>> = std::thread::scope(|s| {
        let handles: Vec<_> = comms
            .into_iter()
            .enumerate()
            .map(|(rank, comm)| {
                let failure = &failure;
                let abort = &abort;
                s.spawn(move || {
                    let outcome = catch_unwind(AssertUnwindSafe(|| body(comm)));
                    let err = match outcome {
                        Ok(Ok(v)) => return Some(v),
                        Ok(Err(e)) => e,
                        Err(panic) => Error::WorkerPanic {
                            rank,
                            message: panic_message(&panic),
                        },
                    };
                    let mut slot = failure.lock().unwrap();
                    let replace = match &*slot {
                        None => true,
                        Some(Error::Aborted) => err != Error::Aborted,
                        Some(_) => false,
                    };
                    if replace {
                        *slot = Some(err);
                    }
                    drop(slot);
                    abort();
                    None
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    if let Some(err) = failure.into_inner().unwrap() {
        return Err(err);
    }
    Ok(results.into_iter().map(Option::unwrap).collect())
}

fn panic_message(panic: &Box<dyn std::any::Any + Send>) -> String {
    if let Some(s) = panic.downcast_ref::<&str>() {
        s.to_string()
    } else if let Some(s) = panic.downcast_ref::<String>() {
        s.clone()
    } else {
        "non-string panic payload".into()
    }
}

/// World communicator plus one sub-communicator per grid axis; the
/// sub-communicator for axis `g` links ranks whose coordinates differ only in
/// `g`, ranked by that coordinate.
pub struct GridComms {
    world: Communicator,
    grid: ProcessGrid,
    coords: Vec<usize>,
    axes: Vec<Communicator>,
}

impl GridComms {
    pub fn new(world: Communicator, grid: &ProcessGrid) -> Result<Self> {
        if grid.size() != world.size() {
            return Err(Error::GridMismatch {
                dims: vec![],
                grid: grid.shape().to_vec(),
                reason: format!("grid holds {} ranks, world has {}", grid.size(), world.size()),
            });
        }
        let coords = grid.coords_of(world.rank());
        let axes = (0..grid.ndims())
            .map(|g| {
                let mut others = coords.clone();
                others[g] = 0;
                let color = grid.rank_of(&others) as u64;
                world.split(color, coords[g] as i64)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            world,
            grid: grid.clone(),
            coords,
            axes,
        })
    }

    pub fn world(&self) -> &Communicator {
        &self.world
    }

    pub fn grid(&self) -> &ProcessGrid {
        &self.grid
    }

    pub fn coords(&self) -> &[usize] {
        &self.coords
    }

    pub fn rank(&self) -> usize {
        self.world.rank()
    }

    pub fn axis(&self, g: usize) -> &Communicator {
        &self.axes[g]
    }

    pub fn into_world(self) -> Communicator {
        self.world
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    #[test]
    fn single_rank_world() {
        assert_eq!(spawn_world(1, |c| Ok(c.rank())).unwrap(), vec![0]);
    }

    #[test]
    fn barrier_then_rank() {
        let out = spawn_world(4, |c| {
            c.barrier()?;
            Ok(c.rank())
        })
        .unwrap();
        assert_eq!(out, vec![0, 1, 2, 3]);
    }

    #[test]
    fn loopback_payload_is_intact() {
        let payload: Vec<u8> = (0..1024u32).map(|i| (i * 7 % 251) as u8).collect();
        let expected = payload.clone();
        let out = spawn_world(2, move |c| {
            if c.rank() == 0 {
                c.isend(1, 5, payload.clone())?.wait(&c)?;
                Ok(Vec::new())
            } else {
                c.irecv(0, 5)?.wait(&c)
            }
        })
        .unwrap();
        assert_eq!(out[1], expected);
    }

    #[test]
    fn zero_length_and_fifo() {
        let out = spawn_world(2, |c| {
            if c.rank() == 0 {
                let _ = c.isend(1, 1, vec![])?;
                let _ = c.isend(1, 2, b"A".to_vec())?;
                let _ = c.isend(1, 2, b"B".to_vec())?;
                Ok(vec![])
            } else {
                let empty = c.irecv(0, 1)?.wait(&c)?;
                let a = c.irecv(0, 2)?.wait(&c)?;
                let b = c.irecv(0, 2)?.wait(&c)?;
                Ok(vec![empty, a, b])
            }
        })
        .unwrap();
        assert_eq!(out[1], vec![vec![], b"A".to_vec(), b"B".to_vec()]);
    }

    #[test]
    fn pairwise_exchange_with_preposted_receives() {
        let out = spawn_world(4, |c| {
            let recvs: Vec<_> = (0..c.size())
                .filter(|&r| r != c.rank())
                .map(|r| c.irecv(r, 9))
                .collect::<Result<_>>()?;
            for r in (0..c.size()).filter(|&r| r != c.rank()) {
                let _ = c.isend(r, 9, vec![c.rank() as u8])?;
            }
            recvs
                .into_iter()
                .map(|p| p.wait(&c).map(|v| v[0]))
                .collect::<Result<Vec<_>>>()
        })
        .unwrap();
        for (r, got) in out.iter().enumerate() {
            let expected: Vec<u8> = (0..4).filter(|&x| x != r).map(|x| x as u8).collect();
            assert_eq!(got, &expected);
        }
    }

    #[test]
    fn invalid_rank_and_tag() {
        let out = spawn_world(2, |c| {
            let bad_rank = c.isend(5, 0, vec![]).err();
            let bad_tag = c.irecv(0, USER_TAG_LIMIT).err();
            Ok((bad_rank, bad_tag))
        })
        .unwrap();
        assert_eq!(out[0].0, Some(Error::InvalidRank { rank: 5, size: 2 }));
        assert_eq!(out[0].1, Some(Error::InvalidTag(USER_TAG_LIMIT)));
    }

    #[test]
    fn deadlock_is_detected_by_timeout() {
        let opts = WorldOptions {
            timeout: Duration::from_millis(100),
            ..WorldOptions::default()
        };
        let err = spawn_world_with(2, &opts, |c| {
            let peer = 1 - c.rank();
            c.irecv(peer, 3)?.wait(&c)
        })
        .unwrap_err();
        assert!(matches!(err, Error::Deadlock { tag, .. } if tag & 0xFFFF == 3));
    }

    #[test]
    fn tag_mismatch_is_reported() {
        let opts = WorldOptions {
            timeout: Duration::from_millis(100),
            ..WorldOptions::default()
        };
        let err = spawn_world_with(2, &opts, |c| {
            if c.rank() == 0 {
                let _ = c.isend(1, 4, vec![1])?;
                c.barrier()?;
                Ok(vec![])
            } else {
                c.irecv(0, 7)?.wait(&c)
            }
        })
        .unwrap_err();
        assert!(matches!(err, Error::TagMismatchTimeout { .. }), "{err:?}");
    }

    #[test]
    fn worker_panic_is_attributed() {
        let err = spawn_world(3, |c| {
            if c.rank() == 2 {
                panic!("boom");
            }
            c.barrier()?;
            Ok(())
        })
        .unwrap_err();
        assert_eq!(
            err,
            Error::WorkerPanic {
                rank: 2,
                message: "boom".into()
            }
        );
    }

    #[test]
    fn split_by_color() {
        let out = spawn_world(4, |c| {
            let sub = c.split((c.rank() / 2) as u64, c.rank() as i64)?;
            Ok((sub.size(), sub.rank(), sub.world_rank()))
        })
        .unwrap();
        assert_eq!(out, vec![(2, 0, 0), (2, 1, 1), (2, 0, 2), (2, 1, 3)]);
    }

    #[test]
    fn split_rows_of_2x3_grid() {
        let grid = ProcessGrid::new(vec![2, 3]).unwrap();
        let out = spawn_world(6, |c| {
            let g = GridComms::new(c, &grid)?;
            let row = g.axis(1);
            let members: Vec<usize> = row
                .allgather_bytes(&[g.rank() as u8])?
                .into_iter()
                .map(|b| b[0] as usize)
                .collect();
            Ok((row.size(), row.rank(), members))
        })
        .unwrap();
        for (r, (size, rank, members)) in out.iter().enumerate() {
            let coords = grid.coords_of(r);
            assert_eq!(*size, 3);
            assert_eq!(*rank, coords[1]);
            let expected: Vec<usize> = (0..3).map(|j| grid.rank_of(&[coords[0], j])).collect();
            assert_eq!(members, &expected);
        }
    }

    #[test]
    fn split_of_single_rank_is_identity() {
        let out = spawn_world(1, |c| {
            let s = c.split(0, 0)?;
            Ok((s.size(), s.rank()))
        })
        .unwrap();
        assert_eq!(out, vec![(1, 0)]);
    }

    #[test]
    fn sub_communicators_do_not_cross_talk() {
        let out = spawn_world(4, |c| {
            let a = c.split(0, c.rank() as i64)?;
            let b = c.split(0, -(c.rank() as i64))?;
            let peer = (a.rank() + 1) % a.size();
            let _ = a.isend(peer, 1, vec![b'a'])?;
            let _ = b.isend((b.rank() + 1) % b.size(), 1, vec![b'b'])?;
            let from_b = b.irecv((b.rank() + b.size() - 1) % b.size(), 1)?.wait(&b)?;
            let from_a = a.irecv((a.rank() + a.size() - 1) % a.size(), 1)?.wait(&a)?;
            Ok((from_a, from_b))
        })
        .unwrap();
        for (a, b) in out {
            assert_eq!((a, b), (vec![b'a'], vec![b'b']));
        }
    }

    #[test]
    fn virtual_clock_single_message() {
        let cost = CostModel {
            latency: 1e-6,
            inv_bandwidth: 1e-9,
            ..CostModel::default()
        };
        let out = spawn_world_with(2, &WorldOptions::with_cost_model(cost), |c| {
            if c.rank() == 0 {
                let _ = c.isend(1, 0, vec![0u8; 1_000_000])?;
            } else {
                c.irecv(0, 0)?.wait(&c)?;
            }
            Ok(c.simulated_clock().unwrap())
        })
        .unwrap();
        assert!((out[1] - 1.001e-3).abs() < 1e-15);
        assert_eq!(out[0], 0.0);
    }

    #[test]
    fn concurrent_messages_overlap() {
        let cost = CostModel {
            latency: 1e-6,
            inv_bandwidth: 1e-9,
            ..CostModel::default()
        };
        let out = spawn_world_with(3, &WorldOptions::with_cost_model(cost), |c| {
            match c.rank() {
                0 => {
                    let a = c.irecv(1, 0)?;
                    let b = c.irecv(2, 0)?;
                    a.wait(&c)?;
                    b.wait(&c)?;
                }
                1 => {
                    let _ = c.isend(0, 0, vec![0u8; 1000])?;
                }
                _ => {
                    let _ = c.isend(0, 0, vec![0u8; 3000])?;
                }
            }
            Ok(c.now())
        })
        .unwrap();
        let big = 1e-6 + 3000.0 * 1e-9;
        assert!((out[0] - big).abs() < 1e-18);
    }

    #[test]
    fn fifo_holds_under_jitter() {
        for seed in 0..8u64 {
            let opts = WorldOptions {
                jitter_seed: Some(seed),
                ..WorldOptions::default()
            };
            let out = spawn_world_with(4, &opts, |c| {
                for r in 0..c.size() {
                    for i in 0..20u8 {
                        let _ = c.isend(r, 2, vec![c.rank() as u8, i])?;
                    }
                }
                let mut seen = BTreeSet::new();
                for r in 0..c.size() {
                    for i in 0..20u8 {
                        let m = c.irecv(r, 2)?.wait(&c)?;
                        assert_eq!(m, vec![r as u8, i]);
                        seen.insert((r, i));
                    }
                }
                Ok(seen.len())
            })
            .unwrap();
            assert_eq!(out, vec![80; 4]);
        }
    }

    #[test]
    fn pure_bodies_are_deterministic() {
        let run = || {
            spawn_world(4, |c| {
                let all = c.allgather_bytes(&[c.rank() as u8 * 3])?;
                Ok(all.concat())
            })
            .unwrap()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn gather_scatter_and_reductions() {
        let out = spawn_world(3, |c| {
            let g = c.gather_bytes(1, vec![c.rank() as u8])?;
            let parts = g.map(|v| v.into_iter().map(|mut b| {
                b.push(9);
                b
            }).collect());
            let mine = c.scatter_bytes(1, parts)?;
            let max = c.allreduce_max(c.rank() as f64)?;
            let sum = c.allreduce_sum(1.5)?;
            Ok((mine, max, sum))
        })
        .unwrap();
        for (r, (mine, max, sum)) in out.into_iter().enumerate() {
            assert_eq!(mine, vec![r as u8, 9]);
            assert_eq!(max, 2.0);
            assert_eq!(sum, 4.5);
        }
    }
}
