use std::time::Instant;

use num_complex::Complex;

use super::{ExchangeMode, ExchangeOptions, ExchangeSchedule, StagingArena};
use crate::layout::block_map;
use crate::scalar::encode_complex;
use crate::timing::TimingBreakdown;
use crate::transport::{Communicator, PendingRecv, TAG_EXCHANGE};
use crate::{Error, Result, Scalar};

/// Exchanges `send` (one section per rank, in rank order) using the strategy
/// in `options`.
pub fn exchange<T: Scalar>(
    comm: &Communicator,
    send: &[Complex<T>],
    send_counts: &[usize],
    recv_counts: &[usize],
    options: &ExchangeOptions,
    timing: &mut TimingBreakdown,
) -> Result<Vec<Complex<T>>> {
    match options.mode {
        ExchangeMode::Direct => all_to_all(comm, send, send_counts, recv_counts, timing),
        ExchangeMode::Staged => staged_all_to_all(comm, send, send_counts, recv_counts, timing),
        ExchangeMode::Pipelined => {
            let schedule = ExchangeSchedule::rotating(
                comm.rank(),
                comm.size(),
                options.chunks,
                options.staging_buffers,
            )?;
            let mut arena = StagingArena::new(options.staging_buffers, comm.cost_model().copied())?;
            pipelined_all_to_all(comm, send, send_counts, recv_counts, &mut arena, &schedule, timing)
        }
    }
}

fn offsets(counts: &[usize]) -> Vec<usize> {
    let mut at = 0;
    counts
        .iter()
        .map(|c| {
            let o = at;
            at += c;
            o
        })
        .collect()
}

fn check_counts(comm: &Communicator, len: usize, send: &[usize], recv: &[usize]) -> Result<()> {
    let p = comm.size();
    if send.len() != p || recv.len() != p {
        return Err(Error::CountMismatch(format!(
            "{} send and {} receive counts for {p} ranks",
            send.len(),
            recv.len()
        )));
    }
    let total: usize = send.iter().sum();
    if total != len {
        return Err(Error::CountMismatch(format!(
            "send counts cover {total} elements, buffer holds {len}"
        )));
    }
    Ok(())
}

fn zeros<T: Scalar>(n: usize) -> Vec<Complex<T>> {
    vec![Complex::new(T::zero(), T::zero()); n]
}

fn decode_into<T: Scalar>(bytes: &[u8], dst: &mut [Complex<T>], source: usize) -> Result<()> {
    let w = T::BYTES;
    if bytes.len() != dst.len() * 2 * w {
        return Err(Error::CountMismatch(format!(
            "expected {} elements from rank {source}, got {} bytes",
            dst.len(),
            bytes.len()
        )));
    }
    for (c, b) in dst.iter_mut().zip(bytes.chunks_exact(2 * w)) {
        *c = Complex::new(T::read_le(b), T::read_le(&b[w..]));
    }
    Ok(())
}

fn copy_self<T: Scalar>(
    comm: &Communicator,
    send: &[Complex<T>],
    send_counts: &[usize],
    recv_counts: &[usize],
    out: &mut [Complex<T>],
) -> Result<()> {
    let me = comm.rank();
    if send_counts[me] != recv_counts[me] {
        return Err(Error::CountMismatch(format!(
            "rank {me} sends itself {} elements but expects {}",
            send_counts[me], recv_counts[me]
        )));
    }
    let so = offsets(send_counts)[me];
    let ro = offsets(recv_counts)[me];
    let n = send_counts[me];
    out[ro..ro + n].copy_from_slice(&send[so..so + n]);
    Ok(())
}

/// Splits the time `end − t0` into staging and wire shares.
fn attribute(
    comm: &Communicator,
    t0: f64,
    end: f64,
    staging: f64,
    wall_start: Instant,
    timing: &mut TimingBreakdown,
) {
    let elapsed = if comm.cost_model().is_some() {
        comm.advance_to(end);
        end - t0
    } else {
        wall_start.elapsed().as_secs_f64()
    };
    let staging = staging.clamp(0.0, elapsed);
    timing.staging_copy += staging;
    timing.wire_comm += elapsed - staging;
}

/// Section `j` of this rank's buffer ends up as section `rank` of rank `j`'s
/// result. All receives are posted before the first send; the rank's own
/// section is copied without touching the transport.
pub fn all_to_all<T: Scalar>(
    comm: &Communicator,
    send: &[Complex<T>],
    send_counts: &[usize],
    recv_counts: &[usize],
    timing: &mut TimingBreakdown,
) -> Result<Vec<Complex<T>>> {
    check_counts(comm, send.len(), send_counts, recv_counts)?;
    let wall = Instant::now();
    let t0 = comm.now();
    let (p, me) = (comm.size(), comm.rank());
    let recvs = post_whole(comm, recv_counts)?;
    let so = offsets(send_counts);
    let mut end = t0;
    for j in 1..p {
        let d = (me + j) % p;
        if send_counts[d] > 0 {
            let payload = encode_complex(&send[so[d]..so[d] + send_counts[d]]);
            end = end.max(comm.isend_at(d, TAG_EXCHANGE, payload, t0)?.completes_at());
        }
    }
    let mut out = zeros(recv_counts.iter().sum());
    copy_self(comm, send, send_counts, recv_counts, &mut out)?;
    let ro = offsets(recv_counts);
    for (s, r) in recvs {
        let got = r.wait_detached(comm)?;
        decode_into(&got.payload, &mut out[ro[s]..ro[s] + recv_counts[s]], s)?;
        end = end.max(got.arrival);
    }
    attribute(comm, t0, end, 0.0, wall, timing);
    Ok(out)
}

/// Receives for whole sections, in rotating source order.
fn post_whole(comm: &Communicator, recv_counts: &[usize]) -> Result<Vec<(usize, PendingRecv)>> {
    let (p, me) = (comm.size(), comm.rank());
    (1..p)
        .map(|j| (me + p - j) % p)
        .filter(|&s| recv_counts[s] > 0)
        .map(|s| Ok((s, comm.irecv_internal(s, TAG_EXCHANGE)?)))
        .collect()
}

/// Blocking baseline for the pipelined exchange: every outgoing section is
/// staged before any send, every incoming section is staged after the last
/// receive completes.
pub fn staged_all_to_all<T: Scalar>(
    comm: &Communicator,
    send: &[Complex<T>],
    send_counts: &[usize],
    recv_counts: &[usize],
    timing: &mut TimingBreakdown,
) -> Result<Vec<Complex<T>>> {
    check_counts(comm, send.len(), send_counts, recv_counts)?;
    let wall = Instant::now();
    let t0 = comm.now();
    let (p, me) = (comm.size(), comm.rank());
    let width = 2 * T::BYTES;
    let stage = |elements: usize| comm.cost_model().map_or(0.0, |c| c.staging_time(elements * width));
    let recvs = post_whole(comm, recv_counts)?;
    let so = offsets(send_counts);

    let copy_start = Instant::now();
    let staged: Vec<(usize, Vec<u8>)> = (1..p)
        .map(|j| (me + j) % p)
        .filter(|&d| send_counts[d] > 0)
        .map(|d| (d, encode_complex(&send[so[d]..so[d] + send_counts[d]])))
        .collect();
    let mut wall_staging = copy_start.elapsed().as_secs_f64();
    let out_elems: usize = send_counts.iter().sum::<usize>() - send_counts[me];
    let stage_in = stage(out_elems);
    let depart = t0 + stage_in;

    let mut last = depart;
    for (d, payload) in staged {
        last = last.max(comm.isend_at(d, TAG_EXCHANGE, payload, depart)?.completes_at());
    }
    let mut out = zeros(recv_counts.iter().sum());
    copy_self(comm, send, send_counts, recv_counts, &mut out)?;
    let mut received = Vec::with_capacity(recvs.len());
    let mut arrived = depart;
    for (s, r) in recvs {
        let got = r.wait_detached(comm)?;
        arrived = arrived.max(got.arrival);
        received.push((s, got.payload));
    }
    let ro = offsets(recv_counts);
    let copy_start = Instant::now();
    for (s, payload) in received {
        decode_into(&payload, &mut out[ro[s]..ro[s] + recv_counts[s]], s)?;
    }
    wall_staging += copy_start.elapsed().as_secs_f64();
    let in_elems: usize = recv_counts.iter().sum::<usize>() - recv_counts[me];
    let stage_out = stage(in_elems);
    let end = (arrived + stage_out).max(last);

    let staging = if comm.cost_model().is_some() {
        stage_in + stage_out
    } else {
        wall_staging
    };
    attribute(comm, t0, end, staging, wall, timing);
    Ok(out)
}

/// Chunked exchange following `schedule`: receives are posted first, then
/// each chunk is staged into a buffer from `arena` and sent as soon as its
/// copy finishes; each received chunk is staged out on arrival. The result
/// is identical to [`all_to_all`].
pub fn pipelined_all_to_all<T: Scalar>(
    comm: &Communicator,
    send: &[Complex<T>],
    send_counts: &[usize],
    recv_counts: &[usize],
    arena: &mut StagingArena,
    schedule: &ExchangeSchedule,
    timing: &mut TimingBreakdown,
) -> Result<Vec<Complex<T>>> {
    check_counts(comm, send.len(), send_counts, recv_counts)?;
    if schedule.size() != comm.size() || schedule.rank() != comm.rank() {
        return Err(Error::Config(format!(
            "schedule for rank {} of {} used on rank {} of {}",
            schedule.rank(),
            schedule.size(),
            comm.rank(),
            comm.size()
        )));
    }
    if arena.buffers() < schedule.buffers() {
        return Err(Error::ArenaExhausted(format!(
            "schedule uses {} staging buffers, arena has {}",
            schedule.buffers(),
            arena.buffers()
        )));
    }
    let wall = Instant::now();
    let t0 = comm.now();
    arena.start(t0);
    let k = schedule.chunks();
    let width = 2 * T::BYTES;
    let steps = schedule.steps();
    let so = offsets(send_counts);
    let ro = offsets(recv_counts);
    let send_chunk = |s: usize, c: usize| {
        let r = block_map(send_counts[s], k).range(c);
        so[s] + r.start..so[s] + r.end
    };
    let recv_chunk = |s: usize, c: usize| {
        let r = block_map(recv_counts[s], k).range(c);
        ro[s] + r.start..ro[s] + r.end
    };

    let mut recvs = Vec::with_capacity(steps.len());
    for st in &steps {
        let range = recv_chunk(st.recv_from, st.chunk);
        if !range.is_empty() {
            recvs.push((st.recv_from, range, comm.irecv_internal(st.recv_from, TAG_EXCHANGE)?));
        }
    }

    let mut out = zeros(recv_counts.iter().sum());
    copy_self(comm, send, send_counts, recv_counts, &mut out)?;

    let mut wall_staging = 0.0;
    let mut first_departure = None;
    let mut end = t0;
    for st in &steps {
        let range = send_chunk(st.send_to, st.chunk);
        if range.is_empty() {
            continue;
        }
        arena.acquire(st.buffer)?;
        let copy_start = Instant::now();
        let (payload, ready) = arena.stage_in(st.buffer, |buf| {
            buf.reserve(range.len() * width);
            for c in &send[range.clone()] {
                c.re.write_le(buf);
                c.im.write_le(buf);
            }
        });
        wall_staging += copy_start.elapsed().as_secs_f64();
        first_departure.get_or_insert(ready);
        let sent = comm.isend_at(st.send_to, TAG_EXCHANGE, payload, ready)?;
        arena.release(st.buffer, sent.completes_at());
        end = end.max(sent.completes_at());
    }

    let mut last_arrival = None::<f64>;
    for (s, range, r) in recvs {
        let got = r.wait_detached(comm)?;
        let copy_start = Instant::now();
        decode_into(&got.payload, &mut out[range], s)?;
        wall_staging += copy_start.elapsed().as_secs_f64();
        let done = arena.stage_out(got.payload.len(), got.arrival);
        last_arrival = Some(last_arrival.map_or(got.arrival, |a| a.max(got.arrival)));
        end = end.max(done);
    }

    let staging = if comm.cost_model().is_some() {
        let lead = first_departure.map_or(0.0, |f| f - t0);
        let tail = last_arrival.map_or(0.0, |a| (end - a).max(0.0));
        lead + tail
    } else {
        wall_staging
    };
    attribute(comm, t0, end, staging, wall, timing);
    Ok(out)
}
