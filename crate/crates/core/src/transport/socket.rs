//! TCP backend.
//!
//! Every pair of ranks shares one connection. A frame is the 4-byte magic
//! `DFT1`, then `u32` source, `u32` tag and `u64` payload length (all
//! little-endian), then the payload. Rank `i` accepts connections from ranks
//! above it and dials ranks below it; the first frame on each connection is
//! a hello carrying the dialer's rank.

use std::io::{BufReader, Read, Write};
use std::net::{Shutdown, SocketAddr, TcpListener, TcpStream};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use super::mailbox::{Envelope, Mailbox};
use super::{run_ranks, Communicator, Transport, WorldOptions};
use crate::{Error, Result};

pub const FRAME_MAGIC: [u8; 4] = *b"DFT1";
const HELLO_TAG: u32 = u32::MAX;
const HEADER_LEN: usize = 20;

pub fn encode_frame(source: u32, tag: u32, payload: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + payload.len());
    out.extend_from_slice(&FRAME_MAGIC);
    out.extend_from_slice(&source.to_le_bytes());
    out.extend_from_slice(&tag.to_le_bytes());
    out.extend_from_slice(&(payload.len() as u64).to_le_bytes());
    out.extend_from_slice(payload);
    out
}

/// Reads one frame; `Ok(None)` on a clean end of stream.
pub fn read_frame(reader: &mut impl Read) -> Result<Option<(u32, u32, Vec<u8>)>> {
    let mut header = [0u8; HEADER_LEN];
    let mut filled = 0;
    while filled < HEADER_LEN {
        match reader.read(&mut header[filled..])? {
            0 if filled == 0 => return Ok(None),
            0 => {
                return Err(Error::TruncatedFile {
                    expected: HEADER_LEN,
                    found: filled,
                })
            }
            n => filled += n,
        }
    }
    let magic: [u8; 4] = header[..4].try_into().unwrap();
    if magic != FRAME_MAGIC {
        return Err(Error::BadMagic(magic));
    }
    let source = u32::from_le_bytes(header[4..8].try_into().unwrap());
    let tag = u32::from_le_bytes(header[8..12].try_into().unwrap());
    let len = u64::from_le_bytes(header[12..20].try_into().unwrap()) as usize;
    let mut payload = vec![0u8; len];
    reader.read_exact(&mut payload).map_err(|_| Error::TruncatedFile {
        expected: len,
        found: 0,
    })?;
    Ok(Some((source, tag, payload)))
}

/// One rank's endpoint in a fully connected TCP mesh.
pub struct SocketTransport {
    rank: usize,
    size: usize,
    peers: Vec<Option<Mutex<TcpStream>>>,
    mailbox: Arc<Mailbox>,
}

impl SocketTransport {
    /// Builds the mesh. `hosts[r]` is the address rank `r` listens on;
    /// `listener` may supply an already bound socket for this rank.
    pub fn connect(
        hosts: &[SocketAddr],
        rank: usize,
        listener: Option<TcpListener>,
        timeout: Duration,
    ) -> Result<Self> {
        let size = hosts.len();
        if rank >= size {
            return Err(Error::InvalidRank { rank, size });
        }
        let listener = match listener {
            Some(l) => l,
            None => TcpListener::bind(hosts[rank])?,
        };
        let mut peers: Vec<Option<TcpStream>> = (0..size).map(|_| None).collect();

        for (r, addr) in hosts.iter().enumerate().take(rank) {
            let stream = dial(*addr, timeout)?;
            stream.set_nodelay(true)?;
            (&stream).write_all(&encode_frame(rank as u32, HELLO_TAG, &[]))?;
            peers[r] = Some(stream);
        }
        for _ in rank + 1..size {
            let (stream, _) = listener.accept()?;
            stream.set_nodelay(true)?;
            let mut reader = &stream;
            let (peer, tag, _) = read_frame(&mut reader)?
                .ok_or_else(|| Error::Transport("peer closed during handshake".into()))?;
            let peer = peer as usize;
            if tag != HELLO_TAG || peer <= rank || peer >= size || peers[peer].is_some() {
                return Err(Error::Transport(format!("unexpected hello from rank {peer}")));
            }
            peers[peer] = Some(stream);
        }

        let mailbox = Arc::new(Mailbox::new());
        for (r, stream) in peers.iter().enumerate() {
            if let Some(stream) = stream {
                let mut reader = BufReader::new(stream.try_clone()?);
                let mailbox = Arc::clone(&mailbox);
                thread::spawn(move || loop {
                    match read_frame(&mut reader) {
                        Ok(Some((source, tag, payload))) => mailbox.push(Envelope {
                            source: source as usize,
                            tag,
                            sent_at: 0.0,
                            payload,
                        }),
                        Ok(None) => break,
                        Err(e) => {
                            mailbox.close(format!("connection to rank {r} failed: {e}"));
                            break;
                        }
                    }
                });
            }
        }
        Ok(Self {
            rank,
            size,
            peers: peers.into_iter().map(|s| s.map(Mutex::new)).collect(),
            mailbox,
        })
    }

    pub fn into_communicator(self, timeout: Duration) -> Communicator {
        Communicator::from_transport(Arc::new(self), None, timeout)
    }
}

fn dial(addr: SocketAddr, timeout: Duration) -> Result<TcpStream> {
    let start = Instant::now();
    loop {
        match TcpStream::connect(addr) {
            Ok(s) => return Ok(s),
            Err(_) if start.elapsed() < timeout => thread::sleep(Duration::from_millis(20)),
            Err(e) => return Err(Error::Transport(format!("cannot reach {addr}: {e}"))),
        }
    }
}

impl Transport for SocketTransport {
    fn rank(&self) -> usize {
        self.rank
    }

    fn size(&self) -> usize {
        self.size
    }

    fn send(&self, dest: usize, env: Envelope) -> Result<()> {
        if dest >= self.size {
            return Err(Error::InvalidRank {
                rank: dest,
                size: self.size,
            });
        }
        if dest == self.rank {
            self.mailbox.push(env);
            return Ok(());
        }
        let frame = encode_frame(env.source as u32, env.tag, &env.payload);
        let stream = self.peers[dest].as_ref().unwrap();
        stream.lock().unwrap().write_all(&frame)?;
        Ok(())
    }

    fn mailbox(&self) -> &Mailbox {
        &self.mailbox
    }
}

impl Drop for SocketTransport {
    fn drop(&mut self) {
        for s in self.peers.iter().flatten() {
            let _ = s.lock().unwrap().shutdown(Shutdown::Write);
        }
    }
}

/// Runs `body` on `p` ranks connected over loopback TCP, one thread each.
pub fn spawn_socket_world<R, F>(p: usize, options: &WorldOptions, body: F) -> Result<Vec<R>>
where
    R: Send,
    F: Fn(Communicator) -> Result<R> + Sync,
{
    if p == 0 {
        return Err(Error::Config("world needs at least one rank".into()));
    }
    let listeners = (0..p)
        .map(|_| TcpListener::bind("127.0.0.1:0"))
        .collect::<std::io::Result<Vec<_>>>()?;
    let hosts = listeners
        .iter()
        .map(|l| l.local_addr())
        .collect::<std::io::Result<Vec<_>>>()?;
    let timeout = options.timeout;
    let transports: Vec<Result<SocketTransport>> = thread::scope(|s| {
        let handles: Vec<_> = listeners
            .into_iter()
            .enumerate()
            .map(|(r, l)| {
                let hosts = &hosts;
                s.spawn(move || SocketTransport::connect(hosts, r, Some(l), timeout))
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    let mut comms = Vec::with_capacity(p);
    let mut mailboxes = Vec::with_capacity(p);
    for t in transports {
        let t = t?;
        mailboxes.push(Arc::clone(&t.mailbox));
        comms.push(t.into_communicator(timeout));
    }
    run_ranks(comms, &body, || {
        for m in &mailboxes {
            m.abort();
        }
    })
}
