use std::sync::{Arc, Mutex};
use std::time::Duration;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::mailbox::{Envelope, Mailbox};
use super::Transport;
use crate::{Error, Result};

/// Shared state of an in-process world: one mailbox per rank.
pub(crate) struct LocalWorld {
    mailboxes: Vec<Mailbox>,
}

impl LocalWorld {
    pub(crate) fn new(size: usize) -> Arc<Self> {
        Arc::new(Self {
            mailboxes: (0..size).map(|_| Mailbox::new()).collect(),
        })
    }

    pub(crate) fn abort_all(&self) {
        for m in &self.mailboxes {
            m.abort();
        }
    }
}

/// One rank's endpoint into a [`LocalWorld`].
pub(crate) struct LocalTransport {
    world: Arc<LocalWorld>,
    rank: usize,
    jitter: Option<Mutex<ChaCha8Rng>>,
}

impl LocalTransport {
    pub(crate) fn new(world: Arc<LocalWorld>, rank: usize, jitter_seed: Option<u64>) -> Self {
        let jitter = jitter_seed
            .map(|s| Mutex::new(ChaCha8Rng::seed_from_u64(s ^ (rank as u64).wrapping_mul(0x9E37_79B9))));
        Self {
            world,
            rank,
            jitter,
        }
    }
}

impl Transport for LocalTransport {
    fn rank(&self) -> usize {
        self.rank
    }

    fn size(&self) -> usize {
        self.world.mailboxes.len()
    }

    fn send(&self, dest: usize, env: Envelope) -> Result<()> {
        let mailbox = self.world.mailboxes.get(dest).ok_or(Error::InvalidRank {
            rank: dest,
            size: self.world.mailboxes.len(),
        })?;
        if let Some(rng) = &self.jitter {
            let pause = rng.lock().unwrap().gen_range(0..4u32);
            match pause {
                0 => {}
                1 => std::thread::yield_now(),
                n => std::thread::sleep(Duration::from_micros(20 * n as u64)),
            }
        }
        mailbox.push(env);
        Ok(())
    }

    fn mailbox(&self) -> &Mailbox {
        &self.world.mailboxes[self.rank]
    }
}
