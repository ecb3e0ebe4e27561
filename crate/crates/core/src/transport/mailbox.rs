use std::collections::{HashMap, VecDeque};
use std::sync::{Condvar, Mutex};
use std::time::{Duration, Instant};

use crate::{Error, Result};

/// A message in flight. `sent_at` is the sender's virtual departure time
/// (zero when no cost model is attached).
#[derive(Debug, Clone, PartialEq)]
pub struct Envelope {
    pub source: usize,
    pub tag: u32,
    pub sent_at: f64,
    pub payload: Vec<u8>,
}

#[derive(Default)]
struct State {
    queues: HashMap<(usize, u32), VecDeque<Envelope>>,
    aborted: bool,
    closed: Option<String>,
}

/// Per-rank inbox with one FIFO per `(source, tag)` channel.
#[derive(Default)]
pub struct Mailbox {
    state: Mutex<State>,
    cv: Condvar,
}

const POLL: Duration = Duration::from_millis(50);

impl Mailbox {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&self, env: Envelope) {
        let mut st = self.state.lock().unwrap();
        st.queues
            .entry((env.source, env.tag))
            .or_default()
            .push_back(env);
        self.cv.notify_all();
    }

    /// Wakes every waiter with [`Error::Aborted`].
    pub fn abort(&self) {
        self.state.lock().unwrap().aborted = true;
        self.cv.notify_all();
    }

    /// Marks the inbox unusable, e.g. after a connection error.
    pub fn close(&self, reason: String) {
        self.state.lock().unwrap().closed.get_or_insert(reason);
        self.cv.notify_all();
    }

    pub fn take(&self, me: usize, source: usize, tag: u32, timeout: Duration) -> Result<Envelope> {
        let start = Instant::now();
        let mut st = self.state.lock().unwrap();
        loop {
            if let Some(env) = st.queues.get_mut(&(source, tag)).and_then(|q| q.pop_front()) {
                return Ok(env);
            }
            if st.aborted {
                return Err(Error::Aborted);
            }
            if let Some(reason) = &st.closed {
                return Err(Error::Transport(reason.clone()));
            }
            let waited = start.elapsed();
            if waited >= timeout {
                let mut pending: Vec<u32> = st
                    .queues
                    .iter()
                    .filter(|((s, _), q)| *s == source && !q.is_empty())
                    .map(|((_, t), _)| *t)
                    .collect();
                pending.sort_unstable();
                return Err(if pending.is_empty() {
                    Error::Deadlock {
                        rank: me,
                        source_rank: source,
                        tag,
                        waited,
                    }
                } else {
                    Error::TagMismatchTimeout {
                        rank: me,
                        source_rank: source,
                        tag,
                        pending,
                    }
                });
            }
            let wait = POLL.min(timeout - waited);
            st = self.cv.wait_timeout(st, wait).unwrap().0;
        }
    }
}
