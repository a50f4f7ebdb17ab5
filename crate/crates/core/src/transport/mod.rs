//! Message passing among the SPMD workers of one launch.
//!
//! Every worker gets a [`WorkerCtx`] carrying its rank, the world size and
//! its endpoint on the fabric. Point-to-point traffic is blocking on the
//! receive side, ordered per `(source, dest, tag)` channel, and bounded by a
//! timeout so that a mismatched program fails instead of hanging. The
//! collectives (barrier, broadcast, reduce, gather) are layered on top of the
//! same send/recv pair.

mod collective;
pub mod frame;
mod launch;
mod socket;

use std::collections::VecDeque;
use std::io::Write;
use std::net::TcpStream;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc::{Receiver, RecvTimeoutError, Sender};
use std::sync::Arc;
use std::time::{Duration, Instant};

use ndarray::Array2;
use num_complex::Complex64;

pub use collective::{Gathered, ReduceOp};
pub use launch::{launch, Backend, LaunchError, LaunchOptions};

pub type Rank = usize;

/// Tags at or above this value belong to the runtime (collectives, array
/// plumbing, halo exchange). User code may only send below it.
pub const RESERVED_TAG_BASE: u32 = 0x8000_0000;

pub(crate) const TAG_BARRIER: u32 = RESERVED_TAG_BASE + 1;
pub(crate) const TAG_BROADCAST: u32 = RESERVED_TAG_BASE + 2;
pub(crate) const TAG_REDUCE: u32 = RESERVED_TAG_BASE + 3;
pub(crate) const TAG_GATHER: u32 = RESERVED_TAG_BASE + 4;
pub(crate) const TAG_HALO: u32 = RESERVED_TAG_BASE + 0x10;
/// Start of the per-array tag blocks handed out by [`WorkerCtx::next_array_tags`].
pub(crate) const TAG_ARRAY_BASE: u32 = RESERVED_TAG_BASE + 0x1000_0000;
pub(crate) const TAGS_PER_ARRAY: u32 = 4;

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(60);

const POLL_INTERVAL: Duration = Duration::from_millis(20);

#[derive(Debug, thiserror::Error)]
pub enum TransportError {
    #[error("rank {rank}: destination {dest} out of range for world size {world_size}")]
    InvalidDest {
        rank: Rank,
        dest: Rank,
        world_size: usize,
    },
    #[error("rank {rank}: source {src} out of range for world size {world_size}")]
    InvalidSource {
        rank: Rank,
        src: Rank,
        world_size: usize,
    },
    #[error("rank {rank}: root {root} out of range for world size {world_size}")]
    InvalidRoot {
        rank: Rank,
        root: Rank,
        world_size: usize,
    },
    #[error("rank {0}: self-send is not allowed")]
    SelfSend(Rank),
    #[error("rank {rank}: tag {tag:#x} is reserved for the runtime")]
    ReservedTag { rank: Rank, tag: u32 },
    #[error(
        "rank {rank}: no message from source {src} with tag {tag:#x} after {timeout:?} (possible deadlock)"
    )]
    Timeout {
        rank: Rank,
        src: Rank,
        tag: u32,
        timeout: Duration,
    },
    #[error("rank {0}: launch aborted after another worker failed")]
    Aborted(Rank),
    #[error("rank {rank}: peer {peer} disconnected")]
    Disconnected { rank: Rank, peer: Rank },
    #[error("rank {rank}: expected {expected:?} payload from {src}, got {got:?}")]
    UnexpectedKind {
        rank: Rank,
        src: Rank,
        expected: ElemKind,
        got: ElemKind,
    },
    #[error("rank {rank}: reduce contribution from rank {offender} has length {got}, expected {expected}")]
    ShapeMismatch {
        rank: Rank,
        offender: Rank,
        expected: usize,
        got: usize,
    },
    #[error("rank {rank}: broadcast root must supply a payload")]
    MissingRootPayload { rank: Rank },
    #[error("rank {rank}: frame error: {source}")]
    Frame {
        rank: Rank,
        #[source]
        source: frame::FrameError,
    },
}

/// Element kind of a payload; the numeric codes are the wire codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ElemKind {
    Bytes,
    Real,
    Complex,
}

impl ElemKind {
    pub fn code(self) -> u8 {
        match self {
            ElemKind::Bytes => 0,
            ElemKind::Real => 1,
            ElemKind::Complex => 2,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(ElemKind::Bytes),
            1 => Some(ElemKind::Real),
            2 => Some(ElemKind::Complex),
            _ => None,
        }
    }

    pub fn elem_size(self) -> usize {
        match self {
            ElemKind::Bytes => 1,
            ElemKind::Real => 8,
            ElemKind::Complex => 16,
        }
    }
}

/// Message body. Arrays are owned, so a sent payload is a snapshot: later
/// changes to the sender's buffer never reach the receiver.
#[derive(Debug, Clone, PartialEq)]
pub enum Payload {
    Bytes(Vec<u8>),
    Real(Array2<f64>),
    Complex(Array2<Complex64>),
}

impl Payload {
    pub fn kind(&self) -> ElemKind {
        match self {
            Payload::Bytes(_) => ElemKind::Bytes,
            Payload::Real(_) => ElemKind::Real,
            Payload::Complex(_) => ElemKind::Complex,
        }
    }

    /// `(rows, cols)`; a byte payload is a single row.
    pub fn shape(&self) -> (usize, usize) {
        match self {
            Payload::Bytes(b) => (1, b.len()),
            Payload::Real(a) => a.dim(),
            Payload::Complex(a) => a.dim(),
        }
    }

    pub fn byte_len(&self) -> usize {
        let (r, c) = self.shape();
        r * c * self.kind().elem_size()
    }

    /// A `1 x n` real payload.
    pub fn real_row(values: &[f64]) -> Self {
        Payload::Real(Array2::from_shape_vec((1, values.len()), values.to_vec()).unwrap())
    }

    pub fn into_real(self) -> Option<Array2<f64>> {
        match self {
            Payload::Real(a) => Some(a),
            _ => None,
        }
    }

    pub fn into_complex(self) -> Option<Array2<Complex64>> {
        match self {
            Payload::Complex(a) => Some(a),
            _ => None,
        }
    }

    pub fn into_bytes(self) -> Option<Vec<u8>> {
        match self {
            Payload::Bytes(b) => Some(b),
            _ => None,
        }
    }

    /// Row-major element values of a real payload.
    pub fn into_real_vec(self) -> Option<Vec<f64>> {
        self.into_real().map(|a| a.iter().copied().collect())
    }
}

impl From<&[f64]> for Payload {
    fn from(values: &[f64]) -> Self {
        Payload::real_row(values)
    }
}

impl From<Vec<f64>> for Payload {
    fn from(values: Vec<f64>) -> Self {
        let n = values.len();
        Payload::Real(Array2::from_shape_vec((1, n), values).unwrap())
    }
}

impl From<Array2<f64>> for Payload {
    fn from(a: Array2<f64>) -> Self {
        Payload::Real(a)
    }
}

impl From<Array2<Complex64>> for Payload {
    fn from(a: Array2<Complex64>) -> Self {
        Payload::Complex(a)
    }
}

impl From<Vec<u8>> for Payload {
    fn from(b: Vec<u8>) -> Self {
        Payload::Bytes(b)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Message {
    pub source: Rank,
    pub tag: u32,
    pub payload: Payload,
}

pub(crate) enum Outbox {
    InProc(Vec<Sender<Message>>),
    /// One outbound stream per peer; `None` at the worker's own rank.
    Socket(Vec<Option<TcpStream>>),
}

/// One worker's view of a launch.
///
/// Owned by exactly one worker thread; all cross-worker traffic goes through
/// `send`/`recv` and the collectives built on them.
pub struct WorkerCtx {
    rank: Rank,
    world_size: usize,
    timeout: Duration,
    inbox: Receiver<Message>,
    pending: VecDeque<Message>,
    outbox: Outbox,
    abort: Arc<AtomicBool>,
    next_array: u32,
}

impl std::fmt::Debug for WorkerCtx {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("WorkerCtx")
            .field("rank", &self.rank)
            .field("world_size", &self.world_size)
            .field("timeout", &self.timeout)
            .field("pending", &self.pending.len())
            .finish()
    }
}

impl WorkerCtx {
    pub(crate) fn new(
        rank: Rank,
        world_size: usize,
        timeout: Duration,
        inbox: Receiver<Message>,
        outbox: Outbox,
        abort: Arc<AtomicBool>,
    ) -> Self {
        Self {
            rank,
            world_size,
            timeout,
            inbox,
            pending: VecDeque::new(),
            outbox,
            abort,
            next_array: 0,
        }
    }

    pub fn rank(&self) -> Rank {
        self.rank
    }

    pub fn world_size(&self) -> usize {
        self.world_size
    }

    pub fn timeout(&self) -> Duration {
        self.timeout
    }

    pub fn set_timeout(&mut self, timeout: Duration) {
        self.timeout = timeout;
    }

    /// Sends `payload` to `dest` under a user tag (below [`RESERVED_TAG_BASE`]).
    pub fn send(
        &mut self,
        dest: Rank,
        tag: u32,
        payload: impl Into<Payload>,
    ) -> Result<(), TransportError> {
        if tag >= RESERVED_TAG_BASE {
            return Err(TransportError::ReservedTag {
                rank: self.rank,
                tag,
            });
        }
        self.send_raw(dest, tag, payload.into())
    }

    /// Blocks until a message from `source` with `tag` arrives.
    pub fn recv(&mut self, source: Rank, tag: u32) -> Result<Payload, TransportError> {
        self.recv_raw(source, tag)
    }

    pub(crate) fn send_raw(
        &mut self,
        dest: Rank,
        tag: u32,
        payload: Payload,
    ) -> Result<(), TransportError> {
        if dest >= self.world_size {
            return Err(TransportError::InvalidDest {
                rank: self.rank,
                dest,
                world_size: self.world_size,
            });
        }
        if dest == self.rank {
            return Err(TransportError::SelfSend(self.rank));
        }
        let msg = Message {
            source: self.rank,
            tag,
            payload,
        };
        let rank = self.rank;
        match &mut self.outbox {
            Outbox::InProc(senders) => senders[dest]
                .send(msg)
                .map_err(|_| TransportError::Disconnected { rank, peer: dest }),
            Outbox::Socket(streams) => {
                let stream = streams[dest]
                    .as_mut()
                    .ok_or(TransportError::Disconnected { rank, peer: dest })?;
                let bytes = frame::encode_frame(&msg)
                    .map_err(|source| TransportError::Frame { rank, source })?;
                stream
                    .write_all(&bytes)
                    .map_err(|_| TransportError::Disconnected { rank, peer: dest })
            }
        }
    }

    pub(crate) fn recv_raw(&mut self, source: Rank, tag: u32) -> Result<Payload, TransportError> {
        if source >= self.world_size {
            return Err(TransportError::InvalidSource {
                rank: self.rank,
                src: source,
                world_size: self.world_size,
            });
        }
        if source == self.rank {
            return Err(TransportError::SelfSend(self.rank));
        }
        if let Some(pos) = self
            .pending
            .iter()
            .position(|m| m.source == source && m.tag == tag)
        {
            return Ok(self.pending.remove(pos).unwrap().payload);
        }
        let deadline = Instant::now() + self.timeout;
        loop {
            if self.abort.load(Ordering::Relaxed) {
                return Err(TransportError::Aborted(self.rank));
            }
            let now = Instant::now();
            if now >= deadline {
                return Err(TransportError::Timeout {
                    rank: self.rank,
                    src: source,
                    tag,
                    timeout: self.timeout,
                });
            }
            match self.inbox.recv_timeout(POLL_INTERVAL.min(deadline - now)) {
                Ok(m) if m.source == source && m.tag == tag => return Ok(m.payload),
                Ok(m) => self.pending.push_back(m),
                Err(RecvTimeoutError::Timeout) => {}
                Err(RecvTimeoutError::Disconnected) => {
                    return Err(TransportError::Disconnected {
                        rank: self.rank,
                        peer: source,
                    })
                }
            }
        }
    }

    pub(crate) fn recv_real(
        &mut self,
        source: Rank,
        tag: u32,
    ) -> Result<Array2<f64>, TransportError> {
        let payload = self.recv_raw(source, tag)?;
        let got = payload.kind();
        payload.into_real().ok_or(TransportError::UnexpectedKind {
            rank: self.rank,
            src: source,
            expected: ElemKind::Real,
            got,
        })
    }

    /// Hands out the base of a fresh block of [`TAGS_PER_ARRAY`] reserved
    /// tags. SPMD programs create arrays in the same order on every rank, so
    /// the same array gets the same block everywhere.
    pub(crate) fn next_array_tags(&mut self) -> u32 {
        let blocks = (u32::MAX - TAG_ARRAY_BASE) / TAGS_PER_ARRAY;
        let id = self.next_array % blocks;
        self.next_array = self.next_array.wrapping_add(1);
        TAG_ARRAY_BASE + id * TAGS_PER_ARRAY
    }
}
