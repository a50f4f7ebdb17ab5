//! Collectives built from point-to-point messages.
//!
//! Every collective runs through a single root and combines contributions in
//! ascending rank order, so floating point results do not depend on message
//! arrival timing.

use std::fmt;
use std::str::FromStr;

use super::{
    Payload, Rank, TransportError, WorkerCtx, TAG_BARRIER, TAG_BROADCAST, TAG_GATHER, TAG_REDUCE,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReduceOp {
    Sum,
    Min,
    Max,
}

impl ReduceOp {
    fn combine(self, acc: f64, x: f64) -> f64 {
        match self {
            ReduceOp::Sum => acc + x,
            ReduceOp::Min => acc.min(x),
            ReduceOp::Max => acc.max(x),
        }
    }
}

impl fmt::Display for ReduceOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ReduceOp::Sum => "sum",
            ReduceOp::Min => "min",
            ReduceOp::Max => "max",
        })
    }
}

impl FromStr for ReduceOp {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "sum" => Ok(ReduceOp::Sum),
            "min" => Ok(ReduceOp::Min),
            "max" => Ok(ReduceOp::Max),
            other => Err(format!("unknown reduce op `{other}`")),
        }
    }
}

/// Result of [`WorkerCtx::gather`] at the root.
#[derive(Debug, Clone, PartialEq)]
pub struct Gathered {
    /// Per-rank arrays concatenated in rank order.
    pub data: Vec<f64>,
    /// Length contributed by each rank.
    pub lengths: Vec<usize>,
}

impl Gathered {
    /// The slice contributed by `rank`.
    pub fn part(&self, rank: Rank) -> &[f64] {
        let start: usize = self.lengths[..rank].iter().sum();
        &self.data[start..start + self.lengths[rank]]
    }
}

impl WorkerCtx {
    fn check_root(&self, root: Rank) -> Result<(), TransportError> {
        if root >= self.world_size {
            return Err(TransportError::InvalidRoot {
                rank: self.rank,
                root,
                world_size: self.world_size,
            });
        }
        Ok(())
    }

    /// No rank returns before every rank has entered.
    pub fn barrier(&mut self) -> Result<(), TransportError> {
        if self.world_size == 1 {
            return Ok(());
        }
        if self.rank == 0 {
            for r in 1..self.world_size {
                self.recv_raw(r, TAG_BARRIER)?;
            }
            for r in 1..self.world_size {
                self.send_raw(r, TAG_BARRIER, Payload::Bytes(Vec::new()))?;
            }
        } else {
            self.send_raw(0, TAG_BARRIER, Payload::Bytes(Vec::new()))?;
            self.recv_raw(0, TAG_BARRIER)?;
        }
        Ok(())
    }

    /// Distributes the root's payload to every rank. Non-root ranks pass
    /// `None`; the root must pass `Some`.
    pub fn broadcast(
        &mut self,
        root: Rank,
        payload: Option<Payload>,
    ) -> Result<Payload, TransportError> {
        self.check_root(root)?;
        if self.rank == root {
            let payload = payload.ok_or(TransportError::MissingRootPayload { rank: self.rank })?;
            for r in (0..self.world_size).filter(|&r| r != root) {
                self.send_raw(r, TAG_BROADCAST, payload.clone())?;
            }
            Ok(payload)
        } else {
            self.recv_raw(root, TAG_BROADCAST)
        }
    }

    /// Elementwise reduction to `root`, folded left to right over ranks
    /// `0, 1, ..., P-1`. Returns `Some` at the root and `None` elsewhere.
    pub fn reduce(
        &mut self,
        root: Rank,
        op: ReduceOp,
        value: &[f64],
    ) -> Result<Option<Vec<f64>>, TransportError> {
        self.check_root(root)?;
        if self.rank != root {
            self.send_raw(root, TAG_REDUCE, Payload::real_row(value))?;
            return Ok(None);
        }
        // Drain every contribution before reporting a mismatch so no sender
        // is left with a stale message in a later collective.
        let mut parts: Vec<Vec<f64>> = Vec::with_capacity(self.world_size);
        for r in 0..self.world_size {
            if r == root {
                parts.push(value.to_vec());
            } else {
                parts.push(self.recv_real(r, TAG_REDUCE)?.into_iter().collect());
            }
        }
        if let Some((offender, bad)) = parts
            .iter()
            .enumerate()
            .find(|(_, p)| p.len() != value.len())
        {
            return Err(TransportError::ShapeMismatch {
                rank: self.rank,
                offender,
                expected: value.len(),
                got: bad.len(),
            });
        }
        let mut parts = parts.into_iter();
        let mut acc = parts.next().unwrap();
        for part in parts {
            for (a, x) in acc.iter_mut().zip(part) {
                *a = op.combine(*a, x);
            }
        }
        Ok(Some(acc))
    }

    /// Concatenates every rank's array at `root` in rank order. Lengths may
    /// differ between ranks.
    pub fn gather(
        &mut self,
        root: Rank,
        value: &[f64],
    ) -> Result<Option<Gathered>, TransportError> {
        self.check_root(root)?;
        if self.rank != root {
            self.send_raw(root, TAG_GATHER, Payload::real_row(value))?;
            return Ok(None);
        }
        let mut data = Vec::new();
        let mut lengths = Vec::with_capacity(self.world_size);
        for r in 0..self.world_size {
            if r == root {
                data.extend_from_slice(value);
                lengths.push(value.len());
            } else {
                let part = self.recv_real(r, TAG_GATHER)?;
                lengths.push(part.len());
                data.extend(part.iter());
            }
        }
        Ok(Some(Gathered { data, lengths }))
    }
}
