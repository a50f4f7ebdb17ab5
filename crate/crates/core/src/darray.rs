//! Block-distributed dense matrices.
//!
//! Each rank stores the full extent of the undistributed dimension and its
//! own block of the distributed one. The operation set follows the pMatlab
//! idiom the kernels are written in: create a zero array over a map, pull
//! the local block out, compute on it, write it back, and either
//! redistribute (`transpose_grid`) or collect everything on rank 0 (`agg`).

use std::fmt::Debug;

use ndarray::{s, Array2, ArrayView2};
use num_complex::Complex64;
use num_traits::Zero;

use crate::dist_map::{BlockRange, Dim, DistMap, MapError};
use crate::transport::{ElemKind, Payload, Rank, TransportError, WorkerCtx};

const OP_SCATTER: u32 = 0;
const OP_AGG: u32 = 1;
const OP_TRANSPOSE: u32 = 2;

#[derive(Debug, thiserror::Error)]
pub enum DArrayError {
    #[error(transparent)]
    Transport(#[from] TransportError),
    #[error(transparent)]
    Map(#[from] MapError),
    #[error("rank {rank}: block shape {got:?} does not match local shape {expected:?}")]
    ShapeMismatch {
        rank: Rank,
        expected: (usize, usize),
        got: (usize, usize),
    },
    #[error("rank {rank}: global matrix shape {got:?} does not match array shape {expected:?}")]
    GlobalShapeMismatch {
        rank: Rank,
        expected: (usize, usize),
        got: (usize, usize),
    },
    #[error("rank {rank}: scatter root must supply the global matrix")]
    MissingGlobal { rank: Rank },
    #[error("rank {rank}: expected {expected:?} block from rank {src}, got {got:?}")]
    KindMismatch {
        rank: Rank,
        src: Rank,
        expected: ElemKind,
        got: ElemKind,
    },
    #[error("rank {rank}: transpose_grid direction differs from rank {peer}")]
    MixedDirection { rank: Rank, peer: Rank },
}

/// Element types a distributed array can hold.
pub trait Element: Clone + Copy + Zero + PartialEq + Debug + Send + Sync + 'static {
    const KIND: ElemKind;

    fn into_payload(block: Array2<Self>) -> Payload;

    fn from_payload(payload: Payload) -> Result<Array2<Self>, Payload>;
}

impl Element for f64 {
    const KIND: ElemKind = ElemKind::Real;

    fn into_payload(block: Array2<Self>) -> Payload {
        Payload::Real(block)
    }

    fn from_payload(payload: Payload) -> Result<Array2<Self>, Payload> {
        match payload {
            Payload::Real(a) => Ok(a),
            other => Err(other),
        }
    }
}

impl Element for Complex64 {
    const KIND: ElemKind = ElemKind::Complex;

    fn into_payload(block: Array2<Self>) -> Payload {
        Payload::Complex(block)
    }

    fn from_payload(payload: Payload) -> Result<Array2<Self>, Payload> {
        match payload {
            Payload::Complex(a) => Ok(a),
            other => Err(other),
        }
    }
}

/// A distributed dense matrix as seen from one rank.
#[derive(Debug, Clone)]
pub struct DArray<T: Element> {
    shape: (usize, usize),
    map: DistMap,
    rank: Rank,
    range: BlockRange,
    local: Array2<T>,
    tags: u32,
}

fn local_shape(shape: (usize, usize), dim: Dim, range: BlockRange) -> (usize, usize) {
    match dim {
        Dim::Cols => (shape.0, range.len),
        Dim::Rows => (range.len, shape.1),
    }
}

fn dist_extent(shape: (usize, usize), dim: Dim) -> usize {
    match dim {
        Dim::Rows => shape.0,
        Dim::Cols => shape.1,
    }
}

impl<T: Element> DArray<T> {
    /// Zero-filled array of global `shape` distributed by `map`
    /// (`pF = zeros(nx, m, pFmap)`).
    pub fn zeros(
        ctx: &mut WorkerCtx,
        shape: (usize, usize),
        map: DistMap,
    ) -> Result<Self, DArrayError> {
        map.check_world(ctx.world_size())?;
        let rank = ctx.rank();
        let range = map.local_range(dist_extent(shape, map.dist_dim()), rank)?;
        let local = Array2::zeros(local_shape(shape, map.dist_dim(), range));
        Ok(Self {
            shape,
            map,
            rank,
            range,
            local,
            tags: ctx.next_array_tags(),
        })
    }

    /// Splits a matrix held by `root` into blocks and hands each rank its own.
    /// Only the root's `global` is read; other ranks pass `None`.
    pub fn scatter(
        ctx: &mut WorkerCtx,
        root: Rank,
        global: Option<&Array2<T>>,
        shape: (usize, usize),
        map: DistMap,
    ) -> Result<Self, DArrayError> {
        let mut out = Self::zeros(ctx, shape, map)?;
        let tag = out.tags + OP_SCATTER;
        let extent = dist_extent(shape, out.map.dist_dim());
        if ctx.rank() == root {
            let global = global.ok_or(DArrayError::MissingGlobal { rank: root })?;
            if global.dim() != shape {
                return Err(DArrayError::GlobalShapeMismatch {
                    rank: root,
                    expected: shape,
                    got: global.dim(),
                });
            }
            let parts = out.map.partition(extent);
            for (&dest, range) in out.map.ranks().iter().zip(parts) {
                let block = match out.map.dist_dim() {
                    Dim::Cols => global.slice(s![.., range.as_range()]).to_owned(),
                    Dim::Rows => global.slice(s![range.as_range(), ..]).to_owned(),
                };
                if dest == root {
                    out.local = block;
                } else {
                    ctx.send_raw(dest, tag, T::into_payload(block))?;
                }
            }
        } else {
            let block = recv_block::<T>(ctx, root, tag)?;
            out.put_local(block)?;
        }
        Ok(out)
    }

    pub fn global_shape(&self) -> (usize, usize) {
        self.shape
    }

    pub fn map(&self) -> &DistMap {
        &self.map
    }

    pub fn dist_dim(&self) -> Dim {
        self.map.dist_dim()
    }

    /// This rank's block of the distributed dimension.
    pub fn local_range(&self) -> BlockRange {
        self.range
    }

    /// Shape every block passed to [`put_local`](Self::put_local) must have.
    pub fn local_shape(&self) -> (usize, usize) {
        local_shape(self.shape, self.map.dist_dim(), self.range)
    }

    pub fn local(&self) -> ArrayView2<'_, T> {
        self.local.view()
    }

    /// Copy of this rank's block (`Zlocal = local(Z)`).
    pub fn local_part(&self) -> Array2<T> {
        self.local.clone()
    }

    /// Replaces this rank's block (`pF = put_local(pF, pFlocal)`). Purely
    /// local; other ranks are unaffected.
    pub fn put_local(&mut self, block: Array2<T>) -> Result<(), DArrayError> {
        let expected = self.local_shape();
        if block.dim() != expected {
            return Err(DArrayError::ShapeMismatch {
                rank: self.rank,
                expected,
                got: block.dim(),
            });
        }
        self.local = block;
        Ok(())
    }

    /// Collects the whole matrix on rank 0; other ranks get `None`.
    pub fn agg(&self, ctx: &mut WorkerCtx) -> Result<Option<Array2<T>>, DArrayError> {
        let tag = self.tags + OP_AGG;
        if ctx.rank() != 0 {
            ctx.send_raw(0, tag, T::into_payload(self.local.clone()))?;
            return Ok(None);
        }
        let dim = self.map.dist_dim();
        let parts = self.map.partition(dist_extent(self.shape, dim));
        let mut full = Array2::zeros(self.shape);
        for (&src, range) in self.map.ranks().iter().zip(parts) {
            let expected = local_shape(self.shape, dim, range);
            let block = if src == 0 {
                self.local.clone()
            } else {
                recv_block::<T>(ctx, src, tag)?
            };
            if block.dim() != expected {
                return Err(DArrayError::ShapeMismatch {
                    rank: src,
                    expected,
                    got: block.dim(),
                });
            }
            match dim {
                Dim::Cols => full.slice_mut(s![.., range.as_range()]).assign(&block),
                Dim::Rows => full.slice_mut(s![range.as_range(), ..]).assign(&block),
            }
        }
        Ok(Some(full))
    }

    /// All-to-all redistribution that flips the distributed dimension while
    /// keeping every element where it is in the global matrix.
    ///
    /// Rank `i` cuts its block into one tile per destination `j` (the rows,
    /// or columns, that `j` will own) and the tiles are exchanged pairwise.
    pub fn transpose_grid(&self, ctx: &mut WorkerCtx) -> Result<DArray<T>, DArrayError> {
        let tag = self.tags + OP_TRANSPOSE;
        let old_dim = self.map.dist_dim();
        let new_map = self.map.flipped();
        let mut out = DArray::<T>::zeros(ctx, self.shape, new_map)?;
        let new_dim = out.map.dist_dim();
        let old_parts = self.map.partition(dist_extent(self.shape, old_dim));
        let new_parts = out.map.partition(dist_extent(self.shape, new_dim));
        let direction = [dim_code(old_dim)];

        let tile_for = |range: BlockRange| -> Array2<T> {
            match old_dim {
                // Our block has all rows: cut out the destination's rows.
                Dim::Cols => self.local.slice(s![range.as_range(), ..]).to_owned(),
                Dim::Rows => self.local.slice(s![.., range.as_range()]).to_owned(),
            }
        };

        let mut own_tile = None;
        for (&dest, &range) in self.map.ranks().iter().zip(&new_parts) {
            let tile = tile_for(range);
            if dest == self.rank {
                own_tile = Some(tile);
            } else {
                ctx.send_raw(dest, tag, Payload::Bytes(direction.to_vec()))?;
                ctx.send_raw(dest, tag, T::into_payload(tile))?;
            }
        }

        let mut local = Array2::zeros(out.local_shape());
        for (&src, &range) in self.map.ranks().iter().zip(&old_parts) {
            let tile = if src == self.rank {
                own_tile.take().expect("own tile cut above")
            } else {
                let header = ctx.recv_raw(src, tag)?;
                if header != Payload::Bytes(direction.to_vec()) {
                    return Err(DArrayError::MixedDirection {
                        rank: self.rank,
                        peer: src,
                    });
                }
                recv_block::<T>(ctx, src, tag)?
            };
            let expected = match old_dim {
                Dim::Cols => (out.range.len, range.len),
                Dim::Rows => (range.len, out.range.len),
            };
            if tile.dim() != expected {
                return Err(DArrayError::ShapeMismatch {
                    rank: src,
                    expected,
                    got: tile.dim(),
                });
            }
            match old_dim {
                Dim::Cols => local.slice_mut(s![.., range.as_range()]).assign(&tile),
                Dim::Rows => local.slice_mut(s![range.as_range(), ..]).assign(&tile),
            }
        }
        out.local = local;
        Ok(out)
    }
}

fn dim_code(dim: Dim) -> u8 {
    match dim {
        Dim::Rows => 0,
        Dim::Cols => 1,
    }
}

fn recv_block<T: Element>(
    ctx: &mut WorkerCtx,
    source: Rank,
    tag: u32,
) -> Result<Array2<T>, DArrayError> {
    let payload = ctx.recv_raw(source, tag)?;
    T::from_payload(payload).map_err(|p| DArrayError::KindMismatch {
        rank: ctx.rank(),
        src: source,
        expected: T::KIND,
        got: p.kind(),
    })
}

/// Zero-filled distributed array (`zeros(n, m, map)`).
pub fn dzeros<T: Element>(
    ctx: &mut WorkerCtx,
    shape: (usize, usize),
    map: DistMap,
) -> Result<DArray<T>, DArrayError> {
    DArray::zeros(ctx, shape, map)
}
