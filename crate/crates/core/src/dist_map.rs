//! One-dimensional block distributions.
//!
//! A [`DistMap`] splits exactly one matrix dimension across an ordered list
//! of ranks. Index arithmetic is 0-based and half-open throughout; the
//! MATLAB-style original counts from 1 (rank 0 of a 100-point sweep over 4
//! workers owns `i = 1:25` there, `0..25` here).

use std::ops::Range;

use crate::transport::Rank;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MapError {
    #[error("cannot partition over zero ranks")]
    NoRanks,
    #[error("processor grid {rows}x{cols} does not match {ranks} ranks")]
    GridMismatch {
        rows: usize,
        cols: usize,
        ranks: usize,
    },
    #[error("processor grid {rows}x{cols} is not one-dimensional along {dim:?}")]
    NotOneDimensional { rows: usize, cols: usize, dim: Dim },
    #[error("rank {0} appears more than once in the map")]
    DuplicateRank(Rank),
    #[error("rank {rank} outside world of size {world_size}")]
    RankOutOfWorld { rank: Rank, world_size: usize },
    #[error("map covers {map} ranks but the launch has {world_size}")]
    WorldMismatch { map: usize, world_size: usize },
    #[error("rank {0} is not part of the map")]
    RankNotInMap(Rank),
    #[error("index {index} out of range for extent {extent}")]
    IndexOutOfRange { index: usize, extent: usize },
}

/// Which matrix dimension is split across ranks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Dim {
    Rows,
    Cols,
}

impl Dim {
    pub fn flipped(self) -> Dim {
        match self {
            Dim::Rows => Dim::Cols,
            Dim::Cols => Dim::Rows,
        }
    }
}

/// A contiguous half-open run `[start, start + len)` of global indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct BlockRange {
    pub start: usize,
    pub len: usize,
}

impl BlockRange {
    pub fn new(start: usize, len: usize) -> Self {
        Self { start, len }
    }

    pub fn end(&self) -> usize {
        self.start + self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn contains(&self, index: usize) -> bool {
        index >= self.start && index < self.end()
    }

    pub fn as_range(&self) -> Range<usize> {
        self.start..self.end()
    }
}

/// Splits `n` items over `p` ranks into contiguous blocks.
///
/// With `r = n mod p`, the first `r` ranks get `ceil(n/p)` items and the
/// rest `floor(n/p)`. Trailing ranks get empty ranges when `n < p`.
pub fn block_partition(n: usize, p: usize) -> Result<Vec<BlockRange>, MapError> {
    if p == 0 {
        return Err(MapError::NoRanks);
    }
    let base = n / p;
    let extra = n % p;
    let mut start = 0;
    Ok((0..p)
        .map(|i| {
            let len = base + usize::from(i < extra);
            let range = BlockRange::new(start, len);
            start += len;
            range
        })
        .collect())
}

/// Descriptor of a 1-D block distribution, the analogue of
/// `map([1 Ncpus], {}, [0:Ncpus-1])`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DistMap {
    grid: (usize, usize),
    dist_dim: Dim,
    ranks: Vec<Rank>,
}

impl DistMap {
    pub fn new(grid: (usize, usize), dist_dim: Dim, ranks: Vec<Rank>) -> Result<Self, MapError> {
        let (rows, cols) = grid;
        if ranks.is_empty() {
            return Err(MapError::NoRanks);
        }
        if rows * cols != ranks.len() {
            return Err(MapError::GridMismatch {
                rows,
                cols,
                ranks: ranks.len(),
            });
        }
        let split = match dist_dim {
            Dim::Rows => cols == 1,
            Dim::Cols => rows == 1,
        };
        if !split {
            return Err(MapError::NotOneDimensional {
                rows,
                cols,
                dim: dist_dim,
            });
        }
        let mut seen = ranks.clone();
        seen.sort_unstable();
        if let Some(w) = seen.windows(2).find(|w| w[0] == w[1]) {
            return Err(MapError::DuplicateRank(w[0]));
        }
        Ok(Self {
            grid,
            dist_dim,
            ranks,
        })
    }

    /// Column blocks over `0..p`: grid `1 x p`.
    pub fn cols(p: usize) -> Result<Self, MapError> {
        Self::new((1, p), Dim::Cols, (0..p).collect())
    }

    /// Row blocks over `0..p`: grid `p x 1`.
    pub fn rows(p: usize) -> Result<Self, MapError> {
        Self::new((p, 1), Dim::Rows, (0..p).collect())
    }

    pub fn grid(&self) -> (usize, usize) {
        self.grid
    }

    pub fn dist_dim(&self) -> Dim {
        self.dist_dim
    }

    pub fn ranks(&self) -> &[Rank] {
        &self.ranks
    }

    pub fn num_ranks(&self) -> usize {
        self.ranks.len()
    }

    /// Same ranks, other dimension split.
    pub fn flipped(&self) -> Self {
        Self {
            grid: (self.grid.1, self.grid.0),
            dist_dim: self.dist_dim.flipped(),
            ranks: self.ranks.clone(),
        }
    }

    /// Checks that the map spans exactly the ranks of a launch of `world_size`.
    pub fn check_world(&self, world_size: usize) -> Result<(), MapError> {
        if let Some(&rank) = self.ranks.iter().find(|&&r| r >= world_size) {
            return Err(MapError::RankOutOfWorld { rank, world_size });
        }
        if self.ranks.len() != world_size {
            return Err(MapError::WorldMismatch {
                map: self.ranks.len(),
                world_size,
            });
        }
        Ok(())
    }

    pub fn position_of(&self, rank: Rank) -> Result<usize, MapError> {
        self.ranks
            .iter()
            .position(|&r| r == rank)
            .ok_or(MapError::RankNotInMap(rank))
    }

    /// Blocks of the distributed extent `n`, in map order.
    pub fn partition(&self, n: usize) -> Vec<BlockRange> {
        block_partition(n, self.ranks.len()).expect("maps are never empty")
    }

    pub fn local_range(&self, n: usize, rank: Rank) -> Result<BlockRange, MapError> {
        let pos = self.position_of(rank)?;
        Ok(self.partition(n)[pos])
    }

    /// The rank whose block of extent `n` holds `global_index`.
    pub fn owner_of(&self, n: usize, global_index: usize) -> Result<Rank, MapError> {
        if global_index >= n {
            return Err(MapError::IndexOutOfRange {
                index: global_index,
                extent: n,
            });
        }
        let p = self.ranks.len();
        let base = n / p;
        let extra = n % p;
        let wide = extra * (base + 1);
        let pos = if global_index < wide {
            global_index / (base + 1)
        } else {
            extra + (global_index - wide) / base
        };
        Ok(self.ranks[pos])
    }
}

/// [`DistMap::owner_of`] for the canonical map over ranks `0..p`.
pub fn owner_of(map: &DistMap, n: usize, global_index: usize) -> Result<Rank, MapError> {
    map.owner_of(n, global_index)
}

/// [`DistMap::local_range`] as a free function.
pub fn local_range(map: &DistMap, n: usize, rank: Rank) -> Result<BlockRange, MapError> {
    map.local_range(n, rank)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ranges(v: &[(usize, usize)]) -> Vec<BlockRange> {
        v.iter().map(|&(s, l)| BlockRange::new(s, l)).collect()
    }

    /// Independent rule oracle: sizes first, then prefix sums.
    fn oracle_partition(n: usize, p: usize) -> Vec<(usize, usize)> {
        let sizes: Vec<usize> = (0..p)
            .map(|i| if i < n % p { n.div_ceil(p) } else { n / p })
            .collect();
        assert_eq!(sizes.iter().sum::<usize>(), n);
        let mut out = Vec::new();
        let mut acc = 0;
        for s in sizes {
            out.push((acc, s));
            acc += s;
        }
        out
    }

    #[test]
    fn hundred_over_four() {
        assert_eq!(
            block_partition(100, 4).unwrap(),
            ranges(&[(0, 25), (25, 25), (50, 25), (75, 25)])
        );
    }

    #[test]
    fn single_rank_takes_all() {
        assert_eq!(block_partition(17, 1).unwrap(), ranges(&[(0, 17)]));
    }

    #[test]
    fn sixty_three_over_four() {
        let expected = oracle_partition(63, 4);
        assert_eq!(expected, vec![(0, 16), (16, 16), (32, 16), (48, 15)]);
        assert_eq!(block_partition(63, 4).unwrap(), ranges(&expected));
    }

    #[test]
    fn zero_ranks_rejected() {
        assert_eq!(block_partition(5, 0), Err(MapError::NoRanks));
    }

    #[test]
    fn owner_examples() {
        let m4 = DistMap::cols(4).unwrap();
        assert_eq!(owner_of(&m4, 100, 25).unwrap(), 1);
        assert_eq!(oracle_partition(10, 3), vec![(0, 4), (4, 3), (7, 3)]);
        let m3 = DistMap::cols(3).unwrap();
        assert_eq!(owner_of(&m3, 10, 9).unwrap(), 2);
        assert_eq!(
            owner_of(&m3, 10, 10),
            Err(MapError::IndexOutOfRange {
                index: 10,
                extent: 10
            })
        );
    }

    #[test]
    fn local_range_examples() {
        let m4 = DistMap::cols(4).unwrap();
        assert_eq!(local_range(&m4, 100, 0).unwrap(), BlockRange::new(0, 25));
        let m8 = DistMap::cols(8).unwrap();
        assert_eq!(oracle_partition(5, 8)[7], (5, 0));
        assert_eq!(local_range(&m8, 5, 7).unwrap(), BlockRange::new(5, 0));
        for r in 0..8 {
            assert_eq!(local_range(&m8, 0, r).unwrap(), BlockRange::new(0, 0));
        }
        assert_eq!(local_range(&m4, 10, 4), Err(MapError::RankNotInMap(4)));
    }

    #[test]
    fn permuted_rank_list() {
        let m = DistMap::new((1, 3), Dim::Cols, vec![2, 0, 1]).unwrap();
        assert_eq!(m.local_range(9, 2).unwrap(), BlockRange::new(0, 3));
        assert_eq!(m.owner_of(9, 4).unwrap(), 0);
        m.check_world(3).unwrap();
        assert!(m.check_world(2).is_err());
    }

    #[test]
    fn map_validation() {
        assert!(matches!(
            DistMap::new((2, 2), Dim::Cols, vec![0, 1, 2, 3]),
            Err(MapError::NotOneDimensional { .. })
        ));
        assert!(matches!(
            DistMap::new((1, 3), Dim::Cols, vec![0, 1]),
            Err(MapError::GridMismatch { .. })
        ));
        assert_eq!(
            DistMap::new((1, 2), Dim::Cols, vec![1, 1]),
            Err(MapError::DuplicateRank(1))
        );
        assert_eq!(DistMap::cols(0), Err(MapError::NoRanks));
        let single = DistMap::new((1, 1), Dim::Rows, vec![0]).unwrap();
        assert_eq!(single.flipped().dist_dim(), Dim::Cols);
        assert_eq!(
            DistMap::cols(4).unwrap().flipped(),
            DistMap::rows(4).unwrap()
        );
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(512))]

        #[test]
        fn partition_is_total_and_balanced(n in 0usize..=10_000, p in 1usize..=64) {
            let parts = block_partition(n, p).unwrap();
            prop_assert_eq!(parts.len(), p);
            let mut next = 0;
            for r in &parts {
                prop_assert_eq!(r.start, next);
                next = r.end();
            }
            prop_assert_eq!(next, n);
            let nonempty: Vec<usize> = parts.iter().filter(|r| r.len > 0).map(|r| r.len).collect();
            if let (Some(max), Some(min)) = (nonempty.iter().max(), nonempty.iter().min()) {
                prop_assert!(max - min <= 1);
            }
            prop_assert_eq!(
                parts,
                oracle_partition(n, p).iter().map(|&(s, l)| BlockRange::new(s, l)).collect::<Vec<_>>()
            );
        }

        #[test]
        fn owner_and_local_range_agree(n in 1usize..2_000, p in 1usize..=64, g in 0usize..2_000) {
            let g = g % n;
            let map = DistMap::cols(p).unwrap();
            let owner = map.owner_of(n, g).unwrap();
            for r in 0..p {
                let range = map.local_range(n, r).unwrap();
                prop_assert_eq!(range.contains(g), r == owner);
            }
        }
    }
}
