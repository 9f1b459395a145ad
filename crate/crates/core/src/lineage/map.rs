use super::partitioned::PartitionedRidIndex;
use super::rid_array::{Rid, RidArray, MISS};
use super::rid_index::{RidIndex, RunIndex};

/// One direction of lineage between two relations: maps each source rid to
/// zero or more target rids.
#[derive(Clone, Debug)]
pub enum LineageMap {
    /// `r -> r`; scans and projections.
    Identity(usize),
    /// At most one target per source, `MISS` for none.
    Array(RidArray),
    Index(RidIndex),
    /// Contiguous target runs.
    Runs(RunIndex),
    Partitioned(PartitionedRidIndex),
    /// Sources in `[lo, hi)` map to `s + delta`; others map to nothing.
    Shift { len: usize, lo: Rid, hi: Rid, delta: i64 },
    /// `s -> s / divisor`.
    Div { len: usize, divisor: u32 },
    /// `s -> [s * width, (s + 1) * width)`.
    Block { len: usize, width: u32 },
    /// `s -> s % modulus`.
    Mod { len: usize, modulus: u32 },
    /// `s -> {s + k * stride | k < count}`.
    Stride { len: usize, stride: u32, count: u32 },
    /// Every source maps to every target in `[0, target_len)`.
    Whole { len: usize, target_len: usize },
}

impl LineageMap {
    /// Number of source records.
    pub fn len(&self) -> usize {
        match self {
            LineageMap::Identity(n) => *n,
            LineageMap::Array(a) => a.len(),
            LineageMap::Index(ix) => ix.len(),
            LineageMap::Runs(r) => r.len(),
            LineageMap::Partitioned(p) => p.len(),
            LineageMap::Shift { len, .. }
            | LineageMap::Div { len, .. }
            | LineageMap::Block { len, .. }
            | LineageMap::Mod { len, .. }
            | LineageMap::Stride { len, .. }
            | LineageMap::Whole { len, .. } => *len,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Visits the targets of `src` in stored order.
    #[inline]
    pub fn for_each(&self, src: Rid, mut f: impl FnMut(Rid)) {
        let s = src as usize;
        match self {
            LineageMap::Identity(_) => f(src),
            LineageMap::Array(a) => {
                if let Some(r) = a.get(s) {
                    f(r)
                }
            }
            LineageMap::Index(ix) => ix.bucket(s).iter().for_each(f),
            LineageMap::Runs(r) => r.run(s).for_each(f),
            LineageMap::Partitioned(p) => p.for_each(s, f),
            LineageMap::Shift { lo, hi, delta, .. } => {
                if (*lo..*hi).contains(&src) {
                    f((src as i64 + delta) as Rid)
                }
            }
            LineageMap::Div { divisor, .. } => f(src / divisor),
            LineageMap::Block { width, .. } => (src * width..(src + 1) * width).for_each(f),
            LineageMap::Mod { modulus, .. } => f(src % modulus),
            LineageMap::Stride { stride, count, .. } => {
                (0..*count).for_each(|k| f(src + k * stride))
            }
            LineageMap::Whole { target_len, .. } => (0..*target_len as Rid).for_each(f),
        }
    }

    pub fn targets(&self, src: Rid) -> Vec<Rid> {
        let mut out = Vec::new();
        self.for_each(src, |r| out.push(r));
        out
    }

    pub fn bucket_len(&self, src: Rid) -> usize {
        let s = src as usize;
        match self {
            LineageMap::Identity(_) | LineageMap::Div { .. } | LineageMap::Mod { .. } => 1,
            LineageMap::Array(a) => (a.as_slice()[s] != MISS) as usize,
            LineageMap::Index(ix) => ix.bucket(s).len(),
            LineageMap::Runs(r) => r.run(s).len(),
            LineageMap::Partitioned(p) => p.bucket_len(s),
            LineageMap::Shift { lo, hi, .. } => (*lo..*hi).contains(&src) as usize,
            LineageMap::Block { width, .. } => *width as usize,
            LineageMap::Stride { count, .. } => *count as usize,
            LineageMap::Whole { target_len, .. } => *target_len,
        }
    }

    /// True when every source has at most one target.
    pub fn is_single_valued(&self) -> bool {
        matches!(
            self,
            LineageMap::Identity(_)
                | LineageMap::Array(_)
                | LineageMap::Shift { .. }
                | LineageMap::Div { .. }
                | LineageMap::Mod { .. }
        )
    }

    /// True when the map is computed rather than stored.
    pub fn is_arithmetic(&self) -> bool {
        matches!(
            self,
            LineageMap::Identity(_)
                | LineageMap::Shift { .. }
                | LineageMap::Div { .. }
                | LineageMap::Block { .. }
                | LineageMap::Mod { .. }
                | LineageMap::Stride { .. }
                | LineageMap::Whole { .. }
        )
    }

    pub fn growth_events(&self) -> u64 {
        match self {
            LineageMap::Array(a) => a.growth_events(),
            LineageMap::Index(ix) => ix.growth_events(),
            LineageMap::Partitioned(p) => p.growth_events(),
            _ => 0,
        }
    }

    pub fn bytes(&self) -> usize {
        match self {
            LineageMap::Array(a) => a.bytes(),
            LineageMap::Index(ix) => ix.bytes(),
            LineageMap::Runs(r) => r.bytes(),
            LineageMap::Partitioned(p) => p.bytes(),
            _ => 0,
        }
    }

    /// Every bucket materialized as a list, for comparisons and debug dumps.
    pub fn dump(&self) -> Vec<Vec<Rid>> {
        (0..self.len() as Rid).map(|s| self.targets(s)).collect()
    }

    pub fn kind(&self) -> &'static str {
        match self {
            LineageMap::Identity(_) => "identity",
            LineageMap::Array(_) => "array",
            LineageMap::Index(_) => "index",
            LineageMap::Runs(_) => "runs",
            LineageMap::Partitioned(_) => "partitioned",
            LineageMap::Shift { .. } => "shift",
            LineageMap::Div { .. } => "div",
            LineageMap::Block { .. } => "block",
            LineageMap::Mod { .. } => "mod",
            LineageMap::Stride { .. } => "stride",
            LineageMap::Whole { .. } => "whole",
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn arithmetic_cross_maps() {
        // |A| = 2, |B| = 3, i-major
        let bw_a = LineageMap::Div { len: 6, divisor: 3 };
        let bw_b = LineageMap::Mod { len: 6, modulus: 3 };
        assert_eq!((bw_a.targets(4), bw_b.targets(4)), (vec![1], vec![1]));
        let fw_b = LineageMap::Stride { len: 3, stride: 3, count: 2 };
        assert_eq!(fw_b.targets(1), vec![1, 4]);
        let fw_a = LineageMap::Block { len: 2, width: 3 };
        assert_eq!(fw_a.targets(1), vec![3, 4, 5]);
    }

    #[test]
    fn shift_split() {
        let bw_b = LineageMap::Shift { len: 5, lo: 2, hi: 5, delta: -2 };
        assert_eq!(bw_b.dump(), vec![vec![], vec![], vec![0], vec![1], vec![2]]);
    }
}
