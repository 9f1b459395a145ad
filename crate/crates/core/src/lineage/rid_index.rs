use std::fmt;

use super::rid_array::{Rid, RidArray};

/// 1-to-N inverted index: one rid array per source record.
#[derive(Clone, Default, PartialEq, Eq)]
pub struct RidIndex {
    buckets: Vec<RidArray>,
}

impl RidIndex {
    /// `n` buckets at default capacity, or preallocated to `hints`.
    pub fn new(n: usize, hints: Option<&[usize]>) -> Self {
        let buckets = match hints {
            Some(h) => {
                assert_eq!(h.len(), n, "one hint per bucket");
                h.iter().map(|&c| RidArray::with_capacity(c)).collect()
            }
            None => (0..n).map(|_| RidArray::new()).collect(),
        };
        RidIndex { buckets }
    }

    pub fn from_buckets(buckets: Vec<RidArray>) -> Self {
        RidIndex { buckets }
    }

    pub fn from_vecs(buckets: Vec<Vec<Rid>>) -> Self {
        RidIndex {
            buckets: buckets.into_iter().map(RidArray::from_vec).collect(),
        }
    }

    #[inline]
    pub fn push(&mut self, bucket: usize, rid: Rid) {
        self.buckets[bucket].push(rid);
    }

    pub fn push_bucket(&mut self, bucket: RidArray) {
        self.buckets.push(bucket);
    }

    pub fn bucket(&self, i: usize) -> &RidArray {
        &self.buckets[i]
    }

    pub fn bucket_mut(&mut self, i: usize) -> &mut RidArray {
        &mut self.buckets[i]
    }

    pub fn buckets(&self) -> &[RidArray] {
        &self.buckets
    }

    pub fn into_buckets(self) -> Vec<RidArray> {
        self.buckets
    }

    pub fn len(&self) -> usize {
        self.buckets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buckets.is_empty()
    }

    pub fn total_rids(&self) -> usize {
        self.buckets.iter().map(RidArray::len).sum()
    }

    pub fn growth_events(&self) -> u64 {
        self.buckets.iter().map(RidArray::growth_events).sum()
    }

    pub fn bytes(&self) -> usize {
        self.buckets.iter().map(RidArray::bytes).sum::<usize>()
            + self.buckets.len() * std::mem::size_of::<RidArray>()
    }
}

impl fmt::Debug for RidIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.buckets.iter()).finish()
    }
}

/// Contiguous output runs, one `(start, len)` pair per source record.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RunIndex {
    starts: Vec<Rid>,
    lens: Vec<u32>,
}

impl RunIndex {
    pub fn new(n: usize) -> Self {
        RunIndex {
            starts: vec![0; n],
            lens: vec![0; n],
        }
    }

    /// Records output `oid` for source `i`; outputs of one source must be consecutive.
    #[inline]
    pub fn note(&mut self, i: usize, oid: Rid) {
        if self.lens[i] == 0 {
            self.starts[i] = oid;
        }
        debug_assert_eq!(self.starts[i] + self.lens[i], oid, "runs must be contiguous");
        self.lens[i] += 1;
    }

    pub fn run(&self, i: usize) -> std::ops::Range<Rid> {
        self.starts[i]..self.starts[i] + self.lens[i]
    }

    pub fn len(&self) -> usize {
        self.starts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.starts.is_empty()
    }

    pub fn bytes(&self) -> usize {
        self.starts.len() * 8
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_index() {
        let ix = RidIndex::new(0, None);
        assert!(ix.is_empty());
        assert_eq!(ix.growth_events(), 0);
    }

    #[test]
    fn exact_hints_never_grow() {
        let mut ix = RidIndex::new(3, Some(&[2, 1, 0]));
        ix.push(0, 4);
        ix.push(0, 5);
        ix.push(1, 6);
        assert_eq!(ix.growth_events(), 0);
        assert_eq!(ix.bucket(0).as_slice(), &[4, 5]);
        assert!(ix.bucket(2).is_empty());
    }

    #[test]
    fn runs() {
        let mut r = RunIndex::new(3);
        r.note(0, 0);
        r.note(0, 1);
        r.note(2, 2);
        assert_eq!(r.run(0), 0..2);
        assert_eq!(r.run(1).len(), 0);
        assert_eq!(r.run(2), 2..3);
    }
}
