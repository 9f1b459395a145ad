use std::fmt;

/// Dense 0-based record identifier.
pub type Rid = u32;

/// Marks a forward-array slot whose input row produced no output.
pub const MISS: Rid = u32::MAX;

/// Capacity of a rid array created without a hint.
pub const DEFAULT_CAPACITY: usize = 10;

/// Capacity after one growth step: 1.5x (integer), or 10 from empty.
#[inline]
pub fn next_capacity(cur: usize) -> usize {
    if cur == 0 {
        DEFAULT_CAPACITY
    } else {
        (cur + cur / 2).max(cur + 1)
    }
}

/// Append-only rid container with explicit capacity management and a
/// growth-event counter.
#[derive(Clone, Default)]
pub struct RidArray {
    rids: Vec<Rid>,
    capacity: usize,
    growth: u32,
}

impl RidArray {
    pub fn new() -> Self {
        RidArray::with_capacity(DEFAULT_CAPACITY)
    }

    pub fn with_capacity(capacity: usize) -> Self {
        RidArray {
            rids: Vec::with_capacity(capacity),
            capacity,
            growth: 0,
        }
    }

    /// `len` copies of `value`, sized exactly.
    pub fn filled(len: usize, value: Rid) -> Self {
        RidArray {
            rids: vec![value; len],
            capacity: len,
            growth: 0,
        }
    }

    pub fn from_vec(rids: Vec<Rid>) -> Self {
        let capacity = rids.len();
        RidArray {
            rids,
            capacity,
            growth: 0,
        }
    }

    #[inline]
    pub fn push(&mut self, rid: Rid) {
        if self.rids.len() == self.capacity {
            self.grow();
        }
        self.rids.push(rid);
    }

    #[cold]
    fn grow(&mut self) {
        let next = next_capacity(self.capacity);
        self.rids.reserve_exact(next - self.rids.len());
        self.capacity = next;
        self.growth += 1;
    }

    pub fn extend_from_slice(&mut self, rids: &[Rid]) {
        for &r in rids {
            self.push(r);
        }
    }

    #[inline]
    pub fn set(&mut self, i: usize, rid: Rid) {
        self.rids[i] = rid;
    }

    /// Entry `i`, or `None` for a MISS slot.
    #[inline]
    pub fn get(&self, i: usize) -> Option<Rid> {
        match self.rids[i] {
            MISS => None,
            r => Some(r),
        }
    }

    pub fn len(&self) -> usize {
        self.rids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rids.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn growth_events(&self) -> u64 {
        self.growth as u64
    }

    pub fn as_slice(&self) -> &[Rid] {
        &self.rids
    }

    pub fn iter(&self) -> impl Iterator<Item = Rid> + '_ {
        self.rids.iter().copied()
    }

    pub fn into_vec(self) -> Vec<Rid> {
        self.rids
    }

    pub fn sort(&mut self) {
        self.rids.sort_unstable();
    }

    /// Allocated bytes for rid payload.
    pub fn bytes(&self) -> usize {
        self.capacity * std::mem::size_of::<Rid>()
    }
}

impl PartialEq for RidArray {
    fn eq(&self, other: &Self) -> bool {
        self.rids == other.rids
    }
}

impl Eq for RidArray {}

impl fmt::Debug for RidArray {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.rids.iter()).finish()
    }
}

impl From<Vec<Rid>> for RidArray {
    fn from(v: Vec<Rid>) -> Self {
        RidArray::from_vec(v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_capacity_is_ten() {
        let a = RidArray::new();
        assert_eq!((a.capacity(), a.len()), (10, 0));
    }

    #[test]
    fn zero_hint_grows_to_ten() {
        let mut a = RidArray::with_capacity(0);
        assert_eq!(a.capacity(), 0);
        a.push(1);
        assert_eq!((a.capacity(), a.growth_events()), (10, 1));
    }

    #[test]
    fn sixteen_appends_two_growths() {
        let mut a = RidArray::new();
        for r in 0..16 {
            a.push(r);
        }
        assert_eq!(a.growth_events(), 2);
        assert_eq!(a.capacity(), 22);
        assert_eq!(a.as_slice(), (0..16).collect::<Vec<_>>().as_slice());
    }

    #[test]
    fn capacity_trace() {
        let mut a = RidArray::new();
        let mut trace = vec![a.capacity()];
        for r in 0..200 {
            a.push(r);
            if *trace.last().unwrap() != a.capacity() {
                trace.push(a.capacity());
            }
        }
        assert_eq!(&trace[..6], &[10, 15, 22, 33, 49, 73]);
    }

    #[test]
    fn exact_capacity_never_grows() {
        let mut a = RidArray::with_capacity(5);
        for r in 0..5 {
            a.push(r);
        }
        assert_eq!(a.growth_events(), 0);
    }

    #[test]
    fn miss_reads_as_none() {
        let mut a = RidArray::filled(3, MISS);
        a.set(1, 7);
        assert_eq!((a.get(0), a.get(1)), (None, Some(7)));
    }
}
