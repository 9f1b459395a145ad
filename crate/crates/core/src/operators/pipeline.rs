//! Push-based pipelines over rid tuples.

use std::hash::BuildHasher;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use hashbrown::HashTable;
use rustc_hash::FxBuildHasher;
use smallvec::SmallVec;

use super::fastscan::ScanFilter;
use super::OperatorOutput;
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::lineage::Rid;
use crate::relstore::{Relation, Value};

pub(crate) type Key = SmallVec<[Value; 2]>;

/// Counts base rows read by pipeline sources.
pub type ScanCounter = Arc<AtomicU64>;

#[derive(Clone, Debug)]
pub enum Source {
    /// Every row of the slot's relation.
    Scan,
    /// The given rows, in order.
    Rids(Arc<Vec<Rid>>),
}

#[derive(Clone, Debug)]
pub enum Step {
    Filter(Expr),
    /// Looks up the key in a built table and emits one row per match.
    Probe { table: Arc<JoinTable>, keys: Vec<Expr> },
}

/// A source followed by filters and probes. Rows are rid tuples indexed by
/// slot; slots not yet bound hold stale values.
#[derive(Clone, Debug)]
pub struct Pipeline {
    pub parts: Arc<Vec<OperatorOutput>>,
    pub slot: usize,
    pub source: Source,
    pub steps: Vec<Step>,
    pub scans: Option<ScanCounter>,
}

impl Pipeline {
    pub fn scan(parts: Arc<Vec<OperatorOutput>>, slot: usize) -> Self {
        Pipeline {
            parts,
            slot,
            source: Source::Scan,
            steps: Vec::new(),
            scans: None,
        }
    }

    pub fn with_step(mut self, step: Step) -> Self {
        self.steps.push(step);
        self
    }

    pub fn with_scans(mut self, scans: Option<ScanCounter>) -> Self {
        self.scans = scans;
        self
    }

    pub fn rels(&self) -> Vec<&Relation> {
        self.parts.iter().map(|p| p.relation.as_ref()).collect()
    }

    /// Slots bound once a row leaves the last step.
    pub fn bound_slots(&self) -> Vec<usize> {
        let mut out = vec![self.slot];
        for s in &self.steps {
            if let Step::Probe { table, .. } = s {
                out.extend_from_slice(table.slots());
            }
        }
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Rows the source will read.
    pub fn source_len(&self) -> usize {
        match &self.source {
            Source::Scan => self.parts[self.slot].relation.row_count(),
            Source::Rids(r) => r.len(),
        }
    }

    /// Pushes every qualifying row into `f`.
    pub fn run(&self, mut f: impl FnMut(&[Rid])) {
        let rels = self.rels();
        let rel = rels[self.slot];
        if let Some(s) = &self.scans {
            s.fetch_add(self.source_len() as u64, Ordering::Relaxed);
        }
        let mut row: Vec<Rid> = vec![0; self.parts.len()];
        let slot = self.slot;
        match &self.source {
            Source::Scan => {
                if let Some(Step::Filter(e)) = self.steps.first() {
                    if let Some(sf) = ScanFilter::compile(e, slot, rel) {
                        let sel = sf.select(None);
                        let rest = &self.steps[1..];
                        for r in sel {
                            row[slot] = r;
                            if sf.residual_ok(&row, &rels) {
                                push(rest, &rels, &mut row, &mut f);
                            }
                        }
                        return;
                    }
                }
                for r in 0..rel.row_count() as Rid {
                    row[slot] = r;
                    push(&self.steps, &rels, &mut row, &mut f);
                }
            }
            Source::Rids(rids) => {
                if let Some(Step::Filter(e)) = self.steps.first() {
                    if let Some(sf) = ScanFilter::compile(e, slot, rel) {
                        let sel = sf.select(Some(rids.as_slice()));
                        let rest = &self.steps[1..];
                        for r in sel {
                            row[slot] = r;
                            if sf.residual_ok(&row, &rels) {
                                push(rest, &rels, &mut row, &mut f);
                            }
                        }
                        return;
                    }
                }
                for &r in rids.iter() {
                    row[slot] = r;
                    push(&self.steps, &rels, &mut row, &mut f);
                }
            }
        }
    }
}

#[inline]
fn push<F: FnMut(&[Rid])>(steps: &[Step], rels: &[&Relation], row: &mut Vec<Rid>, f: &mut F) {
    let Some((step, rest)) = steps.split_first() else {
        f(row);
        return;
    };
    match step {
        Step::Filter(e) => {
            if e.eval_bool(row, rels) {
                push(rest, rels, row, f);
            }
        }
        Step::Probe { table, keys } => {
            let key: Key = keys.iter().map(|k| k.eval(row, rels)).collect();
            if let Some(e) = table.lookup(&key) {
                let w = table.slots.len();
                for tuple in table.tuples(e).chunks_exact(w) {
                    for (&s, &r) in table.slots.iter().zip(tuple) {
                        row[s] = r;
                    }
                    push(rest, rels, row, f);
                }
            }
        }
    }
}

/// Hash table of build-side rid tuples, entries in first-insertion order.
#[derive(Debug)]
pub struct JoinTable {
    slots: Vec<usize>,
    pkfk: bool,
    index: HashTable<u32>,
    keys: Vec<Key>,
    tuples: Vec<Vec<Rid>>,
}

impl JoinTable {
    /// Consumes `p`, keying each row by `keys` and storing its rids at `slots`.
    pub fn build(p: &Pipeline, keys: &[Expr], slots: Vec<usize>, pkfk: bool) -> Result<JoinTable> {
        let mut t = JoinTable {
            slots,
            pkfk,
            index: HashTable::new(),
            keys: Vec::new(),
            tuples: Vec::new(),
        };
        let rels = p.rels();
        let mut dup: Option<Key> = None;
        p.run(|row| {
            let key: Key = keys.iter().map(|k| k.eval(row, &rels)).collect();
            let e = match t.lookup(&key) {
                Some(e) => {
                    if t.pkfk && dup.is_none() {
                        dup = Some(key);
                    }
                    e
                }
                None => t.insert(key),
            };
            let tuple = &mut t.tuples[e];
            tuple.extend(t.slots.iter().map(|&s| row[s]));
        });
        if let Some(k) = dup {
            let k: Vec<String> = k.iter().map(Value::to_string).collect();
            return Err(Error::DuplicateKey(k.join(", ")));
        }
        Ok(t)
    }

    fn insert(&mut self, key: Key) -> usize {
        let e = self.keys.len();
        let h = FxBuildHasher.hash_one(&key[..]);
        let keys = &self.keys;
        self.index
            .insert_unique(h, e as u32, |&i| FxBuildHasher.hash_one(&keys[i as usize][..]));
        self.keys.push(key);
        self.tuples.push(Vec::new());
        e
    }

    #[inline]
    pub fn lookup(&self, key: &[Value]) -> Option<usize> {
        let h = FxBuildHasher.hash_one(key);
        self.index
            .find(h, |&i| self.keys[i as usize][..] == *key)
            .map(|&i| i as usize)
    }

    /// Flattened rid tuples of entry `e`, `width()` rids each.
    pub fn tuples(&self, e: usize) -> &[Rid] {
        &self.tuples[e]
    }

    pub fn width(&self) -> usize {
        self.slots.len()
    }

    pub fn slots(&self) -> &[usize] {
        &self.slots
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn is_pkfk(&self) -> bool {
        self.pkfk
    }

    pub fn key(&self, e: usize) -> &[Value] {
        &self.keys[e]
    }
}

/// Insertion-ordered hash map from keys to dense ids.
#[derive(Debug, Default)]
pub(crate) struct KeyTable {
    index: HashTable<u32>,
    keys: Vec<Key>,
}

impl KeyTable {
    #[inline]
    pub fn find(&self, key: &[Value]) -> Option<u32> {
        let h = FxBuildHasher.hash_one(key);
        self.index.find(h, |&i| self.keys[i as usize][..] == *key).copied()
    }

    /// Returns the id of `key` and whether it was inserted.
    #[inline]
    pub fn find_or_insert(&mut self, key: &[Value]) -> (u32, bool) {
        let h = FxBuildHasher.hash_one(key);
        if let Some(&i) = self.index.find(h, |&i| self.keys[i as usize][..] == *key) {
            return (i, false);
        }
        let id = self.keys.len() as u32;
        let keys = &self.keys;
        self.index
            .insert_unique(h, id, |&i| FxBuildHasher.hash_one(&keys[i as usize][..]));
        self.keys.push(key.iter().cloned().collect());
        (id, true)
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn keys(&self) -> &[Key] {
        &self.keys
    }
}
