use std::fmt;
use std::sync::{Mutex, OnceLock};

use indexmap::IndexMap;
use rustc_hash::FxHashMap;
use serde_json::{json, Value as Json};

use super::map::LineageMap;
use super::rid_array::Rid;
use crate::workload::AggCube;

/// Backward and forward lineage between a result and one base relation.
#[derive(Clone, Debug, Default)]
pub struct RelationLineage {
    /// Output rid -> base rids.
    pub backward: Option<LineageMap>,
    /// Base rid -> output rids.
    pub forward: Option<LineageMap>,
    /// Aggregates pushed into capture, keyed by output rid and extra group key.
    pub cube: Option<AggCube>,
    /// Row count of the base relation.
    pub base_len: usize,
}

impl RelationLineage {
    pub fn growth_events(&self) -> u64 {
        self.backward.as_ref().map_or(0, LineageMap::growth_events)
            + self.forward.as_ref().map_or(0, LineageMap::growth_events)
            + self.cube.as_ref().map_or(0, AggCube::growth_events)
    }

    pub fn bytes(&self) -> usize {
        self.backward.as_ref().map_or(0, LineageMap::bytes)
            + self.forward.as_ref().map_or(0, LineageMap::bytes)
            + self.cube.as_ref().map_or(0, AggCube::bytes)
    }

    /// Checks `o in forward(r)` iff `r in backward(o)`, counting multiplicities.
    pub fn is_dual(&self) -> bool {
        let (Some(bw), Some(fw)) = (&self.backward, &self.forward) else {
            return true;
        };
        let mut edges: FxHashMap<(Rid, Rid), i64> = FxHashMap::default();
        for o in 0..bw.len() as Rid {
            bw.for_each(o, |r| *edges.entry((o, r)).or_default() += 1);
        }
        for r in 0..fw.len() as Rid {
            fw.for_each(r, |o| *edges.entry((o, r)).or_default() -= 1);
        }
        edges.values().all(|&c| c == 0)
    }
}

/// Resolved lineage for every tracked base relation of one result.
#[derive(Clone, Debug, Default)]
pub struct BundleData {
    pub relations: IndexMap<String, RelationLineage>,
    /// Milliseconds spent completing deferred capture, if any.
    pub finalize_ms: f64,
}

type Finalizer = Box<dyn FnOnce() -> BundleData + Send>;

/// Lineage attached to a query result. A deferred bundle is completed on
/// first access or by an explicit `finalize`.
pub struct LineageBundle {
    output_len: usize,
    data: OnceLock<BundleData>,
    pending: Mutex<Option<Finalizer>>,
}

impl LineageBundle {
    pub fn ready(output_len: usize, data: BundleData) -> Self {
        LineageBundle {
            output_len,
            data: OnceLock::from(data),
            pending: Mutex::new(None),
        }
    }

    pub fn pending(output_len: usize, finalize: impl FnOnce() -> BundleData + Send + 'static) -> Self {
        LineageBundle {
            output_len,
            data: OnceLock::new(),
            pending: Mutex::new(Some(Box::new(finalize))),
        }
    }

    pub fn output_len(&self) -> usize {
        self.output_len
    }

    pub fn is_pending(&self) -> bool {
        self.data.get().is_none()
    }

    /// Completes deferred capture. Later calls return the same data.
    pub fn finalize(&self) -> &BundleData {
        self.data.get_or_init(|| {
            let f = self
                .pending
                .lock()
                .expect("finalizer lock")
                .take()
                .expect("pending bundle holds a finalizer");
            let start = std::time::Instant::now();
            let mut data = f();
            data.finalize_ms += start.elapsed().as_secs_f64() * 1e3;
            data
        })
    }

    pub fn data(&self) -> &BundleData {
        self.finalize()
    }

    pub fn relation(&self, name: &str) -> Option<&RelationLineage> {
        self.finalize().relations.get(name)
    }

    pub fn relation_names(&self) -> Vec<String> {
        self.finalize().relations.keys().cloned().collect()
    }

    pub fn growth_events(&self) -> u64 {
        self.finalize().relations.values().map(RelationLineage::growth_events).sum()
    }

    pub fn index_bytes(&self) -> usize {
        self.finalize().relations.values().map(RelationLineage::bytes).sum()
    }

    /// `{"rel": {"backward": [[..]], "forward": [[..]]}}`, absent directions as null.
    pub fn dump_json(&self) -> Json {
        let mut out = serde_json::Map::new();
        for (name, rl) in &self.finalize().relations {
            out.insert(
                name.clone(),
                json!({
                    "backward": rl.backward.as_ref().map(LineageMap::dump),
                    "forward": rl.forward.as_ref().map(LineageMap::dump),
                }),
            );
        }
        Json::Object(out)
    }
}

impl fmt::Debug for LineageBundle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.data.get() {
            Some(d) => f
                .debug_struct("LineageBundle")
                .field("output_len", &self.output_len)
                .field("relations", &d.relations.keys().collect::<Vec<_>>())
                .finish(),
            None => f
                .debug_struct("LineageBundle")
                .field("output_len", &self.output_len)
                .field("pending", &true)
                .finish(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lineage::{RidArray, RidIndex};
    use std::sync::atomic::{AtomicUsize, Ordering};
    use std::sync::Arc;

    fn sample() -> BundleData {
        let mut d = BundleData::default();
        d.relations.insert(
            "t".into(),
            RelationLineage {
                backward: Some(LineageMap::Index(RidIndex::from_vecs(vec![vec![0, 1], vec![2]]))),
                forward: Some(LineageMap::Array(RidArray::from_vec(vec![0, 0, 1]))),
                cube: None,
                base_len: 3,
            },
        );
        d
    }

    #[test]
    fn pending_finalizes_once() {
        let calls = Arc::new(AtomicUsize::new(0));
        let c = calls.clone();
        let b = LineageBundle::pending(2, move || {
            c.fetch_add(1, Ordering::SeqCst);
            sample()
        });
        assert!(b.is_pending());
        b.finalize();
        b.finalize();
        assert!(b.relation("t").is_some());
        assert_eq!(calls.load(Ordering::SeqCst), 1);
        assert!(!b.is_pending());
    }

    #[test]
    fn dump_and_duality() {
        let b = LineageBundle::ready(2, sample());
        assert_eq!(
            b.dump_json(),
            json!({"t": {"backward": [[0, 1], [2]], "forward": [[0], [0], [1]]}})
        );
        assert!(b.relation("t").unwrap().is_dual());
    }
}
