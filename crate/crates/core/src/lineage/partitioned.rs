use indexmap::IndexMap;
use rustc_hash::{FxBuildHasher, FxHashSet};

use super::rid_array::{Rid, RidArray};
use super::rid_index::RidIndex;
use crate::error::{Error, Result};
use crate::relstore::{Relation, Value};

/// Encoded partition key: one value per partitioning attribute.
pub type PartitionKey = Vec<Value>;

type PartitionMap = IndexMap<PartitionKey, RidArray, FxBuildHasher>;

/// Rid index whose buckets are split by the value of one or more attributes
/// of the referenced base relation.
#[derive(Clone, Debug)]
pub struct PartitionedRidIndex {
    key_attrs: Vec<String>,
    domain: Vec<PartitionKey>,
    members: FxHashSet<PartitionKey>,
    buckets: Vec<PartitionMap>,
}

impl PartitionedRidIndex {
    pub fn new(n_buckets: usize, key_attrs: Vec<String>, domain: Vec<PartitionKey>) -> Self {
        let members = domain.iter().cloned().collect();
        PartitionedRidIndex {
            key_attrs,
            domain,
            members,
            buckets: (0..n_buckets).map(|_| PartitionMap::default()).collect(),
        }
    }

    /// Appends `rid` to partition `key` of `bucket`.
    pub fn push(&mut self, bucket: usize, key: &[Value], rid: Rid) -> Result<()> {
        if !self.members.contains(key) {
            return Err(Error::OutsideDomain {
                attr: self.key_attrs.join(","),
                value: format_key(key),
            });
        }
        let map = &mut self.buckets[bucket];
        match map.get_mut(key) {
            Some(arr) => arr.push(rid),
            None => {
                let mut arr = RidArray::new();
                arr.push(rid);
                map.insert(key.to_vec(), arr);
            }
        }
        Ok(())
    }

    /// Appends empty buckets until there are `n`.
    pub fn ensure_len(&mut self, n: usize) {
        while self.buckets.len() < n {
            self.buckets.push(PartitionMap::default());
        }
    }

    pub fn key_attrs(&self) -> &[String] {
        &self.key_attrs
    }

    pub fn domain(&self) -> &[PartitionKey] {
        &self.domain
    }

    pub fn len(&self) -> usize {
        self.buckets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buckets.is_empty()
    }

    /// Partition `key` of `bucket`, if any rid landed there.
    pub fn partition(&self, bucket: usize, key: &[Value]) -> Option<&RidArray> {
        self.buckets[bucket].get(key)
    }

    pub fn partitions(&self, bucket: usize) -> impl Iterator<Item = (&PartitionKey, &RidArray)> {
        self.buckets[bucket].iter()
    }

    /// Visits every rid of `bucket`, partition by partition.
    pub fn for_each(&self, bucket: usize, mut f: impl FnMut(Rid)) {
        for arr in self.buckets[bucket].values() {
            arr.iter().for_each(&mut f);
        }
    }

    pub fn bucket_len(&self, bucket: usize) -> usize {
        self.buckets[bucket].values().map(RidArray::len).sum()
    }

    /// Concatenates each bucket's partitions into a plain index.
    pub fn flatten(&self) -> RidIndex {
        let mut out = RidIndex::new(0, None);
        for map in &self.buckets {
            let mut arr = RidArray::with_capacity(map.values().map(RidArray::len).sum());
            for part in map.values() {
                arr.extend_from_slice(part.as_slice());
            }
            out.push_bucket(arr);
        }
        out
    }

    pub fn growth_events(&self) -> u64 {
        self.buckets
            .iter()
            .flat_map(|m| m.values())
            .map(RidArray::growth_events)
            .sum()
    }

    pub fn bytes(&self) -> usize {
        self.buckets
            .iter()
            .map(|m| {
                m.values().map(|a| a.bytes() + std::mem::size_of::<RidArray>()).sum::<usize>()
                    + m.len() * 16
            })
            .sum()
    }
}

fn format_key(key: &[Value]) -> String {
    key.iter().map(Value::to_string).collect::<Vec<_>>().join("|")
}

/// Splits every bucket of `idx` by the values of `key_attrs` in `base`.
pub fn partition_index(
    idx: &RidIndex,
    base: &Relation,
    key_attrs: &[&str],
    key_domain: Vec<PartitionKey>,
) -> Result<PartitionedRidIndex> {
    let cols = key_attrs
        .iter()
        .map(|a| {
            base.schema()
                .index_of(a)
                .ok_or_else(|| Error::Bind(format!("{} has no attribute {a}", base.name())))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut out = PartitionedRidIndex::new(
        idx.len(),
        key_attrs.iter().map(|s| s.to_string()).collect(),
        key_domain,
    );
    let mut key = Vec::with_capacity(cols.len());
    for (b, bucket) in idx.buckets().iter().enumerate() {
        for r in bucket.iter() {
            key.clear();
            key.extend(cols.iter().map(|&c| base.value(c, r)));
            out.push(b, &key, r)?;
        }
    }
    Ok(out)
}
