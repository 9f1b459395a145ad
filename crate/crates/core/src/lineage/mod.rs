//! Lineage containers: rid arrays, rid indexes, partitioned indexes and the
//! per-result bundle that ties them to base relations.

mod bundle;
mod map;
mod partitioned;
mod rid_array;
mod rid_index;

pub use bundle::{BundleData, LineageBundle, RelationLineage};
pub use map::LineageMap;
pub use partitioned::{partition_index, PartitionKey, PartitionedRidIndex};
pub use rid_array::{next_capacity, Rid, RidArray, DEFAULT_CAPACITY, MISS};
pub use rid_index::{RidIndex, RunIndex};
