//! The instrumented physical algebra.
//!
//! Every operator computes its relational output and, when capture is on,
//! lineage from its output rids to the base relations its inputs trace to.

mod agg;
mod capture;
mod collect;
mod fastscan;
mod groupby;
mod join;
mod nlj;
mod pipeline;
mod setops;

use std::sync::Arc;

use serde_json::Value as Json;

use crate::lineage::{BundleData, LineageBundle, LineageMap, RelationLineage};
use crate::relstore::Relation;

pub use agg::{AggAcc, AggFunc, AggSpec};
pub use capture::{
    resolve_targets, CaptureMode, CaptureScope, CaptureSpec, CubeSpec, EdgeMaps, HashMapSink,
    LineageSink, PartitionSpec, Shape, Target, TargetOptions, Tracer,
};
pub use collect::{collect, project, select, OutputColumn};
pub use groupby::{groupby, run_groupby, GroupSpec};
pub use join::{hashjoin, JoinOptions};
pub use nlj::{cross_product, nlj};
pub use pipeline::{JoinTable, Pipeline, ScanCounter, Source, Step};
pub use setops::{bag_diff, bag_intersect, bag_union, set_diff, set_intersect, set_union};

/// A relation with its lineage to base relations.
#[derive(Clone, Debug)]
pub struct OperatorOutput {
    pub relation: Arc<Relation>,
    pub bundle: Option<Arc<LineageBundle>>,
}

impl OperatorOutput {
    /// A base relation; its lineage is the implicit identity.
    pub fn scan(relation: Arc<Relation>) -> Self {
        let n = relation.row_count();
        let mut data = BundleData::default();
        data.relations.insert(
            relation.name().to_string(),
            RelationLineage {
                backward: Some(LineageMap::Identity(n)),
                forward: Some(LineageMap::Identity(n)),
                cube: None,
                base_len: n,
            },
        );
        OperatorOutput {
            relation,
            bundle: Some(Arc::new(LineageBundle::ready(n, data))),
        }
    }

    /// A relation without lineage.
    pub fn uncaptured(relation: Arc<Relation>) -> Self {
        OperatorOutput {
            relation,
            bundle: None,
        }
    }

    pub fn lineage(&self, base: &str) -> Option<&RelationLineage> {
        self.bundle.as_ref().and_then(|b| b.relation(base))
    }

    pub fn backward(&self, base: &str) -> Option<&LineageMap> {
        self.lineage(base).and_then(|l| l.backward.as_ref())
    }

    pub fn forward(&self, base: &str) -> Option<&LineageMap> {
        self.lineage(base).and_then(|l| l.forward.as_ref())
    }

    /// Resolves a deferred bundle.
    pub fn finalize(&self) {
        if let Some(b) = &self.bundle {
            b.finalize();
        }
    }

    pub fn dump(&self) -> Json {
        self.bundle.as_ref().map_or(Json::Null, |b| b.dump_json())
    }
}

/// Column names of `a` followed by those of `b`, suffixing clashes.
pub(crate) fn joined_names(a: &Relation, b: &Relation) -> Vec<String> {
    let mut names: Vec<String> = a.schema().fields().iter().map(|f| f.name.clone()).collect();
    for f in b.schema().fields() {
        let mut name = f.name.clone();
        let mut k = 2;
        while names.contains(&name) {
            name = format!("{}_{k}", f.name);
            k += 1;
        }
        names.push(name);
    }
    names
}
