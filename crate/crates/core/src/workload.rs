//! Declared lineage-consuming workloads and the capture options they imply.
//!
//! A workload is a JSON document:
//!
//! ```json
//! {"templates": [{
//!   "direction": "backward",
//!   "base_relation": "lineitem",
//!   "static_predicate": "l_shipdate = date '1996-12-25'",
//!   "param_predicates": [{"attr": "l_shipmode", "domain": ["AIR", "MAIL"]}],
//!   "extra_groupby": {"attrs": ["l_tax"], "aggs": ["sum(l_quantity)", "count(*)"]}
//! }]}
//! ```
//!
//! Templates on the same relation are merged: directions are united, static
//! predicates are OR-ed (a template without one disables the pushdown), and
//! the first partitioning and extra group-by win.

use std::sync::Arc;

use indexmap::IndexMap;
use rustc_hash::FxBuildHasher;
use serde::{Deserialize, Serialize};
use serde_json::Value as Json;

use crate::error::{Error, Result};
use crate::expr::{BinOp, Expr};
use crate::lineage::{PartitionKey, Rid};
use crate::operators::{AggAcc, AggFunc, CaptureMode, CaptureSpec, CubeSpec, PartitionSpec, TargetOptions};
use crate::relstore::{parse_date, Catalog, DataType, Relation, Value};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Backward,
    Forward,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamPredicate {
    pub attr: String,
    pub domain: Vec<Json>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExtraGroupBy {
    pub attrs: Vec<String>,
    pub aggs: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Template {
    pub direction: Direction,
    pub base_relation: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub static_predicate: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub param_predicates: Vec<ParamPredicate>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub extra_groupby: Option<ExtraGroupBy>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct WorkloadSpec {
    #[serde(default)]
    pub templates: Vec<Template>,
}

impl WorkloadSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Workload(e.to_string()))
    }

    pub fn backward(base: &str) -> Self {
        WorkloadSpec {
            templates: vec![Template::new(Direction::Backward, base)],
        }
    }

    /// Capture spec covering exactly the referenced relations and directions.
    pub fn to_capture(&self, catalog: &Catalog, mode: CaptureMode) -> Result<CaptureSpec> {
        if self.templates.is_empty() {
            return Ok(CaptureSpec::none());
        }
        let mut merged: IndexMap<String, (TargetOptions, bool)> = IndexMap::new();
        for t in &self.templates {
            let base = catalog
                .get(&t.base_relation)
                .map_err(|_| Error::Workload(format!("unknown relation {}", t.base_relation)))?
                .clone();
            let pred = t
                .static_predicate
                .as_deref()
                .map(|p| crate::planner::bind_scalar(p, &base))
                .transpose()?;
            if let Some(p) = &pred {
                if p.dtype(&[&base])? != DataType::Bool {
                    return Err(Error::Workload(format!("static predicate {p} is not boolean")));
                }
            }
            let partition = (!t.param_predicates.is_empty())
                .then(|| partition_spec(&t.param_predicates, &base))
                .transpose()?;
            let cube = t.extra_groupby.as_ref().map(|g| cube_spec(g, &base)).transpose()?;
            let first = !merged.contains_key(&t.base_relation);
            let (opts, pred_ok) = merged.entry(t.base_relation.clone()).or_insert_with(|| {
                (
                    TargetOptions {
                        backward: false,
                        forward: false,
                        base: Some(base.clone()),
                        ..TargetOptions::default()
                    },
                    true,
                )
            });
            match t.direction {
                Direction::Backward => opts.backward = true,
                Direction::Forward => opts.forward = true,
            }
            match pred {
                Some(p) if *pred_ok => {
                    opts.predicate = Some(match opts.predicate.take() {
                        Some(q) if !first => Expr::binary(BinOp::Or, q, p),
                        _ => p,
                    })
                }
                _ => {
                    *pred_ok = false;
                    opts.predicate = None;
                }
            }
            if opts.partition.is_none() {
                opts.partition = partition.map(Arc::new);
            }
            if opts.cube.is_none() {
                opts.cube = cube.map(Arc::new);
            }
        }
        let relations = merged.into_iter().map(|(k, (o, _))| (k, o)).collect();
        Ok(CaptureSpec::only(mode, relations))
    }
}

impl Template {
    pub fn new(direction: Direction, base: &str) -> Self {
        Template {
            direction,
            base_relation: base.to_string(),
            static_predicate: None,
            param_predicates: Vec::new(),
            extra_groupby: None,
        }
    }
}

fn column(base: &Relation, attr: &str) -> Result<usize> {
    base.schema()
        .index_of(attr)
        .ok_or_else(|| Error::Workload(format!("{} has no attribute {attr}", base.name())))
}

/// Converts a JSON domain value to the attribute's type.
pub fn domain_value(v: &Json, dtype: DataType) -> Result<Value> {
    let bad = || Error::Workload(format!("domain value {v} does not fit a {dtype} attribute"));
    Ok(match dtype {
        DataType::Int64 => Value::Int(v.as_i64().ok_or_else(bad)?),
        DataType::Float64 => Value::Float(v.as_f64().ok_or_else(bad)?),
        DataType::Text => Value::text(v.as_str().ok_or_else(bad)?),
        DataType::Date => Value::Date(v.as_str().and_then(parse_date).ok_or_else(bad)?),
        DataType::Bool => Value::Bool(v.as_bool().ok_or_else(bad)?),
    })
}

fn partition_spec(params: &[ParamPredicate], base: &Relation) -> Result<PartitionSpec> {
    let mut cols = Vec::new();
    let mut per_attr: Vec<Vec<Value>> = Vec::new();
    for p in params {
        let c = column(base, &p.attr)?;
        if p.domain.is_empty() {
            return Err(Error::Workload(format!("empty domain for {}", p.attr)));
        }
        let dtype = base.schema().field(c).dtype;
        cols.push(c);
        per_attr.push(p.domain.iter().map(|v| domain_value(v, dtype)).collect::<Result<_>>()?);
    }
    let mut domain: Vec<PartitionKey> = vec![Vec::new()];
    for values in &per_attr {
        domain = domain
            .into_iter()
            .flat_map(|k| {
                values.iter().map(move |v| {
                    let mut k = k.clone();
                    k.push(v.clone());
                    k
                })
            })
            .collect();
    }
    Ok(PartitionSpec {
        attrs: params.iter().map(|p| p.attr.clone()).collect(),
        cols,
        domain,
    })
}

fn cube_spec(g: &ExtraGroupBy, base: &Relation) -> Result<CubeSpec> {
    let mut keys = Vec::new();
    for a in &g.attrs {
        keys.push(
            crate::planner::bind_scalar(a, base)
                .map_err(|e| Error::Workload(format!("extra group-by {a}: {e}")))?,
        );
    }
    let mut agg_names = Vec::new();
    let mut aggs = Vec::new();
    for text in &g.aggs {
        let (name, spec) = crate::planner::bind_aggregate(text, base)
            .map_err(|e| Error::Workload(format!("aggregate {text}: {e}")))?;
        if !spec.func.is_mergeable() {
            return Err(Error::Workload(format!("{} cannot be computed during capture", spec.func.name())));
        }
        agg_names.push(name);
        aggs.push(spec);
    }
    Ok(CubeSpec {
        key_names: keys.iter().map(|k| k.to_string()).collect(),
        keys,
        agg_names,
        aggs,
    })
}

pub type CubeCells = IndexMap<Vec<Value>, Vec<AggAcc>, FxBuildHasher>;

/// Aggregate state per output row and extra group-by key, filled during capture.
#[derive(Clone, Debug)]
pub struct AggCube {
    spec: Arc<CubeSpec>,
    cells: Vec<CubeCells>,
}

impl AggCube {
    pub fn new(spec: Arc<CubeSpec>, cells: Vec<CubeCells>) -> Self {
        AggCube { spec, cells }
    }

    pub fn spec(&self) -> &CubeSpec {
        &self.spec
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn cells(&self, out: Rid) -> &CubeCells {
        &self.cells[out as usize]
    }

    /// Merged states over several output rows, keys in first-seen order.
    pub fn merged(&self, outs: &[Rid]) -> CubeCells {
        let mut acc = CubeCells::default();
        for &o in outs {
            for (k, states) in &self.cells[o as usize] {
                match acc.get_mut(k) {
                    Some(cur) => cur.iter_mut().zip(states).for_each(|(a, b)| a.merge(b)),
                    None => {
                        acc.insert(k.clone(), states.clone());
                    }
                }
            }
        }
        acc
    }

    pub fn growth_events(&self) -> u64 {
        0
    }

    pub fn bytes(&self) -> usize {
        self.cells
            .iter()
            .flat_map(|c| c.iter())
            .map(|(k, v)| k.len() * 16 + v.iter().map(AggAcc::bytes).sum::<usize>())
            .sum()
    }
}

/// True when `func` can be maintained by merging partial states.
pub fn supports(func: AggFunc) -> bool {
    func.is_mergeable()
}
