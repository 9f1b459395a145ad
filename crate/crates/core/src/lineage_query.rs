//! Result handles and lineage queries over them.
//!
//! A [`Session`] runs SQL against a catalog and keeps every result under a
//! handle. Later queries read lineage through the `backward(..)` and
//! `forward(..)` table functions, or through the direct methods here.

use std::cell::Cell;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::Instant;

use indexmap::{IndexMap, IndexSet};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::expr::{BinOp, Expr};
use crate::lineage::{LineageMap, Rid};
use crate::operators::{project, CaptureMode, CaptureSpec, OperatorOutput, ScanCounter, Source};
use crate::planner::ast::{LineageCall, RidSetAst};
use crate::planner::{
    bind_sql, execute, lower, Block, BoundFrom, Grouped, Inputs, LogicalPlan, OpStat, Resolver,
};
use crate::relstore::{Catalog, Relation, RelationBuilder, Value};
use crate::workload::WorkloadSpec;

#[derive(Clone, Debug, Default)]
pub struct ExecOptions {
    pub mode: CaptureMode,
    pub workload: Option<WorkloadSpec>,
    /// Runs every operator separately instead of fusing pipelines.
    pub naive: bool,
    /// Handle to store the result under; generated when absent.
    pub handle: Option<String>,
}

impl ExecOptions {
    pub fn mode(mode: CaptureMode) -> Self {
        ExecOptions {
            mode,
            ..ExecOptions::default()
        }
    }

    pub fn with_workload(mut self, w: WorkloadSpec) -> Self {
        self.workload = Some(w);
        self
    }

    pub fn with_handle(mut self, h: impl Into<String>) -> Self {
        self.handle = Some(h.into());
        self
    }

    pub fn naive(mut self, naive: bool) -> Self {
        self.naive = naive;
        self
    }
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct QueryStats {
    /// Planning and execution, capture included; deferred work excluded.
    pub total_ms: f64,
    pub operators: Vec<OpStat>,
    pub materialization_points: usize,
    pub pipelines: usize,
    /// Rows read by pipeline sources.
    pub base_scans: u64,
    /// Whether a partitioned index answered a lineage input.
    pub data_skipping: bool,
    /// Whether the result was read from a captured aggregate cube.
    pub cube_fetch: bool,
}

#[derive(Debug)]
pub struct QueryResult {
    pub handle: String,
    pub sql: String,
    pub mode: CaptureMode,
    pub output: OperatorOutput,
    pub logical: LogicalPlan,
    /// Printed physical plan; empty for cube fetches.
    pub plan: String,
    pub grouped: Option<Grouped>,
    pub stats: QueryStats,
}

impl QueryResult {
    pub fn relation(&self) -> &Arc<Relation> {
        &self.output.relation
    }

    pub fn row_count(&self) -> usize {
        self.output.relation.row_count()
    }

    /// Resolves deferred lineage; returns the time spent doing so.
    pub fn finalize(&self) -> f64 {
        self.output.bundle.as_ref().map_or(0.0, |b| b.finalize().finalize_ms)
    }

    pub fn growth_events(&self) -> u64 {
        self.output.bundle.as_ref().map_or(0, |b| b.growth_events())
    }

    pub fn index_bytes(&self) -> usize {
        self.output.bundle.as_ref().map_or(0, |b| b.index_bytes())
    }

    /// Base relations with captured lineage, in capture order.
    pub fn lineage_relations(&self) -> Vec<String> {
        self.output.bundle.as_ref().map_or_else(Vec::new, |b| b.relation_names())
    }

    pub fn backward_map(&self, base: &str) -> Result<&LineageMap> {
        self.output.backward(base).ok_or_else(|| self.no_index(base))
    }

    pub fn forward_map(&self, base: &str) -> Result<&LineageMap> {
        self.output.forward(base).ok_or_else(|| self.no_index(base))
    }

    fn no_index(&self, base: &str) -> Error {
        Error::NoIndex {
            handle: self.handle.clone(),
            relation: base.to_string(),
        }
    }

    fn check_out(&self, rid: Rid) -> Result<()> {
        check_rid(rid, &self.handle, self.row_count())
    }
}

fn check_rid(rid: Rid, relation: &str, len: usize) -> Result<()> {
    if (rid as usize) < len {
        Ok(())
    } else {
        Err(Error::InvalidRid {
            relation: relation.to_string(),
            rid,
            len,
        })
    }
}

/// Which and why provenance of one output row.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Provenance {
    /// Contributing base rows, by relation then rid.
    pub which: Vec<(String, Rid)>,
    /// Witnesses: one base row per relation, jointly producing the output.
    pub why: Vec<Vec<(String, Rid)>>,
}

#[derive(Debug)]
pub struct Session {
    catalog: Arc<Catalog>,
    handles: IndexMap<String, Arc<QueryResult>>,
    scans: ScanCounter,
    next: usize,
}

impl Session {
    pub fn new(catalog: Catalog) -> Self {
        Session::from_arc(Arc::new(catalog))
    }

    pub fn from_arc(catalog: Arc<Catalog>) -> Self {
        Session {
            catalog,
            handles: IndexMap::new(),
            scans: Arc::new(AtomicU64::new(0)),
            next: 1,
        }
    }

    pub fn catalog(&self) -> &Arc<Catalog> {
        &self.catalog
    }

    pub fn register(&mut self, rel: Relation) -> Arc<Relation> {
        Arc::make_mut(&mut self.catalog).add(rel)
    }

    /// Base rows read by every query so far.
    pub fn scan_count(&self) -> u64 {
        self.scans.load(Ordering::Relaxed)
    }

    pub fn handles(&self) -> impl Iterator<Item = &str> {
        self.handles.keys().map(String::as_str)
    }

    pub fn result(&self, handle: &str) -> Result<&Arc<QueryResult>> {
        self.handles
            .get(handle)
            .ok_or_else(|| Error::UnknownHandle(handle.to_string()))
    }

    pub fn drop_result(&mut self, handle: &str) -> Option<Arc<QueryResult>> {
        self.handles.shift_remove(handle)
    }

    pub fn execute(&mut self, sql: &str) -> Result<Arc<QueryResult>> {
        self.execute_with(sql, &ExecOptions::mode(CaptureMode::Inject))
    }

    pub fn execute_with(&mut self, sql: &str, opts: &ExecOptions) -> Result<Arc<QueryResult>> {
        let handle = match &opts.handle {
            Some(h) => h.clone(),
            None => loop {
                let h = format!("q{}", self.next);
                self.next += 1;
                if !self.handles.contains_key(&h) {
                    break h;
                }
            },
        };
        let result = self.run(sql, opts, &handle)?;
        let result = Arc::new(result);
        self.handles.insert(handle, result.clone());
        Ok(result)
    }

    /// Logical and physical plan text.
    pub fn explain(&self, sql: &str, opts: &ExecOptions) -> Result<String> {
        let lp = bind_sql(sql, &SessionResolver(self))?;
        let pp = lower(&lp, &self.catalog, opts.mode, opts.naive)?;
        Ok(format!("{lp}\n{pp}"))
    }

    fn run(&self, sql: &str, opts: &ExecOptions, handle: &str) -> Result<QueryResult> {
        let t = Instant::now();
        let capture = match &opts.workload {
            Some(_) if opts.mode == CaptureMode::Callback => {
                return Err(Error::Unsupported("workload options under callback capture".into()))
            }
            Some(w) if opts.mode.captures() => w.to_capture(&self.catalog, opts.mode)?,
            _ => CaptureSpec::new(opts.mode),
        };
        let lp = bind_sql(sql, &SessionResolver(self))?;
        if let Some((output, grouped)) = self.cube_fetch(&lp, handle)? {
            return Ok(QueryResult {
                handle: handle.to_string(),
                sql: sql.to_string(),
                mode: opts.mode,
                output,
                logical: lp,
                plan: String::new(),
                grouped,
                stats: QueryStats {
                    total_ms: t.elapsed().as_secs_f64() * 1e3,
                    cube_fetch: true,
                    ..QueryStats::default()
                },
            });
        }
        let pp = lower(&lp, &self.catalog, opts.mode, opts.naive)?;
        let counter: ScanCounter = Arc::new(AtomicU64::new(0));
        let inputs = SessionInputs {
            session: self,
            skipped: Cell::new(false),
        };
        let ex = execute(&pp, &inputs, &capture, handle, Some(counter.clone()))?;
        let total_ms = t.elapsed().as_secs_f64() * 1e3;
        let base_scans = counter.load(Ordering::Relaxed);
        self.scans.fetch_add(base_scans, Ordering::Relaxed);
        Ok(QueryResult {
            handle: handle.to_string(),
            sql: sql.to_string(),
            mode: opts.mode,
            output: ex.output,
            logical: lp,
            plan: pp.to_string(),
            grouped: ex.grouped,
            stats: QueryStats {
                total_ms,
                operators: ex.operators,
                materialization_points: pp.root.materialization_points(),
                pipelines: pp.root.pipeline_count(),
                base_scans,
                data_skipping: inputs.skipped.get(),
                cube_fetch: false,
            },
        })
    }

    /// Base rows of `base` contributing to output rows `outs`, sorted.
    pub fn backward(&self, handle: &str, outs: &[Rid], base: &str) -> Result<Vec<Rid>> {
        let h = self.result(handle)?;
        for &o in outs {
            h.check_out(o)?;
        }
        trace(h.backward_map(base)?, outs)
    }

    /// Output rows of `handle` that base rows `ins` of `base` contribute to, sorted.
    pub fn forward(&self, handle: &str, ins: &[Rid], base: &str) -> Result<Vec<Rid>> {
        let h = self.result(handle)?;
        let len = h.output.lineage(base).map_or(0, |l| l.base_len);
        let map = h.forward_map(base)?;
        for &i in ins {
            check_rid(i, base, len)?;
        }
        trace(map, ins)
    }

    /// Rewrites a lineage query into a selection over the original inputs:
    /// the block of `handle` restricted to the groups of `outs`, projecting
    /// the rids of `base`.
    pub fn lazy_plan(&self, handle: &str, outs: &[Rid], base: &str) -> Result<LogicalPlan> {
        let h = self.result(handle)?;
        let blk = h
            .logical
            .as_block()
            .ok_or_else(|| Error::Unsupported("lazy lineage over a set operation".into()))?;
        let (Some(g), Some(grouped)) = (&blk.group, &h.grouped) else {
            return Err(Error::Unsupported("lazy lineage needs a grouped query".into()));
        };
        let slots: Vec<usize> = blk
            .froms
            .iter()
            .enumerate()
            .filter(|(_, f)| f.relation.name() == base && !f.lineage.as_ref().is_some_and(|c| c.forward))
            .map(|(i, _)| i)
            .collect();
        let slot = match slots[..] {
            [s] => s,
            [] => return Err(h.no_index(base)),
            _ => return Err(Error::Unsupported(format!("{base} appears more than once"))),
        };
        let grel = &grouped.output.relation;
        let mut groups: IndexSet<Rid> = IndexSet::new();
        for &o in outs {
            h.check_out(o)?;
            groups.insert(grouped.group_of(o));
        }
        let selections: Vec<Expr> = groups
            .iter()
            .map(|&gr| {
                Expr::conjunction(
                    g.keys
                        .iter()
                        .enumerate()
                        .map(|(j, (_, k))| Expr::eq(k.clone(), Expr::lit(grel.value(j, gr))))
                        .collect(),
                )
            })
            .collect();
        let pick = selections
            .into_iter()
            .reduce(|a, b| Expr::binary(BinOp::Or, a, b))
            .unwrap_or_else(|| Expr::lit(Value::Bool(false)));
        let mut filters = blk.filters.clone();
        filters.extend(pick.conjuncts());
        Ok(LogicalPlan::Block(Box::new(Block {
            froms: blk.froms.clone(),
            filters,
            group: None,
            having: None,
            project: vec![("__rid".to_string(), Expr::Rid { slot })],
        })))
    }

    /// Backward lineage computed by re-running the rewritten query.
    pub fn lazy_backward(&self, handle: &str, outs: &[Rid], base: &str) -> Result<Vec<Rid>> {
        let lp = self.lazy_plan(handle, outs, base)?;
        let pp = lower(&lp, &self.catalog, CaptureMode::None, false)?;
        let inputs = SessionInputs {
            session: self,
            skipped: Cell::new(false),
        };
        let ex = execute(&pp, &inputs, &CaptureSpec::none(), "lazy", Some(self.scans.clone()))?;
        let rel = &ex.output.relation;
        let mut rids: Vec<Rid> = (0..rel.row_count() as Rid)
            .map(|r| match rel.value(0, r) {
                Value::Int(v) => v as Rid,
                other => unreachable!("rid column holds {other}"),
            })
            .collect();
        rids.sort_unstable();
        rids.dedup();
        Ok(rids)
    }

    /// Which and why provenance of output row `out` over every captured relation.
    pub fn derive_provenance(&self, handle: &str, out: Rid) -> Result<Provenance> {
        let h = self.result(handle)?;
        h.check_out(out)?;
        let names = h.lineage_relations();
        if names.is_empty() {
            return Err(h.no_index("*"));
        }
        let mut buckets = Vec::with_capacity(names.len());
        for n in &names {
            buckets.push(h.backward_map(n)?.targets(out));
        }
        let mut which = Vec::new();
        for (n, b) in names.iter().zip(&buckets) {
            let mut s = b.clone();
            s.sort_unstable();
            s.dedup();
            which.extend(s.into_iter().map(|r| (n.clone(), r)));
        }
        let len = buckets[0].len();
        if buckets.iter().any(|b| b.len() != len) {
            return Err(Error::Invalid(format!(
                "witnesses of {handle}[{out}] are not aligned across relations"
            )));
        }
        let why: IndexSet<Vec<(String, Rid)>> = (0..len)
            .map(|k| names.iter().zip(&buckets).map(|(n, b)| (n.clone(), b[k])).collect())
            .collect();
        Ok(Provenance {
            which,
            why: why.into_iter().collect(),
        })
    }

    /// Answers a group-by over a backward query from the aggregate cube
    /// captured with the referenced result.
    fn cube_fetch(&self, lp: &LogicalPlan, name: &str) -> Result<Option<(OperatorOutput, Option<Grouped>)>> {
        let Some(blk) = lp.as_block() else { return Ok(None) };
        let ([from], Some(g), None, true) = (&blk.froms[..], &blk.group, &blk.having, blk.filters.is_empty()) else {
            return Ok(None);
        };
        let Some(call) = from.lineage.as_ref().filter(|c| !c.forward) else { return Ok(None) };
        let h = self.result(&call.handle)?;
        let base = call.base.as_deref().unwrap_or_default();
        let Some(cube) = h.output.lineage(base).and_then(|l| l.cube.as_ref()) else {
            return Ok(None);
        };
        let spec = cube.spec();
        if g.keys.len() != spec.key_names.len() || g.keys.iter().zip(&spec.key_names).any(|((k, _), n)| k != n) {
            return Ok(None);
        }
        let Some(agg_idx) = g
            .aggs
            .iter()
            .map(|(n, _)| spec.agg_names.iter().position(|m| m == n))
            .collect::<Option<Vec<usize>>>()
        else {
            return Ok(None);
        };
        let outs = self.rid_set(&call.rids, h.row_count(), &h.handle)?;
        let cells = cube.merged(&outs);
        let schema = g.schema(&blk.from_relations())?;
        let mut b = RelationBuilder::with_capacity(name, schema, cells.len());
        for (key, states) in &cells {
            let mut row = key.clone();
            row.extend(agg_idx.iter().map(|&i| states[i].finish()));
            b.push_row(row)?;
        }
        let gout = OperatorOutput::uncaptured(Arc::new(b.finish()?));
        let out = project(&gout, &blk.project)?;
        let rel = Arc::try_unwrap(out.relation).unwrap_or_else(|r| (*r).clone());
        Ok(Some((
            OperatorOutput::uncaptured(Arc::new(rel.renamed(name))),
            Some(Grouped {
                output: gout,
                row_map: None,
            }),
        )))
    }

    /// Rids denoted by a table function argument over a relation of `len` rows.
    fn rid_set(&self, set: &RidSetAst, len: usize, relation: &str) -> Result<Vec<Rid>> {
        let rids = match set {
            RidSetAst::All => return Ok((0..len as Rid).collect()),
            RidSetAst::List(v) => v.clone(),
            RidSetAst::Call(c) => self.lineage_rids(c, &[]).map(|(r, _)| r)?,
        };
        for &r in &rids {
            check_rid(r, relation, len)?;
        }
        Ok(rids)
    }

    /// Rows produced by a lineage table function, sorted, and whether
    /// partition pruning was used.
    fn lineage_rids(&self, call: &LineageCall, filters: &[(usize, Value)]) -> Result<(Vec<Rid>, bool)> {
        let h = self.result(&call.handle)?;
        if call.forward {
            let base = forward_base(h, call)?;
            let len = h.output.lineage(&base).map_or(0, |l| l.base_len);
            let map = h.forward_map(&base)?;
            let ins = self.rid_set(&call.rids, len, &base)?;
            return Ok((trace(map, &ins)?, false));
        }
        let base = call
            .base
            .as_deref()
            .ok_or_else(|| Error::Bind("backward() needs a base relation".into()))?;
        let map = h.backward_map(base)?;
        let outs = self.rid_set(&call.rids, h.row_count(), &h.handle)?;
        if let LineageMap::Partitioned(p) = map {
            let rel = self.catalog.get(base)?;
            let key: Option<Vec<Value>> = p
                .key_attrs()
                .iter()
                .map(|a| {
                    let c = rel.schema().index_of(a)?;
                    filters.iter().find(|(fc, _)| *fc == c).map(|(_, v)| v.clone())
                })
                .collect();
            if let Some(key) = key {
                let mut rids = Vec::new();
                for &o in &outs {
                    if let Some(part) = p.partition(o as usize, &key) {
                        rids.extend_from_slice(part.as_slice());
                    }
                }
                rids.sort_unstable();
                rids.dedup();
                return Ok((rids, true));
            }
        }
        Ok((trace(map, &outs)?, false))
    }
}

fn trace(map: &LineageMap, srcs: &[Rid]) -> Result<Vec<Rid>> {
    let mut out = Vec::new();
    for &s in srcs {
        if (s as usize) >= map.len() {
            return Err(Error::InvalidRid {
                relation: "lineage index".into(),
                rid: s,
                len: map.len(),
            });
        }
        map.for_each(s, |r| out.push(r));
    }
    out.sort_unstable();
    out.dedup();
    Ok(out)
}

fn forward_base(h: &QueryResult, call: &LineageCall) -> Result<String> {
    if let Some(b) = &call.base {
        return Ok(b.clone());
    }
    match &h.lineage_relations()[..] {
        [one] => Ok(one.clone()),
        _ => Err(Error::Bind(format!(
            "forward({}, ..) needs a base relation: the result traces to several",
            h.handle
        ))),
    }
}

struct SessionResolver<'a>(&'a Session);

impl Resolver for SessionResolver<'_> {
    fn relation(&self, name: &str) -> Result<Arc<Relation>> {
        Ok(self.0.catalog.get(name)?.clone())
    }

    fn lineage_relation(&self, call: &LineageCall) -> Result<Arc<Relation>> {
        let h = self.0.result(&call.handle)?;
        if call.forward {
            return Ok(h.output.relation.clone());
        }
        let base = call
            .base
            .as_deref()
            .ok_or_else(|| Error::Bind("backward() needs a base relation".into()))?;
        Ok(self.0.catalog.get(base)?.clone())
    }
}

struct SessionInputs<'a> {
    session: &'a Session,
    skipped: Cell<bool>,
}

impl Inputs for SessionInputs<'_> {
    fn input(&self, from: &BoundFrom, slot: usize, filters: &[Expr]) -> Result<(OperatorOutput, Source)> {
        let Some(call) = &from.lineage else {
            return Ok((OperatorOutput::scan(from.relation.clone()), Source::Scan));
        };
        let eqs = literal_equalities(filters, slot, &from.relation);
        let (rids, skipped) = self.session.lineage_rids(call, &eqs)?;
        if skipped {
            self.skipped.set(true);
        }
        let output = if call.forward {
            let h = self.session.result(&call.handle)?;
            h.output.clone()
        } else {
            OperatorOutput::scan(from.relation.clone())
        };
        Ok((output, Source::Rids(Arc::new(rids))))
    }
}

/// `col = literal` conjuncts over `slot` whose literal has the column's type.
fn literal_equalities(filters: &[Expr], slot: usize, rel: &Relation) -> Vec<(usize, Value)> {
    let mut out = Vec::new();
    for f in filters {
        let Expr::Binary(BinOp::Eq, a, b) = f else { continue };
        let pair = match (a.as_ref(), b.as_ref()) {
            (Expr::Col { slot: s, col, .. }, Expr::Lit(v)) | (Expr::Lit(v), Expr::Col { slot: s, col, .. })
                if *s == slot =>
            {
                Some((*col, v.clone()))
            }
            _ => None,
        };
        if let Some((c, v)) = pair {
            if v.dtype() == rel.schema().field(c).dtype {
                out.push((c, v));
            }
        }
    }
    out
}
