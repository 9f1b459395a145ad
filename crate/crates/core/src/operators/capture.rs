//! Capture plumbing shared by all operators: which base relations to trace,
//! how a pipeline row reaches them, and the containers that receive edges.

use std::sync::Arc;

use indexmap::IndexMap;
use rustc_hash::{FxBuildHasher, FxHashMap};
use serde::{Deserialize, Serialize};

use super::agg::{AggAcc, AggSpec};
use super::OperatorOutput;
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::lineage::{
    BundleData, LineageBundle, LineageMap, PartitionKey, PartitionedRidIndex, RelationLineage, Rid,
    RidArray, RidIndex, RunIndex, MISS,
};
use crate::relstore::{Relation, Value};
use crate::workload::AggCube;

/// How lineage is captured while operators run.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CaptureMode {
    #[default]
    None,
    Inject,
    Defer,
    Callback,
}

impl CaptureMode {
    pub const ALL: [CaptureMode; 4] = [
        CaptureMode::None,
        CaptureMode::Inject,
        CaptureMode::Defer,
        CaptureMode::Callback,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CaptureMode::None => "none",
            CaptureMode::Inject => "inject",
            CaptureMode::Defer => "defer",
            CaptureMode::Callback => "callback",
        }
    }

    pub fn captures(self) -> bool {
        self != CaptureMode::None
    }
}

impl std::str::FromStr for CaptureMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "none" => Ok(CaptureMode::None),
            "inject" => Ok(CaptureMode::Inject),
            "defer" => Ok(CaptureMode::Defer),
            "callback" => Ok(CaptureMode::Callback),
            other => Err(Error::Invalid(format!("unknown capture mode {other}"))),
        }
    }
}

impl std::fmt::Display for CaptureMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Rid arrays split by attributes of the base relation.
#[derive(Clone, Debug)]
pub struct PartitionSpec {
    pub attrs: Vec<String>,
    pub cols: Vec<usize>,
    pub domain: Vec<PartitionKey>,
}

/// Aggregates maintained per output and extra group-by key during capture.
#[derive(Clone, Debug)]
pub struct CubeSpec {
    pub key_names: Vec<String>,
    /// Bound to slot 0 over the base relation.
    pub keys: Vec<Expr>,
    pub agg_names: Vec<String>,
    pub aggs: Vec<AggSpec>,
}

/// Per-relation capture options.
#[derive(Clone, Debug)]
pub struct TargetOptions {
    pub backward: bool,
    pub forward: bool,
    /// Only base rids satisfying this (slot 0, over the base) are recorded.
    pub predicate: Option<Expr>,
    pub partition: Option<Arc<PartitionSpec>>,
    pub cube: Option<Arc<CubeSpec>>,
    /// Expected bucket sizes per output.
    pub backward_hints: Option<Arc<Vec<usize>>>,
    /// Expected bucket sizes per base rid.
    pub forward_hints: Option<Arc<Vec<usize>>>,
    /// Expected fraction of input rows reaching the output.
    pub est_selectivity: Option<f64>,
    /// Base relation, required when a predicate, partition or cube is set on a
    /// relation reached through an intermediate result.
    pub base: Option<Arc<Relation>>,
}

impl Default for TargetOptions {
    fn default() -> Self {
        TargetOptions {
            backward: true,
            forward: true,
            predicate: None,
            partition: None,
            cube: None,
            backward_hints: None,
            forward_hints: None,
            est_selectivity: None,
            base: None,
        }
    }
}

impl TargetOptions {
    pub fn backward_only() -> Self {
        TargetOptions {
            forward: false,
            ..TargetOptions::default()
        }
    }

    fn is_plain(&self) -> bool {
        self.predicate.is_none() && self.partition.is_none() && self.cube.is_none()
    }
}

#[derive(Clone, Debug)]
pub enum CaptureScope {
    /// Every reachable base relation.
    All(TargetOptions),
    /// Only the listed relations.
    Only(IndexMap<String, TargetOptions>),
}

/// What an operator captures and how.
#[derive(Clone, Debug)]
pub struct CaptureSpec {
    pub mode: CaptureMode,
    pub scope: CaptureScope,
}

impl CaptureSpec {
    pub fn new(mode: CaptureMode) -> Self {
        CaptureSpec {
            mode,
            scope: CaptureScope::All(TargetOptions::default()),
        }
    }

    pub fn none() -> Self {
        CaptureSpec::new(CaptureMode::None)
    }

    /// Backward indexes only; used for intermediates that are composed later.
    pub fn backward_only(mode: CaptureMode) -> Self {
        CaptureSpec {
            mode,
            scope: CaptureScope::All(TargetOptions::backward_only()),
        }
    }

    pub fn only(mode: CaptureMode, relations: IndexMap<String, TargetOptions>) -> Self {
        CaptureSpec {
            mode,
            scope: CaptureScope::Only(relations),
        }
    }

    /// Applies `f` to the options of every relation.
    pub fn with_options(mut self, f: impl Fn(&mut TargetOptions)) -> Self {
        match &mut self.scope {
            CaptureScope::All(o) => f(o),
            CaptureScope::Only(m) => m.values_mut().for_each(f),
        }
        self
    }

    pub fn captures(&self) -> bool {
        self.mode.captures()
            && match &self.scope {
                CaptureScope::All(o) => o.backward || o.forward,
                CaptureScope::Only(m) => m.values().any(|o| o.backward || o.forward),
            }
    }

    pub fn options(&self, name: &str) -> Option<&TargetOptions> {
        match &self.scope {
            CaptureScope::All(o) => Some(o),
            CaptureScope::Only(m) => m.get(name),
        }
        .filter(|o| o.backward || o.forward)
    }

    /// Options for intermediates feeding an operator with this spec.
    pub fn for_inputs(&self) -> CaptureSpec {
        CaptureSpec::backward_only(match self.mode {
            CaptureMode::Callback => CaptureMode::Inject,
            m => m,
        })
    }
}

/// Path from a pipeline row to the rids of one base relation.
#[derive(Clone)]
pub struct Tracer {
    pub slot: usize,
    map: Option<(Arc<LineageBundle>, usize)>,
}

impl Tracer {
    pub fn identity(slot: usize) -> Self {
        Tracer { slot, map: None }
    }

    fn map(&self) -> Option<&LineageMap> {
        self.map.as_ref().map(|(b, i)| {
            b.data().relations[*i]
                .backward
                .as_ref()
                .expect("traced relation has a backward map")
        })
    }

    pub fn is_identity(&self) -> bool {
        self.map.is_none()
    }

    pub fn is_single_valued(&self) -> bool {
        self.map().is_none_or(LineageMap::is_single_valued)
    }

    #[inline]
    pub fn for_each(&self, row: &[Rid], mut f: impl FnMut(Rid)) {
        let r = row[self.slot];
        match &self.map {
            None => f(r),
            Some((b, i)) => b.data().relations[*i]
                .backward
                .as_ref()
                .expect("traced relation has a backward map")
                .for_each(r, f),
        }
    }

    #[inline]
    pub fn count(&self, row: &[Rid]) -> usize {
        match self.map() {
            None => 1,
            Some(m) => m.bucket_len(row[self.slot]),
        }
    }
}

impl std::fmt::Debug for Tracer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Tracer(slot {}, {})", self.slot, if self.map.is_some() { "mapped" } else { "identity" })
    }
}

/// One base relation reached by an operator's input rows.
#[derive(Clone, Debug)]
pub struct Target {
    pub name: String,
    pub tracer: Tracer,
    pub base_len: usize,
    pub opts: TargetOptions,
    /// Each base rid appears in at most one input row.
    pub row_unique: bool,
}

impl Target {
    /// Forward lineage can be a rid array.
    pub fn functional(&self) -> bool {
        self.row_unique && self.tracer.is_identity()
    }
}

/// Resolves the traced base relations of `parts`. `row_unique[s]` says that
/// each row of part `s` appears at most once among the operator's input rows.
pub fn resolve_targets(
    parts: &[OperatorOutput],
    slots: &[usize],
    row_unique: &[bool],
    spec: &CaptureSpec,
) -> Result<Vec<Target>> {
    let mut out: Vec<Target> = Vec::new();
    if !spec.mode.captures() {
        return Ok(out);
    }
    for &slot in slots {
        let part = &parts[slot];
        let Some(bundle) = &part.bundle else { continue };
        for (i, (name, rl)) in bundle.data().relations.iter().enumerate() {
            let Some(bw) = &rl.backward else { continue };
            if matches!(bw, LineageMap::Whole { .. }) {
                continue;
            }
            let Some(opts) = spec.options(name) else { continue };
            if out.iter().any(|t| &t.name == name) {
                return Err(Error::Unsupported(format!(
                    "relation {name} is reached through more than one input"
                )));
            }
            let mut opts = opts.clone();
            let tracer = if matches!(bw, LineageMap::Identity(_)) {
                if opts.base.is_none() {
                    opts.base = Some(part.relation.clone());
                }
                Tracer::identity(slot)
            } else {
                Tracer {
                    slot,
                    map: Some((bundle.clone(), i)),
                }
            };
            if !opts.is_plain() {
                if spec.mode == CaptureMode::Callback {
                    return Err(Error::Unsupported(
                        "workload optimizations are not available in callback mode".into(),
                    ));
                }
                if opts.base.is_none() {
                    return Err(Error::Invalid(format!("no base relation supplied for {name}")));
                }
            }
            out.push(Target {
                name: name.clone(),
                tracer,
                base_len: rl.base_len,
                opts,
                row_unique: row_unique.get(slot).copied().unwrap_or(false),
            });
        }
    }
    Ok(out)
}

/// Container shape of one direction.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Shape {
    Array,
    Index,
    Runs,
}

/// Receives every (target, output rid, base rid) edge through a dynamic call.
pub trait LineageSink: Send {
    fn record(&mut self, target: usize, out: Rid, input: Rid);
    fn finish(self: Box<Self>) -> Vec<EdgeMaps>;
}

#[derive(Default, Debug)]
pub struct EdgeMaps {
    pub backward: FxHashMap<Rid, Vec<Rid>>,
    pub forward: FxHashMap<Rid, Vec<Rid>>,
}

/// Callback sink keeping per-direction hash maps of rid lists.
pub struct HashMapSink {
    maps: Vec<EdgeMaps>,
    directions: Vec<(bool, bool)>,
}

impl HashMapSink {
    pub fn new(directions: Vec<(bool, bool)>) -> Self {
        HashMapSink {
            maps: directions.iter().map(|_| EdgeMaps::default()).collect(),
            directions,
        }
    }
}

impl LineageSink for HashMapSink {
    #[inline(never)]
    fn record(&mut self, target: usize, out: Rid, input: Rid) {
        let (bw, fw) = self.directions[target];
        let m = &mut self.maps[target];
        if bw {
            m.backward.entry(out).or_default().push(input);
        }
        if fw {
            m.forward.entry(input).or_default().push(out);
        }
    }

    fn finish(self: Box<Self>) -> Vec<EdgeMaps> {
        self.maps
    }
}

#[derive(Debug)]
pub(crate) enum BwBuf {
    Array(RidArray),
    Index {
        buckets: Vec<RidArray>,
        hints: Option<Arc<Vec<usize>>>,
    },
    Partitioned(PartitionedRidIndex, Arc<PartitionSpec>),
}

impl BwBuf {
    #[inline]
    fn index_bucket<'a>(
        buckets: &'a mut Vec<RidArray>,
        hints: &Option<Arc<Vec<usize>>>,
        o: usize,
    ) -> &'a mut RidArray {
        while buckets.len() <= o {
            let i = buckets.len();
            buckets.push(match hints.as_ref().and_then(|h| h.get(i)) {
                Some(&c) => RidArray::with_capacity(c),
                None => RidArray::new(),
            });
        }
        &mut buckets[o]
    }

    fn finish(self, n_out: usize, base: Option<&Relation>) -> Result<LineageMap> {
        Ok(match self {
            BwBuf::Array(mut a) => {
                while a.len() < n_out {
                    a.push(MISS);
                }
                LineageMap::Array(a)
            }
            BwBuf::Index { mut buckets, hints } => {
                while buckets.len() < n_out {
                    let i = buckets.len();
                    let c = hints.as_ref().and_then(|h| h.get(i)).copied().unwrap_or(0);
                    buckets.push(RidArray::with_capacity(c));
                }
                LineageMap::Index(RidIndex::from_buckets(buckets))
            }
            BwBuf::Partitioned(mut p, _) => {
                let _ = base;
                p.ensure_len(n_out);
                LineageMap::Partitioned(p)
            }
        })
    }
}

#[derive(Debug)]
pub(crate) enum FwBuf {
    Array(RidArray),
    Index(RidIndex),
    Runs(RunIndex),
}

impl FwBuf {
    pub(crate) fn new(shape: Shape, base_len: usize, hints: Option<&Arc<Vec<usize>>>) -> FwBuf {
        match shape {
            Shape::Array => FwBuf::Array(RidArray::filled(base_len, MISS)),
            Shape::Runs => FwBuf::Runs(RunIndex::new(base_len)),
            Shape::Index => FwBuf::Index(RidIndex::new(
                base_len,
                hints.filter(|h| h.len() == base_len).map(|h| h.as_slice()),
            )),
        }
    }

    #[inline]
    fn edge(&mut self, b: Rid, o: Rid) {
        match self {
            FwBuf::Array(a) => a.set(b as usize, o),
            FwBuf::Index(ix) => ix.push(b as usize, o),
            FwBuf::Runs(r) => r.note(b as usize, o),
        }
    }

    pub(crate) fn finish(self) -> LineageMap {
        match self {
            FwBuf::Array(a) => LineageMap::Array(a),
            FwBuf::Runs(r) => LineageMap::Runs(r),
            FwBuf::Index(ix) => LineageMap::Index(sort_buckets(ix)),
        }
    }
}

/// Forward buckets are kept in ascending output order.
pub(crate) fn sort_buckets(ix: RidIndex) -> RidIndex {
    let mut buckets = ix.into_buckets();
    for b in &mut buckets {
        if !b.as_slice().is_sorted() {
            b.sort();
        }
    }
    RidIndex::from_buckets(buckets)
}

type CubeCells = IndexMap<Vec<Value>, Vec<AggAcc>, FxBuildHasher>;

#[derive(Debug)]
struct CubeBuf {
    spec: Arc<CubeSpec>,
    cells: Vec<CubeCells>,
}

#[derive(Debug)]
struct TargetBuf {
    bw: Option<BwBuf>,
    fw: Option<FwBuf>,
    cube: Option<CubeBuf>,
    base: Option<Arc<Relation>>,
    predicate: Option<Expr>,
    key: Vec<Value>,
}

impl TargetBuf {
    #[inline]
    fn edge(&mut self, o: Rid, b: Rid, err: &mut Option<Error>) {
        if let Some(p) = &self.predicate {
            let base = self.base.as_deref().expect("predicate has a base");
            if !p.eval_bool(&[b], &[base]) {
                return;
            }
        }
        match &mut self.bw {
            None => {}
            Some(BwBuf::Array(a)) => {
                let o = o as usize;
                if o == a.len() {
                    a.push(b);
                } else if o < a.len() {
                    a.set(o, b);
                } else {
                    while a.len() < o {
                        a.push(MISS);
                    }
                    a.push(b);
                }
            }
            Some(BwBuf::Index { buckets, hints }) => {
                BwBuf::index_bucket(buckets, hints, o as usize).push(b)
            }
            Some(BwBuf::Partitioned(p, spec)) => {
                let base = self.base.as_deref().expect("partition has a base");
                self.key.clear();
                self.key.extend(spec.cols.iter().map(|&c| base.value(c, b)));
                p.ensure_len(o as usize + 1);
                if let Err(e) = p.push(o as usize, &self.key, b) {
                    err.get_or_insert(e);
                }
            }
        }
        if let Some(fw) = &mut self.fw {
            fw.edge(b, o);
        }
        if let Some(cube) = &mut self.cube {
            let base = self.base.as_deref().expect("cube has a base");
            let rels = [base];
            let row = [b];
            while cube.cells.len() <= o as usize {
                cube.cells.push(CubeCells::default());
            }
            let key: Vec<Value> = cube.spec.keys.iter().map(|k| k.eval(&row, &rels)).collect();
            let cell = cube.cells[o as usize]
                .entry(key)
                .or_insert_with(|| cube.spec.aggs.iter().map(AggSpec::init).collect());
            for (acc, spec) in cell.iter_mut().zip(&cube.spec.aggs) {
                spec.update(acc, &row, &rels);
            }
        }
    }
}

/// Edge recorder for one operator output, eager or routed through a sink.
pub(crate) struct Recorder {
    pub targets: Vec<Target>,
    bufs: Vec<TargetBuf>,
    shapes: Vec<(Shape, Shape)>,
    sink: Option<Box<dyn LineageSink>>,
    err: Option<Error>,
}

impl Recorder {
    /// `bw_capacity` presizes backward arrays; `n_in` scales selectivity estimates.
    pub fn new(
        mode: CaptureMode,
        targets: Vec<Target>,
        shapes: Vec<(Shape, Shape)>,
        bw_capacity: Option<usize>,
        n_in: usize,
    ) -> Recorder {
        let sink: Option<Box<dyn LineageSink>> = (mode == CaptureMode::Callback).then(|| {
            Box::new(HashMapSink::new(
                targets.iter().map(|t| (t.opts.backward, t.opts.forward)).collect(),
            )) as Box<dyn LineageSink>
        });
        let bufs = targets
            .iter()
            .zip(&shapes)
            .map(|(t, &(bw_shape, fw_shape))| {
                let eager = sink.is_none();
                let bw = (eager && t.opts.backward).then(|| {
                    if let Some(p) = &t.opts.partition {
                        return BwBuf::Partitioned(
                            PartitionedRidIndex::new(0, p.attrs.clone(), p.domain.clone()),
                            p.clone(),
                        );
                    }
                    match bw_shape {
                        Shape::Array => {
                            let cap = t
                                .opts
                                .est_selectivity
                                .map(|s| (s * n_in as f64).ceil() as usize)
                                .or(bw_capacity);
                            BwBuf::Array(match cap {
                                Some(c) => RidArray::with_capacity(c),
                                None => RidArray::new(),
                            })
                        }
                        _ => BwBuf::Index {
                            buckets: Vec::new(),
                            hints: t.opts.backward_hints.clone(),
                        },
                    }
                });
                let fw = (eager && t.opts.forward)
                    .then(|| FwBuf::new(fw_shape, t.base_len, t.opts.forward_hints.as_ref()));
                let cube = t.opts.cube.clone().map(|spec| CubeBuf {
                    spec,
                    cells: Vec::new(),
                });
                TargetBuf {
                    bw,
                    fw,
                    cube,
                    base: t.opts.base.clone(),
                    predicate: t.opts.predicate.clone(),
                    key: Vec::new(),
                }
            })
            .collect();
        Recorder {
            targets,
            bufs,
            shapes,
            sink,
            err: None,
        }
    }

    /// Records every traced base rid of `row` as contributing to output `o`.
    #[inline]
    pub fn row(&mut self, o: Rid, row: &[Rid]) {
        for (t, target) in self.targets.iter().enumerate() {
            match &mut self.sink {
                Some(s) => target.tracer.for_each(row, |b| s.record(t, o, b)),
                None => {
                    let (buf, err) = (&mut self.bufs[t], &mut self.err);
                    target.tracer.for_each(row, |b| buf.edge(o, b, err))
                }
            }
        }
    }

    /// As `row`, restricted to targets reached through `slot`.
    #[inline]
    pub fn row_slot(&mut self, slot: usize, o: Rid, row: &[Rid]) {
        for (t, target) in self.targets.iter().enumerate() {
            if target.tracer.slot != slot {
                continue;
            }
            match &mut self.sink {
                Some(s) => target.tracer.for_each(row, |b| s.record(t, o, b)),
                None => {
                    let (buf, err) = (&mut self.bufs[t], &mut self.err);
                    target.tracer.for_each(row, |b| buf.edge(o, b, err))
                }
            }
        }
    }

    pub fn finish(self, n_out: usize) -> Result<BundleData> {
        if let Some(e) = self.err {
            return Err(e);
        }
        let mut data = BundleData::default();
        match self.sink {
            Some(sink) => {
                let maps = sink.finish();
                for ((t, m), (bw_shape, fw_shape)) in self.targets.iter().zip(maps).zip(self.shapes) {
                    let backward = t.opts.backward.then(|| edges_to_map(m.backward, n_out, bw_shape, false));
                    let forward = t.opts.forward.then(|| edges_to_map(m.forward, t.base_len, fw_shape, true));
                    data.relations.insert(
                        t.name.clone(),
                        RelationLineage {
                            backward,
                            forward,
                            cube: None,
                            base_len: t.base_len,
                        },
                    );
                }
            }
            None => {
                for (t, buf) in self.targets.iter().zip(self.bufs) {
                    let backward = buf
                        .bw
                        .map(|b| b.finish(n_out, buf.base.as_deref()))
                        .transpose()?;
                    let forward = buf.fw.map(FwBuf::finish);
                    let cube = buf.cube.map(|c| {
                        let mut cells = c.cells;
                        cells.resize_with(n_out, CubeCells::default);
                        AggCube::new(c.spec, cells)
                    });
                    data.relations.insert(
                        t.name.clone(),
                        RelationLineage {
                            backward,
                            forward,
                            cube,
                            base_len: t.base_len,
                        },
                    );
                }
            }
        }
        Ok(data)
    }
}

fn edges_to_map(mut m: FxHashMap<Rid, Vec<Rid>>, n: usize, shape: Shape, sorted: bool) -> LineageMap {
    match shape {
        Shape::Array => LineageMap::Array(RidArray::from_vec(
            (0..n as Rid)
                .map(|i| m.get(&i).and_then(|v| v.first().copied()).unwrap_or(MISS))
                .collect(),
        )),
        Shape::Index => LineageMap::Index(RidIndex::from_vecs(
            (0..n as Rid)
                .map(|i| {
                    let mut v = m.remove(&i).unwrap_or_default();
                    if sorted {
                        v.sort_unstable();
                    }
                    v
                })
                .collect(),
        )),
        Shape::Runs => {
            let mut runs = RunIndex::new(n);
            for i in 0..n as Rid {
                if let Some(v) = m.get_mut(&i) {
                    v.sort_unstable();
                    v.iter().for_each(|&o| runs.note(i as usize, o));
                }
            }
            LineageMap::Runs(runs)
        }
    }
}

/// Builds the finished bundle, or none when nothing was traced.
pub(crate) fn seal(data: BundleData, n_out: usize, captured: bool) -> Option<Arc<LineageBundle>> {
    captured.then(|| Arc::new(LineageBundle::ready(n_out, data)))
}
