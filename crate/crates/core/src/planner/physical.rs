//! Lowering of logical plans to pipelines and the plan printer.

use std::fmt;

use super::ast::SetOpKind;
use super::bind::{describe_call, Block, BoundFrom, LogicalPlan};
use crate::error::Result;
use crate::expr::{BinOp, Expr};
use crate::operators::CaptureMode;
use crate::relstore::Catalog;

/// Probe of a previously built join table.
#[derive(Clone, Debug)]
pub struct ProbeSpec {
    pub table: usize,
    /// Probe-side key expressions, matching the table's build keys.
    pub keys: Vec<Expr>,
    pub pkfk: bool,
}

#[derive(Clone, Debug)]
pub enum PipeSink {
    /// Builds a join table over `slots` keyed by `keys`.
    Build {
        table: usize,
        keys: Vec<Expr>,
        slots: Vec<usize>,
        pkfk: bool,
    },
    Group,
    Collect,
}

/// One fused pipeline: scan a slot, filter, probe, filter, sink.
#[derive(Clone, Debug)]
pub struct PipeSpec {
    pub slot: usize,
    pub filter: Option<Expr>,
    pub probe: Option<ProbeSpec>,
    pub residual: Vec<Expr>,
    pub sink: PipeSink,
}

/// Operator-at-a-time steps; every step materializes its output and lineage.
#[derive(Clone, Debug)]
pub enum NaiveStep {
    /// Reads slot `slot`, applying `pred`.
    Select { slot: usize, pred: Option<Expr> },
    /// Joins the running result with slot `slot` on column positions.
    HashJoin {
        slot: usize,
        a_keys: Vec<usize>,
        b_keys: Vec<usize>,
        pkfk: bool,
    },
    /// Joins the running result (slot 0) with slot `slot` (slot 1) on `pred`.
    Nlj { slot: usize, pred: Expr },
    Cross { slot: usize },
    /// Filters the running result.
    Filter(Expr),
}

#[derive(Clone, Debug)]
pub enum Strategy {
    Pipelined {
        pipelines: Vec<PipeSpec>,
        row_unique: Vec<bool>,
    },
    Naive(Vec<NaiveStep>),
}

#[derive(Clone, Debug)]
pub struct BlockPlan {
    pub block: Block,
    pub strategy: Strategy,
}

impl BlockPlan {
    pub fn naive(&self) -> bool {
        matches!(self.strategy, Strategy::Naive(_))
    }

    /// Operators that materialize output lineage.
    pub fn materialization_points(&self) -> usize {
        let post = usize::from(self.block.having.is_some());
        match &self.strategy {
            Strategy::Pipelined { .. } => 1 + post,
            Strategy::Naive(steps) => {
                let mut n = 0;
                for s in steps {
                    n += match s {
                        NaiveStep::Select { slot, pred } => {
                            usize::from(pred.is_some() || self.block.froms[*slot].lineage.is_some())
                        }
                        _ => 1,
                    };
                }
                // Root sink: group-by or final projection.
                n + 1 + post
            }
        }
    }
}

#[derive(Clone, Debug)]
pub enum PlanNode {
    Block(Box<BlockPlan>),
    SetOp {
        kind: SetOpKind,
        all: bool,
        left: Box<PlanNode>,
        right: Box<PlanNode>,
    },
}

impl PlanNode {
    pub fn materialization_points(&self) -> usize {
        match self {
            PlanNode::Block(b) => b.materialization_points(),
            PlanNode::SetOp { left, right, .. } => {
                left.materialization_points() + right.materialization_points() + 1
            }
        }
    }

    pub fn pipeline_count(&self) -> usize {
        match self {
            PlanNode::Block(b) => match &b.strategy {
                Strategy::Pipelined { pipelines, .. } => pipelines.len(),
                Strategy::Naive(_) => 0,
            },
            PlanNode::SetOp { left, right, .. } => left.pipeline_count() + right.pipeline_count(),
        }
    }

    pub fn blocks(&self) -> Vec<&BlockPlan> {
        match self {
            PlanNode::Block(b) => vec![b],
            PlanNode::SetOp { left, right, .. } => {
                let mut v = left.blocks();
                v.extend(right.blocks());
                v
            }
        }
    }
}

#[derive(Clone, Debug)]
pub struct PhysicalPlan {
    pub root: PlanNode,
    pub mode: CaptureMode,
}

impl PhysicalPlan {
    pub fn materialization_points(&self) -> usize {
        self.root.materialization_points()
    }

    pub fn pipeline_count(&self) -> usize {
        self.root.pipeline_count()
    }
}

/// Lowers `lp`. Pk-fk joins are recognized from the catalog's primary keys.
/// `naive` materializes every operator; cross and theta joins always do.
pub fn lower(lp: &LogicalPlan, catalog: &Catalog, mode: CaptureMode, naive: bool) -> Result<PhysicalPlan> {
    Ok(PhysicalPlan {
        root: lower_node(lp, catalog, naive)?,
        mode,
    })
}

fn lower_node(lp: &LogicalPlan, catalog: &Catalog, naive: bool) -> Result<PlanNode> {
    Ok(match lp {
        LogicalPlan::Block(b) => PlanNode::Block(Box::new(lower_block(b, catalog, naive)?)),
        LogicalPlan::SetOp {
            kind,
            all,
            left,
            right,
        } => PlanNode::SetOp {
            kind: *kind,
            all: *all,
            left: Box::new(lower_node(left, catalog, naive)?),
            right: Box::new(lower_node(right, catalog, naive)?),
        },
    })
}

/// Primary-key columns of a FROM entry whose rows are unique base rows.
fn primary_key(from: &BoundFrom, catalog: &Catalog) -> Option<Vec<usize>> {
    if from.lineage.as_ref().is_some_and(|c| c.forward) {
        return None;
    }
    let pk = catalog.primary_key(from.relation.name())?;
    pk.iter().map(|a| from.relation.schema().index_of(a)).collect()
}

/// Equality conjunct `l = r` with `l` reading only slots below `i` and `r`
/// reading only slot `i`, oriented that way.
fn equi_key(e: &Expr, i: usize) -> Option<(Expr, Expr)> {
    let Expr::Binary(BinOp::Eq, a, b) = e else { return None };
    let (sa, sb) = (a.slots(), b.slots());
    let below = |s: &[usize]| !s.is_empty() && s.iter().all(|&x| x < i);
    let at = |s: &[usize]| s == [i];
    if below(&sa) && at(&sb) {
        Some((a.as_ref().clone(), b.as_ref().clone()))
    } else if below(&sb) && at(&sa) {
        Some((b.as_ref().clone(), a.as_ref().clone()))
    } else {
        None
    }
}

/// Whether build keys cover the primary key of a slot in `det`.
fn covers_pk(keys: &[Expr], det: &[usize], pks: &[Option<Vec<usize>>]) -> bool {
    det.iter().any(|&s| {
        pks[s].as_ref().is_some_and(|pk| {
            !pk.is_empty()
                && pk.iter().all(|&c| {
                    keys.iter()
                        .any(|k| matches!(k, Expr::Col { slot, col, .. } if *slot == s && *col == c))
                })
        })
    })
}

struct Split {
    local: Vec<Vec<Expr>>,
    /// Per slot `i > 0`: (prefix side, slot-`i` side) equalities.
    keys: Vec<Vec<(Expr, Expr)>>,
    /// Per slot: other multi-slot conjuncts whose highest slot it is.
    residual: Vec<Vec<Expr>>,
}

fn split_filters(b: &Block) -> Split {
    let n = b.froms.len();
    let mut s = Split {
        local: vec![Vec::new(); n],
        keys: vec![Vec::new(); n],
        residual: vec![Vec::new(); n],
    };
    for f in &b.filters {
        let slots = f.slots();
        match slots.as_slice() {
            [] => s.local[0].push(f.clone()),
            [one] => s.local[*one].push(f.clone()),
            many => {
                let top = *many.last().expect("non-empty");
                match equi_key(f, top) {
                    Some(k) => s.keys[top].push(k),
                    None => s.residual[top].push(f.clone()),
                }
            }
        }
    }
    s
}

fn conj(parts: &[Expr]) -> Option<Expr> {
    (!parts.is_empty()).then(|| Expr::conjunction(parts.to_vec()))
}

fn lower_block(b: &Block, catalog: &Catalog, naive: bool) -> Result<BlockPlan> {
    let n = b.froms.len();
    let split = split_filters(b);
    let pks: Vec<Option<Vec<usize>>> = b.froms.iter().map(|f| primary_key(f, catalog)).collect();
    let theta = (1..n).any(|i| split.keys[i].is_empty());
    let rid_refs = b
        .filters
        .iter()
        .chain(b.project.iter().map(|(_, e)| e))
        .chain(b.group.iter().flat_map(|g| g.keys.iter().map(|(_, e)| e)))
        .any(|e| {
            let mut hit = false;
            e.visit(&mut |x| hit |= matches!(x, Expr::Rid { .. }));
            hit
        });
    if (naive || theta) && !(rid_refs && n == 1) {
        return Ok(BlockPlan {
            block: b.clone(),
            strategy: Strategy::Naive(naive_steps(b, &split, &pks)),
        });
    }

    let mut pipelines = Vec::with_capacity(n);
    let mut det: Vec<usize> = vec![0];
    let mut prev_pkfk = false;
    for i in 0..n {
        let probe = (i > 0).then(|| ProbeSpec {
            table: i - 1,
            keys: split.keys[i].iter().map(|(_, r)| r.clone()).collect(),
            pkfk: prev_pkfk,
        });
        if i > 0 {
            det = if prev_pkfk { vec![i] } else { Vec::new() };
        }
        let sink = if i + 1 < n {
            let keys: Vec<Expr> = split.keys[i + 1].iter().map(|(l, _)| l.clone()).collect();
            let pkfk = covers_pk(&keys, &det, &pks);
            prev_pkfk = pkfk;
            PipeSink::Build {
                table: i,
                keys,
                slots: (0..=i).collect(),
                pkfk,
            }
        } else if b.group.is_some() {
            PipeSink::Group
        } else {
            PipeSink::Collect
        };
        pipelines.push(PipeSpec {
            slot: i,
            filter: conj(&split.local[i]),
            probe,
            residual: split.residual[i].clone(),
            sink,
        });
    }
    let row_unique = (0..n).map(|s| det.contains(&s)).collect();
    Ok(BlockPlan {
        block: b.clone(),
        strategy: Strategy::Pipelined {
            pipelines,
            row_unique,
        },
    })
}

fn naive_steps(b: &Block, split: &Split, pks: &[Option<Vec<usize>>]) -> Vec<NaiveStep> {
    let n = b.froms.len();
    let mut steps = Vec::new();
    let mut offsets = vec![0usize; n];
    for i in 1..n {
        offsets[i] = offsets[i - 1] + b.froms[i - 1].relation.schema().len();
    }
    steps.push(NaiveStep::Select {
        slot: 0,
        pred: conj(&split.local[0]),
    });
    let mut det: Vec<usize> = vec![0];
    for i in 1..n {
        steps.push(NaiveStep::Select {
            slot: i,
            pred: conj(&split.local[i]).map(|e| e.map_slots(&|_| 0)),
        });
        let keys = &split.keys[i];
        let cols: Option<Vec<(usize, usize)>> = keys
            .iter()
            .map(|(l, r)| match (l, r) {
                (Expr::Col { slot: ls, col: lc, .. }, Expr::Col { col: rc, .. }) => Some((offsets[*ls] + lc, *rc)),
                _ => None,
            })
            .collect();
        match cols {
            Some(cols) if !cols.is_empty() => {
                let build: Vec<Expr> = keys.iter().map(|(l, _)| l.clone()).collect();
                let pkfk = covers_pk(&build, &det, pks);
                det = if pkfk { vec![i] } else { Vec::new() };
                steps.push(NaiveStep::HashJoin {
                    slot: i,
                    a_keys: cols.iter().map(|c| c.0).collect(),
                    b_keys: cols.iter().map(|c| c.1).collect(),
                    pkfk,
                });
            }
            _ if keys.is_empty() => {
                det = Vec::new();
                steps.push(NaiveStep::Cross { slot: i });
            }
            _ => {
                det = Vec::new();
                let pred = Expr::conjunction(keys.iter().map(|(l, r)| Expr::eq(l.clone(), r.clone())).collect());
                steps.push(NaiveStep::Nlj {
                    slot: i,
                    pred: to_pair(&pred, i, &offsets),
                });
            }
        }
        if !split.residual[i].is_empty() {
            let pred = Expr::conjunction(split.residual[i].clone());
            steps.push(NaiveStep::Filter(flatten(&pred, &offsets)));
        }
    }
    steps
}

/// Rebinds slot-indexed columns to positions in the running joined result.
pub(crate) fn flatten(e: &Expr, offsets: &[usize]) -> Expr {
    e.transform(&mut |x| match x {
        Expr::Col { slot, col, name } => Some(Expr::Col {
            slot: 0,
            col: offsets[*slot] + col,
            name: name.clone(),
        }),
        _ => None,
    })
}

/// Rebinds slots below `i` to the running result (slot 0) and slot `i` to slot 1.
fn to_pair(e: &Expr, i: usize, offsets: &[usize]) -> Expr {
    e.transform(&mut |x| match x {
        Expr::Col { slot, col, name } if *slot == i => Some(Expr::Col {
            slot: 1,
            col: *col,
            name: name.clone(),
        }),
        Expr::Col { slot, col, name } => Some(Expr::Col {
            slot: 0,
            col: offsets[*slot] + col,
            name: name.clone(),
        }),
        _ => None,
    })
}

fn join_list(v: &[Expr]) -> String {
    v.iter().map(|e| e.to_string()).collect::<Vec<_>>().join(", ")
}

fn source_text(from: &BoundFrom) -> String {
    match &from.lineage {
        None => format!("scan {}", from.relation.name()),
        Some(c) => format!("scan {}", describe_call(c)),
    }
}

fn fmt_block(b: &BlockPlan, f: &mut fmt::Formatter<'_>, pad: &str) -> fmt::Result {
    let blk = &b.block;
    let sink_text = || -> String {
        match &blk.group {
            Some(g) => {
                let keys: Vec<&str> = g.keys.iter().map(|(n, _)| n.as_str()).collect();
                let aggs: Vec<&str> = g.aggs.iter().map(|(n, _)| n.as_str()).collect();
                format!("groupby[{}; {}]", keys.join(", "), aggs.join(", "))
            }
            None => {
                let cols: Vec<&str> = blk.project.iter().map(|(n, _)| n.as_str()).collect();
                format!("collect[{}]", cols.join(", "))
            }
        }
    };
    match &b.strategy {
        Strategy::Pipelined { pipelines, .. } => {
            for (k, p) in pipelines.iter().enumerate() {
                let mut parts = vec![source_text(&blk.froms[p.slot])];
                if let Some(e) = &p.filter {
                    parts.push(format!("filter({e})"));
                }
                if let Some(pr) = &p.probe {
                    parts.push(format!(
                        "probe ht{}[{}]{}",
                        pr.table,
                        join_list(&pr.keys),
                        if pr.pkfk { " pk-fk" } else { "" }
                    ));
                }
                for r in &p.residual {
                    parts.push(format!("filter({r})"));
                }
                parts.push(match &p.sink {
                    PipeSink::Build { table, keys, pkfk, .. } => {
                        format!("build ht{table}[{}]{}", join_list(keys), if *pkfk { " pk-fk" } else { "" })
                    }
                    PipeSink::Group | PipeSink::Collect => sink_text(),
                });
                writeln!(f, "{pad}pipeline {k}: {}", parts.join(" -> "))?;
            }
        }
        Strategy::Naive(steps) => {
            for (k, s) in steps.iter().enumerate() {
                let text = match s {
                    NaiveStep::Select { slot, pred } => {
                        let src = source_text(&blk.froms[*slot]);
                        match pred {
                            Some(p) => format!("{src} -> select({p})"),
                            None => src,
                        }
                    }
                    NaiveStep::HashJoin {
                        slot,
                        a_keys,
                        b_keys,
                        pkfk,
                    } => format!(
                        "hashjoin with slot {slot} on {a_keys:?} = {b_keys:?}{}",
                        if *pkfk { " pk-fk" } else { "" }
                    ),
                    NaiveStep::Nlj { slot, pred } => format!("nested-loop join with slot {slot} on {pred}"),
                    NaiveStep::Cross { slot } => format!("cross product with slot {slot}"),
                    NaiveStep::Filter(p) => format!("select({p})"),
                };
                writeln!(f, "{pad}op {k}: {text}")?;
            }
            writeln!(f, "{pad}op {}: {}", steps.len(), sink_text())?;
        }
    }
    if blk.group.is_some() {
        let cols: Vec<&str> = blk.project.iter().map(|(n, _)| n.as_str()).collect();
        match &blk.having {
            Some(h) => writeln!(f, "{pad}post: having({h}) -> project[{}]", cols.join(", "))?,
            None => writeln!(f, "{pad}post: project[{}]", cols.join(", "))?,
        }
    }
    Ok(())
}

fn fmt_node(n: &PlanNode, f: &mut fmt::Formatter<'_>, depth: usize) -> fmt::Result {
    let pad = "  ".repeat(depth);
    match n {
        PlanNode::Block(b) => fmt_block(b, f, &pad),
        PlanNode::SetOp {
            kind,
            all,
            left,
            right,
        } => {
            writeln!(f, "{pad}{}{}:", kind.keyword().to_ascii_lowercase(), if *all { " all" } else { "" })?;
            fmt_node(left, f, depth + 1)?;
            fmt_node(right, f, depth + 1)
        }
    }
}

impl fmt::Display for PhysicalPlan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let naive = self.root.blocks().iter().any(|b| b.naive());
        writeln!(f, "mode: {}{}", self.mode, if naive { " (naive)" } else { "" })?;
        fmt_node(&self.root, f, 0)?;
        write!(f, "materialization points: {}", self.materialization_points())
    }
}
