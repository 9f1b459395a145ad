//! Execution of physical plans.

use std::sync::Arc;
use std::time::Instant;

use serde::Serialize;

use super::ast::SetOpKind;
use super::bind::{Block, BoundFrom};
use super::physical::{flatten, BlockPlan, NaiveStep, PhysicalPlan, PipeSink, PlanNode, Strategy};
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::lineage::Rid;
use crate::operators::{
    bag_diff, bag_intersect, bag_union, collect, cross_product, hashjoin, nlj, project, run_groupby,
    set_diff, set_intersect, set_union, AggSpec, CaptureSpec, GroupSpec, JoinOptions, JoinTable,
    OperatorOutput, OutputColumn, Pipeline, ScanCounter, Source, Step,
};
use crate::relstore::{Catalog, Relation};

/// Supplies the rows of each FROM entry.
pub trait Inputs {
    /// Input and source for `from`, bound at `slot`. `filters` are the
    /// block's conjuncts reading only that slot.
    fn input(&self, from: &BoundFrom, slot: usize, filters: &[Expr]) -> Result<(OperatorOutput, Source)>;
}

impl Inputs for Catalog {
    fn input(&self, from: &BoundFrom, _slot: usize, _filters: &[Expr]) -> Result<(OperatorOutput, Source)> {
        match &from.lineage {
            None => Ok((OperatorOutput::scan(self.get(from.relation.name())?.clone()), Source::Scan)),
            Some(c) => Err(Error::UnknownHandle(c.handle.clone())),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct OpStat {
    pub name: String,
    pub ms: f64,
    pub rows: usize,
}

/// Group-by output of a block, kept for lineage queries over its result.
#[derive(Clone, Debug)]
pub struct Grouped {
    pub output: OperatorOutput,
    /// Group row of each result row; `None` when they coincide.
    pub row_map: Option<Vec<Rid>>,
}

impl Grouped {
    pub fn group_of(&self, out: Rid) -> Rid {
        match &self.row_map {
            Some(m) => m[out as usize],
            None => out,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Executed {
    pub output: OperatorOutput,
    pub grouped: Option<Grouped>,
    pub operators: Vec<OpStat>,
}

pub fn execute(
    plan: &PhysicalPlan,
    inputs: &dyn Inputs,
    capture: &CaptureSpec,
    name: &str,
    scans: Option<ScanCounter>,
) -> Result<Executed> {
    let mut ex = Executor {
        inputs,
        scans,
        stats: Vec::new(),
    };
    let (output, grouped) = ex.node(&plan.root, capture, name)?;
    Ok(Executed {
        output,
        grouped,
        operators: ex.stats,
    })
}

struct Executor<'a> {
    inputs: &'a dyn Inputs,
    scans: Option<ScanCounter>,
    stats: Vec<OpStat>,
}

impl Executor<'_> {
    fn timed(&mut self, name: String, f: impl FnOnce() -> Result<OperatorOutput>) -> Result<OperatorOutput> {
        let t = Instant::now();
        let out = f()?;
        self.stats.push(OpStat {
            name,
            ms: t.elapsed().as_secs_f64() * 1e3,
            rows: out.relation.row_count(),
        });
        Ok(out)
    }

    fn node(&mut self, n: &PlanNode, capture: &CaptureSpec, name: &str) -> Result<(OperatorOutput, Option<Grouped>)> {
        match n {
            PlanNode::Block(b) => self.block(b, capture, name),
            PlanNode::SetOp {
                kind,
                all,
                left,
                right,
            } => {
                let inner = capture.for_inputs();
                let (l, _) = self.node(left, &inner, "left")?;
                let (r, _) = self.node(right, &inner, "right")?;
                let op = match (kind, all) {
                    (SetOpKind::Union, false) => set_union,
                    (SetOpKind::Union, true) => bag_union,
                    (SetOpKind::Intersect, false) => set_intersect,
                    (SetOpKind::Intersect, true) => bag_intersect,
                    (SetOpKind::Except, false) => set_diff,
                    (SetOpKind::Except, true) => bag_diff,
                };
                let label = format!("{}{}", kind.keyword().to_ascii_lowercase(), if *all { " all" } else { "" });
                let out = self.timed(label, || op(&l, &r, capture))?;
                Ok((rename(out, name)?, None))
            }
        }
    }

    fn block(&mut self, b: &BlockPlan, capture: &CaptureSpec, name: &str) -> Result<(OperatorOutput, Option<Grouped>)> {
        let blk = &b.block;
        let mut parts = Vec::with_capacity(blk.froms.len());
        let mut sources = Vec::with_capacity(blk.froms.len());
        for (s, from) in blk.froms.iter().enumerate() {
            let local: Vec<Expr> = blk
                .filters
                .iter()
                .filter(|e| e.slots() == [s])
                .cloned()
                .collect();
            let (input, source) = self.inputs.input(from, s, &local)?;
            parts.push(input);
            sources.push(source);
        }
        let root_capture = if blk.having.is_some() {
            capture.for_inputs()
        } else {
            capture.clone()
        };
        let root = match &b.strategy {
            Strategy::Pipelined { pipelines, row_unique } => {
                let parts = Arc::new(parts);
                let mut tables: Vec<Arc<JoinTable>> = Vec::new();
                let mut root = None;
                for spec in pipelines {
                    let mut p = Pipeline::scan(parts.clone(), spec.slot).with_scans(self.scans.clone());
                    p.source = sources[spec.slot].clone();
                    if let Some(e) = &spec.filter {
                        p = p.with_step(Step::Filter(e.clone()));
                    }
                    if let Some(pr) = &spec.probe {
                        p = p.with_step(Step::Probe {
                            table: tables[pr.table].clone(),
                            keys: pr.keys.clone(),
                        });
                    }
                    for r in &spec.residual {
                        p = p.with_step(Step::Filter(r.clone()));
                    }
                    match &spec.sink {
                        PipeSink::Build { keys, slots, pkfk, table } => {
                            let t = Instant::now();
                            let ht = JoinTable::build(&p, keys, slots.clone(), *pkfk)?;
                            self.stats.push(OpStat {
                                name: format!("build ht{table}"),
                                ms: t.elapsed().as_secs_f64() * 1e3,
                                rows: ht.len(),
                            });
                            tables.push(Arc::new(ht));
                        }
                        PipeSink::Group => {
                            let g = blk.group.as_ref().expect("group sink has a spec");
                            let p = Arc::new(p);
                            root = Some(self.timed("groupby".into(), || {
                                run_groupby(p, g, name, &root_capture, row_unique)
                            })?);
                        }
                        PipeSink::Collect => {
                            root = Some(self.timed("collect".into(), || {
                                collect(&p, &blk.project, name, &root_capture, row_unique, None)
                            })?);
                        }
                    }
                }
                root.expect("the last pipeline feeds the root sink")
            }
            Strategy::Naive(steps) => self.naive(blk, steps, parts, sources, &root_capture, name)?,
        };
        if blk.group.is_none() {
            return Ok((root, None));
        }
        self.post_group(blk, root, capture, name)
    }

    fn post_group(
        &mut self,
        blk: &Block,
        gout: OperatorOutput,
        capture: &CaptureSpec,
        name: &str,
    ) -> Result<(OperatorOutput, Option<Grouped>)> {
        match &blk.having {
            None => {
                let out = if is_identity_projection(&blk.project, &gout.relation) {
                    rename(gout.clone(), name)?
                } else {
                    rename(project(&gout, &blk.project)?, name)?
                };
                Ok((
                    out,
                    Some(Grouped {
                        output: gout,
                        row_map: None,
                    }),
                ))
            }
            Some(h) => {
                let rel = gout.relation.clone();
                let row_map: Vec<Rid> = (0..rel.row_count() as Rid)
                    .filter(|&g| h.eval_bool(&[g], &[&rel]))
                    .collect();
                let parts = Arc::new(vec![gout.clone()]);
                let p = Pipeline::scan(parts, 0).with_step(Step::Filter(h.clone()));
                let out = self.timed("having".into(), || collect(&p, &blk.project, name, capture, &[true], None))?;
                Ok((
                    out,
                    Some(Grouped {
                        output: gout,
                        row_map: Some(row_map),
                    }),
                ))
            }
        }
    }

    fn naive(
        &mut self,
        blk: &Block,
        steps: &[NaiveStep],
        parts: Vec<OperatorOutput>,
        sources: Vec<Source>,
        root_capture: &CaptureSpec,
        name: &str,
    ) -> Result<OperatorOutput> {
        let inner = root_capture.for_inputs();
        let n = blk.froms.len();
        let mut offsets = vec![0usize; n];
        for i in 1..n {
            offsets[i] = offsets[i - 1] + blk.froms[i - 1].relation.schema().len();
        }
        let mut slot_inputs: Vec<Option<OperatorOutput>> = vec![None; n];
        let mut cur: Option<OperatorOutput> = None;
        for step in steps {
            match step {
                NaiveStep::Select { slot, pred } => {
                    let input = parts[*slot].clone();
                    let source = sources[*slot].clone();
                    let materialize = pred.is_some() || matches!(source, Source::Rids(_));
                    let out = if materialize {
                        let mut p = Pipeline::scan(Arc::new(vec![input.clone()]), 0).with_scans(self.scans.clone());
                        p.source = source;
                        if let Some(e) = pred {
                            p = p.with_step(Step::Filter(e.clone()));
                        }
                        let cols = all_columns(&input.relation);
                        let label = format!("select({})", input.relation.name());
                        self.timed(label.clone(), || collect(&p, &cols, &label, &inner, &[true], None))?
                    } else {
                        if let Some(s) = &self.scans {
                            s.fetch_add(input.relation.row_count() as u64, std::sync::atomic::Ordering::Relaxed);
                        }
                        input
                    };
                    if *slot == 0 {
                        cur = Some(out);
                    } else {
                        slot_inputs[*slot] = Some(out);
                    }
                }
                NaiveStep::HashJoin {
                    slot,
                    a_keys,
                    b_keys,
                    pkfk,
                } => {
                    let a = cur.take().expect("running result");
                    let b = slot_inputs[*slot].take().expect("slot selected");
                    cur = Some(self.timed("hashjoin".into(), || {
                        hashjoin(&a, &b, a_keys, b_keys, JoinOptions { pkfk: *pkfk }, &inner)
                    })?);
                }
                NaiveStep::Nlj { slot, pred } => {
                    let a = cur.take().expect("running result");
                    let b = slot_inputs[*slot].take().expect("slot selected");
                    cur = Some(self.timed("nlj".into(), || nlj(&a, &b, pred, &inner))?);
                }
                NaiveStep::Cross { slot } => {
                    let a = cur.take().expect("running result");
                    let b = slot_inputs[*slot].take().expect("slot selected");
                    cur = Some(self.timed("cross".into(), || cross_product(&a, &b, &inner))?);
                }
                NaiveStep::Filter(pred) => {
                    let a = cur.take().expect("running result");
                    let p = Pipeline::scan(Arc::new(vec![a.clone()]), 0).with_step(Step::Filter(pred.clone()));
                    let cols = all_columns(&a.relation);
                    cur = Some(self.timed("select".into(), || collect(&p, &cols, "select", &inner, &[true], None))?);
                }
            }
        }
        let cur = cur.expect("slot 0 selected");
        let p = Pipeline::scan(Arc::new(vec![cur]), 0);
        match &blk.group {
            Some(g) => {
                let spec = GroupSpec {
                    keys: g.keys.iter().map(|(k, e)| (k.clone(), flatten(e, &offsets))).collect(),
                    aggs: g
                        .aggs
                        .iter()
                        .map(|(k, a)| {
                            (
                                k.clone(),
                                AggSpec {
                                    func: a.func,
                                    arg: a.arg.as_ref().map(|e| flatten(e, &offsets)),
                                    input: a.input,
                                },
                            )
                        })
                        .collect(),
                };
                let p = Arc::new(p);
                self.timed("groupby".into(), || run_groupby(p, &spec, name, root_capture, &[true]))
            }
            None => {
                let outputs: Vec<OutputColumn> = blk
                    .project
                    .iter()
                    .map(|(k, e)| (k.clone(), flatten(e, &offsets)))
                    .collect();
                self.timed("collect".into(), || collect(&p, &outputs, name, root_capture, &[true], None))
            }
        }
    }
}

fn all_columns(rel: &Relation) -> Vec<OutputColumn> {
    rel.schema()
        .fields()
        .iter()
        .enumerate()
        .map(|(i, f)| (f.name.clone(), Expr::col(0, i, &f.name)))
        .collect()
}

/// Whether `project` returns the group-by columns unchanged.
fn is_identity_projection(project: &[OutputColumn], rel: &Relation) -> bool {
    project.len() == rel.schema().len()
        && project.iter().enumerate().all(|(i, (n, e))| {
            matches!(e, Expr::Col { slot: 0, col, .. } if *col == i) && rel.schema().field(i).name == *n
        })
}

fn rename(out: OperatorOutput, name: &str) -> Result<OperatorOutput> {
    if out.relation.name() == name {
        return Ok(out);
    }
    let rel = Arc::try_unwrap(out.relation).unwrap_or_else(|shared| (*shared).clone());
    Ok(OperatorOutput {
        relation: Arc::new(rel.renamed(name)),
        bundle: out.bundle,
    })
}
