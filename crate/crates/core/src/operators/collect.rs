//! Root sinks for select-project-join pipelines, plus selection and projection.

use std::sync::Arc;

use super::capture::{resolve_targets, seal, CaptureSpec, Recorder, Shape};
use super::pipeline::{Pipeline, Step};
use super::OperatorOutput;
use crate::error::Result;
use crate::expr::Expr;
use crate::lineage::Rid;
use crate::relstore::{Column, Field, Relation, Schema};

/// Output column name and defining expression.
pub type OutputColumn = (String, Expr);

/// Runs `p` to completion, projecting `outputs` and capturing lineage for
/// every row. `row_unique[s]` marks slots whose rows reach the sink at most once.
pub fn collect(
    p: &Pipeline,
    outputs: &[OutputColumn],
    name: &str,
    capture: &CaptureSpec,
    row_unique: &[bool],
    bw_capacity: Option<usize>,
) -> Result<OperatorOutput> {
    let rels = p.rels();
    let fields = outputs
        .iter()
        .map(|(n, e)| Ok(Field::new(n.clone(), e.dtype(&rels)?)))
        .collect::<Result<Vec<_>>>()?;
    let schema = Schema::new(fields)?;
    let targets = resolve_targets(&p.parts, &p.bound_slots(), row_unique, capture)?;
    let captured = !targets.is_empty();
    let shapes = targets
        .iter()
        .map(|t| {
            let bw = if t.tracer.is_single_valued() { Shape::Array } else { Shape::Index };
            let fw = if t.functional() { Shape::Array } else { Shape::Index };
            (bw, fw)
        })
        .collect();
    let mut rec = Recorder::new(capture.mode, targets, shapes, bw_capacity, p.source_len());

    let gather: Option<Vec<(usize, usize)>> = outputs
        .iter()
        .map(|(_, e)| match e {
            Expr::Col { slot, col, .. } => Some((*slot, *col)),
            _ => None,
        })
        .collect();
    let mut n_out: Rid = 0;
    let columns = match gather {
        Some(cols) => {
            let mut slots: Vec<usize> = cols.iter().map(|c| c.0).collect();
            slots.sort_unstable();
            slots.dedup();
            let mut rids: Vec<Vec<Rid>> = vec![Vec::new(); p.parts.len()];
            p.run(|row| {
                for &s in &slots {
                    rids[s].push(row[s]);
                }
                if captured {
                    rec.row(n_out, row);
                }
                n_out += 1;
            });
            cols.iter()
                .map(|&(s, c)| rels[s].column(c).take(&rids[s]))
                .collect::<Vec<_>>()
        }
        None => {
            let mut cols: Vec<Column> = schema.fields().iter().map(|f| Column::empty(f.dtype)).collect();
            let mut err = None;
            p.run(|row| {
                for ((_, e), c) in outputs.iter().zip(cols.iter_mut()) {
                    if let Err(x) = c.push(e.eval(row, &rels)) {
                        err.get_or_insert(x);
                    }
                }
                if captured {
                    rec.row(n_out, row);
                }
                n_out += 1;
            });
            if let Some(e) = err {
                return Err(e);
            }
            cols
        }
    };
    let relation = Arc::new(Relation::new(name, schema, columns)?);
    let data = rec.finish(n_out as usize)?;
    Ok(OperatorOutput {
        bundle: seal(data, n_out as usize, captured),
        relation,
    })
}

fn all_columns(rel: &Relation, slot: usize) -> Vec<OutputColumn> {
    rel.schema()
        .fields()
        .iter()
        .enumerate()
        .map(|(i, f)| (f.name.clone(), Expr::col(slot, i, &f.name)))
        .collect()
}

/// Rows of `input` satisfying `pred` (bound to slot 0), in input order.
pub fn select(
    input: &OperatorOutput,
    pred: &Expr,
    capture: &CaptureSpec,
    est_selectivity: Option<f64>,
) -> Result<OperatorOutput> {
    let parts = Arc::new(vec![input.clone()]);
    let p = Pipeline::scan(parts, 0).with_step(Step::Filter(pred.clone()));
    let capture = match est_selectivity {
        Some(s) => capture.clone().with_options(|o| o.est_selectivity = Some(s)),
        None => capture.clone(),
    };
    let name = format!("select({})", input.relation.name());
    collect(&p, &all_columns(&input.relation, 0), &name, &capture, &[true], None)
}

/// Evaluates `exprs` per row; lineage passes through unchanged.
pub fn project(input: &OperatorOutput, exprs: &[OutputColumn]) -> Result<OperatorOutput> {
    let parts = Arc::new(vec![input.clone()]);
    let p = Pipeline::scan(parts, 0);
    let name = format!("project({})", input.relation.name());
    let out = collect(&p, exprs, &name, &CaptureSpec::none(), &[true], None)?;
    Ok(OperatorOutput {
        relation: out.relation,
        bundle: input.bundle.clone(),
    })
}
