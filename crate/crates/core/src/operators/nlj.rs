//! Nested-loop theta join and cross product.

use std::sync::Arc;

use super::capture::{resolve_targets, seal, CaptureMode, CaptureSpec, Recorder, Shape};
use super::{joined_names, OperatorOutput};
use crate::error::Result;
use crate::expr::Expr;
use crate::lineage::{BundleData, LineageMap, RelationLineage, Rid};
use crate::relstore::{Field, Relation, Schema};

fn gather(a: &Relation, b: &Relation, a_rids: &[Rid], b_rids: &[Rid], name: String) -> Result<Arc<Relation>> {
    let names = joined_names(a, b);
    let fields = names
        .into_iter()
        .zip(a.schema().fields().iter().chain(b.schema().fields()))
        .map(|(n, f)| Field::new(n, f.dtype))
        .collect();
    let columns = a
        .columns()
        .iter()
        .map(|c| c.take(a_rids))
        .chain(b.columns().iter().map(|c| c.take(b_rids)))
        .collect();
    Ok(Arc::new(Relation::new(name, Schema::new(fields)?, columns)?))
}

/// Pairs of `a` and `b` rows satisfying `pred`, with `a` bound to slot 0
/// and `b` to slot 1. Output order is a-major.
pub fn nlj(a: &OperatorOutput, b: &OperatorOutput, pred: &Expr, capture: &CaptureSpec) -> Result<OperatorOutput> {
    let parts = Arc::new(vec![a.clone(), b.clone()]);
    let targets = resolve_targets(&parts, &[0, 1], &[false, false], capture)?;
    let captured = !targets.is_empty();
    let shapes = targets
        .iter()
        .map(|t| {
            let bw = if t.tracer.is_single_valued() { Shape::Array } else { Shape::Index };
            let fw = if t.tracer.slot == 0 && t.tracer.is_identity() { Shape::Runs } else { Shape::Index };
            (bw, fw)
        })
        .collect();
    let mode = match capture.mode {
        CaptureMode::Defer => CaptureMode::Inject,
        m => m,
    };
    let (ra, rb) = (a.relation.as_ref(), b.relation.as_ref());
    let rels = [ra, rb];
    let mut rec = Recorder::new(mode, targets, shapes, None, ra.row_count() * rb.row_count());
    let always = matches!(pred, Expr::Lit(crate::relstore::Value::Bool(true)));
    let mut a_rids = Vec::new();
    let mut b_rids = Vec::new();
    let mut row = [0 as Rid; 2];
    for i in 0..ra.row_count() as Rid {
        row[0] = i;
        for j in 0..rb.row_count() as Rid {
            row[1] = j;
            if always || pred.eval_bool(&row, &rels) {
                if captured {
                    rec.row(a_rids.len() as Rid, &row);
                }
                a_rids.push(i);
                b_rids.push(j);
            }
        }
    }
    let name = format!("nlj({},{})", ra.name(), rb.name());
    let relation = gather(ra, rb, &a_rids, &b_rids, name)?;
    let n = a_rids.len();
    let bundle = if captured { seal(rec.finish(n)?, n, true) } else { None };
    Ok(OperatorOutput { relation, bundle })
}

/// `a × b`, a-major. Over base inputs lineage is arithmetic.
pub fn cross_product(a: &OperatorOutput, b: &OperatorOutput, capture: &CaptureSpec) -> Result<OperatorOutput> {
    let parts = Arc::new(vec![a.clone(), b.clone()]);
    let targets = resolve_targets(&parts, &[0, 1], &[false, false], capture)?;
    let arithmetic = capture.mode != CaptureMode::Callback
        && targets.iter().all(|t| {
            t.tracer.is_identity()
                && t.opts.predicate.is_none()
                && t.opts.partition.is_none()
                && t.opts.cube.is_none()
        });
    if !arithmetic {
        let mut out = nlj(a, b, &Expr::lit(true), capture)?;
        let rel = Arc::unwrap_or_clone(out.relation);
        out.relation = Arc::new(rel.renamed(format!("cross({},{})", a.relation.name(), b.relation.name())));
        return Ok(out);
    }
    let (ra, rb) = (a.relation.as_ref(), b.relation.as_ref());
    let (na, nb) = (ra.row_count(), rb.row_count());
    let n = na * nb;
    let a_rids: Vec<Rid> = (0..na as Rid).flat_map(|i| std::iter::repeat_n(i, nb)).collect();
    let b_rids: Vec<Rid> = (0..na).flat_map(|_| 0..nb as Rid).collect();
    let relation = gather(ra, rb, &a_rids, &b_rids, format!("cross({},{})", ra.name(), rb.name()))?;
    if targets.is_empty() {
        return Ok(OperatorOutput { relation, bundle: None });
    }
    let mut data = BundleData::default();
    for t in &targets {
        let (backward, forward) = if t.tracer.slot == 0 {
            (
                LineageMap::Div { len: n, divisor: nb as u32 },
                LineageMap::Block { len: na, width: nb as u32 },
            )
        } else {
            (
                LineageMap::Mod { len: n, modulus: nb as u32 },
                LineageMap::Stride { len: nb, stride: nb as u32, count: na as u32 },
            )
        };
        data.relations.insert(
            t.name.clone(),
            RelationLineage {
                backward: t.opts.backward.then_some(backward),
                forward: t.opts.forward.then_some(forward),
                cube: None,
                base_len: t.base_len,
            },
        );
    }
    Ok(OperatorOutput {
        relation,
        bundle: seal(data, n, true),
    })
}
