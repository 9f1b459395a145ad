//! Typed column-versus-literal filtering for predicates directly over a source.

use std::sync::Arc;

use crate::expr::{BinOp, Expr};
use crate::lineage::Rid;
use crate::relstore::{Column, Relation, Value};

enum Cmp<'a> {
    Int(&'a [i64], BinOp, i64),
    IntAsFloat(&'a [i64], BinOp, f64),
    Float(&'a [f64], BinOp, f64),
    Text(&'a [Arc<str>], BinOp, Arc<str>),
    IntIn(&'a [i64], Vec<i64>, bool),
    TextIn(&'a [Arc<str>], Vec<Arc<str>>, bool),
}

/// Conjuncts over one slot compiled to typed column loops, plus the rest.
pub(crate) struct ScanFilter<'a> {
    n: usize,
    cmps: Vec<Cmp<'a>>,
    residual: Option<Expr>,
}

impl<'a> ScanFilter<'a> {
    /// `None` when no conjunct can be compiled.
    pub fn compile(e: &Expr, slot: usize, rel: &'a Relation) -> Option<ScanFilter<'a>> {
        let mut cmps = Vec::new();
        let mut rest = Vec::new();
        for c in e.clone().conjuncts() {
            match compile_one(&c, slot, rel) {
                Some(cmp) => cmps.push(cmp),
                None => rest.push(c),
            }
        }
        if cmps.is_empty() {
            return None;
        }
        Some(ScanFilter {
            n: rel.row_count(),
            cmps,
            residual: (!rest.is_empty()).then(|| Expr::conjunction(rest)),
        })
    }

    /// Rids passing every compiled conjunct, drawn from `candidates` or all rows.
    pub fn select(&self, candidates: Option<&[Rid]>) -> Vec<Rid> {
        let mut sel = match candidates {
            Some(c) => {
                let mut v = c.to_vec();
                self.cmps[0].refine(&mut v);
                v
            }
            None => self.cmps[0].first(self.n),
        };
        for c in &self.cmps[1..] {
            c.refine(&mut sel);
        }
        sel
    }

    #[inline]
    pub fn residual_ok(&self, row: &[Rid], rels: &[&Relation]) -> bool {
        self.residual.as_ref().is_none_or(|r| r.eval_bool(row, rels))
    }
}

fn compile_one<'a>(e: &Expr, slot: usize, rel: &'a Relation) -> Option<Cmp<'a>> {
    match e {
        Expr::Binary(op, a, b) if op.is_comparison() => {
            let (col, lit, op) = match (a.as_ref(), b.as_ref()) {
                (Expr::Col { slot: s, col, .. }, Expr::Lit(v)) if *s == slot => (*col, v, *op),
                (Expr::Lit(v), Expr::Col { slot: s, col, .. }) if *s == slot => (*col, v, op.flipped()),
                _ => return None,
            };
            match (rel.column(col), lit) {
                (Column::Int64(c), Value::Int(v)) | (Column::Date(c), Value::Date(v)) => {
                    Some(Cmp::Int(c, op, *v))
                }
                (Column::Int64(c), Value::Float(v)) => Some(Cmp::IntAsFloat(c, op, *v)),
                (Column::Float64(c), v @ (Value::Int(_) | Value::Float(_))) => {
                    Some(Cmp::Float(c, op, v.as_f64()?))
                }
                (Column::Text(c), Value::Text(v)) => Some(Cmp::Text(c, op, v.clone())),
                _ => None,
            }
        }
        Expr::InList {
            expr,
            list,
            negated,
        } => {
            let Expr::Col { slot: s, col, .. } = expr.as_ref() else { return None };
            if *s != slot {
                return None;
            }
            match rel.column(*col) {
                Column::Int64(c) if list.iter().all(|v| matches!(v, Value::Int(_))) => Some(
                    Cmp::IntIn(c, list.iter().filter_map(Value::as_i64).collect(), *negated),
                ),
                Column::Date(c) if list.iter().all(|v| matches!(v, Value::Date(_))) => Some(
                    Cmp::IntIn(c, list.iter().filter_map(Value::as_i64).collect(), *negated),
                ),
                Column::Text(c) if list.iter().all(|v| matches!(v, Value::Text(_))) => Some(
                    Cmp::TextIn(
                        c,
                        list.iter()
                            .map(|v| match v {
                                Value::Text(s) => s.clone(),
                                _ => unreachable!(),
                            })
                            .collect(),
                        *negated,
                    ),
                ),
                _ => None,
            }
        }
        _ => None,
    }
}

#[inline]
fn select_all<T: Copy>(col: &[T], p: impl Fn(T) -> bool) -> Vec<Rid> {
    let mut out = Vec::new();
    for (i, &x) in col.iter().enumerate() {
        if p(x) {
            out.push(i as Rid);
        }
    }
    out
}

#[inline]
fn keep<T: Copy>(col: &[T], sel: &mut Vec<Rid>, p: impl Fn(T) -> bool) {
    sel.retain(|&r| p(col[r as usize]));
}

macro_rules! dispatch {
    ($op:expr, $v:expr, $f:ident, $($args:expr),*) => {
        match $op {
            BinOp::Eq => $f($($args),*, |x| x == $v),
            BinOp::Ne => $f($($args),*, |x| x != $v),
            BinOp::Lt => $f($($args),*, |x| x < $v),
            BinOp::Le => $f($($args),*, |x| x <= $v),
            BinOp::Gt => $f($($args),*, |x| x > $v),
            BinOp::Ge => $f($($args),*, |x| x >= $v),
            _ => unreachable!("not a comparison"),
        }
    };
}

fn text_test(x: &str, op: BinOp, v: &str) -> bool {
    op.test(x.cmp(v))
}

impl Cmp<'_> {
    fn first(&self, n: usize) -> Vec<Rid> {
        match self {
            Cmp::Int(c, op, v) => {
                let v = *v;
                dispatch!(op, v, select_all, c)
            }
            Cmp::IntAsFloat(c, op, v) => {
                let v = *v;
                select_all(c, |x| op.test((x as f64).total_cmp(&v)))
            }
            Cmp::Float(c, op, v) => {
                let v = *v;
                dispatch!(op, v, select_all, c)
            }
            Cmp::Text(c, op, v) => {
                let mut out = Vec::new();
                for (i, x) in c.iter().enumerate() {
                    if text_test(x, *op, v) {
                        out.push(i as Rid);
                    }
                }
                out
            }
            _ => {
                let mut all: Vec<Rid> = (0..n as Rid).collect();
                self.refine(&mut all);
                all
            }
        }
    }

    fn refine(&self, sel: &mut Vec<Rid>) {
        match self {
            Cmp::Int(c, op, v) => {
                let v = *v;
                dispatch!(op, v, keep, c, sel)
            }
            Cmp::IntAsFloat(c, op, v) => {
                let v = *v;
                keep(c, sel, |x| op.test((x as f64).total_cmp(&v)))
            }
            Cmp::Float(c, op, v) => {
                let v = *v;
                dispatch!(op, v, keep, c, sel)
            }
            Cmp::Text(c, op, v) => sel.retain(|&r| text_test(&c[r as usize], *op, v)),
            Cmp::IntIn(c, list, neg) => keep(c, sel, |x| list.contains(&x) != *neg),
            Cmp::TextIn(c, list, neg) => {
                sel.retain(|&r| list.iter().any(|s| **s == *c[r as usize]) != *neg)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::relstore::{DataType, Schema};

    #[test]
    fn compiled_matches_interpreted() {
        let s = Schema::of(&[
            ("a", DataType::Int64),
            ("f", DataType::Float64),
            ("t", DataType::Text),
        ])
        .unwrap();
        let rel = Relation::new(
            "r",
            s,
            vec![
                Column::Int64((0..50).map(|i| i % 7).collect()),
                Column::Float64((0..50).map(|i| i as f64 / 3.0).collect()),
                Column::Text((0..50).map(|i| Arc::from(["x", "y", "z"][i % 3])).collect()),
            ],
        )
        .unwrap();
        let preds = [
            Expr::binary(BinOp::Lt, Expr::col(0, 0, "a"), Expr::lit(3i64)),
            Expr::and(
                Expr::binary(BinOp::Ge, Expr::lit(10.0), Expr::col(0, 1, "f")),
                Expr::binary(BinOp::Ne, Expr::col(0, 2, "t"), Expr::lit("y")),
            ),
            Expr::InList {
                expr: Box::new(Expr::col(0, 2, "t")),
                list: vec![Value::text("x"), Value::text("z")],
                negated: true,
            },
        ];
        for p in preds {
            let sf = ScanFilter::compile(&p, 0, &rel).unwrap();
            let got: Vec<Rid> = sf
                .select(None)
                .into_iter()
                .filter(|&r| sf.residual_ok(&[r], &[&rel]))
                .collect();
            let want: Vec<Rid> = (0..50).filter(|&r| p.eval_bool(&[r], &[&rel])).collect();
            assert_eq!(got, want, "{p}");
        }
    }
}
