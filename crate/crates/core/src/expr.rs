//! Bound scalar expressions over pipeline rows.
//!
//! A row is a tuple of rids, one per input slot; `Col` reads a column of the
//! relation bound to its slot.

use std::cmp::Ordering;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::lineage::Rid;
use crate::relstore::{date_month, date_year, DataType, Relation, Value};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Mod,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    And,
    Or,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Mod => "%",
            BinOp::Eq => "=",
            BinOp::Ne => "<>",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Gt => ">",
            BinOp::Ge => ">=",
            BinOp::And => "AND",
            BinOp::Or => "OR",
        }
    }

    pub fn is_comparison(self) -> bool {
        matches!(
            self,
            BinOp::Eq | BinOp::Ne | BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge
        )
    }

    fn precedence(self) -> u8 {
        match self {
            BinOp::Or => 1,
            BinOp::And => 2,
            BinOp::Eq | BinOp::Ne | BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => 3,
            BinOp::Add | BinOp::Sub => 4,
            BinOp::Mul | BinOp::Div | BinOp::Mod => 5,
        }
    }

    /// `a op b` as `b op' a`.
    pub fn flipped(self) -> BinOp {
        match self {
            BinOp::Lt => BinOp::Gt,
            BinOp::Le => BinOp::Ge,
            BinOp::Gt => BinOp::Lt,
            BinOp::Ge => BinOp::Le,
            other => other,
        }
    }

    #[inline]
    pub fn test(self, ord: Ordering) -> bool {
        match self {
            BinOp::Eq => ord == Ordering::Equal,
            BinOp::Ne => ord != Ordering::Equal,
            BinOp::Lt => ord == Ordering::Less,
            BinOp::Le => ord != Ordering::Greater,
            BinOp::Gt => ord == Ordering::Greater,
            BinOp::Ge => ord != Ordering::Less,
            _ => unreachable!("not a comparison"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Func {
    Year,
    Month,
    Sqrt,
    Abs,
}

impl Func {
    pub fn name(self) -> &'static str {
        match self {
            Func::Year => "year",
            Func::Month => "month",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Col {
        slot: usize,
        col: usize,
        name: Arc<str>,
    },
    /// The rid of the row bound to `slot`.
    Rid { slot: usize },
    Lit(Value),
    Neg(Box<Expr>),
    Not(Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    InList {
        expr: Box<Expr>,
        list: Vec<Value>,
        negated: bool,
    },
    Case {
        branches: Vec<(Expr, Expr)>,
        otherwise: Box<Expr>,
    },
    Func(Func, Box<Expr>),
}

impl Expr {
    pub fn col(slot: usize, col: usize, name: &str) -> Expr {
        Expr::Col {
            slot,
            col,
            name: Arc::from(name),
        }
    }

    /// Column `name` of `rel`, bound to slot 0.
    pub fn column_of(rel: &Relation, name: &str) -> Result<Expr> {
        let col = rel
            .schema()
            .index_of(name)
            .ok_or_else(|| Error::Bind(format!("{} has no attribute {name}", rel.name())))?;
        Ok(Expr::col(0, col, name))
    }

    pub fn lit(v: impl Into<Value>) -> Expr {
        Expr::Lit(v.into())
    }

    pub fn binary(op: BinOp, a: Expr, b: Expr) -> Expr {
        Expr::Binary(op, Box::new(a), Box::new(b))
    }

    pub fn and(a: Expr, b: Expr) -> Expr {
        Expr::binary(BinOp::And, a, b)
    }

    pub fn eq(a: Expr, b: Expr) -> Expr {
        Expr::binary(BinOp::Eq, a, b)
    }

    /// Conjunction of `parts`; `true` when empty.
    pub fn conjunction(parts: Vec<Expr>) -> Expr {
        parts
            .into_iter()
            .reduce(Expr::and)
            .unwrap_or(Expr::Lit(Value::Bool(true)))
    }

    /// Splits top-level ANDs.
    pub fn conjuncts(self) -> Vec<Expr> {
        match self {
            Expr::Binary(BinOp::And, a, b) => {
                let mut out = a.conjuncts();
                out.extend(b.conjuncts());
                out
            }
            e => vec![e],
        }
    }

    pub fn visit(&self, f: &mut impl FnMut(&Expr)) {
        f(self);
        match self {
            Expr::Col { .. } | Expr::Rid { .. } | Expr::Lit(_) => {}
            Expr::Neg(e) | Expr::Not(e) | Expr::Func(_, e) => e.visit(f),
            Expr::InList { expr, .. } => expr.visit(f),
            Expr::Binary(_, a, b) => {
                a.visit(f);
                b.visit(f);
            }
            Expr::Case {
                branches,
                otherwise,
            } => {
                for (w, t) in branches {
                    w.visit(f);
                    t.visit(f);
                }
                otherwise.visit(f);
            }
        }
    }

    /// Rewrites every slot index through `f`.
    pub fn map_slots(&self, f: &impl Fn(usize) -> usize) -> Expr {
        self.transform(&mut |e| match e {
            Expr::Col { slot, col, name } => Some(Expr::Col {
                slot: f(*slot),
                col: *col,
                name: name.clone(),
            }),
            Expr::Rid { slot } => Some(Expr::Rid { slot: f(*slot) }),
            _ => None,
        })
    }

    /// Bottom-up rewrite; `f` returns a replacement or `None` to recurse.
    pub fn transform(&self, f: &mut impl FnMut(&Expr) -> Option<Expr>) -> Expr {
        if let Some(e) = f(self) {
            return e;
        }
        match self {
            Expr::Col { .. } | Expr::Rid { .. } | Expr::Lit(_) => self.clone(),
            Expr::Neg(e) => Expr::Neg(Box::new(e.transform(f))),
            Expr::Not(e) => Expr::Not(Box::new(e.transform(f))),
            Expr::Func(k, e) => Expr::Func(*k, Box::new(e.transform(f))),
            Expr::InList {
                expr,
                list,
                negated,
            } => Expr::InList {
                expr: Box::new(expr.transform(f)),
                list: list.clone(),
                negated: *negated,
            },
            Expr::Binary(op, a, b) => {
                Expr::Binary(*op, Box::new(a.transform(f)), Box::new(b.transform(f)))
            }
            Expr::Case {
                branches,
                otherwise,
            } => Expr::Case {
                branches: branches
                    .iter()
                    .map(|(w, t)| (w.transform(f), t.transform(f)))
                    .collect(),
                otherwise: Box::new(otherwise.transform(f)),
            },
        }
    }

    /// Slots read by the expression, ascending and deduplicated.
    pub fn slots(&self) -> Vec<usize> {
        let mut out = Vec::new();
        self.visit(&mut |e| match e {
            Expr::Col { slot, .. } | Expr::Rid { slot } => out.push(*slot),
            _ => {}
        });
        out.sort_unstable();
        out.dedup();
        out
    }

    pub fn is_constant(&self) -> bool {
        self.slots().is_empty()
    }

    /// Result type given the relations bound to each slot.
    pub fn dtype(&self, rels: &[&Relation]) -> Result<DataType> {
        use DataType::*;
        Ok(match self {
            Expr::Col { slot, col, .. } => rels[*slot].schema().field(*col).dtype,
            Expr::Rid { .. } => Int64,
            Expr::Lit(v) => v.dtype(),
            Expr::Neg(e) => {
                let t = e.dtype(rels)?;
                if !t.is_numeric() {
                    return Err(Error::Type(format!("cannot negate {t}")));
                }
                t
            }
            Expr::Not(e) => {
                expect(e.dtype(rels)?, Bool, "NOT")?;
                Bool
            }
            Expr::Func(f, e) => {
                let t = e.dtype(rels)?;
                match f {
                    Func::Year | Func::Month => {
                        expect(t, Date, f.name())?;
                        Int64
                    }
                    Func::Sqrt => {
                        if !t.is_numeric() {
                            return Err(Error::Type(format!("sqrt of {t}")));
                        }
                        Float64
                    }
                    Func::Abs => {
                        if !t.is_numeric() {
                            return Err(Error::Type(format!("abs of {t}")));
                        }
                        t
                    }
                }
            }
            Expr::InList { expr, list, .. } => {
                let t = expr.dtype(rels)?;
                for v in list {
                    comparable(t, v.dtype())?;
                }
                Bool
            }
            Expr::Case {
                branches,
                otherwise,
            } => {
                let mut t = otherwise.dtype(rels)?;
                for (w, then) in branches {
                    expect(w.dtype(rels)?, Bool, "CASE WHEN")?;
                    t = unify(t, then.dtype(rels)?)?;
                }
                t
            }
            Expr::Binary(op, a, b) => {
                let (ta, tb) = (a.dtype(rels)?, b.dtype(rels)?);
                match op {
                    BinOp::And | BinOp::Or => {
                        expect(ta, Bool, op.symbol())?;
                        expect(tb, Bool, op.symbol())?;
                        Bool
                    }
                    op if op.is_comparison() => {
                        comparable(ta, tb)?;
                        Bool
                    }
                    BinOp::Add | BinOp::Sub => match (ta, tb) {
                        (Date, Int64) => Date,
                        (Int64, Date) if *op == BinOp::Add => Date,
                        (Date, Date) if *op == BinOp::Sub => Int64,
                        _ => arith(ta, tb, *op)?,
                    },
                    BinOp::Div => {
                        arith(ta, tb, *op)?;
                        Float64
                    }
                    _ => arith(ta, tb, *op)?,
                }
            }
        })
    }

    #[inline]
    pub fn eval(&self, row: &[Rid], rels: &[&Relation]) -> Value {
        match self {
            Expr::Col { slot, col, .. } => rels[*slot].value(*col, row[*slot]),
            Expr::Rid { slot } => Value::Int(row[*slot] as i64),
            Expr::Lit(v) => v.clone(),
            Expr::Neg(e) => match e.eval(row, rels) {
                Value::Int(i) => Value::Int(i.wrapping_neg()),
                Value::Float(f) => Value::Float(-f),
                v => panic!("negating {v}"),
            },
            Expr::Not(e) => Value::Bool(!e.eval(row, rels).as_bool()),
            Expr::Func(f, e) => {
                let v = e.eval(row, rels);
                match f {
                    Func::Year => Value::Int(date_year(v.as_i64().expect("date"))),
                    Func::Month => Value::Int(date_month(v.as_i64().expect("date"))),
                    Func::Sqrt => Value::Float(v.as_f64().expect("numeric").sqrt()),
                    Func::Abs => match v {
                        Value::Int(i) => Value::Int(i.wrapping_abs()),
                        Value::Float(f) => Value::Float(f.abs()),
                        v => panic!("abs of {v}"),
                    },
                }
            }
            Expr::InList {
                expr,
                list,
                negated,
            } => {
                let v = expr.eval(row, rels);
                let hit = list.iter().any(|x| v.total_cmp(x) == Ordering::Equal);
                Value::Bool(hit != *negated)
            }
            Expr::Case {
                branches,
                otherwise,
            } => {
                for (w, t) in branches {
                    if w.eval(row, rels).as_bool() {
                        return t.eval(row, rels);
                    }
                }
                otherwise.eval(row, rels)
            }
            Expr::Binary(op, a, b) => match op {
                BinOp::And => Value::Bool(a.eval_bool(row, rels) && b.eval_bool(row, rels)),
                BinOp::Or => Value::Bool(a.eval_bool(row, rels) || b.eval_bool(row, rels)),
                op if op.is_comparison() => {
                    let (x, y) = (a.eval(row, rels), b.eval(row, rels));
                    Value::Bool(op.test(x.total_cmp(&y)))
                }
                op => arith_eval(*op, a.eval(row, rels), b.eval(row, rels)),
            },
        }
    }

    #[inline]
    pub fn eval_bool(&self, row: &[Rid], rels: &[&Relation]) -> bool {
        match self {
            Expr::Binary(op, a, b) if op.is_comparison() => {
                if let (Expr::Col { slot, col, .. }, Expr::Lit(lit)) = (a.as_ref(), b.as_ref()) {
                    return op.test(rels[*slot].value(*col, row[*slot]).total_cmp(lit));
                }
                op.test(a.eval(row, rels).total_cmp(&b.eval(row, rels)))
            }
            Expr::Binary(BinOp::And, a, b) => a.eval_bool(row, rels) && b.eval_bool(row, rels),
            Expr::Binary(BinOp::Or, a, b) => a.eval_bool(row, rels) || b.eval_bool(row, rels),
            e => e.eval(row, rels).as_bool(),
        }
    }

    /// Folds literal-only subtrees.
    pub fn fold_constants(&self) -> Expr {
        self.transform(&mut |e| {
            if matches!(e, Expr::Lit(_)) || !e.is_constant() {
                return None;
            }
            Some(Expr::Lit(e.eval(&[], &[])))
        })
    }
}

fn expect(t: DataType, want: DataType, ctx: &str) -> Result<()> {
    if t == want {
        Ok(())
    } else {
        Err(Error::Type(format!("{ctx} expects {want}, found {t}")))
    }
}

fn comparable(a: DataType, b: DataType) -> Result<()> {
    if a == b || (a.is_numeric() && b.is_numeric()) {
        Ok(())
    } else {
        Err(Error::Type(format!("cannot compare {a} with {b}")))
    }
}

fn unify(a: DataType, b: DataType) -> Result<DataType> {
    match (a, b) {
        _ if a == b => Ok(a),
        (DataType::Int64, DataType::Float64) | (DataType::Float64, DataType::Int64) => {
            Ok(DataType::Float64)
        }
        _ => Err(Error::Type(format!("CASE branches mix {a} and {b}"))),
    }
}

fn arith(a: DataType, b: DataType, op: BinOp) -> Result<DataType> {
    match (a, b) {
        (DataType::Int64, DataType::Int64) => Ok(DataType::Int64),
        (x, y) if x.is_numeric() && y.is_numeric() => Ok(DataType::Float64),
        _ => Err(Error::Type(format!(
            "operator {} does not apply to {a} and {b}",
            op.symbol()
        ))),
    }
}

fn arith_eval(op: BinOp, x: Value, y: Value) -> Value {
    use Value::*;
    match (op, &x, &y) {
        (BinOp::Add, Date(d), Int(i)) | (BinOp::Add, Int(i), Date(d)) => Date(d + i),
        (BinOp::Sub, Date(d), Int(i)) => Date(d - i),
        (BinOp::Sub, Date(a), Date(b)) => Int(a - b),
        (BinOp::Div, _, _) => Float(x.as_f64().expect("numeric") / y.as_f64().expect("numeric")),
        (_, Int(a), Int(b)) => Int(match op {
            BinOp::Add => a.wrapping_add(*b),
            BinOp::Sub => a.wrapping_sub(*b),
            BinOp::Mul => a.wrapping_mul(*b),
            BinOp::Mod => {
                if *b == 0 {
                    0
                } else {
                    a.wrapping_rem(*b)
                }
            }
            _ => unreachable!(),
        }),
        _ => {
            let (a, b) = (x.as_f64().expect("numeric"), y.as_f64().expect("numeric"));
            Float(match op {
                BinOp::Add => a + b,
                BinOp::Sub => a - b,
                BinOp::Mul => a * b,
                BinOp::Mod => a % b,
                _ => unreachable!(),
            })
        }
    }
}

impl From<i64> for Value {
    fn from(v: i64) -> Value {
        Value::Int(v)
    }
}

impl From<f64> for Value {
    fn from(v: f64) -> Value {
        Value::Float(v)
    }
}

impl From<&str> for Value {
    fn from(v: &str) -> Value {
        Value::text(v)
    }
}

impl From<bool> for Value {
    fn from(v: bool) -> Value {
        Value::Bool(v)
    }
}

fn fmt_lit(v: &Value, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    match v {
        Value::Text(s) => write!(f, "'{}'", s.replace('\'', "''")),
        Value::Date(_) => write!(f, "date '{v}'"),
        Value::Float(x) if x.fract() == 0.0 && x.is_finite() => write!(f, "{x:.1}"),
        _ => write!(f, "{v}"),
    }
}

impl Expr {
    fn fmt_prec(&self, f: &mut fmt::Formatter<'_>, parent: u8) -> fmt::Result {
        match self {
            Expr::Col { name, .. } => write!(f, "{name}"),
            Expr::Rid { .. } => write!(f, "__rid"),
            Expr::Lit(v) => fmt_lit(v, f),
            Expr::Neg(e) => {
                write!(f, "-")?;
                e.fmt_prec(f, 6)
            }
            Expr::Not(e) => {
                write!(f, "NOT ")?;
                e.fmt_prec(f, 6)
            }
            Expr::Func(Func::Year, e) | Expr::Func(Func::Month, e) => {
                let Expr::Func(k, _) = self else { unreachable!() };
                write!(f, "extract({} from {e})", k.name())
            }
            Expr::Func(k, e) => write!(f, "{}({e})", k.name()),
            Expr::InList {
                expr,
                list,
                negated,
            } => {
                expr.fmt_prec(f, 6)?;
                write!(f, "{} IN (", if *negated { " NOT" } else { "" })?;
                for (i, v) in list.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    fmt_lit(v, f)?;
                }
                write!(f, ")")
            }
            Expr::Case {
                branches,
                otherwise,
            } => {
                write!(f, "CASE")?;
                for (w, t) in branches {
                    write!(f, " WHEN {w} THEN {t}")?;
                }
                write!(f, " ELSE {otherwise} END")
            }
            Expr::Binary(op, a, b) => {
                let p = op.precedence();
                if p < parent {
                    write!(f, "(")?;
                }
                a.fmt_prec(f, p)?;
                write!(f, " {} ", op.symbol())?;
                b.fmt_prec(f, p + 1)?;
                if p < parent {
                    write!(f, ")")?;
                }
                Ok(())
            }
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_prec(f, 0)
    }
}
