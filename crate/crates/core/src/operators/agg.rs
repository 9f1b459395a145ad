//! Aggregate functions and their running state.

use std::fmt;

use rustc_hash::FxHashSet;

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::lineage::Rid;
use crate::relstore::{DataType, Relation, Value};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum AggFunc {
    CountStar,
    Count,
    Sum,
    Min,
    Max,
    Avg,
    CountDistinct,
}

impl AggFunc {
    pub fn name(self) -> &'static str {
        match self {
            AggFunc::CountStar | AggFunc::Count | AggFunc::CountDistinct => "count",
            AggFunc::Sum => "sum",
            AggFunc::Min => "min",
            AggFunc::Max => "max",
            AggFunc::Avg => "avg",
        }
    }

    /// Whether partial states can be merged exactly.
    pub fn is_mergeable(self) -> bool {
        !matches!(self, AggFunc::CountDistinct)
    }
}

/// One aggregate of a group-by: function, argument and input type.
#[derive(Clone, Debug, PartialEq)]
pub struct AggSpec {
    pub func: AggFunc,
    pub arg: Option<Expr>,
    pub input: DataType,
}

impl AggSpec {
    pub fn count_star() -> Self {
        AggSpec {
            func: AggFunc::CountStar,
            arg: None,
            input: DataType::Int64,
        }
    }

    /// Aggregate of `arg`, typed against the relations bound to its slots.
    pub fn new(func: AggFunc, arg: Expr, rels: &[&Relation]) -> Result<Self> {
        let input = arg.dtype(rels)?;
        match func {
            AggFunc::Sum | AggFunc::Avg if !input.is_numeric() => {
                return Err(Error::Type(format!("{} of {input}", func.name())))
            }
            AggFunc::CountStar => {
                return Err(Error::Invalid("count(*) takes no argument".into()))
            }
            _ => {}
        }
        Ok(AggSpec {
            func,
            arg: Some(arg),
            input,
        })
    }

    pub fn output_type(&self) -> DataType {
        match self.func {
            AggFunc::CountStar | AggFunc::Count | AggFunc::CountDistinct => DataType::Int64,
            AggFunc::Avg => DataType::Float64,
            AggFunc::Sum | AggFunc::Min | AggFunc::Max => self.input,
        }
    }

    pub fn init(&self) -> AggAcc {
        match (self.func, self.input) {
            (AggFunc::CountStar | AggFunc::Count, _) => AggAcc::Count(0),
            (AggFunc::Sum, DataType::Float64) => AggAcc::SumFloat(0.0),
            (AggFunc::Sum, _) => AggAcc::SumInt(0),
            (AggFunc::Avg, DataType::Float64) => AggAcc::AvgFloat(0.0, 0),
            (AggFunc::Avg, _) => AggAcc::AvgInt(0, 0),
            (AggFunc::Min, _) => AggAcc::Min(None),
            (AggFunc::Max, _) => AggAcc::Max(None),
            (AggFunc::CountDistinct, _) => AggAcc::Distinct(FxHashSet::default()),
        }
    }

    #[inline]
    pub fn update(&self, acc: &mut AggAcc, row: &[Rid], rels: &[&Relation]) {
        match (acc, &self.arg) {
            (AggAcc::Count(c), _) => *c += 1,
            (acc, Some(arg)) => acc.update(arg.eval(row, rels)),
            (_, None) => unreachable!("aggregate without argument"),
        }
    }
}

impl fmt::Display for AggSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.func, &self.arg) {
            (AggFunc::CountStar, _) => write!(f, "count(*)"),
            (AggFunc::CountDistinct, Some(a)) => write!(f, "count(DISTINCT {a})"),
            (func, Some(a)) => write!(f, "{}({a})", func.name()),
            (func, None) => write!(f, "{}()", func.name()),
        }
    }
}

/// Running state of one aggregate for one group.
#[derive(Clone, Debug, PartialEq)]
pub enum AggAcc {
    Count(i64),
    SumInt(i64),
    SumFloat(f64),
    AvgInt(i64, i64),
    AvgFloat(f64, i64),
    Min(Option<Value>),
    Max(Option<Value>),
    Distinct(FxHashSet<Value>),
}

impl AggAcc {
    #[inline]
    pub fn update(&mut self, v: Value) {
        match self {
            AggAcc::Count(c) => *c += 1,
            AggAcc::SumInt(s) => *s = s.wrapping_add(v.as_i64().expect("integer")),
            AggAcc::SumFloat(s) => *s += v.as_f64().expect("numeric"),
            AggAcc::AvgInt(s, c) => {
                *s = s.wrapping_add(v.as_i64().expect("integer"));
                *c += 1;
            }
            AggAcc::AvgFloat(s, c) => {
                *s += v.as_f64().expect("numeric");
                *c += 1;
            }
            AggAcc::Min(m) => {
                if m.as_ref().is_none_or(|x| v.total_cmp(x).is_lt()) {
                    *m = Some(v);
                }
            }
            AggAcc::Max(m) => {
                if m.as_ref().is_none_or(|x| v.total_cmp(x).is_gt()) {
                    *m = Some(v);
                }
            }
            AggAcc::Distinct(set) => {
                set.insert(v);
            }
        }
    }

    /// Folds another partial state of the same aggregate into this one.
    pub fn merge(&mut self, other: &AggAcc) {
        match (self, other) {
            (AggAcc::Count(a), AggAcc::Count(b)) => *a += b,
            (AggAcc::SumInt(a), AggAcc::SumInt(b)) => *a = a.wrapping_add(*b),
            (AggAcc::SumFloat(a), AggAcc::SumFloat(b)) => *a += b,
            (AggAcc::AvgInt(s, c), AggAcc::AvgInt(s2, c2)) => {
                *s = s.wrapping_add(*s2);
                *c += c2;
            }
            (AggAcc::AvgFloat(s, c), AggAcc::AvgFloat(s2, c2)) => {
                *s += s2;
                *c += c2;
            }
            (AggAcc::Min(a), AggAcc::Min(Some(b))) => {
                if a.as_ref().is_none_or(|x| b.total_cmp(x).is_lt()) {
                    *a = Some(b.clone());
                }
            }
            (AggAcc::Max(a), AggAcc::Max(Some(b))) => {
                if a.as_ref().is_none_or(|x| b.total_cmp(x).is_gt()) {
                    *a = Some(b.clone());
                }
            }
            (AggAcc::Min(_), AggAcc::Min(None)) | (AggAcc::Max(_), AggAcc::Max(None)) => {}
            (AggAcc::Distinct(a), AggAcc::Distinct(b)) => a.extend(b.iter().cloned()),
            (a, b) => panic!("merging mismatched aggregate states {a:?} and {b:?}"),
        }
    }

    pub fn finish(&self) -> Value {
        match self {
            AggAcc::Count(c) => Value::Int(*c),
            AggAcc::SumInt(s) => Value::Int(*s),
            AggAcc::SumFloat(s) => Value::Float(*s),
            AggAcc::AvgInt(s, c) => Value::Float(*s as f64 / *c as f64),
            AggAcc::AvgFloat(s, c) => Value::Float(*s / *c as f64),
            AggAcc::Min(m) | AggAcc::Max(m) => m.clone().expect("aggregate over an empty group"),
            AggAcc::Distinct(set) => Value::Int(set.len() as i64),
        }
    }

    pub fn bytes(&self) -> usize {
        match self {
            AggAcc::Distinct(s) => 32 + s.len() * 24,
            _ => 24,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn merge_matches_single_pass() {
        let vals = [3.0, 1.0, 4.0, 1.5, 9.0];
        for init in [
            AggAcc::SumFloat(0.0),
            AggAcc::AvgFloat(0.0, 0),
            AggAcc::Min(None),
            AggAcc::Max(None),
            AggAcc::Count(0),
        ] {
            let mut whole = init.clone();
            vals.iter().for_each(|&v| whole.update(Value::Float(v)));
            let (mut a, mut b) = (init.clone(), init.clone());
            vals[..2].iter().for_each(|&v| a.update(Value::Float(v)));
            vals[2..].iter().for_each(|&v| b.update(Value::Float(v)));
            a.merge(&b);
            assert_eq!(a.finish(), whole.finish());
        }
    }

    #[test]
    fn avg_of_ints() {
        let mut a = AggAcc::AvgInt(0, 0);
        [1, 2].into_iter().for_each(|v| a.update(Value::Int(v)));
        assert_eq!(a.finish(), Value::Float(1.5));
    }
}
