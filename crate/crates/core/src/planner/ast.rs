//! Parsed, unbound SQL.

use crate::expr::{BinOp, Func};
use crate::relstore::Value;

#[derive(Clone, Debug, PartialEq)]
pub enum AExpr {
    Col {
        qual: Option<String>,
        name: String,
        pos: usize,
    },
    Lit(Value),
    Neg(Box<AExpr>),
    Not(Box<AExpr>),
    Bin(BinOp, Box<AExpr>, Box<AExpr>),
    InList {
        expr: Box<AExpr>,
        list: Vec<AExpr>,
        negated: bool,
    },
    Between {
        expr: Box<AExpr>,
        lo: Box<AExpr>,
        hi: Box<AExpr>,
        negated: bool,
    },
    Case {
        operand: Option<Box<AExpr>>,
        branches: Vec<(AExpr, AExpr)>,
        otherwise: Option<Box<AExpr>>,
    },
    Call {
        name: String,
        args: Vec<AExpr>,
        distinct: bool,
        star: bool,
        pos: usize,
    },
    Extract(Func, Box<AExpr>),
}

impl AExpr {
    pub fn contains_aggregate(&self) -> bool {
        match self {
            AExpr::Call { name, .. } if is_aggregate_name(name) => true,
            AExpr::Col { .. } | AExpr::Lit(_) => false,
            AExpr::Neg(e) | AExpr::Not(e) | AExpr::Extract(_, e) => e.contains_aggregate(),
            AExpr::Bin(_, a, b) => a.contains_aggregate() || b.contains_aggregate(),
            AExpr::InList { expr, list, .. } => {
                expr.contains_aggregate() || list.iter().any(AExpr::contains_aggregate)
            }
            AExpr::Between { expr, lo, hi, .. } => {
                expr.contains_aggregate() || lo.contains_aggregate() || hi.contains_aggregate()
            }
            AExpr::Case {
                operand,
                branches,
                otherwise,
            } => {
                operand.as_ref().is_some_and(|e| e.contains_aggregate())
                    || branches
                        .iter()
                        .any(|(w, t)| w.contains_aggregate() || t.contains_aggregate())
                    || otherwise.as_ref().is_some_and(|e| e.contains_aggregate())
            }
            AExpr::Call { args, .. } => args.iter().any(AExpr::contains_aggregate),
        }
    }
}

pub fn is_aggregate_name(name: &str) -> bool {
    matches!(
        name.to_ascii_lowercase().as_str(),
        "count" | "sum" | "min" | "max" | "avg" | "median"
    )
}

#[derive(Clone, Debug, PartialEq)]
pub enum SelectItem {
    /// `*` or `t.*`.
    Wildcard(Option<String>),
    Expr { expr: AExpr, alias: Option<String> },
}

/// Rids named by a lineage table function argument.
#[derive(Clone, Debug, PartialEq)]
pub enum RidSetAst {
    List(Vec<u32>),
    /// Every rid of the relation.
    All,
    Call(Box<LineageCall>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct LineageCall {
    pub forward: bool,
    pub handle: String,
    pub rids: RidSetAst,
    pub base: Option<String>,
    pub pos: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub enum FromItem {
    Table {
        name: String,
        alias: Option<String>,
        pos: usize,
    },
    Lineage {
        call: LineageCall,
        alias: Option<String>,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct SelectAst {
    pub distinct: bool,
    pub items: Vec<SelectItem>,
    pub from: Vec<FromItem>,
    /// `ON` conditions and the `WHERE` clause, as written.
    pub conditions: Vec<AExpr>,
    pub group_by: Vec<AExpr>,
    pub having: Option<AExpr>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SetOpKind {
    Union,
    Intersect,
    Except,
}

impl SetOpKind {
    pub fn keyword(self) -> &'static str {
        match self {
            SetOpKind::Union => "UNION",
            SetOpKind::Intersect => "INTERSECT",
            SetOpKind::Except => "EXCEPT",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum QueryAst {
    Select(Box<SelectAst>),
    SetOp {
        kind: SetOpKind,
        all: bool,
        left: Box<QueryAst>,
        right: Box<QueryAst>,
    },
}
