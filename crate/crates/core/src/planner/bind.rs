//! Name resolution and typing: parsed SQL to logical plans.

use std::fmt;
use std::sync::Arc;

use super::ast::*;
use super::parser::{parse, parse_expr};
use crate::error::{Error, Result};
use crate::expr::{BinOp, Expr, Func};
use crate::operators::{AggFunc, AggSpec, GroupSpec, OutputColumn};
use crate::relstore::{parse_date, Catalog, DataType, Field, Relation, Schema, Value};

/// Supplies relations to the binder.
pub trait Resolver {
    fn relation(&self, name: &str) -> Result<Arc<Relation>>;
    /// Relation whose rows a lineage table function returns.
    fn lineage_relation(&self, call: &LineageCall) -> Result<Arc<Relation>>;
}

impl Resolver for Catalog {
    fn relation(&self, name: &str) -> Result<Arc<Relation>> {
        self.get(name).cloned()
    }

    fn lineage_relation(&self, call: &LineageCall) -> Result<Arc<Relation>> {
        Err(Error::UnknownHandle(call.handle.clone()))
    }
}

/// One FROM entry.
#[derive(Clone, Debug)]
pub struct BoundFrom {
    pub alias: String,
    pub relation: Arc<Relation>,
    /// Set when the rows come from a lineage table function.
    pub lineage: Option<LineageCall>,
}

/// A select-project-join-aggregate block. `filters` and `group` read the
/// FROM slots; `having` and `project` read the group-by output (slot 0) when
/// `group` is set, the FROM slots otherwise.
#[derive(Clone, Debug)]
pub struct Block {
    pub froms: Vec<BoundFrom>,
    pub filters: Vec<Expr>,
    pub group: Option<GroupSpec>,
    pub having: Option<Expr>,
    pub project: Vec<OutputColumn>,
}

impl Block {
    pub fn from_relations(&self) -> Vec<&Relation> {
        self.froms.iter().map(|f| f.relation.as_ref()).collect()
    }

    /// Empty relation with the group-by output schema.
    pub fn group_relation(&self) -> Result<Option<Relation>> {
        let Some(g) = &self.group else { return Ok(None) };
        let rels = self.from_relations();
        Ok(Some(Relation::empty("groupby", g.schema(&rels)?)))
    }

    pub fn output_schema(&self) -> Result<Schema> {
        let gr = self.group_relation()?;
        let rels: Vec<&Relation> = match &gr {
            Some(r) => vec![r],
            None => self.from_relations(),
        };
        Schema::new(
            self.project
                .iter()
                .map(|(n, e)| Ok(Field::new(n.clone(), e.dtype(&rels)?)))
                .collect::<Result<_>>()?,
        )
    }
}

#[derive(Clone, Debug)]
pub enum LogicalPlan {
    Block(Box<Block>),
    SetOp {
        kind: SetOpKind,
        all: bool,
        left: Box<LogicalPlan>,
        right: Box<LogicalPlan>,
    },
}

impl LogicalPlan {
    pub fn output_schema(&self) -> Result<Schema> {
        match self {
            LogicalPlan::Block(b) => b.output_schema(),
            LogicalPlan::SetOp { left, .. } => left.output_schema(),
        }
    }

    pub fn as_block(&self) -> Option<&Block> {
        match self {
            LogicalPlan::Block(b) => Some(b),
            LogicalPlan::SetOp { .. } => None,
        }
    }

    /// Base relations scanned anywhere in the plan, in first-use order.
    pub fn base_relations(&self) -> Vec<String> {
        let mut out = Vec::new();
        self.collect_bases(&mut out);
        out
    }

    fn collect_bases(&self, out: &mut Vec<String>) {
        match self {
            LogicalPlan::Block(b) => {
                for f in &b.froms {
                    let name = f.relation.name().to_string();
                    if f.lineage.is_none() && !out.contains(&name) {
                        out.push(name);
                    }
                }
            }
            LogicalPlan::SetOp { left, right, .. } => {
                left.collect_bases(out);
                right.collect_bases(out);
            }
        }
    }

    fn fmt_tree(&self, f: &mut fmt::Formatter<'_>, depth: usize) -> fmt::Result {
        let pad = "  ".repeat(depth);
        match self {
            LogicalPlan::SetOp {
                kind,
                all,
                left,
                right,
            } => {
                writeln!(f, "{pad}SetOp({}{})", kind.keyword(), if *all { " ALL" } else { "" })?;
                left.fmt_tree(f, depth + 1)?;
                right.fmt_tree(f, depth + 1)
            }
            LogicalPlan::Block(b) => {
                let mut d = depth;
                let names: Vec<&str> = b.project.iter().map(|(n, _)| n.as_str()).collect();
                writeln!(f, "{}Project({})", "  ".repeat(d), names.join(", "))?;
                d += 1;
                if let Some(h) = &b.having {
                    writeln!(f, "{}Having({h})", "  ".repeat(d))?;
                    d += 1;
                }
                if let Some(g) = &b.group {
                    let keys: Vec<&str> = g.keys.iter().map(|(n, _)| n.as_str()).collect();
                    let aggs: Vec<&str> = g.aggs.iter().map(|(n, _)| n.as_str()).collect();
                    writeln!(f, "{}GroupBy([{}], [{}])", "  ".repeat(d), keys.join(", "), aggs.join(", "))?;
                    d += 1;
                }
                let (join_preds, local): (Vec<&Expr>, Vec<&Expr>) =
                    b.filters.iter().partition(|e| e.slots().len() > 1);
                if !join_preds.is_empty() {
                    let text: Vec<String> = join_preds.iter().map(|e| e.to_string()).collect();
                    writeln!(f, "{}Join({})", "  ".repeat(d), text.join(" AND "))?;
                    d += 1;
                } else if b.froms.len() > 1 {
                    writeln!(f, "{}Cross", "  ".repeat(d))?;
                    d += 1;
                }
                for (s, from) in b.froms.iter().enumerate() {
                    let mut dd = d;
                    let preds: Vec<String> = local
                        .iter()
                        .filter(|e| e.slots().iter().all(|&x| x == s))
                        .map(|e| e.to_string())
                        .collect();
                    if !preds.is_empty() {
                        writeln!(f, "{}Select({})", "  ".repeat(dd), preds.join(" AND "))?;
                        dd += 1;
                    }
                    match &from.lineage {
                        None => writeln!(f, "{}Scan({})", "  ".repeat(dd), from.relation.name())?,
                        Some(c) => writeln!(f, "{}{}", "  ".repeat(dd), describe_call(c))?,
                    }
                }
                Ok(())
            }
        }
    }
}

/// Logical operator tree, one node per line.
impl fmt::Display for LogicalPlan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_tree(f, 0)
    }
}

pub fn describe_call(c: &LineageCall) -> String {
    let rids = describe_rids(&c.rids);
    match (&c.base, c.forward) {
        (Some(b), false) => format!("backward({}, {rids}, {b})", c.handle),
        (Some(b), true) => format!("forward({}, {rids}, {b})", c.handle),
        (None, _) => format!("forward({}, {rids})", c.handle),
    }
}

fn describe_rids(r: &RidSetAst) -> String {
    match r {
        RidSetAst::All => "*".into(),
        RidSetAst::List(v) => {
            let items: Vec<String> = v.iter().map(|r| r.to_string()).collect();
            format!("[{}]", items.join(", "))
        }
        RidSetAst::Call(c) => describe_call(c),
    }
}

pub fn bind_sql(text: &str, r: &dyn Resolver) -> Result<LogicalPlan> {
    bind(&parse(text)?, r)
}

pub fn bind(q: &QueryAst, r: &dyn Resolver) -> Result<LogicalPlan> {
    match q {
        QueryAst::Select(s) => Ok(LogicalPlan::Block(Box::new(bind_select(s, r)?))),
        QueryAst::SetOp {
            kind,
            all,
            left,
            right,
        } => {
            let left = bind(left, r)?;
            let right = bind(right, r)?;
            let (ls, rs) = (left.output_schema()?, right.output_schema()?);
            let lt: Vec<DataType> = ls.fields().iter().map(|f| f.dtype).collect();
            let rt: Vec<DataType> = rs.fields().iter().map(|f| f.dtype).collect();
            if lt != rt {
                return Err(Error::Type(format!(
                    "{} inputs have column types {lt:?} and {rt:?}",
                    kind.keyword()
                )));
            }
            Ok(LogicalPlan::SetOp {
                kind: *kind,
                all: *all,
                left: Box::new(left),
                right: Box::new(right),
            })
        }
    }
}

/// Binds a scalar expression over the columns of `rel` (slot 0).
pub fn bind_scalar(text: &str, rel: &Relation) -> Result<Expr> {
    let e = parse_expr(text)?;
    let froms = single_from(rel);
    let mut b = Binder::new(&froms);
    let out = b.bind(&e, false)?;
    out.dtype(&[rel])?;
    Ok(out.fold_constants())
}

/// Binds one aggregate call over `rel`; returns its printed name and spec.
pub fn bind_aggregate(text: &str, rel: &Relation) -> Result<(String, AggSpec)> {
    let e = parse_expr(text)?;
    let froms = single_from(rel);
    let b = Binder::new(&froms);
    match &e {
        AExpr::Call { .. } if e.contains_aggregate() => {
            let spec = b.aggregate(&e)?;
            Ok((spec.to_string(), spec))
        }
        _ => Err(Error::Bind(format!("{text} is not an aggregate call"))),
    }
}

fn single_from(rel: &Relation) -> Vec<BoundFrom> {
    vec![BoundFrom {
        alias: rel.name().to_string(),
        relation: Arc::new(Relation::empty(rel.name(), rel.schema().clone())),
        lineage: None,
    }]
}

fn bind_select(s: &SelectAst, r: &dyn Resolver) -> Result<Block> {
    let mut froms: Vec<BoundFrom> = Vec::new();
    for item in &s.from {
        let (relation, alias, lineage) = match item {
            FromItem::Table { name, alias, .. } => (
                r.relation(name)?,
                alias.clone().unwrap_or_else(|| name.clone()),
                None,
            ),
            FromItem::Lineage { call, alias } => {
                let rel = r.lineage_relation(call)?;
                let alias = alias.clone().unwrap_or_else(|| rel.name().to_string());
                (rel, alias, Some(call.clone()))
            }
        };
        if froms.iter().any(|f| f.alias == alias) {
            return Err(Error::Bind(format!("FROM name {alias} is used twice; add an alias")));
        }
        froms.push(BoundFrom {
            alias,
            relation,
            lineage,
        });
    }

    let mut binder = Binder::new(&froms);
    let mut filters = Vec::new();
    for c in &s.conditions {
        if c.contains_aggregate() {
            return Err(Error::Bind("aggregates are not allowed in WHERE or ON".into()));
        }
        let e = binder.bind(c, false)?.fold_constants();
        binder.expect_bool(&e, false, "WHERE")?;
        filters.extend(e.conjuncts().into_iter().filter(|e| *e != Expr::Lit(Value::Bool(true))));
    }

    let aggregated = !s.group_by.is_empty()
        || s.having.is_some()
        || s.items.iter().any(|i| match i {
            SelectItem::Expr { expr, .. } => expr.contains_aggregate(),
            SelectItem::Wildcard(_) => false,
        });

    // Select items as (name hint, expression).
    let mut items: Vec<(Option<String>, AExpr)> = Vec::new();
    for item in &s.items {
        match item {
            SelectItem::Expr { expr, alias } => items.push((alias.clone(), expr.clone())),
            SelectItem::Wildcard(q) => {
                if aggregated {
                    return Err(Error::Bind("* cannot be combined with aggregation".into()));
                }
                let mut any = false;
                for f in &froms {
                    if q.as_ref().is_some_and(|q| q != &f.alias) {
                        continue;
                    }
                    any = true;
                    for field in f.relation.schema().fields() {
                        items.push((
                            None,
                            AExpr::Col {
                                qual: Some(f.alias.clone()),
                                name: field.name.clone(),
                                pos: 0,
                            },
                        ));
                    }
                }
                if !any {
                    return Err(Error::Bind(format!("unknown FROM name {}", q.as_deref().unwrap_or("*"))));
                }
            }
        }
    }

    if !aggregated && !s.distinct {
        let mut project = Vec::new();
        for (alias, e) in &items {
            let b = binder.bind(e, false)?.fold_constants();
            binder.dtype(&b, false)?;
            project.push((alias.clone().unwrap_or_else(|| b.to_string()), b));
        }
        return Ok(Block {
            froms: froms.clone(),
            filters,
            group: None,
            having: None,
            project: unique_names(project),
        });
    }

    if !aggregated {
        // DISTINCT: group by every projected expression.
        let mut keys = Vec::new();
        let mut names = Vec::new();
        for (alias, e) in &items {
            let b = binder.bind(e, false)?.fold_constants();
            binder.dtype(&b, false)?;
            names.push(alias.clone().unwrap_or_else(|| b.to_string()));
            keys.push((b.to_string(), b));
        }
        let keys = unique_names(keys);
        let project = names
            .into_iter()
            .zip(&keys)
            .enumerate()
            .map(|(i, (n, (kn, _)))| (n, Expr::col(0, i, kn)))
            .collect();
        return Ok(Block {
            froms: froms.clone(),
            filters,
            group: Some(GroupSpec { keys, aggs: Vec::new() }),
            having: None,
            project: unique_names(project),
        });
    }

    for g in &s.group_by {
        if g.contains_aggregate() {
            return Err(Error::Bind("aggregates are not allowed in GROUP BY".into()));
        }
        let resolved = match g {
            AExpr::Col { qual: None, name, .. } if binder.resolve(None, name).is_err() => items
                .iter()
                .find(|(a, _)| a.as_deref() == Some(name.as_str()))
                .map(|(_, e)| e.clone())
                .unwrap_or_else(|| g.clone()),
            _ => g.clone(),
        };
        let b = binder.bind(&resolved, false)?.fold_constants();
        binder.dtype(&b, false)?;
        if !binder.keys.iter().any(|(_, k)| *k == b) {
            binder.keys.push((b.to_string(), b));
        }
    }
    binder.keys = unique_names(std::mem::take(&mut binder.keys));

    let mut project = Vec::new();
    for (alias, e) in &items {
        let b = binder.bind(e, true)?.fold_constants();
        binder.dtype(&b, true)?;
        project.push((alias.clone().unwrap_or_else(|| b.to_string()), b));
    }
    let having = match &s.having {
        Some(h) => {
            let b = binder.bind(h, true)?.fold_constants();
            binder.expect_bool(&b, true, "HAVING")?;
            Some(b)
        }
        None => None,
    };
    let keys = std::mem::take(&mut binder.keys);
    let aggs = std::mem::take(&mut binder.aggs);
    if keys.is_empty() && aggs.is_empty() {
        return Err(Error::Bind("group-by output has no columns".into()));
    }
    Ok(Block {
        froms: froms.clone(),
        filters,
        group: Some(GroupSpec { keys, aggs }),
        having,
        project: unique_names(project),
    })
}

/// Suffixes repeated names with `_2`, `_3`, ...
fn unique_names<T>(cols: Vec<(String, T)>) -> Vec<(String, T)> {
    let mut seen: Vec<String> = Vec::new();
    cols.into_iter()
        .map(|(n, e)| {
            let mut name = n.clone();
            let mut k = 2;
            while seen.contains(&name) {
                name = format!("{n}_{k}");
                k += 1;
            }
            seen.push(name.clone());
            (name, e)
        })
        .collect()
}

struct Binder<'a> {
    froms: &'a [BoundFrom],
    keys: Vec<(String, Expr)>,
    aggs: Vec<(String, AggSpec)>,
}

impl<'a> Binder<'a> {
    fn new(froms: &'a [BoundFrom]) -> Self {
        Binder {
            froms,
            keys: Vec::new(),
            aggs: Vec::new(),
        }
    }

    fn from_rels(&self) -> Vec<&Relation> {
        self.froms.iter().map(|f| f.relation.as_ref()).collect()
    }

    fn group_rel(&self) -> Result<Relation> {
        let rels = self.from_rels();
        let spec = GroupSpec {
            keys: self.keys.clone(),
            aggs: self.aggs.clone(),
        };
        Ok(Relation::empty("groupby", spec.schema(&rels)?))
    }

    fn dtype(&self, e: &Expr, grouped: bool) -> Result<DataType> {
        if grouped {
            let g = self.group_rel()?;
            e.dtype(&[&g])
        } else {
            e.dtype(&self.from_rels())
        }
    }

    fn expect_bool(&self, e: &Expr, grouped: bool, ctx: &str) -> Result<()> {
        match self.dtype(e, grouped)? {
            DataType::Bool => Ok(()),
            t => Err(Error::Type(format!("{ctx} condition {e} has type {t}"))),
        }
    }

    fn resolve(&self, qual: Option<&str>, name: &str) -> Result<Expr> {
        let mut hit: Option<Expr> = None;
        for (s, f) in self.froms.iter().enumerate() {
            if qual.is_some_and(|q| q != f.alias) {
                continue;
            }
            let found = if name.eq_ignore_ascii_case("__rid") {
                Some(Expr::Rid { slot: s })
            } else {
                f.relation.schema().index_of(name).map(|c| Expr::col(s, c, name))
            };
            if let Some(e) = found {
                if hit.is_some() {
                    return Err(Error::Bind(format!("column {name} is ambiguous")));
                }
                hit = Some(e);
            }
        }
        if let Some(q) = qual {
            if !self.froms.iter().any(|f| f.alias == q) {
                return Err(Error::Bind(format!("unknown FROM name {q}")));
            }
        }
        hit.ok_or_else(|| {
            Error::Bind(match qual {
                Some(q) => format!("{q} has no column {name}"),
                None => format!("unknown column {name}"),
            })
        })
    }

    /// Binds an aggregate call over the FROM slots.
    fn aggregate(&self, e: &AExpr) -> Result<AggSpec> {
        let AExpr::Call {
            name,
            args,
            distinct,
            star,
            ..
        } = e
        else {
            unreachable!("caller checks for a call")
        };
        let lower = name.to_ascii_lowercase();
        if *star {
            return if lower == "count" {
                Ok(AggSpec::count_star())
            } else {
                Err(Error::Bind(format!("{name}(*) is not an aggregate")))
            };
        }
        if args.len() != 1 {
            return Err(Error::Bind(format!("{name} takes one argument")));
        }
        if args[0].contains_aggregate() {
            return Err(Error::Bind("aggregates cannot be nested".into()));
        }
        let func = match (lower.as_str(), *distinct) {
            ("count", true) => AggFunc::CountDistinct,
            ("count", false) => AggFunc::Count,
            ("sum", false) => AggFunc::Sum,
            ("min", _) => AggFunc::Min,
            ("max", _) => AggFunc::Max,
            ("avg", false) => AggFunc::Avg,
            ("median", _) => return Err(Error::Unsupported("median is not supported".into())),
            (_, true) => return Err(Error::Unsupported(format!("{name}(DISTINCT ..)"))),
            _ => return Err(Error::Bind(format!("unknown aggregate {name}"))),
        };
        let mut inner = Binder::new(self.froms);
        let arg = inner.bind(&args[0], false)?.fold_constants();
        AggSpec::new(func, arg, &self.from_rels())
    }

    fn bind(&mut self, e: &AExpr, grouped: bool) -> Result<Expr> {
        if grouped {
            if let AExpr::Call { .. } = e {
                if e.contains_aggregate() && super::ast::is_aggregate_name(call_name(e)) {
                    let spec = self.aggregate(e)?;
                    let j = match self.aggs.iter().position(|(_, a)| *a == spec) {
                        Some(j) => j,
                        None => {
                            let mut name = spec.to_string();
                            let mut k = 2;
                            while self.keys.iter().map(|(n, _)| n).chain(self.aggs.iter().map(|(n, _)| n)).any(|n| *n == name) {
                                name = format!("{spec}_{k}");
                                k += 1;
                            }
                            self.aggs.push((name, spec));
                            self.aggs.len() - 1
                        }
                    };
                    let n = self.keys.len() + j;
                    return Ok(Expr::col(0, n, &self.aggs[j].0));
                }
            }
            if !e.contains_aggregate() {
                match Binder::new(self.froms).bind(e, false) {
                    Ok(b) => {
                        let b = b.fold_constants();
                        if let Some(k) = self.keys.iter().position(|(_, k)| *k == b) {
                            return Ok(Expr::col(0, k, &self.keys[k].0));
                        }
                        if b.is_constant() {
                            return Ok(b);
                        }
                    }
                    Err(err) if matches!(e, AExpr::Col { .. }) => return Err(err),
                    Err(_) => {}
                }
                if let AExpr::Col { name, .. } = e {
                    return Err(Error::Bind(format!(
                        "column {name} must appear in GROUP BY or inside an aggregate"
                    )));
                }
            }
        }
        Ok(match e {
            AExpr::Col { qual, name, .. } => {
                debug_assert!(!grouped);
                self.resolve(qual.as_deref(), name)?
            }
            AExpr::Lit(v) => Expr::Lit(v.clone()),
            AExpr::Neg(x) => Expr::Neg(Box::new(self.bind(x, grouped)?)),
            AExpr::Not(x) => Expr::Not(Box::new(self.bind(x, grouped)?)),
            AExpr::Extract(f, x) => Expr::Func(*f, Box::new(self.bind(x, grouped)?)),
            AExpr::Bin(op, a, b) => {
                let a = self.bind(a, grouped)?;
                let b = self.bind(b, grouped)?;
                if op.is_comparison() {
                    let (a, b) = self.cast_pair(a, b, grouped)?;
                    Expr::binary(*op, a, b)
                } else {
                    Expr::binary(*op, a, b)
                }
            }
            AExpr::Between {
                expr,
                lo,
                hi,
                negated,
            } => {
                let x = self.bind(expr, grouped)?;
                let lo = self.bind(lo, grouped)?;
                let hi = self.bind(hi, grouped)?;
                let (x1, lo) = self.cast_pair(x.clone(), lo, grouped)?;
                let (x2, hi) = self.cast_pair(x, hi, grouped)?;
                let e = Expr::and(
                    Expr::binary(BinOp::Ge, x1, lo),
                    Expr::binary(BinOp::Le, x2, hi),
                );
                if *negated {
                    Expr::Not(Box::new(e))
                } else {
                    e
                }
            }
            AExpr::InList {
                expr,
                list,
                negated,
            } => {
                let x = self.bind(expr, grouped)?;
                let xt = self.dtype(&x, grouped)?;
                let mut values = Vec::with_capacity(list.len());
                let mut others = Vec::new();
                for item in list {
                    let v = self.bind(item, grouped)?.fold_constants();
                    match v {
                        Expr::Lit(lit) => values.push(cast_literal(lit, xt)?),
                        other => others.push(other),
                    }
                }
                let mut e = Expr::InList {
                    expr: Box::new(x.clone()),
                    list: values,
                    negated: false,
                };
                for o in others {
                    e = Expr::binary(BinOp::Or, e, Expr::eq(x.clone(), o));
                }
                if *negated {
                    if let Expr::InList { expr, list, .. } = e {
                        Expr::InList {
                            expr,
                            list,
                            negated: true,
                        }
                    } else {
                        Expr::Not(Box::new(e))
                    }
                } else {
                    e
                }
            }
            AExpr::Case {
                operand,
                branches,
                otherwise,
            } => {
                let operand = operand.as_ref().map(|o| self.bind(o, grouped)).transpose()?;
                let mut bound = Vec::with_capacity(branches.len());
                for (w, t) in branches {
                    let w = self.bind(w, grouped)?;
                    let w = match &operand {
                        Some(o) => {
                            let (o, w) = self.cast_pair(o.clone(), w, grouped)?;
                            Expr::eq(o, w)
                        }
                        None => w,
                    };
                    bound.push((w, self.bind(t, grouped)?));
                }
                let otherwise = match otherwise {
                    Some(o) => self.bind(o, grouped)?,
                    None => {
                        return Err(Error::Unsupported("CASE without ELSE yields NULL".into()))
                    }
                };
                Expr::Case {
                    branches: bound,
                    otherwise: Box::new(otherwise),
                }
            }
            AExpr::Call { name, args, .. } => {
                if super::ast::is_aggregate_name(name) {
                    return Err(Error::Bind(format!("aggregate {name} is not allowed here")));
                }
                let func = match name.to_ascii_lowercase().as_str() {
                    "sqrt" => Func::Sqrt,
                    "abs" => Func::Abs,
                    "year" => Func::Year,
                    "month" => Func::Month,
                    _ => return Err(Error::Bind(format!("unknown function {name}"))),
                };
                if args.len() != 1 {
                    return Err(Error::Bind(format!("{name} takes one argument")));
                }
                Expr::Func(func, Box::new(self.bind(&args[0], grouped)?))
            }
        })
    }

    /// Casts a text literal compared with a date to a date.
    fn cast_pair(&self, a: Expr, b: Expr, grouped: bool) -> Result<(Expr, Expr)> {
        let (ta, tb) = (self.dtype(&a, grouped)?, self.dtype(&b, grouped)?);
        Ok(match (&a, &b) {
            (_, Expr::Lit(v)) if ta == DataType::Date && tb == DataType::Text => {
                let v = cast_literal(v.clone(), DataType::Date)?;
                (a, Expr::Lit(v))
            }
            (Expr::Lit(v), _) if tb == DataType::Date && ta == DataType::Text => {
                (Expr::Lit(cast_literal(v.clone(), DataType::Date)?), b)
            }
            _ => (a, b),
        })
    }
}

fn call_name(e: &AExpr) -> &str {
    match e {
        AExpr::Call { name, .. } => name,
        _ => "",
    }
}

fn cast_literal(v: Value, to: DataType) -> Result<Value> {
    match (&v, to) {
        (Value::Text(s), DataType::Date) => parse_date(s)
            .map(Value::Date)
            .ok_or_else(|| Error::Type(format!("'{s}' is not a date"))),
        _ => Ok(v),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::relstore::{Column, Schema};

    fn catalog() -> Catalog {
        let mut c = Catalog::new();
        let t = Schema::of(&[
            ("a", DataType::Int64),
            ("b", DataType::Text),
            ("d", DataType::Date),
            ("x", DataType::Float64),
        ])
        .unwrap();
        c.add(
            Relation::new(
                "t",
                t,
                vec![
                    Column::Int64(vec![1]),
                    Column::Text(vec!["q".into()]),
                    Column::Date(vec![0]),
                    Column::Float64(vec![1.0]),
                ],
            )
            .unwrap(),
        );
        let u = Schema::of(&[("a", DataType::Int64), ("c", DataType::Int64)]).unwrap();
        c.add(Relation::new("u", u, vec![Column::Int64(vec![1]), Column::Int64(vec![2])]).unwrap());
        c
    }

    fn block(sql: &str) -> Block {
        match bind_sql(sql, &catalog()).unwrap() {
            LogicalPlan::Block(b) => *b,
            _ => panic!(),
        }
    }

    #[test]
    fn aggregates_are_extracted_and_shared() {
        let b = block("SELECT b, sum(x) AS s, sum(x) / count(*) FROM t WHERE d < '1998-12-01' GROUP BY b");
        let g = b.group.as_ref().unwrap();
        assert_eq!(g.keys.len(), 1);
        assert_eq!(g.aggs.len(), 2);
        assert_eq!(b.project[1].0, "s");
        assert_eq!(b.project[2].0, "sum(x) / count(*)");
        assert!(matches!(&b.filters[0], Expr::Binary(BinOp::Lt, _, l) if matches!(**l, Expr::Lit(Value::Date(_)))));
    }

    #[test]
    fn columns_outside_group_by_are_rejected() {
        let e = bind_sql("SELECT a, count(*) FROM t GROUP BY b", &catalog()).unwrap_err();
        assert!(matches!(e, Error::Bind(_)), "{e}");
    }

    #[test]
    fn unknown_names_and_ambiguity() {
        assert!(matches!(bind_sql("SELECT zz FROM t", &catalog()), Err(Error::Bind(_))));
        assert!(matches!(bind_sql("SELECT a FROM t, u", &catalog()), Err(Error::Bind(_))));
        assert!(matches!(bind_sql("SELECT a FROM nope", &catalog()), Err(Error::UnknownRelation(_))));
        assert!(matches!(bind_sql("SELECT a + b FROM t", &catalog()), Err(Error::Type(_))));
    }

    #[test]
    fn join_conditions_become_filters() {
        let b = block("SELECT t.a, c FROM t JOIN u ON t.a = u.a WHERE c > 1");
        assert_eq!(b.filters.len(), 2);
        assert_eq!(b.filters[0].slots(), vec![0, 1]);
        assert_eq!(b.project[0].0, "a");
    }

    #[test]
    fn distinct_groups_by_projection() {
        let b = block("SELECT DISTINCT b FROM t");
        assert_eq!(b.group.unwrap().keys.len(), 1);
    }

    #[test]
    fn tree_shape() {
        let p = bind_sql("SELECT b, count(*) FROM t WHERE a > 0 GROUP BY b", &catalog()).unwrap();
        let text = p.to_string();
        let lines: Vec<&str> = text.lines().map(str::trim).collect();
        assert!(lines[1].starts_with("GroupBy"));
        assert!(lines[2].starts_with("Select"));
        assert_eq!(lines[3], "Scan(t)");
        let p = bind_sql("SELECT * FROM t", &catalog()).unwrap();
        let text = p.to_string();
        assert!(text.starts_with("Project(a, b, d, x)\n  Scan(t)"));
    }

    #[test]
    fn having_with_count_distinct() {
        let b = block("SELECT a FROM t GROUP BY a HAVING count(DISTINCT b) > 1");
        assert!(b.having.is_some());
        assert_eq!(b.group.unwrap().aggs[0].1.func, AggFunc::CountDistinct);
    }

    #[test]
    fn scalar_and_aggregate_helpers() {
        let c = catalog();
        let t = c.get("t").unwrap();
        let e = bind_scalar("extract(year from d) = 1970", t).unwrap();
        assert!(e.eval_bool(&[0], &[t]));
        let (name, spec) = bind_aggregate("SUM(x * 2)", t).unwrap();
        assert_eq!(name, "sum(x * 2)");
        assert_eq!(spec.func, AggFunc::Sum);
        assert!(matches!(bind_aggregate("median(x)", t), Err(Error::Unsupported(_))));
    }

    #[test]
    fn set_op_type_check() {
        assert!(bind_sql("SELECT a FROM t UNION SELECT c FROM u", &catalog()).is_ok());
        assert!(matches!(bind_sql("SELECT b FROM t UNION SELECT c FROM u", &catalog()), Err(Error::Type(_))));
    }
}
