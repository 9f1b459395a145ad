//! Recursive-descent parser for the SQL subset.

use super::ast::*;
use super::lexer::{syntax, tokenize, Tok, Token};
use crate::error::{Error, Result};
use crate::expr::{BinOp, Func};
use crate::relstore::{parse_date, Value};

const RESERVED: &[&str] = &[
    "select", "from", "where", "group", "by", "having", "union", "intersect", "except", "all",
    "distinct", "and", "or", "not", "in", "between", "case", "when", "then", "else", "end", "as",
    "on", "join", "inner", "cross", "left", "right", "full", "outer", "order", "limit", "is",
    "null", "like",
];

pub fn parse(src: &str) -> Result<QueryAst> {
    let mut p = Parser {
        toks: tokenize(src)?,
        i: 0,
    };
    let q = p.query()?;
    p.eat_sym(";");
    p.check_unsupported_tail()?;
    if p.peek() != &Tok::Eof {
        return Err(p.error("unexpected text after the query"));
    }
    Ok(q)
}

/// Parses a standalone scalar expression.
pub fn parse_expr(src: &str) -> Result<AExpr> {
    let mut p = Parser {
        toks: tokenize(src)?,
        i: 0,
    };
    let e = p.expr()?;
    if p.peek() != &Tok::Eof {
        return Err(p.error("unexpected text after the expression"));
    }
    Ok(e)
}

struct Parser {
    toks: Vec<Token>,
    i: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.i].tok
    }

    fn peek_at(&self, k: usize) -> &Tok {
        &self.toks[(self.i + k).min(self.toks.len() - 1)].tok
    }

    fn pos(&self) -> usize {
        self.toks[self.i].pos
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.i].tok.clone();
        if self.i + 1 < self.toks.len() {
            self.i += 1;
        }
        t
    }

    fn error(&self, msg: &str) -> Error {
        let found = match self.peek() {
            Tok::Eof => "end of input".to_string(),
            Tok::Ident(s) | Tok::Quoted(s) => format!("'{s}'"),
            Tok::Int(i) => i.to_string(),
            Tok::Float(f) => f.to_string(),
            Tok::Str(s) => format!("'{s}'"),
            Tok::Sym(s) => format!("'{s}'"),
        };
        syntax(self.pos(), format!("{msg}, found {found}"))
    }

    fn is_kw(&self, kw: &str) -> bool {
        self.is_kw_at(0, kw)
    }

    fn is_kw_at(&self, k: usize, kw: &str) -> bool {
        matches!(self.peek_at(k), Tok::Ident(s) if s.eq_ignore_ascii_case(kw))
    }

    fn eat_kw(&mut self, kw: &str) -> bool {
        if self.is_kw(kw) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect_kw(&mut self, kw: &str) -> Result<()> {
        if self.eat_kw(kw) {
            Ok(())
        } else {
            Err(self.error(&format!("expected {}", kw.to_ascii_uppercase())))
        }
    }

    fn is_sym(&self, s: &str) -> bool {
        matches!(self.peek(), Tok::Sym(x) if *x == s)
    }

    fn eat_sym(&mut self, s: &str) -> bool {
        if self.is_sym(s) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect_sym(&mut self, s: &str) -> Result<()> {
        if self.eat_sym(s) {
            Ok(())
        } else {
            Err(self.error(&format!("expected '{s}'")))
        }
    }

    fn ident(&mut self) -> Result<String> {
        match self.peek().clone() {
            Tok::Ident(s) if !is_reserved(&s) => {
                self.bump();
                Ok(s)
            }
            Tok::Quoted(s) => {
                self.bump();
                Ok(s)
            }
            _ => Err(self.error("expected an identifier")),
        }
    }

    fn check_unsupported_tail(&self) -> Result<()> {
        for kw in ["order", "limit"] {
            if self.is_kw(kw) {
                return Err(Error::Unsupported(format!(
                    "{} is not supported by hash-based execution",
                    kw.to_ascii_uppercase()
                )));
            }
        }
        Ok(())
    }

    fn query(&mut self) -> Result<QueryAst> {
        let mut left = self.query_term()?;
        loop {
            let kind = if self.eat_kw("union") {
                SetOpKind::Union
            } else if self.eat_kw("intersect") {
                SetOpKind::Intersect
            } else if self.eat_kw("except") {
                SetOpKind::Except
            } else {
                return Ok(left);
            };
            let all = self.eat_kw("all");
            if !all {
                self.eat_kw("distinct");
            }
            let right = self.query_term()?;
            left = QueryAst::SetOp {
                kind,
                all,
                left: Box::new(left),
                right: Box::new(right),
            };
        }
    }

    fn query_term(&mut self) -> Result<QueryAst> {
        if self.eat_sym("(") {
            let q = self.query()?;
            self.check_unsupported_tail()?;
            self.expect_sym(")")?;
            return Ok(q);
        }
        Ok(QueryAst::Select(Box::new(self.select()?)))
    }

    fn select(&mut self) -> Result<SelectAst> {
        self.expect_kw("select")?;
        let distinct = self.eat_kw("distinct");
        if !distinct {
            self.eat_kw("all");
        }
        let mut items = vec![self.select_item()?];
        while self.eat_sym(",") {
            items.push(self.select_item()?);
        }
        self.expect_kw("from")?;
        let mut conditions = Vec::new();
        let mut from = vec![self.from_item()?];
        loop {
            if self.eat_sym(",") {
                from.push(self.from_item()?);
            } else if self.eat_kw("cross") {
                self.expect_kw("join")?;
                from.push(self.from_item()?);
            } else if self.is_kw("join") || (self.is_kw("inner") && self.is_kw_at(1, "join")) {
                self.eat_kw("inner");
                self.bump();
                from.push(self.from_item()?);
                self.expect_kw("on")?;
                conditions.push(self.expr()?);
            } else if ["left", "right", "full", "outer"].iter().any(|k| self.is_kw(k)) {
                return Err(Error::Unsupported("outer joins are not supported".into()));
            } else {
                break;
            }
        }
        if self.eat_kw("where") {
            conditions.push(self.expr()?);
        }
        let mut group_by = Vec::new();
        if self.eat_kw("group") {
            self.expect_kw("by")?;
            group_by.push(self.expr()?);
            while self.eat_sym(",") {
                group_by.push(self.expr()?);
            }
        }
        let having = if self.eat_kw("having") {
            Some(self.expr()?)
        } else {
            None
        };
        Ok(SelectAst {
            distinct,
            items,
            from,
            conditions,
            group_by,
            having,
        })
    }

    fn select_item(&mut self) -> Result<SelectItem> {
        if self.eat_sym("*") {
            return Ok(SelectItem::Wildcard(None));
        }
        if matches!(self.peek(), Tok::Ident(_) | Tok::Quoted(_))
            && matches!(self.peek_at(1), Tok::Sym("."))
            && matches!(self.peek_at(2), Tok::Sym("*"))
        {
            let q = self.ident()?;
            self.bump();
            self.bump();
            return Ok(SelectItem::Wildcard(Some(q)));
        }
        let expr = self.expr()?;
        let alias = self.alias()?;
        Ok(SelectItem::Expr { expr, alias })
    }

    fn alias(&mut self) -> Result<Option<String>> {
        if self.eat_kw("as") {
            return self.ident().map(Some);
        }
        match self.peek() {
            Tok::Ident(s) if !is_reserved(s) => self.ident().map(Some),
            Tok::Quoted(_) => self.ident().map(Some),
            _ => Ok(None),
        }
    }

    fn from_item(&mut self) -> Result<FromItem> {
        if self.is_sym("(") {
            return Err(Error::Unsupported("subqueries in FROM are not supported".into()));
        }
        let pos = self.pos();
        let lineage = matches!(self.peek(), Tok::Ident(s) if s.eq_ignore_ascii_case("backward") || s.eq_ignore_ascii_case("forward"))
            && matches!(self.peek_at(1), Tok::Sym("("));
        if lineage {
            let call = self.lineage_call()?;
            let alias = self.alias()?;
            return Ok(FromItem::Lineage { call, alias });
        }
        let name = self.ident()?;
        let alias = self.alias()?;
        Ok(FromItem::Table { name, alias, pos })
    }

    fn lineage_call(&mut self) -> Result<LineageCall> {
        let pos = self.pos();
        let forward = match self.bump() {
            Tok::Ident(s) => s.eq_ignore_ascii_case("forward"),
            _ => unreachable!("checked by the caller"),
        };
        self.expect_sym("(")?;
        let handle = match self.bump() {
            Tok::Ident(s) | Tok::Quoted(s) | Tok::Str(s) => s,
            _ => {
                self.i -= 1;
                return Err(self.error("expected a result handle"));
            }
        };
        self.expect_sym(",")?;
        let rids = self.rid_set()?;
        let base = if self.eat_sym(",") {
            Some(match self.bump() {
                Tok::Ident(s) | Tok::Quoted(s) | Tok::Str(s) => s,
                _ => {
                    self.i -= 1;
                    return Err(self.error("expected a relation name"));
                }
            })
        } else {
            None
        };
        self.expect_sym(")")?;
        if !forward && base.is_none() {
            return Err(syntax(pos, "backward needs a base relation argument".into()));
        }
        Ok(LineageCall {
            forward,
            handle,
            rids,
            base,
            pos,
        })
    }

    fn rid_set(&mut self) -> Result<RidSetAst> {
        if self.eat_sym("*") {
            return Ok(RidSetAst::All);
        }
        if let Tok::Int(_) = self.peek() {
            return Ok(RidSetAst::List(vec![self.rid()?]));
        }
        let close = if self.eat_sym("(") {
            ")"
        } else if self.eat_sym("[") {
            "]"
        } else if matches!(self.peek(), Tok::Ident(s) if s.eq_ignore_ascii_case("backward") || s.eq_ignore_ascii_case("forward"))
        {
            return Ok(RidSetAst::Call(Box::new(self.lineage_call()?)));
        } else {
            return Err(self.error("expected a rid set"));
        };
        let mut out = Vec::new();
        if !self.eat_sym(close) {
            out.push(self.rid()?);
            while self.eat_sym(",") {
                out.push(self.rid()?);
            }
            self.expect_sym(close)?;
        }
        Ok(RidSetAst::List(out))
    }

    fn rid(&mut self) -> Result<u32> {
        match self.peek() {
            Tok::Int(i) if *i >= 0 && *i < u32::MAX as i64 => {
                let r = *i as u32;
                self.bump();
                Ok(r)
            }
            _ => Err(self.error("expected a rid")),
        }
    }

    pub(crate) fn expr(&mut self) -> Result<AExpr> {
        let mut left = self.and_expr()?;
        while self.eat_kw("or") {
            let right = self.and_expr()?;
            left = AExpr::Bin(BinOp::Or, Box::new(left), Box::new(right));
        }
        Ok(left)
    }

    fn and_expr(&mut self) -> Result<AExpr> {
        let mut left = self.not_expr()?;
        while self.eat_kw("and") {
            let right = self.not_expr()?;
            left = AExpr::Bin(BinOp::And, Box::new(left), Box::new(right));
        }
        Ok(left)
    }

    fn not_expr(&mut self) -> Result<AExpr> {
        if self.eat_kw("not") {
            return Ok(AExpr::Not(Box::new(self.not_expr()?)));
        }
        self.comparison()
    }

    fn comparison(&mut self) -> Result<AExpr> {
        let left = self.additive()?;
        let op = match self.peek() {
            Tok::Sym("=") => Some(BinOp::Eq),
            Tok::Sym("<>") | Tok::Sym("!=") => Some(BinOp::Ne),
            Tok::Sym("<") => Some(BinOp::Lt),
            Tok::Sym("<=") => Some(BinOp::Le),
            Tok::Sym(">") => Some(BinOp::Gt),
            Tok::Sym(">=") => Some(BinOp::Ge),
            _ => None,
        };
        if let Some(op) = op {
            self.bump();
            let right = self.additive()?;
            return Ok(AExpr::Bin(op, Box::new(left), Box::new(right)));
        }
        let negated = self.is_kw("not") && (self.is_kw_at(1, "in") || self.is_kw_at(1, "between"));
        if negated {
            self.bump();
        }
        if self.eat_kw("in") {
            self.expect_sym("(")?;
            if self.is_kw("select") {
                return Err(Error::Unsupported("subqueries are not supported".into()));
            }
            let mut list = vec![self.expr()?];
            while self.eat_sym(",") {
                list.push(self.expr()?);
            }
            self.expect_sym(")")?;
            return Ok(AExpr::InList {
                expr: Box::new(left),
                list,
                negated,
            });
        }
        if self.eat_kw("between") {
            let lo = self.additive()?;
            self.expect_kw("and")?;
            let hi = self.additive()?;
            return Ok(AExpr::Between {
                expr: Box::new(left),
                lo: Box::new(lo),
                hi: Box::new(hi),
                negated,
            });
        }
        if self.is_kw("is") || self.is_kw("like") || (self.is_kw("not") && self.is_kw_at(1, "like")) {
            return Err(Error::Unsupported(format!(
                "{} predicates are not supported",
                if self.is_kw("is") { "IS [NOT] NULL" } else { "LIKE" }
            )));
        }
        Ok(left)
    }

    fn additive(&mut self) -> Result<AExpr> {
        let mut left = self.multiplicative()?;
        loop {
            let op = match self.peek() {
                Tok::Sym("+") => BinOp::Add,
                Tok::Sym("-") => BinOp::Sub,
                Tok::Sym("||") => {
                    return Err(Error::Unsupported("string concatenation is not supported".into()))
                }
                _ => return Ok(left),
            };
            self.bump();
            let right = self.multiplicative()?;
            left = AExpr::Bin(op, Box::new(left), Box::new(right));
        }
    }

    fn multiplicative(&mut self) -> Result<AExpr> {
        let mut left = self.unary()?;
        loop {
            let op = match self.peek() {
                Tok::Sym("*") => BinOp::Mul,
                Tok::Sym("/") => BinOp::Div,
                Tok::Sym("%") => BinOp::Mod,
                _ => return Ok(left),
            };
            self.bump();
            let right = self.unary()?;
            left = AExpr::Bin(op, Box::new(left), Box::new(right));
        }
    }

    fn unary(&mut self) -> Result<AExpr> {
        if self.eat_sym("-") {
            return Ok(match self.unary()? {
                AExpr::Lit(Value::Int(i)) => AExpr::Lit(Value::Int(i.wrapping_neg())),
                AExpr::Lit(Value::Float(f)) => AExpr::Lit(Value::Float(-f)),
                e => AExpr::Neg(Box::new(e)),
            });
        }
        if self.eat_sym("+") {
            return self.unary();
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<AExpr> {
        let pos = self.pos();
        match self.peek().clone() {
            Tok::Int(i) => {
                self.bump();
                Ok(AExpr::Lit(Value::Int(i)))
            }
            Tok::Float(f) => {
                self.bump();
                Ok(AExpr::Lit(Value::Float(f)))
            }
            Tok::Str(s) => {
                self.bump();
                Ok(AExpr::Lit(Value::text(&s)))
            }
            Tok::Sym("(") => {
                self.bump();
                if self.is_kw("select") {
                    return Err(Error::Unsupported("subqueries are not supported".into()));
                }
                let e = self.expr()?;
                self.expect_sym(")")?;
                Ok(e)
            }
            Tok::Quoted(name) => {
                self.bump();
                self.column_rest(name, pos)
            }
            Tok::Ident(word) => {
                let lower = word.to_ascii_lowercase();
                match lower.as_str() {
                    "case" => {
                        self.bump();
                        self.case()
                    }
                    "true" | "false" => {
                        self.bump();
                        Ok(AExpr::Lit(Value::Bool(lower == "true")))
                    }
                    "date" if matches!(self.peek_at(1), Tok::Str(_)) => {
                        self.bump();
                        let Tok::Str(s) = self.bump() else { unreachable!() };
                        let d = parse_date(&s)
                            .ok_or_else(|| syntax(pos, format!("invalid date literal '{s}'")))?;
                        Ok(AExpr::Lit(Value::Date(d)))
                    }
                    "interval" => Err(Error::Unsupported("interval literals are not supported".into())),
                    "null" => Err(Error::Unsupported("NULL is not supported".into())),
                    "extract" if matches!(self.peek_at(1), Tok::Sym("(")) => {
                        self.bump();
                        self.bump();
                        let field = self.ident()?;
                        let func = match field.to_ascii_lowercase().as_str() {
                            "year" => Func::Year,
                            "month" => Func::Month,
                            other => {
                                return Err(Error::Unsupported(format!("extract({other} from ..)")))
                            }
                        };
                        self.expect_kw("from")?;
                        let e = self.expr()?;
                        self.expect_sym(")")?;
                        Ok(AExpr::Extract(func, Box::new(e)))
                    }
                    _ if is_reserved(&lower) => Err(self.error("expected an expression")),
                    _ => {
                        self.bump();
                        if self.eat_sym("(") {
                            return self.call(word, pos);
                        }
                        self.column_rest(word, pos)
                    }
                }
            }
            _ => Err(self.error("expected an expression")),
        }
    }

    fn column_rest(&mut self, first: String, pos: usize) -> Result<AExpr> {
        if self.eat_sym(".") {
            let name = self.ident()?;
            return Ok(AExpr::Col {
                qual: Some(first),
                name,
                pos,
            });
        }
        Ok(AExpr::Col {
            qual: None,
            name: first,
            pos,
        })
    }

    fn call(&mut self, name: String, pos: usize) -> Result<AExpr> {
        if self.eat_sym("*") {
            self.expect_sym(")")?;
            return Ok(AExpr::Call {
                name,
                args: Vec::new(),
                distinct: false,
                star: true,
                pos,
            });
        }
        let distinct = self.eat_kw("distinct");
        let mut args = Vec::new();
        if !self.eat_sym(")") {
            args.push(self.expr()?);
            while self.eat_sym(",") {
                args.push(self.expr()?);
            }
            self.expect_sym(")")?;
        }
        Ok(AExpr::Call {
            name,
            args,
            distinct,
            star: false,
            pos,
        })
    }

    fn case(&mut self) -> Result<AExpr> {
        let operand = if self.is_kw("when") {
            None
        } else {
            Some(Box::new(self.expr()?))
        };
        let mut branches = Vec::new();
        while self.eat_kw("when") {
            let w = self.expr()?;
            self.expect_kw("then")?;
            let t = self.expr()?;
            branches.push((w, t));
        }
        if branches.is_empty() {
            return Err(self.error("expected WHEN"));
        }
        let otherwise = if self.eat_kw("else") {
            Some(Box::new(self.expr()?))
        } else {
            None
        };
        self.expect_kw("end")?;
        Ok(AExpr::Case {
            operand,
            branches,
            otherwise,
        })
    }
}

fn is_reserved(word: &str) -> bool {
    RESERVED.iter().any(|k| k.eq_ignore_ascii_case(word))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn select(q: QueryAst) -> SelectAst {
        match q {
            QueryAst::Select(s) => *s,
            other => panic!("not a select: {other:?}"),
        }
    }

    #[test]
    fn joins_fold_into_conditions() {
        let s = select(
            parse("SELECT a.x, count(*) FROM a JOIN b ON a.k = b.k, c WHERE c.z > 1 GROUP BY a.x").unwrap(),
        );
        assert_eq!(s.from.len(), 3);
        assert_eq!(s.conditions.len(), 2);
        assert_eq!(s.group_by.len(), 1);
        assert!(matches!(&s.items[1], SelectItem::Expr { expr: AExpr::Call { star: true, .. }, .. }));
    }

    #[test]
    fn precedence() {
        let e = parse_expr("a + b * 2 > 3 AND NOT c = 1 OR d").unwrap();
        let AExpr::Bin(BinOp::Or, l, _) = e else { panic!() };
        let AExpr::Bin(BinOp::And, cmp, not) = *l else { panic!() };
        assert!(matches!(*not, AExpr::Not(_)));
        let AExpr::Bin(BinOp::Gt, sum, _) = *cmp else { panic!() };
        let AExpr::Bin(BinOp::Add, _, prod) = *sum else { panic!() };
        assert!(matches!(*prod, AExpr::Bin(BinOp::Mul, _, _)));
    }

    #[test]
    fn set_ops_are_left_associative() {
        let q = parse("SELECT a FROM t UNION ALL SELECT a FROM u EXCEPT SELECT a FROM v").unwrap();
        let QueryAst::SetOp { kind, left, .. } = q else { panic!() };
        assert_eq!(kind, SetOpKind::Except);
        assert!(matches!(*left, QueryAst::SetOp { kind: SetOpKind::Union, all: true, .. }));
    }

    #[test]
    fn lineage_calls() {
        let s = select(parse("SELECT * FROM backward(q1, [0, 2], lineitem) l").unwrap());
        let FromItem::Lineage { call, alias } = &s.from[0] else { panic!() };
        assert_eq!(call.rids, RidSetAst::List(vec![0, 2]));
        assert_eq!(alias.as_deref(), Some("l"));
        let s = select(parse("SELECT * FROM forward('v', backward(v2, 3, t))").unwrap());
        let FromItem::Lineage { call, .. } = &s.from[0] else { panic!() };
        assert!(call.forward && call.base.is_none());
        assert!(matches!(call.rids, RidSetAst::Call(_)));
    }

    #[test]
    fn dates_and_extract() {
        let e = parse_expr("extract(year from d) = 1995 AND d < date '1998-12-01'").unwrap();
        let AExpr::Bin(BinOp::And, l, r) = e else { panic!() };
        assert!(matches!(*l, AExpr::Bin(BinOp::Eq, ref x, _) if matches!(**x, AExpr::Extract(Func::Year, _))));
        assert!(matches!(*r, AExpr::Bin(BinOp::Lt, _, ref d) if matches!(**d, AExpr::Lit(Value::Date(_)))));
    }

    #[test]
    fn errors_carry_positions() {
        match parse("SELECT a FROM") {
            Err(Error::Syntax { pos, .. }) => assert_eq!(pos, 13),
            other => panic!("{other:?}"),
        }
        assert!(matches!(parse("SELECT a FROM t ORDER BY a"), Err(Error::Unsupported(_))));
        assert!(matches!(parse("SELECT a FROM t LIMIT 3"), Err(Error::Unsupported(_))));
    }

    #[test]
    fn having_count_distinct() {
        let s = select(parse("SELECT a FROM t GROUP BY a HAVING COUNT(DISTINCT b) > 1").unwrap());
        let Some(AExpr::Bin(BinOp::Gt, call, _)) = s.having else { panic!() };
        assert!(matches!(*call, AExpr::Call { distinct: true, .. }));
    }
}
