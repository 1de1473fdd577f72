//! Recursive-descent parser for the SQL subset.

use super::ast::*;
use super::lexer::{tokenize, Tok, Token};
use crate::algebra::{AggFunc, CmpOp};
use crate::error::{Error, Result};

const RESERVED: &[&str] = &[
    "SELECT", "FROM", "WHERE", "GROUP", "BY", "HAVING", "AND", "OR", "NOT", "IN", "EXISTS", "ANY", "SOME", "ALL", "UNION",
    "INTERSECT", "EXCEPT", "DISTINCT", "AS", "IS", "NULL", "TRUE", "FALSE", "WITH", "RECURSIVE", "ON", "JOIN", "CROSS",
    "INNER", "LEFT", "RIGHT", "FULL", "OUTER", "NATURAL", "BETWEEN", "ORDER", "LIMIT", "OFFSET", "FETCH", "OVER", "CASE",
    "WHEN", "THEN", "ELSE", "END", "LIKE", "USING",
];

/// Features recognised only to be rejected with a named diagnostic.
const UNSUPPORTED: &[(&str, &str)] = &[
    ("ORDER", "ORDER BY"),
    ("LIMIT", "LIMIT"),
    ("OFFSET", "OFFSET"),
    ("FETCH", "FETCH"),
    ("CASE", "CASE expressions"),
    ("LIKE", "LIKE"),
    ("LEFT", "outer joins"),
    ("RIGHT", "outer joins"),
    ("FULL", "outer joins"),
    ("NATURAL", "natural joins"),
    ("USING", "joins with USING"),
];

pub struct Parser {
    toks: Vec<Token>,
    pos: usize,
}

pub fn parse(src: &str) -> Result<Query> {
    let mut p = Parser { toks: tokenize(src)?, pos: 0 };
    let q = p.query()?;
    p.eat_sym(";");
    p.unsupported_here()?;
    if p.peek() != &Tok::Eof {
        return Err(p.error("unexpected input after the query"));
    }
    Ok(q)
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, k: usize) -> &Tok {
        &self.toks[(self.pos + k).min(self.toks.len() - 1)].tok
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error(&self, message: &str) -> Error {
        let t = &self.toks[self.pos];
        let found = match &t.tok {
            Tok::Ident { text, .. } => format!("`{text}`"),
            Tok::Number(n) => format!("number {n}"),
            Tok::Str(s) => format!("string '{s}'"),
            Tok::Sym(s) => format!("`{s}`"),
            Tok::Eof => "end of input".into(),
        };
        Error::SqlSyntax { line: t.line, column: t.column, message: format!("{message}, found {found}") }
    }

    fn is_kw_at(&self, k: usize, kw: &str) -> bool {
        matches!(self.peek_at(k), Tok::Ident { text, quoted: false } if text.eq_ignore_ascii_case(kw))
    }

    fn is_kw(&self, kw: &str) -> bool {
        self.is_kw_at(0, kw)
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
            Err(self.error(&format!("expected {kw}")))
        }
    }

    fn is_sym(&self, s: &str) -> bool {
        matches!(self.peek(), Tok::Sym(t) if *t == s)
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
            Err(self.error(&format!("expected `{s}`")))
        }
    }

    fn unsupported_here(&self) -> Result<()> {
        for (kw, feature) in UNSUPPORTED {
            if self.is_kw(kw) {
                return Err(Error::Unsupported(format!("{feature} (line {}, column {})", self.toks[self.pos].line, self.toks[self.pos].column)));
            }
        }
        Ok(())
    }

    fn ident(&mut self) -> Result<String> {
        match self.peek().clone() {
            Tok::Ident { text, quoted } if quoted || !is_reserved(&text) => {
                self.bump();
                Ok(text)
            }
            _ => Err(self.error("expected an identifier")),
        }
    }

    fn at_ident(&self) -> bool {
        matches!(self.peek(), Tok::Ident { text, quoted } if *quoted || !is_reserved(text))
    }

    pub fn query(&mut self) -> Result<Query> {
        if self.eat_kw("WITH") {
            let recursive = self.eat_kw("RECURSIVE");
            let mut ctes = Vec::new();
            loop {
                let name = self.ident()?;
                let mut columns = Vec::new();
                if self.eat_sym("(") {
                    loop {
                        columns.push(self.ident()?);
                        if !self.eat_sym(",") {
                            break;
                        }
                    }
                    self.expect_sym(")")?;
                }
                self.expect_kw("AS")?;
                self.expect_sym("(")?;
                let query = self.query()?;
                self.expect_sym(")")?;
                ctes.push(Cte { name, columns, query });
                if !self.eat_sym(",") {
                    break;
                }
            }
            let body = self.query()?;
            return Ok(Query::With { recursive, ctes, body: Box::new(body) });
        }
        let mut left = self.set_term()?;
        loop {
            let op = if self.eat_kw("UNION") {
                SetOp::Union
            } else if self.eat_kw("EXCEPT") {
                SetOp::Except
            } else {
                break;
            };
            let all = self.set_quantifier();
            let right = self.set_term()?;
            left = Query::SetOp { op, all, left: Box::new(left), right: Box::new(right) };
        }
        Ok(left)
    }

    fn set_quantifier(&mut self) -> bool {
        if self.eat_kw("ALL") {
            true
        } else {
            self.eat_kw("DISTINCT");
            false
        }
    }

    fn set_term(&mut self) -> Result<Query> {
        let mut left = self.set_primary()?;
        while self.eat_kw("INTERSECT") {
            let all = self.set_quantifier();
            let right = self.set_primary()?;
            left = Query::SetOp { op: SetOp::Intersect, all, left: Box::new(left), right: Box::new(right) };
        }
        Ok(left)
    }

    fn set_primary(&mut self) -> Result<Query> {
        if self.eat_sym("(") {
            let q = self.query()?;
            self.expect_sym(")")?;
            return Ok(q);
        }
        if self.is_kw("SELECT") {
            return Ok(Query::Select(Box::new(self.select()?)));
        }
        if self.is_kw("VALUES") {
            return Err(Error::Unsupported("VALUES lists".into()));
        }
        Err(self.error("expected SELECT"))
    }

    fn select(&mut self) -> Result<Select> {
        self.expect_kw("SELECT")?;
        let distinct = if self.eat_kw("DISTINCT") {
            true
        } else {
            self.eat_kw("ALL");
            false
        };
        let mut items = Vec::new();
        loop {
            items.push(self.select_item()?);
            if !self.eat_sym(",") {
                break;
            }
        }
        if !self.eat_kw("FROM") {
            self.unsupported_here()?;
            return Err(Error::Unsupported("SELECT without FROM".into()));
        }
        let mut from = Vec::new();
        let mut join_conds = Vec::new();
        loop {
            from.push(self.table_ref()?);
            loop {
                self.unsupported_here()?;
                if self.eat_kw("CROSS") {
                    self.expect_kw("JOIN")?;
                    from.push(self.table_ref()?);
                } else if self.is_kw("JOIN") || self.is_kw("INNER") {
                    self.eat_kw("INNER");
                    self.expect_kw("JOIN")?;
                    from.push(self.table_ref()?);
                    self.unsupported_here()?;
                    self.expect_kw("ON")?;
                    join_conds.push(self.cond()?);
                } else {
                    break;
                }
            }
            if !self.eat_sym(",") {
                break;
            }
        }
        let mut where_ = if self.eat_kw("WHERE") { Some(self.cond()?) } else { None };
        for c in join_conds.into_iter().rev() {
            where_ = Some(match where_ {
                None => c,
                Some(w) => Cond::And(Box::new(c), Box::new(w)),
            });
        }
        let mut group_by = Vec::new();
        if self.eat_kw("GROUP") {
            self.expect_kw("BY")?;
            loop {
                group_by.push(self.scalar()?);
                if !self.eat_sym(",") {
                    break;
                }
            }
        }
        let having = if self.eat_kw("HAVING") { Some(self.cond()?) } else { None };
        self.unsupported_here()?;
        Ok(Select { distinct, items, from, where_, group_by, having })
    }

    fn select_item(&mut self) -> Result<SelectItem> {
        if self.eat_sym("*") {
            return Ok(SelectItem::Star);
        }
        if self.at_ident() && self.peek_at(1) == &Tok::Sym(".") && self.peek_at(2) == &Tok::Sym("*") {
            let q = self.ident()?;
            self.bump();
            self.bump();
            return Ok(SelectItem::QualifiedStar(q));
        }
        let e = self.scalar()?;
        let alias = if self.eat_kw("AS") || self.at_ident() { Some(self.ident()?) } else { None };
        Ok(SelectItem::Expr(e, alias))
    }

    fn table_ref(&mut self) -> Result<FromItem> {
        self.unsupported_here()?;
        let source = if self.eat_sym("(") {
            let q = self.query()?;
            self.expect_sym(")")?;
            Source::Derived(Box::new(q))
        } else {
            Source::Table(self.ident()?)
        };
        let alias = if self.eat_kw("AS") || self.at_ident() { Some(self.ident()?) } else { None };
        if matches!(source, Source::Derived(_)) && alias.is_none() {
            return Err(self.error("a derived table needs an alias"));
        }
        Ok(FromItem { source, alias })
    }

    pub fn cond(&mut self) -> Result<Cond> {
        let mut left = self.cond_and()?;
        while self.eat_kw("OR") {
            let right = self.cond_and()?;
            left = Cond::Or(Box::new(left), Box::new(right));
        }
        Ok(left)
    }

    fn cond_and(&mut self) -> Result<Cond> {
        let mut left = self.cond_not()?;
        while self.eat_kw("AND") {
            let right = self.cond_not()?;
            left = Cond::And(Box::new(left), Box::new(right));
        }
        Ok(left)
    }

    fn cond_not(&mut self) -> Result<Cond> {
        if self.eat_kw("NOT") {
            return Ok(Cond::Not(Box::new(self.cond_not()?)));
        }
        self.predicate()
    }

    fn predicate(&mut self) -> Result<Cond> {
        self.unsupported_here()?;
        if self.eat_kw("EXISTS") {
            return Ok(Cond::Exists(Box::new(self.paren_query()?)));
        }
        if self.is_kw("TRUE") || self.is_kw("FALSE") {
            let t = self.is_kw("TRUE");
            self.bump();
            return Ok(if t { Cond::True } else { Cond::False });
        }
        if self.is_sym("(") && !self.is_kw_at(1, "SELECT") && !self.is_kw_at(1, "WITH") {
            // A parenthesised condition, unless a predicate tail follows it.
            let save = self.pos;
            self.bump();
            if let Ok(c) = self.cond() {
                if self.eat_sym(")") && !self.at_predicate_tail() {
                    return Ok(c);
                }
            }
            self.pos = save;
        }
        let lhs = self.row()?;
        self.predicate_tail(lhs)
    }

    fn at_predicate_tail(&self) -> bool {
        matches!(self.peek(), Tok::Sym("=" | "<>" | "!=" | "<" | ">" | "<=" | ">=" | "+" | "-" | "*" | "/" | "%"))
            || ["IN", "IS", "BETWEEN", "NOT"].iter().any(|k| self.is_kw(k))
    }

    /// A scalar, or a parenthesised tuple of at least two scalars.
    fn row(&mut self) -> Result<Vec<Scalar>> {
        if self.is_sym("(") && !self.is_kw_at(1, "SELECT") && !self.is_kw_at(1, "WITH") {
            let save = self.pos;
            self.bump();
            let first = self.scalar()?;
            if self.eat_sym(",") {
                let mut items = vec![first];
                loop {
                    items.push(self.scalar()?);
                    if !self.eat_sym(",") {
                        break;
                    }
                }
                self.expect_sym(")")?;
                return Ok(items);
            }
            self.pos = save;
        }
        Ok(vec![self.scalar()?])
    }

    fn paren_query(&mut self) -> Result<Query> {
        self.expect_sym("(")?;
        let q = self.query()?;
        self.expect_sym(")")?;
        Ok(q)
    }

    fn cmp_op(&mut self) -> Option<CmpOp> {
        let op = match self.peek() {
            Tok::Sym(s) => CmpOp::from_symbol(s),
            _ => None,
        }?;
        self.bump();
        Some(op)
    }

    fn predicate_tail(&mut self, lhs: Vec<Scalar>) -> Result<Cond> {
        if let Some(op) = self.cmp_op() {
            let quant = if self.eat_kw("ANY") || self.eat_kw("SOME") {
                Some(Quantifier::Any)
            } else if self.eat_kw("ALL") {
                Some(Quantifier::All)
            } else {
                None
            };
            if let Some(q) = quant {
                return Ok(Cond::Quantified(lhs, op, q, Box::new(self.paren_query()?)));
            }
            let rhs = self.row()?;
            return Ok(Cond::Cmp(lhs, op, rhs));
        }
        let negated = self.eat_kw("NOT");
        let c = if self.eat_kw("IN") {
            self.expect_sym("(")?;
            if self.is_kw("SELECT") || self.is_kw("WITH") {
                let q = self.query()?;
                self.expect_sym(")")?;
                Cond::InQuery(lhs, Box::new(q))
            } else {
                let mut values = Vec::new();
                loop {
                    values.push(self.row()?);
                    if !self.eat_sym(",") {
                        break;
                    }
                }
                self.expect_sym(")")?;
                Cond::InList(lhs, values)
            }
        } else if self.eat_kw("BETWEEN") {
            let a = single(lhs, self)?;
            let lo = self.scalar()?;
            self.expect_kw("AND")?;
            let hi = self.scalar()?;
            Cond::Between(a, lo, hi)
        } else if !negated && self.eat_kw("IS") {
            let not = self.eat_kw("NOT");
            self.expect_kw("NULL")?;
            let c = Cond::IsNull(single(lhs, self)?);
            return Ok(if not { Cond::Not(Box::new(c)) } else { c });
        } else {
            self.unsupported_here()?;
            return Err(self.error("expected a comparison, IN, IS or BETWEEN"));
        };
        Ok(if negated { Cond::Not(Box::new(c)) } else { c })
    }

    pub fn scalar(&mut self) -> Result<Scalar> {
        let mut left = self.term()?;
        loop {
            let op = if self.eat_sym("+") {
                Arith::Add
            } else if self.eat_sym("-") {
                Arith::Sub
            } else {
                break;
            };
            let right = self.term()?;
            left = Scalar::Bin(op, Box::new(left), Box::new(right));
        }
        Ok(left)
    }

    fn term(&mut self) -> Result<Scalar> {
        let mut left = self.unary()?;
        loop {
            let op = if self.eat_sym("*") {
                Arith::Mul
            } else if self.eat_sym("/") {
                Arith::Div
            } else if self.eat_sym("%") {
                Arith::Mod
            } else {
                break;
            };
            let right = self.unary()?;
            left = Scalar::Bin(op, Box::new(left), Box::new(right));
        }
        Ok(left)
    }

    fn unary(&mut self) -> Result<Scalar> {
        if self.eat_sym("-") {
            return Ok(Scalar::Neg(Box::new(self.unary()?)));
        }
        if self.eat_sym("+") {
            return self.unary();
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<Scalar> {
        self.unsupported_here()?;
        match self.peek().clone() {
            Tok::Number(n) => {
                self.bump();
                Ok(Scalar::Num(n))
            }
            Tok::Str(s) => {
                self.bump();
                Ok(Scalar::Str(s))
            }
            Tok::Sym("(") => {
                if self.is_kw_at(1, "SELECT") || self.is_kw_at(1, "WITH") {
                    return Ok(Scalar::Subquery(Box::new(self.paren_query()?)));
                }
                self.bump();
                let e = self.scalar()?;
                self.expect_sym(")")?;
                Ok(e)
            }
            Tok::Ident { .. } if self.eat_kw("NULL") => Ok(Scalar::Null),
            Tok::Ident { text, quoted } => {
                if !quoted && self.peek_at(1) == &Tok::Sym("(") {
                    return self.call(&text);
                }
                let first = self.ident()?;
                if self.eat_sym(".") {
                    let col = self.ident()?;
                    Ok(Scalar::Col(Some(first), col))
                } else {
                    Ok(Scalar::Col(None, first))
                }
            }
            _ => Err(self.error("expected an expression")),
        }
    }

    fn call(&mut self, name: &str) -> Result<Scalar> {
        let upper = name.to_ascii_uppercase();
        let func = match upper.as_str() {
            "COUNT" => AggFunc::Count,
            "SUM" => AggFunc::Sum,
            "AVG" => AggFunc::Avg,
            "MIN" => AggFunc::Min,
            "MAX" => AggFunc::Max,
            _ => return Err(Error::Unsupported(format!("function {name}"))),
        };
        self.bump();
        self.expect_sym("(")?;
        if self.is_kw("DISTINCT") {
            return Err(Error::Unsupported(format!("{upper}(DISTINCT ...)")));
        }
        let arg = if func == AggFunc::Count && self.eat_sym("*") { None } else { Some(Box::new(self.scalar()?)) };
        self.expect_sym(")")?;
        if self.is_kw("OVER") {
            return Err(Error::Unsupported("window functions".into()));
        }
        Ok(match arg {
            None => Scalar::Agg(AggFunc::CountStar, None),
            arg => Scalar::Agg(func, arg),
        })
    }
}

fn single(mut row: Vec<Scalar>, p: &Parser) -> Result<Scalar> {
    if row.len() == 1 {
        Ok(row.pop().expect("one item"))
    } else {
        Err(p.error("expected a single expression, not a tuple"))
    }
}

fn is_reserved(word: &str) -> bool {
    RESERVED.iter().any(|k| k.eq_ignore_ascii_case(word))
}
