//! Reader for the parenthesized expression syntax (see `docs/grammar.md`).

use crate::algebra::{AggFunc, Aggregate, CmpOp, Condition, Expression, Func, MuKind, ProjItem, Term};
use crate::error::{Error, Result};
use crate::value::{parse_rational, Name};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct Pos {
    line: usize,
    column: usize,
}

#[derive(Debug)]
enum Sexp {
    Atom { text: String, quoted: bool, pos: Pos },
    List { items: Vec<Sexp>, pos: Pos },
}

impl Sexp {
    fn pos(&self) -> Pos {
        match self {
            Sexp::Atom { pos, .. } | Sexp::List { pos, .. } => *pos,
        }
    }
}

fn err(pos: Pos, message: impl Into<String>) -> Error {
    Error::Parse { line: pos.line, column: pos.column, message: message.into() }
}

struct Reader<'a> {
    chars: std::iter::Peekable<std::str::Chars<'a>>,
    pos: Pos,
}

impl<'a> Reader<'a> {
    fn new(src: &'a str) -> Self {
        Reader { chars: src.chars().peekable(), pos: Pos { line: 1, column: 1 } }
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.chars.next()?;
        if c == '\n' {
            self.pos.line += 1;
            self.pos.column = 1;
        } else {
            self.pos.column += 1;
        }
        Some(c)
    }

    fn skip_ws(&mut self) {
        while let Some(&c) = self.chars.peek() {
            if c.is_whitespace() {
                self.bump();
            } else if c == ';' {
                while let Some(&c) = self.chars.peek() {
                    if c == '\n' {
                        break;
                    }
                    self.bump();
                }
            } else {
                break;
            }
        }
    }

    fn read(&mut self) -> Result<Sexp> {
        self.skip_ws();
        let start = self.pos;
        match self.chars.peek().copied() {
            None => Err(err(start, "unexpected end of input")),
            Some('(') => {
                self.bump();
                let mut items = Vec::new();
                loop {
                    self.skip_ws();
                    match self.chars.peek() {
                        None => return Err(err(self.pos, "unexpected end of input, expected `)`")),
                        Some(')') => {
                            self.bump();
                            return Ok(Sexp::List { items, pos: start });
                        }
                        Some(_) => items.push(self.read()?),
                    }
                }
            }
            Some(')') => Err(err(start, "unexpected `)`")),
            Some('"') => {
                self.bump();
                let mut text = String::new();
                loop {
                    match self.bump() {
                        None => return Err(err(self.pos, "unterminated string")),
                        Some('"') => break,
                        Some('\\') => match self.bump() {
                            Some('n') => text.push('\n'),
                            Some(c @ ('"' | '\\')) => text.push(c),
                            Some(c) => return Err(err(self.pos, format!("unknown escape `\\{c}`"))),
                            None => return Err(err(self.pos, "unterminated string")),
                        },
                        Some(c) => text.push(c),
                    }
                }
                Ok(Sexp::Atom { text, quoted: true, pos: start })
            }
            Some(_) => {
                let mut text = String::new();
                while let Some(&c) = self.chars.peek() {
                    if c.is_whitespace() || matches!(c, '(' | ')' | '"' | ';') {
                        break;
                    }
                    text.push(c);
                    self.bump();
                }
                Ok(Sexp::Atom { text, quoted: false, pos: start })
            }
        }
    }

    fn read_all(mut self) -> Result<Sexp> {
        let s = self.read()?;
        self.skip_ws();
        if self.chars.peek().is_some() {
            return Err(err(self.pos, "trailing input after expression"));
        }
        Ok(s)
    }
}

fn keyword(s: &Sexp) -> Option<&str> {
    match s {
        Sexp::Atom { text, quoted: false, .. } => Some(text),
        _ => None,
    }
}

/// Splits a list into its head keyword and arguments.
fn form(s: &Sexp) -> Result<(&str, &[Sexp], Pos)> {
    match s {
        Sexp::List { items, pos } => match items.first() {
            Some(head) => match keyword(head) {
                Some(k) => Ok((k, &items[1..], *pos)),
                None => Err(err(head.pos(), "expected a keyword")),
            },
            None => Err(err(*pos, "empty list")),
        },
        Sexp::Atom { pos, .. } => Err(err(*pos, "expected a parenthesized form")),
    }
}

fn expect_args(k: &str, args: &[Sexp], n: usize, pos: Pos) -> Result<()> {
    if args.len() != n {
        return Err(err(pos, format!("`{k}` expects {n} argument(s), got {}", args.len())));
    }
    Ok(())
}

fn name(s: &Sexp) -> Result<Name> {
    match s {
        Sexp::Atom { text, .. } if !text.is_empty() => Ok(Name::new(text)),
        other => Err(err(other.pos(), "expected a name")),
    }
}

fn op(s: &Sexp) -> Result<CmpOp> {
    keyword(s)
        .and_then(CmpOp::from_symbol)
        .ok_or_else(|| err(s.pos(), "expected a comparison operator (= <> != < > <= >=)"))
}

fn term(s: &Sexp) -> Result<Term> {
    let (k, args, pos) = form(s)?;
    match k {
        "col" => {
            expect_args(k, args, 1, pos)?;
            Ok(Term::Col(name(&args[0])?))
        }
        "num" => {
            expect_args(k, args, 1, pos)?;
            match &args[0] {
                Sexp::Atom { text, .. } => parse_rational(text).map(Term::Num).map_err(|e| err(args[0].pos(), e.to_string())),
                other => Err(err(other.pos(), "expected a numeric literal")),
            }
        }
        "ord" => {
            expect_args(k, args, 1, pos)?;
            match &args[0] {
                Sexp::Atom { text, quoted: true, .. } => Ok(Term::Ord(text.clone())),
                other => Err(err(other.pos(), "expected a string literal")),
            }
        }
        "null" => {
            expect_args(k, args, 0, pos)?;
            Ok(Term::Null)
        }
        "fn" => {
            let Some(fname) = args.first() else {
                return Err(err(pos, "`fn` expects a function name"));
            };
            let f = keyword(fname)
                .and_then(Func::from_name)
                .ok_or_else(|| err(fname.pos(), "unknown function"))?;
            let targs = args[1..].iter().map(term).collect::<Result<Vec<_>>>()?;
            if targs.len() != f.arity() {
                return Err(Error::Arity(format!("{} expects {} argument(s), got {}", f.name(), f.arity(), targs.len())));
            }
            Ok(Term::Fn(f, targs))
        }
        other => Err(err(pos, format!("unknown term keyword `{other}`"))),
    }
}

/// A single term, or a parenthesized list of terms.
fn tuple(s: &Sexp) -> Result<Vec<Term>> {
    match s {
        Sexp::List { items, .. } if items.first().is_some_and(|h| matches!(h, Sexp::List { .. })) => {
            items.iter().map(term).collect()
        }
        Sexp::List { items, pos } if items.is_empty() => Err(err(*pos, "empty tuple")),
        _ => Ok(vec![term(s)?]),
    }
}

fn condition(s: &Sexp) -> Result<Condition> {
    if let Some(k) = keyword(s) {
        return match k {
            "true" => Ok(Condition::True),
            "false" => Ok(Condition::False),
            other => Err(err(s.pos(), format!("unknown condition `{other}`"))),
        };
    }
    let (k, args, pos) = form(s)?;
    match k {
        "true" | "false" => {
            expect_args(k, args, 0, pos)?;
            Ok(if k == "true" { Condition::True } else { Condition::False })
        }
        "isnull" => {
            expect_args(k, args, 1, pos)?;
            Ok(Condition::IsNull(term(&args[0])?))
        }
        "cmp" => {
            expect_args(k, args, 3, pos)?;
            let l = tuple(&args[0])?;
            let r = tuple(&args[2])?;
            if l.len() != r.len() {
                return Err(Error::Arity(format!("comparison of tuples of lengths {} and {}", l.len(), r.len())));
            }
            Ok(Condition::Compare(l, op(&args[1])?, r))
        }
        "in" => {
            expect_args(k, args, 2, pos)?;
            Ok(Condition::In(tuple(&args[0])?, Box::new(expression(&args[1])?)))
        }
        "empty" => {
            expect_args(k, args, 1, pos)?;
            Ok(Condition::Empty(Box::new(expression(&args[0])?)))
        }
        "any" | "all" => {
            expect_args(k, args, 3, pos)?;
            let t = tuple(&args[0])?;
            let o = op(&args[1])?;
            let e = Box::new(expression(&args[2])?);
            Ok(if k == "any" { Condition::Any(t, o, e) } else { Condition::All(t, o, e) })
        }
        "and" | "or" => {
            if args.len() < 2 {
                return Err(err(pos, format!("`{k}` expects at least 2 arguments")));
            }
            let cs = args.iter().map(condition).collect::<Result<Vec<_>>>()?;
            Ok(if k == "and" { Condition::conj(cs) } else { Condition::disj(cs) })
        }
        "not" => {
            expect_args(k, args, 1, pos)?;
            Ok(Condition::not(condition(&args[0])?))
        }
        other => Err(err(pos, format!("unknown condition keyword `{other}`"))),
    }
}

fn proj_item(s: &Sexp) -> Result<ProjItem> {
    if let Ok(("as", args, pos)) = form(s) {
        expect_args("as", args, 2, pos)?;
        return Ok(ProjItem { term: term(&args[0])?, rename: Some(name(&args[1])?) });
    }
    Ok(ProjItem::plain(term(s)?))
}

fn aggregate(s: &Sexp) -> Result<Aggregate> {
    let (k, args, pos) = form(s)?;
    if k == "as" {
        expect_args(k, args, 2, pos)?;
        let mut a = aggregate(&args[0])?;
        a.rename = Some(name(&args[1])?);
        return Ok(a);
    }
    let f = AggFunc::from_name(k).ok_or_else(|| err(pos, format!("unknown aggregate `{k}`")))?;
    match (f, args.len()) {
        (AggFunc::CountStar, 0) => Ok(Aggregate { func: f, column: None, rename: None }),
        (_, 1) => Ok(Aggregate { func: f, column: Some(name(&args[0])?), rename: None }),
        _ => Err(err(pos, format!("`{k}` expects one column name"))),
    }
}

fn list<'a>(s: &'a Sexp, what: &str) -> Result<&'a [Sexp]> {
    match s {
        Sexp::List { items, .. } => Ok(items),
        other => Err(err(other.pos(), format!("expected a list of {what}"))),
    }
}

fn expression(s: &Sexp) -> Result<Expression> {
    let (k, args, pos) = form(s)?;
    let bin = |f: fn(Box<Expression>, Box<Expression>) -> Expression| -> Result<Expression> {
        expect_args(k, args, 2, pos)?;
        Ok(f(Box::new(expression(&args[0])?), Box::new(expression(&args[1])?)))
    };
    match k {
        "base" => {
            expect_args(k, args, 1, pos)?;
            Ok(Expression::Base(name(&args[0])?))
        }
        "project" => {
            expect_args(k, args, 2, pos)?;
            let items = list(&args[0], "projection items")?.iter().map(proj_item).collect::<Result<Vec<_>>>()?;
            if items.is_empty() {
                return Err(err(args[0].pos(), "projection needs at least one item"));
            }
            Ok(Expression::Project(items, Box::new(expression(&args[1])?)))
        }
        "select" => {
            expect_args(k, args, 2, pos)?;
            Ok(Expression::Select(Box::new(condition(&args[0])?), Box::new(expression(&args[1])?)))
        }
        "product" => bin(Expression::Product),
        "union-all" => bin(Expression::UnionAll),
        "intersect-all" => bin(Expression::IntersectAll),
        "except-all" => bin(Expression::ExceptAll),
        "distinct" => {
            expect_args(k, args, 1, pos)?;
            Ok(Expression::Distinct(Box::new(expression(&args[0])?)))
        }
        "group" => {
            expect_args(k, args, 3, pos)?;
            let keys = list(&args[0], "grouping names")?.iter().map(name).collect::<Result<Vec<_>>>()?;
            let aggs = list(&args[1], "aggregates")?.iter().map(aggregate).collect::<Result<Vec<_>>>()?;
            Ok(Expression::Group { keys, aggs, input: Box::new(expression(&args[2])?) })
        }
        "mu" => {
            expect_args(k, args, 4, pos)?;
            let kind = match keyword(&args[1]) {
                Some("bag") => MuKind::Bag,
                Some("distinct") => MuKind::Distinct,
                _ => return Err(err(args[1].pos(), "expected `bag` or `distinct`")),
            };
            Ok(Expression::Mu {
                name: name(&args[0])?,
                kind,
                base: Box::new(expression(&args[2])?),
                step: Box::new(expression(&args[3])?),
            })
        }
        other => Err(err(pos, format!("unknown expression keyword `{other}`"))),
    }
}

/// Parses an expression from its textual form.
pub fn parse_expression(src: &str) -> Result<Expression> {
    expression(&Reader::new(src).read_all()?)
}

/// Parses a selection condition from its textual form.
pub fn parse_condition(src: &str) -> Result<Condition> {
    condition(&Reader::new(src).read_all()?)
}

/// Parses a term from its textual form.
pub fn parse_term(src: &str) -> Result<Term> {
    term(&Reader::new(src).read_all()?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_in_selection() {
        let e = parse_expression("(select (in (col R.A) (base S)) (base R))").unwrap();
        assert_eq!(
            e,
            Expression::select(
                Condition::In(vec![Term::col("R.A")], Box::new(Expression::base("S"))),
                Expression::base("R")
            )
        );
    }

    #[test]
    fn parses_distinct_projection() {
        let e = parse_expression("(distinct (project ((col R.A)) (base R)))").unwrap();
        assert_eq!(e, Expression::distinct(Expression::project_cols(&["R.A"], Expression::base("R"))));
    }

    #[test]
    fn truncated_input_position() {
        match parse_expression("(select (empt") {
            Err(Error::Parse { line, column, .. }) => assert_eq!((line, column), (1, 14)),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn arity_mismatch_detected() {
        let r = parse_condition("(cmp ((col A) (col B)) = (col C))");
        assert!(matches!(r, Err(Error::Arity(_))));
        assert!(matches!(parse_term("(fn add (num 1))"), Err(Error::Arity(_))));
    }

    #[test]
    fn reports_line_and_column() {
        match parse_expression("(select\n  (frob) (base R))") {
            Err(Error::Parse { line, column, .. }) => assert_eq!((line, column), (2, 3)),
            other => panic!("unexpected {other:?}"),
        }
    }
}
