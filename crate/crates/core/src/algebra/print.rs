//! Canonical printer; `parse_expression(render_expression(e)) == e`.

use std::fmt::Write;

use crate::algebra::{Aggregate, Condition, Expression, MuKind, ProjItem, Term};
use crate::value::{format_rational, Name};

fn is_symbol(s: &str) -> bool {
    !s.is_empty()
        && s.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '.' | '$' | '#' | '*' | '-' | '/' | '+' | '@'))
        && !matches!(s, "true" | "false")
}

fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

fn name(out: &mut String, n: &Name) {
    if is_symbol(n.as_str()) {
        out.push_str(n.as_str());
    } else {
        out.push_str(&quote(n.as_str()));
    }
}

fn term(out: &mut String, t: &Term) {
    match t {
        Term::Num(r) => {
            let _ = write!(out, "(num {})", format_rational(r));
        }
        Term::Ord(s) => {
            let _ = write!(out, "(ord {})", quote(s));
        }
        Term::Null => out.push_str("(null)"),
        Term::Col(n) => {
            out.push_str("(col ");
            name(out, n);
            out.push(')');
        }
        Term::Fn(f, args) => {
            out.push_str("(fn ");
            out.push_str(f.name());
            for a in args {
                out.push(' ');
                term(out, a);
            }
            out.push(')');
        }
    }
}

fn tuple(out: &mut String, ts: &[Term]) {
    if ts.len() == 1 {
        term(out, &ts[0]);
        return;
    }
    out.push('(');
    for (i, t) in ts.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        term(out, t);
    }
    out.push(')');
}

fn condition(out: &mut String, c: &Condition) {
    match c {
        Condition::True => out.push_str("true"),
        Condition::False => out.push_str("false"),
        Condition::IsNull(t) => {
            out.push_str("(isnull ");
            term(out, t);
            out.push(')');
        }
        Condition::Compare(l, op, r) => {
            out.push_str("(cmp ");
            tuple(out, l);
            let _ = write!(out, " {op} ");
            tuple(out, r);
            out.push(')');
        }
        Condition::In(l, e) => {
            out.push_str("(in ");
            tuple(out, l);
            out.push(' ');
            expression(out, e);
            out.push(')');
        }
        Condition::Empty(e) => {
            out.push_str("(empty ");
            expression(out, e);
            out.push(')');
        }
        Condition::Any(l, op, e) | Condition::All(l, op, e) => {
            out.push_str(if matches!(c, Condition::Any(..)) { "(any " } else { "(all " });
            tuple(out, l);
            let _ = write!(out, " {op} ");
            expression(out, e);
            out.push(')');
        }
        Condition::And(a, b) | Condition::Or(a, b) => {
            out.push_str(if matches!(c, Condition::And(..)) { "(and " } else { "(or " });
            condition(out, a);
            out.push(' ');
            condition(out, b);
            out.push(')');
        }
        Condition::Not(a) => {
            out.push_str("(not ");
            condition(out, a);
            out.push(')');
        }
    }
}

fn proj_item(out: &mut String, item: &ProjItem) {
    match &item.rename {
        None => term(out, &item.term),
        Some(n) => {
            out.push_str("(as ");
            term(out, &item.term);
            out.push(' ');
            name(out, n);
            out.push(')');
        }
    }
}

fn aggregate(out: &mut String, a: &Aggregate) {
    if a.rename.is_some() {
        out.push_str("(as ");
    }
    out.push('(');
    out.push_str(a.func.name());
    if let Some(c) = &a.column {
        out.push(' ');
        name(out, c);
    }
    out.push(')');
    if let Some(n) = &a.rename {
        out.push(' ');
        name(out, n);
        out.push(')');
    }
}

fn expression(out: &mut String, e: &Expression) {
    match e {
        Expression::Base(n) => {
            out.push_str("(base ");
            name(out, n);
            out.push(')');
        }
        Expression::Project(items, inner) => {
            out.push_str("(project (");
            for (i, it) in items.iter().enumerate() {
                if i > 0 {
                    out.push(' ');
                }
                proj_item(out, it);
            }
            out.push_str(") ");
            expression(out, inner);
            out.push(')');
        }
        Expression::Select(c, inner) => {
            out.push_str("(select ");
            condition(out, c);
            out.push(' ');
            expression(out, inner);
            out.push(')');
        }
        Expression::Product(a, b)
        | Expression::UnionAll(a, b)
        | Expression::IntersectAll(a, b)
        | Expression::ExceptAll(a, b) => {
            let _ = write!(out, "({} ", e.kind());
            expression(out, a);
            out.push(' ');
            expression(out, b);
            out.push(')');
        }
        Expression::Distinct(inner) => {
            out.push_str("(distinct ");
            expression(out, inner);
            out.push(')');
        }
        Expression::Group { keys, aggs, input } => {
            out.push_str("(group (");
            for (i, k) in keys.iter().enumerate() {
                if i > 0 {
                    out.push(' ');
                }
                name(out, k);
            }
            out.push_str(") (");
            for (i, a) in aggs.iter().enumerate() {
                if i > 0 {
                    out.push(' ');
                }
                aggregate(out, a);
            }
            out.push_str(") ");
            expression(out, input);
            out.push(')');
        }
        Expression::Mu { name: n, kind, base, step } => {
            out.push_str("(mu ");
            name(out, n);
            out.push_str(match kind {
                MuKind::Bag => " bag ",
                MuKind::Distinct => " distinct ",
            });
            expression(out, base);
            out.push(' ');
            expression(out, step);
            out.push(')');
        }
    }
}

pub fn render_expression(e: &Expression) -> String {
    let mut s = String::new();
    expression(&mut s, e);
    s
}

pub fn render_condition(c: &Condition) -> String {
    let mut s = String::new();
    condition(&mut s, c);
    s
}

pub fn render_term(t: &Term) -> String {
    let mut s = String::new();
    term(&mut s, t);
    s
}
