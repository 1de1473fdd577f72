//! Printing of algebra expressions as SQL.

use std::collections::HashMap;

use crate::algebra::{output_labels, AggFunc, Condition, Expression, Func, MuKind, Term};
use crate::data::Schema;
use crate::error::{Error, Result};
use crate::value::{format_rational, Name};

/// Label-to-SQL bindings of one query level.
type Frame = Vec<(Name, String)>;

enum Kind {
    Select { distinct: bool, from: Vec<String>, where_: Vec<(String, bool)>, group: Option<Vec<String>>, natural: Vec<String> },
    SetOp(String),
}

struct Block {
    kind: Kind,
    cols: Vec<String>,
}

impl Block {
    fn mergeable(&self) -> bool {
        matches!(self.kind, Kind::Select { distinct: false, group: None, .. })
    }
}

pub fn emit(e: &Expression, schema: &Schema) -> Result<String> {
    let mut em = Emitter { schema, bound: Vec::new(), aliases: HashMap::new(), derived: 0 };
    let b = em.block(e, &[])?;
    Ok(em.render(&b, false))
}

struct Emitter<'a> {
    schema: &'a Schema,
    bound: Vec<(Name, Vec<Name>)>,
    aliases: HashMap<String, usize>,
    derived: usize,
}

fn is_col_ref(s: &str) -> bool {
    let ident = |p: &str| {
        let mut cs = p.chars();
        cs.next().is_some_and(|c| c.is_ascii_alphabetic() || c == '_') && cs.all(|c| c.is_ascii_alphanumeric() || c == '_')
    };
    matches!(s.split_once('.'), Some((a, b)) if ident(a) && ident(b))
}

fn lookup(frames: &[Frame], n: &Name) -> Result<String> {
    frames
        .iter()
        .rev()
        .find_map(|f| f.iter().find(|(l, _)| l == n).map(|(_, s)| s.clone()))
        .ok_or_else(|| Error::Emit(format!("unbound name `{n}`")))
}

fn with_frame(frames: &[Frame], labels: &[Name], cols: &[String]) -> Vec<Frame> {
    let mut out = frames.to_vec();
    out.push(labels.iter().cloned().zip(cols.iter().cloned()).collect());
    out
}

fn agg_sql(f: AggFunc, arg: Option<&str>) -> String {
    match (f, arg) {
        (AggFunc::CountStar, _) | (_, None) => "COUNT(*)".into(),
        (f, Some(a)) => format!("{}({a})", f.name().to_ascii_uppercase()),
    }
}

impl Emitter<'_> {
    fn labels(&self, e: &Expression) -> Result<Vec<Name>> {
        output_labels(e, self.schema, &self.bound)
    }

    fn alias(&mut self, name: &str) -> String {
        loop {
            let n = self.aliases.entry(name.to_string()).or_insert(0);
            *n += 1;
            let a = if *n == 1 { name.to_string() } else { format!("{name}_{n}") };
            if *n == 1 || self.schema.get(&a).is_none() {
                return a;
            }
        }
    }

    fn derived_alias(&mut self) -> String {
        loop {
            self.derived += 1;
            let a = format!("d{}", self.derived);
            if self.schema.get(&a).is_none() && !self.bound.iter().any(|(n, _)| n.as_str() == a) {
                return a;
            }
        }
    }

    fn render(&self, b: &Block, named: bool) -> String {
        match &b.kind {
            Kind::SetOp(text) => text.clone(),
            Kind::Select { distinct, from, where_, group, natural } => {
                let mut s = String::from("SELECT ");
                if *distinct {
                    s.push_str("DISTINCT ");
                }
                if !named && &b.cols == natural {
                    s.push('*');
                } else {
                    let cols: Vec<String> = b
                        .cols
                        .iter()
                        .enumerate()
                        .map(|(i, c)| if named { format!("{c} AS c{}", i + 1) } else { c.clone() })
                        .collect();
                    s.push_str(&cols.join(", "));
                }
                s.push_str(" FROM ");
                s.push_str(&from.join(", "));
                if !where_.is_empty() {
                    s.push_str(" WHERE ");
                    let parts: Vec<String> = where_
                        .iter()
                        .map(|(c, or)| if *or && where_.len() > 1 { format!("({c})") } else { c.clone() })
                        .collect();
                    s.push_str(&parts.join(" AND "));
                }
                if let Some(keys) = group {
                    if !keys.is_empty() {
                        s.push_str(" GROUP BY ");
                        s.push_str(&keys.join(", "));
                    }
                }
                s
            }
        }
    }

    fn wrap(&mut self, b: Block) -> Block {
        let d = self.derived_alias();
        let cols: Vec<String> = (1..=b.cols.len()).map(|i| format!("{d}.c{i}")).collect();
        let from = vec![format!("({}) {d}", self.render(&b, true))];
        Block { kind: Kind::Select { distinct: false, from, where_: Vec::new(), group: None, natural: cols.clone() }, cols }
    }

    fn mergeable(&mut self, b: Block) -> Block {
        if b.mergeable() {
            b
        } else {
            self.wrap(b)
        }
    }

    /// A set-operation operand: always a single SELECT.
    fn operand(&mut self, b: Block) -> String {
        let b = if matches!(b.kind, Kind::Select { .. }) { b } else { self.wrap(b) };
        self.render(&b, true)
    }

    fn block(&mut self, e: &Expression, frames: &[Frame]) -> Result<Block> {
        match e {
            Expression::Base(n) => {
                let arity_names: Vec<String> = if let Some((_, labels)) = self.bound.iter().rev().find(|(m, _)| m == n) {
                    (1..=labels.len()).map(|i| format!("c{i}")).collect()
                } else {
                    let rel = self.schema.get(n).ok_or_else(|| Error::UnknownRelation(n.to_string()))?;
                    rel.columns.iter().map(|c| c.name.clone()).collect()
                };
                let a = self.alias(n);
                let from = if a == n.as_str() { a.clone() } else { format!("{n} {a}") };
                let cols: Vec<String> = arity_names.iter().map(|c| format!("{a}.{c}")).collect();
                Ok(Block {
                    kind: Kind::Select { distinct: false, from: vec![from], where_: Vec::new(), group: None, natural: cols.clone() },
                    cols,
                })
            }
            Expression::Select(c, input) => {
                let labels = self.labels(input)?;
                let b = self.block(input, frames)?;
                let mut b = self.mergeable(b);
                let fr = with_frame(frames, &labels, &b.cols);
                let text = self.cond(c, &fr, 0)?;
                if let Kind::Select { where_, .. } = &mut b.kind {
                    where_.push((text, matches!(**c, Condition::Or(..))));
                }
                Ok(b)
            }
            Expression::Project(items, input) => {
                let labels = self.labels(input)?;
                let b = self.block(input, frames)?;
                let mut b = self.mergeable(b);
                let fr = with_frame(frames, &labels, &b.cols);
                b.cols = items.iter().map(|it| self.term(&it.term, &fr)).collect::<Result<_>>()?;
                Ok(b)
            }
            Expression::Product(l, r) => {
                let a = self.block(l, frames)?;
                let a = self.mergeable(a);
                let b = self.block(r, frames)?;
                let b = self.mergeable(b);
                match (a.kind, b.kind) {
                    (
                        Kind::Select { from: f1, where_: w1, natural: n1, .. },
                        Kind::Select { from: f2, where_: w2, natural: n2, .. },
                    ) => {
                        let cols = a.cols.into_iter().chain(b.cols).collect();
                        Ok(Block {
                            kind: Kind::Select {
                                distinct: false,
                                from: f1.into_iter().chain(f2).collect(),
                                where_: w1.into_iter().chain(w2).collect(),
                                group: None,
                                natural: n1.into_iter().chain(n2).collect(),
                            },
                            cols,
                        })
                    }
                    _ => unreachable!("mergeable blocks are selects"),
                }
            }
            Expression::UnionAll(l, r) | Expression::IntersectAll(l, r) | Expression::ExceptAll(l, r) => {
                let kw = match e {
                    Expression::UnionAll(..) => "UNION ALL",
                    Expression::IntersectAll(..) => "INTERSECT ALL",
                    _ => "EXCEPT ALL",
                };
                let a = self.block(l, frames)?;
                let arity = a.cols.len();
                let a = self.operand(a);
                let b = self.block(r, frames)?;
                let b = self.operand(b);
                Ok(Block { kind: Kind::SetOp(format!("{a} {kw} {b}")), cols: (1..=arity).map(|i| format!("c{i}")).collect() })
            }
            Expression::Distinct(input) => {
                let b = self.block(input, frames)?;
                let mut b = match b.kind {
                    Kind::Select { distinct: false, .. } => b,
                    _ => self.wrap(b),
                };
                if let Kind::Select { distinct, .. } = &mut b.kind {
                    *distinct = true;
                }
                Ok(b)
            }
            Expression::Group { keys, aggs, input } => {
                if keys.is_empty() && aggs.is_empty() {
                    return Err(Error::Emit("grouping without keys or aggregates has no columns".into()));
                }
                let labels = self.labels(input)?;
                let b = self.block(input, frames)?;
                let mut b = self.mergeable(b);
                let idx = |n: &Name| labels.iter().position(|l| l == n).ok_or_else(|| Error::Emit(format!("unbound name `{n}`")));
                let mut used = Vec::new();
                for k in keys {
                    used.push(idx(k)?);
                }
                for a in aggs {
                    if let Some(c) = &a.column {
                        used.push(idx(c)?);
                    }
                }
                if used.iter().any(|&i| !is_col_ref(&b.cols[i])) {
                    b = self.wrap(b);
                }
                let mut cols: Vec<String> = keys.iter().map(|k| idx(k).map(|i| b.cols[i].clone())).collect::<Result<_>>()?;
                for a in aggs {
                    let arg = match &a.column {
                        Some(c) => Some(b.cols[idx(c)?].clone()),
                        None => None,
                    };
                    cols.push(agg_sql(a.func, arg.as_deref()));
                }
                let key_cols = cols[..keys.len()].to_vec();
                if let Kind::Select { group, .. } = &mut b.kind {
                    *group = Some(key_cols);
                }
                b.cols = cols;
                Ok(b)
            }
            Expression::Mu { name, kind, base, step } => {
                let labels = self.labels(base)?;
                let b = self.block(base, frames)?;
                let base_sql = self.operand(b);
                self.bound.push((name.clone(), labels.clone()));
                let s = self.block(step, frames);
                self.bound.pop();
                let step_sql = self.operand(s?);
                let k = labels.len();
                let names: Vec<String> = (1..=k).map(|i| format!("c{i}")).collect();
                let union = match kind {
                    MuKind::Bag => "UNION ALL",
                    MuKind::Distinct => "UNION",
                };
                let d = self.derived_alias();
                let from = format!(
                    "(WITH RECURSIVE {name}({}) AS ({base_sql} {union} {step_sql}) SELECT * FROM {name}) {d}",
                    names.join(", ")
                );
                let cols: Vec<String> = names.iter().map(|c| format!("{d}.{c}")).collect();
                Ok(Block {
                    kind: Kind::Select { distinct: false, from: vec![from], where_: Vec::new(), group: None, natural: cols.clone() },
                    cols,
                })
            }
        }
    }

    fn subquery(&mut self, e: &Expression, frames: &[Frame]) -> Result<String> {
        let b = self.block(e, frames)?;
        Ok(self.render(&b, false))
    }

    fn row(&mut self, ts: &[Term], frames: &[Frame]) -> Result<String> {
        let parts = ts.iter().map(|t| self.term(t, frames)).collect::<Result<Vec<_>>>()?;
        Ok(if parts.len() == 1 { parts.into_iter().next().expect("one") } else { format!("({})", parts.join(", ")) })
    }

    /// `prec`: 0 at the top or under OR, 1 under AND, 2 under NOT.
    fn cond(&mut self, c: &Condition, frames: &[Frame], prec: u8) -> Result<String> {
        Ok(match c {
            Condition::True => "TRUE".into(),
            Condition::False => "FALSE".into(),
            Condition::IsNull(t) => format!("{} IS NULL", self.term(t, frames)?),
            Condition::Compare(l, op, r) => format!("{} {op} {}", self.row(l, frames)?, self.row(r, frames)?),
            Condition::In(l, e) => format!("{} IN ({})", self.row(l, frames)?, self.subquery(e, frames)?),
            Condition::Empty(e) => format!("NOT EXISTS ({})", self.subquery(e, frames)?),
            Condition::Any(l, op, e) => format!("{} {op} ANY ({})", self.row(l, frames)?, self.subquery(e, frames)?),
            Condition::All(l, op, e) => format!("{} {op} ALL ({})", self.row(l, frames)?, self.subquery(e, frames)?),
            Condition::Not(inner) => match &**inner {
                Condition::IsNull(t) => format!("{} IS NOT NULL", self.term(t, frames)?),
                Condition::In(l, e) => format!("{} NOT IN ({})", self.row(l, frames)?, self.subquery(e, frames)?),
                Condition::Empty(e) => format!("EXISTS ({})", self.subquery(e, frames)?),
                other => format!("NOT ({})", self.cond(other, frames, 0)?),
            },
            Condition::And(a, b) => {
                let s = format!("{} AND {}", self.cond(a, frames, 1)?, self.cond(b, frames, 1)?);
                if prec > 1 {
                    format!("({s})")
                } else {
                    s
                }
            }
            Condition::Or(a, b) => {
                let s = format!("{} OR {}", self.cond(a, frames, 0)?, self.cond(b, frames, 0)?);
                if prec > 0 {
                    format!("({s})")
                } else {
                    s
                }
            }
        })
    }

    fn term(&mut self, t: &Term, frames: &[Frame]) -> Result<String> {
        Ok(match t {
            Term::Col(n) => lookup(frames, n)?,
            Term::Null => "NULL".into(),
            Term::Ord(s) => format!("'{}'", s.replace('\'', "''")),
            Term::Num(r) => {
                let (neg, mag) = if r < &num::zero() { (true, -r.clone()) } else { (false, r.clone()) };
                let text = format_rational(&mag);
                let text = match text.split_once('/') {
                    Some((p, q)) => format!("({p} / {q})"),
                    None => text,
                };
                if neg {
                    format!("(-{text})")
                } else {
                    text
                }
            }
            Term::Fn(f, args) => {
                let a = args.iter().map(|x| self.term(x, frames)).collect::<Result<Vec<_>>>()?;
                match f {
                    Func::Neg => format!("(- {})", a[0]),
                    Func::Add => format!("({} + {})", a[0], a[1]),
                    Func::Sub => format!("({} - {})", a[0], a[1]),
                    Func::Mult => format!("({} * {})", a[0], a[1]),
                    Func::Div => format!("({} / {})", a[0], a[1]),
                    Func::Mod => format!("({} % {})", a[0], a[1]),
                }
            }
        })
    }
}
