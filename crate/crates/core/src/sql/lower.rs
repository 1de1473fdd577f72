//! Lowering of parsed SQL to algebra expressions.

use super::ast::*;
use crate::algebra::{AggFunc, Aggregate, CmpOp, Condition, Expression, Func, MuKind, ProjItem, Term};
use crate::data::Schema;
use crate::error::{Error, Result};
use crate::value::{parse_rational, Name};

/// A FROM item visible in a block: its alias and (SQL column, label) pairs.
#[derive(Clone, Debug)]
struct Entry {
    alias: String,
    cols: Vec<(String, Name)>,
}

type Scope = Vec<Entry>;

struct CteDef {
    name: String,
    expr: Expression,
    labels: Vec<Name>,
    columns: Vec<String>,
}

struct Lowered {
    expr: Expression,
    labels: Vec<Name>,
    names: Vec<String>,
}

/// Aggregates and keys available after grouping.
struct GroupCtx {
    keys: Vec<Name>,
    aggs: Vec<Aggregate>,
    block: usize,
}

pub fn lower(q: &Query, schema: &Schema) -> Result<Expression> {
    let mut l = Lowerer { schema, ctes: Vec::new() };
    Ok(l.query(q, &[])?.expr)
}

struct Lowerer<'a> {
    schema: &'a Schema,
    ctes: Vec<CteDef>,
}

fn rename(expr: Expression, from: &[Name], to: &[Name]) -> Expression {
    if from == to {
        return expr;
    }
    let items = from.iter().zip(to).map(|(f, t)| ProjItem::renamed(Term::Col(f.clone()), t)).collect();
    Expression::project(items, expr)
}

fn qualified(alias: &str, cols: &[String]) -> Vec<Name> {
    cols.iter().map(|c| Name::from(format!("{alias}.{c}"))).collect()
}

fn flip(op: CmpOp) -> CmpOp {
    match op {
        CmpOp::Lt => CmpOp::Gt,
        CmpOp::Gt => CmpOp::Lt,
        CmpOp::Le => CmpOp::Ge,
        CmpOp::Ge => CmpOp::Le,
        other => other,
    }
}

fn sql_name(s: &Scalar, i: usize) -> String {
    match s {
        Scalar::Col(_, c) => c.clone(),
        Scalar::Agg(f, _) => match f {
            AggFunc::CountStar => "count".into(),
            f => f.name().into(),
        },
        _ => format!("col{}", i + 1),
    }
}

fn agg_key(func: AggFunc, column: Option<Name>) -> Aggregate {
    Aggregate { func, column, rename: None }
}

impl Lowerer<'_> {
    fn query(&mut self, q: &Query, outer: &[Scope]) -> Result<Lowered> {
        match q {
            Query::Select(s) => self.select(s, outer, false),
            Query::SetOp { op, all, left, right } => {
                let l = self.query(left, outer)?;
                let r = self.query(right, outer)?;
                if l.labels.len() != r.labels.len() {
                    return Err(Error::Arity(format!(
                        "set operation over {} and {} columns",
                        l.labels.len(),
                        r.labels.len()
                    )));
                }
                let expr = match (op, all) {
                    (SetOp::Union, true) => Expression::union_all(l.expr, r.expr),
                    (SetOp::Union, false) => Expression::distinct(Expression::union_all(l.expr, r.expr)),
                    (SetOp::Intersect, true) => Expression::intersect_all(l.expr, r.expr),
                    (SetOp::Intersect, false) => Expression::distinct(Expression::intersect_all(l.expr, r.expr)),
                    (SetOp::Except, true) => Expression::except_all(l.expr, r.expr),
                    (SetOp::Except, false) => Expression::except_all(Expression::distinct(l.expr), r.expr),
                };
                Ok(Lowered { expr, labels: l.labels, names: l.names })
            }
            Query::With { recursive, ctes, body } => {
                let mark = self.ctes.len();
                let result = self.with(*recursive, ctes, body, outer);
                self.ctes.truncate(mark);
                result
            }
        }
    }

    fn with(&mut self, recursive: bool, ctes: &[Cte], body: &Query, outer: &[Scope]) -> Result<Lowered> {
        for cte in ctes {
            let columns = |names: &[String]| -> Result<Vec<String>> {
                if cte.columns.is_empty() {
                    Ok(names.to_vec())
                } else if cte.columns.len() == names.len() {
                    Ok(cte.columns.clone())
                } else {
                    Err(Error::Arity(format!("{} column names for {} columns of `{}`", cte.columns.len(), names.len(), cte.name)))
                }
            };
            if !(recursive && cte.query.mentions_table(&cte.name)) {
                let l = self.query(&cte.query, outer)?;
                let columns = columns(&l.names)?;
                let labels = qualified(&cte.name, &columns);
                let expr = rename(l.expr, &l.labels, &labels);
                self.ctes.push(CteDef { name: cte.name.clone(), expr, labels, columns });
                continue;
            }
            let (kind, left, right) = match &cte.query {
                Query::SetOp { op: SetOp::Union, all, left, right } if !left.mentions_table(&cte.name) => {
                    (if *all { MuKind::Bag } else { MuKind::Distinct }, left, right)
                }
                _ => {
                    return Err(Error::Unsupported(format!(
                        "recursive query `{}` not of the form `base UNION [ALL] step`",
                        cte.name
                    )))
                }
            };
            if self.schema.get(&cte.name).is_some() {
                return Err(Error::Unsupported(format!("recursive query `{}` shadows a table", cte.name)));
            }
            let b = self.query(left, outer)?;
            let columns = columns(&b.names)?;
            let labels = qualified(&cte.name, &columns);
            let base = rename(b.expr, &b.labels, &labels);
            self.ctes.push(CteDef {
                name: cte.name.clone(),
                expr: Expression::base(&cte.name),
                labels: labels.clone(),
                columns: columns.clone(),
            });
            let step = self.query(right, outer)?;
            self.ctes.pop();
            if step.labels.len() != labels.len() {
                return Err(Error::Arity(format!("recursive step of `{}` has {} columns, base has {}", cte.name, step.labels.len(), labels.len())));
            }
            let expr = Expression::mu(&cte.name, kind, base, step.expr);
            self.ctes.push(CteDef { name: cte.name.clone(), expr, labels, columns });
        }
        self.query(body, outer)
    }

    fn table_ref(&mut self, f: &FromItem, outer: &[Scope]) -> Result<(Expression, Entry)> {
        let (expr, labels, names, alias) = match &f.source {
            Source::Table(t) => {
                let alias = f.alias.clone().unwrap_or_else(|| t.clone());
                if let Some(def) = self.ctes.iter().rev().find(|d| &d.name == t) {
                    (def.expr.clone(), def.labels.clone(), def.columns.clone(), alias)
                } else if let Some(rel) = self.schema.get(t) {
                    let names: Vec<String> = rel.columns.iter().map(|c| c.name.clone()).collect();
                    (Expression::base(t), rel.labels(t), names, alias)
                } else {
                    return Err(Error::UnknownRelation(t.clone()));
                }
            }
            Source::Derived(q) => {
                let l = self.query(q, outer)?;
                let alias = f.alias.clone().expect("parser requires an alias");
                (l.expr, l.labels, l.names, alias)
            }
        };
        for (i, n) in names.iter().enumerate() {
            if names[..i].contains(n) {
                return Err(Error::DuplicateName(format!("{alias}.{n}")));
            }
        }
        let target = qualified(&alias, &names);
        let expr = rename(expr, &labels, &target);
        Ok((expr, Entry { alias, cols: names.into_iter().zip(target).collect() }))
    }

    fn select(&mut self, s: &Select, outer: &[Scope], exists: bool) -> Result<Lowered> {
        let mut scope: Scope = Vec::new();
        let mut expr: Option<Expression> = None;
        for f in &s.from {
            let (e, entry) = self.table_ref(f, outer)?;
            if scope.iter().any(|x| x.alias == entry.alias) {
                return Err(Error::DuplicateName(format!("table alias `{}`", entry.alias)));
            }
            scope.push(entry);
            expr = Some(match expr {
                None => e,
                Some(acc) => Expression::product(acc, e),
            });
        }
        let mut expr = expr.ok_or_else(|| Error::Unsupported("SELECT without FROM".into()))?;
        let mut labels: Vec<Name> = scope.iter().flat_map(|e| e.cols.iter().map(|(_, l)| l.clone())).collect();
        let names: Vec<String> = scope.iter().flat_map(|e| e.cols.iter().map(|(c, _)| c.clone())).collect();
        let mut scopes = outer.to_vec();
        scopes.push(scope.clone());
        let block = scopes.len() - 1;
        if let Some(w) = &s.where_ {
            if w.has_aggregate() {
                return Err(Error::Unsupported("aggregate in WHERE".into()));
            }
            let c = self.cond(w, &scopes, None)?;
            expr = Expression::select(c, expr);
        }
        let grouped = !s.group_by.is_empty()
            || s.having.is_some()
            || s.items.iter().any(|i| matches!(i, SelectItem::Expr(e, _) if e.has_aggregate()));
        if exists && !grouped && !s.distinct {
            return Ok(Lowered { expr, labels, names });
        }
        let mut group = None;
        if grouped {
            let mut keys = Vec::new();
            for g in &s.group_by {
                match g {
                    Scalar::Col(q, c) => {
                        let (i, l) = resolve(q.as_deref(), c, &scopes)?;
                        if i != block {
                            return Err(Error::Unsupported(format!("grouping by the outer column {c}")));
                        }
                        if !keys.contains(&l) {
                            keys.push(l);
                        }
                    }
                    _ => return Err(Error::Unsupported("grouping by an expression".into())),
                }
            }
            let mut aggs: Vec<Aggregate> = Vec::new();
            let mut collect = |sc: &Scalar| -> Result<()> { collect_aggs(sc, &scopes, block, &mut aggs) };
            for item in &s.items {
                if let SelectItem::Expr(e, _) = item {
                    collect(e)?;
                }
            }
            if let Some(h) = &s.having {
                for_each_scalar(h, &mut collect)?;
            }
            let mut out = keys.clone();
            out.extend(aggs.iter().map(Aggregate::output_name));
            expr = Expression::Group { keys: keys.clone(), aggs: aggs.clone(), input: Box::new(expr) };
            let ctx = GroupCtx { keys, aggs, block };
            if let Some(h) = &s.having {
                let c = self.cond(h, &scopes, Some(&ctx))?;
                expr = Expression::select(c, expr);
            }
            labels = out;
            group = Some(ctx);
        }
        let mut items = Vec::new();
        let mut out_names = Vec::new();
        for (i, item) in s.items.iter().enumerate() {
            match item {
                SelectItem::Star | SelectItem::QualifiedStar(_) => {
                    if group.is_some() {
                        return Err(Error::Unsupported("`*` in a grouped query".into()));
                    }
                    let entries: Vec<&Entry> = match item {
                        SelectItem::QualifiedStar(a) => {
                            let e = scope.iter().find(|e| &e.alias == a).ok_or_else(|| Error::UnresolvedColumn(format!("{a}.*")))?;
                            vec![e]
                        }
                        _ => scope.iter().collect(),
                    };
                    for e in entries {
                        for (c, l) in &e.cols {
                            items.push(ProjItem::plain(Term::Col(l.clone())));
                            out_names.push(c.clone());
                        }
                    }
                }
                SelectItem::Expr(e, alias) => {
                    let t = self.term(e, &scopes, group.as_ref())?;
                    items.push(match alias {
                        Some(a) => ProjItem::renamed(t, a),
                        None => ProjItem::plain(t),
                    });
                    out_names.push(alias.clone().unwrap_or_else(|| sql_name(e, i)));
                }
            }
        }
        let identity = items.len() == labels.len()
            && items.iter().zip(&labels).all(|(it, l)| it.rename.is_none() && it.term == Term::Col(l.clone()));
        if !identity {
            let mut used: Vec<Name> = Vec::new();
            for it in items.iter_mut() {
                let mut n = it.output_name();
                let mut k = 1;
                while used.contains(&n) {
                    n = Name::from(format!("{}_{k}", it.output_name()));
                    k += 1;
                }
                if n != it.output_name() {
                    it.rename = Some(n.clone());
                }
                used.push(n);
            }
            labels = used;
            expr = Expression::project(items, expr);
        }
        if s.distinct {
            expr = Expression::distinct(expr);
        }
        Ok(Lowered { expr, labels, names: out_names })
    }

    fn subquery(&mut self, q: &Query, scopes: &[Scope], g: Option<&GroupCtx>) -> Result<Lowered> {
        match g {
            None => self.query(q, scopes),
            Some(ctx) => {
                // After grouping only the keys of the block stay visible.
                let mut visible = scopes.to_vec();
                for e in visible[ctx.block].iter_mut() {
                    e.cols.retain(|(_, l)| ctx.keys.contains(l));
                }
                self.query(q, &visible)
            }
        }
    }

    fn cond(&mut self, c: &Cond, scopes: &[Scope], g: Option<&GroupCtx>) -> Result<Condition> {
        Ok(match c {
            Cond::True => Condition::True,
            Cond::False => Condition::False,
            Cond::And(a, b) => Condition::and(self.cond(a, scopes, g)?, self.cond(b, scopes, g)?),
            Cond::Or(a, b) => Condition::or(self.cond(a, scopes, g)?, self.cond(b, scopes, g)?),
            Cond::Not(a) => match &**a {
                Cond::Exists(q) => Condition::empty(self.exists_body(q, scopes, g)?),
                a => Condition::not(self.cond(a, scopes, g)?),
            },
            Cond::Exists(q) => Condition::not(Condition::empty(self.exists_body(q, scopes, g)?)),
            Cond::IsNull(s) => Condition::is_null(self.term(s, scopes, g)?),
            Cond::Between(a, lo, hi) => {
                let a = self.term(a, scopes, g)?;
                Condition::and(
                    Condition::cmp(a.clone(), CmpOp::Ge, self.term(lo, scopes, g)?),
                    Condition::cmp(a, CmpOp::Le, self.term(hi, scopes, g)?),
                )
            }
            Cond::Cmp(l, op, r) => match (l.as_slice(), r.as_slice()) {
                (_, [Scalar::Subquery(q)]) => self.scalar_subquery(l, *op, q, scopes, g)?,
                ([Scalar::Subquery(q)], _) => self.scalar_subquery(r, flip(*op), q, scopes, g)?,
                _ => {
                    if l.len() != r.len() {
                        return Err(Error::Arity(format!("comparison of {} with {} values", l.len(), r.len())));
                    }
                    Condition::Compare(self.terms(l, scopes, g)?, *op, self.terms(r, scopes, g)?)
                }
            },
            Cond::Quantified(l, op, quant, q) => {
                let t = self.terms(l, scopes, g)?;
                let sub = self.subquery(q, scopes, g)?;
                check_arity(t.len(), &sub)?;
                match quant {
                    Quantifier::Any => Condition::Any(t, *op, Box::new(sub.expr)),
                    Quantifier::All => Condition::All(t, *op, Box::new(sub.expr)),
                }
            }
            Cond::InQuery(l, q) => {
                let t = self.terms(l, scopes, g)?;
                let sub = self.subquery(q, scopes, g)?;
                check_arity(t.len(), &sub)?;
                Condition::In(t, Box::new(sub.expr))
            }
            Cond::InList(l, values) => {
                let t = self.terms(l, scopes, g)?;
                let mut alts = Vec::new();
                for v in values {
                    if v.len() != t.len() {
                        return Err(Error::Arity(format!("IN list entry of {} values for {}", v.len(), t.len())));
                    }
                    alts.push(Condition::Compare(t.clone(), CmpOp::Eq, self.terms(v, scopes, g)?));
                }
                Condition::disj(alts)
            }
        })
    }

    /// The body of EXISTS: a plain block is lowered without its SELECT list.
    fn exists_body(&mut self, q: &Query, scopes: &[Scope], g: Option<&GroupCtx>) -> Result<Expression> {
        match (q, g) {
            (Query::Select(s), None) => Ok(self.select(s, scopes, true)?.expr),
            _ => Ok(self.subquery(q, scopes, g)?.expr),
        }
    }

    /// `t op (SELECT agg ...)`: the subquery yields exactly one row, so the
    /// comparison is `t op any(...)`.
    fn scalar_subquery(&mut self, l: &[Scalar], op: CmpOp, q: &Query, scopes: &[Scope], g: Option<&GroupCtx>) -> Result<Condition> {
        let single_row = match q {
            Query::Select(s) => {
                s.group_by.is_empty()
                    && s.having.is_none()
                    && s.items.iter().all(|i| matches!(i, SelectItem::Expr(e, _) if e.has_aggregate()))
            }
            _ => false,
        };
        if !single_row {
            return Err(Error::Unsupported("scalar subquery other than a global aggregate".into()));
        }
        let t = self.terms(l, scopes, g)?;
        let sub = self.subquery(q, scopes, g)?;
        check_arity(t.len(), &sub)?;
        Ok(Condition::Any(t, op, Box::new(sub.expr)))
    }

    fn terms(&mut self, ss: &[Scalar], scopes: &[Scope], g: Option<&GroupCtx>) -> Result<Vec<Term>> {
        ss.iter().map(|s| self.term(s, scopes, g)).collect()
    }

    fn term(&mut self, s: &Scalar, scopes: &[Scope], g: Option<&GroupCtx>) -> Result<Term> {
        Ok(match s {
            Scalar::Num(n) => Term::Num(parse_rational(n)?),
            Scalar::Neg(inner) => match self.term(inner, scopes, g)? {
                Term::Num(r) => Term::Num(-r),
                t => Term::func(Func::Neg, vec![t]),
            },
            Scalar::Str(s) => Term::Ord(s.clone()),
            Scalar::Null => Term::Null,
            Scalar::Bin(op, a, b) => {
                let f = match op {
                    Arith::Add => Func::Add,
                    Arith::Sub => Func::Sub,
                    Arith::Mul => Func::Mult,
                    Arith::Div => Func::Div,
                    Arith::Mod => Func::Mod,
                };
                Term::func(f, vec![self.term(a, scopes, g)?, self.term(b, scopes, g)?])
            }
            Scalar::Col(q, c) => {
                let (i, l) = resolve(q.as_deref(), c, scopes)?;
                if let Some(ctx) = g {
                    if i == ctx.block && !ctx.keys.contains(&l) {
                        return Err(Error::Unsupported(format!("column {l} must appear in GROUP BY or inside an aggregate")));
                    }
                }
                Term::Col(l)
            }
            Scalar::Agg(func, arg) => {
                let ctx = g.ok_or_else(|| Error::Unsupported("aggregate outside SELECT or HAVING".into()))?;
                let column = agg_column(arg.as_deref(), scopes, ctx.block)?;
                let key = agg_key(*func, column);
                let found = ctx.aggs.iter().find(|a| a.func == key.func && a.column == key.column).expect("collected");
                Term::Col(found.output_name())
            }
            Scalar::Subquery(_) => return Err(Error::Unsupported("scalar subquery outside a comparison".into())),
        })
    }
}

fn check_arity(n: usize, sub: &Lowered) -> Result<()> {
    if n == sub.labels.len() {
        Ok(())
    } else {
        Err(Error::Arity(format!("{n} values compared with a subquery of {} columns", sub.labels.len())))
    }
}

fn agg_column(arg: Option<&Scalar>, scopes: &[Scope], block: usize) -> Result<Option<Name>> {
    match arg {
        None => Ok(None),
        Some(Scalar::Col(q, c)) => {
            let (i, l) = resolve(q.as_deref(), c, scopes)?;
            if i != block {
                return Err(Error::Unsupported(format!("aggregate over the outer column {c}")));
            }
            Ok(Some(l))
        }
        Some(_) => Err(Error::Unsupported("aggregate over an expression".into())),
    }
}

fn collect_aggs(s: &Scalar, scopes: &[Scope], block: usize, out: &mut Vec<Aggregate>) -> Result<()> {
    match s {
        Scalar::Agg(f, arg) => {
            let key = agg_key(*f, agg_column(arg.as_deref(), scopes, block)?);
            if !out.iter().any(|a| a.func == key.func && a.column == key.column) {
                out.push(key);
            }
        }
        Scalar::Bin(_, a, b) => {
            collect_aggs(a, scopes, block, out)?;
            collect_aggs(b, scopes, block, out)?;
        }
        Scalar::Neg(a) => collect_aggs(a, scopes, block, out)?,
        _ => {}
    }
    Ok(())
}

/// Visits the scalars of a condition that belong to its own block.
fn for_each_scalar(c: &Cond, f: &mut dyn FnMut(&Scalar) -> Result<()>) -> Result<()> {
    match c {
        Cond::True | Cond::False | Cond::Exists(_) => Ok(()),
        Cond::And(a, b) | Cond::Or(a, b) => {
            for_each_scalar(a, f)?;
            for_each_scalar(b, f)
        }
        Cond::Not(a) => for_each_scalar(a, f),
        Cond::Cmp(l, _, r) => l.iter().chain(r).try_for_each(&mut *f),
        Cond::Quantified(l, ..) | Cond::InQuery(l, _) => l.iter().try_for_each(&mut *f),
        Cond::InList(l, vs) => l.iter().chain(vs.iter().flatten()).try_for_each(&mut *f),
        Cond::IsNull(s) => f(s),
        Cond::Between(a, b, c) => [a, b, c].into_iter().try_for_each(&mut *f),
    }
}

/// Resolves a column reference, innermost scope first. Returns the scope
/// index and the label.
fn resolve(q: Option<&str>, c: &str, scopes: &[Scope]) -> Result<(usize, Name)> {
    let shown = match q {
        Some(q) => format!("{q}.{c}"),
        None => c.to_string(),
    };
    for (i, scope) in scopes.iter().enumerate().rev() {
        let hits: Vec<&Name> = scope
            .iter()
            .filter(|e| q.is_none_or(|q| e.alias == q))
            .flat_map(|e| e.cols.iter().filter(|(n, _)| n == c).map(|(_, l)| l))
            .collect();
        match hits.as_slice() {
            [] => {
                if q.is_some_and(|q| scope.iter().any(|e| e.alias == q)) {
                    return Err(Error::UnresolvedColumn(shown));
                }
            }
            [l] => {
                let shadowed = scopes[i + 1..].iter().flatten().any(|e| e.cols.iter().any(|(_, m)| m == *l));
                if shadowed {
                    return Err(Error::Unsupported(format!("correlated reference {shown} hidden by an inner relation")));
                }
                return Ok((i, (*l).clone()));
            }
            _ => return Err(Error::UnresolvedColumn(format!("{shown} (ambiguous)"))),
        }
    }
    Err(Error::UnresolvedColumn(shown))
}
