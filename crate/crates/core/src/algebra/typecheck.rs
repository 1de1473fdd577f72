//! Labels, type words and validation with automatic renaming of clashing names.

use std::collections::{BTreeSet, HashMap};

use crate::algebra::{AggFunc, Condition, Expression, ProjItem, Term};
use crate::data::Schema;
use crate::error::{Error, Result};
use crate::value::{ColType, Name};

/// Output labels and type word of an expression. A `None` type marks a column
/// that only ever holds NULL constants and is compatible with either type.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Signature {
    pub labels: Vec<Name>,
    pub types: Vec<Option<ColType>>,
}

impl Signature {
    pub fn arity(&self) -> usize {
        self.labels.len()
    }

    fn lookup(&self, n: &Name) -> Option<Option<ColType>> {
        self.labels.iter().position(|l| l == n).map(|i| self.types[i])
    }
}

/// A name changed by the validator to restore uniqueness.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Renaming {
    pub node: &'static str,
    pub from: Name,
    pub to: Name,
}

/// A typechecked expression, possibly with renamings applied.
#[derive(Clone, Debug)]
pub struct Validated {
    pub expr: Expression,
    pub signature: Signature,
    pub renamings: Vec<Renaming>,
}

struct Checker<'a> {
    schema: &'a Schema,
    fix: bool,
    renamings: Vec<Renaming>,
}

fn node_text(e: &Expression) -> String {
    let s = e.to_string();
    if s.len() > 80 {
        let mut cut = 77;
        while !s.is_char_boundary(cut) {
            cut -= 1;
        }
        format!("{}...", &s[..cut])
    } else {
        s
    }
}

fn fresh(base: &Name, used: &BTreeSet<Name>) -> Name {
    (1..)
        .map(|k| Name::from(format!("{base}_{k}")))
        .find(|n| !used.contains(n))
        .expect("unbounded suffixes")
}

fn compatible(a: Option<ColType>, b: Option<ColType>) -> bool {
    match (a, b) {
        (Some(x), Some(y)) => x == y,
        _ => true,
    }
}

impl<'a> Checker<'a> {
    fn term_type(&self, t: &Term, scopes: &[&Signature], node: &Expression) -> Result<Option<ColType>> {
        match t {
            Term::Num(_) => Ok(Some(ColType::Num)),
            Term::Ord(_) => Ok(Some(ColType::Ord)),
            Term::Null => Ok(None),
            Term::Col(n) => scopes
                .iter()
                .rev()
                .find_map(|s| s.lookup(n))
                .ok_or_else(|| Error::ty(node_text(node), format!("unknown name `{n}`"))),
            Term::Fn(f, args) => {
                if args.len() != f.arity() {
                    return Err(Error::Arity(format!("{} expects {} argument(s)", f.name(), f.arity())));
                }
                for a in args {
                    if self.term_type(a, scopes, node)? == Some(ColType::Ord) {
                        return Err(Error::ty(node_text(node), format!("{} applied to an ordinary value", f.name())));
                    }
                }
                Ok(Some(ColType::Num))
            }
        }
    }

    fn check_tuple_cmp(
        &self,
        lt: &[Option<ColType>],
        op: Option<crate::algebra::CmpOp>,
        rt: &[Option<ColType>],
        node: &Expression,
    ) -> Result<()> {
        if lt.len() != rt.len() {
            return Err(Error::Arity(format!("tuples of lengths {} and {} in {}", lt.len(), rt.len(), node_text(node))));
        }
        if lt.is_empty() {
            return Err(Error::Arity("empty tuple".into()));
        }
        for (a, b) in lt.iter().zip(rt) {
            if !compatible(*a, *b) {
                return Err(Error::ty(node_text(node), "comparison between numerical and ordinary values"));
            }
            if op.is_some_and(|o| o.is_order()) && (*a == Some(ColType::Ord) || *b == Some(ColType::Ord)) {
                return Err(Error::ty(node_text(node), "order comparison on ordinary values"));
            }
        }
        Ok(())
    }

    fn condition(
        &mut self,
        c: &Condition,
        scopes: &mut Vec<Signature>,
        mu: &HashMap<Name, Signature>,
        node: &Expression,
    ) -> Result<Condition> {
        let types = |this: &Self, ts: &[Term], scopes: &Vec<Signature>| -> Result<Vec<Option<ColType>>> {
            let refs: Vec<&Signature> = scopes.iter().collect();
            ts.iter().map(|t| this.term_type(t, &refs, node)).collect()
        };
        Ok(match c {
            Condition::True | Condition::False => c.clone(),
            Condition::IsNull(t) => {
                types(self, std::slice::from_ref(t), scopes)?;
                c.clone()
            }
            Condition::Compare(l, op, r) => {
                let lt = types(self, l, scopes)?;
                let rt = types(self, r, scopes)?;
                self.check_tuple_cmp(&lt, Some(*op), &rt, node)?;
                c.clone()
            }
            Condition::In(l, e) | Condition::Any(l, _, e) | Condition::All(l, _, e) => {
                let lt = types(self, l, scopes)?;
                let (e2, sig) = self.expr(e, scopes, mu)?;
                let op = match c {
                    Condition::Any(_, o, _) | Condition::All(_, o, _) => Some(*o),
                    _ => None,
                };
                self.check_tuple_cmp(&lt, op, &sig.types, node)?;
                match c {
                    Condition::In(..) => Condition::In(l.clone(), Box::new(e2)),
                    Condition::Any(_, o, _) => Condition::Any(l.clone(), *o, Box::new(e2)),
                    _ => Condition::All(l.clone(), op.expect("all has an operator"), Box::new(e2)),
                }
            }
            Condition::Empty(e) => Condition::Empty(Box::new(self.expr(e, scopes, mu)?.0)),
            Condition::And(a, b) => Condition::and(self.condition(a, scopes, mu, node)?, self.condition(b, scopes, mu, node)?),
            Condition::Or(a, b) => Condition::or(self.condition(a, scopes, mu, node)?, self.condition(b, scopes, mu, node)?),
            Condition::Not(a) => Condition::not(self.condition(a, scopes, mu, node)?),
        })
    }

    fn dedupe(&mut self, node: &'static str, names: &mut [Name], fixable_from: usize) -> Result<()> {
        let mut used: BTreeSet<Name> = BTreeSet::new();
        let all: BTreeSet<Name> = names.iter().cloned().collect();
        for i in 0..names.len() {
            if used.contains(&names[i]) {
                if !self.fix || i < fixable_from {
                    return Err(Error::DuplicateName(names[i].to_string()));
                }
                let mut avoid = used.clone();
                avoid.extend(all.iter().cloned());
                let to = fresh(&names[i], &avoid);
                self.renamings.push(Renaming { node, from: names[i].clone(), to: to.clone() });
                names[i] = to;
            }
            used.insert(names[i].clone());
        }
        Ok(())
    }

    fn expr(
        &mut self,
        e: &Expression,
        scopes: &mut Vec<Signature>,
        mu: &HashMap<Name, Signature>,
    ) -> Result<(Expression, Signature)> {
        match e {
            Expression::Base(n) => {
                if let Some(sig) = mu.get(n) {
                    return Ok((e.clone(), sig.clone()));
                }
                let rel = self.schema.get(n).ok_or_else(|| Error::UnknownRelation(n.to_string()))?;
                Ok((e.clone(), Signature { labels: rel.labels(n), types: rel.type_word().into_iter().map(Some).collect() }))
            }
            Expression::Project(items, inner) => {
                let (inner2, sig) = self.expr(inner, scopes, mu)?;
                scopes.push(sig);
                let refs: Vec<&Signature> = scopes.iter().collect();
                let types = items.iter().map(|it| self.term_type(&it.term, &refs, e)).collect::<Result<Vec<_>>>();
                scopes.pop();
                let types = types?;
                let mut names: Vec<Name> = items.iter().map(ProjItem::output_name).collect();
                self.dedupe("project", &mut names, 0)?;
                let items2: Vec<ProjItem> = items
                    .iter()
                    .zip(&names)
                    .map(|(it, n)| {
                        if &it.output_name() == n {
                            it.clone()
                        } else {
                            ProjItem { term: it.term.clone(), rename: Some(n.clone()) }
                        }
                    })
                    .collect();
                Ok((Expression::Project(items2, Box::new(inner2)), Signature { labels: names, types }))
            }
            Expression::Select(c, inner) => {
                let (inner2, sig) = self.expr(inner, scopes, mu)?;
                scopes.push(sig.clone());
                let c2 = self.condition(c, scopes, mu, e);
                scopes.pop();
                Ok((Expression::Select(Box::new(c2?), Box::new(inner2)), sig))
            }
            Expression::Product(a, b) => {
                let (a2, sa) = self.expr(a, scopes, mu)?;
                let (mut b2, mut sb) = self.expr(b, scopes, mu)?;
                let left: BTreeSet<Name> = sa.labels.iter().cloned().collect();
                if sb.labels.iter().any(|l| left.contains(l)) {
                    if !self.fix {
                        let dup = sb.labels.iter().find(|l| left.contains(*l)).expect("clash exists");
                        return Err(Error::DuplicateName(dup.to_string()));
                    }
                    let mut used: BTreeSet<Name> = left.clone();
                    used.extend(sb.labels.iter().cloned());
                    let mut items = Vec::new();
                    let mut new_labels = Vec::new();
                    for l in &sb.labels {
                        if left.contains(l) {
                            let to = fresh(l, &used);
                            used.insert(to.clone());
                            self.renamings.push(Renaming { node: "product", from: l.clone(), to: to.clone() });
                            items.push(ProjItem { term: Term::Col(l.clone()), rename: Some(to.clone()) });
                            new_labels.push(to);
                        } else {
                            items.push(ProjItem::plain(Term::Col(l.clone())));
                            new_labels.push(l.clone());
                        }
                    }
                    b2 = Expression::Project(items, Box::new(b2));
                    sb.labels = new_labels;
                }
                let mut labels = sa.labels;
                labels.extend(sb.labels);
                let mut types = sa.types;
                types.extend(sb.types);
                Ok((Expression::product(a2, b2), Signature { labels, types }))
            }
            Expression::UnionAll(a, b) | Expression::IntersectAll(a, b) | Expression::ExceptAll(a, b) => {
                let (a2, sa) = self.expr(a, scopes, mu)?;
                let (b2, sb) = self.expr(b, scopes, mu)?;
                if sa.arity() != sb.arity() {
                    return Err(Error::ty(node_text(e), format!("arities {} and {} differ", sa.arity(), sb.arity())));
                }
                let mut types = Vec::new();
                for (x, y) in sa.types.iter().zip(&sb.types) {
                    if !compatible(*x, *y) {
                        return Err(Error::ty(node_text(e), "type words differ"));
                    }
                    types.push(x.or(*y));
                }
                let rebuilt = match e {
                    Expression::UnionAll(..) => Expression::union_all(a2, b2),
                    Expression::IntersectAll(..) => Expression::intersect_all(a2, b2),
                    _ => Expression::except_all(a2, b2),
                };
                Ok((rebuilt, Signature { labels: sa.labels, types }))
            }
            Expression::Distinct(inner) => {
                let (inner2, sig) = self.expr(inner, scopes, mu)?;
                Ok((Expression::distinct(inner2), sig))
            }
            Expression::Group { keys, aggs, input } => {
                let (input2, sig) = self.expr(input, scopes, mu)?;
                let mut types = Vec::new();
                let mut seen = BTreeSet::new();
                for k in keys {
                    let t = sig.lookup(k).ok_or_else(|| Error::ty(node_text(e), format!("unknown grouping name `{k}`")))?;
                    if !seen.insert(k) {
                        return Err(Error::DuplicateName(k.to_string()));
                    }
                    types.push(t);
                }
                for a in aggs {
                    match (&a.column, a.func) {
                        (None, AggFunc::CountStar) => {}
                        (None, f) => return Err(Error::ty(node_text(e), format!("{} needs a column", f.name()))),
                        (Some(c), f) => {
                            let t = sig.lookup(c).ok_or_else(|| Error::ty(node_text(e), format!("unknown aggregate column `{c}`")))?;
                            if !f.is_count() && t == Some(ColType::Ord) {
                                return Err(Error::ty(node_text(e), format!("{} over the ordinary column `{c}`", f.name())));
                            }
                        }
                    }
                    types.push(Some(ColType::Num));
                }
                let mut names: Vec<Name> = keys.iter().cloned().chain(aggs.iter().map(|a| a.output_name())).collect();
                self.dedupe("group", &mut names, keys.len())?;
                let aggs2 = aggs
                    .iter()
                    .zip(&names[keys.len()..])
                    .map(|(a, n)| {
                        let mut a = a.clone();
                        if &a.output_name() != n {
                            a.rename = Some(n.clone());
                        }
                        a
                    })
                    .collect();
                Ok((Expression::Group { keys: keys.clone(), aggs: aggs2, input: Box::new(input2) }, Signature { labels: names, types }))
            }
            Expression::Mu { name, kind, base, step } => {
                if self.schema.get(name).is_some() || mu.contains_key(name) {
                    return Err(Error::ty(node_text(e), format!("recursive name `{name}` is not fresh")));
                }
                let (base2, sig) = self.expr(base, scopes, mu)?;
                let mut inner = mu.clone();
                inner.insert(name.clone(), sig.clone());
                let (step2, ssig) = self.expr(step, scopes, &inner)?;
                if ssig.arity() != sig.arity() || sig.types.iter().zip(&ssig.types).any(|(a, b)| !compatible(*a, *b)) {
                    return Err(Error::ty(node_text(e), "recursive step does not match the base type word"));
                }
                Ok((
                    Expression::Mu { name: name.clone(), kind: *kind, base: Box::new(base2), step: Box::new(step2) },
                    sig,
                ))
            }
        }
    }
}

/// Computes ℓ(E) and the type word; duplicate names are an error.
pub fn signature(expr: &Expression, schema: &Schema) -> Result<Signature> {
    let mut c = Checker { schema, fix: false, renamings: Vec::new() };
    Ok(c.expr(expr, &mut Vec::new(), &HashMap::new())?.1)
}

/// Output labels ℓ(E).
pub fn labels(expr: &Expression, schema: &Schema) -> Result<Vec<Name>> {
    Ok(signature(expr, schema)?.labels)
}

/// Output type word.
pub fn type_word(expr: &Expression, schema: &Schema) -> Result<Vec<Option<ColType>>> {
    Ok(signature(expr, schema)?.types)
}

/// Validates an expression, renaming clashing names with numeric suffixes.
pub fn typecheck(expr: &Expression, schema: &Schema) -> Result<Validated> {
    let mut c = Checker { schema, fix: true, renamings: Vec::new() };
    let (e, sig) = c.expr(expr, &mut Vec::new(), &HashMap::new())?;
    Ok(Validated { expr: e, signature: sig, renamings: c.renamings })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{parse_expression, Aggregate};
    use crate::data::Column;

    fn schema() -> Schema {
        Schema::new()
            .with("R", vec![Column::new("A", ColType::Num), Column::new("B", ColType::Num)])
            .with("S", vec![Column::new("C", ColType::Num), Column::new("D", ColType::Ord)])
    }

    fn names(v: &[&str]) -> Vec<Name> {
        v.iter().map(|s| Name::new(s)).collect()
    }

    #[test]
    fn product_concatenates() {
        let e = Expression::product(Expression::base("R"), Expression::base("S"));
        assert_eq!(labels(&e, &schema()).unwrap(), names(&["R.A", "R.B", "S.C", "S.D"]));
    }

    #[test]
    fn group_labels() {
        let e = Expression::group(
            &["R.A"],
            vec![Aggregate::new(AggFunc::Count, Some("R.B")).renamed("C"), Aggregate::new(AggFunc::Sum, Some("R.B"))],
            Expression::base("R"),
        );
        assert_eq!(labels(&e, &schema()).unwrap(), names(&["R.A", "C", "sum(R.B)"]));
    }

    #[test]
    fn type_errors() {
        let sum_ord = parse_expression("(group () ((sum S.D)) (base S))").unwrap();
        assert!(matches!(typecheck(&sum_ord, &schema()), Err(Error::Type { .. })));
        let arity = parse_expression("(union-all (base R) (project ((col S.C)) (base S)))").unwrap();
        assert!(matches!(typecheck(&arity, &schema()), Err(Error::Type { .. })));
        let ord_lt = parse_expression("(select (cmp (col S.D) < (ord \"a\")) (base S))").unwrap();
        assert!(matches!(typecheck(&ord_lt, &schema()), Err(Error::Type { .. })));
        let unknown = parse_expression("(base T)").unwrap();
        assert!(matches!(typecheck(&unknown, &schema()), Err(Error::UnknownRelation(_))));
    }

    #[test]
    fn clashes_are_renamed() {
        let e = Expression::product(Expression::base("R"), Expression::base("R"));
        assert!(matches!(labels(&e, &schema()), Err(Error::DuplicateName(_))));
        let v = typecheck(&e, &schema()).unwrap();
        assert_eq!(v.signature.labels, names(&["R.A", "R.B", "R.A_1", "R.B_1"]));
        assert_eq!(v.renamings.len(), 2);
        assert_eq!(labels(&v.expr, &schema()).unwrap(), v.signature.labels);

        let p = parse_expression("(project ((col R.A) (col R.A)) (base R))").unwrap();
        let v = typecheck(&p, &schema()).unwrap();
        assert_eq!(v.signature.labels, names(&["R.A", "R.A_1"]));
    }

    #[test]
    fn mu_checks() {
        let ok = parse_expression(
            "(mu X distinct (project ((as (col R.A) n)) (base R)) (project ((as (fn add (col n) (num 1)) n)) (select (cmp (col n) < (num 3)) (base X))))",
        )
        .unwrap();
        assert_eq!(labels(&ok, &schema()).unwrap(), names(&["n"]));
        let not_fresh = parse_expression("(mu R bag (base S) (base R))").unwrap();
        assert!(typecheck(&not_fresh, &schema()).is_err());
        let base_refers = parse_expression("(mu X bag (base X) (base X))").unwrap();
        assert!(typecheck(&base_refers, &schema()).is_err());
    }

    #[test]
    fn correlated_names_resolve_outward() {
        let e = parse_expression("(select (empty (select (cmp (col S.C) = (col R.A)) (base S))) (base R))").unwrap();
        assert!(typecheck(&e, &schema()).is_ok());
        let bad = parse_expression("(select (cmp (col Z) = (num 1)) (base R))").unwrap();
        assert!(typecheck(&bad, &schema()).is_err());
    }
}
