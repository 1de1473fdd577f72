//! Abstract syntax of the extended relational algebra with recursion.

mod parse;
mod print;
mod typecheck;

use std::fmt;

pub use parse::{parse_condition, parse_expression, parse_term};
pub use print::{render_condition, render_expression, render_term};
pub use typecheck::{labels, signature, typecheck, type_word, Renaming, Signature, Validated};

use crate::error::{Error, Result};
use crate::data::Schema;
use crate::value::{format_rational, Name, Rational, Value};

/// Comparison predicates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
    Gt,
    Le,
    Ge,
}

impl CmpOp {
    pub const ALL: [CmpOp; 6] = [CmpOp::Eq, CmpOp::Ne, CmpOp::Lt, CmpOp::Gt, CmpOp::Le, CmpOp::Ge];

    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Eq => "=",
            CmpOp::Ne => "<>",
            CmpOp::Lt => "<",
            CmpOp::Gt => ">",
            CmpOp::Le => "<=",
            CmpOp::Ge => ">=",
        }
    }

    pub fn from_symbol(s: &str) -> Option<CmpOp> {
        Some(match s {
            "=" => CmpOp::Eq,
            "<>" | "!=" => CmpOp::Ne,
            "<" => CmpOp::Lt,
            ">" => CmpOp::Gt,
            "<=" => CmpOp::Le,
            ">=" => CmpOp::Ge,
            _ => return None,
        })
    }

    pub fn is_order(self) -> bool {
        !matches!(self, CmpOp::Eq | CmpOp::Ne)
    }

    /// Strict counterpart used at non-final positions of a lexicographic comparison.
    pub fn strict(self) -> CmpOp {
        match self {
            CmpOp::Le => CmpOp::Lt,
            CmpOp::Ge => CmpOp::Gt,
            other => other,
        }
    }

    /// Standard comparison of two non-null values of the same type.
    pub fn holds(self, a: &Value, b: &Value) -> bool {
        match self {
            CmpOp::Eq => a == b,
            CmpOp::Ne => a != b,
            CmpOp::Lt => a < b,
            CmpOp::Gt => a > b,
            CmpOp::Le => a <= b,
            CmpOp::Ge => a >= b,
        }
    }
}

impl fmt::Display for CmpOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

/// Built-in numeric functions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Func {
    Add,
    Sub,
    Mult,
    Div,
    Mod,
    Neg,
}

impl Func {
    pub const ALL: [Func; 6] = [Func::Add, Func::Sub, Func::Mult, Func::Div, Func::Mod, Func::Neg];

    pub fn name(self) -> &'static str {
        match self {
            Func::Add => "add",
            Func::Sub => "sub",
            Func::Mult => "mult",
            Func::Div => "div",
            Func::Mod => "mod",
            Func::Neg => "neg",
        }
    }

    pub fn from_name(s: &str) -> Option<Func> {
        Func::ALL.into_iter().find(|f| f.name() == s)
    }

    pub fn arity(self) -> usize {
        match self {
            Func::Neg => 1,
            _ => 2,
        }
    }

    /// Functions that can return NULL on non-null arguments.
    pub fn may_yield_null(self) -> bool {
        matches!(self, Func::Div | Func::Mod)
    }
}

/// Aggregate functions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum AggFunc {
    Count,
    CountStar,
    Sum,
    Avg,
    Min,
    Max,
}

impl AggFunc {
    pub const ALL: [AggFunc; 6] =
        [AggFunc::Count, AggFunc::CountStar, AggFunc::Sum, AggFunc::Avg, AggFunc::Min, AggFunc::Max];

    pub fn name(self) -> &'static str {
        match self {
            AggFunc::Count => "count",
            AggFunc::CountStar => "count_star",
            AggFunc::Sum => "sum",
            AggFunc::Avg => "avg",
            AggFunc::Min => "min",
            AggFunc::Max => "max",
        }
    }

    pub fn from_name(s: &str) -> Option<AggFunc> {
        AggFunc::ALL.into_iter().find(|f| f.name() == s)
    }

    /// Whether the aggregate can be NULL on a non-empty group.
    pub fn is_count(self) -> bool {
        matches!(self, AggFunc::Count | AggFunc::CountStar)
    }
}

/// A term: constant, name reference or function application.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Term {
    Num(Rational),
    Ord(String),
    Null,
    Col(Name),
    Fn(Func, Vec<Term>),
}

impl Term {
    pub fn col(name: &str) -> Term {
        Term::Col(Name::new(name))
    }

    pub fn int(n: i64) -> Term {
        Term::Num(Rational::from_integer(n.into()))
    }

    pub fn func(f: Func, args: Vec<Term>) -> Term {
        Term::Fn(f, args)
    }

    /// Canonical name of the term, used as the output label of unnamed projections.
    pub fn canonical_name(&self) -> Name {
        Name::from(self.canonical_text())
    }

    fn canonical_text(&self) -> String {
        match self {
            Term::Num(r) => format_rational(r),
            Term::Ord(s) => format!("'{}'", s.replace('\'', "''")),
            Term::Null => "NULL".to_string(),
            Term::Col(n) => n.to_string(),
            Term::Fn(f, args) => {
                let inner: Vec<String> = args.iter().map(Term::canonical_text).collect();
                format!("{}({})", f.name(), inner.join(","))
            }
        }
    }

    /// Calls `f` on every name mentioned by the term.
    pub fn for_each_name<'a>(&'a self, f: &mut dyn FnMut(&'a Name)) {
        match self {
            Term::Col(n) => f(n),
            Term::Fn(_, args) => args.iter().for_each(|a| a.for_each_name(f)),
            _ => {}
        }
    }

    pub fn mentions_null(&self) -> bool {
        match self {
            Term::Null => true,
            Term::Fn(_, args) => args.iter().any(Term::mentions_null),
            _ => false,
        }
    }

    /// Whether the term applies a function that may produce NULL from non-null inputs.
    pub fn has_partial_function(&self) -> bool {
        match self {
            Term::Fn(f, args) => f.may_yield_null() || args.iter().any(Term::has_partial_function),
            _ => false,
        }
    }

    /// Replaces name references according to `f`.
    pub fn substitute(&self, f: &dyn Fn(&Name) -> Option<Term>) -> Term {
        match self {
            Term::Col(n) => f(n).unwrap_or_else(|| self.clone()),
            Term::Fn(func, args) => Term::Fn(*func, args.iter().map(|a| a.substitute(f)).collect()),
            _ => self.clone(),
        }
    }

    pub fn size(&self) -> usize {
        match self {
            Term::Fn(_, args) => 1 + args.iter().map(Term::size).sum::<usize>(),
            _ => 1,
        }
    }
}

/// An aggregate in a `Group` node: function, column and optional output name.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Aggregate {
    pub func: AggFunc,
    /// `None` only for `count_star`.
    pub column: Option<Name>,
    pub rename: Option<Name>,
}

impl Aggregate {
    pub fn new(func: AggFunc, column: Option<&str>) -> Self {
        Aggregate { func, column: column.map(Name::new), rename: None }
    }

    pub fn renamed(mut self, to: &str) -> Self {
        self.rename = Some(Name::new(to));
        self
    }

    pub fn canonical_name(&self) -> Name {
        match (&self.column, self.func) {
            (_, AggFunc::CountStar) | (None, _) => Name::new("count(*)"),
            (Some(c), f) => Name::from(format!("{}({})", f.name(), c)),
        }
    }

    pub fn output_name(&self) -> Name {
        self.rename.clone().unwrap_or_else(|| self.canonical_name())
    }
}

/// A projection item: a term with an optional new name.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ProjItem {
    pub term: Term,
    pub rename: Option<Name>,
}

impl ProjItem {
    pub fn plain(term: Term) -> Self {
        ProjItem { term, rename: None }
    }

    pub fn renamed(term: Term, to: &str) -> Self {
        ProjItem { term, rename: Some(Name::new(to)) }
    }

    pub fn output_name(&self) -> Name {
        self.rename.clone().unwrap_or_else(|| self.term.canonical_name())
    }
}

/// Kind of union used by a recursive definition.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum MuKind {
    /// Bag union: every round's result is added.
    Bag,
    /// Distinct union: rounds are deduplicated and only new records are added.
    Distinct,
}

/// Selection conditions.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Condition {
    True,
    False,
    IsNull(Term),
    Compare(Vec<Term>, CmpOp, Vec<Term>),
    In(Vec<Term>, Box<Expression>),
    Empty(Box<Expression>),
    Any(Vec<Term>, CmpOp, Box<Expression>),
    All(Vec<Term>, CmpOp, Box<Expression>),
    And(Box<Condition>, Box<Condition>),
    Or(Box<Condition>, Box<Condition>),
    Not(Box<Condition>),
}

impl Condition {
    pub fn cmp(l: Term, op: CmpOp, r: Term) -> Condition {
        Condition::Compare(vec![l], op, vec![r])
    }

    pub fn is_null(t: Term) -> Condition {
        Condition::IsNull(t)
    }

    pub fn and(a: Condition, b: Condition) -> Condition {
        Condition::And(Box::new(a), Box::new(b))
    }

    pub fn or(a: Condition, b: Condition) -> Condition {
        Condition::Or(Box::new(a), Box::new(b))
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(a: Condition) -> Condition {
        Condition::Not(Box::new(a))
    }

    pub fn empty(e: Expression) -> Condition {
        Condition::Empty(Box::new(e))
    }

    /// Left-nested conjunction; `True` when empty.
    pub fn conj(items: impl IntoIterator<Item = Condition>) -> Condition {
        let mut it = items.into_iter();
        match it.next() {
            None => Condition::True,
            Some(first) => it.fold(first, Condition::and),
        }
    }

    /// Left-nested disjunction; `False` when empty.
    pub fn disj(items: impl IntoIterator<Item = Condition>) -> Condition {
        let mut it = items.into_iter();
        match it.next() {
            None => Condition::False,
            Some(first) => it.fold(first, Condition::or),
        }
    }

    pub fn size(&self) -> usize {
        let terms = |ts: &[Term]| ts.iter().map(Term::size).sum::<usize>();
        1 + match self {
            Condition::True | Condition::False => 0,
            Condition::IsNull(t) => t.size(),
            Condition::Compare(l, _, r) => terms(l) + terms(r),
            Condition::In(l, e) | Condition::Any(l, _, e) | Condition::All(l, _, e) => terms(l) + e.size(),
            Condition::Empty(e) => e.size(),
            Condition::And(a, b) | Condition::Or(a, b) => a.size() + b.size(),
            Condition::Not(a) => a.size(),
        }
    }

    /// Whether the constant NULL occurs anywhere inside, including nested subqueries.
    pub fn mentions_null(&self) -> bool {
        let terms = |ts: &[Term]| ts.iter().any(Term::mentions_null);
        match self {
            Condition::True | Condition::False => false,
            Condition::IsNull(t) => t.mentions_null(),
            Condition::Compare(l, _, r) => terms(l) || terms(r),
            Condition::In(l, e) | Condition::Any(l, _, e) | Condition::All(l, _, e) => terms(l) || e.mentions_null(),
            Condition::Empty(e) => e.mentions_null(),
            Condition::And(a, b) | Condition::Or(a, b) => a.mentions_null() || b.mentions_null(),
            Condition::Not(a) => a.mentions_null(),
        }
    }
}

/// Relational expressions.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Expression {
    Base(Name),
    Project(Vec<ProjItem>, Box<Expression>),
    Select(Box<Condition>, Box<Expression>),
    Product(Box<Expression>, Box<Expression>),
    UnionAll(Box<Expression>, Box<Expression>),
    IntersectAll(Box<Expression>, Box<Expression>),
    ExceptAll(Box<Expression>, Box<Expression>),
    Distinct(Box<Expression>),
    Group { keys: Vec<Name>, aggs: Vec<Aggregate>, input: Box<Expression> },
    Mu { name: Name, kind: MuKind, base: Box<Expression>, step: Box<Expression> },
}

impl Expression {
    pub fn base(name: &str) -> Expression {
        Expression::Base(Name::new(name))
    }

    pub fn project(items: Vec<ProjItem>, e: Expression) -> Expression {
        Expression::Project(items, Box::new(e))
    }

    /// Projection onto plain name references.
    pub fn project_cols(cols: &[&str], e: Expression) -> Expression {
        Expression::project(cols.iter().map(|c| ProjItem::plain(Term::col(c))).collect(), e)
    }

    pub fn select(c: Condition, e: Expression) -> Expression {
        Expression::Select(Box::new(c), Box::new(e))
    }

    pub fn product(a: Expression, b: Expression) -> Expression {
        Expression::Product(Box::new(a), Box::new(b))
    }

    pub fn union_all(a: Expression, b: Expression) -> Expression {
        Expression::UnionAll(Box::new(a), Box::new(b))
    }

    pub fn intersect_all(a: Expression, b: Expression) -> Expression {
        Expression::IntersectAll(Box::new(a), Box::new(b))
    }

    pub fn except_all(a: Expression, b: Expression) -> Expression {
        Expression::ExceptAll(Box::new(a), Box::new(b))
    }

    pub fn distinct(e: Expression) -> Expression {
        Expression::Distinct(Box::new(e))
    }

    pub fn group(keys: &[&str], aggs: Vec<Aggregate>, e: Expression) -> Expression {
        Expression::Group { keys: keys.iter().map(|k| Name::new(k)).collect(), aggs, input: Box::new(e) }
    }

    pub fn mu(name: &str, kind: MuKind, base: Expression, step: Expression) -> Expression {
        Expression::Mu { name: Name::new(name), kind, base: Box::new(base), step: Box::new(step) }
    }

    /// Parse-tree node count, including conditions, terms and nested expressions.
    pub fn size(&self) -> usize {
        1 + match self {
            Expression::Base(_) => 0,
            Expression::Project(items, e) => items.iter().map(|i| i.term.size()).sum::<usize>() + e.size(),
            Expression::Select(c, e) => c.size() + e.size(),
            Expression::Product(a, b)
            | Expression::UnionAll(a, b)
            | Expression::IntersectAll(a, b)
            | Expression::ExceptAll(a, b) => a.size() + b.size(),
            Expression::Distinct(e) => e.size(),
            Expression::Group { input, .. } => input.size(),
            Expression::Mu { base, step, .. } => base.size() + step.size(),
        }
    }

    pub fn mentions_null(&self) -> bool {
        match self {
            Expression::Base(_) => false,
            Expression::Project(items, e) => items.iter().any(|i| i.term.mentions_null()) || e.mentions_null(),
            Expression::Select(c, e) => c.mentions_null() || e.mentions_null(),
            Expression::Product(a, b)
            | Expression::UnionAll(a, b)
            | Expression::IntersectAll(a, b)
            | Expression::ExceptAll(a, b)
            | Expression::Mu { base: a, step: b, .. } => a.mentions_null() || b.mentions_null(),
            Expression::Distinct(e) | Expression::Group { input: e, .. } => e.mentions_null(),
        }
    }

    /// Short keyword naming the node kind, used in diagnostics and traces.
    pub fn kind(&self) -> &'static str {
        match self {
            Expression::Base(_) => "base",
            Expression::Project(..) => "project",
            Expression::Select(..) => "select",
            Expression::Product(..) => "product",
            Expression::UnionAll(..) => "union-all",
            Expression::IntersectAll(..) => "intersect-all",
            Expression::ExceptAll(..) => "except-all",
            Expression::Distinct(..) => "distinct",
            Expression::Group { .. } => "group",
            Expression::Mu { .. } => "mu",
        }
    }
}

impl fmt::Display for Expression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&render_expression(self))
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&render_condition(self))
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&render_term(self))
    }
}

/// Output labels computed from the shape of `e` alone, without checking
/// conditions. `bound` lists relation names introduced by enclosing recursive
/// definitions, innermost last.
pub fn output_labels(e: &Expression, schema: &Schema, bound: &[(Name, Vec<Name>)]) -> Result<Vec<Name>> {
    Ok(match e {
        Expression::Base(n) => match bound.iter().rev().find(|(b, _)| b == n) {
            Some((_, labels)) => labels.clone(),
            None => schema.labels(n).ok_or_else(|| Error::UnknownRelation(n.to_string()))?,
        },
        Expression::Project(items, _) => items.iter().map(ProjItem::output_name).collect(),
        Expression::Select(_, inner) | Expression::Distinct(inner) => output_labels(inner, schema, bound)?,
        Expression::Product(a, b) => {
            let mut l = output_labels(a, schema, bound)?;
            l.extend(output_labels(b, schema, bound)?);
            l
        }
        Expression::UnionAll(a, _) | Expression::IntersectAll(a, _) | Expression::ExceptAll(a, _) => {
            output_labels(a, schema, bound)?
        }
        Expression::Group { keys, aggs, .. } => keys.iter().cloned().chain(aggs.iter().map(Aggregate::output_name)).collect(),
        Expression::Mu { base, .. } => output_labels(base, schema, bound)?,
    })
}

/// Spells out a tuple comparison as a Boolean combination of atomic comparisons.
///
/// `=` becomes a conjunction and `<>` a disjunction of component comparisons.
/// Order comparisons are lexicographic: strict at every position but the
/// last, which uses the operator itself.
pub fn expand_tuple_comparison(lhs: &[Term], op: CmpOp, rhs: &[Term]) -> Result<Condition> {
    if lhs.len() != rhs.len() {
        return Err(Error::Arity(format!("tuple comparison of lengths {} and {}", lhs.len(), rhs.len())));
    }
    if lhs.is_empty() {
        return Err(Error::Arity("tuple comparison of length 0".into()));
    }
    let atom = |i: usize, o: CmpOp| Condition::cmp(lhs[i].clone(), o, rhs[i].clone());
    let n = lhs.len();
    Ok(match op {
        CmpOp::Eq => Condition::conj((0..n).map(|i| atom(i, CmpOp::Eq))),
        CmpOp::Ne => Condition::disj((0..n).map(|i| atom(i, CmpOp::Ne))),
        _ => Condition::disj((0..n).map(|i| {
            let last = if i + 1 == n { op } else { op.strict() };
            Condition::conj((0..i).map(|j| atom(j, CmpOp::Eq)).chain(std::iter::once(atom(i, last))))
        })),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sizes() {
        assert_eq!(Expression::base("R").size(), 1);
        assert_eq!(Expression::select(Condition::True, Expression::base("R")).size(), 3);
    }

    #[test]
    fn expansion() {
        let x = [Term::col("x1"), Term::col("x2")];
        let y = [Term::col("y1"), Term::col("y2")];
        let eq = expand_tuple_comparison(&x, CmpOp::Eq, &y).unwrap();
        assert_eq!(eq.to_string(), "(and (cmp (col x1) = (col y1)) (cmp (col x2) = (col y2)))");
        let lt = expand_tuple_comparison(&x, CmpOp::Lt, &y).unwrap();
        assert_eq!(
            lt.to_string(),
            "(or (cmp (col x1) < (col y1)) (and (cmp (col x1) = (col y1)) (cmp (col x2) < (col y2))))"
        );
        let one = expand_tuple_comparison(&x[..1], CmpOp::Le, &y[..1]).unwrap();
        assert_eq!(one, Condition::cmp(Term::col("x1"), CmpOp::Le, Term::col("y1")));
        assert!(expand_tuple_comparison(&x, CmpOp::Eq, &y[..1]).is_err());
    }

    #[test]
    fn canonical_names() {
        let t = Term::func(Func::Add, vec![Term::col("A"), Term::int(2)]);
        assert_eq!(t.canonical_name().as_str(), "add(A,2)");
        assert_eq!(Aggregate::new(AggFunc::Sum, Some("B")).canonical_name().as_str(), "sum(B)");
        assert_eq!(Aggregate::new(AggFunc::CountStar, None).canonical_name().as_str(), "count(*)");
    }
}
