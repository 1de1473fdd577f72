//! Syntax tree of the SQL subset.

use crate::algebra::{AggFunc, CmpOp};

#[derive(Clone, Debug, PartialEq)]
pub enum Query {
    Select(Box<Select>),
    SetOp { op: SetOp, all: bool, left: Box<Query>, right: Box<Query> },
    With { recursive: bool, ctes: Vec<Cte>, body: Box<Query> },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SetOp {
    Union,
    Intersect,
    Except,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Cte {
    pub name: String,
    pub columns: Vec<String>,
    pub query: Query,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Select {
    pub distinct: bool,
    pub items: Vec<SelectItem>,
    pub from: Vec<FromItem>,
    pub where_: Option<Cond>,
    pub group_by: Vec<Scalar>,
    pub having: Option<Cond>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum SelectItem {
    Star,
    QualifiedStar(String),
    Expr(Scalar, Option<String>),
}

#[derive(Clone, Debug, PartialEq)]
pub enum Source {
    Table(String),
    Derived(Box<Query>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct FromItem {
    pub source: Source,
    pub alias: Option<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Arith {
    Add,
    Sub,
    Mul,
    Div,
    Mod,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Scalar {
    Col(Option<String>, String),
    Num(String),
    Str(String),
    Null,
    Bin(Arith, Box<Scalar>, Box<Scalar>),
    Neg(Box<Scalar>),
    /// `arg` is `None` for `COUNT(*)`.
    Agg(AggFunc, Option<Box<Scalar>>),
    Subquery(Box<Query>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Quantifier {
    Any,
    All,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Cond {
    True,
    False,
    And(Box<Cond>, Box<Cond>),
    Or(Box<Cond>, Box<Cond>),
    Not(Box<Cond>),
    Cmp(Vec<Scalar>, CmpOp, Vec<Scalar>),
    Quantified(Vec<Scalar>, CmpOp, Quantifier, Box<Query>),
    InQuery(Vec<Scalar>, Box<Query>),
    InList(Vec<Scalar>, Vec<Vec<Scalar>>),
    Exists(Box<Query>),
    IsNull(Scalar),
    Between(Scalar, Scalar, Scalar),
}

impl Query {
    /// Names used in FROM clauses anywhere inside the query.
    pub fn mentions_table(&self, name: &str) -> bool {
        match self {
            Query::Select(s) => s.mentions_table(name),
            Query::SetOp { left, right, .. } => left.mentions_table(name) || right.mentions_table(name),
            Query::With { ctes, body, .. } => {
                ctes.iter().any(|c| c.query.mentions_table(name)) || body.mentions_table(name)
            }
        }
    }
}

impl Select {
    fn mentions_table(&self, name: &str) -> bool {
        self.from.iter().any(|f| match &f.source {
            Source::Table(t) => t == name,
            Source::Derived(q) => q.mentions_table(name),
        }) || self.where_.as_ref().is_some_and(|c| c.mentions_table(name))
            || self.having.as_ref().is_some_and(|c| c.mentions_table(name))
            || self.items.iter().any(|i| matches!(i, SelectItem::Expr(s, _) if s.mentions_table(name)))
    }
}

impl Scalar {
    fn mentions_table(&self, name: &str) -> bool {
        match self {
            Scalar::Bin(_, a, b) => a.mentions_table(name) || b.mentions_table(name),
            Scalar::Neg(a) => a.mentions_table(name),
            Scalar::Agg(_, Some(a)) => a.mentions_table(name),
            Scalar::Subquery(q) => q.mentions_table(name),
            _ => false,
        }
    }

    pub fn has_aggregate(&self) -> bool {
        match self {
            Scalar::Agg(..) => true,
            Scalar::Bin(_, a, b) => a.has_aggregate() || b.has_aggregate(),
            Scalar::Neg(a) => a.has_aggregate(),
            _ => false,
        }
    }
}

impl Cond {
    fn mentions_table(&self, name: &str) -> bool {
        let any = |v: &[Scalar]| v.iter().any(|s| s.mentions_table(name));
        match self {
            Cond::True | Cond::False => false,
            Cond::And(a, b) | Cond::Or(a, b) => a.mentions_table(name) || b.mentions_table(name),
            Cond::Not(a) => a.mentions_table(name),
            Cond::Cmp(l, _, r) => any(l) || any(r),
            Cond::Quantified(l, _, _, q) | Cond::InQuery(l, q) => any(l) || q.mentions_table(name),
            Cond::InList(l, vs) => any(l) || vs.iter().any(|v| any(v)),
            Cond::Exists(q) => q.mentions_table(name),
            Cond::IsNull(s) => s.mentions_table(name),
            Cond::Between(a, b, c) => a.mentions_table(name) || b.mentions_table(name) || c.mentions_table(name),
        }
    }

    pub fn has_aggregate(&self) -> bool {
        let any = |v: &[Scalar]| v.iter().any(Scalar::has_aggregate);
        match self {
            Cond::True | Cond::False | Cond::Exists(_) => false,
            Cond::And(a, b) | Cond::Or(a, b) => a.has_aggregate() || b.has_aggregate(),
            Cond::Not(a) => a.has_aggregate(),
            Cond::Cmp(l, _, r) => any(l) || any(r),
            Cond::Quantified(l, ..) | Cond::InQuery(l, _) => any(l),
            Cond::InList(l, vs) => any(l) || vs.iter().any(|v| any(v)),
            Cond::IsNull(s) => s.has_aggregate(),
            Cond::Between(a, b, c) => a.has_aggregate() || b.has_aggregate() || c.has_aggregate(),
        }
    }
}
