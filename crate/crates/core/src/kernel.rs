//! Truth-value systems: connective tables, null comparison rules, groundings
//! and the periodicity data used by the counting translation.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::Deserialize;

use crate::algebra::{parse_condition, CmpOp, Condition, Term};
use crate::data::Schema;
use crate::env::Environment;
use crate::error::{Error, KernelError, Result};
use crate::eval::{eval_condition, EvalConfig};
use crate::value::{Name, Value};

/// Index into a kernel's value set.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TruthValue(pub u8);

/// Binary connectives that can be folded.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Connective {
    And,
    Or,
}

/// Which arguments of a binary comparison are NULL.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum NullPattern {
    /// Only the left argument.
    Left,
    /// Only the right argument.
    Right,
    Both,
}

impl NullPattern {
    pub const ALL: [NullPattern; 3] = [NullPattern::Left, NullPattern::Right, NullPattern::Both];

    pub fn of(l: &Value, r: &Value) -> Option<NullPattern> {
        match (l.is_null(), r.is_null()) {
            (false, false) => None,
            (true, false) => Some(NullPattern::Left),
            (false, true) => Some(NullPattern::Right),
            (true, true) => Some(NullPattern::Both),
        }
    }

    pub fn key(self) -> &'static str {
        match self {
            NullPattern::Left => "left",
            NullPattern::Right => "right",
            NullPattern::Both => "both",
        }
    }

    fn from_key(s: &str) -> Option<NullPattern> {
        NullPattern::ALL.into_iter().find(|p| p.key() == s)
    }

    /// 1-based positions that are NULL.
    pub fn null_positions(self) -> &'static [usize] {
        match self {
            NullPattern::Left => &[1],
            NullPattern::Right => &[2],
            NullPattern::Both => &[1, 2],
        }
    }
}

/// Hole names used by condition templates.
pub const HOLE_LEFT: &str = "$1";
pub const HOLE_RIGHT: &str = "$2";

/// Substitutes the template holes `$1`/`$2` by the given terms.
pub fn instantiate(template: &Condition, left: &Term, right: &Term) -> Condition {
    let sub = |t: &Term| {
        t.substitute(&|n: &Name| match n.as_str() {
            HOLE_LEFT => Some(left.clone()),
            HOLE_RIGHT => Some(right.clone()),
            _ => None,
        })
    };
    fn walk(c: &Condition, sub: &dyn Fn(&Term) -> Term) -> Condition {
        match c {
            Condition::True | Condition::False => c.clone(),
            Condition::IsNull(t) => Condition::IsNull(sub(t)),
            Condition::Compare(l, op, r) => Condition::Compare(l.iter().map(sub).collect(), *op, r.iter().map(sub).collect()),
            Condition::In(l, e) => Condition::In(l.iter().map(sub).collect(), e.clone()),
            Condition::Any(l, op, e) => Condition::Any(l.iter().map(sub).collect(), *op, e.clone()),
            Condition::All(l, op, e) => Condition::All(l.iter().map(sub).collect(), *op, e.clone()),
            Condition::Empty(e) => Condition::Empty(e.clone()),
            Condition::And(a, b) => Condition::and(walk(a, sub), walk(b, sub)),
            Condition::Or(a, b) => Condition::or(walk(a, sub), walk(b, sub)),
            Condition::Not(a) => Condition::not(walk(a, sub)),
        }
    }
    walk(template, &sub)
}

/// Decides membership of a null pattern in a grounding, given the non-null
/// argument (`None` when both arguments are NULL).
pub type Decider = Arc<dyn Fn(Option<&Value>) -> bool + Send + Sync>;

/// One grounding cell: gr(ω, I) as a decider plus its witnessing template.
#[derive(Clone)]
pub struct GroundRule {
    pub decider: Decider,
    pub template: Condition,
}

/// A grounding for binary comparisons; absent cells are empty.
#[derive(Clone)]
pub struct Grounding {
    pub name: String,
    rules: BTreeMap<(CmpOp, NullPattern), GroundRule>,
}

impl fmt::Debug for Grounding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let cells: BTreeMap<String, String> = self
            .rules
            .iter()
            .map(|((op, p), r)| (format!("{op} {}", p.key()), r.template.to_string()))
            .collect();
        f.debug_struct("Grounding").field("name", &self.name).field("cells", &cells).finish()
    }
}

fn hole(n: &str) -> Term {
    Term::col(n)
}

impl Grounding {
    /// All groundings empty: every comparison involving NULL is false.
    pub fn empty() -> Self {
        Grounding { name: "empty".into(), rules: BTreeMap::new() }
    }

    /// NULL = NULL holds; nothing else involving NULL does.
    pub fn syntactic_equality() -> Self {
        let mut rules = BTreeMap::new();
        rules.insert(
            (CmpOp::Eq, NullPattern::Both),
            GroundRule { decider: Arc::new(|_| true), template: Condition::True },
        );
        Grounding { name: "syntactic-equality".into(), rules }
    }

    /// NULL <= n for n >= 0, n <= NULL for n < 0, and NULL <= NULL.
    pub fn le_example() -> Self {
        let zero = Value::int(0);
        let z1 = zero.clone();
        let mut rules = BTreeMap::new();
        rules.insert(
            (CmpOp::Le, NullPattern::Left),
            GroundRule {
                decider: Arc::new(move |v| v.is_some_and(|v| v >= &z1)),
                template: Condition::and(
                    Condition::not(Condition::is_null(hole(HOLE_RIGHT))),
                    Condition::cmp(hole(HOLE_RIGHT), CmpOp::Ge, Term::int(0)),
                ),
            },
        );
        rules.insert(
            (CmpOp::Le, NullPattern::Right),
            GroundRule {
                decider: Arc::new(move |v| v.is_some_and(|v| v < &zero)),
                template: Condition::and(
                    Condition::not(Condition::is_null(hole(HOLE_LEFT))),
                    Condition::cmp(hole(HOLE_LEFT), CmpOp::Lt, Term::int(0)),
                ),
            },
        );
        rules.insert(
            (CmpOp::Le, NullPattern::Both),
            GroundRule { decider: Arc::new(|_| true), template: Condition::True },
        );
        Grounding { name: "le-example".into(), rules }
    }

    /// Builds a grounding whose deciders evaluate the templates themselves.
    pub fn from_templates(name: &str, cells: Vec<(CmpOp, NullPattern, Condition)>) -> Result<Self, KernelError> {
        let mut rules = BTreeMap::new();
        for (op, p, template) in cells {
            check_template_shape(&template, op, p.key(), p.null_positions())?;
            let t = template.clone();
            let decider: Decider = Arc::new(move |v| {
                let env = match (p, v) {
                    (NullPattern::Left, Some(v)) => Environment::new().bind(Name::new(HOLE_RIGHT), v.clone()),
                    (NullPattern::Right, Some(v)) => Environment::new().bind(Name::new(HOLE_LEFT), v.clone()),
                    _ => Environment::new(),
                };
                eval_template(&t, &env) == Some(true)
            });
            rules.insert((op, p), GroundRule { decider, template });
        }
        let g = Grounding { name: name.to_string(), rules };
        g.validate()?;
        Ok(g)
    }

    pub fn rule(&self, op: CmpOp, p: NullPattern) -> Option<&GroundRule> {
        self.rules.get(&(op, p))
    }

    /// Template θ_{ω,I}; empty cells give `false`.
    pub fn template(&self, op: CmpOp, p: NullPattern) -> Condition {
        self.rule(op, p).map(|r| r.template.clone()).unwrap_or(Condition::False)
    }

    pub fn decide(&self, op: CmpOp, l: &Value, r: &Value) -> bool {
        let Some(p) = NullPattern::of(l, r) else {
            return op.holds(l, r);
        };
        let other = match p {
            NullPattern::Left => Some(r),
            NullPattern::Right => Some(l),
            NullPattern::Both => None,
        };
        self.rule(op, p).is_some_and(|rule| (rule.decider)(other))
    }

    /// Checks template shape and that decider and template agree on a value grid.
    pub fn validate(&self) -> Result<(), KernelError> {
        for ((op, p), rule) in &self.rules {
            check_template_shape(&rule.template, *op, p.key(), p.null_positions())?;
            for v in grid_values(*op) {
                let (env, other) = match p {
                    NullPattern::Left => (Environment::new().bind(Name::new(HOLE_RIGHT), v.clone()), Some(&v)),
                    NullPattern::Right => (Environment::new().bind(Name::new(HOLE_LEFT), v.clone()), Some(&v)),
                    NullPattern::Both => (Environment::new(), None),
                };
                let by_template = eval_template(&rule.template, &env).ok_or_else(|| KernelError::BadTemplate {
                    op: op.to_string(),
                    case: p.key().into(),
                    message: format!("does not evaluate to true or false at {v}"),
                })?;
                if by_template != (rule.decider)(other) {
                    return Err(KernelError::BadTemplate {
                        op: op.to_string(),
                        case: p.key().into(),
                        message: format!("template and grounding disagree at {v}"),
                    });
                }
            }
        }
        Ok(())
    }
}

fn grid_values(op: CmpOp) -> Vec<Value> {
    let mut v: Vec<Value> = [-2, -1, 0, 1, 2, 3].into_iter().map(Value::int).collect();
    v.push(Value::parse_num("1/2").expect("literal"));
    if !op.is_order() {
        v.push(Value::ord("a"));
        v.push(Value::ord("b"));
    }
    v
}

/// Templates may only mention holes, must not mention nulls at the given
/// positions or the NULL constant, and cannot contain subqueries.
fn check_template_shape(t: &Condition, op: CmpOp, case: &str, null_positions: &[usize]) -> Result<(), KernelError> {
    let bad = |message: String| KernelError::BadTemplate { op: op.to_string(), case: case.to_string(), message };
    if t.mentions_null() {
        return Err(bad("mentions the NULL constant".into()));
    }
    let mut problem = None;
    fn visit(c: &Condition, f: &mut dyn FnMut(&Term), sub: &mut bool) {
        match c {
            Condition::True | Condition::False => {}
            Condition::IsNull(t) => f(t),
            Condition::Compare(l, _, r) => l.iter().chain(r).for_each(&mut *f),
            Condition::In(..) | Condition::Any(..) | Condition::All(..) | Condition::Empty(_) => *sub = true,
            Condition::And(a, b) | Condition::Or(a, b) => {
                visit(a, f, sub);
                visit(b, f, sub);
            }
            Condition::Not(a) => visit(a, f, sub),
        }
    }
    let mut sub = false;
    visit(
        t,
        &mut |term: &Term| {
            term.for_each_name(&mut |n| {
                let pos = match n.as_str() {
                    HOLE_LEFT => 1,
                    HOLE_RIGHT => 2,
                    other => {
                        problem.get_or_insert(format!("mentions `{other}`, not a hole"));
                        return;
                    }
                };
                if null_positions.contains(&pos) {
                    problem.get_or_insert(format!("mentions the null position ${pos}"));
                }
            })
        },
        &mut sub,
    );
    if sub {
        return Err(bad("contains a subquery".into()));
    }
    match problem {
        Some(p) => Err(bad(p)),
        None => Ok(()),
    }
}

/// Evaluates a subquery-free template under SQL's three-valued logic;
/// `None` when the result is unknown.
fn eval_template(t: &Condition, env: &Environment) -> Option<bool> {
    let k = kleene_bare();
    let db = crate::data::Database::empty(Schema::new());
    let cfg = EvalConfig::new(k.clone());
    let v = eval_condition(t, &db, env, &cfg).ok()?;
    if v == k.t() {
        Some(true)
    } else if v == k.f() {
        Some(false)
    } else {
        None
    }
}

/// How comparisons with NULL arguments are decided.
#[derive(Clone, Debug)]
pub enum ComparisonRule {
    /// A fixed truth value per comparison and null pattern.
    Constant(BTreeMap<(CmpOp, NullPattern), TruthValue>),
    /// Two-valued membership in a grounding.
    Grounded(Grounding),
}

/// A finite truth-value system with its connectives and comparison semantics.
#[derive(Clone)]
pub struct LogicKernel {
    name: String,
    values: Vec<String>,
    t: TruthValue,
    f: TruthValue,
    and: Vec<Vec<TruthValue>>,
    or: Vec<Vec<TruthValue>>,
    not: Vec<TruthValue>,
    rule: ComparisonRule,
    expressibility: BTreeMap<(CmpOp, TruthValue), Condition>,
    and_absorbing: Vec<Option<TruthValue>>,
    or_absorbing: Vec<Option<TruthValue>>,
}

impl fmt::Debug for LogicKernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LogicKernel").field("name", &self.name).field("values", &self.values).finish()
    }
}

fn absorbing(table: &[Vec<TruthValue>]) -> Vec<Option<TruthValue>> {
    table.iter().map(|row| row.iter().all(|v| *v == row[0]).then_some(row[0])).collect()
}

/// Kleene tables with t=0, f=1, u=2.
fn kleene_tables() -> (Vec<Vec<TruthValue>>, Vec<Vec<TruthValue>>, Vec<TruthValue>) {
    let (t, f, u) = (TruthValue(0), TruthValue(1), TruthValue(2));
    let and = vec![vec![t, f, u], vec![f, f, f], vec![u, f, u]];
    let or = vec![vec![t, t, t], vec![t, f, u], vec![t, u, u]];
    (and, or, vec![f, t, u])
}

fn constant_rule(v: TruthValue) -> ComparisonRule {
    let mut m = BTreeMap::new();
    for op in CmpOp::ALL {
        for p in NullPattern::ALL {
            m.insert((op, p), v);
        }
    }
    ComparisonRule::Constant(m)
}

/// Kleene kernel without expressibility data, used to evaluate templates.
fn kleene_bare() -> LogicKernel {
    let (and, or, not) = kleene_tables();
    LogicKernel::assemble("3vl", vec!["t".into(), "f".into(), "u".into()], and, or, not, constant_rule(TruthValue(2)))
}

fn boolean_tables() -> (Vec<Vec<TruthValue>>, Vec<Vec<TruthValue>>, Vec<TruthValue>) {
    let (t, f) = (TruthValue(0), TruthValue(1));
    (vec![vec![t, f], vec![f, f]], vec![vec![t, t], vec![t, f]], vec![f, t])
}

impl LogicKernel {
    fn assemble(
        name: &str,
        values: Vec<String>,
        and: Vec<Vec<TruthValue>>,
        or: Vec<Vec<TruthValue>>,
        not: Vec<TruthValue>,
        rule: ComparisonRule,
    ) -> LogicKernel {
        LogicKernel {
            name: name.to_string(),
            values,
            t: TruthValue(0),
            f: TruthValue(1),
            and_absorbing: absorbing(&and),
            or_absorbing: absorbing(&or),
            and,
            or,
            not,
            rule,
            expressibility: BTreeMap::new(),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn values(&self) -> &[String] {
        &self.values
    }

    pub fn truth_values(&self) -> impl Iterator<Item = TruthValue> + '_ {
        (0..self.values.len()).map(|i| TruthValue(i as u8))
    }

    pub fn t(&self) -> TruthValue {
        self.t
    }

    pub fn f(&self) -> TruthValue {
        self.f
    }

    pub fn value_name(&self, v: TruthValue) -> &str {
        &self.values[v.0 as usize]
    }

    pub fn value_by_name(&self, name: &str) -> Option<TruthValue> {
        self.values.iter().position(|v| v == name).map(|i| TruthValue(i as u8))
    }

    pub fn and(&self, a: TruthValue, b: TruthValue) -> TruthValue {
        self.and[a.0 as usize][b.0 as usize]
    }

    pub fn or(&self, a: TruthValue, b: TruthValue) -> TruthValue {
        self.or[a.0 as usize][b.0 as usize]
    }

    pub fn not(&self, a: TruthValue) -> TruthValue {
        self.not[a.0 as usize]
    }

    pub fn apply(&self, c: Connective, a: TruthValue, b: TruthValue) -> TruthValue {
        match c {
            Connective::And => self.and(a, b),
            Connective::Or => self.or(a, b),
        }
    }

    /// Value `a` absorbs every right operand of `c`, if so the result.
    pub fn absorbs(&self, c: Connective, a: TruthValue) -> Option<TruthValue> {
        match c {
            Connective::And => self.and_absorbing[a.0 as usize],
            Connective::Or => self.or_absorbing[a.0 as usize],
        }
    }

    pub fn from_bool(&self, b: bool) -> TruthValue {
        if b {
            self.t
        } else {
            self.f
        }
    }

    pub fn rule(&self) -> &ComparisonRule {
        &self.rule
    }

    pub fn grounding(&self) -> Option<&Grounding> {
        match &self.rule {
            ComparisonRule::Grounded(g) => Some(g),
            ComparisonRule::Constant(_) => None,
        }
    }

    /// Truth value of an atomic comparison `l op r`.
    pub fn compare(&self, op: CmpOp, l: &Value, r: &Value) -> TruthValue {
        match NullPattern::of(l, r) {
            None => self.from_bool(op.holds(l, r)),
            Some(p) => match &self.rule {
                ComparisonRule::Constant(m) => m[&(op, p)],
                ComparisonRule::Grounded(g) => self.from_bool(g.decide(op, l, r)),
            },
        }
    }

    /// θ_{ω,τ}: a three-valued condition over holes `$1`, `$2` that is true
    /// exactly when `$1 ω $2` has value τ in this kernel.
    pub fn template(&self, op: CmpOp, v: TruthValue) -> Option<&Condition> {
        self.expressibility.get(&(op, v))
    }

    /// Exhaustive law checks: commutativity, associativity, Boolean restriction.
    pub fn check_laws(&self) -> Result<(), KernelError> {
        let n = self.values.len();
        let name = |i: usize| self.values[i].clone();
        for (label, table) in [("and", &self.and), ("or", &self.or)] {
            for a in 0..n {
                for b in 0..n {
                    if table[a][b] != table[b][a] {
                        return Err(KernelError::NotCommutative { table: label, a: name(a), b: name(b) });
                    }
                }
            }
            for a in 0..n {
                for b in 0..n {
                    for c in 0..n {
                        let l = table[table[a][b].0 as usize][c];
                        let r = table[a][table[b][c].0 as usize];
                        if l != r {
                            return Err(KernelError::NotAssociative { table: label, a: name(a), b: name(b), c: name(c) });
                        }
                    }
                }
            }
        }
        let (t, f) = (self.t, self.f);
        for a in [t, f] {
            for b in [t, f] {
                let (at, bt) = (a == t, b == t);
                if self.and(a, b) != self.from_bool(at && bt) {
                    return Err(KernelError::NotBoolean { table: "and", a: name(a.0 as usize), b: name(b.0 as usize) });
                }
                if self.or(a, b) != self.from_bool(at || bt) {
                    return Err(KernelError::NotBoolean { table: "or", a: name(a.0 as usize), b: name(b.0 as usize) });
                }
            }
        }
        if self.not(t) != f || self.not(f) != t {
            return Err(KernelError::NotBoolean { table: "not", a: name(t.0 as usize), b: name(f.0 as usize) });
        }
        Ok(())
    }

    /// Derives θ_{ω,τ} for a constant null rule.
    fn derive_expressibility(&mut self) {
        let ComparisonRule::Constant(m) = &self.rule else { return };
        let l = hole(HOLE_LEFT);
        let r = hole(HOLE_RIGHT);
        let null_case = |p: NullPattern| {
            let isn = |t: &Term, yes: bool| {
                let c = Condition::is_null(t.clone());
                if yes {
                    c
                } else {
                    Condition::not(c)
                }
            };
            match p {
                NullPattern::Left => Condition::and(isn(&l, true), isn(&r, false)),
                NullPattern::Right => Condition::and(isn(&l, false), isn(&r, true)),
                NullPattern::Both => Condition::and(isn(&l, true), isn(&r, true)),
            }
        };
        let mut out = BTreeMap::new();
        for op in CmpOp::ALL {
            for v in self.truth_values() {
                let mut parts = Vec::new();
                if v == self.t {
                    parts.push(Condition::cmp(l.clone(), op, r.clone()));
                }
                if v == self.f {
                    parts.push(Condition::not(Condition::cmp(l.clone(), op, r.clone())));
                }
                let pats: Vec<NullPattern> = NullPattern::ALL.into_iter().filter(|p| m[&(op, *p)] == v).collect();
                if pats.len() == 3 {
                    parts.push(Condition::or(Condition::is_null(l.clone()), Condition::is_null(r.clone())));
                } else {
                    parts.extend(pats.into_iter().map(null_case));
                }
                out.insert((op, v), Condition::disj(parts));
            }
        }
        self.expressibility = out;
    }

    /// Checks that every template is true exactly for its own value on a grid.
    fn check_expressibility(&self) -> Result<(), KernelError> {
        for op in CmpOp::ALL {
            for v in self.truth_values() {
                let t = self.template(op, v).ok_or_else(|| KernelError::MissingTemplate {
                    op: op.to_string(),
                    value: self.value_name(v).to_string(),
                })?;
                check_template_shape(t, op, self.value_name(v), &[])?;
            }
            let mut grid = grid_values(op);
            grid.push(Value::Null);
            for a in &grid {
                for b in &grid {
                    if let (Some(x), Some(y)) = (a.col_type(), b.col_type()) {
                        if x != y {
                            continue;
                        }
                    }
                    let env = Environment::new().bind(Name::new(HOLE_LEFT), a.clone()).bind(Name::new(HOLE_RIGHT), b.clone());
                    let expected = self.compare(op, a, b);
                    for v in self.truth_values() {
                        let holds = eval_template(self.template(op, v).expect("checked above"), &env) == Some(true);
                        if holds != (v == expected) {
                            return Err(KernelError::BadTemplate {
                                op: op.to_string(),
                                case: self.value_name(v).to_string(),
                                message: format!("wrong on ({a}, {b})"),
                            });
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// Lead and period of iterated folding of `v` under `c`.
    pub fn periodicity(&self, v: TruthValue, c: Connective) -> Periodicity {
        let mut seen: Vec<TruthValue> = vec![v];
        let mut cur = v;
        let cap = self.values.len() + 2;
        for j in 2..=cap {
            cur = self.apply(c, cur, v);
            if let Some(i) = seen.iter().position(|x| *x == cur) {
                return Periodicity { lead: i + 1, period: j };
            }
            seen.push(cur);
        }
        unreachable!("pigeonhole bounds the search")
    }

    /// Folds `v` with itself `j >= 1` times.
    pub fn fold_power(&self, v: TruthValue, c: Connective, j: u64) -> TruthValue {
        assert!(j >= 1, "fold of an empty multiset");
        let mut cur = v;
        for _ in 1..j {
            cur = self.apply(c, cur, v);
        }
        cur
    }

    /// Folds a multiset given by per-value counts, reducing each count by its
    /// periodicity first.
    pub fn fold_counted(&self, c: Connective, counts: &[(TruthValue, u64)]) -> Result<TruthValue> {
        let mut acc: Option<TruthValue> = None;
        for &(v, n) in counts {
            if n == 0 {
                continue;
            }
            let reduced = self.periodicity(v, c).reduce(n);
            let part = self.fold_power(v, c, reduced);
            acc = Some(match acc {
                None => part,
                Some(a) => self.apply(c, a, part),
            });
        }
        acc.ok_or_else(|| Error::Value("fold over an empty multiset".into()))
    }

    pub fn is_two_valued(&self) -> bool {
        self.values.len() == 2
    }

    /// Named comparison-table entry, for reports.
    pub fn null_value(&self, op: CmpOp, p: NullPattern) -> Option<TruthValue> {
        match &self.rule {
            ComparisonRule::Constant(m) => m.get(&(op, p)).copied(),
            ComparisonRule::Grounded(_) => None,
        }
    }
}

/// Eventual periodicity of iterated folds: fold(j) = fold(lead + (j - lead) mod (period - lead)) for j >= lead.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Periodicity {
    pub lead: usize,
    pub period: usize,
}

impl Periodicity {
    /// n' = l + ((n - l) mod (p - l)) when n >= l, else n.
    pub fn reduce(&self, n: u64) -> u64 {
        let (l, p) = (self.lead as u64, self.period as u64);
        if n >= l {
            l + (n - l) % (p - l)
        } else {
            n
        }
    }
}

/// SQL's three-valued Kleene logic.
pub fn kernel_3vl() -> LogicKernel {
    let mut k = kleene_bare();
    k.derive_expressibility();
    k
}

/// Two-valued logic where any comparison with NULL is false.
pub fn kernel_2vl() -> LogicKernel {
    let (and, or, not) = boolean_tables();
    let mut k = LogicKernel::assemble("2vl", vec!["t".into(), "f".into()], and, or, not, constant_rule(TruthValue(1)));
    k.derive_expressibility();
    k
}

/// Two-valued logic where NULL = NULL is true.
pub fn kernel_2vl_syntactic() -> LogicKernel {
    let ComparisonRule::Constant(mut m) = constant_rule(TruthValue(1)) else { unreachable!() };
    m.insert((CmpOp::Eq, NullPattern::Both), TruthValue(0));
    let (and, or, not) = boolean_tables();
    let mut k = LogicKernel::assemble("2vl-syn", vec!["t".into(), "f".into()], and, or, not, ComparisonRule::Constant(m));
    k.derive_expressibility();
    k
}

/// Two-valued logic deciding null comparisons by a grounding.
pub fn kernel_grounded(g: Grounding) -> Result<LogicKernel, KernelError> {
    g.validate()?;
    let (and, or, not) = boolean_tables();
    let name = format!("grounded:{}", g.name);
    Ok(LogicKernel::assemble(&name, vec!["t".into(), "f".into()], and, or, not, ComparisonRule::Grounded(g)))
}

/// Four-valued logic with an extra value `s` ("sometimes"), where `s ∧ s = u`.
/// Comparisons with NULL yield `s`.
pub fn kernel_4vl_example() -> LogicKernel {
    let spec = KernelSpec {
        name: "4vl".into(),
        values: vec!["t".into(), "f".into(), "u".into(), "s".into()],
        t: "t".into(),
        f: "f".into(),
        and: table(&[["t", "f", "u", "s"], ["f", "f", "f", "f"], ["u", "f", "u", "u"], ["s", "f", "u", "u"]]),
        or: table(&[["t", "t", "t", "t"], ["t", "f", "u", "s"], ["t", "u", "u", "u"], ["t", "s", "u", "u"]]),
        not: vec!["f".into(), "t".into(), "u".into(), "s".into()],
        null_comparison: NullComparisonSpec::Uniform("s".into()),
        expressibility: None,
    };
    make_mvl_kernel(&spec).expect("built-in four-valued kernel is valid")
}

fn table(rows: &[[&str; 4]]) -> Vec<Vec<String>> {
    rows.iter().map(|r| r.iter().map(|s| s.to_string()).collect()).collect()
}

/// Null comparison values in a kernel file: one value for everything, or per
/// operator either one value or one per null pattern.
#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum NullComparisonSpec {
    Uniform(String),
    PerOp(BTreeMap<String, PerOpSpec>),
}

#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum PerOpSpec {
    Uniform(String),
    PerPattern(BTreeMap<String, String>),
}

/// Declarative description of a many-valued kernel (the kernel file format).
#[derive(Clone, Debug, Deserialize)]
pub struct KernelSpec {
    #[serde(default = "default_kernel_name")]
    pub name: String,
    pub values: Vec<String>,
    #[serde(rename = "true")]
    pub t: String,
    #[serde(rename = "false")]
    pub f: String,
    pub and: Vec<Vec<String>>,
    pub or: Vec<Vec<String>>,
    pub not: Vec<String>,
    pub null_comparison: NullComparisonSpec,
    /// Operator symbol → value name → template text.
    #[serde(default)]
    pub expressibility: Option<BTreeMap<String, BTreeMap<String, String>>>,
}

fn default_kernel_name() -> String {
    "custom".into()
}

/// Builds and validates a many-valued kernel, reporting the first law it breaks.
pub fn make_mvl_kernel(spec: &KernelSpec) -> Result<LogicKernel, KernelError> {
    let n = spec.values.len();
    let malformed = |table: &'static str, message: String| KernelError::Malformed { table, message };
    if !(2..=64).contains(&n) {
        return Err(malformed("values", format!("{n} values; between 2 and 64 required")));
    }
    for (i, v) in spec.values.iter().enumerate() {
        if spec.values[..i].contains(v) {
            return Err(malformed("values", format!("duplicate value `{v}`")));
        }
    }
    let idx = |table: &'static str, s: &str| -> Result<TruthValue, KernelError> {
        spec.values
            .iter()
            .position(|v| v == s)
            .map(|i| TruthValue(i as u8))
            .ok_or_else(|| malformed(table, format!("unknown value `{s}`")))
    };
    let t = idx("true", &spec.t)?;
    let f = idx("false", &spec.f)?;
    if t == f {
        return Err(malformed("values", "true and false coincide".into()));
    }
    let square = |label: &'static str, rows: &[Vec<String>]| -> Result<Vec<Vec<TruthValue>>, KernelError> {
        if rows.len() != n || rows.iter().any(|r| r.len() != n) {
            return Err(malformed(label, format!("expected a {n}x{n} table")));
        }
        rows.iter().map(|r| r.iter().map(|s| idx(label, s)).collect()).collect()
    };
    let and = square("and", &spec.and)?;
    let or = square("or", &spec.or)?;
    if spec.not.len() != n {
        return Err(malformed("not", format!("expected {n} entries")));
    }
    let not = spec.not.iter().map(|s| idx("not", s)).collect::<Result<Vec<_>, _>>()?;
    let mut m = BTreeMap::new();
    for op in CmpOp::ALL {
        for p in NullPattern::ALL {
            let name = match &spec.null_comparison {
                NullComparisonSpec::Uniform(v) => v.clone(),
                NullComparisonSpec::PerOp(per) => {
                    let entry = per
                        .get(op.symbol())
                        .or_else(|| if op == CmpOp::Ne { per.get("!=") } else { None })
                        .ok_or_else(|| malformed("null_comparison", format!("no entry for {op}")))?;
                    match entry {
                        PerOpSpec::Uniform(v) => v.clone(),
                        PerOpSpec::PerPattern(pp) => pp
                            .get(p.key())
                            .cloned()
                            .ok_or_else(|| malformed("null_comparison", format!("no `{}` entry for {op}", p.key())))?,
                    }
                }
            };
            m.insert((op, p), idx("null_comparison", &name)?);
        }
    }
    let mut k = LogicKernel::assemble(&spec.name, spec.values.clone(), and, or, not, ComparisonRule::Constant(m));
    k.t = t;
    k.f = f;
    k.check_laws()?;
    match &spec.expressibility {
        None => k.derive_expressibility(),
        Some(map) => {
            let mut out = BTreeMap::new();
            for (op_s, per_value) in map {
                let op = CmpOp::from_symbol(op_s).ok_or_else(|| malformed("expressibility", format!("unknown operator `{op_s}`")))?;
                for (v_s, text) in per_value {
                    let v = idx("expressibility", v_s)?;
                    let c = parse_condition(text).map_err(|e| KernelError::BadTemplate {
                        op: op.to_string(),
                        case: v_s.clone(),
                        message: e.to_string(),
                    })?;
                    out.insert((op, v), c);
                }
            }
            k.expressibility = out;
        }
    }
    k.check_expressibility()?;
    Ok(k)
}

#[derive(Deserialize)]
struct GroundingFile {
    #[serde(default = "default_kernel_name")]
    name: String,
    grounding: BTreeMap<String, BTreeMap<String, String>>,
}

/// Parses a grounding file: `{"name": ..., "grounding": {"<=": {"left": template, ...}}}`.
pub fn parse_grounding(text: &str) -> Result<Grounding> {
    let file: GroundingFile = serde_json::from_str(text)?;
    let mut cells = Vec::new();
    for (op_s, per) in &file.grounding {
        let op = CmpOp::from_symbol(op_s).ok_or_else(|| Error::Value(format!("unknown operator `{op_s}`")))?;
        for (p_s, text) in per {
            let p = NullPattern::from_key(p_s).ok_or_else(|| Error::Value(format!("unknown null pattern `{p_s}`")))?;
            cells.push((op, p, parse_condition(text)?));
        }
    }
    Ok(Grounding::from_templates(&file.name, cells)?)
}

/// Parses a many-valued kernel file.
pub fn parse_kernel(text: &str) -> Result<LogicKernel> {
    let spec: KernelSpec = serde_json::from_str(text)?;
    Ok(make_mvl_kernel(&spec)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(k: &LogicKernel, s: &str) -> TruthValue {
        k.value_by_name(s).unwrap()
    }

    #[test]
    fn kleene_tables_match_definitions() {
        let k = kernel_3vl();
        let (t, f, u) = (v(&k, "t"), v(&k, "f"), v(&k, "u"));
        assert_eq!(k.and(u, f), f);
        assert_eq!(k.or(u, t), t);
        assert_eq!(k.not(u), u);
        assert_eq!(k.and(u, u), u);
        assert_eq!(k.or(f, u), u);
        assert_eq!(k.compare(CmpOp::Eq, &Value::int(1), &Value::Null), u);
        assert_eq!(k.compare(CmpOp::Lt, &Value::int(1), &Value::int(2)), t);
        k.check_laws().unwrap();
        k.check_expressibility().unwrap();
    }

    #[test]
    fn two_valued_comparisons() {
        let k = kernel_2vl();
        assert_eq!(k.compare(CmpOp::Eq, &Value::Null, &Value::Null), k.f());
        assert_eq!(k.compare(CmpOp::Eq, &Value::int(1), &Value::Null), k.f());
        assert_eq!(k.compare(CmpOp::Le, &Value::int(3), &Value::int(5)), k.t());
        assert_eq!(k.compare(CmpOp::Ne, &Value::int(1), &Value::Null), k.f());
        let s = kernel_2vl_syntactic();
        assert_eq!(s.compare(CmpOp::Eq, &Value::Null, &Value::Null), s.t());
        assert_eq!(s.compare(CmpOp::Eq, &Value::Null, &Value::int(1)), s.f());
        assert_eq!(s.compare(CmpOp::Lt, &Value::Null, &Value::Null), s.f());
        assert_eq!(s.compare(CmpOp::Ne, &Value::Null, &Value::Null), s.f());
    }

    fn grid() -> Vec<Value> {
        let mut g: Vec<Value> = (-2..=3).map(Value::int).collect();
        g.push(Value::Null);
        g.push(Value::ord("a"));
        g
    }

    #[test]
    fn groundings_reproduce_constant_kernels() {
        let empty = kernel_grounded(Grounding::empty()).unwrap();
        let syn = kernel_grounded(Grounding::syntactic_equality()).unwrap();
        let (k2, ks) = (kernel_2vl(), kernel_2vl_syntactic());
        for op in CmpOp::ALL {
            for a in grid() {
                for b in grid() {
                    assert_eq!(empty.compare(op, &a, &b), k2.compare(op, &a, &b), "{a} {op} {b}");
                    assert_eq!(syn.compare(op, &a, &b), ks.compare(op, &a, &b), "{a} {op} {b}");
                }
            }
        }
    }

    #[test]
    fn le_grounding() {
        let k = kernel_grounded(Grounding::le_example()).unwrap();
        assert_eq!(k.compare(CmpOp::Le, &Value::Null, &Value::int(5)), k.t());
        assert_eq!(k.compare(CmpOp::Le, &Value::Null, &Value::int(-5)), k.f());
        assert_eq!(k.compare(CmpOp::Le, &Value::int(-1), &Value::Null), k.t());
        assert_eq!(k.compare(CmpOp::Le, &Value::int(1), &Value::Null), k.f());
        assert_eq!(k.compare(CmpOp::Le, &Value::Null, &Value::Null), k.t());
        assert_eq!(k.compare(CmpOp::Lt, &Value::Null, &Value::int(5)), k.f());
    }

    #[test]
    fn grounding_templates_validated() {
        let bad = Grounding::from_templates("bad", vec![(CmpOp::Le, NullPattern::Left, parse_condition("(cmp (col $1) = (num 0))").unwrap())]);
        assert!(matches!(bad, Err(KernelError::BadTemplate { .. })));
        let nullc = Grounding::from_templates("bad", vec![(CmpOp::Le, NullPattern::Left, parse_condition("(isnull (null))").unwrap())]);
        assert!(nullc.is_err());
        let good = Grounding::from_templates(
            "le",
            vec![(CmpOp::Le, NullPattern::Left, parse_condition("(and (not (isnull (col $2))) (cmp (col $2) >= (num 0)))").unwrap())],
        )
        .unwrap();
        assert!(good.decide(CmpOp::Le, &Value::Null, &Value::int(4)));
        assert!(!good.decide(CmpOp::Le, &Value::Null, &Value::int(-4)));
    }

    #[test]
    fn four_valued_tables() {
        let k = kernel_4vl_example();
        let (t, f, s, u) = (v(&k, "t"), v(&k, "f"), v(&k, "s"), v(&k, "u"));
        assert_eq!(k.and(s, s), u);
        assert_eq!(k.and(t, s), s);
        assert_eq!(k.or(f, s), s);
        assert_eq!(k.compare(CmpOp::Eq, &Value::Null, &Value::int(1)), s);
        k.check_laws().unwrap();
        assert_eq!(k.fold_power(s, Connective::And, 2), u);
    }

    #[test]
    fn periodicity_examples() {
        let b = kernel_2vl();
        assert_eq!(b.periodicity(b.t(), Connective::Or), Periodicity { lead: 1, period: 2 });
        let k = kernel_3vl();
        assert_eq!(k.periodicity(v(&k, "u"), Connective::And), Periodicity { lead: 1, period: 2 });
        let m = kernel_4vl_example();
        assert_eq!(m.periodicity(v(&m, "s"), Connective::And), Periodicity { lead: 2, period: 3 });
    }

    #[test]
    fn fold_counted_small() {
        let k = kernel_3vl();
        assert_eq!(k.fold_counted(Connective::Or, &[(k.t(), 1)]).unwrap(), k.t());
        assert_eq!(k.fold_counted(Connective::Or, &[(v(&k, "u"), 3), (k.f(), 2)]).unwrap(), v(&k, "u"));
        assert!(k.fold_counted(Connective::Or, &[(k.t(), 0)]).is_err());
    }

    #[test]
    fn mutated_table_rejected_with_witness() {
        let mut spec = KernelSpec {
            name: "m".into(),
            values: vec!["t".into(), "f".into(), "u".into()],
            t: "t".into(),
            f: "f".into(),
            and: vec![
                vec!["t".into(), "f".into(), "u".into()],
                vec!["f".into(), "f".into(), "f".into()],
                vec!["u".into(), "f".into(), "u".into()],
            ],
            or: vec![
                vec!["t".into(), "t".into(), "t".into()],
                vec!["t".into(), "f".into(), "u".into()],
                vec!["t".into(), "u".into(), "u".into()],
            ],
            not: vec!["f".into(), "t".into(), "u".into()],
            null_comparison: NullComparisonSpec::Uniform("u".into()),
            expressibility: None,
        };
        assert!(make_mvl_kernel(&spec).is_ok());
        spec.or[1][2] = "t".into();
        assert_eq!(
            make_mvl_kernel(&spec).unwrap_err(),
            KernelError::NotCommutative { table: "or", a: "f".into(), b: "u".into() }
        );
    }
}
