//! Interpreter for expressions and conditions, parameterized by a logic kernel.

use std::collections::{BTreeMap, HashMap};
use std::rc::Rc;

use num::{Signed, Zero};

use crate::algebra::{AggFunc, Aggregate, CmpOp, Condition, Expression, Func, MuKind, ProjItem, Term};
use crate::data::{Bag, Database, Record};
use crate::env::Environment;
use crate::error::{Error, Result};
use crate::kernel::{Connective, LogicKernel, TruthValue};
use crate::value::{Name, Rational, Value};

/// Default iteration cap for recursive expressions.
pub const DEFAULT_RECURSION_CAP: usize = 10_000;

/// Evaluation settings: the kernel deciding conditions and the recursion cap.
#[derive(Clone, Debug)]
pub struct EvalConfig {
    pub kernel: LogicKernel,
    pub recursion_cap: usize,
}

impl EvalConfig {
    pub fn new(kernel: LogicKernel) -> Self {
        EvalConfig { kernel, recursion_cap: DEFAULT_RECURSION_CAP }
    }

    pub fn with_cap(mut self, cap: usize) -> Self {
        assert!(cap >= 1, "recursion cap must be positive");
        self.recursion_cap = cap;
        self
    }
}

/// A labelled result.
#[derive(Clone, Debug)]
struct Rel {
    labels: Rc<Vec<Name>>,
    bag: Rc<Bag>,
}

/// Relations bound by enclosing recursive definitions.
struct Overlay<'o> {
    name: &'o Name,
    rel: Rel,
    parent: Option<&'o Overlay<'o>>,
}

impl<'o> Overlay<'o> {
    fn find(mut o: Option<&'o Overlay<'o>>, name: &str) -> Option<&'o Rel> {
        while let Some(cur) = o {
            if cur.name.as_str() == name {
                return Some(&cur.rel);
            }
            o = cur.parent;
        }
        None
    }
}

struct Ctx<'a> {
    db: &'a Database,
    cfg: &'a EvalConfig,
    bases: std::cell::RefCell<HashMap<Name, Rel>>,
}

/// Evaluates a term; any NULL argument makes a function application NULL.
pub fn eval_term(t: &Term, env: &Environment) -> Result<Value> {
    match t {
        Term::Num(r) => Ok(Value::Num(r.clone())),
        Term::Ord(s) => Ok(Value::ord(s)),
        Term::Null => Ok(Value::Null),
        Term::Col(n) => env.get(n.as_str()).cloned().ok_or_else(|| Error::Unbound(n.to_string())),
        Term::Fn(f, args) => {
            let vals = args.iter().map(|a| eval_term(a, env)).collect::<Result<Vec<_>>>()?;
            apply_func(*f, &vals)
        }
    }
}

fn apply_func(f: Func, vals: &[Value]) -> Result<Value> {
    if vals.len() != f.arity() {
        return Err(Error::Arity(format!("{} expects {} argument(s)", f.name(), f.arity())));
    }
    if vals.iter().any(Value::is_null) {
        return Ok(Value::Null);
    }
    let nums = vals
        .iter()
        .map(|v| v.as_num().ok_or_else(|| Error::ty(f.name(), format!("non-numerical argument {v}"))))
        .collect::<Result<Vec<&Rational>>>()?;
    Ok(match f {
        Func::Add => Value::Num(nums[0] + nums[1]),
        Func::Sub => Value::Num(nums[0] - nums[1]),
        Func::Mult => Value::Num(nums[0] * nums[1]),
        Func::Neg => Value::Num(-nums[0]),
        Func::Div if nums[1].is_zero() => Value::Null,
        Func::Div => Value::Num(nums[0] / nums[1]),
        Func::Mod if nums[1].is_zero() => Value::Null,
        Func::Mod => {
            let q = (nums[0] / nums[1]).trunc();
            Value::Num(nums[0] - nums[1] * q)
        }
    })
}

/// Truth value of `l op r` for value tuples, spelled out as in
/// [`crate::algebra::expand_tuple_comparison`].
pub fn compare_tuples(k: &LogicKernel, op: CmpOp, l: &[Value], r: &[Value]) -> TruthValue {
    debug_assert_eq!(l.len(), r.len());
    let n = l.len();
    match op {
        CmpOp::Eq => (1..n).fold(k.compare(CmpOp::Eq, &l[0], &r[0]), |acc, i| k.and(acc, k.compare(CmpOp::Eq, &l[i], &r[i]))),
        CmpOp::Ne => (1..n).fold(k.compare(CmpOp::Ne, &l[0], &r[0]), |acc, i| k.or(acc, k.compare(CmpOp::Ne, &l[i], &r[i]))),
        _ => {
            let disjunct = |i: usize| {
                let last = if i + 1 == n { op } else { op.strict() };
                (0..i).fold(None, |acc: Option<TruthValue>, j| {
                    let e = k.compare(CmpOp::Eq, &l[j], &r[j]);
                    Some(acc.map_or(e, |a| k.and(a, e)))
                })
                .map_or(k.compare(last, &l[i], &r[i]), |pre| k.and(pre, k.compare(last, &l[i], &r[i])))
            };
            (1..n).fold(disjunct(0), |acc, i| k.or(acc, disjunct(i)))
        }
    }
}

impl<'a> Ctx<'a> {
    fn new(db: &'a Database, cfg: &'a EvalConfig) -> Self {
        Ctx { db, cfg, bases: Default::default() }
    }

    fn kernel(&self) -> &LogicKernel {
        &self.cfg.kernel
    }

    fn base(&self, name: &Name, overlay: Option<&Overlay<'_>>) -> Result<Rel> {
        if let Some(r) = Overlay::find(overlay, name.as_str()) {
            return Ok(r.clone());
        }
        if let Some(r) = self.bases.borrow().get(name) {
            return Ok(r.clone());
        }
        let schema = self.db.schema.get(name).ok_or_else(|| Error::UnknownRelation(name.to_string()))?;
        let bag = self.db.relation(name).cloned().unwrap_or_default();
        let rel = Rel { labels: Rc::new(schema.labels(name)), bag: Rc::new(bag) };
        self.bases.borrow_mut().insert(name.clone(), rel.clone());
        Ok(rel)
    }

    fn rel(&self, e: &Expression, env: &Environment, ov: Option<&Overlay<'_>>) -> Result<Rel> {
        let owned = |labels: Rc<Vec<Name>>, bag: Bag| Ok(Rel { labels, bag: Rc::new(bag) });
        match e {
            Expression::Base(n) => self.base(n, ov),
            Expression::Project(items, inner) => {
                let r = self.rel(inner, env, ov)?;
                let mut out = Bag::new();
                for (rec, k) in r.bag.iter() {
                    let env2 = env.extend(&r.labels, rec);
                    let vals = items.iter().map(|it| eval_term(&it.term, &env2)).collect::<Result<Record>>()?;
                    out.insert(vals, k)?;
                }
                owned(Rc::new(items.iter().map(ProjItem::output_name).collect()), out)
            }
            Expression::Select(c, inner) => {
                let r = self.rel(inner, env, ov)?;
                let mut out = Bag::new();
                let t = self.kernel().t();
                for (rec, k) in r.bag.iter() {
                    let env2 = env.extend(&r.labels, rec);
                    if self.cond(c, &env2, ov)? == t {
                        out.insert(rec.clone(), k)?;
                    }
                }
                owned(r.labels, out)
            }
            Expression::Product(a, b) => {
                let ra = self.rel(a, env, ov)?;
                let rb = self.rel(b, env, ov)?;
                let mut out = Bag::new();
                for (x, kx) in ra.bag.iter() {
                    for (y, ky) in rb.bag.iter() {
                        let mut rec = x.clone();
                        rec.extend(y.iter().cloned());
                        out.insert(rec, kx.checked_mul(ky).ok_or(Error::Overflow)?)?;
                    }
                }
                let mut labels = (*ra.labels).clone();
                labels.extend(rb.labels.iter().cloned());
                owned(Rc::new(labels), out)
            }
            Expression::UnionAll(a, b) => {
                let ra = self.rel(a, env, ov)?;
                let rb = self.rel(b, env, ov)?;
                owned(ra.labels, ra.bag.union_all(&rb.bag)?)
            }
            Expression::IntersectAll(a, b) => {
                let ra = self.rel(a, env, ov)?;
                let rb = self.rel(b, env, ov)?;
                owned(ra.labels, ra.bag.intersect_all(&rb.bag))
            }
            Expression::ExceptAll(a, b) => {
                let ra = self.rel(a, env, ov)?;
                let rb = self.rel(b, env, ov)?;
                owned(ra.labels, ra.bag.except_all(&rb.bag))
            }
            Expression::Distinct(inner) => {
                let r = self.rel(inner, env, ov)?;
                owned(r.labels, r.bag.distinct())
            }
            Expression::Group { keys, aggs, input } => {
                let r = self.rel(input, env, ov)?;
                let (labels, bag) = group(&r, keys, aggs)?;
                owned(Rc::new(labels), bag)
            }
            Expression::Mu { name, kind, base, step } => self.mu(name, *kind, base, step, env, ov),
        }
    }

    fn mu(
        &self,
        name: &Name,
        kind: MuKind,
        base: &Expression,
        step: &Expression,
        env: &Environment,
        ov: Option<&Overlay<'_>>,
    ) -> Result<Rel> {
        let first = self.rel(base, env, ov)?;
        let labels = first.labels.clone();
        let mut res: Bag = match kind {
            MuKind::Bag => (*first.bag).clone(),
            MuKind::Distinct => first.bag.distinct(),
        };
        let mut current = Rc::new(res.clone());
        let mut iterations = 0usize;
        while !current.is_empty() {
            if iterations >= self.cfg.recursion_cap {
                return Err(Error::RecursionCap(self.cfg.recursion_cap));
            }
            iterations += 1;
            let layer = Overlay { name, rel: Rel { labels: labels.clone(), bag: current.clone() }, parent: ov };
            let next = self.rel(step, env, Some(&layer))?;
            let next = match kind {
                MuKind::Bag => (*next.bag).clone(),
                MuKind::Distinct => next.bag.distinct().except_all(&res),
            };
            res = res.union_all(&next)?;
            current = Rc::new(next);
        }
        Ok(Rel { labels, bag: Rc::new(res) })
    }

    fn terms(&self, ts: &[Term], env: &Environment) -> Result<Vec<Value>> {
        ts.iter().map(|t| eval_term(t, env)).collect()
    }

    /// Folds `l op r` over the records of `e` with the given connective.
    fn quantified(
        &self,
        l: &[Term],
        op: CmpOp,
        e: &Expression,
        conn: Connective,
        env: &Environment,
        ov: Option<&Overlay<'_>>,
    ) -> Result<TruthValue> {
        let k = self.kernel();
        let vals = self.terms(l, env)?;
        let r = self.rel(e, env, ov)?;
        if r.labels.len() != vals.len() {
            return Err(Error::Arity(format!("tuple of length {} against {} columns", vals.len(), r.labels.len())));
        }
        let mut counts: BTreeMap<TruthValue, u64> = BTreeMap::new();
        for (rec, m) in r.bag.iter() {
            let v = compare_tuples(k, op, &vals, rec);
            if let Some(res) = k.absorbs(conn, v) {
                return Ok(res);
            }
            *counts.entry(v).or_insert(0) += m;
        }
        if counts.is_empty() {
            return Ok(match conn {
                Connective::Or => k.f(),
                Connective::And => k.t(),
            });
        }
        k.fold_counted(conn, &counts.into_iter().collect::<Vec<_>>())
    }

    fn cond(&self, c: &Condition, env: &Environment, ov: Option<&Overlay<'_>>) -> Result<TruthValue> {
        let k = self.kernel();
        match c {
            Condition::True => Ok(k.t()),
            Condition::False => Ok(k.f()),
            Condition::IsNull(t) => Ok(k.from_bool(eval_term(t, env)?.is_null())),
            Condition::Compare(l, op, r) => {
                if l.len() != r.len() || l.is_empty() {
                    return Err(Error::Arity(format!("comparison of tuples of lengths {} and {}", l.len(), r.len())));
                }
                Ok(compare_tuples(k, *op, &self.terms(l, env)?, &self.terms(r, env)?))
            }
            Condition::In(l, e) => self.quantified(l, CmpOp::Eq, e, Connective::Or, env, ov),
            Condition::Any(l, op, e) => self.quantified(l, *op, e, Connective::Or, env, ov),
            Condition::All(l, op, e) => self.quantified(l, *op, e, Connective::And, env, ov),
            Condition::Empty(e) => Ok(k.from_bool(self.rel(e, env, ov)?.bag.is_empty())),
            Condition::And(a, b) | Condition::Or(a, b) => {
                let conn = if matches!(c, Condition::And(..)) { Connective::And } else { Connective::Or };
                let va = self.cond(a, env, ov)?;
                if let Some(v) = k.absorbs(conn, va) {
                    return Ok(v);
                }
                let vb = self.cond(b, env, ov)?;
                Ok(k.apply(conn, va, vb))
            }
            Condition::Not(a) => Ok(k.not(self.cond(a, env, ov)?)),
        }
    }
}

fn group(r: &Rel, keys: &[Name], aggs: &[Aggregate]) -> Result<(Vec<Name>, Bag)> {
    let pos = |n: &Name| {
        r.labels.iter().position(|l| l == n).ok_or_else(|| Error::Unbound(n.to_string()))
    };
    let key_pos = keys.iter().map(pos).collect::<Result<Vec<_>>>()?;
    let agg_pos = aggs
        .iter()
        .map(|a| a.column.as_ref().map(pos).transpose())
        .collect::<Result<Vec<Option<usize>>>>()?;
    // Grouping compares NULL syntactically: Value's equality treats NULL = NULL.
    let mut groups: BTreeMap<Record, Vec<(&Record, u64)>> = BTreeMap::new();
    for (rec, k) in r.bag.iter() {
        let key: Record = key_pos.iter().map(|&i| rec[i].clone()).collect();
        groups.entry(key).or_default().push((rec, k));
    }
    if keys.is_empty() && groups.is_empty() {
        groups.insert(Vec::new(), Vec::new());
    }
    let mut out = Bag::new();
    for (key, members) in groups {
        let mut row = key;
        for (a, p) in aggs.iter().zip(&agg_pos) {
            row.push(aggregate(a.func, *p, &members)?);
        }
        out.insert(row, 1)?;
    }
    let mut labels: Vec<Name> = keys.to_vec();
    labels.extend(aggs.iter().map(Aggregate::output_name));
    Ok((labels, out))
}

fn aggregate(f: AggFunc, column: Option<usize>, members: &[(&Record, u64)]) -> Result<Value> {
    if f == AggFunc::CountStar {
        return Ok(Value::int(members.iter().map(|(_, k)| *k as i64).sum()));
    }
    let col = column.ok_or_else(|| Error::ty(f.name(), "missing column"))?;
    let vals: Vec<(&Value, u64)> = members.iter().map(|(r, k)| (&r[col], *k)).filter(|(v, _)| !v.is_null()).collect();
    let count: u64 = vals.iter().map(|(_, k)| k).sum();
    if f == AggFunc::Count {
        return Ok(Value::Num(Rational::from_integer(count.into())));
    }
    if vals.is_empty() {
        return Ok(Value::Null);
    }
    let nums = vals
        .iter()
        .map(|(v, k)| v.as_num().map(|n| (n, *k)).ok_or_else(|| Error::ty(f.name(), format!("non-numerical value {v}"))))
        .collect::<Result<Vec<_>>>()?;
    let sum = || nums.iter().fold(Rational::zero(), |acc, (n, k)| acc + *n * Rational::from_integer((*k).into()));
    Ok(Value::Num(match f {
        AggFunc::Sum => sum(),
        AggFunc::Avg => sum() / Rational::from_integer(count.into()),
        AggFunc::Min => nums.iter().map(|(n, _)| *n).min().expect("non-empty").clone(),
        AggFunc::Max => nums.iter().map(|(n, _)| *n).max().expect("non-empty").clone(),
        AggFunc::Count | AggFunc::CountStar => unreachable!(),
    }))
}

/// Evaluates an expression to a bag.
pub fn eval(e: &Expression, db: &Database, env: &Environment, cfg: &EvalConfig) -> Result<Bag> {
    let r = Ctx::new(db, cfg).rel(e, env, None)?;
    Ok(Rc::try_unwrap(r.bag).unwrap_or_else(|rc| (*rc).clone()))
}

/// Evaluates an expression, also returning its output labels.
pub fn eval_labeled(e: &Expression, db: &Database, env: &Environment, cfg: &EvalConfig) -> Result<(Vec<Name>, Bag)> {
    let r = Ctx::new(db, cfg).rel(e, env, None)?;
    let labels = (*r.labels).clone();
    Ok((labels, Rc::try_unwrap(r.bag).unwrap_or_else(|rc| (*rc).clone())))
}

/// Evaluates a condition to a truth value of the configured kernel.
pub fn eval_condition(c: &Condition, db: &Database, env: &Environment, cfg: &EvalConfig) -> Result<TruthValue> {
    Ctx::new(db, cfg).cond(c, env, None)
}

/// Grouping with aggregation over `e`.
pub fn eval_group(
    keys: &[Name],
    aggs: &[Aggregate],
    e: &Expression,
    db: &Database,
    env: &Environment,
    cfg: &EvalConfig,
) -> Result<Bag> {
    eval(&Expression::Group { keys: keys.to_vec(), aggs: aggs.to_vec(), input: Box::new(e.clone()) }, db, env, cfg)
}

/// Recursive definition `μR. E1 ∪ E2` (bag) or `μR. E1 ⊔ E2` (distinct).
pub fn eval_mu(
    kind: MuKind,
    base: &Expression,
    step: &Expression,
    name: &Name,
    db: &Database,
    env: &Environment,
    cfg: &EvalConfig,
) -> Result<Bag> {
    eval(
        &Expression::Mu { name: name.clone(), kind, base: Box::new(base.clone()), step: Box::new(step.clone()) },
        db,
        env,
        cfg,
    )
}

/// True when `x` is a negative rational; used by generators and tests.
pub fn is_negative(v: &Value) -> bool {
    v.as_num().is_some_and(|n| n.is_negative())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::parse_expression;
    use crate::data::{Column, Schema};
    use crate::kernel::{kernel_2vl, kernel_3vl};
    use crate::value::ColType;

    fn db(rows: &[(i64, i64, u64)]) -> Database {
        let schema = Schema::new().with("R", vec![Column::new("A", ColType::Num), Column::new("B", ColType::Num)]);
        let mut bag = Bag::new();
        for &(a, b, k) in rows {
            bag.insert(vec![Value::int(a), Value::int(b)], k).unwrap();
        }
        Database::new(schema, [(Name::new("R"), bag)].into_iter().collect()).unwrap()
    }

    #[test]
    fn terms() {
        let env = Environment::new().bind(Name::new("A"), Value::int(7));
        let t = |s: &str| eval_term(&crate::algebra::parse_term(s).unwrap(), &env).unwrap();
        assert_eq!(t("(fn add (num 2) (num 3))"), Value::int(5));
        assert_eq!(t("(fn add (null) (num 2))"), Value::Null);
        assert_eq!(t("(col A)"), Value::int(7));
        assert_eq!(t("(fn div (num 1) (num 0))"), Value::Null);
        assert_eq!(t("(fn mod (num 7) (num 3))"), Value::int(1));
        assert_eq!(t("(fn mod (num -7) (num 3))"), Value::int(-1));
        assert_eq!(t("(fn div (num 1) (num 3))"), Value::parse_num("1/3").unwrap());
    }

    #[test]
    fn projection_sums_multiplicities() {
        let d = db(&[(2, 3, 2), (1, 6, 3)]);
        let e = parse_expression("(project ((fn mult (col R.A) (col R.B))) (base R))").unwrap();
        let out = eval(&e, &d, &Environment::new(), &EvalConfig::new(kernel_3vl())).unwrap();
        assert_eq!(out.cardinality(), 5);
        assert_eq!(out.multiplicity(&[Value::int(6)]), 5);
    }

    #[test]
    fn group_aggregates() {
        let schema = Schema::new().with("R", vec![Column::new("A", ColType::Ord), Column::new("B", ColType::Num)]);
        let bag = Bag::from_records([
            vec![Value::ord("a"), Value::int(1)],
            vec![Value::ord("a"), Value::int(2)],
            vec![Value::Null, Value::Null],
            vec![Value::Null, Value::int(5)],
        ]);
        let d = Database::new(schema, [(Name::new("R"), bag)].into_iter().collect()).unwrap();
        let e = parse_expression("(group (R.A) ((as (count R.B) C) (sum R.B) (count_star)) (base R))").unwrap();
        let out = eval(&e, &d, &Environment::new(), &EvalConfig::new(kernel_3vl())).unwrap();
        let expected = Bag::from_records([
            vec![Value::ord("a"), Value::int(2), Value::int(3), Value::int(2)],
            vec![Value::Null, Value::int(1), Value::int(5), Value::int(2)],
        ]);
        assert_eq!(out, expected);
    }

    #[test]
    fn global_group_on_empty_input() {
        let d = db(&[]);
        let e = parse_expression("(group () ((count R.A) (count_star) (sum R.A) (avg R.A) (min R.A) (max R.A)) (base R))").unwrap();
        let out = eval(&e, &d, &Environment::new(), &EvalConfig::new(kernel_3vl())).unwrap();
        let row = vec![Value::int(0), Value::int(0), Value::Null, Value::Null, Value::Null, Value::Null];
        assert_eq!(out, Bag::from_records([row]));
        let keyed = parse_expression("(group (R.A) ((count R.B)) (base R))").unwrap();
        assert!(eval(&keyed, &d, &Environment::new(), &EvalConfig::new(kernel_3vl())).unwrap().is_empty());
    }

    #[test]
    fn recursion() {
        let d = db(&[(1, 0, 1)]);
        let seed = "(project ((as (col R.A) n)) (base R))";
        let step = "(project ((as (fn add (col n) (num 1)) n)) (select (cmp (col n) < (num 3)) (base X)))";
        let e = parse_expression(&format!("(mu X distinct {seed} {step})")).unwrap();
        let out = eval(&e, &d, &Environment::new(), &EvalConfig::new(kernel_3vl())).unwrap();
        assert_eq!(out, Bag::from_records([vec![Value::int(1)], vec![Value::int(2)], vec![Value::int(3)]]));

        let empty_seed = parse_expression(&format!("(mu X bag (select false {seed}) (base X))")).unwrap();
        assert!(eval(&empty_seed, &d, &Environment::new(), &EvalConfig::new(kernel_3vl())).unwrap().is_empty());

        let forever = parse_expression(&format!("(mu X bag {seed} (project ((col n)) (base X)))")).unwrap();
        let r = eval(&forever, &d, &Environment::new(), &EvalConfig::new(kernel_3vl()).with_cap(50));
        assert!(matches!(r, Err(Error::RecursionCap(50))));
    }

    #[test]
    fn quantifiers_on_empty() {
        let d = db(&[]);
        let k = kernel_2vl();
        let cfg = EvalConfig::new(k.clone());
        let all = crate::algebra::parse_condition("(all (num 1) < (project ((col R.A)) (base R)))").unwrap();
        assert_eq!(eval_condition(&all, &d, &Environment::new(), &cfg).unwrap(), k.t());
        let any = crate::algebra::parse_condition("(any (num 1) < (project ((col R.A)) (base R)))").unwrap();
        assert_eq!(eval_condition(&any, &d, &Environment::new(), &cfg).unwrap(), k.f());
    }
}
