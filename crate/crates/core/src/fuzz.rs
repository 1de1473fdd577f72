//! Random databases and well-typed expressions for differential testing.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::algebra::{AggFunc, Aggregate, CmpOp, Condition, Expression, Func, MuKind, ProjItem, Term};
use crate::data::{Bag, Column, Database, Schema};
use crate::error::{Error, Result};
use crate::value::{ColType, Name, Value};

/// Generator settings. Identical settings give identical corpora.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FuzzConfig {
    pub seed: u64,
    pub max_depth: usize,
    pub null_rate: f64,
    pub rows_per_relation: usize,
    pub cases: usize,
    /// Allow recursive definitions.
    #[serde(default = "yes")]
    pub recursion: bool,
    /// Allow constructs that produce NULL from non-null inputs: the NULL
    /// constant, division and remainder, and non-count aggregates of a global
    /// group (which are NULL on empty input).
    #[serde(default = "yes")]
    pub null_producing: bool,
}

fn yes() -> bool {
    true
}

impl Default for FuzzConfig {
    fn default() -> Self {
        FuzzConfig {
            seed: 0,
            max_depth: 4,
            null_rate: 0.3,
            rows_per_relation: 6,
            cases: 500,
            recursion: true,
            null_producing: true,
        }
    }
}

impl FuzzConfig {
    /// Seed for case `i`, so every case can be regenerated on its own.
    pub fn case_seed(&self, i: usize) -> u64 {
        let mut z = self.seed.wrapping_add((i as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    pub fn rng(&self, i: usize) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.case_seed(i))
    }
}

/// Three relations over small domains, mixing key, NOT NULL and nullable columns.
pub fn fuzz_schema() -> Schema {
    Schema::new()
        .with(
            "R",
            vec![Column::new("A", ColType::Num), Column::new("B", ColType::Num), Column::new("C", ColType::Ord)],
        )
        .with("S", vec![Column::new("A", ColType::Num), Column::new("D", ColType::Num).not_null()])
        .with(
            "T",
            vec![
                Column::new("K", ColType::Num).key(),
                Column::new("V", ColType::Num),
                Column::new("W", ColType::Ord).not_null(),
            ],
        )
}

const ORDS: [&str; 3] = ["a", "b", "c"];
const NUM_DOMAIN: i64 = 4;

fn random_value(rng: &mut impl Rng, ty: ColType) -> Value {
    match ty {
        ColType::Num => Value::int(rng.gen_range(0..NUM_DOMAIN)),
        ColType::Ord => Value::ord(ORDS.choose(rng).expect("non-empty")),
    }
}

/// Fills every relation of `schema` with `rows_per_relation` records. NULLs
/// go only into columns that may hold them, each with probability `null_rate`.
pub fn gen_database(schema: &Schema, cfg: &FuzzConfig, rng: &mut impl Rng) -> Result<Database> {
    let n = cfg.rows_per_relation;
    let mut data = BTreeMap::new();
    for (name, rel) in &schema.relations {
        let mut columns: Vec<Vec<Value>> = Vec::new();
        for col in &rel.columns {
            let values = if col.key {
                let mut pool: Vec<Value> = match col.ty {
                    ColType::Num => (0..(2 * n as i64).max(NUM_DOMAIN)).map(Value::int).collect(),
                    ColType::Ord => (b'a'..=b'z').map(|c| Value::ord(&(c as char).to_string())).collect(),
                };
                if pool.len() < n {
                    return Err(Error::Database(format!(
                        "key column {name}.{} cannot hold {n} distinct values",
                        col.name
                    )));
                }
                pool.shuffle(rng);
                pool.truncate(n);
                pool
            } else {
                (0..n)
                    .map(|_| {
                        if col.may_be_null() && rng.gen_bool(cfg.null_rate) {
                            Value::Null
                        } else {
                            random_value(rng, col.ty)
                        }
                    })
                    .collect()
            };
            columns.push(values);
        }
        let mut bag = Bag::new();
        for i in 0..n {
            bag.insert(columns.iter().map(|c| c[i].clone()).collect(), 1)?;
        }
        data.insert(name.clone(), bag);
    }
    Database::new(schema.clone(), data)
}

type Cols = Vec<(Name, ColType)>;

/// Counts of generated node kinds, for coverage checks.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Coverage {
    pub counts: BTreeMap<&'static str, usize>,
}

impl Coverage {
    fn hit(&mut self, kind: &'static str) {
        *self.counts.entry(kind).or_insert(0) += 1;
    }
}

struct Gen<'a, R: Rng> {
    rng: &'a mut R,
    schema: &'a Schema,
    cfg: &'a FuzzConfig,
    fresh: usize,
    mu_vars: Vec<(Name, Cols)>,
    coverage: Coverage,
}

impl<R: Rng> Gen<'_, R> {
    fn fresh_name(&mut self, stem: &str) -> Name {
        self.fresh += 1;
        Name::from(format!("{stem}{}", self.fresh))
    }

    fn pick<'c>(&mut self, cols: &'c [(Name, ColType)], ty: ColType) -> Option<&'c Name> {
        let matching: Vec<&Name> = cols.iter().filter(|(_, t)| *t == ty).map(|(n, _)| n).collect();
        matching.choose(self.rng).copied()
    }

    fn constant(&mut self, ty: ColType) -> Term {
        match ty {
            ColType::Num => Term::int(self.rng.gen_range(0..NUM_DOMAIN)),
            ColType::Ord => Term::Ord(ORDS.choose(self.rng).expect("non-empty").to_string()),
        }
    }

    fn term(&mut self, ty: ColType, cols: &[(Name, ColType)], outer: &[Cols], depth: usize) -> Term {
        let roll: f64 = self.rng.gen();
        if self.cfg.null_producing && roll < 0.03 {
            self.coverage.hit("term:null");
            return Term::Null;
        }
        if ty == ColType::Num && depth > 0 && roll < 0.15 {
            let funcs: &[Func] =
                if self.cfg.null_producing { &[Func::Add, Func::Sub, Func::Mult, Func::Div, Func::Mod, Func::Neg] } else { &[Func::Add, Func::Sub, Func::Mult, Func::Neg] };
            let f = *funcs.choose(self.rng).expect("non-empty");
            self.coverage.hit(f.name());
            let args = (0..f.arity()).map(|_| self.term(ty, cols, outer, depth - 1)).collect();
            return Term::func(f, args);
        }
        if !outer.is_empty() && roll < 0.3 {
            let scope = outer.choose(self.rng).expect("non-empty").clone();
            if let Some(n) = self.pick(&scope, ty) {
                self.coverage.hit("term:outer");
                return Term::Col(n.clone());
            }
        }
        if roll < 0.8 {
            if let Some(n) = self.pick(cols, ty) {
                return Term::Col(n.clone());
            }
        }
        self.constant(ty)
    }

    fn random_type(&mut self) -> ColType {
        if self.rng.gen_bool(0.75) {
            ColType::Num
        } else {
            ColType::Ord
        }
    }

    fn op_for(&mut self, types: &[ColType]) -> CmpOp {
        if types.contains(&ColType::Ord) {
            *[CmpOp::Eq, CmpOp::Ne].choose(self.rng).expect("non-empty")
        } else {
            *CmpOp::ALL.choose(self.rng).expect("non-empty")
        }
    }

    fn base(&mut self) -> (Expression, Cols) {
        let mut choices: Vec<(Name, Cols)> = self
            .schema
            .relations
            .iter()
            .map(|(n, r)| (n.clone(), r.labels(n).into_iter().zip(r.type_word()).collect()))
            .collect();
        choices.extend(self.mu_vars.iter().cloned());
        let (n, cols) = choices.choose(self.rng).expect("schema has relations").clone();
        self.coverage.hit(if self.mu_vars.iter().any(|(m, _)| *m == n) { "base:recursive" } else { "base" });
        (Expression::Base(n), cols)
    }

    /// Projection of `e` onto terms of the requested types, renamed apart.
    fn shape(&mut self, e: Expression, cols: &Cols, types: &[ColType], outer: &[Cols]) -> (Expression, Cols) {
        let mut items = Vec::new();
        let mut out = Vec::new();
        for &ty in types {
            let t = self.term(ty, cols, outer, 1);
            let name = self.fresh_name("x");
            items.push(ProjItem::renamed(t, &name));
            out.push((name, ty));
        }
        (Expression::project(items, e), out)
    }

    fn expr(&mut self, depth: usize, outer: &[Cols]) -> (Expression, Cols) {
        if depth <= 1 || self.rng.gen_bool(0.15) {
            return self.base();
        }
        let choice = self.rng.gen_range(0..if self.cfg.recursion { 14 } else { 13 });
        match choice {
            0..=3 => {
                self.coverage.hit("select");
                let (e, cols) = self.expr(depth - 1, outer);
                let c = self.cond(depth - 1, &cols, outer);
                (Expression::select(c, e), cols)
            }
            4..=5 => {
                self.coverage.hit("project");
                let (e, cols) = self.expr(depth - 1, outer);
                let k = self.rng.gen_range(1..=3);
                let mut items = Vec::new();
                let mut out: Cols = Vec::new();
                for _ in 0..k {
                    let ty = if self.rng.gen_bool(0.5) { cols[self.rng.gen_range(0..cols.len())].1 } else { self.random_type() };
                    let t = self.term(ty, &cols, outer, 1);
                    match &t {
                        Term::Col(n) if cols.iter().any(|(c, _)| c == n) && !out.iter().any(|(o, _)| o == n) => {
                            out.push((n.clone(), ty));
                            items.push(ProjItem::plain(t));
                        }
                        _ => {
                            let name = self.fresh_name("x");
                            out.push((name.clone(), ty));
                            items.push(ProjItem::renamed(t, &name));
                        }
                    }
                }
                (Expression::project(items, e), out)
            }
            6 => {
                self.coverage.hit("product");
                let (a, ca) = self.expr(depth - 1, outer);
                let (b, cb) = self.expr(depth - 1, outer);
                let (b, cb) = if cb.iter().any(|(n, _)| ca.iter().any(|(m, _)| m == n)) {
                    let mut out = Vec::new();
                    let mut it = Vec::new();
                    for (n, ty) in &cb {
                        let name = self.fresh_name("y");
                        it.push(ProjItem::renamed(Term::Col(n.clone()), &name));
                        out.push((name, *ty));
                    }
                    (Expression::project(it, b), out)
                } else {
                    (b, cb)
                };
                let mut cols = ca;
                cols.extend(cb);
                (Expression::product(a, b), cols)
            }
            7..=9 => {
                let (a, ca) = self.expr(depth - 1, outer);
                let (b, cb) = self.expr(depth - 1, outer);
                let types: Vec<ColType> = ca.iter().map(|(_, t)| *t).collect();
                let (b, _) = self.shape(b, &cb, &types, outer);
                let e = match choice {
                    7 => {
                        self.coverage.hit("union-all");
                        Expression::union_all(a, b)
                    }
                    8 => {
                        self.coverage.hit("intersect-all");
                        Expression::intersect_all(a, b)
                    }
                    _ => {
                        self.coverage.hit("except-all");
                        Expression::except_all(a, b)
                    }
                };
                (e, ca)
            }
            10 => {
                self.coverage.hit("distinct");
                let (e, cols) = self.expr(depth - 1, outer);
                (Expression::distinct(e), cols)
            }
            11 | 12 => {
                self.coverage.hit("group");
                let (e, cols) = self.expr(depth - 1, outer);
                let mut keys: Vec<(Name, ColType)> = Vec::new();
                for _ in 0..self.rng.gen_range(0..=2) {
                    let c = cols.choose(self.rng).expect("non-empty").clone();
                    if !keys.contains(&c) {
                        keys.push(c);
                    }
                }
                let mut aggs = Vec::new();
                let mut out = keys.clone();
                for _ in 0..self.rng.gen_range(1..=2) {
                    let nums: Vec<&Name> = cols.iter().filter(|(_, t)| *t == ColType::Num).map(|(n, _)| n).collect();
                    let null_ok = self.cfg.null_producing || !keys.is_empty();
                    let func = *[AggFunc::Count, AggFunc::CountStar, AggFunc::Sum, AggFunc::Avg, AggFunc::Min, AggFunc::Max]
                        .choose(self.rng)
                        .expect("non-empty");
                    let (func, column) = match func {
                        AggFunc::CountStar => (func, None),
                        AggFunc::Count => (func, Some(cols.choose(self.rng).expect("non-empty").0.clone())),
                        _ if nums.is_empty() || !null_ok => (AggFunc::CountStar, None),
                        _ => (func, Some((*nums.choose(self.rng).expect("non-empty")).clone())),
                    };
                    self.coverage.hit(func.name());
                    let name = self.fresh_name("g");
                    aggs.push(Aggregate { func, column, rename: Some(name.clone()) });
                    out.push((name, ColType::Num));
                }
                let keys_only: Vec<Name> = keys.iter().map(|(n, _)| n.clone()).collect();
                (Expression::Group { keys: keys_only, aggs, input: Box::new(e) }, out)
            }
            _ => self.mu(depth, outer),
        }
    }

    /// μX. E1 ∪ π_{add(n,1), v}(σ_{¬isnull(n) ∧ n < k ∧ θ}(X)): the counter
    /// column grows every round, so iteration stops once it passes `k`.
    fn mu(&mut self, depth: usize, outer: &[Cols]) -> (Expression, Cols) {
        let kind = if self.rng.gen_bool(0.5) { MuKind::Bag } else { MuKind::Distinct };
        self.coverage.hit(if kind == MuKind::Bag { "mu:bag" } else { "mu:distinct" });
        let name = self.fresh_name("X");
        let n = self.fresh_name("n");
        let v = self.fresh_name("v");
        let vty = self.random_type();
        let (e, cols) = self.expr(depth - 1, outer);
        let seed_items = vec![
            ProjItem::renamed(self.term(ColType::Num, &cols, outer, 1), &n),
            ProjItem::renamed(self.term(vty, &cols, outer, 1), &v),
        ];
        let rcols: Cols = vec![(n.clone(), ColType::Num), (v.clone(), vty)];
        let base = Expression::project(seed_items, e);
        self.mu_vars.push((name.clone(), rcols.clone()));
        let theta = if self.rng.gen_bool(0.5) { self.cond(depth.saturating_sub(2), &rcols, outer) } else { Condition::True };
        self.mu_vars.pop();
        let limit = self.rng.gen_range(1..=NUM_DOMAIN + 1);
        let guard = Condition::conj([
            Condition::not(Condition::is_null(Term::Col(n.clone()))),
            Condition::cmp(Term::Col(n.clone()), CmpOp::Lt, Term::int(limit)),
            theta,
        ]);
        let step = Expression::project(
            vec![
                ProjItem::renamed(Term::func(Func::Add, vec![Term::Col(n.clone()), Term::int(1)]), &n),
                ProjItem::renamed(Term::Col(v.clone()), &v),
            ],
            Expression::select(guard, Expression::Base(name.clone())),
        );
        (Expression::Mu { name, kind, base: Box::new(base), step: Box::new(step) }, rcols)
    }

    fn subquery(&mut self, depth: usize, cols: &Cols, outer: &[Cols], types: &[ColType]) -> Expression {
        let mut scopes = outer.to_vec();
        scopes.push(cols.clone());
        let (f, fcols) = self.expr(depth, &scopes);
        self.shape(f, &fcols, types, &scopes).0
    }

    fn cond(&mut self, depth: usize, cols: &Cols, outer: &[Cols]) -> Condition {
        let roll: f64 = self.rng.gen();
        if depth > 0 && roll < 0.25 {
            let a = self.cond(depth - 1, cols, outer);
            let b = self.cond(depth - 1, cols, outer);
            return if self.rng.gen_bool(0.5) {
                self.coverage.hit("and");
                Condition::and(a, b)
            } else {
                self.coverage.hit("or");
                Condition::or(a, b)
            };
        }
        if depth > 0 && roll < 0.55 {
            self.coverage.hit("not");
            return Condition::not(self.cond(depth - 1, cols, outer));
        }
        self.atom(depth, cols, outer)
    }

    fn atom(&mut self, depth: usize, cols: &Cols, outer: &[Cols]) -> Condition {
        let sub_depth = depth.min(2);
        let roll = self.rng.gen_range(0..100);
        match roll {
            0..=4 => {
                self.coverage.hit("true/false");
                if self.rng.gen_bool(0.5) {
                    Condition::True
                } else {
                    Condition::False
                }
            }
            5..=14 => {
                self.coverage.hit("isnull");
                let ty = self.random_type();
                Condition::is_null(self.term(ty, cols, outer, 1))
            }
            15..=54 => {
                let width = if self.rng.gen_bool(0.15) { 2 } else { 1 };
                self.coverage.hit(if width == 1 { "cmp" } else { "cmp:tuple" });
                let types: Vec<ColType> = (0..width).map(|_| self.random_type()).collect();
                let op = self.op_for(&types);
                let l = types.iter().map(|&t| self.term(t, cols, outer, 1)).collect();
                let r = types.iter().map(|&t| self.term(t, cols, outer, 1)).collect();
                Condition::Compare(l, op, r)
            }
            55..=66 => {
                self.coverage.hit("in");
                let width = if self.rng.gen_bool(0.2) { 2 } else { 1 };
                let types: Vec<ColType> = (0..width).map(|_| self.random_type()).collect();
                let l = types.iter().map(|&t| self.term(t, cols, outer, 1)).collect();
                Condition::In(l, Box::new(self.subquery(sub_depth, cols, outer, &types)))
            }
            67..=86 => {
                let all = self.rng.gen_bool(0.5);
                self.coverage.hit(if all { "all" } else { "any" });
                let width = if self.rng.gen_bool(0.1) { 2 } else { 1 };
                let types: Vec<ColType> = (0..width).map(|_| self.random_type()).collect();
                let op = self.op_for(&types);
                let l = types.iter().map(|&t| self.term(t, cols, outer, 1)).collect();
                let f = Box::new(self.subquery(sub_depth, cols, outer, &types));
                if all {
                    Condition::All(l, op, f)
                } else {
                    Condition::Any(l, op, f)
                }
            }
            _ => {
                self.coverage.hit("empty");
                let mut scopes = outer.to_vec();
                scopes.push(cols.clone());
                let (f, fcols) = self.expr(sub_depth, &scopes);
                // Correlate through a selection that may mention outer names.
                let c = self.cond(0, &fcols, &scopes);
                Condition::empty(Expression::select(c, f))
            }
        }
    }
}

/// A random well-typed expression of depth at most `cfg.max_depth`.
pub fn gen_expression(schema: &Schema, cfg: &FuzzConfig, rng: &mut impl Rng) -> Expression {
    gen_expression_with_coverage(schema, cfg, rng).0
}

pub fn gen_expression_with_coverage(schema: &Schema, cfg: &FuzzConfig, rng: &mut impl Rng) -> (Expression, Coverage) {
    let mut g = Gen { rng, schema, cfg, fresh: 0, mu_vars: Vec::new(), coverage: Coverage::default() };
    let (e, _) = g.expr(cfg.max_depth, &[]);
    (e, g.coverage)
}

/// A random condition over the output of `e`, for properties that quantify
/// over conditions.
pub fn gen_condition(schema: &Schema, cfg: &FuzzConfig, e: &Expression, rng: &mut impl Rng) -> Result<Condition> {
    let sig = crate::algebra::signature(e, schema)?;
    let cols: Cols = sig.labels.into_iter().zip(sig.types).map(|(n, t)| (n, t.unwrap_or(ColType::Num))).collect();
    let mut g = Gen { rng, schema, cfg, fresh: 1000, mu_vars: Vec::new(), coverage: Coverage::default() };
    Ok(g.cond(cfg.max_depth.saturating_sub(1), &cols, &[]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::typecheck;

    #[test]
    fn deterministic_databases() {
        let cfg = FuzzConfig { seed: 7, ..FuzzConfig::default() };
        let a = gen_database(&fuzz_schema(), &cfg, &mut cfg.rng(0)).unwrap();
        let b = gen_database(&fuzz_schema(), &cfg, &mut cfg.rng(0)).unwrap();
        assert_eq!(a.to_json_string(), b.to_json_string());
    }

    #[test]
    fn no_nulls_at_rate_zero() {
        let cfg = FuzzConfig { null_rate: 0.0, ..FuzzConfig::default() };
        for i in 0..20 {
            assert!(gen_database(&fuzz_schema(), &cfg, &mut cfg.rng(i)).unwrap().is_null_free());
        }
    }

    #[test]
    fn keys_are_distinct() {
        let cfg = FuzzConfig { rows_per_relation: 5, ..FuzzConfig::default() };
        let db = gen_database(&fuzz_schema(), &cfg, &mut cfg.rng(3)).unwrap();
        let t = db.relation("T").unwrap();
        let keys: std::collections::BTreeSet<_> = t.iter().map(|(r, _)| r[0].clone()).collect();
        assert_eq!(keys.len(), 5);
    }

    #[test]
    fn depth_one_is_a_base_relation() {
        let cfg = FuzzConfig { max_depth: 1, ..FuzzConfig::default() };
        for i in 0..10 {
            assert!(matches!(gen_expression(&fuzz_schema(), &cfg, &mut cfg.rng(i)), Expression::Base(_)));
        }
    }

    #[test]
    fn generated_expressions_typecheck() {
        let cfg = FuzzConfig::default();
        for i in 0..300 {
            let e = gen_expression(&fuzz_schema(), &cfg, &mut cfg.rng(i));
            let v = typecheck(&e, &fuzz_schema()).unwrap_or_else(|err| panic!("case {i}: {err}\n{e}"));
            assert!(v.renamings.is_empty(), "case {i} needed renaming: {:?}\n{e}", v.renamings);
        }
    }
}
