use std::collections::BTreeMap;

use proptest::prelude::*;

use nullvl_core::algebra::{expand_tuple_comparison, parse_expression, render_expression, CmpOp, Expression, Term};
use nullvl_core::data::{Bag, Schema};
use nullvl_core::eval::compare_tuples;
use nullvl_core::fuzz::{fuzz_schema, gen_database, gen_expression, FuzzConfig};
use nullvl_core::kernel::{kernel_2vl, kernel_3vl, kernel_4vl_example, Connective};
use nullvl_core::sql::{emit_sql, sql_to_algebra};
use nullvl_core::translate::tr_to_3vl;
use nullvl_core::{eval, eval_condition, Database, Environment, EvalConfig, LogicKernel, Name, TruthValue, Value};

fn kernels() -> Vec<LogicKernel> {
    vec![kernel_2vl(), kernel_3vl(), kernel_4vl_example()]
}

fn corpus_case(seed: u64) -> (Expression, Database) {
    let cfg = FuzzConfig { seed, cases: 1, ..FuzzConfig::default() };
    let schema = fuzz_schema();
    let mut rng = cfg.rng(0);
    let e = gen_expression(&schema, &cfg, &mut rng);
    let db = gen_database(&schema, &cfg, &mut rng).expect("generated database is valid");
    (e, db)
}

fn small_value() -> impl Strategy<Value = Value> {
    prop_oneof![Just(Value::Null), (0i64..3).prop_map(Value::int)]
}

fn connective() -> impl Strategy<Value = Connective> {
    prop_oneof![Just(Connective::And), Just(Connective::Or)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn rendered_expressions_parse_back(seed in any::<u64>()) {
        let (e, _) = corpus_case(seed);
        let text = render_expression(&e);
        prop_assert_eq!(parse_expression(&text).expect("rendered text parses"), e);
    }

    #[test]
    fn folds_repeat_with_the_computed_period(k in 0usize..3, v in 0u8..4, c in connective(), n in 1u64..10_000) {
        let k = &kernels()[k];
        let v = TruthValue(v % k.values().len() as u8);
        let p = k.periodicity(v, c);
        let r = p.reduce(n);
        prop_assert!(r >= 1 && r < p.period as u64);
        prop_assert_eq!(k.fold_power(v, c, n.min(64)), k.fold_power(v, c, p.reduce(n.min(64))));
        prop_assert_eq!(k.fold_power(v, c, n), k.fold_power(v, c, r));
    }

    #[test]
    fn counted_folds_match_expanded_folds(
        k in 0usize..3,
        c in connective(),
        counts in prop::collection::vec((0u8..4, 0u64..40), 1..6),
    ) {
        let k = &kernels()[k];
        let m = k.values().len() as u8;
        let counts: Vec<(TruthValue, u64)> = counts.into_iter().map(|(v, n)| (TruthValue(v % m), n)).collect();
        let expanded: Vec<TruthValue> = counts.iter().flat_map(|&(v, n)| std::iter::repeat_n(v, n as usize)).collect();
        match expanded.split_first() {
            None => prop_assert!(k.fold_counted(c, &counts).is_err()),
            Some((&first, rest)) => {
                let naive = rest.iter().fold(first, |acc, &v| k.apply(c, acc, v));
                prop_assert_eq!(k.fold_counted(c, &counts).unwrap(), naive);
            }
        }
    }

    #[test]
    fn tuple_comparison_matches_its_expansion(
        k in 0usize..3,
        op in prop::sample::select(CmpOp::ALL.to_vec()),
        pairs in prop::collection::vec((small_value(), small_value()), 1..4),
    ) {
        let k = &kernels()[k];
        let (l, r): (Vec<Value>, Vec<Value>) = pairs.into_iter().unzip();
        let name = |side: &str, i: usize| Name::from(format!("{side}{i}"));
        let lt: Vec<Term> = (0..l.len()).map(|i| Term::Col(name("l", i))).collect();
        let rt: Vec<Term> = (0..r.len()).map(|i| Term::Col(name("r", i))).collect();
        let mut env = Environment::new();
        for (i, (a, b)) in l.iter().zip(&r).enumerate() {
            env = env.bind(name("l", i), a.clone()).bind(name("r", i), b.clone());
        }
        let db = Database::new(Schema::new(), BTreeMap::new()).unwrap();
        let cond = expand_tuple_comparison(&lt, op, &rt).unwrap();
        let spelled = eval_condition(&cond, &db, &env, &EvalConfig::new(k.clone())).unwrap();
        prop_assert_eq!(compare_tuples(k, op, &l, &r), spelled);
    }

    #[test]
    fn emitted_sql_evaluates_like_the_expression(seed in any::<u64>()) {
        let (e, db) = corpus_case(seed);
        let sql = emit_sql(&e, &db.schema).expect("corpus expressions are expressible in SQL");
        let back = sql_to_algebra(&sql, &db.schema).map_err(|err| TestCaseError::fail(format!("{err}\n{sql}")))?;
        let cfg = EvalConfig::new(kernel_3vl());
        let env = Environment::new();
        match (eval(&e, &db, &env, &cfg), eval(&back, &db, &env, &cfg)) {
            (Ok(a), Ok(b)) => prop_assert_eq!(a, b, "{}", sql),
            (Err(x), Err(y)) => prop_assert_eq!(x.to_string(), y.to_string()),
            (a, b) => prop_assert!(false, "{:?} vs {:?} for {}", a.is_ok(), b.is_ok(), sql),
        }
    }

    #[test]
    fn translation_preserves_null_free_results(seed in any::<u64>()) {
        let cfg = FuzzConfig { seed, cases: 1, null_rate: 0.0, null_producing: false, ..FuzzConfig::default() };
        let schema = fuzz_schema();
        let mut rng = cfg.rng(0);
        let e = gen_expression(&schema, &cfg, &mut rng);
        let db = gen_database(&schema, &cfg, &mut rng).unwrap();
        let out = tr_to_3vl(&e, &schema).unwrap().output;
        let env = Environment::new();
        let a = eval(&e, &db, &env, &EvalConfig::new(kernel_3vl()));
        let b = eval(&out, &db, &env, &EvalConfig::new(kernel_3vl()));
        if let (Ok(a), Ok(b)) = (a, b) {
            prop_assert_eq!(a, b);
        }
    }

    #[test]
    fn bag_operations_respect_multiplicities(
        xs in prop::collection::vec((0i64..4, 1u64..4), 0..6),
        ys in prop::collection::vec((0i64..4, 1u64..4), 0..6),
    ) {
        let build = |rows: &[(i64, u64)]| {
            let mut b = Bag::new();
            for &(v, n) in rows {
                b.insert(vec![Value::int(v)], n).unwrap();
            }
            b
        };
        let (a, b) = (build(&xs), build(&ys));
        let schema = Schema::new()
            .with("A", vec![nullvl_core::data::Column::new("x", nullvl_core::value::ColType::Num)])
            .with("B", vec![nullvl_core::data::Column::new("x", nullvl_core::value::ColType::Num)]);
        let db = Database::new(schema, [(Name::new("A"), a.clone()), (Name::new("B"), b.clone())].into_iter().collect()).unwrap();
        let run = |s: &str| eval(&parse_expression(s).unwrap(), &db, &Environment::new(), &EvalConfig::new(kernel_3vl())).unwrap();
        let union = run("(union-all (base A) (base B))");
        let inter = run("(intersect-all (base A) (base B))");
        let except = run("(except-all (base A) (base B))");
        for v in 0..4 {
            let t = [Value::int(v)];
            let (m, n) = (a.multiplicity(&t), b.multiplicity(&t));
            prop_assert_eq!(union.multiplicity(&t), m + n);
            prop_assert_eq!(inter.multiplicity(&t), m.min(n));
            prop_assert_eq!(except.multiplicity(&t), m.saturating_sub(n));
        }
    }
}
