use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};

use nullvl_bench::{corpus, Q5};
use nullvl_core::data::{Column, Schema};
use nullvl_core::kernel::{kernel_3vl, kernel_4vl_example};
use nullvl_core::sql::{emit_sql, sql_to_algebra};
use nullvl_core::translate::{tr_from_3vl, tr_mvl_to_3vl, tr_to_3vl};
use nullvl_core::value::ColType;
use nullvl_core::{eval, Environment, EvalConfig};

fn translations(c: &mut Criterion) {
    let cases = corpus(100, 4);
    let k4 = kernel_4vl_example();
    let mut g = c.benchmark_group("translate");
    g.bench_function("2to3", |b| b.iter(|| cases.iter().filter(|(e, db)| tr_to_3vl(black_box(e), &db.schema).is_ok()).count()));
    g.bench_function("3to2", |b| b.iter(|| cases.iter().filter(|(e, db)| tr_from_3vl(black_box(e), &db.schema).is_ok()).count()));
    g.bench_function("mvl-to-3", |b| {
        b.iter(|| cases.iter().filter(|(e, db)| tr_mvl_to_3vl(black_box(e), &db.schema, &k4).is_ok()).count())
    });
    g.finish();
}

fn evaluation(c: &mut Criterion) {
    let cases = corpus(50, 4);
    let translated: Vec<_> = cases.iter().filter_map(|(e, db)| tr_to_3vl(e, &db.schema).ok().map(|t| (t.output, db))).collect();
    let cfg = EvalConfig::new(kernel_3vl());
    let env = Environment::new();
    let mut g = c.benchmark_group("eval-3vl");
    g.bench_function("native", |b| b.iter(|| cases.iter().filter(|(e, db)| eval(black_box(e), db, &env, &cfg).is_ok()).count()));
    g.bench_function("translated", |b| {
        b.iter(|| translated.iter().filter(|(e, db)| eval(black_box(e), db, &env, &cfg).is_ok()).count())
    });
    g.finish();
}

fn sql(c: &mut Criterion) {
    let tpch = Schema::new()
        .with(
            "customer",
            vec![
                Column::new("c_custkey", ColType::Num).key(),
                Column::new("c_nationkey", ColType::Num),
                Column::new("c_acctbal", ColType::Num),
            ],
        )
        .with("orders", vec![Column::new("o_orderkey", ColType::Num).key(), Column::new("o_custkey", ColType::Num).not_null()]);
    let q5 = sql_to_algebra(Q5, &tpch).expect("Q5 lowers");
    let mut g = c.benchmark_group("sql");
    g.bench_function("lower-q5", |b| b.iter(|| sql_to_algebra(black_box(Q5), &tpch).unwrap()));
    g.bench_function("emit-q5", |b| b.iter(|| emit_sql(black_box(&q5), &tpch).unwrap()));
    g.finish();
}

criterion_group!(benches, translations, evaluation, sql);
criterion_main!(benches);
