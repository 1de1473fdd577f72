//! Fixtures shared by the benchmarks.

use nullvl_core::fuzz::{fuzz_schema, gen_database, gen_expression, FuzzConfig};
use nullvl_core::{Database, Expression};

/// `n` generated queries, each with its database, from a fixed seed.
pub fn corpus(n: usize, max_depth: usize) -> Vec<(Expression, Database)> {
    let cfg = FuzzConfig { cases: n, max_depth, ..FuzzConfig::default() };
    let schema = fuzz_schema();
    (0..n)
        .map(|i| {
            let mut rng = cfg.rng(i);
            let e = gen_expression(&schema, &cfg, &mut rng);
            let db = gen_database(&schema, &cfg, &mut rng).expect("generated database is valid");
            (e, db)
        })
        .collect()
}

pub const Q5: &str = "SELECT c_nationkey, COUNT(c_custkey) FROM customer \
WHERE c_acctbal > (SELECT avg(c_acctbal) FROM customer WHERE c_acctbal > 0.0 AND \
c_custkey NOT IN (SELECT o_custkey FROM orders)) GROUP BY c_nationkey";
