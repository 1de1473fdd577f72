//! SQL frontend: a subset of SQL parsed into the algebra, and algebra printed
//! back as SQL.

mod ast;
mod emit;
mod lexer;
mod lower;
mod parser;

pub use ast::{Arith, Cond, Cte, FromItem, Quantifier, Query, Scalar, Select, SelectItem, SetOp, Source};

use crate::algebra::Expression;
use crate::data::Schema;
use crate::error::Result;

/// A parsed SQL query with its source text.
#[derive(Clone, Debug, PartialEq)]
pub struct SqlQuery {
    pub source: String,
    pub ast: Query,
}

pub fn parse_sql(text: &str) -> Result<SqlQuery> {
    Ok(SqlQuery { source: text.to_string(), ast: parser::parse(text)? })
}

/// Resolves names against `schema` and produces the algebra expression.
pub fn lower_to_algebra(q: &SqlQuery, schema: &Schema) -> Result<Expression> {
    lower::lower(&q.ast, schema)
}

pub fn sql_to_algebra(text: &str, schema: &Schema) -> Result<Expression> {
    lower_to_algebra(&parse_sql(text)?, schema)
}

/// Prints `e` as a SQL query over the relations of `schema`.
pub fn emit_sql(e: &Expression, schema: &Schema) -> Result<String> {
    emit::emit(e, schema)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::parse_expression;
    use crate::data::Column;
    use crate::error::Error;
    use crate::value::ColType;

    fn rs() -> Schema {
        Schema::new().with("R", vec![Column::new("A", ColType::Num)]).with("S", vec![Column::new("A", ColType::Num)])
    }

    fn lowered(sql: &str) -> Expression {
        sql_to_algebra(sql, &rs()).unwrap_or_else(|e| panic!("{sql}: {e}"))
    }

    fn expr(s: &str) -> Expression {
        parse_expression(s).unwrap()
    }

    #[test]
    fn not_in_and_not_exists() {
        assert_eq!(
            lowered("SELECT R.A FROM R WHERE R.A NOT IN (SELECT S.A FROM S)"),
            expr("(select (not (in (col R.A) (base S))) (base R))")
        );
        assert_eq!(
            lowered("SELECT R.A FROM R WHERE NOT EXISTS (SELECT S.A FROM S WHERE S.A = R.A)"),
            expr("(select (empty (select (cmp (col S.A) = (col R.A)) (base S))) (base R))")
        );
        assert_eq!(
            lowered("SELECT A FROM R WHERE EXISTS (SELECT * FROM S WHERE S.A = R.A)"),
            expr("(select (not (empty (select (cmp (col S.A) = (col R.A)) (base S)))) (base R))")
        );
    }

    #[test]
    fn aliases_and_distinct() {
        assert_eq!(
            lowered("SELECT DISTINCT X.A FROM R X, R Y WHERE X.A = Y.A"),
            expr(
                "(distinct (project ((col X.A)) (select (cmp (col X.A) = (col Y.A)) \
                 (product (project ((as (col R.A) X.A)) (base R)) (project ((as (col R.A) Y.A)) (base R))))))"
            )
        );
        assert_eq!(lowered("SELECT DISTINCT R.A FROM R"), expr("(distinct (base R))"));
    }

    #[test]
    fn set_operations() {
        assert_eq!(lowered("SELECT * FROM R UNION ALL SELECT * FROM S"), expr("(union-all (base R) (base S))"));
        assert_eq!(lowered("SELECT * FROM R UNION SELECT * FROM S"), expr("(distinct (union-all (base R) (base S)))"));
        assert_eq!(lowered("SELECT * FROM R EXCEPT SELECT * FROM S"), expr("(except-all (distinct (base R)) (base S))"));
        assert_eq!(
            lowered("SELECT * FROM R INTERSECT ALL SELECT * FROM S"),
            expr("(intersect-all (base R) (base S))")
        );
    }

    #[test]
    fn joins_lists_and_between() {
        assert_eq!(
            lowered("SELECT R.A FROM R JOIN S ON R.A = S.A WHERE R.A IN (1, 2) AND S.A BETWEEN 0 AND 3"),
            expr(
                "(project ((col R.A)) (select (and (cmp (col R.A) = (col S.A)) (and (or (cmp (col R.A) = (num 1)) \
                 (cmp (col R.A) = (num 2))) (and (cmp (col S.A) >= (num 0)) (cmp (col S.A) <= (num 3))))) \
                 (product (base R) (base S))))"
            )
        );
    }

    #[test]
    fn grouping_and_having() {
        assert_eq!(
            lowered("SELECT A, COUNT(*) AS k FROM R GROUP BY A HAVING COUNT(*) > 1"),
            expr("(project ((col R.A) (as (col \"count(*)\") k)) (select (cmp (col \"count(*)\") > (num 1)) (group (R.A) ((count_star)) (base R))))")
        );
        assert_eq!(lowered("SELECT SUM(A) FROM R"), expr("(group () ((sum R.A)) (base R))"));
        assert!(matches!(sql_to_algebra("SELECT A, COUNT(*) FROM R", &rs()), Err(Error::Unsupported(_))));
    }

    #[test]
    fn recursion() {
        assert_eq!(
            lowered("WITH RECURSIVE X(n) AS (SELECT A FROM R UNION ALL SELECT n + 1 FROM X WHERE n < 3) SELECT n FROM X"),
            expr(
                "(mu X bag (project ((as (col R.A) X.n)) (base R)) \
                 (project ((fn add (col X.n) (num 1))) (select (cmp (col X.n) < (num 3)) (base X))))"
            )
        );
    }

    #[test]
    fn rejections() {
        let err = |sql: &str| sql_to_algebra(sql, &rs()).unwrap_err();
        assert!(matches!(err("SELECT A, ROW_NUMBER() OVER (ORDER BY A) FROM R"), Error::Unsupported(_)));
        assert!(matches!(err("SELECT SUM(A) OVER () FROM R"), Error::Unsupported(m) if m.contains("window")));
        assert!(matches!(err("SELECT A FROM R ORDER BY A"), Error::Unsupported(m) if m.contains("ORDER BY")));
        assert!(matches!(err("SELECT * FROM R LEFT JOIN S ON R.A = S.A"), Error::Unsupported(m) if m.contains("outer")));
        assert!(matches!(err("SELECT B FROM R"), Error::UnresolvedColumn(_)));
        assert!(matches!(err("SELECT A FROM R, S"), Error::UnresolvedColumn(m) if m.contains("ambiguous")));
        assert!(matches!(err("SELECT A FROM T"), Error::UnknownRelation(_)));
        assert!(matches!(err("SELECT A FROM R WHERE A > (SELECT A FROM S)"), Error::Unsupported(_)));
        match err("SELECT A\nFROM R WHERE") {
            Error::SqlSyntax { line, column, .. } => assert_eq!((line, column), (2, 13)),
            other => panic!("{other}"),
        }
    }

    #[test]
    fn emitted_sql() {
        let s = rs();
        assert_eq!(emit_sql(&expr("(base R)"), &s).unwrap(), "SELECT * FROM R");
        let q1 = expr("(select (or (isnull (col R.A)) (not (in (col R.A) (select (not (isnull (col S.A))) (base S))))) (base R))");
        assert_eq!(
            emit_sql(&q1, &s).unwrap(),
            "SELECT * FROM R WHERE R.A IS NULL OR R.A NOT IN (SELECT * FROM S WHERE S.A IS NOT NULL)"
        );
        let correlated = expr("(select (empty (select (cmp (col R.A) = (col R.A)) (base R))) (base R))");
        assert_eq!(
            emit_sql(&correlated, &s).unwrap(),
            "SELECT * FROM R WHERE NOT EXISTS (SELECT * FROM R R_2 WHERE R_2.A = R_2.A)"
        );
    }
}
