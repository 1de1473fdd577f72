//! Static analysis: which output attributes may hold NULL, and when a query
//! is guaranteed to give the same answer under two-valued and SQL semantics.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::algebra::{render_condition, AggFunc, Condition, Expression, Term};
use crate::data::Schema;
use crate::error::{Error, Result};
use crate::value::Name;

/// Nullability of one subexpression.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct NodeReport {
    pub path: String,
    pub kind: String,
    pub labels: Vec<Name>,
    pub nullable: Vec<Name>,
}

/// Which requirement a negated sub-condition breaks.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Rule {
    /// The NULL constant occurs under the negation.
    NullConstant,
    /// A comparison under the negation mentions a nullable name.
    NullableComparison,
    /// A subquery atom under the negation has nullable output or a nullable tuple.
    NullableSubquery,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub rule: Rule,
    /// The negated sub-condition `¬θ'`.
    pub negation: String,
    /// The offending part of θ'.
    pub offender: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SelectionReport {
    pub path: String,
    pub condition: String,
    pub null_free: bool,
    pub violations: Vec<Violation>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct NullabilityReport {
    pub nodes: Vec<NodeReport>,
    pub selections: Vec<SelectionReport>,
    pub certified: bool,
}

impl NullabilityReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Plain-text table, one line per node and selection.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let width = self.nodes.iter().map(|n| n.path.len()).max().unwrap_or(4).max(4);
        out.push_str(&format!("{:width$}  {:10}  nullable\n", "path", "node"));
        for n in &self.nodes {
            let names: Vec<&str> = n.nullable.iter().map(Name::as_str).collect();
            out.push_str(&format!("{:width$}  {:10}  [{}]\n", n.path, n.kind, names.join(", ")));
        }
        for s in &self.selections {
            let verdict = if s.null_free { "null-free" } else { "NOT null-free" };
            out.push_str(&format!("selection {}: {verdict}\n", s.path));
            for v in &s.violations {
                out.push_str(&format!("  {:?}: {} in {}\n", v.rule, v.offender, v.negation));
            }
        }
        out.push_str(if self.certified { "certified\n" } else { "uncertified\n" });
        out
    }
}

/// Outcome of the coincidence check.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Certificate {
    Certified,
    Uncertified { witnesses: Vec<SelectionReport> },
}

impl Certificate {
    pub fn is_certified(&self) -> bool {
        matches!(self, Certificate::Certified)
    }
}

/// Labels with a nullability flag per position.
#[derive(Clone, Debug, PartialEq, Eq)]
struct Attrs {
    labels: Vec<Name>,
    nullable: Vec<bool>,
}

impl Attrs {
    fn nullable_names(&self) -> Vec<Name> {
        self.labels.iter().zip(&self.nullable).filter(|(_, n)| **n).map(|(l, _)| l.clone()).collect()
    }
}

struct Analyzer<'s> {
    schema: &'s Schema,
    /// Inputs of enclosing selections, innermost last; correlated names resolve here.
    outer: Vec<Attrs>,
    bound: Vec<(Name, Attrs)>,
    nodes: BTreeMap<String, NodeReport>,
    selections: BTreeMap<String, SelectionReport>,
}

impl<'s> Analyzer<'s> {
    fn new(schema: &'s Schema) -> Self {
        Analyzer { schema, outer: Vec::new(), bound: Vec::new(), nodes: BTreeMap::new(), selections: BTreeMap::new() }
    }

    /// Whether a name may hold NULL, looking in `input` first and then outward.
    /// Names that resolve nowhere are treated as nullable.
    fn name_nullable(&self, input: &Attrs, n: &Name) -> bool {
        for scope in std::iter::once(input).chain(self.outer.iter().rev()) {
            if let Some(i) = scope.labels.iter().rposition(|l| l == n) {
                return scope.nullable[i];
            }
        }
        true
    }

    /// A term may be NULL when it mentions a nullable name or the NULL
    /// constant, or applies a function that is undefined on some inputs.
    fn term_nullable(&self, input: &Attrs, t: &Term) -> bool {
        if t.mentions_null() || t.has_partial_function() {
            return true;
        }
        let mut any = false;
        t.for_each_name(&mut |n| any |= self.name_nullable(input, n));
        any
    }

    fn analyze(&mut self, e: &Expression, path: &str) -> Result<Attrs> {
        let attrs = match e {
            Expression::Base(n) => {
                if let Some((_, a)) = self.bound.iter().rev().find(|(b, _)| b == n) {
                    a.clone()
                } else {
                    let rel = self.schema.get(n).ok_or_else(|| Error::UnknownRelation(n.to_string()))?;
                    Attrs { labels: rel.labels(n), nullable: rel.columns.iter().map(|c| c.may_be_null()).collect() }
                }
            }
            Expression::Project(items, inner) => {
                let a = self.analyze(inner, &format!("{path}.0"))?;
                Attrs {
                    labels: items.iter().map(|i| i.output_name()).collect(),
                    nullable: items.iter().map(|i| self.term_nullable(&a, &i.term)).collect(),
                }
            }
            Expression::Select(c, inner) => {
                let a = self.analyze(inner, &format!("{path}.0"))?;
                self.check_selection(c, &a, path)?;
                a
            }
            Expression::Distinct(inner) => self.analyze(inner, &format!("{path}.0"))?,
            Expression::Product(l, r) => {
                let mut a = self.analyze(l, &format!("{path}.0"))?;
                let b = self.analyze(r, &format!("{path}.1"))?;
                a.labels.extend(b.labels);
                a.nullable.extend(b.nullable);
                a
            }
            Expression::UnionAll(l, r) | Expression::IntersectAll(l, r) => {
                let mut a = self.analyze(l, &format!("{path}.0"))?;
                let b = self.analyze(r, &format!("{path}.1"))?;
                let union = matches!(e, Expression::UnionAll(..));
                for (x, y) in a.nullable.iter_mut().zip(&b.nullable) {
                    *x = if union { *x || *y } else { *x && *y };
                }
                a
            }
            Expression::ExceptAll(l, r) => {
                let a = self.analyze(l, &format!("{path}.0"))?;
                self.analyze(r, &format!("{path}.1"))?;
                a
            }
            Expression::Group { keys, aggs, input } => {
                let a = self.analyze(input, &format!("{path}.0"))?;
                let mut labels = keys.clone();
                let mut nullable: Vec<bool> = keys.iter().map(|k| self.name_nullable(&a, k)).collect();
                for g in aggs {
                    labels.push(g.output_name());
                    nullable.push(match (g.func, &g.column) {
                        (AggFunc::Count | AggFunc::CountStar, _) => false,
                        // A global group over an empty input still yields one
                        // record, with NULL in every non-count aggregate.
                        (_, _) if keys.is_empty() => true,
                        (_, Some(c)) => self.name_nullable(&a, c),
                        (_, None) => true,
                    });
                }
                Attrs { labels, nullable }
            }
            Expression::Mu { name, base, step, .. } => {
                // Least fixpoint: the recursive relation starts with the base
                // case's nullability and grows until the step adds nothing.
                let mut cur = self.analyze(base, &format!("{path}.0"))?;
                loop {
                    self.bound.push((name.clone(), cur.clone()));
                    let s = self.analyze(step, &format!("{path}.1"));
                    self.bound.pop();
                    let s = s?;
                    let next: Vec<bool> = cur.nullable.iter().zip(&s.nullable).map(|(x, y)| *x || *y).collect();
                    if next == cur.nullable {
                        break cur;
                    }
                    cur.nullable = next;
                }
            }
        };
        self.nodes.insert(
            path.to_string(),
            NodeReport {
                path: path.to_string(),
                kind: e.kind().to_string(),
                labels: attrs.labels.clone(),
                nullable: attrs.nullable_names(),
            },
        );
        Ok(attrs)
    }

    /// Nullability of a subquery evaluated under a record of `input`.
    fn subquery(&mut self, input: &Attrs, f: &Expression, path: &str) -> Result<Attrs> {
        self.outer.push(input.clone());
        let r = self.analyze(f, path);
        self.outer.pop();
        r
    }

    fn check_selection(&mut self, c: &Condition, input: &Attrs, path: &str) -> Result<()> {
        let mut violations = Vec::new();
        let mut counter = 0;
        self.walk(c, input, path, &mut counter, &mut violations)?;
        self.selections.insert(
            path.to_string(),
            SelectionReport {
                path: path.to_string(),
                condition: render_condition(c),
                null_free: violations.is_empty(),
                violations,
            },
        );
        Ok(())
    }

    /// Visits every sub-condition, analyzing subqueries and checking each
    /// negation.
    fn walk(&mut self, c: &Condition, input: &Attrs, path: &str, counter: &mut usize, out: &mut Vec<Violation>) -> Result<()> {
        match c {
            Condition::In(_, f) | Condition::Any(_, _, f) | Condition::All(_, _, f) | Condition::Empty(f) => {
                *counter += 1;
                self.subquery(input, f, &format!("{path}.c{counter}"))?;
            }
            Condition::And(a, b) | Condition::Or(a, b) => {
                self.walk(a, input, path, counter, out)?;
                self.walk(b, input, path, counter, out)?;
            }
            Condition::Not(inner) => {
                self.check_negation(c, inner, input, out)?;
                self.walk(inner, input, path, counter, out)?;
            }
            Condition::True | Condition::False | Condition::IsNull(_) | Condition::Compare(..) => {}
        }
        Ok(())
    }

    fn check_negation(&mut self, neg: &Condition, inner: &Condition, input: &Attrs, out: &mut Vec<Violation>) -> Result<()> {
        let negation = render_condition(neg);
        if inner.mentions_null() {
            out.push(Violation { rule: Rule::NullConstant, negation: negation.clone(), offender: "NULL".into() });
        }
        let mut atoms = Vec::new();
        collect_atoms(inner, &mut atoms);
        for atom in atoms {
            match atom {
                Condition::Compare(l, _, r) => {
                    if l.iter().chain(r).any(|t| self.term_nullable(input, t)) {
                        out.push(Violation {
                            rule: Rule::NullableComparison,
                            negation: negation.clone(),
                            offender: render_condition(atom),
                        });
                    }
                }
                Condition::In(l, f) | Condition::Any(l, _, f) | Condition::All(l, _, f) => {
                    let tuple = l.iter().any(|t| self.term_nullable(input, t));
                    // Recorded under a scratch path; the walk records the real one.
                    let saved = (self.nodes.clone(), self.selections.clone());
                    let a = self.subquery(input, f, "scratch")?;
                    (self.nodes, self.selections) = saved;
                    if tuple || a.nullable.iter().any(|n| *n) {
                        out.push(Violation {
                            rule: Rule::NullableSubquery,
                            negation: negation.clone(),
                            offender: render_condition(atom),
                        });
                    }
                }
                _ => {}
            }
        }
        Ok(())
    }

    fn finish(self) -> NullabilityReport {
        let certified = self.selections.values().all(|s| s.null_free);
        NullabilityReport {
            nodes: self.nodes.into_values().collect(),
            selections: self.selections.into_values().collect(),
            certified,
        }
    }
}

/// Atomic conditions of `c`, not descending into subqueries.
fn collect_atoms<'c>(c: &'c Condition, out: &mut Vec<&'c Condition>) {
    match c {
        Condition::And(a, b) | Condition::Or(a, b) => {
            collect_atoms(a, out);
            collect_atoms(b, out);
        }
        Condition::Not(a) => collect_atoms(a, out),
        _ => out.push(c),
    }
}

/// The attributes of `e` that may hold NULL, in output order.
pub fn nullable(e: &Expression, schema: &Schema) -> Result<Vec<Name>> {
    Ok(Analyzer::new(schema).analyze(e, "$")?.nullable_names())
}

/// Null-freeness of a single selection `σ_θ(E)`; `e` must be a selection.
pub fn null_free(e: &Expression, schema: &Schema) -> Result<SelectionReport> {
    let Expression::Select(..) = e else {
        return Err(Error::ty("select", "null-freeness is defined for selections"));
    };
    let mut a = Analyzer::new(schema);
    a.analyze(e, "$")?;
    Ok(a.selections.remove("$").expect("selection analyzed"))
}

/// Full report: nullability of every subexpression and every selection's verdict.
pub fn analyze(e: &Expression, schema: &Schema) -> Result<NullabilityReport> {
    let mut a = Analyzer::new(schema);
    a.analyze(e, "$")?;
    Ok(a.finish())
}

/// Certified when every selection, including those inside condition
/// subqueries, is null-free. Certified queries agree under two-valued and
/// SQL semantics on every database.
pub fn coincidence_certificate(e: &Expression, schema: &Schema) -> Result<Certificate> {
    let report = analyze(e, schema)?;
    Ok(if report.certified {
        Certificate::Certified
    } else {
        Certificate::Uncertified { witnesses: report.selections.into_iter().filter(|s| !s.null_free).collect() }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::parse_expression;
    use crate::data::Column;
    use crate::value::ColType;

    fn schema(r_key: bool) -> Schema {
        let a = Column::new("A", ColType::Num);
        Schema::new()
            .with("R", vec![if r_key { a.clone().key() } else { a.clone() }, Column::new("B", ColType::Num).not_null()])
            .with("S", vec![a])
    }

    fn names(v: &[&str]) -> Vec<Name> {
        v.iter().map(|s| Name::new(s)).collect()
    }

    #[test]
    fn propagation() {
        let s = schema(false);
        let e = |t: &str| parse_expression(t).unwrap();
        assert_eq!(nullable(&e("(base R)"), &s).unwrap(), names(&["R.A"]));
        assert_eq!(nullable(&e("(product (base R) (base S))"), &s).unwrap(), names(&["R.A", "S.A"]));
        assert_eq!(nullable(&e("(project ((as (num 1) one) (col R.B) (col R.A)) (base R))"), &s).unwrap(), names(&["R.A"]));
        assert_eq!(nullable(&e("(project ((fn div (col R.B) (num 2))) (base R))"), &s).unwrap(), names(&["div(R.B,2)"]));
        let u = "(project ((as (col R.B) X)) (base R))";
        let v = "(project ((as (col S.A) X)) (base S))";
        assert_eq!(nullable(&e(&format!("(union-all {u} {v})")), &s).unwrap(), names(&["X"]));
        assert_eq!(nullable(&e(&format!("(intersect-all {u} {v})")), &s).unwrap(), names(&[]));
        assert_eq!(nullable(&e(&format!("(except-all {u} {v})")), &s).unwrap(), names(&[]));
        let g = "(group (R.A) ((count R.A) (sum R.B) (max R.A)) (base R))";
        assert_eq!(nullable(&e(g), &s).unwrap(), names(&["R.A", "max(R.A)"]));
        let global = "(group () ((count R.A) (sum R.B)) (base R))";
        assert_eq!(nullable(&e(global), &s).unwrap(), names(&["sum(R.B)"]));
    }

    #[test]
    fn recursion_reaches_fixpoint() {
        let s = schema(false);
        let base = "(project ((as (col R.B) X) (as (col R.B) Y)) (base R))";
        let step = "(project ((col Y) (as (null) Y2)) (base T))";
        let step = format!("(project ((as (col Y) X) (as (col Y2) Y)) {step})");
        let e = parse_expression(&format!("(mu T bag {base} {step})")).unwrap();
        // The first round makes Y nullable, the second X.
        assert_eq!(nullable(&e, &s).unwrap(), names(&["X", "Y"]));
    }

    #[test]
    fn null_free_verdicts() {
        let q1 = parse_expression("(select (not (in (col R.A) (base S))) (base R))").unwrap();
        let r = null_free(&q1, &schema(false)).unwrap();
        assert!(!r.null_free);
        assert_eq!(r.violations[0].rule, Rule::NullableSubquery);
        let pos = parse_expression("(select (cmp (col R.A) = (num 1)) (base R))").unwrap();
        assert!(null_free(&pos, &schema(false)).unwrap().null_free);
        let keyed = parse_expression("(select (not (cmp (col R.A) = (num 1))) (base R))").unwrap();
        assert!(null_free(&keyed, &schema(true)).unwrap().null_free);
        assert!(!null_free(&keyed, &schema(false)).unwrap().null_free);
        let lit = parse_expression("(select (not (isnull (null))) (base R))").unwrap();
        assert_eq!(null_free(&lit, &schema(true)).unwrap().violations[0].rule, Rule::NullConstant);
    }

    #[test]
    fn certificate_looks_inside_subqueries() {
        let s = schema(true);
        let inner = "(select (not (cmp (col S.A) = (col R.A))) (base S))";
        let e = parse_expression(&format!("(select (empty {inner}) (base R))")).unwrap();
        match coincidence_certificate(&e, &s).unwrap() {
            Certificate::Uncertified { witnesses } => assert_eq!(witnesses[0].path, "$.c1"),
            Certificate::Certified => panic!("nullable S.A under negation"),
        }
    }
}
