//! Query translations between null semantics.
//!
//! Every translation rewrites the conditions of an expression and leaves the
//! relational structure alone, so output labels are preserved.

mod binary;
mod mvl;

use serde::Serialize;

use crate::algebra::{output_labels, render_condition, Condition, Expression, ProjItem, Term};
use crate::data::{Bag, Database, Schema};
use crate::env::Environment;
use crate::error::{Error, Result};
use crate::eval::{eval, EvalConfig};
use crate::kernel::{kernel_2vl, kernel_3vl, kernel_grounded, Grounding, LogicKernel};
use crate::value::Name;

pub use binary::Mode;

/// Prefix reserved for names generated by translations.
pub const FRESH_PREFIX: &str = "__tr";

/// One rule application, recorded in input order.
#[derive(Clone, Debug, Serialize)]
pub struct TraceEntry {
    pub rule: String,
    pub source: String,
}

#[derive(Clone, Debug)]
pub struct TranslationResult {
    pub output: Expression,
    /// Output size divided by input size.
    pub size_ratio: f64,
    pub provenance: Vec<TraceEntry>,
}

/// State shared by all translators: schema, recursion bindings in scope,
/// fresh-name counter and the trace.
pub(crate) struct Scope<'s> {
    schema: &'s Schema,
    bound: Vec<(Name, Vec<Name>)>,
    fresh: usize,
    trace: Vec<TraceEntry>,
}

impl<'s> Scope<'s> {
    fn new(schema: &'s Schema) -> Self {
        Scope { schema, bound: Vec::new(), fresh: 0, trace: Vec::new() }
    }

    fn labels(&self, e: &Expression) -> Result<Vec<Name>> {
        output_labels(e, self.schema, &self.bound)
    }

    fn note(&mut self, rule: &str, c: &Condition) {
        self.trace.push(TraceEntry { rule: rule.to_string(), source: render_condition(c) });
    }

    pub(crate) fn fresh(&mut self) -> usize {
        self.fresh += 1;
        self.fresh
    }

    /// Returns `g` and terms for its columns, to be used in a condition
    /// evaluated over `g` that also mentions `outer`. When some outer term
    /// mentions a column name of `g`, the columns are renamed apart first.
    fn columns_for(&mut self, outer: &[Term], g: Expression, labels: &[Name]) -> Result<(Expression, Vec<Term>)> {
        if labels.len() != outer.len() {
            return Err(Error::Arity(format!(
                "tuple of length {} against a subquery with {} columns",
                outer.len(),
                labels.len()
            )));
        }
        let mut captured = false;
        for t in outer {
            t.for_each_name(&mut |n| captured |= labels.contains(n));
        }
        if !captured {
            return Ok((g, labels.iter().map(|n| Term::Col(n.clone())).collect()));
        }
        let k = self.fresh();
        let fresh: Vec<Name> = (0..labels.len()).map(|i| Name::from(format!("{FRESH_PREFIX}{k}_{i}"))).collect();
        let items = labels.iter().zip(&fresh).map(|(l, f)| ProjItem::renamed(Term::Col(l.clone()), f)).collect();
        Ok((Expression::project(items, g), fresh.into_iter().map(Term::Col).collect()))
    }
}

/// A translator rewrites top-level selection conditions.
pub(crate) trait Rewriter<'s> {
    fn scope(&mut self) -> &mut Scope<'s>;
    fn top(&mut self, c: &Condition) -> Result<Condition>;

    fn expr(&mut self, e: &Expression) -> Result<Expression> {
        Ok(match e {
            Expression::Base(_) => e.clone(),
            Expression::Project(items, inner) => Expression::project(items.clone(), self.expr(inner)?),
            Expression::Select(c, inner) => {
                let c = self.top(c)?;
                Expression::select(c, self.expr(inner)?)
            }
            Expression::Product(a, b) => Expression::product(self.expr(a)?, self.expr(b)?),
            Expression::UnionAll(a, b) => Expression::union_all(self.expr(a)?, self.expr(b)?),
            Expression::IntersectAll(a, b) => Expression::intersect_all(self.expr(a)?, self.expr(b)?),
            Expression::ExceptAll(a, b) => Expression::except_all(self.expr(a)?, self.expr(b)?),
            Expression::Distinct(inner) => Expression::distinct(self.expr(inner)?),
            Expression::Group { keys, aggs, input } => {
                Expression::Group { keys: keys.clone(), aggs: aggs.clone(), input: Box::new(self.expr(input)?) }
            }
            Expression::Mu { name, kind, base, step } => {
                let labels = self.scope().labels(base)?;
                let base = self.expr(base)?;
                self.scope().bound.push((name.clone(), labels));
                let step = self.expr(step);
                self.scope().bound.pop();
                Expression::Mu { name: name.clone(), kind: *kind, base: Box::new(base), step: Box::new(step?) }
            }
        })
    }
}

fn finish(input: &Expression, output: Expression, trace: Vec<TraceEntry>) -> TranslationResult {
    let size_ratio = output.size() as f64 / input.size() as f64;
    TranslationResult { output, size_ratio, provenance: trace }
}

/// Two-valued (conflating) semantics to SQL's three-valued semantics.
pub fn tr_to_3vl(e: &Expression, schema: &Schema) -> Result<TranslationResult> {
    binary::run(e, schema, Mode::TwoToThree, None)
}

/// SQL's three-valued semantics to two-valued semantics.
pub fn tr_from_3vl(e: &Expression, schema: &Schema) -> Result<TranslationResult> {
    binary::run(e, schema, Mode::ThreeToTwo, None)
}

/// Grounded two-valued semantics to SQL's three-valued semantics.
pub fn tr_grounded_to_3vl(e: &Expression, schema: &Schema, g: &Grounding) -> Result<TranslationResult> {
    binary::run(e, schema, Mode::GroundedToThree, Some(g))
}

/// SQL's three-valued semantics to a grounded two-valued semantics.
pub fn tr_3vl_to_grounded(e: &Expression, schema: &Schema) -> Result<TranslationResult> {
    binary::run(e, schema, Mode::ThreeToGrounded, None)
}

/// Many-valued semantics given by `kernel` to SQL's three-valued semantics.
pub fn tr_mvl_to_3vl(e: &Expression, schema: &Schema, kernel: &LogicKernel) -> Result<TranslationResult> {
    mvl::run(e, schema, kernel)
}

/// A source semantics, a target semantics and the translation between them.
#[derive(Clone, Debug)]
pub enum Direction {
    TwoToThree,
    ThreeToTwo,
    GroundedToThree(Grounding),
    ThreeToGrounded(Grounding),
    MvlToThree(LogicKernel),
}

impl Direction {
    pub fn name(&self) -> &'static str {
        match self {
            Direction::TwoToThree => "2to3",
            Direction::ThreeToTwo => "3to2",
            Direction::GroundedToThree(_) => "gr-to-3",
            Direction::ThreeToGrounded(_) => "3-to-gr",
            Direction::MvlToThree(_) => "mvl-to-3",
        }
    }

    pub fn source(&self) -> Result<LogicKernel> {
        Ok(match self {
            Direction::TwoToThree => kernel_2vl(),
            Direction::ThreeToTwo | Direction::ThreeToGrounded(_) => kernel_3vl(),
            Direction::GroundedToThree(g) => kernel_grounded(g.clone())?,
            Direction::MvlToThree(k) => k.clone(),
        })
    }

    pub fn target(&self) -> Result<LogicKernel> {
        Ok(match self {
            Direction::ThreeToTwo => kernel_2vl(),
            Direction::ThreeToGrounded(g) => kernel_grounded(g.clone())?,
            _ => kernel_3vl(),
        })
    }

    pub fn translate(&self, e: &Expression, schema: &Schema) -> Result<TranslationResult> {
        match self {
            Direction::TwoToThree => tr_to_3vl(e, schema),
            Direction::ThreeToTwo => tr_from_3vl(e, schema),
            Direction::GroundedToThree(g) => tr_grounded_to_3vl(e, schema, g),
            Direction::ThreeToGrounded(_) => tr_3vl_to_grounded(e, schema),
            Direction::MvlToThree(k) => tr_mvl_to_3vl(e, schema, k),
        }
    }
}

/// Outcome of comparing a query under one semantics with its translation
/// under another.
#[derive(Clone, Debug, PartialEq)]
pub enum Verdict {
    Equal { result: Bag },
    NotEqual { native: Bag, translated: Bag },
    Inconclusive { cause: String },
}

impl Verdict {
    pub fn is_equal(&self) -> bool {
        matches!(self, Verdict::Equal { .. })
    }
}

#[derive(Clone, Debug)]
pub struct CaptureReport {
    pub verdict: Verdict,
    pub size_ratio: Option<f64>,
}

/// Evaluates `e` under the source semantics of `dir` and its translation
/// under the target semantics, and compares the bags.
pub fn check_capture(e: &Expression, db: &Database, dir: &Direction) -> CaptureReport {
    let run = || -> Result<(Expression, f64, LogicKernel, LogicKernel)> {
        let tr = dir.translate(e, &db.schema)?;
        Ok((tr.output, tr.size_ratio, dir.source()?, dir.target()?))
    };
    match run() {
        Err(err) => CaptureReport { verdict: Verdict::Inconclusive { cause: err.to_string() }, size_ratio: None },
        Ok((out, ratio, src, tgt)) => CaptureReport {
            verdict: compare_runs(e, &EvalConfig::new(src), &out, &EvalConfig::new(tgt), db),
            size_ratio: Some(ratio),
        },
    }
}

/// Compares `native` under `native_cfg` with `translated` under `translated_cfg`.
pub fn compare_runs(
    native: &Expression,
    native_cfg: &EvalConfig,
    translated: &Expression,
    translated_cfg: &EvalConfig,
    db: &Database,
) -> Verdict {
    let env = Environment::new();
    let a = match eval(native, db, &env, native_cfg) {
        Ok(b) => b,
        Err(err) => return Verdict::Inconclusive { cause: format!("native evaluation: {err}") },
    };
    let b = match eval(translated, db, &env, translated_cfg) {
        Ok(b) => b,
        Err(err) => return Verdict::Inconclusive { cause: format!("translated evaluation: {err}") },
    };
    if a == b {
        Verdict::Equal { result: a }
    } else {
        Verdict::NotEqual { native: a, translated: b }
    }
}
