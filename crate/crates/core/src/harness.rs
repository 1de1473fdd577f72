//! Differential property families over generated corpora, counterexample
//! bundles and their replay.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value as Json;

use crate::algebra::{
    output_labels, parse_condition, parse_expression, parse_term, render_condition, render_expression, render_term,
    CmpOp, Condition, Expression, Term,
};
use crate::analyze::coincidence_certificate;
use crate::data::{Bag, Database};
use crate::env::Environment;
use crate::error::{Error, Result};
use crate::eval::{eval, eval_condition, EvalConfig};
use crate::fuzz::{fuzz_schema, gen_condition, gen_database, gen_expression, FuzzConfig};
use crate::kernel::{kernel_2vl, kernel_2vl_syntactic, kernel_3vl, kernel_4vl_example, kernel_grounded, Grounding, LogicKernel};
use crate::translate::{check_capture, Direction, Verdict};
use rand::Rng;

/// A property family checked by the harness.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    /// ⟦E⟧ under 2VL equals the 3VL translation's result.
    #[serde(rename = "2to3")]
    TwoToThree,
    /// ⟦E⟧ under 3VL equals the 2VL translation's result.
    #[serde(rename = "3to2")]
    ThreeToTwo,
    /// On databases without NULL, all two- and three-valued kernels agree.
    NullFree,
    /// The four equivalences restored by two-valued logic.
    Equivalences,
    /// Certified expressions agree under 2VL and 3VL.
    Certificate,
    /// Grounded 2VL with syntactic equality, translated to 3VL.
    GroundedSyntactic,
    /// Grounded 2VL with the `≤` example grounding, translated to 3VL.
    GroundedLe,
    /// 3VL translated to grounded 2VL with the `≤` example grounding.
    ToGroundedLe,
    /// The four-valued example kernel, translated to 3VL.
    Mvl4,
    /// The Kleene kernel fed through the many-valued translation.
    Mvl3,
}

impl Family {
    pub const ALL: [Family; 10] = [
        Family::TwoToThree,
        Family::ThreeToTwo,
        Family::NullFree,
        Family::Equivalences,
        Family::Certificate,
        Family::GroundedSyntactic,
        Family::GroundedLe,
        Family::ToGroundedLe,
        Family::Mvl4,
        Family::Mvl3,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Family::TwoToThree => "2to3",
            Family::ThreeToTwo => "3to2",
            Family::NullFree => "null-free",
            Family::Equivalences => "equivalences",
            Family::Certificate => "certificate",
            Family::GroundedSyntactic => "grounded-syntactic",
            Family::GroundedLe => "grounded-le",
            Family::ToGroundedLe => "to-grounded-le",
            Family::Mvl4 => "mvl4",
            Family::Mvl3 => "mvl3",
        }
    }

    fn direction(self) -> Option<Direction> {
        Some(match self {
            Family::TwoToThree => Direction::TwoToThree,
            Family::ThreeToTwo => Direction::ThreeToTwo,
            Family::GroundedSyntactic => Direction::GroundedToThree(Grounding::syntactic_equality()),
            Family::GroundedLe => Direction::GroundedToThree(Grounding::le_example()),
            Family::ToGroundedLe => Direction::ThreeToGrounded(Grounding::le_example()),
            Family::Mvl4 => Direction::MvlToThree(kernel_4vl_example()),
            Family::Mvl3 => Direction::MvlToThree(kernel_3vl()),
            _ => return None,
        })
    }

    /// Adjusts a configuration to what the family's property presupposes.
    pub fn prepare(self, cfg: &FuzzConfig) -> FuzzConfig {
        let mut cfg = cfg.clone();
        if self == Family::NullFree {
            cfg.null_rate = 0.0;
            cfg.null_producing = false;
        }
        cfg
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Family> {
        Family::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::Value(format!("unknown family `{s}`")))
    }
}

/// Extra inputs for families that quantify over more than (E, D).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Probe {
    pub condition: String,
    pub tuple: Vec<String>,
    pub op: String,
}

/// A self-contained failing (or skipped) case.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bundle {
    pub family: Family,
    pub seed: u64,
    pub case: usize,
    pub expression: String,
    pub database: Json,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probe: Option<Probe>,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub left: Option<Json>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub right: Option<Json>,
}

impl Bundle {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("bundle serializes")
    }

    pub fn from_json(text: &str) -> Result<Bundle> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Result of one case.
#[derive(Clone, Debug, PartialEq)]
pub enum Outcome {
    Pass { size_ratio: Option<f64> },
    Fail { message: String, left: Option<Bag>, right: Option<Bag> },
    Skip { reason: String },
}

impl Outcome {
    pub fn kind(&self) -> &'static str {
        match self {
            Outcome::Pass { .. } => "pass",
            Outcome::Fail { .. } => "fail",
            Outcome::Skip { .. } => "skip",
        }
    }
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct RatioStats {
    pub max: f64,
    pub mean: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct Summary {
    pub family: Family,
    pub cases: usize,
    pub passed: usize,
    pub failed: usize,
    pub skipped: usize,
    /// For the certificate family: generated expressions that were not
    /// certified although their results coincided.
    pub uncertified_coinciding: usize,
    pub size_ratio: Option<RatioStats>,
    pub counterexamples: Vec<Bundle>,
}

impl Summary {
    pub fn ok(&self) -> bool {
        self.failed == 0
    }
}

impl fmt::Display for Summary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {} cases, {} passed, {} failed, {} skipped", self.family, self.cases, self.passed, self.failed, self.skipped)?;
        if let Some(r) = &self.size_ratio {
            write!(f, ", size ratio max {:.2} mean {:.2}", r.max, r.mean)?;
        }
        if self.family == Family::Certificate {
            write!(f, ", {} uncertified but coinciding", self.uncertified_coinciding)?;
        }
        Ok(())
    }
}

fn inconclusive(cause: String) -> Outcome {
    if cause.contains("recursion") {
        Outcome::Skip { reason: cause }
    } else {
        Outcome::Fail { message: cause, left: None, right: None }
    }
}

fn outcome_of(v: Verdict, size_ratio: Option<f64>) -> Outcome {
    match v {
        Verdict::Equal { .. } => Outcome::Pass { size_ratio },
        Verdict::NotEqual { native, translated } => {
            Outcome::Fail { message: "native and translated results differ".into(), left: Some(native), right: Some(translated) }
        }
        Verdict::Inconclusive { cause } => inconclusive(cause),
    }
}

fn eval_under(e: &Expression, db: &Database, k: LogicKernel) -> Result<Bag> {
    eval(e, db, &Environment::new(), &EvalConfig::new(k))
}

/// Runs one (E, D) case of a family that needs no extra inputs.
pub fn check_case(family: Family, e: &Expression, db: &Database) -> Outcome {
    if let Some(dir) = family.direction() {
        let report = check_capture(e, db, &dir);
        return outcome_of(report.verdict, report.size_ratio);
    }
    match family {
        Family::NullFree => {
            let kernels = match kernel_grounded(Grounding::empty()) {
                Ok(g) => vec![kernel_3vl(), kernel_2vl(), kernel_2vl_syntactic(), g],
                Err(err) => return Outcome::Fail { message: err.to_string(), left: None, right: None },
            };
            let mut first: Option<(String, Bag)> = None;
            for k in kernels {
                let name = k.name().to_string();
                match eval_under(e, db, k) {
                    Err(err) => return inconclusive(format!("{name}: {err}")),
                    Ok(b) => match &first {
                        None => first = Some((name, b)),
                        Some((n0, b0)) if *b0 != b => {
                            return Outcome::Fail {
                                message: format!("{n0} and {name} differ"),
                                left: Some(b0.clone()),
                                right: Some(b),
                            }
                        }
                        Some(_) => {}
                    },
                }
            }
            Outcome::Pass { size_ratio: None }
        }
        Family::Certificate => match coincidence_certificate(e, &db.schema) {
            Err(err) => inconclusive(err.to_string()),
            Ok(c) if !c.is_certified() => Outcome::Skip { reason: "uncertified".into() },
            Ok(_) => compare_2_3(e, db),
        },
        _ => Outcome::Skip { reason: format!("family {family} needs a probe") },
    }
}

fn compare_2_3(e: &Expression, db: &Database) -> Outcome {
    match (eval_under(e, db, kernel_2vl()), eval_under(e, db, kernel_3vl())) {
        (Ok(a), Ok(b)) if a == b => Outcome::Pass { size_ratio: None },
        (Ok(a), Ok(b)) => Outcome::Fail { message: "2VL and 3VL results differ".into(), left: Some(a), right: Some(b) },
        (Err(err), _) | (_, Err(err)) => inconclusive(err.to_string()),
    }
}

/// Result of one of the four restored equivalences on a case.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EquivalenceCheck {
    pub index: usize,
    pub holds: bool,
    pub detail: String,
}

/// Checks the four equivalences for (E, θ, t̄, ω) under `kernel`:
/// 1. σ_θ(E) = E \ σ_¬θ(E);
/// 2. t̄ ∈ E is false iff σ_{t̄ = ℓ(E)}(E) is empty;
/// 3. t̄ ω any(E) is false iff σ_{t̄ ω ℓ(E)}(E) is empty;
/// 4. t̄ ω all(E) is true iff σ_{¬(t̄ ω ℓ(E))}(E) is empty.
pub fn check_equivalences(
    e: &Expression,
    theta: &Condition,
    tuple: &[Term],
    op: CmpOp,
    db: &Database,
    kernel: &LogicKernel,
) -> Result<Vec<EquivalenceCheck>> {
    let cfg = EvalConfig::new(kernel.clone());
    let env = Environment::new();
    let ev = |x: &Expression| eval(x, db, &env, &cfg);
    let cond = |c: &Condition| eval_condition(c, db, &env, &cfg);
    let labels: Vec<Term> = output_labels(e, &db.schema, &[])?.into_iter().map(Term::Col).collect();
    let mut out = Vec::new();

    let lhs = ev(&Expression::select(theta.clone(), e.clone()))?;
    let rhs = ev(&Expression::except_all(e.clone(), Expression::select(Condition::not(theta.clone()), e.clone())))?;
    out.push(EquivalenceCheck { index: 1, holds: lhs == rhs, detail: format!("{} vs {}", lhs.canonical_text(), rhs.canonical_text()) });

    let quantified = [
        (2, Condition::In(tuple.to_vec(), Box::new(e.clone())), CmpOp::Eq, false),
        (3, Condition::Any(tuple.to_vec(), op, Box::new(e.clone())), op, false),
        (4, Condition::All(tuple.to_vec(), op, Box::new(e.clone())), op, true),
    ];
    for (index, atom, o, negate) in quantified {
        let value = cond(&atom)?;
        let cmp = Condition::Compare(tuple.to_vec(), o, labels.clone());
        let sel = if negate { Condition::not(cmp) } else { cmp };
        let empty = ev(&Expression::select(sel, e.clone()))?.is_empty();
        let expected = if negate { kernel.t() } else { kernel.f() };
        out.push(EquivalenceCheck {
            index,
            holds: (value == expected) == empty,
            detail: format!("condition is {}, selection empty: {empty}", kernel.value_name(value)),
        });
    }
    Ok(out)
}

fn equivalence_outcome(e: &Expression, probe: &Probe, db: &Database) -> Outcome {
    let parsed = (|| -> Result<(Condition, Vec<Term>, CmpOp)> {
        let theta = parse_condition(&probe.condition)?;
        let tuple = probe.tuple.iter().map(|t| parse_term(t)).collect::<Result<Vec<_>>>()?;
        let op = CmpOp::from_symbol(&probe.op).ok_or_else(|| Error::Value(format!("bad operator {}", probe.op)))?;
        Ok((theta, tuple, op))
    })();
    let (theta, tuple, op) = match parsed {
        Ok(p) => p,
        Err(err) => return Outcome::Fail { message: err.to_string(), left: None, right: None },
    };
    match check_equivalences(e, &theta, &tuple, op, db, &kernel_2vl()) {
        Err(err) => inconclusive(err.to_string()),
        Ok(checks) => match checks.into_iter().find(|c| !c.holds) {
            None => Outcome::Pass { size_ratio: None },
            Some(c) => Outcome::Fail { message: format!("equivalence {} fails: {}", c.index, c.detail), left: None, right: None },
        },
    }
}

/// A probe for the equivalence family: a condition over ℓ(E) and a tuple of
/// constants typed like ℓ(E).
fn gen_probe(e: &Expression, cfg: &FuzzConfig, rng: &mut impl Rng) -> Result<Probe> {
    let schema = fuzz_schema();
    let sig = crate::algebra::signature(e, &schema)?;
    let theta = gen_condition(&schema, cfg, e, rng)?;
    let types: Vec<_> = sig.types.iter().map(|t| t.unwrap_or(crate::value::ColType::Num)).collect();
    let tuple: Vec<Term> = types
        .iter()
        .map(|t| {
            if cfg.null_producing && rng.gen_bool(0.1) {
                Term::Null
            } else {
                match t {
                    crate::value::ColType::Num => Term::int(rng.gen_range(0..4)),
                    crate::value::ColType::Ord => Term::Ord(["a", "b", "c"][rng.gen_range(0..3)].to_string()),
                }
            }
        })
        .collect();
    let ops: Vec<CmpOp> = if types.contains(&crate::value::ColType::Ord) {
        vec![CmpOp::Eq, CmpOp::Ne]
    } else {
        CmpOp::ALL.to_vec()
    };
    let op = ops[rng.gen_range(0..ops.len())];
    Ok(Probe { condition: render_condition(&theta), tuple: tuple.iter().map(render_term).collect(), op: op.symbol().to_string() })
}

fn bag_json(b: &Option<Bag>) -> Option<Json> {
    b.as_ref().map(Bag::to_json)
}

/// Generates and checks the corpus of one family.
pub fn run_differential(family: Family, cfg: &FuzzConfig) -> Summary {
    let cfg = family.prepare(cfg);
    let schema = fuzz_schema();
    let mut s = Summary {
        family,
        cases: 0,
        passed: 0,
        failed: 0,
        skipped: 0,
        uncertified_coinciding: 0,
        size_ratio: None,
        counterexamples: Vec::new(),
    };
    let mut ratios = Vec::new();
    // The certificate family keeps drawing until enough certified cases are found.
    let attempts = if family == Family::Certificate { cfg.cases * 100 } else { cfg.cases };
    let mut i = 0;
    while i < attempts && s.cases < cfg.cases {
        let mut rng = cfg.rng(i);
        let case = i;
        i += 1;
        let e = gen_expression(&schema, &cfg, &mut rng);
        let db = match gen_database(&schema, &cfg, &mut rng) {
            Ok(db) => db,
            Err(err) => {
                s.cases += 1;
                s.failed += 1;
                s.counterexamples.push(Bundle {
                    family,
                    seed: cfg.seed,
                    case,
                    expression: render_expression(&e),
                    database: Json::Null,
                    probe: None,
                    message: err.to_string(),
                    left: None,
                    right: None,
                });
                continue;
            }
        };
        let (outcome, probe) = if family == Family::Equivalences {
            match gen_probe(&e, &cfg, &mut rng) {
                Ok(p) => (equivalence_outcome(&e, &p, &db), Some(p)),
                Err(err) => (Outcome::Fail { message: err.to_string(), left: None, right: None }, None),
            }
        } else {
            (check_case(family, &e, &db), None)
        };
        if family == Family::Certificate {
            if let Outcome::Skip { reason } = &outcome {
                if reason == "uncertified" {
                    if let Outcome::Pass { .. } = compare_2_3(&e, &db) {
                        s.uncertified_coinciding += 1;
                    }
                    continue;
                }
            }
        }
        s.cases += 1;
        match outcome {
            Outcome::Pass { size_ratio } => {
                s.passed += 1;
                ratios.extend(size_ratio);
            }
            Outcome::Skip { .. } => s.skipped += 1,
            Outcome::Fail { message, left, right } => {
                s.failed += 1;
                s.counterexamples.push(Bundle {
                    family,
                    seed: cfg.seed,
                    case,
                    expression: render_expression(&e),
                    database: serde_json::from_str(&db.to_json_string()).expect("database JSON"),
                    probe,
                    message,
                    left: bag_json(&left),
                    right: bag_json(&right),
                });
            }
        }
    }
    if !ratios.is_empty() {
        let max = ratios.iter().cloned().fold(0.0, f64::max);
        let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
        s.size_ratio = Some(RatioStats { max, mean });
    }
    s
}

/// Re-runs a bundle's case.
pub fn replay(bundle: &Bundle) -> Result<Outcome> {
    let e = parse_expression(&bundle.expression)?;
    let db = Database::from_json_str(&bundle.database.to_string())?;
    Ok(match (&bundle.family, &bundle.probe) {
        (Family::Equivalences, Some(p)) => equivalence_outcome(&e, p, &db),
        (Family::Equivalences, None) => return Err(Error::Value("equivalence bundle without a probe".into())),
        (f, _) => check_case(*f, &e, &db),
    })
}

/// Builds a bundle for an arbitrary case, e.g. to record a known failure.
pub fn make_bundle(family: Family, e: &Expression, db: &Database, probe: Option<Probe>) -> Bundle {
    let outcome = match (&family, &probe) {
        (Family::Equivalences, Some(p)) => equivalence_outcome(e, p, db),
        _ => check_case(family, e, db),
    };
    let (message, left, right) = match outcome {
        Outcome::Fail { message, left, right } => (message, bag_json(&left), bag_json(&right)),
        other => (other.kind().to_string(), None, None),
    };
    Bundle {
        family,
        seed: 0,
        case: 0,
        expression: render_expression(e),
        database: serde_json::from_str(&db.to_json_string()).expect("database JSON"),
        probe,
        message,
        left,
        right,
    }
}
