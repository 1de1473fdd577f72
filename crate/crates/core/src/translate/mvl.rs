//! Many-valued semantics to SQL's three-valued semantics.
//!
//! Each condition θ and truth value τ map to a three-valued condition θ^τ
//! that is true exactly when θ has value τ. Quantified comparisons fold a
//! multiset of truth values; the multiset is recovered by counting, per truth
//! value, the records that produce it, and the counts are reduced by the
//! eventual periodicity of folding so finitely many cases suffice.

use crate::algebra::{expand_tuple_comparison, AggFunc, Aggregate, CmpOp, Condition, Expression, Func, Term};
use crate::data::Schema;
use crate::error::{Error, Result};
use crate::kernel::{instantiate, Connective, LogicKernel, NullPattern, Periodicity, TruthValue};
use crate::value::Name;

use super::{finish, Rewriter, Scope, TranslationResult, FRESH_PREFIX};

struct Mvl<'s, 'k> {
    k: &'k LogicKernel,
    scope: Scope<'s>,
}

pub(super) fn run(e: &Expression, schema: &Schema, k: &LogicKernel) -> Result<TranslationResult> {
    let mut m = Mvl { k, scope: Scope::new(schema) };
    let out = m.expr(e)?;
    Ok(finish(e, out, m.scope.trace))
}

impl<'s> Rewriter<'s> for Mvl<'s, '_> {
    fn scope(&mut self) -> &mut Scope<'s> {
        &mut self.scope
    }

    fn top(&mut self, c: &Condition) -> Result<Condition> {
        self.cond(c, self.k.t())
    }
}

fn lit_and(a: Condition, b: Condition) -> Condition {
    match (a, b) {
        (Condition::False, _) | (_, Condition::False) => Condition::False,
        (Condition::True, x) | (x, Condition::True) => x,
        (a, b) => Condition::and(a, b),
    }
}

fn lit_or(items: Vec<Condition>) -> Condition {
    let items: Vec<_> = items.into_iter().filter(|c| *c != Condition::False).collect();
    if items.contains(&Condition::True) {
        return Condition::True;
    }
    Condition::disj(items)
}

/// φ_r(c): the count `c` reduces to `r` under periodicity `p`.
fn reduces_to(c: &Term, r: u64, p: Periodicity) -> Condition {
    let (l, per) = (p.lead as u64, p.period as u64);
    let num = |n: u64| Term::int(n as i64);
    if r < l {
        return Condition::cmp(c.clone(), CmpOp::Eq, num(r));
    }
    let at_least = Condition::cmp(c.clone(), CmpOp::Ge, num(l));
    if per - l == 1 {
        return at_least;
    }
    let offset = Term::func(Func::Mod, vec![Term::func(Func::Sub, vec![c.clone(), num(l)]), num(per - l)]);
    Condition::and(at_least, Condition::cmp(offset, CmpOp::Eq, num(r - l)))
}

impl<'s> Mvl<'s, '_> {
    /// θ_{ω,τ}(l, r) from the kernel's templates. Grounded kernels have no
    /// stored templates; theirs are assembled per null pattern.
    fn atom(&self, l: &Term, op: CmpOp, r: &Term, tau: TruthValue) -> Result<Condition> {
        if let Some(g) = self.k.grounding() {
            let positive = tau == self.k.t();
            let not_null = |t: &Term| Condition::not(Condition::is_null(t.clone()));
            let mut parts = vec![lit_and(Condition::and(not_null(l), not_null(r)), {
                let c = Condition::cmp(l.clone(), op, r.clone());
                if positive {
                    c
                } else {
                    Condition::not(c)
                }
            })];
            for p in NullPattern::ALL {
                let is = |t: &Term, null: bool| if null { Condition::is_null(t.clone()) } else { not_null(t) };
                let guard = Condition::and(is(l, p != NullPattern::Right), is(r, p != NullPattern::Left));
                let theta = instantiate(&g.template(op, p), l, r);
                let theta = match (positive, theta) {
                    (true, x) => x,
                    (false, Condition::True) => Condition::False,
                    (false, Condition::False) => Condition::True,
                    (false, x) => Condition::not(x),
                };
                parts.push(lit_and(guard, theta));
            }
            return Ok(lit_or(parts));
        }
        let template = self.k.template(op, tau).ok_or_else(|| {
            Error::Translate(format!("kernel {} has no template for {} at {}", self.k.name(), op, self.k.value_name(tau)))
        })?;
        Ok(instantiate(template, l, r))
    }

    fn constant(&self, holds: bool, tau: TruthValue) -> Condition {
        if self.k.from_bool(holds) == tau {
            Condition::True
        } else {
            Condition::False
        }
    }

    fn cond(&mut self, c: &Condition, tau: TruthValue) -> Result<Condition> {
        self.scope.note(self.k.value_name(tau), c);
        let k = self.k;
        let (t, f) = (k.t(), k.f());
        Ok(match c {
            Condition::True => self.constant(true, tau),
            Condition::False => self.constant(false, tau),
            Condition::IsNull(_) | Condition::Empty(_) => {
                let c = match c {
                    Condition::Empty(e) => Condition::empty(self.expr(e)?),
                    _ => c.clone(),
                };
                if tau == t {
                    c
                } else if tau == f {
                    Condition::not(c)
                } else {
                    Condition::False
                }
            }
            Condition::Compare(l, op, r) if l.len() == 1 && r.len() == 1 => self.atom(&l[0], *op, &r[0], tau)?,
            Condition::Compare(l, op, r) => self.cond(&expand_tuple_comparison(l, *op, r)?, tau)?,
            Condition::In(l, e) => self.counted(l, CmpOp::Eq, e, Connective::Or, tau)?,
            Condition::Any(l, op, e) => self.counted(l, *op, e, Connective::Or, tau)?,
            Condition::All(l, op, e) => self.counted(l, *op, e, Connective::And, tau)?,
            Condition::And(a, b) | Condition::Or(a, b) => {
                let conn = if matches!(c, Condition::And(..)) { Connective::And } else { Connective::Or };
                let mut parts = Vec::new();
                for v1 in k.truth_values() {
                    for v2 in k.truth_values() {
                        if k.apply(conn, v1, v2) != tau {
                            continue;
                        }
                        let x = self.cond(a, v1)?;
                        if x == Condition::False {
                            continue;
                        }
                        parts.push(lit_and(x, self.cond(b, v2)?));
                    }
                }
                lit_or(parts)
            }
            Condition::Not(a) => {
                let mut parts = Vec::new();
                for v in k.truth_values() {
                    if k.not(v) == tau {
                        parts.push(self.cond(a, v)?);
                    }
                }
                lit_or(parts)
            }
        })
    }

    /// Quantified comparison `l op any/all(e)` at value `tau`.
    fn counted(&mut self, l: &[Term], op: CmpOp, e: &Expression, conn: Connective, tau: TruthValue) -> Result<Condition> {
        let k = self.k;
        let labels = self.scope.labels(e)?;
        let g = self.expr(e)?;
        let (g, cols) = self.scope.columns_for(l, g, &labels)?;
        let cmp = Condition::Compare(l.to_vec(), op, cols);

        // Per truth value: its periodicity and, unless no record can produce
        // it, the subquery selecting the records that do.
        struct Slot {
            value: TruthValue,
            period: Periodicity,
            rows: Option<Expression>,
        }
        let mut slots = Vec::new();
        for v in k.truth_values() {
            let theta = self.cond(&cmp, v)?;
            let rows = (theta != Condition::False).then(|| Expression::select(theta, g.clone()));
            slots.push(Slot { value: v, period: k.periodicity(v, conn), rows });
        }

        let count = Name::from(format!("{FRESH_PREFIX}{}_count", self.scope.fresh()));
        let count_term = Term::Col(count.clone());
        let test = |rows: &Expression, r: u64, p: Periodicity| {
            let grouped = Expression::Group {
                keys: Vec::new(),
                aggs: vec![Aggregate::new(AggFunc::CountStar, None).renamed(count.as_str())],
                input: Box::new(rows.clone()),
            };
            Condition::not(Condition::empty(Expression::select(reduces_to(&count_term, r, p), grouped)))
        };

        // Enumerate reduced count tuples in lexicographic order.
        let ranges: Vec<u64> = slots.iter().map(|s| if s.rows.is_some() { s.period.period as u64 } else { 1 }).collect();
        let mut tuple = vec![0u64; slots.len()];
        let mut parts = Vec::new();
        loop {
            let counts: Vec<(TruthValue, u64)> = slots.iter().zip(&tuple).map(|(s, &n)| (s.value, n)).collect();
            let value = if counts.iter().all(|(_, n)| *n == 0) {
                match conn {
                    Connective::Or => k.f(),
                    Connective::And => k.t(),
                }
            } else {
                k.fold_counted(conn, &counts)?
            };
            if value == tau {
                let tests = slots.iter().zip(&tuple).filter_map(|(s, &r)| s.rows.as_ref().map(|rows| test(rows, r, s.period)));
                parts.push(Condition::conj(tests));
            }
            let mut i = tuple.len();
            loop {
                if i == 0 {
                    return Ok(lit_or(parts));
                }
                i -= 1;
                tuple[i] += 1;
                if tuple[i] < ranges[i] {
                    break;
                }
                tuple[i] = 0;
            }
        }
    }
}
