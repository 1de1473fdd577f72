//! Translations between two-valued semantics (plain or grounded) and SQL's
//! three-valued semantics, as pairs of condition maps `t`/`f`: the source
//! condition is true (false) exactly when its `t` (`f`) image is true in the
//! target semantics.

use crate::algebra::{expand_tuple_comparison, CmpOp, Condition, Expression, Term};
use crate::data::Schema;
use crate::error::Result;
use crate::kernel::{instantiate, Grounding, NullPattern};

use super::{finish, Rewriter, Scope, TranslationResult};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    TwoToThree,
    ThreeToTwo,
    GroundedToThree,
    ThreeToGrounded,
}

impl Mode {
    /// Plain two-valued logic on either side: quantified comparisons and
    /// positive tuple comparisons carry over unchanged.
    fn plain(self) -> bool {
        matches!(self, Mode::TwoToThree | Mode::ThreeToTwo)
    }
}

struct Binary<'s, 'g> {
    mode: Mode,
    grounding: Option<&'g Grounding>,
    scope: Scope<'s>,
}

pub(super) fn run(e: &Expression, schema: &Schema, mode: Mode, g: Option<&Grounding>) -> Result<TranslationResult> {
    let mut b = Binary { mode, grounding: g, scope: Scope::new(schema) };
    let out = b.expr(e)?;
    Ok(finish(e, out, b.scope.trace))
}

fn not_null(t: &Term) -> Condition {
    Condition::not(Condition::is_null(t.clone()))
}

/// `a ∧ b` with literal truth constants folded away.
fn and_lit(a: Condition, b: Condition) -> Condition {
    match (a, b) {
        (Condition::False, _) | (_, Condition::False) => Condition::False,
        (Condition::True, x) | (x, Condition::True) => x,
        (a, b) => Condition::and(a, b),
    }
}

fn not_lit(a: Condition) -> Condition {
    match a {
        Condition::True => Condition::False,
        Condition::False => Condition::True,
        a => Condition::not(a),
    }
}

fn disj_lit(items: impl IntoIterator<Item = Condition>) -> Condition {
    let items: Vec<_> = items.into_iter().filter(|c| *c != Condition::False).collect();
    if items.contains(&Condition::True) {
        return Condition::True;
    }
    Condition::disj(items)
}

impl<'s> Rewriter<'s> for Binary<'s, '_> {
    fn scope(&mut self) -> &mut Scope<'s> {
        &mut self.scope
    }

    fn top(&mut self, c: &Condition) -> Result<Condition> {
        self.t(c)
    }
}

impl<'s> Binary<'s, '_> {
    /// Null guard c_I for `l ω r`: exactly the positions in I are NULL.
    fn guard(l: &Term, r: &Term, p: Option<NullPattern>) -> Condition {
        let is = |t: &Term, null: bool| if null { Condition::is_null(t.clone()) } else { not_null(t) };
        let (ln, rn) = match p {
            None => (false, false),
            Some(NullPattern::Left) => (true, false),
            Some(NullPattern::Right) => (false, true),
            Some(NullPattern::Both) => (true, true),
        };
        Condition::and(is(l, ln), is(r, rn))
    }

    /// Grounded comparison split by null pattern: ⋁_I (c_I ∧ θ_I) or its
    /// negated-template counterpart.
    fn grounded_atom(&self, l: &Term, op: CmpOp, r: &Term, positive: bool) -> Condition {
        let g = self.grounding.expect("grounded mode carries a grounding");
        let mut parts = Vec::new();
        for p in [None, Some(NullPattern::Left), Some(NullPattern::Right), Some(NullPattern::Both)] {
            let theta = match p {
                None => Condition::cmp(l.clone(), op, r.clone()),
                Some(p) => instantiate(&g.template(op, p), l, r),
            };
            let theta = if positive { theta } else { not_lit(theta) };
            parts.push(and_lit(Self::guard(l, r, p), theta));
        }
        disj_lit(parts)
    }

    fn atom_t(&self, l: &Term, op: CmpOp, r: &Term) -> Condition {
        let cmp = Condition::cmp(l.clone(), op, r.clone());
        match self.mode {
            Mode::TwoToThree | Mode::ThreeToTwo => cmp,
            Mode::GroundedToThree => self.grounded_atom(l, op, r, true),
            Mode::ThreeToGrounded => Condition::conj([not_null(l), not_null(r), cmp]),
        }
    }

    fn atom_f(&self, l: &Term, op: CmpOp, r: &Term) -> Condition {
        let neg = Condition::not(Condition::cmp(l.clone(), op, r.clone()));
        match self.mode {
            Mode::TwoToThree => Condition::disj([Condition::is_null(l.clone()), Condition::is_null(r.clone()), neg]),
            Mode::ThreeToTwo | Mode::ThreeToGrounded => Condition::conj([not_null(l), not_null(r), neg]),
            Mode::GroundedToThree => self.grounded_atom(l, op, r, false),
        }
    }

    /// Translates the subquery of a quantified comparison and returns it with
    /// the condition `t̄ ω ℓ(E)` mapped by `t` or `f`.
    fn body(&mut self, l: &[Term], op: CmpOp, e: &Expression, positive: bool) -> Result<(Expression, Condition)> {
        let labels = self.scope.labels(e)?;
        let g = self.expr(e)?;
        let (g, cols) = self.scope.columns_for(l, g, &labels)?;
        let c = Condition::Compare(l.to_vec(), op, cols);
        let theta = if positive { self.t(&c)? } else { self.f(&c)? };
        Ok((g, theta))
    }

    pub(super) fn t(&mut self, c: &Condition) -> Result<Condition> {
        self.scope.note("t", c);
        Ok(match c {
            Condition::True | Condition::False | Condition::IsNull(_) => c.clone(),
            Condition::Compare(l, op, r) if l.len() == 1 && r.len() == 1 => self.atom_t(&l[0], *op, &r[0]),
            Condition::Compare(..) if self.mode.plain() => c.clone(),
            Condition::Compare(l, op, r) => self.t(&expand_tuple_comparison(l, *op, r)?)?,
            Condition::Empty(e) => Condition::empty(self.expr(e)?),
            Condition::In(l, e) if self.mode.plain() => Condition::In(l.clone(), Box::new(self.expr(e)?)),
            Condition::Any(l, op, e) if self.mode.plain() => Condition::Any(l.clone(), *op, Box::new(self.expr(e)?)),
            Condition::All(l, op, e) if self.mode.plain() => Condition::All(l.clone(), *op, Box::new(self.expr(e)?)),
            Condition::In(l, e) | Condition::Any(l, _, e) => {
                let op = if let Condition::Any(_, op, _) = c { *op } else { CmpOp::Eq };
                let (g, theta) = self.body(l, op, e, true)?;
                Condition::not(Condition::empty(Expression::select(theta, g)))
            }
            Condition::All(l, op, e) => {
                let (g, theta) = self.body(l, *op, e, true)?;
                Condition::empty(Expression::select(Condition::not(theta), g))
            }
            Condition::And(a, b) => Condition::and(self.t(a)?, self.t(b)?),
            Condition::Or(a, b) => Condition::or(self.t(a)?, self.t(b)?),
            Condition::Not(a) => self.f(a)?,
        })
    }

    pub(super) fn f(&mut self, c: &Condition) -> Result<Condition> {
        self.scope.note("f", c);
        Ok(match c {
            Condition::True => Condition::False,
            Condition::False => Condition::True,
            Condition::IsNull(_) => Condition::not(c.clone()),
            Condition::Compare(l, op, r) if l.len() == 1 && r.len() == 1 => self.atom_f(&l[0], *op, &r[0]),
            Condition::Compare(l, op, r) => self.f(&expand_tuple_comparison(l, *op, r)?)?,
            Condition::Empty(e) => Condition::not(Condition::empty(self.expr(e)?)),
            Condition::In(l, e) if self.mode == Mode::TwoToThree => {
                // Membership is false in two-valued logic exactly when the tuple
                // has a NULL or it misses every NULL-free record.
                let labels = self.scope.labels(e)?;
                let g = self.expr(e)?;
                let guard = Condition::conj(labels.iter().map(|n| not_null(&Term::Col(n.clone()))));
                Condition::or(
                    Condition::disj(l.iter().map(|t| Condition::is_null(t.clone()))),
                    Condition::not(Condition::In(l.clone(), Box::new(Expression::select(guard, g)))),
                )
            }
            Condition::In(l, e) | Condition::Any(l, _, e) => {
                let op = if let Condition::Any(_, op, _) = c { *op } else { CmpOp::Eq };
                if self.mode == Mode::GroundedToThree {
                    let (g, theta) = self.body(l, op, e, true)?;
                    Condition::empty(Expression::select(theta, g))
                } else {
                    let (g, theta) = self.body(l, op, e, false)?;
                    Condition::empty(Expression::select(Condition::not(theta), g))
                }
            }
            Condition::All(l, op, e) => {
                if self.mode == Mode::GroundedToThree {
                    let (g, theta) = self.body(l, *op, e, true)?;
                    Condition::not(Condition::empty(Expression::select(Condition::not(theta), g)))
                } else {
                    let (g, theta) = self.body(l, *op, e, false)?;
                    Condition::not(Condition::empty(Expression::select(theta, g)))
                }
            }
            Condition::And(a, b) => Condition::or(self.f(a)?, self.f(b)?),
            Condition::Or(a, b) => Condition::and(self.f(a)?, self.f(b)?),
            Condition::Not(a) => self.t(a)?,
        })
    }
}
