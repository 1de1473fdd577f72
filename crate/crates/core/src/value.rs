//! Atomic values, names and column types.

use std::borrow::Borrow;
use std::fmt;
use std::sync::Arc;

use num::{BigInt, BigRational, One, Signed, ToPrimitive, Zero};

use crate::error::Error;

/// Exact rational number used for the numerical domain.
pub type Rational = BigRational;

/// An attribute or relation name.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Name(Arc<str>);

impl Name {
    pub fn new(s: &str) -> Self {
        Name(Arc::from(s))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Debug for Name {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", &*self.0)
    }
}

impl fmt::Display for Name {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for Name {
    fn from(s: &str) -> Self {
        Name::new(s)
    }
}

impl From<String> for Name {
    fn from(s: String) -> Self {
        Name(Arc::from(s))
    }
}

impl std::ops::Deref for Name {
    type Target = str;

    fn deref(&self) -> &str {
        &self.0
    }
}

impl Borrow<str> for Name {
    fn borrow(&self) -> &str {
        &self.0
    }
}

/// Declared type of a column: numerical or ordinary.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColType {
    Num,
    Ord,
}

impl fmt::Display for ColType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ColType::Num => f.write_str("n"),
            ColType::Ord => f.write_str("o"),
        }
    }
}

/// A value: NULL, an exact number, or an ordinary string.
///
/// The derived order puts `Null` first and numbers before ordinary values,
/// which is the canonical order used for printing result bags.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Value {
    Null,
    Num(Rational),
    Ord(Arc<str>),
}

impl Value {
    pub fn int(n: i64) -> Self {
        Value::Num(Rational::from_integer(BigInt::from(n)))
    }

    pub fn ord(s: &str) -> Self {
        Value::Ord(Arc::from(s))
    }

    pub fn is_null(&self) -> bool {
        matches!(self, Value::Null)
    }

    pub fn as_num(&self) -> Option<&Rational> {
        match self {
            Value::Num(r) => Some(r),
            _ => None,
        }
    }

    /// Type of a non-null value.
    pub fn col_type(&self) -> Option<ColType> {
        match self {
            Value::Null => None,
            Value::Num(_) => Some(ColType::Num),
            Value::Ord(_) => Some(ColType::Ord),
        }
    }

    /// Parses a numeric literal: integer, decimal (`0.5`, `-2.25`) or fraction (`1/3`).
    pub fn parse_num(s: &str) -> Result<Value, Error> {
        parse_rational(s).map(Value::Num)
    }
}

impl fmt::Debug for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Null => f.write_str("NULL"),
            Value::Num(r) => f.write_str(&format_rational(r)),
            Value::Ord(s) => write!(f, "{:?}", &**s),
        }
    }
}

/// Parses an exact decimal or fractional literal.
pub fn parse_rational(s: &str) -> Result<Rational, Error> {
    let bad = || Error::Value(format!("invalid numeric literal `{s}`"));
    let t = s.trim();
    if t.is_empty() {
        return Err(bad());
    }
    if let Some((n, d)) = t.split_once('/') {
        let n: BigInt = n.trim().parse().map_err(|_| bad())?;
        let d: BigInt = d.trim().parse().map_err(|_| bad())?;
        if d.is_zero() {
            return Err(bad());
        }
        return Ok(Rational::new(n, d));
    }
    let (neg, body) = match t.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, t.strip_prefix('+').unwrap_or(t)),
    };
    let (int_part, frac_part) = body.split_once('.').unwrap_or((body, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(bad());
    }
    let ok = |p: &str| p.chars().all(|c| c.is_ascii_digit());
    if !ok(int_part) || !ok(frac_part) {
        return Err(bad());
    }
    let digits = format!("{int_part}{frac_part}");
    let mut n: BigInt = if digits.is_empty() { BigInt::zero() } else { digits.parse().map_err(|_| bad())? };
    if neg {
        n = -n;
    }
    let d = num::pow(BigInt::from(10), frac_part.len());
    Ok(Rational::new(n, d))
}

/// Renders a rational as an integer, a terminating decimal, or `n/d`.
pub fn format_rational(r: &Rational) -> String {
    if r.is_integer() {
        return r.to_integer().to_string();
    }
    let mut d = r.denom().clone();
    for p in [2u32, 5] {
        let p = BigInt::from(p);
        while (&d % &p).is_zero() {
            d /= &p;
        }
    }
    if d.is_one() {
        let mut x = r.abs();
        let mut digits = String::new();
        let ten = Rational::from_integer(BigInt::from(10));
        let int = x.trunc();
        x -= &int;
        while !x.is_zero() {
            x *= &ten;
            let digit = x.trunc();
            digits.push_str(&digit.to_integer().to_string());
            x -= digit;
        }
        let sign = if r.is_negative() { "-" } else { "" };
        return format!("{sign}{}.{digits}", int.to_integer());
    }
    format!("{}/{}", r.numer(), r.denom())
}

/// Approximate float view, for human-facing summaries only.
pub fn rational_to_f64(r: &Rational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_formats() {
        for (src, out) in [("3", "3"), ("-2", "-2"), ("0.5", "0.5"), ("-2.25", "-2.25"), ("1/3", "1/3"), ("2/4", "0.5"), ("0.0", "0")] {
            let v = Value::parse_num(src).unwrap();
            assert_eq!(v.to_string(), out, "{src}");
        }
        assert!(Value::parse_num("1/0").is_err());
        assert!(Value::parse_num("abc").is_err());
        assert!(Value::parse_num(".").is_err());
    }

    #[test]
    fn canonical_order() {
        let mut v = vec![Value::ord("a"), Value::int(2), Value::Null, Value::int(-1)];
        v.sort();
        assert_eq!(v, vec![Value::Null, Value::int(-1), Value::int(2), Value::ord("a")]);
    }
}
