//! Exact rational scalars.
//!
//! Every coefficient, bound and solution value in the crate is a [`Scalar`]:
//! an arbitrary-precision fraction kept in lowest terms with a positive
//! denominator. There is no floating-point path anywhere in the computation;
//! `to_f64` exists only for human-readable reports.

use std::cmp::Ordering;
use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};
use std::str::FromStr;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// An exact rational number.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Scalar(BigRational);

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid number {text:?}: {reason}")]
pub struct ParseScalarError {
    pub text: String,
    pub reason: &'static str,
}

impl Scalar {
    pub fn zero() -> Self {
        Scalar(BigRational::zero())
    }

    pub fn one() -> Self {
        Scalar(BigRational::one())
    }

    pub fn from_integer(n: i64) -> Self {
        Scalar(BigRational::from_integer(BigInt::from(n)))
    }

    /// `num / den`. Panics if `den == 0`.
    pub fn new(num: i64, den: i64) -> Self {
        assert!(den != 0, "zero denominator");
        Scalar(BigRational::new(BigInt::from(num), BigInt::from(den)))
    }

    pub fn from_bigints(num: BigInt, den: BigInt) -> Option<Self> {
        if den.is_zero() {
            None
        } else {
            Some(Scalar(BigRational::new(num, den)))
        }
    }

    pub fn numer(&self) -> &BigInt {
        self.0.numer()
    }

    pub fn denom(&self) -> &BigInt {
        self.0.denom()
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    pub fn is_positive(&self) -> bool {
        self.0.is_positive()
    }

    pub fn is_negative(&self) -> bool {
        self.0.is_negative()
    }

    pub fn is_integer(&self) -> bool {
        self.0.is_integer()
    }

    pub fn abs(&self) -> Self {
        Scalar(self.0.abs())
    }

    pub fn signum(&self) -> Ordering {
        self.0.cmp(&BigRational::zero())
    }

    pub fn recip(&self) -> Self {
        Scalar(self.0.recip())
    }

    /// Nearest `f64`, for display only.
    pub fn to_f64(&self) -> f64 {
        self.0.to_f64().unwrap_or(f64::NAN)
    }

    pub fn min(self, other: Self) -> Self {
        if other < self {
            other
        } else {
            self
        }
    }

    pub fn max(self, other: Self) -> Self {
        if other > self {
            other
        } else {
            self
        }
    }

    pub fn as_rational(&self) -> &BigRational {
        &self.0
    }
}

impl From<i64> for Scalar {
    fn from(n: i64) -> Self {
        Scalar::from_integer(n)
    }
}

impl From<BigRational> for Scalar {
    fn from(r: BigRational) -> Self {
        Scalar(r)
    }
}

impl From<BigInt> for Scalar {
    fn from(n: BigInt) -> Self {
        Scalar(BigRational::from_integer(n))
    }
}

/// Parses integers (`-3`), fractions (`7/2`), and finite decimals with an
/// optional exponent (`1.5`, `-0.25e2`). The result is exact.
impl FromStr for Scalar {
    type Err = ParseScalarError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = |reason| ParseScalarError {
            text: s.to_string(),
            reason,
        };
        let text = s.trim();
        if text.is_empty() {
            return Err(err("empty"));
        }
        if let Some((num, den)) = text.split_once('/') {
            let num = parse_decimal(num.trim()).ok_or_else(|| err("bad numerator"))?;
            let den = parse_decimal(den.trim()).ok_or_else(|| err("bad denominator"))?;
            if den.is_zero() {
                return Err(err("zero denominator"));
            }
            return Ok(num / den);
        }
        parse_decimal(text).ok_or_else(|| err("not an integer, fraction or finite decimal"))
    }
}

fn parse_decimal(text: &str) -> Option<Scalar> {
    let (mantissa, exponent) = match text.find(['e', 'E']) {
        Some(i) => (&text[..i], text[i + 1..].parse::<i32>().ok()?),
        None => (text, 0),
    };
    let (negative, digits) = match mantissa.as_bytes().first()? {
        b'-' => (true, &mantissa[1..]),
        b'+' => (false, &mantissa[1..]),
        _ => (false, mantissa),
    };
    let (int_part, frac_part) = match digits.split_once('.') {
        Some((i, f)) => (i, f),
        None => (digits, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !int_part
        .bytes()
        .chain(frac_part.bytes())
        .all(|b| b.is_ascii_digit())
    {
        return None;
    }
    if exponent.unsigned_abs() > 4096 {
        return None;
    }
    let all_digits = format!("{int_part}{frac_part}");
    let mut numer: BigInt = all_digits.parse().ok()?;
    if negative {
        numer = -numer;
    }
    let scale = exponent - frac_part.len() as i32;
    let ten = BigInt::from(10u32);
    let value = if scale >= 0 {
        BigRational::from_integer(numer * num_traits::pow(ten, scale as usize))
    } else {
        BigRational::new(numer, num_traits::pow(ten, (-scale) as usize))
    };
    Some(Scalar(value))
}

impl fmt::Display for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_integer() {
            write!(f, "{}", self.0.numer())
        } else {
            write!(f, "{}/{}", self.0.numer(), self.0.denom())
        }
    }
}

impl fmt::Debug for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl Serialize for Scalar {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Scalar {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let value = serde_json::Value::deserialize(deserializer)?;
        scalar_from_json(&value).map_err(serde::de::Error::custom)
    }
}

/// Reads a JSON number or string literal without passing through `f64`.
pub fn scalar_from_json(value: &serde_json::Value) -> Result<Scalar, ParseScalarError> {
    match value {
        serde_json::Value::Number(n) => n.to_string().parse(),
        serde_json::Value::String(s) => s.parse(),
        other => Err(ParseScalarError {
            text: other.to_string(),
            reason: "expected a number or a \"p/q\" string",
        }),
    }
}

/// Least common multiple of the denominators and gcd of the numerators of a
/// set of scalars, used to rescale a row to coprime integers.
pub(crate) fn integer_scale(values: &[&Scalar]) -> Option<Scalar> {
    let mut lcm = BigInt::one();
    for v in values {
        lcm = lcm.lcm(v.denom());
    }
    let mut gcd = BigInt::zero();
    for v in values {
        let n = v.numer() * (&lcm / v.denom());
        gcd = gcd.gcd(&n);
    }
    if gcd.is_zero() {
        None
    } else {
        Some(Scalar(BigRational::new(lcm, gcd)))
    }
}

macro_rules! forward_binop {
    ($trait:ident, $method:ident) => {
        impl $trait<Scalar> for Scalar {
            type Output = Scalar;
            fn $method(self, rhs: Scalar) -> Scalar {
                Scalar($trait::$method(self.0, rhs.0))
            }
        }
        impl<'a> $trait<&'a Scalar> for Scalar {
            type Output = Scalar;
            fn $method(self, rhs: &'a Scalar) -> Scalar {
                Scalar($trait::$method(self.0, &rhs.0))
            }
        }
        impl<'a> $trait<Scalar> for &'a Scalar {
            type Output = Scalar;
            fn $method(self, rhs: Scalar) -> Scalar {
                Scalar($trait::$method(&self.0, rhs.0))
            }
        }
        impl<'a, 'b> $trait<&'b Scalar> for &'a Scalar {
            type Output = Scalar;
            fn $method(self, rhs: &'b Scalar) -> Scalar {
                Scalar($trait::$method(&self.0, &rhs.0))
            }
        }
    };
}

forward_binop!(Add, add);
forward_binop!(Sub, sub);
forward_binop!(Mul, mul);
forward_binop!(Div, div);

impl AddAssign<&Scalar> for Scalar {
    fn add_assign(&mut self, rhs: &Scalar) {
        self.0 += &rhs.0;
    }
}

impl AddAssign<Scalar> for Scalar {
    fn add_assign(&mut self, rhs: Scalar) {
        self.0 += rhs.0;
    }
}

impl SubAssign<&Scalar> for Scalar {
    fn sub_assign(&mut self, rhs: &Scalar) {
        self.0 -= &rhs.0;
    }
}

impl MulAssign<&Scalar> for Scalar {
    fn mul_assign(&mut self, rhs: &Scalar) {
        self.0 *= &rhs.0;
    }
}

impl Neg for Scalar {
    type Output = Scalar;
    fn neg(self) -> Scalar {
        Scalar(-self.0)
    }
}

impl Neg for &Scalar {
    type Output = Scalar;
    fn neg(self) -> Scalar {
        Scalar(-&self.0)
    }
}

impl Sum for Scalar {
    fn sum<I: Iterator<Item = Scalar>>(iter: I) -> Scalar {
        iter.fold(Scalar::zero(), |acc, x| acc + x)
    }
}

impl<'a> Sum<&'a Scalar> for Scalar {
    fn sum<I: Iterator<Item = &'a Scalar>>(iter: I) -> Scalar {
        iter.fold(Scalar::zero(), |acc, x| acc + x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn q(s: &str) -> Scalar {
        s.parse().unwrap()
    }

    #[test]
    fn parses_exactly() {
        assert_eq!(q("1.5"), Scalar::new(3, 2));
        assert_eq!(q("4.5"), Scalar::new(9, 2));
        assert_eq!(q("-7/2"), Scalar::new(-7, 2));
        assert_eq!(q("6/4"), Scalar::new(3, 2));
        assert_eq!(q("0.1"), Scalar::new(1, 10));
        assert_eq!(q("-2.5e1"), Scalar::from_integer(-25));
        assert_eq!(q("125e-3"), Scalar::new(1, 8));
        assert_eq!(q("+3"), Scalar::from_integer(3));
        assert_eq!(q(".5"), Scalar::new(1, 2));
    }

    #[test]
    fn rejects_garbage() {
        for bad in ["", "3/0", "x", "1..2", "1/2/3", "inf", "NaN", "1e", "-"] {
            assert!(bad.parse::<Scalar>().is_err(), "{bad} should not parse");
        }
    }

    #[test]
    fn lowest_terms_and_display() {
        let x = Scalar::new(10, -4);
        assert_eq!(x.numer(), &BigInt::from(-5));
        assert_eq!(x.denom(), &BigInt::from(2));
        assert_eq!(x.to_string(), "-5/2");
        assert_eq!(Scalar::from_integer(17).to_string(), "17");
    }

    #[test]
    fn json_numbers_are_not_rounded() {
        let v: serde_json::Value = serde_json::from_str("0.1").unwrap();
        assert_eq!(scalar_from_json(&v).unwrap(), Scalar::new(1, 10));
        let v: serde_json::Value = serde_json::from_str("123456789012345678901234567890").unwrap();
        assert_eq!(
            scalar_from_json(&v).unwrap().to_string(),
            "123456789012345678901234567890"
        );
    }

    #[test]
    fn integer_scale_makes_coprime_integers() {
        let (a, b, c) = (Scalar::new(3, 2), Scalar::new(-1, 1), Scalar::new(3, 4));
        let s = integer_scale(&[&a, &b, &c]).unwrap();
        assert_eq!(s, Scalar::from_integer(4));
        assert!(integer_scale(&[&Scalar::zero()]).is_none());
    }

    proptest! {
        #[test]
        fn field_identities_hold(a in -50i64..50, b in 1i64..50, c in -50i64..50, d in 1i64..50) {
            let x = Scalar::new(a, b);
            let y = Scalar::new(c, d);
            prop_assert_eq!(&(&x + &y) - &y, x.clone());
            if !y.is_zero() {
                prop_assert_eq!(&(&x * &y) / &y, x.clone());
            }
            prop_assert_eq!(&x + &y, Scalar::new(a * d + c * b, b * d));
            prop_assert_eq!(x.to_string().parse::<Scalar>().unwrap(), x);
        }
    }
}
