//! Numeric abstraction shared by the quantizer, consensus engine and optimizer.
//!
//! The protocol itself only needs ring operations, ordering and `floor`/`ceil`.
//! [`Rational`] is the reference scalar: every comparison the zoom logic makes
//! (`x_new == x_old`, saturation tests) is exact. `f64`/`f32` are supported for
//! quick experiments where drift is acceptable.

use std::fmt::{Debug, Display};
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{FromPrimitive, Num, Signed, ToPrimitive, Zero};

/// Arbitrary-precision rational, always stored in lowest terms.
pub type Rational = BigRational;

pub trait Scalar:
    Num + Signed + Clone + Debug + Display + PartialOrd + FromPrimitive + ToPrimitive + Send + Sync + 'static
{
    fn floor(&self) -> Self;
    fn ceil(&self) -> Self;

    /// Whether the exact value is an integer.
    fn is_integral(&self) -> bool {
        self.floor() == *self
    }

    fn from_int(v: i64) -> Self {
        Self::from_i64(v).expect("every scalar type represents small integers")
    }

    fn from_ratio(numer: i64, denom: i64) -> Self {
        assert!(denom != 0, "zero denominator");
        Self::from_int(numer) / Self::from_int(denom)
    }

    fn to_f64_lossy(&self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// `self^exp` by repeated squaring.
    fn powi(&self, exp: u32) -> Self {
        let mut base = self.clone();
        let mut acc = Self::one();
        let mut e = exp;
        while e > 0 {
            if e & 1 == 1 {
                acc = acc * base.clone();
            }
            base = base.clone() * base;
            e >>= 1;
        }
        acc
    }
}

impl Scalar for BigRational {
    fn floor(&self) -> Self {
        BigRational::floor(self)
    }

    fn ceil(&self) -> Self {
        BigRational::ceil(self)
    }

    fn is_integral(&self) -> bool {
        self.is_integer()
    }

    fn from_int(v: i64) -> Self {
        BigRational::from_integer(BigInt::from(v))
    }

    fn from_ratio(numer: i64, denom: i64) -> Self {
        assert!(denom != 0, "zero denominator");
        BigRational::new(BigInt::from(numer), BigInt::from(denom))
    }
}

impl Scalar for f64 {
    fn floor(&self) -> Self {
        f64::floor(*self)
    }

    fn ceil(&self) -> Self {
        f64::ceil(*self)
    }
}

impl Scalar for f32 {
    fn floor(&self) -> Self {
        f32::floor(*self)
    }

    fn ceil(&self) -> Self {
        f32::ceil(*self)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("cannot parse {input:?} as a rational (expected `n`, `n/d` or a decimal like `0.12`)")]
pub struct ParseRationalError {
    pub input: String,
}

/// Parses `"7"`, `"-3/4"` or `"0.12"` into an exact rational.
///
/// Decimals are converted exactly (`0.12` becomes `3/25`), never through `f64`.
pub fn parse_rational(input: &str) -> Result<Rational, ParseRationalError> {
    let err = || ParseRationalError {
        input: input.to_string(),
    };
    let s = input.trim();
    if s.is_empty() {
        return Err(err());
    }
    if let Some((num, den)) = s.split_once('/') {
        let num = BigInt::from_str(num.trim()).map_err(|_| err())?;
        let den = BigInt::from_str(den.trim()).map_err(|_| err())?;
        if den.is_zero() {
            return Err(err());
        }
        return Ok(BigRational::new(num, den));
    }
    if let Some((int_part, frac_part)) = s.split_once('.') {
        if frac_part.is_empty() || !frac_part.bytes().all(|b| b.is_ascii_digit()) {
            return Err(err());
        }
        let negative = int_part.trim_start().starts_with('-');
        let int_digits = int_part.trim_start_matches(['-', '+']);
        let whole = if int_digits.is_empty() {
            BigInt::zero()
        } else {
            BigInt::from_str(int_digits).map_err(|_| err())?
        };
        let frac = BigInt::from_str(frac_part).map_err(|_| err())?;
        let scale = num_traits::pow(BigInt::from(10), frac_part.len());
        let magnitude = BigRational::new(whole * &scale + frac, scale);
        return Ok(if negative { -magnitude } else { magnitude });
    }
    BigInt::from_str(s)
        .map(BigRational::from_integer)
        .map_err(|_| err())
}

/// `"num/den"` rendering, with integers written as `"num/1"` so columns parse uniformly.
pub fn format_rational(r: &Rational) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

/// Serde adapter writing rationals as `"num/den"` strings.
pub mod rational_str {
    use super::{format_rational, parse_rational, Rational};
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(value: &Rational, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&format_rational(value))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(deserializer: D) -> Result<Rational, D::Error> {
        let s = String::deserialize(deserializer)?;
        parse_rational(&s).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(n: i64, d: i64) -> Rational {
        Rational::from_ratio(n, d)
    }

    #[test]
    fn parses_all_forms() {
        assert_eq!(parse_rational("7").unwrap(), r(7, 1));
        assert_eq!(parse_rational("-3/4").unwrap(), r(-3, 4));
        assert_eq!(parse_rational("6/8").unwrap(), r(3, 4));
        assert_eq!(parse_rational("0.12").unwrap(), r(3, 25));
        assert_eq!(parse_rational("-0.5").unwrap(), r(-1, 2));
        assert_eq!(parse_rational(".25").unwrap(), r(1, 4));
        assert_eq!(parse_rational("211.88").unwrap(), r(21188, 100));
    }

    #[test]
    fn rejects_garbage() {
        for bad in ["", "1/0", "abc", "1.", "1.2.3", "1/x"] {
            assert!(parse_rational(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn floor_ceil_on_negatives() {
        assert_eq!(Scalar::floor(&r(-7, 4)), r(-2, 1));
        assert_eq!(Scalar::ceil(&r(-7, 4)), r(-1, 1));
        assert_eq!(Scalar::floor(&-1.75f64), -2.0);
        assert!(r(4, 2).is_integral());
        assert!(!r(1, 2).is_integral());
    }

    #[test]
    fn powi_matches_repeated_product() {
        assert_eq!(r(3, 4).powi(3), r(27, 64));
        assert_eq!(r(2, 1).powi(0), r(1, 1));
        assert_eq!(2.0f64.powi(10), 1024.0);
    }

    #[test]
    fn format_round_trips() {
        let x = r(-9, 32);
        assert_eq!(format_rational(&x), "-9/32");
        assert_eq!(parse_rational(&format_rational(&x)).unwrap(), x);
        assert_eq!(format_rational(&r(5, 1)), "5/1");
    }
}
