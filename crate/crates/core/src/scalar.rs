//! Scalar abstraction shared by the model, the LP layer and the exact DP.
//!
//! Everything that only needs field arithmetic is written against [`Scalar`],
//! so the same code runs on `f32`, `f64` and exact [`Rational`] numbers. The
//! Monte Carlo side (policies, simulator) is `f64` only.

use std::fmt;

use num_bigint::BigInt;
use num_rational::Ratio;
use num_traits::{FromPrimitive, Num, Signed, ToPrimitive, Zero};

/// Arbitrary-precision rational.
pub type Rational = Ratio<BigInt>;

/// Ordered field element usable by the solver and the exact oracles.
pub trait Scalar:
    Num + Signed + Clone + PartialOrd + fmt::Debug + fmt::Display + FromPrimitive + Send + Sync + 'static
{
    /// Magnitude at or below which a value counts as zero. Exact types return 0.
    fn tolerance() -> Self;

    /// `num / den`, exact for rationals.
    fn from_ratio(num: i64, den: i64) -> Self;

    /// Parse a plain decimal literal such as `0.9` or `1e-3`.
    ///
    /// Rationals keep the decimal value exactly (`0.1` is `1/10`, not the
    /// nearest binary fraction).
    fn parse_decimal(text: &str) -> Option<Self>;

    fn to_f64(&self) -> f64;

    fn is_exact() -> bool {
        false
    }

    fn from_count(n: usize) -> Self {
        <Self as FromPrimitive>::from_usize(n).expect("usize fits every scalar")
    }

    /// True when `|self| <= tolerance()`.
    fn is_negligible(&self) -> bool {
        self.abs() <= Self::tolerance()
    }

    /// True when `self > tolerance()`.
    fn is_positive_tol(&self) -> bool {
        *self > Self::tolerance()
    }
}

impl Scalar for f64 {
    fn tolerance() -> Self {
        1e-12
    }

    fn from_ratio(num: i64, den: i64) -> Self {
        num as f64 / den as f64
    }

    fn parse_decimal(text: &str) -> Option<Self> {
        text.trim().parse().ok()
    }

    fn to_f64(&self) -> f64 {
        *self
    }
}

impl Scalar for f32 {
    fn tolerance() -> Self {
        1e-6
    }

    fn from_ratio(num: i64, den: i64) -> Self {
        (num as f64 / den as f64) as f32
    }

    fn parse_decimal(text: &str) -> Option<Self> {
        text.trim().parse().ok()
    }

    fn to_f64(&self) -> f64 {
        *self as f64
    }
}

impl Scalar for Rational {
    fn tolerance() -> Self {
        Rational::zero()
    }

    fn from_ratio(num: i64, den: i64) -> Self {
        Rational::new(BigInt::from(num), BigInt::from(den))
    }

    fn parse_decimal(text: &str) -> Option<Self> {
        parse_decimal_rational(text.trim())
    }

    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }

    fn is_exact() -> bool {
        true
    }
}

fn parse_decimal_rational(text: &str) -> Option<Rational> {
    let (mantissa, exponent) = match text.find(['e', 'E']) {
        Some(pos) => (&text[..pos], text[pos + 1..].parse::<i32>().ok()?),
        None => (text, 0),
    };
    let (negative, digits) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int_part, frac_part) = match digits.find('.') {
        Some(pos) => (&digits[..pos], &digits[pos + 1..]),
        None => (digits, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit()) {
        return None;
    }
    let all_digits = format!("{int_part}{frac_part}");
    let numer: BigInt = all_digits.parse().ok()?;
    let scale = exponent - frac_part.len() as i32;
    let ten = BigInt::from(10);
    let mut value = Rational::from_integer(numer);
    if scale >= 0 {
        value *= Rational::from_integer(num_traits::pow(ten, scale as usize));
    } else {
        value /= Rational::from_integer(num_traits::pow(ten, (-scale) as usize));
    }
    Some(if negative { -value } else { value })
}

/// `1 / 2` in any scalar.
pub fn half<S: Scalar>() -> S {
    S::one() / (S::one() + S::one())
}

/// Converts between scalar types through `f64` (exact when the target is
/// rational and the source is a dyadic float).
pub fn convert<S: Scalar, T: Scalar>(value: &S) -> T {
    if S::is_exact() && T::is_exact() {
        // Rational to rational: go through the decimal-free string form.
        let text = format!("{value}");
        if let Some((n, d)) = text.split_once('/') {
            if let (Some(n), Some(d)) = (T::parse_decimal(n), T::parse_decimal(d)) {
                return n / d;
            }
        }
        if let Some(v) = T::parse_decimal(&text) {
            return v;
        }
    }
    T::from_f64(value.to_f64()).unwrap_or_else(T::zero)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decimal_literals_parse_exactly() {
        assert_eq!(Rational::parse_decimal("0.9").unwrap(), Rational::from_ratio(9, 10));
        assert_eq!(Rational::parse_decimal("-1.25").unwrap(), Rational::from_ratio(-5, 4));
        assert_eq!(Rational::parse_decimal("3").unwrap(), Rational::from_ratio(3, 1));
        assert_eq!(Rational::parse_decimal("1e-3").unwrap(), Rational::from_ratio(1, 1000));
        assert_eq!(Rational::parse_decimal("2.5E2").unwrap(), Rational::from_ratio(250, 1));
        assert!(Rational::parse_decimal("abc").is_none());
        assert!(Rational::parse_decimal(".").is_none());
    }

    #[test]
    fn tolerance_is_zero_only_for_exact() {
        assert!(Rational::tolerance().is_zero());
        assert!(f64::tolerance() > 0.0);
        assert!(<f32 as Scalar>::tolerance() > 0.0);
    }

    #[test]
    fn convert_between_representations() {
        let r = Rational::from_ratio(1, 3);
        let back: Rational = convert::<Rational, Rational>(&r);
        assert_eq!(back, r);
        let f: f64 = convert::<Rational, f64>(&r);
        assert!((f - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(half::<Rational>(), Rational::from_ratio(1, 2));
    }
}
