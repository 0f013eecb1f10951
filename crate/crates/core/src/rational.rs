//! Exact number types: dyadic rationals for measures and packing sums, and
//! helpers for general rationals (`BigRational`) used for coefficients and
//! distortion ratios.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Mul, Sub};
use std::str::FromStr;

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use thiserror::Error;

/// Exponent of the fixed measure unit used by the fast integer paths.
/// An interval of depth `n` has measure `2^(UNIT_EXP - n)` units.
pub const UNIT_EXP: u32 = 62;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ParseRationalError {
    #[error("malformed rational {0:?}: expected \"p/q\" with decimal integers")]
    Malformed(String),
    #[error("rational {0:?} has a non-positive denominator")]
    BadDenominator(String),
}

/// `numerator * 2^-exponent` in canonical form: the numerator is odd, or the
/// value is zero with exponent 0.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct DyadicRational {
    numerator: BigInt,
    exponent: u32,
}

impl DyadicRational {
    pub fn new(numerator: impl Into<BigInt>, exponent: u32) -> Self {
        let mut numerator = numerator.into();
        let mut exponent = exponent;
        if numerator.is_zero() {
            return Self::zero();
        }
        let tz = numerator.magnitude().trailing_zeros().unwrap_or(0);
        let shift = tz.min(exponent as u64) as u32;
        if shift > 0 {
            numerator >>= shift;
            exponent -= shift;
        }
        Self { numerator, exponent }
    }

    pub fn zero() -> Self {
        Self { numerator: BigInt::zero(), exponent: 0 }
    }

    pub fn one() -> Self {
        Self::integer(1)
    }

    pub fn integer(value: i64) -> Self {
        Self { numerator: BigInt::from(value), exponent: 0 }
    }

    /// `2^-n`.
    pub fn pow2_neg(n: u32) -> Self {
        Self { numerator: BigInt::one(), exponent: n }
    }

    /// Converts a count of `2^-UNIT_EXP` units.
    pub fn from_units(units: u128) -> Self {
        Self::new(BigInt::from(units), UNIT_EXP)
    }

    pub fn numerator(&self) -> &BigInt {
        &self.numerator
    }

    pub fn exponent(&self) -> u32 {
        self.exponent
    }

    pub fn denominator(&self) -> BigInt {
        BigInt::one() << self.exponent
    }

    pub fn is_zero(&self) -> bool {
        self.numerator.is_zero()
    }

    /// Divides by `2^k`.
    pub fn shr(&self, k: u32) -> Self {
        Self::new(self.numerator.clone(), self.exponent + k)
    }

    /// Multiplies by `2^k`.
    pub fn shl(&self, k: u32) -> Self {
        if k <= self.exponent {
            Self::new(self.numerator.clone(), self.exponent - k)
        } else {
            Self::new(&self.numerator << (k - self.exponent), 0)
        }
    }

    pub fn to_big_rational(&self) -> BigRational {
        BigRational::new(self.numerator.clone(), self.denominator())
    }

    /// Exact conversion from a general rational whose denominator is a power
    /// of two.
    pub fn from_big_rational(r: &BigRational) -> Option<Self> {
        let den = r.denom().magnitude();
        let tz = den.trailing_zeros().unwrap_or(0);
        if den != &(BigUint::one() << tz) {
            return None;
        }
        Some(Self::new(r.numer().clone(), u32::try_from(tz).ok()?))
    }

    pub fn to_f64(&self) -> f64 {
        self.to_big_rational().to_f64().unwrap_or(f64::NAN)
    }

    fn aligned(&self, other: &Self) -> (BigInt, BigInt) {
        match self.exponent.cmp(&other.exponent) {
            Ordering::Equal => (self.numerator.clone(), other.numerator.clone()),
            Ordering::Less => (
                &self.numerator << (other.exponent - self.exponent),
                other.numerator.clone(),
            ),
            Ordering::Greater => (
                self.numerator.clone(),
                &other.numerator << (self.exponent - other.exponent),
            ),
        }
    }
}

impl Default for DyadicRational {
    fn default() -> Self {
        Self::zero()
    }
}

impl Ord for DyadicRational {
    fn cmp(&self, other: &Self) -> Ordering {
        let (a, b) = self.aligned(other);
        a.cmp(&b)
    }
}

impl PartialOrd for DyadicRational {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Add for &DyadicRational {
    type Output = DyadicRational;
    fn add(self, rhs: Self) -> DyadicRational {
        let (a, b) = self.aligned(rhs);
        DyadicRational::new(a + b, self.exponent.max(rhs.exponent))
    }
}

impl Add for DyadicRational {
    type Output = DyadicRational;
    fn add(self, rhs: Self) -> DyadicRational {
        &self + &rhs
    }
}

impl Sub for &DyadicRational {
    type Output = DyadicRational;
    fn sub(self, rhs: Self) -> DyadicRational {
        let (a, b) = self.aligned(rhs);
        DyadicRational::new(a - b, self.exponent.max(rhs.exponent))
    }
}

impl Sub for DyadicRational {
    type Output = DyadicRational;
    fn sub(self, rhs: Self) -> DyadicRational {
        &self - &rhs
    }
}

impl Mul for &DyadicRational {
    type Output = DyadicRational;
    fn mul(self, rhs: Self) -> DyadicRational {
        DyadicRational::new(&self.numerator * &rhs.numerator, self.exponent + rhs.exponent)
    }
}

impl Mul for DyadicRational {
    type Output = DyadicRational;
    fn mul(self, rhs: Self) -> DyadicRational {
        &self * &rhs
    }
}

impl std::iter::Sum for DyadicRational {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(Self::zero(), |acc, x| &acc + &x)
    }
}

impl fmt::Display for DyadicRational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.numerator, self.denominator())
    }
}

impl FromStr for DyadicRational {
    type Err = ParseRationalError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let r = parse_ratio(s)?;
        Self::from_big_rational(&r).ok_or_else(|| ParseRationalError::Malformed(s.to_string()))
    }
}

/// Formats a rational as `"p/q"`, always with an explicit denominator.
pub fn ratio_string(r: &BigRational) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

/// Parses `"p/q"` or a bare integer `"p"`.
pub fn parse_ratio(s: &str) -> Result<BigRational, ParseRationalError> {
    let malformed = || ParseRationalError::Malformed(s.to_string());
    let (p, q) = match s.split_once('/') {
        Some((p, q)) => (p.trim(), q.trim()),
        None => (s.trim(), "1"),
    };
    let p: BigInt = p.parse().map_err(|_| malformed())?;
    let q: BigInt = q.parse().map_err(|_| malformed())?;
    if !q.is_positive() {
        return Err(ParseRationalError::BadDenominator(s.to_string()));
    }
    Ok(BigRational::new(p, q))
}

/// Square root of a nonnegative rational, within one ulp of the correctly
/// rounded value.
pub fn sqrt_f64(r: &BigRational) -> f64 {
    if !r.is_positive() {
        return 0.0;
    }
    let p = r.numer().magnitude();
    let q = r.denom().magnitude();
    // Choose s so that floor(sqrt(p * 4^s / q)) carries at least 64 bits.
    let bits = p.bits() as i64 - q.bits() as i64;
    let s = ((130 - bits) / 2).max(0) as u64;
    let scaled = (p << (2 * s)) / q;
    let root = scaled.sqrt();
    let mantissa = root.to_f64().unwrap_or(f64::INFINITY);
    mantissa * 2f64.powi(-(s as i32))
}

/// Compares `a/b` with `c/d` for nonnegative integers, `b, d > 0`.
pub(crate) fn cmp_fractions(a: u128, b: u128, c: u128, d: u128) -> Ordering {
    match (a.checked_mul(d), c.checked_mul(b)) {
        (Some(x), Some(y)) => x.cmp(&y),
        _ => (BigUint::from(a) * BigUint::from(d)).cmp(&(BigUint::from(c) * BigUint::from(b))),
    }
}

/// `num / den` as a reduced `BigRational`.
pub(crate) fn fraction(num: u128, den: u128) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_form_is_unique() {
        let a = DyadicRational::new(12, 5);
        let b = DyadicRational::new(3, 3);
        assert_eq!(a, b);
        assert_eq!(a.exponent(), 3);
        assert_eq!(DyadicRational::new(0, 9), DyadicRational::zero());
        assert_eq!(DyadicRational::new(8, 0).to_string(), "8/1");
    }

    #[test]
    fn arithmetic_and_order() {
        let half = DyadicRational::pow2_neg(1);
        let quarter = DyadicRational::pow2_neg(2);
        assert_eq!(&half + &quarter, DyadicRational::new(3, 2));
        assert_eq!(&half - &quarter, quarter);
        assert_eq!(&half * &half, quarter);
        assert!(quarter < half);
        assert_eq!(DyadicRational::from_units(1u128 << 61), half);
        assert_eq!(half.shl(3), DyadicRational::integer(4));
        assert_eq!(half.shr(1), quarter);
    }

    #[test]
    fn ratio_round_trip() {
        let r = parse_ratio("-6/4").unwrap();
        assert_eq!(ratio_string(&r), "-3/2");
        assert_eq!(ratio_string(&parse_ratio("3").unwrap()), "3/1");
        assert!(parse_ratio("1/0").is_err());
        assert!(parse_ratio("x/2").is_err());
        assert_eq!("7/4".parse::<DyadicRational>().unwrap(), DyadicRational::new(7, 2));
        assert!("1/3".parse::<DyadicRational>().is_err());
    }

    #[test]
    fn sqrt_is_close_to_correctly_rounded() {
        for (p, q) in [(1u64, 1u64), (3, 2), (2, 1), (7, 4), (1, 3), (123456789, 1000)] {
            let r = BigRational::new(BigInt::from(p), BigInt::from(q));
            let got = sqrt_f64(&r);
            let want = (p as f64 / q as f64).sqrt();
            let ulps = (got.to_bits() as i64 - want.to_bits() as i64).abs();
            assert!(ulps <= 1, "sqrt({p}/{q}): {got} vs {want}");
        }
        assert_eq!(sqrt_f64(&BigRational::one()), 1.0);
        assert_eq!(sqrt_f64(&BigRational::from_integer(9.into())), 3.0);
    }
}
