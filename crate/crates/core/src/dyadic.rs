//! Exact dyadic rational arithmetic.
//!
//! Every length, offset, and measure in this crate is a dyadic rational
//! `p / 2^k`.  The canonical form keeps `p` odd (or zero with `k = 0`), so
//! equality is structural and comparisons are exact.  Dyadics are closed
//! under addition, subtraction, multiplication, and halving, which is all
//! the geometric constructions need; genuine ratios are handed off to
//! `BigRational`.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DyadicParseError {
    #[error("malformed dyadic literal {0:?}: expected `p` or `p/2^k`")]
    Malformed(String),
    #[error("denominator in {0:?} is not a power of two")]
    BadDenominator(String),
}

/// A dyadic rational `num / 2^exp` in canonical form (`num` odd, or zero with
/// `exp == 0`).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Dyadic {
    num: BigInt,
    exp: u32,
}

impl Dyadic {
    pub fn zero() -> Self {
        Dyadic { num: BigInt::zero(), exp: 0 }
    }

    pub fn one() -> Self {
        Dyadic { num: BigInt::one(), exp: 0 }
    }

    pub fn from_int(n: i64) -> Self {
        Dyadic::new(BigInt::from(n), 0)
    }

    /// `p / 2^k`, canonicalized.
    pub fn new(num: BigInt, exp: u32) -> Self {
        let mut d = Dyadic { num, exp };
        d.canonicalize();
        d
    }

    pub fn ratio(p: i64, exp: u32) -> Self {
        Dyadic::new(BigInt::from(p), exp)
    }

    /// `2^-k`.
    pub fn pow2_neg(k: u32) -> Self {
        Dyadic { num: BigInt::one(), exp: k }
    }

    fn canonicalize(&mut self) {
        if self.num.is_zero() {
            self.exp = 0;
            return;
        }
        while self.exp > 0 && (&self.num % 2u32).is_zero() {
            self.num /= 2;
            self.exp -= 1;
        }
    }

    pub fn numerator(&self) -> &BigInt {
        &self.num
    }

    /// Exponent of the canonical power-of-two denominator.
    pub fn exponent(&self) -> u32 {
        self.exp
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    pub fn is_negative(&self) -> bool {
        self.num.is_negative()
    }

    pub fn is_positive(&self) -> bool {
        self.num.is_positive()
    }

    pub fn abs(&self) -> Self {
        Dyadic { num: self.num.abs(), exp: self.exp }
    }

    /// `self / 2^k` (always exact).
    pub fn halve(&self, k: u32) -> Self {
        if self.num.is_zero() {
            return Dyadic::zero();
        }
        Dyadic { num: self.num.clone(), exp: self.exp + k }
    }

    /// `self * 2^k` (always exact).
    pub fn double(&self, k: u32) -> Self {
        if self.exp >= k {
            Dyadic::new(self.num.clone(), self.exp - k)
        } else {
            Dyadic { num: &self.num << (k - self.exp), exp: 0 }
        }
    }

    pub fn scale_int(&self, n: i64) -> Self {
        Dyadic::new(&self.num * n, self.exp)
    }

    /// Exact division `self / other` when the quotient is again dyadic.
    /// Returns `None` otherwise (odd part of the divisor does not divide).
    pub fn div_exact(&self, other: &Dyadic) -> Option<Dyadic> {
        if other.is_zero() {
            return None;
        }
        if self.is_zero() {
            return Some(Dyadic::zero());
        }
        // self/other = (a/2^j)/(b/2^k) = (a/b) * 2^(k-j); dyadic iff b | a
        // up to powers of two, i.e. odd(b) divides a.
        let (q, r) = num_integer::div_rem(self.num.clone(), other.num.clone());
        if !r.is_zero() {
            return None;
        }
        let mut d = Dyadic { num: q, exp: 0 };
        if other.exp >= self.exp {
            Some(d.double(other.exp - self.exp))
        } else {
            d.exp = self.exp - other.exp;
            d.canonicalize();
            Some(d)
        }
    }

    pub fn min(a: &Dyadic, b: &Dyadic) -> Dyadic {
        if a <= b { a.clone() } else { b.clone() }
    }

    pub fn max(a: &Dyadic, b: &Dyadic) -> Dyadic {
        if a >= b { a.clone() } else { b.clone() }
    }

    pub fn to_rational(&self) -> BigRational {
        BigRational::new(self.num.clone(), BigInt::one() << self.exp)
    }

    pub fn to_f64(&self) -> f64 {
        self.to_rational().to_f64().unwrap_or(f64::NAN)
    }

    /// Largest multiple of `2^-grid` that is `<= self`.
    pub fn floor_to_grid(&self, grid: u32) -> Dyadic {
        if self.exp <= grid {
            return self.clone();
        }
        let shift = self.exp - grid;
        let q = num_integer::Integer::div_floor(&self.num, &(BigInt::one() << shift));
        Dyadic::new(q, grid)
    }

    pub fn from_rational_exact(r: &BigRational) -> Option<Dyadic> {
        let mut den = r.denom().clone();
        let mut exp = 0u32;
        while (&den % 2u32).is_zero() {
            den /= 2;
            exp += 1;
        }
        if den.abs().is_one() {
            let num = if den.is_negative() { -r.numer().clone() } else { r.numer().clone() };
            Some(Dyadic::new(num, exp))
        } else {
            None
        }
    }
}

impl PartialOrd for Dyadic {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Dyadic {
    fn cmp(&self, other: &Self) -> Ordering {
        // a/2^j vs b/2^k  <=>  a*2^k vs b*2^j, aligned to the common scale.
        let (j, k) = (self.exp, other.exp);
        if j == k {
            self.num.cmp(&other.num)
        } else if j < k {
            (&self.num << (k - j)).cmp(&other.num)
        } else {
            self.num.cmp(&(&other.num << (j - k)))
        }
    }
}

impl Add for &Dyadic {
    type Output = Dyadic;
    fn add(self, other: &Dyadic) -> Dyadic {
        let exp = self.exp.max(other.exp);
        let a = &self.num << (exp - self.exp);
        let b = &other.num << (exp - other.exp);
        Dyadic::new(a + b, exp)
    }
}

impl Sub for &Dyadic {
    type Output = Dyadic;
    fn sub(self, other: &Dyadic) -> Dyadic {
        let exp = self.exp.max(other.exp);
        let a = &self.num << (exp - self.exp);
        let b = &other.num << (exp - other.exp);
        Dyadic::new(a - b, exp)
    }
}

impl Mul for &Dyadic {
    type Output = Dyadic;
    fn mul(self, other: &Dyadic) -> Dyadic {
        Dyadic::new(&self.num * &other.num, self.exp + other.exp)
    }
}

impl Neg for &Dyadic {
    type Output = Dyadic;
    fn neg(self) -> Dyadic {
        Dyadic { num: -self.num.clone(), exp: self.exp }
    }
}

impl Add for Dyadic {
    type Output = Dyadic;
    fn add(self, other: Dyadic) -> Dyadic {
        &self + &other
    }
}

impl Sub for Dyadic {
    type Output = Dyadic;
    fn sub(self, other: Dyadic) -> Dyadic {
        &self - &other
    }
}

impl Mul for Dyadic {
    type Output = Dyadic;
    fn mul(self, other: Dyadic) -> Dyadic {
        &self * &other
    }
}

impl AddAssign<&Dyadic> for Dyadic {
    fn add_assign(&mut self, other: &Dyadic) {
        *self = &*self + other;
    }
}

impl SubAssign<&Dyadic> for Dyadic {
    fn sub_assign(&mut self, other: &Dyadic) {
        *self = &*self - other;
    }
}

impl fmt::Display for Dyadic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.exp == 0 {
            write!(f, "{}", self.num)
        } else {
            write!(f, "{}/2^{}", self.num, self.exp)
        }
    }
}

impl FromStr for Dyadic {
    type Err = DyadicParseError;

    /// Accepts `p`, `p/2^k`, and `p/q` with `q` a literal power of two.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let malformed = || DyadicParseError::Malformed(s.to_string());
        match s.split_once('/') {
            None => {
                let p: BigInt = s.parse().map_err(|_| malformed())?;
                Ok(Dyadic::new(p, 0))
            }
            Some((num, den)) => {
                let p: BigInt = num.trim().parse().map_err(|_| malformed())?;
                let den = den.trim();
                if let Some(exp) = den.strip_prefix("2^") {
                    let k: u32 = exp.parse().map_err(|_| malformed())?;
                    Ok(Dyadic::new(p, k))
                } else {
                    let q: BigInt = den.parse().map_err(|_| malformed())?;
                    if q.is_positive() {
                        let bits = q.bits();
                        if q == BigInt::one() << (bits - 1) {
                            return Ok(Dyadic::new(p, (bits - 1) as u32));
                        }
                    }
                    Err(DyadicParseError::BadDenominator(s.to_string()))
                }
            }
        }
    }
}

impl Serialize for Dyadic {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Dyadic {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(s: &str) -> Dyadic {
        s.parse().unwrap()
    }

    #[test]
    fn canonical_form() {
        assert_eq!(d("4/2^3"), d("1/2^1"));
        assert_eq!(d("0/2^5"), Dyadic::zero());
        assert_eq!(d("6/2^1"), Dyadic::from_int(3));
        assert_eq!(d("3/8"), d("3/2^3"));
    }

    #[test]
    fn arithmetic() {
        assert_eq!(&d("1/2^1") + &d("1/2^2"), d("3/2^2"));
        assert_eq!(&d("1/2^1") - &d("3/2^2"), d("-1/2^2"));
        assert_eq!(&d("3/2^2") * &d("1/2^1"), d("3/2^3"));
        assert_eq!(d("5/2^3").halve(2), d("5/2^5"));
        assert_eq!(d("5/2^3").double(3), Dyadic::from_int(5));
    }

    #[test]
    fn ordering() {
        assert!(d("1/2^2") < d("1/2^1"));
        assert!(d("-1/2^1") < d("1/2^4"));
        assert_eq!(d("2/2^2"), d("1/2^1"));
    }

    #[test]
    fn exact_division() {
        assert_eq!(d("3/2^3").div_exact(&d("3/2^1")), Some(d("1/2^2")));
        assert_eq!(d("1/2^1").div_exact(&d("1/2^3")), Some(Dyadic::from_int(4)));
        // 1/3 is not dyadic
        assert_eq!(Dyadic::one().div_exact(&Dyadic::from_int(3)), None);
        assert_eq!(Dyadic::from_int(6).div_exact(&Dyadic::from_int(3)), Some(Dyadic::from_int(2)));
    }

    #[test]
    fn grid_floor() {
        assert_eq!(d("5/2^4").floor_to_grid(2), d("1/2^2"));
        assert_eq!(d("-5/2^4").floor_to_grid(2), d("-2/2^2"));
        assert_eq!(d("1/2^1").floor_to_grid(4), d("1/2^1"));
    }

    #[test]
    fn display_roundtrip() {
        for s in ["0", "7", "-3/2^2", "1/2^10"] {
            let v = d(s);
            assert_eq!(v.to_string().parse::<Dyadic>().unwrap(), v);
        }
    }

    #[test]
    fn f64_conversion_is_exact_in_range() {
        assert_eq!(d("3/2^2").to_f64(), 0.75);
        assert_eq!(d("-1/2^10").to_f64(), -1.0 / 1024.0);
    }
}
