//! Exact extended costs: nonnegative rationals plus a distinguished infinity.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, AddAssign};
use std::str::FromStr;

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Repeat counts can exceed `u64` (a round of the dyadic construction repeats
/// one request `C^(n-1)` times), so they are arbitrary precision.
pub type Reps = BigUint;

/// A service or movement cost: an exact nonnegative rational, or infinity.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum ExtendedCost {
    Finite(BigRational),
    Infinite,
}

impl ExtendedCost {
    pub fn zero() -> Self {
        ExtendedCost::Finite(BigRational::zero())
    }

    pub fn one() -> Self {
        ExtendedCost::Finite(BigRational::one())
    }

    pub fn from_int(v: i64) -> Self {
        Self::finite(BigRational::from_integer(BigInt::from(v)))
            .expect("integer costs must be nonnegative")
    }

    pub fn from_ratio(num: i64, den: i64) -> Self {
        Self::finite(BigRational::new(BigInt::from(num), BigInt::from(den)))
            .expect("ratio costs must be nonnegative")
    }

    /// Wraps a rational, rejecting negative values.
    pub fn finite(v: BigRational) -> Result<Self> {
        if v.is_negative() {
            return Err(Error::Parse(format!("negative cost {v}")));
        }
        Ok(ExtendedCost::Finite(v))
    }

    pub fn is_infinite(&self) -> bool {
        matches!(self, ExtendedCost::Infinite)
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, ExtendedCost::Finite(v) if v.is_zero())
    }

    pub fn as_finite(&self) -> Option<&BigRational> {
        match self {
            ExtendedCost::Finite(v) => Some(v),
            ExtendedCost::Infinite => None,
        }
    }

    /// `count` repetitions of this cost; zero repetitions of infinity is zero.
    pub fn times(&self, count: &Reps) -> Self {
        if count.is_zero() {
            return Self::zero();
        }
        match self {
            ExtendedCost::Finite(v) => ExtendedCost::Finite(v * rational_of(count)),
            ExtendedCost::Infinite => ExtendedCost::Infinite,
        }
    }

    /// Lossy conversion for reporting only.
    pub fn to_f64(&self) -> f64 {
        match self {
            ExtendedCost::Finite(v) => ratio_to_f64(v),
            ExtendedCost::Infinite => f64::INFINITY,
        }
    }

    pub fn min(self, other: Self) -> Self {
        if other < self {
            other
        } else {
            self
        }
    }
}

impl Default for ExtendedCost {
    fn default() -> Self {
        Self::zero()
    }
}

impl PartialOrd for ExtendedCost {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for ExtendedCost {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (ExtendedCost::Finite(a), ExtendedCost::Finite(b)) => a.cmp(b),
            (ExtendedCost::Finite(_), ExtendedCost::Infinite) => Ordering::Less,
            (ExtendedCost::Infinite, ExtendedCost::Finite(_)) => Ordering::Greater,
            (ExtendedCost::Infinite, ExtendedCost::Infinite) => Ordering::Equal,
        }
    }
}

impl Add for ExtendedCost {
    type Output = ExtendedCost;
    fn add(self, rhs: Self) -> Self {
        &self + &rhs
    }
}

impl<'a> Add<&'a ExtendedCost> for &'a ExtendedCost {
    type Output = ExtendedCost;
    fn add(self, rhs: &ExtendedCost) -> ExtendedCost {
        match (self, rhs) {
            (ExtendedCost::Finite(a), ExtendedCost::Finite(b)) => ExtendedCost::Finite(a + b),
            _ => ExtendedCost::Infinite,
        }
    }
}

impl Add<&ExtendedCost> for ExtendedCost {
    type Output = ExtendedCost;
    fn add(mut self, rhs: &ExtendedCost) -> ExtendedCost {
        self += rhs;
        self
    }
}

impl AddAssign<&ExtendedCost> for ExtendedCost {
    fn add_assign(&mut self, rhs: &ExtendedCost) {
        match (&mut *self, rhs) {
            (ExtendedCost::Finite(a), ExtendedCost::Finite(b)) => *a += b,
            _ => *self = ExtendedCost::Infinite,
        }
    }
}

impl AddAssign for ExtendedCost {
    fn add_assign(&mut self, rhs: ExtendedCost) {
        *self += &rhs;
    }
}

impl std::iter::Sum for ExtendedCost {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(ExtendedCost::zero(), |acc, x| acc + x)
    }
}

impl fmt::Display for ExtendedCost {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtendedCost::Finite(v) => write!(f, "{}", format_rational(v)),
            ExtendedCost::Infinite => write!(f, "inf"),
        }
    }
}

impl FromStr for ExtendedCost {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        if t.eq_ignore_ascii_case("inf") || t.eq_ignore_ascii_case("infinity") {
            return Ok(ExtendedCost::Infinite);
        }
        ExtendedCost::finite(parse_rational(t)?)
    }
}

impl From<BigRational> for ExtendedCost {
    fn from(v: BigRational) -> Self {
        ExtendedCost::finite(v).expect("nonnegative rational")
    }
}

impl Serialize for ExtendedCost {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for ExtendedCost {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct CostVisitor;
        impl<'de> Visitor<'de> for CostVisitor {
            type Value = ExtendedCost;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a rational string \"p/q\", \"inf\", or a nonnegative integer")
            }
            fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<ExtendedCost, E> {
                v.parse().map_err(E::custom)
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<ExtendedCost, E> {
                Ok(ExtendedCost::Finite(BigRational::from_integer(BigInt::from(v))))
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<ExtendedCost, E> {
                ExtendedCost::finite(BigRational::from_integer(BigInt::from(v))).map_err(E::custom)
            }
        }
        d.deserialize_any(CostVisitor)
    }
}

/// "p/q" in lowest terms, or "p" for integers.
pub fn format_rational(v: &BigRational) -> String {
    if v.denom().is_one() {
        v.numer().to_string()
    } else {
        format!("{}/{}", v.numer(), v.denom())
    }
}

pub fn parse_rational(s: &str) -> Result<BigRational> {
    let t = s.trim();
    let bad = || Error::Parse(format!("not a rational: {s:?}"));
    match t.split_once('/') {
        Some((p, q)) => {
            let p = BigInt::from_str(p.trim()).map_err(|_| bad())?;
            let q = BigInt::from_str(q.trim()).map_err(|_| bad())?;
            if q.is_zero() {
                return Err(bad());
            }
            Ok(BigRational::new(p, q))
        }
        None => Ok(BigRational::from_integer(BigInt::from_str(t).map_err(|_| bad())?)),
    }
}

pub fn rational_of(count: &Reps) -> BigRational {
    BigRational::from_integer(BigInt::from(count.clone()))
}

pub fn rat(num: i64, den: i64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

/// `base^exp` for an integer (possibly negative) exponent.
pub fn rational_pow(base: &BigRational, exp: i64) -> BigRational {
    let mut acc = BigRational::one();
    for _ in 0..exp.unsigned_abs() {
        acc *= base;
    }
    if exp < 0 {
        acc.recip()
    } else {
        acc
    }
}

/// Smallest integer `k ≥ 0` with `k ≥ v` for nonnegative `v`.
pub fn ceil_to_reps(v: &BigRational) -> Reps {
    if v.is_negative() || v.is_zero() {
        return Reps::zero();
    }
    let (q, r) = v.numer().div_rem(v.denom());
    let q = if r.is_zero() { q } else { q + 1 };
    q.to_biguint().expect("nonnegative")
}

pub fn ratio_to_f64(v: &BigRational) -> f64 {
    // Scale down huge numerators and denominators together before converting.
    let (n, d) = (v.numer(), v.denom());
    let shift = n.bits().max(d.bits()).saturating_sub(1000);
    let n = (n >> shift).to_f64().unwrap_or(f64::NAN);
    let d = (d >> shift).to_f64().unwrap_or(f64::NAN);
    n / d
}

/// A repeat count or step index that serializes like [`reps_serde`].
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Count(#[serde(with = "reps_serde")] pub Reps);

impl From<Reps> for Count {
    fn from(v: Reps) -> Self {
        Count(v)
    }
}

impl fmt::Display for Count {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Serde adapter for repeat counts: a JSON number when it fits in `u64`,
/// otherwise a decimal string.
pub mod reps_serde {
    use super::*;

    pub fn serialize<S: Serializer>(v: &Reps, s: S) -> std::result::Result<S::Ok, S::Error> {
        match v.to_u64() {
            Some(x) => s.serialize_u64(x),
            None => s.serialize_str(&v.to_string()),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Reps, D::Error> {
        struct RepsVisitor;
        impl<'de> Visitor<'de> for RepsVisitor {
            type Value = Reps;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a nonnegative integer or decimal string")
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<Reps, E> {
                Ok(Reps::from(v))
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<Reps, E> {
                u64::try_from(v).map(Reps::from).map_err(E::custom)
            }
            fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<Reps, E> {
                Reps::from_str(v.trim()).map_err(E::custom)
            }
        }
        d.deserialize_any(RepsVisitor)
    }
}

/// Serde adapter for a rational stored as "p/q".
pub mod rational_serde {
    use super::*;

    pub fn serialize<S: Serializer>(v: &BigRational, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&format_rational(v))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<BigRational, D::Error> {
        match ExtendedCost::deserialize(d)? {
            ExtendedCost::Finite(v) => Ok(v),
            ExtendedCost::Infinite => Err(de::Error::custom("expected a finite rational")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn infinity_absorbs_addition() {
        let inf = ExtendedCost::Infinite;
        assert_eq!(&inf + &ExtendedCost::from_int(3), ExtendedCost::Infinite);
        assert!(ExtendedCost::Infinite > ExtendedCost::from_int(1_000_000));
    }

    #[test]
    fn zero_repetitions_of_infinity_is_zero() {
        assert_eq!(ExtendedCost::Infinite.times(&Reps::zero()), ExtendedCost::zero());
        assert_eq!(ExtendedCost::Infinite.times(&Reps::from(2u8)), ExtendedCost::Infinite);
    }

    #[test]
    fn parse_and_format() {
        let c: ExtendedCost = "6/8".parse().unwrap();
        assert_eq!(c.to_string(), "3/4");
        assert_eq!("inf".parse::<ExtendedCost>().unwrap(), ExtendedCost::Infinite);
        assert!("-1/2".parse::<ExtendedCost>().is_err());
        assert!("1/0".parse::<ExtendedCost>().is_err());
    }

    #[test]
    fn json_accepts_numbers_and_strings() {
        let v: Vec<ExtendedCost> = serde_json::from_str(r#"["inf","1/4",0]"#).unwrap();
        assert_eq!(v[0], ExtendedCost::Infinite);
        assert_eq!(v[1], ExtendedCost::from_ratio(1, 4));
        assert_eq!(serde_json::to_string(&v).unwrap(), r#"["inf","1/4","0"]"#);
    }

    #[test]
    fn ceil_of_reciprocal() {
        assert_eq!(ceil_to_reps(&rat(16, 1)), Reps::from(16u8));
        assert_eq!(ceil_to_reps(&rat(7, 2)), Reps::from(4u8));
        assert_eq!(ceil_to_reps(&rat(0, 1)), Reps::zero());
    }

    #[test]
    fn big_repeat_counts_serialize_as_strings() {
        #[derive(Serialize, Deserialize)]
        struct W(#[serde(with = "reps_serde")] Reps);
        let big = Reps::from(1u8) << 90usize;
        let s = serde_json::to_string(&W(big.clone())).unwrap();
        assert!(s.starts_with('"'));
        let back: W = serde_json::from_str(&s).unwrap();
        assert_eq!(back.0, big);
        assert_eq!(serde_json::to_string(&W(Reps::from(3u8))).unwrap(), "3");
    }
}
