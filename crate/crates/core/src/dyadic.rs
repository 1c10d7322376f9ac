//! Exact arithmetic in the ring of dyadic rationals `Z[1/2]`.
//!
//! A [`Dyadic`] is stored as `num / 2^scale` in canonical form: either
//! `scale == 0` or `num` is odd. Zero is always `0 / 2^0`. Because the form is
//! unique, structural equality is value equality.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Neg, Sub};
use std::str::FromStr;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DyadicError {
    #[error("zero has no least significant digit")]
    Zero,
    #[error("cannot parse {0:?} as a dyadic rational")]
    Parse(String),
    #[error("{0} is not a dyadic rational (denominator is not a power of two)")]
    NotDyadic(String),
    #[error("signed digit {digit} at position {position} is outside {{-1, 0, 1}}")]
    BadDigit { position: i64, digit: i64 },
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Dyadic {
    num: BigInt,
    scale: u32,
}

/// Canonicalizes `num / 2^scale`.
pub fn normalize(num: impl Into<BigInt>, scale: u32) -> Dyadic {
    let mut num = num.into();
    if num.is_zero() {
        return Dyadic { num, scale: 0 };
    }
    let twos = num.trailing_zeros().unwrap_or(0);
    let shift = twos.min(u64::from(scale)) as u32;
    num >>= shift as usize;
    Dyadic {
        num,
        scale: scale - shift,
    }
}

/// Exact `u*x + v*y`.
pub fn combine(u: &BigInt, x: &Dyadic, v: &BigInt, y: &Dyadic) -> Dyadic {
    let scale = x.scale.max(y.scale);
    let a = u * x.numerator_at(scale).expect("scale is at least x.scale");
    let b = v * y.numerator_at(scale).expect("scale is at least y.scale");
    normalize(a + b, scale)
}

/// Parses an exact rational written as `p`, `p/q` or `p/2^m`.
pub fn parse_rational(s: &str) -> Option<BigRational> {
    let s = s.trim();
    match s.split_once('/') {
        None => s.parse::<BigInt>().ok().map(BigRational::from_integer),
        Some((n, d)) => {
            let n: BigInt = n.trim().parse().ok()?;
            let d: BigInt = match d.trim().split_once('^') {
                Some((b, e)) => {
                    let b: BigInt = b.trim().parse().ok()?;
                    let e: u32 = e.trim().parse().ok()?;
                    num_traits::pow(b, e as usize)
                }
                None => d.trim().parse().ok()?,
            };
            (!d.is_zero()).then(|| BigRational::new(n, d))
        }
    }
}

/// Exact value of a signed-digit representation.
pub fn eval_repr(repr: &SignedDigitRepr) -> Dyadic {
    repr.value()
}

impl Dyadic {
    pub fn new(num: impl Into<BigInt>, scale: u32) -> Self {
        normalize(num, scale)
    }

    pub fn zero() -> Self {
        Dyadic {
            num: BigInt::zero(),
            scale: 0,
        }
    }

    pub fn one() -> Self {
        Dyadic {
            num: BigInt::one(),
            scale: 0,
        }
    }

    pub fn from_integer(n: impl Into<BigInt>) -> Self {
        normalize(n, 0)
    }

    /// `2^{-n}`.
    pub fn pow2_neg(n: u32) -> Self {
        Dyadic {
            num: BigInt::one(),
            scale: n,
        }
    }

    pub fn num(&self) -> &BigInt {
        &self.num
    }

    pub fn scale(&self) -> u32 {
        self.scale
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    pub fn is_integer(&self) -> bool {
        self.scale == 0
    }

    pub fn abs(&self) -> Dyadic {
        Dyadic {
            num: self.num.abs(),
            scale: self.scale,
        }
    }

    /// The canonical scale. When it is positive, or `self` is an odd integer,
    /// every signed-digit representation has a nonzero digit exactly here and
    /// none finer. Representations of other nonzero integers have their finest
    /// digit at some position `<= 0`.
    pub fn lsb_position(&self) -> Result<u32, DyadicError> {
        if self.is_zero() {
            Err(DyadicError::Zero)
        } else {
            Ok(self.scale)
        }
    }

    /// `self * 2^scale` when that is an integer.
    pub fn numerator_at(&self, scale: u32) -> Option<BigInt> {
        if scale < self.scale {
            None
        } else {
            Some(&self.num << (scale - self.scale) as usize)
        }
    }

    pub fn mul_int(&self, k: &BigInt) -> Dyadic {
        normalize(&self.num * k, self.scale)
    }

    /// `self * 2^{-shift}`.
    pub fn shr(&self, shift: u32) -> Dyadic {
        normalize(self.num.clone(), self.scale + shift)
    }

    pub fn to_rational(&self) -> BigRational {
        BigRational::new(self.num.clone(), BigInt::one() << self.scale as usize)
    }

    /// Lossy, for diagnostics only.
    pub fn to_f64(&self) -> f64 {
        let n = self.num.to_f64().unwrap_or(f64::NAN);
        n * (-(self.scale as f64)).exp2()
    }

    /// Largest integer not exceeding `self`.
    pub fn floor(&self) -> BigInt {
        &self.num >> self.scale as usize
    }
}

impl Default for Dyadic {
    fn default() -> Self {
        Dyadic::zero()
    }
}

impl Ord for Dyadic {
    fn cmp(&self, other: &Self) -> Ordering {
        let s = self.scale.max(other.scale);
        let a = self.numerator_at(s).expect("common scale");
        let b = other.numerator_at(s).expect("common scale");
        a.cmp(&b)
    }
}

impl PartialOrd for Dyadic {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Add for &Dyadic {
    type Output = Dyadic;
    fn add(self, rhs: &Dyadic) -> Dyadic {
        combine(&BigInt::one(), self, &BigInt::one(), rhs)
    }
}

impl Add for Dyadic {
    type Output = Dyadic;
    fn add(self, rhs: Dyadic) -> Dyadic {
        &self + &rhs
    }
}

impl Sub for &Dyadic {
    type Output = Dyadic;
    fn sub(self, rhs: &Dyadic) -> Dyadic {
        combine(&BigInt::one(), self, &-BigInt::one(), rhs)
    }
}

impl Sub for Dyadic {
    type Output = Dyadic;
    fn sub(self, rhs: Dyadic) -> Dyadic {
        &self - &rhs
    }
}

impl Neg for &Dyadic {
    type Output = Dyadic;
    fn neg(self) -> Dyadic {
        Dyadic {
            num: -&self.num,
            scale: self.scale,
        }
    }
}

impl Neg for Dyadic {
    type Output = Dyadic;
    fn neg(self) -> Dyadic {
        -&self
    }
}

impl From<i64> for Dyadic {
    fn from(n: i64) -> Self {
        Dyadic::from_integer(n)
    }
}

/// Emits `k`, `k/2` or `k/2^m`.
impl fmt::Display for Dyadic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.scale {
            0 => write!(f, "{}", self.num),
            1 => write!(f, "{}/2", self.num),
            m => write!(f, "{}/2^{}", self.num, m),
        }
    }
}

/// Accepts `k`, `k/2^m`, and `p/q` where `q` is a power of two.
impl FromStr for Dyadic {
    type Err = DyadicError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim();
        let bad = || DyadicError::Parse(s.to_string());
        let Some((n, d)) = t.split_once('/') else {
            let num: BigInt = t.parse().map_err(|_| bad())?;
            return Ok(Dyadic::from_integer(num));
        };
        let num: BigInt = n.trim().parse().map_err(|_| bad())?;
        let d = d.trim();
        if let Some(exp) = d.strip_prefix("2^") {
            let m: u32 = exp.trim().parse().map_err(|_| bad())?;
            return Ok(normalize(num, m));
        }
        let den: BigInt = d.parse().map_err(|_| bad())?;
        if !den.is_positive() {
            return Err(bad());
        }
        let twos = den.trailing_zeros().unwrap_or(0);
        if den != BigInt::one() << twos as usize {
            return Err(DyadicError::NotDyadic(s.to_string()));
        }
        Ok(normalize(num, twos as u32))
    }
}

/// A finite signed-digit expansion `sum a_i * 2^{-i}` with `a_i` in `{-1, 0, 1}`.
///
/// Position `i` carries weight `2^{-i}`, so positive positions are fractional
/// and non-positive positions are integral. Zero digits are never stored.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct SignedDigitRepr {
    digits: BTreeMap<i64, i8>,
}

impl SignedDigitRepr {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_digits<I>(digits: I) -> Result<Self, DyadicError>
    where
        I: IntoIterator<Item = (i64, i64)>,
    {
        let mut repr = Self::new();
        for (position, digit) in digits {
            repr.set(position, digit)?;
        }
        Ok(repr)
    }

    /// Sets the digit at `position`; a zero digit clears it.
    pub fn set(&mut self, position: i64, digit: i64) -> Result<(), DyadicError> {
        match digit {
            0 => {
                self.digits.remove(&position);
            }
            1 | -1 => {
                self.digits.insert(position, digit as i8);
            }
            _ => return Err(DyadicError::BadDigit { position, digit }),
        }
        Ok(())
    }

    pub fn get(&self, position: i64) -> i8 {
        self.digits.get(&position).copied().unwrap_or(0)
    }

    /// Nonzero digits, coarsest position first.
    pub fn iter(&self) -> impl Iterator<Item = (i64, i8)> + '_ {
        self.digits.iter().map(|(&p, &d)| (p, d))
    }

    /// Number of nonzero digits.
    pub fn weight(&self) -> usize {
        self.digits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.digits.is_empty()
    }

    pub fn finest_position(&self) -> Option<i64> {
        self.digits.keys().next_back().copied()
    }

    pub fn coarsest_position(&self) -> Option<i64> {
        self.digits.keys().next().copied()
    }

    pub fn negated(&self) -> Self {
        SignedDigitRepr {
            digits: self.digits.iter().map(|(&p, &d)| (p, -d)).collect(),
        }
    }

    pub fn value(&self) -> Dyadic {
        let Some(finest) = self.finest_position() else {
            return Dyadic::zero();
        };
        let scale = finest.max(0);
        let mut num = BigInt::zero();
        for (&p, &d) in &self.digits {
            let term = BigInt::one() << (scale - p) as usize;
            if d > 0 {
                num += term;
            } else {
                num -= term;
            }
        }
        normalize(num, scale as u32)
    }
}

/// Non-adjacent form of `x`: the signed-digit expansion with no two adjacent
/// nonzero digits. It has minimal digit count among all `{-1, 0, 1}` expansions.
pub fn non_adjacent_form(x: &Dyadic) -> SignedDigitRepr {
    let mut repr = SignedDigitRepr::new();
    let mut n = x.num().clone();
    let mut position = i64::from(x.scale());
    let four = BigInt::from(4);
    while !n.is_zero() {
        if n.is_odd() {
            let digit = if n.mod_floor(&four) == BigInt::one() {
                1
            } else {
                -1
            };
            n -= digit;
            repr.digits.insert(position, digit as i8);
        }
        n >>= 1;
        position -= 1;
    }
    repr
}

impl fmt::Display for SignedDigitRepr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (k, (p, d)) in self.iter().enumerate() {
            if k > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{}:{}", p, if d > 0 { "+1" } else { "-1" })?;
        }
        write!(f, "}}")
    }
}
