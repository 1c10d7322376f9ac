//! Weighted group norms on `Z[1/2]`.
//!
//! Given positive weights `(r_i)` with `r_{i+1} <= r_i <= 2 r_{i+1}` and
//! `r_i -> 0`, the norm of `x` is the cheapest signed-digit expansion of `x`,
//! where a nonzero digit at position `i` costs `r_i`. [`norm`] computes it by a
//! two-state carry recursion over the binary digits of `x`; [`norm_oracle`]
//! solves the unrestricted integer-coefficient problem by exhaustive search
//! and is kept as an independent check.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use thiserror::Error;

use crate::dyadic::{parse_rational, Dyadic, SignedDigitRepr};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WeightViolation {
    #[error("weight undefined at position {0}")]
    Undefined(i64),
    #[error("weight not positive at position {0}")]
    NonPositive(i64),
    #[error("r_(i+1) <= r_i <= 2 r_(i+1) fails at position {0}")]
    Constraint(i64),
    #[error("tail rule does not certify r_i -> 0")]
    NoDecay,
    #[error("geometric tail ratio {0} is outside [1/2, 1)")]
    TailRatio(BigRational),
}

impl WeightViolation {
    /// The offending index, for violations tied to one position.
    pub fn position(&self) -> Option<i64> {
        match self {
            WeightViolation::Undefined(i)
            | WeightViolation::NonPositive(i)
            | WeightViolation::Constraint(i) => Some(*i),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StevensError {
    #[error("invalid weights: {0}")]
    InvalidWeights(#[from] WeightViolation),
    #[error("search space too large: {positions} positions with coefficients up to {maxcoeff}")]
    SearchSpaceTooLarge { positions: i64, maxcoeff: u32 },
    #[error("no representation of the value exists inside the window")]
    NoRepresentation,
    #[error("divergence of the weight series cannot be decided without a tail rule")]
    Undecidable,
    #[error("circle norm needs r_i >= r_0 for i <= 0; fails at position {0}")]
    CircleWeights(i64),
    #[error("bad weight specification: {0}")]
    Parse(String),
}

/// How a [`WeightSequence::Table`] continues past its last entry.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TailRule {
    /// `r_i = 1/i`.
    Harmonic,
    /// `r_i = r_last * q^(i - last)`.
    Geometric(BigRational),
}

/// A biinfinite weight sequence `(r_i)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum WeightSequence {
    /// `r_i = 1` for `i <= 0`, `r_i = 1/i` for `i >= 1`.
    HarmonicTail,
    /// `r_i = 1` for `i <= 0`, `r_i = q^i` for `i >= 1`.
    GeometricTail(BigRational),
    /// Explicit entries. Positions before the first entry repeat it; positions
    /// after the last follow `tail`, or are undefined without one.
    Table {
        entries: BTreeMap<i64, BigRational>,
        tail: Option<TailRule>,
    },
}

impl WeightSequence {
    pub fn harmonic() -> Self {
        WeightSequence::HarmonicTail
    }

    pub fn geometric(q: BigRational) -> Self {
        WeightSequence::GeometricTail(q)
    }

    pub fn weight_at(&self, i: i64) -> Option<BigRational> {
        match self {
            WeightSequence::HarmonicTail => Some(if i <= 0 {
                BigRational::one()
            } else {
                BigRational::new(BigInt::one(), BigInt::from(i))
            }),
            WeightSequence::GeometricTail(q) => Some(if i <= 0 {
                BigRational::one()
            } else {
                pow(q, i as u64)
            }),
            WeightSequence::Table { entries, tail } => {
                let (&first, r_first) = entries.iter().next()?;
                let (&last, r_last) = entries.iter().next_back()?;
                if i < first {
                    return Some(r_first.clone());
                }
                if i <= last {
                    return entries.get(&i).cloned();
                }
                match tail.as_ref()? {
                    TailRule::Harmonic if i >= 1 => {
                        Some(BigRational::new(BigInt::one(), BigInt::from(i)))
                    }
                    TailRule::Harmonic => None,
                    TailRule::Geometric(q) => Some(r_last * pow(q, (i - last) as u64)),
                }
            }
        }
    }

    /// Parses a table file: `i,r_i` lines plus one `tail,<rule>` line where the
    /// rule is `harmonic`, `geometric:<q>` or `none`. `#` starts a comment.
    pub fn parse_table(text: &str) -> Result<Self, StevensError> {
        let mut entries = BTreeMap::new();
        let mut tail = None;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let bad = || StevensError::Parse(format!("line {}: {raw:?}", lineno + 1));
            let (key, value) = line.split_once(',').ok_or_else(bad)?;
            let (key, value) = (key.trim(), value.trim());
            if key == "tail" {
                tail = match value {
                    "none" => None,
                    "harmonic" => Some(TailRule::Harmonic),
                    v => {
                        let q = v.strip_prefix("geometric:").ok_or_else(bad)?;
                        Some(TailRule::Geometric(parse_rational(q).ok_or_else(bad)?))
                    }
                };
                continue;
            }
            let i: i64 = key.parse().map_err(|_| bad())?;
            let r = parse_rational(value).ok_or_else(bad)?;
            if entries.insert(i, r).is_some() {
                return Err(bad());
            }
        }
        if entries.is_empty() {
            return Err(StevensError::Parse("weight table has no entries".into()));
        }
        Ok(WeightSequence::Table { entries, tail })
    }
}

/// Accepts `harmonic` and `geometric:<q>`.
impl FromStr for WeightSequence {
    type Err = StevensError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s == "harmonic" {
            return Ok(WeightSequence::HarmonicTail);
        }
        if let Some(q) = s.strip_prefix("geometric:") {
            let q = parse_rational(q).ok_or_else(|| StevensError::Parse(s.to_string()))?;
            return Ok(WeightSequence::GeometricTail(q));
        }
        Err(StevensError::Parse(s.to_string()))
    }
}

impl fmt::Display for WeightSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WeightSequence::HarmonicTail => write!(f, "harmonic"),
            WeightSequence::GeometricTail(q) => write!(f, "geometric:{q}"),
            WeightSequence::Table { entries, .. } => write!(f, "table[{} entries]", entries.len()),
        }
    }
}

fn pow(q: &BigRational, e: u64) -> BigRational {
    num_traits::pow::pow(q.clone(), e as usize)
}

/// Checks positivity and `r_{i+1} <= r_i <= 2 r_{i+1}` on `[lo, hi]`, then the
/// symbolic tail condition. Reports the first offending index.
pub fn validate_weights(ws: &WeightSequence, lo: i64, hi: i64) -> Result<(), WeightViolation> {
    let mut prev: Option<BigRational> = None;
    for i in lo..=hi {
        let r = ws.weight_at(i).ok_or(WeightViolation::Undefined(i))?;
        if !r.is_positive() {
            return Err(WeightViolation::NonPositive(i));
        }
        if let Some(p) = prev {
            let two_r = &r * BigInt::from(2);
            if r > p || p > two_r {
                return Err(WeightViolation::Constraint(i - 1));
            }
        }
        prev = Some(r);
    }
    let ratio_ok = |q: &BigRational| {
        let half = BigRational::new(BigInt::one(), BigInt::from(2));
        if *q >= BigRational::one() {
            Err(WeightViolation::NoDecay)
        } else if *q < half {
            Err(WeightViolation::TailRatio(q.clone()))
        } else {
            Ok(())
        }
    };
    match ws {
        WeightSequence::HarmonicTail => Ok(()),
        WeightSequence::GeometricTail(q) => ratio_ok(q),
        WeightSequence::Table { tail: None, .. } => Err(WeightViolation::NoDecay),
        WeightSequence::Table {
            tail: Some(TailRule::Harmonic),
            ..
        } => Ok(()),
        WeightSequence::Table {
            tail: Some(TailRule::Geometric(q)),
            ..
        } => ratio_ok(q),
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NormResult {
    pub value: BigRational,
    pub witness: SignedDigitRepr,
}

/// Total weight of the nonzero digits of `repr`.
pub fn repr_cost(repr: &SignedDigitRepr, ws: &WeightSequence) -> Option<BigRational> {
    repr.iter().try_fold(BigRational::zero(), |acc, (p, _)| {
        Some(acc + ws.weight_at(p)?)
    })
}

/// Exact norm of `x` with a minimizing witness.
///
/// Digits are chosen from the finest binary position of `|x|` toward coarser
/// ones. With input bit `b`, incoming carry `c` and output digit `a`, the next
/// carry is `(b + c - a) / 2`; starting from zero it never leaves `{0, 1}`, so
/// two states suffice. A final carry is discharged by one digit just above the
/// top bit.
pub fn norm(x: &Dyadic, ws: &WeightSequence) -> Result<NormResult, StevensError> {
    if x.is_zero() {
        return Ok(NormResult {
            value: BigRational::zero(),
            witness: SignedDigitRepr::new(),
        });
    }
    let mag = x.num().abs();
    let bits = mag.bits() as i64;
    let top = i64::from(x.scale());
    validate_weights(ws, top - bits - 2, top)?;

    // costs[c]: best cost so far ending in carry c; trail[j][c] = (prev carry, digit)
    let mut costs: [Option<BigRational>; 2] = [Some(BigRational::zero()), None];
    let mut trail: Vec<[(usize, i8); 2]> = Vec::with_capacity(bits as usize + 1);
    for j in 0..=bits {
        let position = top - j;
        let r = ws
            .weight_at(position)
            .ok_or(WeightViolation::Undefined(position))?;
        let b = if j < bits {
            mag.bit(j as u64) as i64
        } else {
            0
        };
        let mut next: [Option<BigRational>; 2] = [None, None];
        let mut step = [(0usize, 0i8); 2];
        for (c, cost) in costs.iter().enumerate() {
            let Some(cost) = cost else { continue };
            for a in [0i64, 1, -1] {
                let s = b + c as i64 - a;
                if s < 0 || s % 2 != 0 {
                    continue;
                }
                let c_next = (s / 2) as usize;
                if c_next > 1 {
                    continue;
                }
                let total = if a == 0 { cost.clone() } else { cost + &r };
                if next[c_next].as_ref().map_or(true, |best| total < *best) {
                    next[c_next] = Some(total);
                    step[c_next] = (c, a as i8);
                }
            }
        }
        trail.push(step);
        costs = next;
    }
    let value = costs[0]
        .clone()
        .expect("carry-free completion always exists");

    let mut witness = SignedDigitRepr::new();
    let mut c = 0usize;
    for j in (0..=bits).rev() {
        let (prev, a) = trail[j as usize][c];
        if a != 0 {
            witness.set(top - j, i64::from(a)).expect("digit in {-1,1}");
        }
        c = prev;
    }
    debug_assert_eq!(c, 0);
    if x.num().is_negative() {
        witness = witness.negated();
    }
    Ok(NormResult { value, witness })
}

const ORACLE_MAX_POSITIONS: i64 = 40;
const ORACLE_MAX_COEFF: u32 = 8;

/// Minimum of `sum |a_i| r_i` over all integer expansions
/// `x = sum a_i 2^{-i}` with positions in `[lo, hi]` and `|a_i| <= maxcoeff`.
///
/// Exhaustive: the search runs over every coefficient vector, memoized on
/// the remaining integer target at each position.
pub fn norm_oracle(
    x: &Dyadic,
    ws: &WeightSequence,
    lo: i64,
    hi: i64,
    maxcoeff: u32,
) -> Result<BigRational, StevensError> {
    let positions = hi - lo + 1;
    if positions > ORACLE_MAX_POSITIONS || maxcoeff > ORACLE_MAX_COEFF {
        return Err(StevensError::SearchSpaceTooLarge {
            positions,
            maxcoeff,
        });
    }
    if x.is_zero() {
        return Ok(BigRational::zero());
    }
    if positions <= 0 || maxcoeff == 0 || hi < i64::from(x.scale()) {
        return Err(StevensError::NoRepresentation);
    }
    let mut weights = Vec::with_capacity(positions as usize);
    for p in (lo..=hi).rev() {
        let r = ws.weight_at(p).ok_or(WeightViolation::Undefined(p))?;
        if !r.is_positive() {
            return Err(WeightViolation::NonPositive(p).into());
        }
        weights.push(r);
    }
    let target = x.numerator_at(hi as u32).and_then(|t| t.to_i128()).ok_or(
        StevensError::SearchSpaceTooLarge {
            positions,
            maxcoeff,
        },
    )?;

    let mut search = OracleSearch {
        weights: &weights,
        maxcoeff: i128::from(maxcoeff),
        memo: HashMap::new(),
    };
    search.best(0, target).ok_or(StevensError::NoRepresentation)
}

struct OracleSearch<'a> {
    /// Weights from the finest window position to the coarsest.
    weights: &'a [BigRational],
    maxcoeff: i128,
    memo: HashMap<(usize, i128), Option<BigRational>>,
}

impl OracleSearch<'_> {
    /// Cheapest way to write `target` (in units of the weight at `idx`) using
    /// positions `idx..` of the window.
    fn best(&mut self, idx: usize, target: i128) -> Option<BigRational> {
        let last = self.weights.len() - 1;
        if idx == last {
            return (target.abs() <= self.maxcoeff)
                .then(|| &self.weights[idx] * BigInt::from(target.abs()));
        }
        // |sum a_k 2^k| over the remaining positions is at most maxcoeff*(2^len - 1)
        let remaining = (last - idx + 1) as u32;
        if remaining < 120 && target.abs() > self.maxcoeff * ((1i128 << remaining) - 1) {
            return None;
        }
        if let Some(hit) = self.memo.get(&(idx, target)) {
            return hit.clone();
        }
        let mut best: Option<BigRational> = None;
        for a in -self.maxcoeff..=self.maxcoeff {
            if (target - a) % 2 != 0 {
                continue;
            }
            if let Some(rest) = self.best(idx + 1, (target - a) / 2) {
                let total = rest + &self.weights[idx] * BigInt::from(a.abs());
                if best.as_ref().map_or(true, |b| total < *b) {
                    best = Some(total);
                }
            }
        }
        self.memo.insert((idx, target), best.clone());
        best
    }
}

/// Quotient norm on `Z[1/2] / Z`: the minimum of `norm(x + k)` over integers `k`.
///
/// Dropping every digit at a position `<= 0` from an expansion of `x + k` gives
/// an expansion of another translate with absolute value below 1 and no larger
/// cost, so translates with `|x + k| < 2` always contain a minimizer.
pub fn circle_norm(x: &Dyadic, ws: &WeightSequence) -> Result<BigRational, StevensError> {
    let r0 = ws.weight_at(0).ok_or(WeightViolation::Undefined(0))?;
    let frac = x - &Dyadic::from_integer(x.floor());
    let mut best: Option<BigRational> = None;
    for shift in -2i64..=1 {
        let y = &frac + &Dyadic::from(shift);
        if y.abs() >= Dyadic::from(2) {
            continue;
        }
        let result = norm(&y, ws)?;
        for (p, _) in result.witness.iter().filter(|&(p, _)| p <= 0) {
            let r = ws.weight_at(p).ok_or(WeightViolation::Undefined(p))?;
            if r < r0 {
                return Err(StevensError::CircleWeights(p));
            }
        }
        if best.as_ref().map_or(true, |b| result.value < *b) {
            best = Some(result.value);
        }
    }
    Ok(best.expect("the translate in [0, 1) is always a candidate"))
}

/// Whether `sum_{i >= 1} r_i` diverges, which is equivalent to the completion
/// of `Z[1/2]` under the norm being totally disconnected.
pub fn divergence_flag(ws: &WeightSequence) -> Result<bool, StevensError> {
    match ws {
        WeightSequence::HarmonicTail => Ok(true),
        WeightSequence::GeometricTail(q) => Ok(*q >= BigRational::one()),
        WeightSequence::Table { tail: None, .. } => Err(StevensError::Undecidable),
        WeightSequence::Table {
            tail: Some(TailRule::Harmonic),
            ..
        } => Ok(true),
        WeightSequence::Table {
            tail: Some(TailRule::Geometric(q)),
            ..
        } => Ok(*q >= BigRational::one()),
    }
}
