//! Finitely supported permutations of `N` under submeasure metrics.
//!
//! For a submeasure `lambda` on `N`, permutations are compared by
//! `d_lambda(s, t) = lambda({n : s(n) != t(n)})`. With the uniform measure on
//! `{1..n}` this is the uniform metric `d_u` of measure-preserving maps.
//!
//! Two experiments live here. [`escape_construction`] builds generators in
//! the `eps`-ball around the identity whose product is far away, which shows
//! that the harmonic group is not non-archimedean. [`qna_modulus_check`]
//! samples generators from the `eps/k`-ball and confirms every word stays
//! inside the union of their supports, hence within `eps`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::words::{word_ball, BallTooLarge, WordModel};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PermError {
    #[error("not a bijection on its domain")]
    NotBijective,
    #[error("point {0} appears twice in a cycle")]
    RepeatedPoint(u64),
    #[error("submeasure weight undefined at point {0}")]
    UndefinedWeight(u64),
    #[error("supports overlap at point {0}")]
    Overlap(u64),
    #[error("{0}")]
    Unsupported(&'static str),
    #[error("epsilon must be positive")]
    NonPositiveEpsilon,
    #[error("bad model specification {0:?}")]
    Parse(String),
    #[error("witness check failed: {0}")]
    Broken(&'static str),
    #[error(transparent)]
    Ball(#[from] BallTooLarge),
}

/// A permutation of `N` moving finitely many points. Only moved points are
/// stored, so the sorted map is also the canonical form.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FinPerm {
    moved: BTreeMap<u64, u64>,
}

impl FinPerm {
    pub fn identity() -> Self {
        Self::default()
    }

    /// From `(n, s(n))` pairs; fixed points may be listed and are dropped.
    pub fn from_pairs<I: IntoIterator<Item = (u64, u64)>>(pairs: I) -> Result<Self, PermError> {
        let mut moved = BTreeMap::new();
        for (from, to) in pairs {
            if moved.insert(from, to).is_some() {
                return Err(PermError::NotBijective);
            }
        }
        let images: BTreeSet<u64> = moved.values().copied().collect();
        if images.len() != moved.len() || !images.iter().all(|p| moved.contains_key(p)) {
            return Err(PermError::NotBijective);
        }
        moved.retain(|k, v| k != v);
        Ok(FinPerm { moved })
    }

    /// The cycle `points[0] -> points[1] -> ... -> points[0]`.
    pub fn cycle(points: &[u64]) -> Result<Self, PermError> {
        let mut seen = BTreeSet::new();
        for &p in points {
            if !seen.insert(p) {
                return Err(PermError::RepeatedPoint(p));
            }
        }
        if points.len() < 2 {
            return Ok(Self::identity());
        }
        let moved = points
            .iter()
            .zip(points.iter().cycle().skip(1))
            .map(|(&a, &b)| (a, b))
            .collect();
        Ok(FinPerm { moved })
    }

    /// Product of permutations with pairwise disjoint supports.
    pub fn disjoint_product<'a, I>(perms: I) -> Result<Self, PermError>
    where
        I: IntoIterator<Item = &'a FinPerm>,
    {
        let mut moved = BTreeMap::new();
        for p in perms {
            for (&k, &v) in &p.moved {
                if moved.insert(k, v).is_some() {
                    return Err(PermError::Overlap(k));
                }
            }
        }
        Ok(FinPerm { moved })
    }

    pub fn apply(&self, n: u64) -> u64 {
        self.moved.get(&n).copied().unwrap_or(n)
    }

    pub fn is_identity(&self) -> bool {
        self.moved.is_empty()
    }

    pub fn support(&self) -> BTreeSet<u64> {
        self.moved.keys().copied().collect()
    }

    pub fn support_len(&self) -> usize {
        self.moved.len()
    }

    pub fn moved(&self) -> impl Iterator<Item = (u64, u64)> + '_ {
        self.moved.iter().map(|(&k, &v)| (k, v))
    }

    pub fn inverse(&self) -> Self {
        FinPerm {
            moved: self.moved.iter().map(|(&k, &v)| (v, k)).collect(),
        }
    }

    /// Points where `self` and `other` disagree.
    pub fn difference_set(&self, other: &FinPerm) -> BTreeSet<u64> {
        self.moved
            .keys()
            .chain(other.moved.keys())
            .copied()
            .filter(|&n| self.apply(n) != other.apply(n))
            .collect()
    }

    /// Disjoint cycles, each starting at its smallest point.
    pub fn cycles(&self) -> Vec<Vec<u64>> {
        let mut done = BTreeSet::new();
        let mut out = Vec::new();
        for &start in self.moved.keys() {
            if done.contains(&start) {
                continue;
            }
            let mut cyc = vec![start];
            done.insert(start);
            let mut cur = self.apply(start);
            while cur != start {
                done.insert(cur);
                cyc.push(cur);
                cur = self.apply(cur);
            }
            out.push(cyc);
        }
        out
    }
}

/// `(s o t)(n) = s(t(n))`.
pub fn compose(s: &FinPerm, t: &FinPerm) -> FinPerm {
    let domain: BTreeSet<u64> = s.moved.keys().chain(t.moved.keys()).copied().collect();
    FinPerm {
        moved: domain
            .into_iter()
            .map(|n| (n, s.apply(t.apply(n))))
            .filter(|(n, m)| n != m)
            .collect(),
    }
}

impl fmt::Display for FinPerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_identity() {
            return write!(f, "id");
        }
        for c in self.cycles() {
            let parts: Vec<String> = c.iter().map(u64::to_string).collect();
            write!(f, "({})", parts.join(" "))?;
        }
        Ok(())
    }
}

/// Point masses of an additive measure on `N`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PointWeights {
    /// `w_n = 1/n` for `n >= 1`.
    Harmonic,
    /// `w_n = 1/points` on `{1..points}`.
    Uniform { points: u64 },
}

impl PointWeights {
    pub fn weight(&self, n: u64) -> Option<BigRational> {
        match *self {
            PointWeights::Harmonic if n >= 1 => {
                Some(BigRational::new(BigInt::one(), BigInt::from(n)))
            }
            PointWeights::Uniform { points } if (1..=points).contains(&n) => {
                Some(BigRational::new(BigInt::one(), BigInt::from(points)))
            }
            _ => None,
        }
    }

    fn sum<I: IntoIterator<Item = u64>>(&self, set: I) -> Result<BigRational, PermError> {
        match *self {
            PointWeights::Uniform { points } => {
                let mut count = 0u64;
                for n in set {
                    if !(1..=points).contains(&n) {
                        return Err(PermError::UndefinedWeight(n));
                    }
                    count += 1;
                }
                Ok(BigRational::new(BigInt::from(count), BigInt::from(points)))
            }
            PointWeights::Harmonic => set.into_iter().try_fold(BigRational::zero(), |acc, n| {
                Ok(acc + self.weight(n).ok_or(PermError::UndefinedWeight(n))?)
            }),
        }
    }
}

/// A lower semi-continuous submeasure on `N`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SubmeasureSpec {
    WeightedSum(PointWeights),
    /// `min(cap, sum of weights)`.
    Capped {
        inner: PointWeights,
        cap: BigRational,
    },
}

impl SubmeasureSpec {
    pub fn harmonic() -> Self {
        SubmeasureSpec::WeightedSum(PointWeights::Harmonic)
    }

    pub fn uniform(points: u64) -> Self {
        SubmeasureSpec::WeightedSum(PointWeights::Uniform { points })
    }

    pub fn weights(&self) -> &PointWeights {
        match self {
            SubmeasureSpec::WeightedSum(w) => w,
            SubmeasureSpec::Capped { inner, .. } => inner,
        }
    }
}

/// Exact `lambda(set)`.
pub fn submeasure_eval(
    lambda: &SubmeasureSpec,
    set: &BTreeSet<u64>,
) -> Result<BigRational, PermError> {
    match lambda {
        SubmeasureSpec::WeightedSum(w) => w.sum(set.iter().copied()),
        SubmeasureSpec::Capped { inner, cap } => {
            let total = inner.sum(set.iter().copied())?;
            Ok(if total > *cap { cap.clone() } else { total })
        }
    }
}

pub fn d_lambda(
    lambda: &SubmeasureSpec,
    s: &FinPerm,
    t: &FinPerm,
) -> Result<BigRational, PermError> {
    submeasure_eval(lambda, &s.difference_set(t))
}

/// Uniform metric on `{1..points}`.
pub fn d_u(points: u64, s: &FinPerm, t: &FinPerm) -> Result<BigRational, PermError> {
    d_lambda(&SubmeasureSpec::uniform(points), s, t)
}

/// Rigorous enclosure `lower <= value <= upper` of a submeasure value.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MassBounds {
    pub lower: BigRational,
    pub upper: BigRational,
}

impl MassBounds {
    pub fn exact(v: BigRational) -> Self {
        MassBounds {
            lower: v.clone(),
            upper: v,
        }
    }

    pub fn is_exact(&self) -> bool {
        self.lower == self.upper
    }

    pub fn value(&self) -> Option<&BigRational> {
        self.is_exact().then_some(&self.lower)
    }
}

const FRAC_BITS: u32 = 96;

/// Harmonic sums of sets larger than this are enclosed rather than computed.
pub const EXACT_POINT_LIMIT: usize = 256;

fn fixed_to_rational(v: u128) -> BigRational {
    BigRational::new(BigInt::from(v), BigInt::one() << FRAC_BITS as usize)
}

/// `floor(x * 2^FRAC_BITS)` for positive `x`.
fn fixed_floor(x: &BigRational) -> u128 {
    (x.numer() << FRAC_BITS as usize)
        .div_floor(x.denom())
        .to_u128()
        .unwrap_or(u128::MAX)
}

/// Fixed-point accumulator bracketing `sum 1/n`.
#[derive(Debug, Clone, Copy, Default)]
struct HarmonicAccumulator {
    lower: u128,
    upper: u128,
}

impl HarmonicAccumulator {
    fn add(&mut self, n: u64) {
        let (q, r) = (
            (1u128 << FRAC_BITS) / u128::from(n),
            (1u128 << FRAC_BITS) % u128::from(n),
        );
        self.lower += q;
        self.upper += q + u128::from(r != 0);
    }

    fn bounds(&self) -> MassBounds {
        MassBounds {
            lower: fixed_to_rational(self.lower),
            upper: fixed_to_rational(self.upper),
        }
    }
}

/// Enclosure of `lambda(set)`: exact for small sets and non-harmonic weights,
/// a fixed-point bracket otherwise.
pub fn submeasure_bounds(
    lambda: &SubmeasureSpec,
    set: &BTreeSet<u64>,
) -> Result<MassBounds, PermError> {
    if set.len() <= EXACT_POINT_LIMIT || *lambda.weights() != PointWeights::Harmonic {
        return submeasure_eval(lambda, set).map(MassBounds::exact);
    }
    if set.contains(&0) {
        return Err(PermError::UndefinedWeight(0));
    }
    let mut acc = HarmonicAccumulator::default();
    set.iter().for_each(|&n| acc.add(n));
    let b = acc.bounds();
    Ok(match lambda {
        SubmeasureSpec::WeightedSum(_) => b,
        SubmeasureSpec::Capped { cap, .. } => MassBounds {
            lower: b.lower.min(cap.clone()),
            upper: b.upper.min(cap.clone()),
        },
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EscapeBlock {
    pub first: u64,
    pub last: u64,
    pub mass: MassBounds,
}

impl EscapeBlock {
    pub fn points(&self) -> impl Iterator<Item = u64> {
        self.first..=self.last
    }

    pub fn len(&self) -> u64 {
        self.last - self.first + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// Generators inside the open `eps`-ball around the identity whose product is
/// at distance at least `N eps / 2`.
#[derive(Debug, Clone)]
pub struct EscapeWitness {
    pub epsilon: BigRational,
    pub blocks: Vec<EscapeBlock>,
    pub generators: Vec<FinPerm>,
    pub product: FinPerm,
    pub distance: MassBounds,
}

impl EscapeWitness {
    /// Recomputes every mass from the permutations and checks the invariants.
    pub fn verify(&self) -> Result<(), PermError> {
        let lambda = SubmeasureSpec::harmonic();
        let half = &self.epsilon / BigInt::from(2);
        if self.blocks.len() != self.generators.len() {
            return Err(PermError::Broken("one generator per block"));
        }
        let mut prev_last = 0u64;
        for (block, gen) in self.blocks.iter().zip(&self.generators) {
            if block.first <= prev_last && prev_last != 0 {
                return Err(PermError::Broken("blocks overlap"));
            }
            prev_last = block.last;
            if !gen.support().into_iter().eq(block.points()) {
                return Err(PermError::Broken(
                    "generator support differs from its block",
                ));
            }
            let support = gen.support();
            let mut to_id = submeasure_bounds(&lambda, &support)?;
            let undecided = (to_id.lower <= half && to_id.upper > half)
                || (to_id.lower < self.epsilon && to_id.upper >= self.epsilon);
            if undecided {
                to_id = MassBounds::exact(submeasure_eval(&lambda, &support)?);
            }
            if to_id.lower <= half || to_id.upper >= self.epsilon {
                return Err(PermError::Broken("block mass outside (eps/2, eps)"));
            }
        }
        if FinPerm::disjoint_product(&self.generators)? != self.product {
            return Err(PermError::Broken("product mismatch"));
        }
        let dist = submeasure_bounds(&lambda, &self.product.support())?;
        let floor = &half * BigInt::from(self.blocks.len());
        if dist.lower < floor {
            return Err(PermError::Broken("product closer than N eps / 2"));
        }
        Ok(())
    }
}

/// Greedy consecutive blocks for the harmonic submeasure: start at the first
/// `n` with `1/n < eps/2` and close each block once its mass passes `eps/2`.
/// The last point added weighs less than `eps/2`, so each block stays below
/// `eps`.
pub fn escape_construction(
    lambda: &SubmeasureSpec,
    epsilon: &BigRational,
    blocks: usize,
) -> Result<EscapeWitness, PermError> {
    if *lambda != SubmeasureSpec::harmonic() {
        return Err(PermError::Unsupported(
            "escape construction needs the harmonic submeasure",
        ));
    }
    if *epsilon <= BigRational::zero() {
        return Err(PermError::NonPositiveEpsilon);
    }
    let half = epsilon / BigInt::from(2);
    let half_fixed = fixed_floor(&half);
    // first n with 1/n < eps/2, i.e. n > 2/eps
    let mut next = (BigRational::from_integer(BigInt::from(2)) / epsilon)
        .floor()
        .to_integer()
        .to_u64()
        .ok_or(PermError::Unsupported("epsilon too small"))?
        + 1;

    let exact_sum = |first: u64, last: u64| -> BigRational {
        (first..=last).fold(BigRational::zero(), |acc, n| {
            acc + BigRational::new(BigInt::one(), BigInt::from(n))
        })
    };

    let mut out_blocks = Vec::with_capacity(blocks);
    let mut generators = Vec::with_capacity(blocks);
    let mut total = HarmonicAccumulator::default();
    for _ in 0..blocks {
        let first = next;
        let mut acc = HarmonicAccumulator::default();
        let last = loop {
            let n = next;
            next += 1;
            acc.add(n);
            total.add(n);
            let passed = if acc.lower > half_fixed {
                true
            } else if acc.upper <= half_fixed {
                false
            } else {
                exact_sum(first, n) > half
            };
            if passed {
                break n;
            }
        };
        let mass = if last - first + 1 <= EXACT_POINT_LIMIT as u64 {
            MassBounds::exact(exact_sum(first, last))
        } else {
            acc.bounds()
        };
        let points: Vec<u64> = (first..=last).collect();
        generators.push(FinPerm::cycle(&points)?);
        out_blocks.push(EscapeBlock { first, last, mass });
    }
    let product = FinPerm::disjoint_product(&generators)?;
    let points = product.support_len();
    let distance = if points == 0 {
        MassBounds::exact(BigRational::zero())
    } else if points <= EXACT_POINT_LIMIT {
        submeasure_eval(lambda, &product.support()).map(MassBounds::exact)?
    } else {
        total.bounds()
    };
    Ok(EscapeWitness {
        epsilon: epsilon.clone(),
        blocks: out_blocks,
        generators,
        product,
        distance,
    })
}

/// The group of finitely supported permutations, keyed by canonical form.
pub struct PermModel;

impl WordModel for PermModel {
    type Elem = FinPerm;
    type Key = FinPerm;

    fn identity(&self) -> FinPerm {
        FinPerm::identity()
    }

    fn multiply(&self, a: &FinPerm, b: &FinPerm) -> FinPerm {
        compose(a, b)
    }

    fn inverse(&self, a: &FinPerm) -> FinPerm {
        a.inverse()
    }

    fn key(&self, a: &FinPerm) -> FinPerm {
        a.clone()
    }
}

/// A weighted measure on the finite point set `{1..domain}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FiniteModel {
    pub weights: PointWeights,
    pub domain: u64,
}

impl FiniteModel {
    pub fn uniform(points: u64) -> Self {
        FiniteModel {
            weights: PointWeights::Uniform { points },
            domain: points,
        }
    }

    pub fn submeasure(&self) -> SubmeasureSpec {
        SubmeasureSpec::WeightedSum(self.weights.clone())
    }
}

/// `du:<n>` for the uniform measure on `n` points, `harmonic:<n>` for
/// harmonic weights on `{1..n}`.
impl FromStr for FiniteModel {
    type Err = PermError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || PermError::Parse(s.to_string());
        let (kind, n) = s.trim().split_once(':').ok_or_else(bad)?;
        let n: u64 = n.trim().parse().map_err(|_| bad())?;
        if n == 0 {
            return Err(bad());
        }
        match kind.trim() {
            "du" => Ok(FiniteModel::uniform(n)),
            "harmonic" => Ok(FiniteModel {
                weights: PointWeights::Harmonic,
                domain: n,
            }),
            _ => Err(bad()),
        }
    }
}

impl fmt::Display for FiniteModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.weights {
            PointWeights::Uniform { .. } => write!(f, "du:{}", self.domain),
            PointWeights::Harmonic => write!(f, "harmonic:{}", self.domain),
        }
    }
}

#[derive(Debug, Clone)]
pub struct QnaConfig {
    pub model: FiniteModel,
    pub epsilon: BigRational,
    pub generators: usize,
    pub max_len: usize,
    pub trials: usize,
    pub seed: u64,
    pub ball_cap: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QnaTrial {
    pub generators: Vec<FinPerm>,
    /// Mass of the union of the generator supports.
    pub union_mass: BigRational,
    pub words: usize,
    pub max_distance: BigRational,
    pub containment_failures: usize,
    pub bound_failures: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QnaReport {
    pub epsilon: BigRational,
    pub trials: Vec<QnaTrial>,
}

impl QnaReport {
    pub fn words_checked(&self) -> usize {
        self.trials.iter().map(|t| t.words).sum()
    }

    pub fn containment_failures(&self) -> usize {
        self.trials.iter().map(|t| t.containment_failures).sum()
    }

    pub fn bound_failures(&self) -> usize {
        self.trials.iter().map(|t| t.bound_failures).sum()
    }

    pub fn max_distance(&self) -> BigRational {
        self.trials
            .iter()
            .map(|t| t.max_distance.clone())
            .max()
            .unwrap_or_else(BigRational::zero)
    }

    /// Generators that moved at least one point, over all trials.
    pub fn nontrivial_generators(&self) -> usize {
        self.trials
            .iter()
            .flat_map(|t| &t.generators)
            .filter(|g| !g.is_identity())
            .count()
    }

    pub fn passed(&self) -> bool {
        self.containment_failures() == 0 && self.bound_failures() == 0
    }
}

/// A random permutation of `{1..domain}` whose support has mass below
/// `threshold`.
fn sample_small_perm(
    rng: &mut ChaCha8Rng,
    model: &FiniteModel,
    threshold: &BigRational,
) -> Result<FinPerm, PermError> {
    let mut points: Vec<u64> = (1..=model.domain).collect();
    points.shuffle(rng);
    let want = rng.gen_range(0..=points.len());
    let mut chosen = Vec::new();
    let mut mass = BigRational::zero();
    for p in points {
        if chosen.len() == want {
            break;
        }
        let w = model
            .weights
            .weight(p)
            .ok_or(PermError::UndefinedWeight(p))?;
        if &mass + &w < *threshold {
            mass += w;
            chosen.push(p);
        }
    }
    if chosen.len() < 2 {
        return Ok(FinPerm::identity());
    }
    let mut image = chosen.clone();
    for _ in 0..64 {
        image.shuffle(rng);
        if chosen.iter().zip(&image).all(|(a, b)| a != b) {
            return FinPerm::from_pairs(chosen.iter().copied().zip(image.iter().copied()));
        }
    }
    FinPerm::cycle(&chosen)
}

fn check_words(
    model: &FiniteModel,
    epsilon: &BigRational,
    generators: Vec<FinPerm>,
    max_len: usize,
    cap: usize,
) -> Result<QnaTrial, PermError> {
    let lambda = model.submeasure();
    let union: BTreeSet<u64> = generators.iter().flat_map(FinPerm::support).collect();
    let union_mass = submeasure_eval(&lambda, &union)?;
    let ball = word_ball(&PermModel, &generators, max_len, cap)?;
    let mut trial = QnaTrial {
        generators,
        union_mass,
        words: ball.elements.len(),
        max_distance: BigRational::zero(),
        containment_failures: 0,
        bound_failures: 0,
    };
    for w in &ball.elements {
        let support = w.support();
        if !support.is_subset(&union) {
            trial.containment_failures += 1;
        }
        let dist = submeasure_eval(&lambda, &support)?;
        if dist > *epsilon {
            trial.bound_failures += 1;
        }
        if dist > trial.max_distance {
            trial.max_distance = dist;
        }
    }
    Ok(trial)
}

/// Samples `k` generators from the open ball of radius `eps/k` and checks
/// every word of length at most `L`: its support must lie in the union of the
/// generator supports, and its distance to the identity must not exceed `eps`.
pub fn qna_modulus_check(cfg: &QnaConfig) -> Result<QnaReport, PermError> {
    if cfg.epsilon <= BigRational::zero() {
        return Err(PermError::NonPositiveEpsilon);
    }
    if cfg.generators == 0 {
        return Err(PermError::Unsupported("need at least one generator"));
    }
    let threshold = &cfg.epsilon / BigInt::from(cfg.generators);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut trials = Vec::with_capacity(cfg.trials);
    for _ in 0..cfg.trials {
        let gens = (0..cfg.generators)
            .map(|_| sample_small_perm(&mut rng, &cfg.model, &threshold))
            .collect::<Result<Vec<_>, _>>()?;
        trials.push(check_words(
            &cfg.model,
            &cfg.epsilon,
            gens,
            cfg.max_len,
            cfg.ball_cap,
        )?);
    }
    Ok(QnaReport {
        epsilon: cfg.epsilon.clone(),
        trials,
    })
}

/// Negative control: `k` cycles on disjoint consecutive blocks, each block of
/// mass at least `eps` rather than `eps/k`. Their words drift to distance
/// about `k eps`.
pub fn qna_negative_control(
    model: &FiniteModel,
    epsilon: &BigRational,
    k: usize,
    max_len: usize,
    cap: usize,
) -> Result<QnaTrial, PermError> {
    let mut next = 1u64;
    let mut gens = Vec::with_capacity(k);
    for _ in 0..k {
        let mut block = Vec::new();
        let mut mass = BigRational::zero();
        while mass < *epsilon {
            if next > model.domain {
                return Err(PermError::Unsupported(
                    "domain too small for the negative control",
                ));
            }
            mass += model
                .weights
                .weight(next)
                .ok_or(PermError::UndefinedWeight(next))?;
            block.push(next);
            next += 1;
        }
        if block.len() < 2 {
            return Err(PermError::Unsupported(
                "negative-control block needs two points",
            ));
        }
        gens.push(FinPerm::cycle(&block)?);
    }
    check_words(model, epsilon, gens, max_len, cap)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    fn set(points: &[u64]) -> BTreeSet<u64> {
        points.iter().copied().collect()
    }

    fn tr(a: u64, b: u64) -> FinPerm {
        FinPerm::cycle(&[a, b]).unwrap()
    }

    #[test]
    fn compose_examples() {
        assert!(compose(&tr(1, 2), &tr(1, 2)).is_identity());
        // table oracle on {1,2,3}: (s o t)[i] = s[t[i]]
        let s = [0u64, 2, 1, 3];
        let t = [0u64, 1, 3, 2];
        let table: Vec<(u64, u64)> = (1..=3).map(|i| (i, s[t[i as usize] as usize])).collect();
        assert_eq!(
            compose(&tr(1, 2), &tr(2, 3)),
            FinPerm::from_pairs(table).unwrap()
        );
        assert_eq!(
            compose(&tr(1, 2), &tr(2, 3)),
            FinPerm::cycle(&[1, 2, 3]).unwrap()
        );
        let sigma = FinPerm::cycle(&[4, 9, 7]).unwrap();
        assert_eq!(compose(&sigma, &FinPerm::identity()), sigma);
    }

    #[test]
    fn construction_errors() {
        assert_eq!(FinPerm::from_pairs([(1, 2)]), Err(PermError::NotBijective));
        assert_eq!(
            FinPerm::from_pairs([(1, 2), (1, 3)]),
            Err(PermError::NotBijective)
        );
        assert_eq!(FinPerm::cycle(&[1, 2, 1]), Err(PermError::RepeatedPoint(1)));
        assert!(FinPerm::from_pairs([(5, 5)]).unwrap().is_identity());
        assert_eq!(
            FinPerm::disjoint_product(&[tr(1, 2), tr(2, 3)]),
            Err(PermError::Overlap(2))
        );
    }

    #[test]
    fn display_and_cycles() {
        let p = compose(&FinPerm::cycle(&[3, 1, 2]).unwrap(), &tr(7, 5));
        assert_eq!(p.to_string(), "(1 2 3)(5 7)");
        assert_eq!(FinPerm::identity().to_string(), "id");
    }

    #[test]
    fn submeasure_examples() {
        let h = SubmeasureSpec::harmonic();
        assert_eq!(submeasure_eval(&h, &set(&[2, 4])).unwrap(), q(3, 4));
        assert_eq!(submeasure_eval(&h, &BTreeSet::new()).unwrap(), q(0, 1));
        let capped = SubmeasureSpec::Capped {
            inner: PointWeights::Harmonic,
            cap: q(1, 1),
        };
        assert_eq!(submeasure_eval(&capped, &set(&[1, 2])).unwrap(), q(1, 1));
        assert_eq!(
            submeasure_eval(&h, &set(&[0, 3])),
            Err(PermError::UndefinedWeight(0))
        );
        assert_eq!(
            submeasure_eval(&SubmeasureSpec::uniform(4), &set(&[5])),
            Err(PermError::UndefinedWeight(5))
        );
    }

    #[test]
    fn distance_examples() {
        let h = SubmeasureSpec::harmonic();
        let s = FinPerm::cycle(&[3, 8]).unwrap();
        assert_eq!(d_lambda(&h, &s, &s).unwrap(), q(0, 1));
        assert_eq!(
            d_lambda(&h, &tr(2, 3), &FinPerm::identity()).unwrap(),
            q(5, 6)
        );
        assert_eq!(d_u(10, &FinPerm::identity(), &tr(1, 2)).unwrap(), q(1, 5));
    }

    #[test]
    fn bounds_bracket_exact_values() {
        let h = SubmeasureSpec::harmonic();
        let big: BTreeSet<u64> = (1000..1600).collect();
        let b = submeasure_bounds(&h, &big).unwrap();
        let exact = submeasure_eval(&h, &big).unwrap();
        assert!(b.lower <= exact && exact <= b.upper);
        assert!(&b.upper - &b.lower < q(1, 1_000_000_000));
        assert!(!b.is_exact());
        let small = submeasure_bounds(&h, &set(&[2, 4])).unwrap();
        assert_eq!(small.value(), Some(&q(3, 4)));
    }

    #[test]
    fn escape_small_epsilon() {
        let w = escape_construction(&SubmeasureSpec::harmonic(), &q(1, 5), 3).unwrap();
        let spans: Vec<(u64, u64)> = w.blocks.iter().map(|b| (b.first, b.last)).collect();
        assert_eq!(spans, vec![(11, 12), (13, 14), (15, 16)]);
        let masses: Vec<BigRational> = w
            .blocks
            .iter()
            .map(|b| b.mass.value().unwrap().clone())
            .collect();
        assert_eq!(masses, vec![q(23, 132), q(27, 182), q(31, 240)]);
        let sum = q(23, 132) + q(27, 182) + q(31, 240);
        assert_eq!(w.distance.value(), Some(&sum));
        assert!(sum >= q(3, 10));
        w.verify().unwrap();
        // product of the cycles computed by plain composition
        let folded = w
            .generators
            .iter()
            .fold(FinPerm::identity(), |acc, g| compose(&acc, g));
        assert_eq!(folded, w.product);
    }

    #[test]
    fn escape_large_epsilon_starts_at_two() {
        let w = escape_construction(&SubmeasureSpec::harmonic(), &q(2, 1), 1).unwrap();
        assert_eq!((w.blocks[0].first, w.blocks[0].last), (2, 4));
        assert_eq!(w.blocks[0].mass.value(), Some(&q(13, 12)));
        w.verify().unwrap();
    }

    #[test]
    fn escape_zero_blocks() {
        let w = escape_construction(&SubmeasureSpec::harmonic(), &q(1, 10), 0).unwrap();
        assert!(w.blocks.is_empty() && w.product.is_identity());
        assert_eq!(w.distance.value(), Some(&q(0, 1)));
        assert!(escape_construction(&SubmeasureSpec::uniform(5), &q(1, 10), 1).is_err());
        assert_eq!(
            escape_construction(&SubmeasureSpec::harmonic(), &q(0, 1), 1).unwrap_err(),
            PermError::NonPositiveEpsilon
        );
    }

    #[test]
    fn tampered_witness_rejected() {
        let mut w = escape_construction(&SubmeasureSpec::harmonic(), &q(1, 5), 2).unwrap();
        w.product = w.generators[0].clone();
        assert!(w.verify().is_err());
    }

    #[test]
    fn word_ball_examples() {
        let ball = word_ball(&PermModel, &[tr(1, 2)], 2, 100).unwrap();
        assert_eq!(ball.elements, vec![FinPerm::identity(), tr(1, 2)]);
        let ball = word_ball(&PermModel, &[tr(1, 2), tr(2, 3)], 6, 100).unwrap();
        let got: BTreeSet<FinPerm> = ball.elements.into_iter().collect();
        // all six bijections of {1,2,3}
        let mut all = BTreeSet::new();
        for a in 1..=3u64 {
            for b in 1..=3u64 {
                for c in 1..=3u64 {
                    if a != b && b != c && a != c {
                        all.insert(FinPerm::from_pairs([(1, a), (2, b), (3, c)]).unwrap());
                    }
                }
            }
        }
        assert_eq!(got, all);
        let ball = word_ball(&PermModel, &[], 3, 10).unwrap();
        assert_eq!(ball.elements, vec![FinPerm::identity()]);
    }

    #[test]
    fn model_parsing() {
        assert_eq!(
            "du:12".parse::<FiniteModel>().unwrap(),
            FiniteModel::uniform(12)
        );
        assert_eq!(
            "harmonic:30".parse::<FiniteModel>().unwrap().to_string(),
            "harmonic:30"
        );
        assert!("du:0".parse::<FiniteModel>().is_err());
        assert!("lp:3".parse::<FiniteModel>().is_err());
    }

    #[test]
    fn qna_identity_generator() {
        let trial = check_words(
            &FiniteModel::uniform(5),
            &q(1, 100),
            vec![FinPerm::identity()],
            4,
            100,
        )
        .unwrap();
        assert_eq!(trial.words, 1);
        assert_eq!(trial.bound_failures, 0);
    }

    #[test]
    fn qna_nondegenerate_model_passes() {
        let cfg = QnaConfig {
            model: FiniteModel::uniform(40),
            epsilon: q(1, 4),
            generators: 3,
            max_len: 5,
            trials: 10,
            seed: 3,
            ball_cap: 1_000_000,
        };
        let report = qna_modulus_check(&cfg).unwrap();
        assert!(report.passed());
        assert!(report.nontrivial_generators() > 0);
        assert!(report.max_distance() < q(1, 4));
        for t in &report.trials {
            for g in &t.generators {
                assert!(d_u(40, &FinPerm::identity(), g).unwrap() < q(1, 12));
            }
        }
        assert_eq!(qna_modulus_check(&cfg).unwrap(), report);
    }

    #[test]
    fn qna_harmonic_model_passes() {
        let cfg = QnaConfig {
            model: "harmonic:60".parse().unwrap(),
            epsilon: q(1, 4),
            generators: 2,
            max_len: 4,
            trials: 5,
            seed: 11,
            ball_cap: 1_000_000,
        };
        let report = qna_modulus_check(&cfg).unwrap();
        assert!(report.passed());
        assert!(report.nontrivial_generators() > 0);
    }

    #[test]
    fn negative_control_escapes() {
        let eps = q(1, 4);
        let trial = qna_negative_control(&FiniteModel::uniform(12), &eps, 3, 3, 10_000).unwrap();
        assert_eq!(trial.max_distance, q(3, 4));
        assert!(trial.bound_failures > 0);
        assert_eq!(trial.containment_failures, 0);
    }
}
