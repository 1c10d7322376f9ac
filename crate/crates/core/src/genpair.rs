//! Dense generator pairs in `Z[1/2]`.
//!
//! Write `g0 = k1 / 2^m` and `h0 = k2 / 2^m`. For an odd `beta` built from the
//! odd primes of `k1`, the numbers `2^N k1` and `2^N k2 + beta` are coprime
//! for every `N`, so `h = h0 + beta / 2^(m+N)` together with `g0` generates
//! `2^-(m+N)`. Letting `N` grow moves `h` arbitrarily close to `h0` while the
//! pair reaches ever finer dyadics.

use num_bigint::{BigInt, Sign};
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rayon::prelude::*;
use thiserror::Error;

use crate::dyadic::{combine, Dyadic};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GenPairError {
    #[error("k1 must be nonzero")]
    ZeroK1,
    #[error("g0 must be nonzero")]
    ZeroG0,
    #[error("|k1| = {0} is too large for trial division")]
    TooLarge(BigInt),
    #[error("inputs are not coprime: gcd = {0}")]
    NotCoprime(BigInt),
    #[error("certificate check failed: {0}")]
    Broken(&'static str),
}

/// Exact witness that `<g0, h>` contains `2^-(m+N)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairCertificate {
    pub g0: Dyadic,
    pub h0: Dyadic,
    /// Shared scale: `g0 = k1 / 2^m`, `h0 = k2 / 2^m`.
    pub m: u32,
    pub k1: BigInt,
    pub k2: BigInt,
    pub beta: BigInt,
    pub n: u32,
    pub h: Dyadic,
    pub u: BigInt,
    pub v: BigInt,
}

impl PairCertificate {
    /// `2^-(m+N)`, the finest dyadic the pair is certified to reach.
    pub fn step(&self) -> Dyadic {
        Dyadic::pow2_neg(self.m + self.n)
    }

    /// Re-checks every invariant from scratch.
    pub fn verify(&self) -> Result<(), GenPairError> {
        if self.beta.is_even() || !self.beta.is_positive() {
            return Err(GenPairError::Broken("beta must be odd and positive"));
        }
        if Dyadic::new(self.k1.clone(), self.m) != self.g0
            || Dyadic::new(self.k2.clone(), self.m) != self.h0
        {
            return Err(GenPairError::Broken("k1, k2, m do not reproduce g0, h0"));
        }
        if self.h != &self.h0 + &Dyadic::new(self.beta.clone(), self.m + self.n) {
            return Err(GenPairError::Broken("h != h0 + beta / 2^(m+N)"));
        }
        let p = BigInt::one() << self.n as usize;
        let a = &p * &self.k1;
        let b = &p * &self.k2 + &self.beta;
        if &self.u * a + &self.v * b != BigInt::one() {
            return Err(GenPairError::Broken("Bezout identity"));
        }
        if combine(&self.u, &self.g0, &self.v, &self.h) != self.step() {
            return Err(GenPairError::Broken("u*g0 + v*h != 2^-(m+N)"));
        }
        Ok(())
    }
}

/// Distinct prime factors of `n > 0`, ascending.
pub fn prime_factors(mut n: u64) -> Vec<u64> {
    let mut primes = Vec::new();
    let mut p = 2u64;
    while p.saturating_mul(p) <= n {
        if n % p == 0 {
            primes.push(p);
            while n % p == 0 {
                n /= p;
            }
        }
        p += if p == 2 { 1 } else { 2 };
    }
    if n > 1 {
        primes.push(n);
    }
    primes
}

/// `beta = (2 + p_1...p_k) * p_{k+1}...p_l`, where `p_1..p_k` are the odd
/// primes dividing both `k1` and `k2` and `p_{k+1}..p_l` those dividing `k1`
/// only. The result is odd and makes `2^N k1` coprime to `2^N k2 + beta` for
/// every `N >= 1`. At `N = 0` this fails exactly when `k1` is even and `k2` odd,
/// since then both sides are even.
pub fn compute_beta(k1: &BigInt, k2: &BigInt) -> Result<BigInt, GenPairError> {
    if k1.is_zero() {
        return Err(GenPairError::ZeroK1);
    }
    let magnitude = k1.abs();
    let small = magnitude
        .to_u64()
        .ok_or_else(|| GenPairError::TooLarge(magnitude.clone()))?;
    let mut shared = BigInt::one();
    let mut own = BigInt::one();
    for p in prime_factors(small).into_iter().filter(|&p| p != 2) {
        if (k2 % p).is_zero() {
            shared *= p;
        } else {
            own *= p;
        }
    }
    Ok((shared + 2u32) * own)
}

/// Extended Euclid: `(g, x, y)` with `a*x + b*y = g = gcd(a, b) >= 0`.
pub fn extended_gcd(a: &BigInt, b: &BigInt) -> (BigInt, BigInt, BigInt) {
    let (mut r0, mut r1) = (a.abs(), b.abs());
    let (mut x0, mut x1) = (BigInt::one(), BigInt::zero());
    let (mut y0, mut y1) = (BigInt::zero(), BigInt::one());
    while !r1.is_zero() {
        let (q, r) = r0.div_rem(&r1);
        r0 = std::mem::replace(&mut r1, r);
        let x = &x0 - &q * &x1;
        x0 = std::mem::replace(&mut x1, x);
        let y = &y0 - &q * &y1;
        y0 = std::mem::replace(&mut y1, y);
    }
    if a.sign() == Sign::Minus {
        x0 = -x0;
    }
    if b.sign() == Sign::Minus {
        y0 = -y0;
    }
    (r0, x0, y0)
}

/// Integers `(u, v)` with `2^N k1 u + (2^N k2 + beta) v = 1`.
pub fn certify(
    k1: &BigInt,
    k2: &BigInt,
    beta: &BigInt,
    n: u32,
) -> Result<(BigInt, BigInt), GenPairError> {
    let p = BigInt::one() << n as usize;
    let a = &p * k1;
    let b = &p * k2 + beta;
    let (g, u, v) = extended_gcd(&a, &b);
    if !g.is_one() {
        return Err(GenPairError::NotCoprime(g));
    }
    debug_assert_eq!(&u * &a + &v * &b, BigInt::one());
    Ok((u, v))
}

/// Builds and verifies the certificate for `(g0, h0)` at depth `n`.
pub fn construct_pair(g0: &Dyadic, h0: &Dyadic, n: u32) -> Result<PairCertificate, GenPairError> {
    if g0.is_zero() {
        return Err(GenPairError::ZeroG0);
    }
    let m = g0.scale().max(h0.scale());
    let k1 = g0.numerator_at(m).expect("m >= scale of g0");
    let k2 = h0.numerator_at(m).expect("m >= scale of h0");
    let beta = compute_beta(&k1, &k2)?;
    let (u, v) = certify(&k1, &k2, &beta, n)?;
    let h = h0 + &Dyadic::new(beta.clone(), m + n);
    let cert = PairCertificate {
        g0: g0.clone(),
        h0: h0.clone(),
        m,
        k1,
        k2,
        beta,
        n,
        h,
        u,
        v,
    };
    cert.verify()?;
    Ok(cert)
}

/// Certificates for every depth in `depths`, in the given order.
pub fn construct_batch(
    g0: &Dyadic,
    h0: &Dyadic,
    depths: &[u32],
) -> Result<Vec<PairCertificate>, GenPairError> {
    depths
        .par_iter()
        .map(|&n| construct_pair(g0, h0, n))
        .collect()
}

/// Integers `(u', v')` with `u' g0 + v' h = target`, or `None` when the target
/// is not a multiple of `2^-(m+N)`.
pub fn reach_target(cert: &PairCertificate, target: &Dyadic) -> Option<(BigInt, BigInt)> {
    let multiple = target.numerator_at(cert.m + cert.n)?;
    let coeffs = (&cert.u * &multiple, &cert.v * &multiple);
    debug_assert_eq!(&combine(&coeffs.0, &cert.g0, &coeffs.1, &cert.h), target);
    Some(coeffs)
}
