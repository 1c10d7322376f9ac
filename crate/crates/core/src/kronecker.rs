//! Kronecker's criterion on the torus `T^n`.
//!
//! A point `(a_1, ..., a_n)` generates a dense subgroup of `T^n` exactly when
//! `1, a_1, ..., a_n` are linearly independent over `Q`. Inputs are given as
//! rational coordinate rows over a basis `1, alpha_1, ..., alpha_d` whose
//! independence is declared by the caller; the criterion then reduces to an
//! exact rank computation.

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use rayon::prelude::*;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum KroneckerError {
    #[error("row {row} has {len} coordinates, expected {expected}")]
    RowLength {
        row: usize,
        len: usize,
        expected: usize,
    },
    #[error("orbit length must be at least 1")]
    EmptyOrbit,
    #[error("no torus coordinates given")]
    NoCoordinates,
    #[error("grid resolution must be at least 1")]
    ZeroResolution,
    #[error("unknown basis symbol {0:?}")]
    UnknownSymbol(String),
    #[error("basis has {got} values, expected {expected}")]
    BasisLength { got: usize, expected: usize },
}

/// Torus coordinates written over the basis `1, alpha_1, ..., alpha_d`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoordVector {
    basis_size: usize,
    rows: Vec<Vec<BigRational>>,
}

impl CoordVector {
    /// `rows[j]` holds the `d + 1` rational coefficients of `a_j`.
    pub fn new(basis_size: usize, rows: Vec<Vec<BigRational>>) -> Result<Self, KroneckerError> {
        for (row, r) in rows.iter().enumerate() {
            if r.len() != basis_size + 1 {
                return Err(KroneckerError::RowLength {
                    row,
                    len: r.len(),
                    expected: basis_size + 1,
                });
            }
        }
        Ok(CoordVector { basis_size, rows })
    }

    pub fn basis_size(&self) -> usize {
        self.basis_size
    }

    pub fn dimension(&self) -> usize {
        self.rows.len()
    }

    pub fn rows(&self) -> &[Vec<BigRational>] {
        &self.rows
    }

    /// The row of the constant `1`.
    pub fn constant_row(&self) -> Vec<BigRational> {
        let mut row = vec![BigRational::zero(); self.basis_size + 1];
        row[0] = BigRational::one();
        row
    }

    /// Numerical coordinates given values for `1, alpha_1, ..., alpha_d`.
    pub fn approximate(&self, basis: &[f64]) -> Result<Vec<f64>, KroneckerError> {
        if basis.len() != self.basis_size + 1 {
            return Err(KroneckerError::BasisLength {
                got: basis.len(),
                expected: self.basis_size + 1,
            });
        }
        Ok(self
            .rows
            .iter()
            .map(|row| {
                row.iter()
                    .zip(basis)
                    .map(|(c, b)| c.to_f64().unwrap_or(f64::NAN) * b)
                    .sum()
            })
            .collect())
    }
}

/// Numerical value of a basis symbol: `1`, `sqrt<n>`, `phi`, `pi`, `e`, or a
/// decimal literal.
pub fn basis_value(symbol: &str) -> Result<f64, KroneckerError> {
    let s = symbol.trim();
    let value = match s {
        "phi" => (1.0 + 5f64.sqrt()) / 2.0,
        "pi" => std::f64::consts::PI,
        "e" => std::f64::consts::E,
        _ => match s.strip_prefix("sqrt") {
            Some(n) => n.parse::<f64>().ok().filter(|v| *v >= 0.0).map(f64::sqrt),
            None => s.parse::<f64>().ok(),
        }
        .ok_or_else(|| KroneckerError::UnknownSymbol(s.to_string()))?,
    };
    Ok(value)
}

/// Rank over `Q`, by exact Gaussian elimination.
pub fn rational_rank(matrix: &[Vec<BigRational>]) -> usize {
    let mut rows: Vec<Vec<BigRational>> = matrix.to_vec();
    let cols = rows.iter().map(Vec::len).max().unwrap_or(0);
    let mut rank = 0;
    for col in 0..cols {
        let Some(pivot) =
            (rank..rows.len()).find(|&r| rows[r].get(col).is_some_and(|v| !v.is_zero()))
        else {
            continue;
        };
        rows.swap(rank, pivot);
        let pivot_row = rows[rank].clone();
        let lead = pivot_row[col].clone();
        for r in rank + 1..rows.len() {
            let Some(entry) = rows[r].get(col).filter(|v| !v.is_zero()).cloned() else {
                continue;
            };
            let factor = entry / &lead;
            for (c, p) in pivot_row.iter().enumerate().skip(col) {
                if let Some(slot) = rows[r].get_mut(c) {
                    *slot -= &factor * p;
                }
            }
        }
        rank += 1;
    }
    rank
}

/// Whether `(1, a_1, ..., a_n)` is `Q`-linearly independent.
pub fn is_topological_generator(cv: &CoordVector) -> bool {
    let mut matrix = Vec::with_capacity(cv.dimension() + 1);
    matrix.push(cv.constant_row());
    matrix.extend(cv.rows.iter().cloned());
    rational_rank(&matrix) == cv.dimension() + 1
}

/// Largest circular gap between the points `{k a mod 1 : 0 <= k < count}`,
/// computed exactly. A single distinct point leaves a gap of 1.
pub fn max_gap_exact(a: &BigRational, count: usize) -> Result<BigRational, KroneckerError> {
    if count == 0 {
        return Err(KroneckerError::EmptyOrbit);
    }
    let den = a.denom().clone();
    let step = a.numer().mod_floor(&den);
    let mut residues: Vec<BigInt> = Vec::with_capacity(count);
    let mut cur = BigInt::zero();
    for _ in 0..count {
        residues.push(cur.clone());
        cur = (cur + &step).mod_floor(&den);
    }
    residues.sort();
    residues.dedup();
    let wrap = &den - residues.last().expect("count >= 1") + &residues[0];
    let widest = residues
        .windows(2)
        .map(|w| &w[1] - &w[0])
        .fold(wrap, |acc, g| if g > acc { g } else { acc });
    Ok(BigRational::new(widest, den))
}

/// Floating-point version of [`max_gap_exact`].
pub fn max_gap(a: f64, count: usize) -> Result<f64, KroneckerError> {
    if count == 0 {
        return Err(KroneckerError::EmptyOrbit);
    }
    let mut points: Vec<f64> = (0..count).map(|k| (k as f64 * a).rem_euclid(1.0)).collect();
    points.sort_by(f64::total_cmp);
    points.dedup();
    let wrap = 1.0 - points[points.len() - 1] + points[0];
    Ok(points.windows(2).map(|w| w[1] - w[0]).fold(wrap, f64::max))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coverage {
    pub radius: f64,
    /// Diameter of one grid cell, for grid estimates.
    pub cell_diameter: Option<f64>,
    /// Set when a cell is wider than the reported radius, so the estimate is
    /// dominated by discretization.
    pub too_coarse: bool,
}

fn torus_distance(p: &[f64], q: &[f64]) -> f64 {
    p.iter()
        .zip(q)
        .map(|(x, y)| {
            let d = (x - y).rem_euclid(1.0);
            let d = d.min(1.0 - d);
            d * d
        })
        .sum::<f64>()
        .sqrt()
}

/// How well the orbit `{k a : 0 <= k < count}` covers `T^n`.
///
/// For `n = 1` this is the exact maximum circular gap; for `n >= 2` it is the
/// largest distance from a grid-cell center (`resolution` cells per axis) to
/// the nearest orbit point.
pub fn orbit_covering_radius(
    a: &[f64],
    count: usize,
    resolution: usize,
) -> Result<Coverage, KroneckerError> {
    if a.is_empty() {
        return Err(KroneckerError::NoCoordinates);
    }
    if count == 0 {
        return Err(KroneckerError::EmptyOrbit);
    }
    if a.len() == 1 {
        return Ok(Coverage {
            radius: max_gap(a[0], count)?,
            cell_diameter: None,
            too_coarse: false,
        });
    }
    if resolution == 0 {
        return Err(KroneckerError::ZeroResolution);
    }
    let n = a.len();
    let orbit: Vec<Vec<f64>> = (0..count)
        .map(|k| a.iter().map(|x| (k as f64 * x).rem_euclid(1.0)).collect())
        .collect();
    let cells = resolution.pow(n as u32);
    let radius = (0..cells)
        .into_par_iter()
        .map(|mut idx| {
            let center: Vec<f64> = (0..n)
                .map(|_| {
                    let i = idx % resolution;
                    idx /= resolution;
                    (i as f64 + 0.5) / resolution as f64
                })
                .collect();
            orbit
                .iter()
                .map(|p| torus_distance(&center, p))
                .fold(f64::INFINITY, f64::min)
        })
        .reduce(|| 0.0, f64::max);
    let cell_diameter = (n as f64).sqrt() / resolution as f64;
    Ok(Coverage {
        radius,
        cell_diameter: Some(cell_diameter),
        too_coarse: cell_diameter > radius,
    })
}
