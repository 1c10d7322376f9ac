//! Density experiments in SO(3).
//!
//! Rotations are unit quaternions with `q` and `-q` identified. Approximate
//! density of the subgroup generated by a few rotations is measured as a
//! covering radius: the largest distance from a point of a quasi-uniform net
//! to the nearest element of a word ball.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::words::{word_ball, BallTooLarge, WordModel};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LieError {
    #[error("bad rotation specification {0:?}")]
    Parse(String),
    #[error("{0} must be positive")]
    NonPositive(&'static str),
    #[error("empty element set or net")]
    Empty,
    #[error(transparent)]
    Ball(#[from] BallTooLarge),
}

/// A rotation stored as a unit quaternion `(w, x, y, z)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rotation {
    q: [f64; 4],
}

/// Axis-angle vector in the Lie algebra so(3).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct So3Vector(pub [f64; 3]);

impl Rotation {
    pub const IDENTITY: Rotation = Rotation {
        q: [1.0, 0.0, 0.0, 0.0],
    };

    pub fn from_quaternion(w: f64, x: f64, y: f64, z: f64) -> Self {
        Rotation { q: [w, x, y, z] }.renormalized()
    }

    pub fn quaternion(&self) -> [f64; 4] {
        self.q
    }

    pub fn about_axis(axis: [f64; 3], angle: f64) -> Self {
        let n = (axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]).sqrt();
        if n == 0.0 {
            return Self::IDENTITY;
        }
        exp_so3(So3Vector([
            axis[0] / n * angle,
            axis[1] / n * angle,
            axis[2] / n * angle,
        ]))
    }

    pub fn rot_x(angle: f64) -> Self {
        Self::about_axis([1.0, 0.0, 0.0], angle)
    }

    pub fn rot_y(angle: f64) -> Self {
        Self::about_axis([0.0, 1.0, 0.0], angle)
    }

    pub fn rot_z(angle: f64) -> Self {
        Self::about_axis([0.0, 0.0, 1.0], angle)
    }

    /// Hamilton product `self * other`, renormalized.
    pub fn compose(&self, other: &Rotation) -> Rotation {
        let [a1, b1, c1, d1] = self.q;
        let [a2, b2, c2, d2] = other.q;
        Rotation {
            q: [
                a1 * a2 - b1 * b2 - c1 * c2 - d1 * d2,
                a1 * b2 + b1 * a2 + c1 * d2 - d1 * c2,
                a1 * c2 - b1 * d2 + c1 * a2 + d1 * b2,
                a1 * d2 + b1 * c2 - c1 * b2 + d1 * a2,
            ],
        }
        .renormalized()
    }

    pub fn inverse(&self) -> Rotation {
        let [w, x, y, z] = self.q;
        Rotation { q: [w, -x, -y, -z] }
    }

    pub fn norm(&self) -> f64 {
        self.q.iter().map(|c| c * c).sum::<f64>().sqrt()
    }

    pub fn renormalized(&self) -> Rotation {
        let n = self.norm();
        Rotation {
            q: self.q.map(|c| c / n),
        }
    }

    /// Representative with `w >= 0` (first nonzero component positive on ties).
    pub fn canonical(&self) -> [f64; 4] {
        let sign = self
            .q
            .iter()
            .find(|c| **c != 0.0)
            .map_or(1.0, |c| c.signum());
        let flip = if self.q[0] != 0.0 {
            self.q[0].signum()
        } else {
            sign
        };
        self.q.map(|c| c * flip)
    }

    /// Rotation angle in `[0, pi]`.
    pub fn angle(&self) -> f64 {
        let [w, x, y, z] = self.q;
        2.0 * (x * x + y * y + z * z).sqrt().atan2(w.abs())
    }

    fn abs_dot(&self, other: &Rotation) -> f64 {
        self.q
            .iter()
            .zip(other.q.iter())
            .map(|(a, b)| a * b)
            .sum::<f64>()
            .abs()
    }
}

/// `x:0.3`, `y:-1`, `z:0.5`, or `a,b,c:theta` for an arbitrary axis.
impl FromStr for Rotation {
    type Err = LieError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || LieError::Parse(s.to_string());
        let (axis, angle) = s.trim().rsplit_once(':').ok_or_else(bad)?;
        let angle: f64 = angle.trim().parse().map_err(|_| bad())?;
        let axis = match axis.trim() {
            "x" => [1.0, 0.0, 0.0],
            "y" => [0.0, 1.0, 0.0],
            "z" => [0.0, 0.0, 1.0],
            other => {
                let parts: Vec<f64> = other
                    .split(',')
                    .map(|p| p.trim().parse::<f64>())
                    .collect::<Result<_, _>>()
                    .map_err(|_| bad())?;
                <[f64; 3]>::try_from(parts).map_err(|_| bad())?
            }
        };
        if !angle.is_finite() || axis.iter().all(|c| *c == 0.0) {
            return Err(bad());
        }
        Ok(Rotation::about_axis(axis, angle))
    }
}

impl fmt::Display for Rotation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let [w, x, y, z] = self.canonical();
        write!(f, "({w:.12}, {x:.12}, {y:.12}, {z:.12})")
    }
}

/// Rotation by `|X|` about `X / |X|`.
pub fn exp_so3(x: So3Vector) -> Rotation {
    let [a, b, c] = x.0;
    let theta = (a * a + b * b + c * c).sqrt();
    if theta == 0.0 {
        return Rotation::IDENTITY;
    }
    let s = (theta / 2.0).sin() / theta;
    Rotation {
        q: [(theta / 2.0).cos(), a * s, b * s, c * s],
    }
}

/// Angle of `R^-1 S`, in `[0, pi]`.
pub fn so3_distance(r: &Rotation, s: &Rotation) -> f64 {
    r.inverse().compose(s).angle()
}

fn angle_from_abs_dot(d: f64) -> f64 {
    2.0 * d.min(1.0).acos()
}

/// A quasi-uniform point set on SO(3) with its estimated mesh.
#[derive(Debug, Clone)]
pub struct So3Net {
    pub points: Vec<Rotation>,
    /// Largest distance from a probe rotation to the nearest net point.
    pub mesh: f64,
}

const PROBES: usize = 8192;

/// Uniform random rotation from three uniforms.
fn shoemake(u1: f64, u2: f64, u3: f64) -> Rotation {
    let (a, b) = ((1.0 - u1).sqrt(), u1.sqrt());
    let (t1, t2) = (2.0 * PI * u2, 2.0 * PI * u3);
    Rotation::from_quaternion(a * t1.sin(), a * t1.cos(), b * t2.sin(), b * t2.cos())
}

fn random_rotation(rng: &mut ChaCha8Rng) -> Rotation {
    shoemake(rng.gen(), rng.gen(), rng.gen())
}

/// `count` rotations from a three-dimensional Kronecker lattice pushed to
/// SO(3), then rotated as a whole by a seed-dependent rotation. The mesh is
/// estimated on an independent random probe sample.
pub fn so3_net(count: usize, seed: u64) -> Result<So3Net, LieError> {
    if count == 0 {
        return Err(LieError::NonPositive("net size"));
    }
    if count == 1 {
        return Ok(So3Net {
            points: vec![Rotation::IDENTITY],
            mesh: PI,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let frame = random_rotation(&mut rng);
    // sqrt(2) and the real root of x^4 = x + 4
    let (phi, psi) = (2f64.sqrt(), 1.533_751_168_755_204_3);
    let n = count as f64;
    let points: Vec<Rotation> = (0..count)
        .map(|i| {
            let s = i as f64 + 0.5;
            let base = shoemake(s / n, (s / phi).fract(), (s / psi).fract());
            frame.compose(&base)
        })
        .collect();
    let mut probe_rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let probes: Vec<Rotation> = (0..PROBES)
        .map(|_| random_rotation(&mut probe_rng))
        .collect();
    let mesh = covering_radius(&points, &probes)?;
    Ok(So3Net { points, mesh })
}

/// `max over net points of min distance to elements`.
pub fn covering_radius(elements: &[Rotation], net: &[Rotation]) -> Result<f64, LieError> {
    if elements.is_empty() || net.is_empty() {
        return Err(LieError::Empty);
    }
    let mut tracker = CoverTracker::new(net.to_vec());
    tracker.absorb(elements);
    Ok(tracker.radius())
}

/// Running covering radius as elements are added.
#[derive(Debug, Clone)]
pub struct CoverTracker {
    net: Vec<Rotation>,
    best: Vec<f64>,
}

impl CoverTracker {
    pub fn new(net: Vec<Rotation>) -> Self {
        let best = vec![0.0; net.len()];
        CoverTracker { net, best }
    }

    pub fn absorb(&mut self, elements: &[Rotation]) {
        if elements.is_empty() {
            return;
        }
        self.net
            .par_iter()
            .zip(self.best.par_iter_mut())
            .for_each(|(p, best)| {
                for e in elements {
                    let d = p.abs_dot(e);
                    if d > *best {
                        *best = d;
                    }
                }
            });
    }

    /// Covering radius of everything absorbed so far (`pi` before anything).
    pub fn radius(&self) -> f64 {
        let worst = self.best.iter().copied().fold(1.0, f64::min);
        angle_from_abs_dot(worst)
    }
}

/// SO(3) with grid deduplication: rotations whose canonical quaternions fall
/// in the same cube of side `diameter / 4` are merged. Two rotations in one
/// cube are at most about `diameter` apart.
#[derive(Debug, Clone, Copy)]
pub struct GridModel {
    pub diameter: f64,
}

impl WordModel for GridModel {
    type Elem = Rotation;
    type Key = [i64; 4];

    fn identity(&self) -> Rotation {
        Rotation::IDENTITY
    }

    fn multiply(&self, a: &Rotation, b: &Rotation) -> Rotation {
        a.compose(b)
    }

    fn inverse(&self, a: &Rotation) -> Rotation {
        a.inverse()
    }

    fn key(&self, a: &Rotation) -> [i64; 4] {
        let side = self.diameter / 4.0;
        a.canonical().map(|c| (c / side).floor() as i64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoverStep {
    pub length: usize,
    pub ball_size: usize,
    pub radius: f64,
}

/// Covering radius of the word ball of each length `0..=max_len`.
///
/// Every element kept by the grid is a genuine word, so each reported radius
/// is an upper bound for the radius of the full ball of that length.
pub fn cover_profile(
    generators: &[Rotation],
    max_len: usize,
    net: &[Rotation],
    grid: f64,
    cap: usize,
) -> Result<Vec<CoverStep>, LieError> {
    if net.is_empty() {
        return Err(LieError::Empty);
    }
    if !(grid > 0.0) {
        return Err(LieError::NonPositive("grid diameter"));
    }
    let ball = word_ball(&GridModel { diameter: grid }, generators, max_len, cap)?;
    let mut tracker = CoverTracker::new(net.to_vec());
    let mut steps = Vec::with_capacity(max_len + 1);
    for length in 0..=max_len {
        tracker.absorb(ball.layer(length));
        steps.push(CoverStep {
            length,
            ball_size: ball.layers[length + 1],
            radius: tracker.radius(),
        });
    }
    Ok(steps)
}

#[derive(Debug, Clone)]
pub struct SchreierUlamConfig {
    /// Generators are drawn within this distance of the identity.
    pub delta: f64,
    pub max_len: usize,
    pub trials: usize,
    pub net_size: usize,
    pub seed: u64,
    /// Radius a trial must reach at `max_len` to count as dense-looking.
    pub target: f64,
    pub ball_cap: usize,
}

#[derive(Debug, Clone)]
pub struct SchreierUlamTrial {
    pub pair: [Rotation; 2],
    pub steps: Vec<CoverStep>,
}

#[derive(Debug, Clone)]
pub struct SchreierUlamReport {
    pub net_mesh: f64,
    pub grid: f64,
    pub trials: Vec<SchreierUlamTrial>,
}

impl SchreierUlamReport {
    /// Fraction of trials whose final radius is below `target`.
    pub fn fraction_below(&self, target: f64) -> f64 {
        if self.trials.is_empty() {
            return 0.0;
        }
        let hits = self
            .trials
            .iter()
            .filter(|t| t.steps.last().is_some_and(|s| s.radius < target))
            .count();
        hits as f64 / self.trials.len() as f64
    }
}

fn random_near_identity(rng: &mut ChaCha8Rng, delta: f64) -> Rotation {
    let z: f64 = rng.gen_range(-1.0..=1.0);
    let phi: f64 = rng.gen_range(0.0..2.0 * PI);
    let rho = (1.0 - z * z).sqrt();
    let angle = delta * (1.0 - rng.gen::<f64>());
    Rotation::about_axis([rho * phi.cos(), rho * phi.sin(), z], angle)
}

/// Random pairs near the identity and the covering radius of their word balls.
pub fn schreier_ulam_experiment(cfg: &SchreierUlamConfig) -> Result<SchreierUlamReport, LieError> {
    if !(cfg.delta > 0.0) {
        return Err(LieError::NonPositive("delta"));
    }
    if !(cfg.target > 0.0) {
        return Err(LieError::NonPositive("target"));
    }
    let net = so3_net(cfg.net_size, cfg.seed)?;
    let grid = cfg.target / 4.0;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(1));
    let mut trials = Vec::with_capacity(cfg.trials);
    for _ in 0..cfg.trials {
        let pair = [
            random_near_identity(&mut rng, cfg.delta),
            random_near_identity(&mut rng, cfg.delta),
        ];
        let steps = cover_profile(&pair, cfg.max_len, &net.points, grid, cfg.ball_cap)?;
        trials.push(SchreierUlamTrial { pair, steps });
    }
    Ok(SchreierUlamReport {
        net_mesh: net.mesh,
        grid,
        trials,
    })
}
