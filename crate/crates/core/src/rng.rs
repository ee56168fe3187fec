//! Seeded random streams and subgradient tie-breaking.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::point::Point;

pub type Stream = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive a child seed from a parent seed and a path of indices.
///
/// The same `(seed, path)` always yields the same child, and distinct paths
/// give statistically independent streams.
pub fn derive_seed(seed: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(splitmix64(seed), |acc, &p| splitmix64(acc ^ splitmix64(p.wrapping_add(0xA5A5))))
}

pub fn stream(seed: u64, path: &[u64]) -> Stream {
    Stream::seed_from_u64(derive_seed(seed, path))
}

/// Uniform sample from the ball `{x : ‖x − center‖ ≤ radius}`: a uniform
/// direction scaled by `radius · u^{1/N}`.
pub fn sample_ball<R: Rng + ?Sized>(rng: &mut R, center: &Point, radius: f64) -> Point {
    let dim = center.dim();
    let dir = loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let p = Point::from_vec_unchecked(v);
        let norm = p.norm();
        if norm > 1e-300 {
            break p.scale(1.0 / norm);
        }
    };
    let u: f64 = rng.random();
    let r = radius * u.powf(1.0 / dim as f64);
    center.axpy(r, &dir)
}

/// Uniform direction on the unit sphere.
pub fn sample_sphere<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> Point {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let p = Point::from_vec_unchecked(v);
        let norm = p.norm();
        if norm > 1e-300 {
            return p.scale(1.0 / norm);
        }
    }
}

/// Which element of the subdifferential an oracle returns at a kink.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum TieRule {
    Zero,
    Positive,
    #[default]
    SeededUniform,
}

/// A tie rule bound to the random stream it draws from.
#[derive(Debug, Clone)]
pub enum TieBreaker {
    Zero,
    Positive,
    Seeded(Box<Stream>),
}

impl TieBreaker {
    pub fn new(rule: TieRule, seed: u64, path: &[u64]) -> Self {
        match rule {
            TieRule::Zero => TieBreaker::Zero,
            TieRule::Positive => TieBreaker::Positive,
            TieRule::SeededUniform => TieBreaker::Seeded(Box::new(stream(seed, path))),
        }
    }

    pub fn rule(&self) -> TieRule {
        match self {
            TieBreaker::Zero => TieRule::Zero,
            TieBreaker::Positive => TieRule::Positive,
            TieBreaker::Seeded(_) => TieRule::SeededUniform,
        }
    }

    /// Coefficient in `[-1, 1]` for a two-sided kink such as `|t|` at `t = 0`.
    pub fn symmetric(&mut self) -> f64 {
        match self {
            TieBreaker::Zero => 0.0,
            TieBreaker::Positive => 1.0,
            TieBreaker::Seeded(rng) => rng.random_range(-1.0..=1.0),
        }
    }

    /// Coefficient in `[0, 1]` for a one-sided kink such as `max(t, 0)` at `t = 0`.
    pub fn one_sided(&mut self) -> f64 {
        match self {
            TieBreaker::Zero => 0.0,
            TieBreaker::Positive => 1.0,
            TieBreaker::Seeded(rng) => rng.random_range(0.0..=1.0),
        }
    }

    /// Element of the closed unit ball (subdifferential of `‖·‖` at 0).
    pub fn unit_ball(&mut self, dim: usize) -> Point {
        match self {
            TieBreaker::Zero => Point::zeros(dim),
            TieBreaker::Positive => Point::basis(dim, 0, 1.0),
            TieBreaker::Seeded(rng) => sample_ball(rng.as_mut(), &Point::zeros(dim), 1.0),
        }
    }
}

/// One tie breaker per user, derived from a run seed by user index.
pub fn user_streams(rule: TieRule, seed: u64, users: usize) -> Vec<TieBreaker> {
    (0..users)
        .map(|i| TieBreaker::new(rule, seed, &[0x5553_4552, i as u64]))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derived_streams_are_reproducible_and_distinct() {
        let a: u64 = stream(7, &[1, 2]).random();
        let b: u64 = stream(7, &[1, 2]).random();
        let c: u64 = stream(7, &[2, 1]).random();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn ball_samples_stay_inside() {
        let mut rng = stream(1, &[]);
        let center = Point::new(vec![1.0, -2.0, 0.5]).unwrap();
        for _ in 0..1000 {
            let p = sample_ball(&mut rng, &center, 3.0);
            assert!(p.dist(&center) <= 3.0 + 1e-12);
        }
    }
}
