//! Dense points of `R^N`.

use serde::{Deserialize, Serialize};
use std::ops::Index;

use crate::error::{check_dim, Error, Result};

/// A finite vector of `R^N`.
///
/// [`Point::new`] rejects NaN and infinite coordinates. Arithmetic helpers
/// assume equal lengths; the public operations in the geometry and function
/// modules check dimensions before calling them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Point(Vec<f64>);

impl Point {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if let Some(i) = coords.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "coordinate {i} is not finite ({})",
                coords[i]
            )));
        }
        Ok(Point(coords))
    }

    pub fn zeros(dim: usize) -> Self {
        Point(vec![0.0; dim])
    }

    /// Unit vector `e_index` scaled by `scale`.
    pub fn basis(dim: usize, index: usize, scale: f64) -> Self {
        let mut v = vec![0.0; dim];
        v[index] = scale;
        Point(v)
    }

    pub(crate) fn from_vec_unchecked(coords: Vec<f64>) -> Self {
        Point(coords)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    pub fn check_dim(&self, dim: usize) -> Result<()> {
        check_dim(dim, self.dim())
    }

    pub fn dot(&self, other: &Point) -> f64 {
        self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum()
    }

    pub fn norm_sq(&self) -> f64 {
        self.dot(self)
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn dist_sq(&self, other: &Point) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b) * (a - b))
            .sum()
    }

    pub fn dist(&self, other: &Point) -> f64 {
        self.dist_sq(other).sqrt()
    }

    pub fn sub(&self, other: &Point) -> Point {
        Point(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect())
    }

    pub fn add(&self, other: &Point) -> Point {
        Point(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    pub fn scale(&self, s: f64) -> Point {
        Point(self.0.iter().map(|a| s * a).collect())
    }

    /// `self + s * dir`
    pub fn axpy(&self, s: f64, dir: &Point) -> Point {
        Point(self.0.iter().zip(&dir.0).map(|(a, d)| a + s * d).collect())
    }

    /// `a * self + b * other`
    pub fn lincomb(&self, a: f64, other: &Point, b: f64) -> Point {
        Point(
            self.0
                .iter()
                .zip(&other.0)
                .map(|(x, y)| a * x + b * y)
                .collect(),
        )
    }

    pub fn add_assign(&mut self, other: &Point) {
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            *a += b;
        }
    }

    pub fn coords_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }

    /// Mean of `points` accumulated in slice order.
    pub fn mean(points: &[Point]) -> Result<Point> {
        let first = points
            .first()
            .ok_or_else(|| Error::InvalidInput("mean of zero points".into()))?;
        let mut acc = Point::zeros(first.dim());
        for p in points {
            p.check_dim(first.dim())?;
            acc.add_assign(p);
        }
        let inv = 1.0 / points.len() as f64;
        Ok(acc.scale(inv))
    }
}

impl Index<usize> for Point {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl TryFrom<Vec<f64>> for Point {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Point::new(v)
    }
}

/// Shorthand for tests and examples; panics on nonfinite input.
#[macro_export]
macro_rules! pt {
    ($($x:expr),* $(,)?) => {
        $crate::Point::new(vec![$($x as f64),*]).expect("finite coordinates")
    };
}
