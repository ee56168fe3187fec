//! Convex function oracles returning a value and one subgradient.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::point::Point;
use crate::rng::TieBreaker;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "class", rename_all = "snake_case")]
pub enum ConvexityClass {
    Convex,
    StrictlyConvex,
    StronglyConvex { modulus: f64 },
}

/// Convex functions on `R^N` used as objectives and constraint functions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ConvexFn {
    /// `x ↦ |a·x_j + b|` with `j = index`.
    AbsAffine { a: f64, b: f64, index: usize },
    /// `x ↦ |⟨w, x⟩ + b|`.
    AbsInner { w: Point, b: f64 },
    /// `x ↦ max(⟨c, x⟩ + d, 0)`.
    AffineHinge { c: Point, d: f64 },
    /// `x ↦ scale·‖x‖ + offset`.
    NormShift { scale: f64, offset: f64 },
    /// `x ↦ a·‖x + b‖²`.
    #[serde(rename = "strongly_convex_quadratic")]
    Quadratic { a: f64, b: Point },
    /// Pointwise sum; the empty sum is the zero function.
    Sum { terms: Vec<ConvexFn> },
}

/// One oracle answer: `f(at)` and an element of `∂f(at)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubgradientSample {
    pub at: Point,
    pub value: f64,
    pub subgradient: Point,
    /// True when the oracle had to choose among several subgradients.
    pub tie_broken: bool,
}

impl ConvexFn {
    pub fn abs_affine(a: f64, b: f64, index: usize) -> Result<Self> {
        let f = ConvexFn::AbsAffine { a, b, index };
        f.validate()?;
        Ok(f)
    }

    pub fn abs_inner(w: Point, b: f64) -> Result<Self> {
        let f = ConvexFn::AbsInner { w, b };
        f.validate()?;
        Ok(f)
    }

    pub fn affine_hinge(c: Point, d: f64) -> Result<Self> {
        let f = ConvexFn::AffineHinge { c, d };
        f.validate()?;
        Ok(f)
    }

    pub fn norm_shift(scale: f64, offset: f64) -> Result<Self> {
        let f = ConvexFn::NormShift { scale, offset };
        f.validate()?;
        Ok(f)
    }

    pub fn quadratic(a: f64, b: Point) -> Result<Self> {
        let f = ConvexFn::Quadratic { a, b };
        f.validate()?;
        Ok(f)
    }

    pub fn zero() -> Self {
        ConvexFn::Sum { terms: Vec::new() }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, ConvexFn::Sum { terms } if terms.iter().all(ConvexFn::is_zero))
    }

    /// Checks parameter ranges; deserialized functions must pass this before use.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidInput(msg));
        match self {
            ConvexFn::AbsAffine { a, b, .. } => {
                if !(a.is_finite() && *a > 0.0 && b.is_finite()) {
                    return bad(format!("abs_affine needs a > 0 and finite b (a={a}, b={b})"));
                }
            }
            ConvexFn::AbsInner { w, b } => {
                if !w.is_finite() || !b.is_finite() {
                    return bad("abs_inner parameters must be finite".into());
                }
            }
            ConvexFn::AffineHinge { c, d } => {
                if !c.is_finite() || !d.is_finite() {
                    return bad("affine_hinge parameters must be finite".into());
                }
            }
            ConvexFn::NormShift { scale, offset } => {
                if !(scale.is_finite() && *scale >= 0.0 && offset.is_finite()) {
                    return bad(format!("norm_shift needs scale >= 0 (scale={scale})"));
                }
            }
            ConvexFn::Quadratic { a, b } => {
                if !(a.is_finite() && *a > 0.0) || !b.is_finite() {
                    return bad(format!("quadratic needs a > 0 (a={a})"));
                }
            }
            ConvexFn::Sum { terms } => {
                for t in terms {
                    t.validate()?;
                }
            }
        }
        Ok(())
    }

    pub fn convexity(&self) -> ConvexityClass {
        match self {
            ConvexFn::Quadratic { a, .. } => ConvexityClass::StronglyConvex { modulus: 2.0 * a },
            ConvexFn::Sum { terms } => {
                let mut modulus = 0.0;
                let mut strict = false;
                for t in terms {
                    match t.convexity() {
                        ConvexityClass::StronglyConvex { modulus: m } => modulus += m,
                        ConvexityClass::StrictlyConvex => strict = true,
                        ConvexityClass::Convex => {}
                    }
                }
                if modulus > 0.0 {
                    ConvexityClass::StronglyConvex { modulus }
                } else if strict {
                    ConvexityClass::StrictlyConvex
                } else {
                    ConvexityClass::Convex
                }
            }
            _ => ConvexityClass::Convex,
        }
    }

    /// Checks that `x` lies in a space the function is defined on.
    pub fn check_input(&self, x: &Point) -> Result<()> {
        match self {
            ConvexFn::AbsAffine { index, .. } => {
                if *index >= x.dim() {
                    return Err(Error::DimensionMismatch {
                        expected: index + 1,
                        found: x.dim(),
                    });
                }
            }
            ConvexFn::AbsInner { w, .. } => x.check_dim(w.dim())?,
            ConvexFn::AffineHinge { c, .. } => x.check_dim(c.dim())?,
            ConvexFn::Quadratic { b, .. } => x.check_dim(b.dim())?,
            ConvexFn::NormShift { .. } => {}
            ConvexFn::Sum { terms } => {
                for t in terms {
                    t.check_input(x)?;
                }
            }
        }
        Ok(())
    }

    pub fn value(&self, x: &Point) -> Result<f64> {
        self.check_input(x)?;
        Ok(self.value_unchecked(x))
    }

    pub(crate) fn value_unchecked(&self, x: &Point) -> f64 {
        match self {
            ConvexFn::AbsAffine { a, b, index } => (a * x[*index] + b).abs(),
            ConvexFn::AbsInner { w, b } => (w.dot(x) + b).abs(),
            ConvexFn::AffineHinge { c, d } => (c.dot(x) + d).max(0.0),
            ConvexFn::NormShift { scale, offset } => scale * x.norm() + offset,
            ConvexFn::Quadratic { a, b } => a * x.add(b).norm_sq(),
            ConvexFn::Sum { terms } => terms.iter().map(|t| t.value_unchecked(x)).sum(),
        }
    }

    /// Value and one subgradient at `x`; kinks are resolved by `tie`.
    pub fn subgradient(&self, x: &Point, tie: &mut TieBreaker) -> Result<SubgradientSample> {
        self.check_input(x)?;
        let (value, subgradient, tie_broken) = self.eval(x, tie);
        Ok(SubgradientSample {
            at: x.clone(),
            value,
            subgradient,
            tie_broken,
        })
    }

    pub(crate) fn eval(&self, x: &Point, tie: &mut TieBreaker) -> (f64, Point, bool) {
        let dim = x.dim();
        match self {
            ConvexFn::AbsAffine { a, b, index } => {
                let t = a * x[*index] + b;
                let (s, kink) = sign_or_tie(t, tie);
                (t.abs(), Point::basis(dim, *index, s * a), kink)
            }
            ConvexFn::AbsInner { w, b } => {
                let t = w.dot(x) + b;
                let (s, kink) = sign_or_tie(t, tie);
                (t.abs(), w.scale(s), kink)
            }
            ConvexFn::AffineHinge { c, d } => {
                let t = c.dot(x) + d;
                if t > 0.0 {
                    (t, c.clone(), false)
                } else if t < 0.0 {
                    (0.0, Point::zeros(dim), false)
                } else {
                    (0.0, c.scale(tie.one_sided()), true)
                }
            }
            ConvexFn::NormShift { scale, offset } => {
                let norm = x.norm();
                if norm > 0.0 {
                    (scale * norm + offset, x.scale(scale / norm), false)
                } else {
                    (*offset, tie.unit_ball(dim).scale(*scale), true)
                }
            }
            ConvexFn::Quadratic { a, b } => {
                let shifted = x.add(b);
                (a * shifted.norm_sq(), shifted.scale(2.0 * a), false)
            }
            ConvexFn::Sum { terms } => {
                let mut value = 0.0;
                let mut grad = Point::zeros(dim);
                let mut kink = false;
                for t in terms {
                    let (v, g, k) = t.eval(x, tie);
                    value += v;
                    grad.add_assign(&g);
                    kink |= k;
                }
                (value, grad, kink)
            }
        }
    }
}

fn sign_or_tie(t: f64, tie: &mut TieBreaker) -> (f64, bool) {
    if t > 0.0 {
        (1.0, false)
    } else if t < 0.0 {
        (-1.0, false)
    } else {
        (tie.symmetric(), true)
    }
}

/// `Σ_i f_i(x_i)` for matched lists of functions and points.
pub fn total_value(fns: &[ConvexFn], points: &[Point]) -> Result<f64> {
    if fns.len() != points.len() {
        return Err(Error::DimensionMismatch {
            expected: fns.len(),
            found: points.len(),
        });
    }
    fns.iter().zip(points).map(|(f, x)| f.value(x)).sum()
}
