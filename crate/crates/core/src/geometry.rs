//! Closed convex sets, metric projections and quasi-nonexpansive mappings.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functions::{ConvexFn, SubgradientSample};
use crate::point::Point;
use crate::rng::TieBreaker;

/// Default membership tolerance for sets.
pub const SET_TOL: f64 = 1e-10;
/// Subgradients shorter than this are treated as degenerate.
pub const DEGENERATE_SUBGRADIENT: f64 = 1e-14;
/// Tolerance on the sum of weighted-average weights.
pub const WEIGHT_SUM_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum SetKind {
    Ball { center: Point, radius: f64 },
    /// `{x : ⟨normal, x⟩ + offset ≤ 0}`
    Halfspace { normal: Point, offset: f64 },
    Box { lower: Point, upper: Point },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClosedConvexSet {
    pub kind: SetKind,
    #[serde(default = "default_set_tol")]
    pub tol: f64,
}

fn default_set_tol() -> f64 {
    SET_TOL
}

impl ClosedConvexSet {
    pub fn ball(center: Point, radius: f64) -> Result<Self> {
        Self::from_kind(SetKind::Ball { center, radius })
    }

    pub fn halfspace(normal: Point, offset: f64) -> Result<Self> {
        Self::from_kind(SetKind::Halfspace { normal, offset })
    }

    pub fn cuboid(lower: Point, upper: Point) -> Result<Self> {
        Self::from_kind(SetKind::Box { lower, upper })
    }

    pub fn from_kind(kind: SetKind) -> Result<Self> {
        let set = ClosedConvexSet { kind, tol: SET_TOL };
        set.validate()?;
        Ok(set)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tol.is_finite() && self.tol >= 0.0) {
            return Err(Error::InvalidInput(format!("bad set tolerance {}", self.tol)));
        }
        match &self.kind {
            SetKind::Ball { center, radius } => {
                if !center.is_finite() || !(radius.is_finite() && *radius > 0.0) {
                    return Err(Error::InvalidInput(format!("ball radius must be positive, got {radius}")));
                }
            }
            SetKind::Halfspace { normal, offset } => {
                if !normal.is_finite() || !offset.is_finite() || normal.norm() <= 0.0 {
                    return Err(Error::InvalidInput("halfspace normal must be nonzero".into()));
                }
            }
            SetKind::Box { lower, upper } => {
                if lower.dim() != upper.dim() {
                    return Err(Error::DimensionMismatch {
                        expected: lower.dim(),
                        found: upper.dim(),
                    });
                }
                if lower.as_slice().iter().zip(upper.as_slice()).any(|(l, u)| l > u) {
                    return Err(Error::InvalidInput("box needs lower <= upper".into()));
                }
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        match &self.kind {
            SetKind::Ball { center, .. } => center.dim(),
            SetKind::Halfspace { normal, .. } => normal.dim(),
            SetKind::Box { lower, .. } => lower.dim(),
        }
    }

    /// Metric projection onto the set. Members are returned unchanged.
    pub fn project(&self, x: &Point) -> Result<Point> {
        x.check_dim(self.dim())?;
        Ok(self.project_unchecked(x))
    }

    pub(crate) fn project_unchecked(&self, x: &Point) -> Point {
        match &self.kind {
            SetKind::Ball { center, radius } => {
                let offset = x.sub(center);
                let dist = offset.norm();
                if dist <= *radius {
                    x.clone()
                } else {
                    center.axpy(radius / dist, &offset)
                }
            }
            SetKind::Halfspace { normal, offset } => {
                let t = normal.dot(x) + offset;
                if t <= 0.0 {
                    x.clone()
                } else {
                    x.axpy(-t / normal.norm_sq(), normal)
                }
            }
            SetKind::Box { lower, upper } => Point::from_vec_unchecked(
                x.as_slice()
                    .iter()
                    .zip(lower.as_slice().iter().zip(upper.as_slice()))
                    .map(|(v, (l, u))| v.clamp(*l, *u))
                    .collect(),
            ),
        }
    }

    /// Euclidean distance from `x` to the set.
    pub fn distance(&self, x: &Point) -> Result<f64> {
        Ok(self.project(x)?.dist(x))
    }

    /// Membership up to the set tolerance.
    pub fn contains(&self, x: &Point) -> bool {
        x.dim() == self.dim() && self.project_unchecked(x).dist(x) <= self.tol
    }
}

/// Nonexpansivity class a mapping is known to satisfy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MappingClass {
    Nonexpansive,
    QuasiFirmlyNonexpansive,
    QuasiNonexpansive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedMap {
    pub weight: f64,
    pub map: QneMapping,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum QneMapping {
    Identity,
    MetricProjection { set: ClosedConvexSet },
    /// `x − g(x)/‖z‖² · z` when `g(x) > 0`, otherwise `x`.
    SubgradientProjection { g: ConvexFn },
    /// `2 P_C − Id`.
    Reflection { set: ClosedConvexSet },
    /// Composition applying the first element first.
    Product { maps: Vec<QneMapping> },
    WeightedAverage { terms: Vec<WeightedMap> },
}

impl QneMapping {
    pub fn projection(set: ClosedConvexSet) -> Self {
        QneMapping::MetricProjection { set }
    }

    pub fn subgradient_projection(g: ConvexFn) -> Result<Self> {
        g.validate()?;
        Ok(QneMapping::SubgradientProjection { g })
    }

    pub fn product(maps: Vec<QneMapping>) -> Result<Self> {
        if maps.is_empty() {
            return Err(Error::InvalidInput("empty product".into()));
        }
        Ok(QneMapping::Product { maps })
    }

    pub fn weighted_average(terms: Vec<(f64, QneMapping)>) -> Result<Self> {
        let m = QneMapping::WeightedAverage {
            terms: terms
                .into_iter()
                .map(|(weight, map)| WeightedMap { weight, map })
                .collect(),
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            QneMapping::Identity => Ok(()),
            QneMapping::MetricProjection { set } | QneMapping::Reflection { set } => set.validate(),
            QneMapping::SubgradientProjection { g } => g.validate(),
            QneMapping::Product { maps } => {
                if maps.is_empty() {
                    return Err(Error::InvalidInput("empty product".into()));
                }
                maps.iter().try_for_each(QneMapping::validate)
            }
            QneMapping::WeightedAverage { terms } => {
                if terms.is_empty() {
                    return Err(Error::InvalidInput("empty weighted average".into()));
                }
                if terms.iter().any(|t| !(t.weight.is_finite() && t.weight >= 0.0)) {
                    return Err(Error::InvalidInput("weights must be nonnegative".into()));
                }
                let total: f64 = terms.iter().map(|t| t.weight).sum();
                if (total - 1.0).abs() > WEIGHT_SUM_TOL {
                    return Err(Error::InvalidInput(format!("weights sum to {total}, not 1")));
                }
                terms.iter().try_for_each(|t| t.map.validate())
            }
        }
    }

    pub fn claimed_class(&self) -> MappingClass {
        match self {
            QneMapping::Identity | QneMapping::MetricProjection { .. } | QneMapping::Reflection { .. } => {
                MappingClass::Nonexpansive
            }
            QneMapping::SubgradientProjection { .. } => MappingClass::QuasiFirmlyNonexpansive,
            QneMapping::Product { maps } => {
                if maps.iter().all(|m| m.claimed_class() == MappingClass::Nonexpansive) {
                    MappingClass::Nonexpansive
                } else {
                    MappingClass::QuasiNonexpansive
                }
            }
            QneMapping::WeightedAverage { terms } => {
                if terms.iter().all(|t| t.map.claimed_class() == MappingClass::Nonexpansive) {
                    MappingClass::Nonexpansive
                } else if self.is_quasi_firm() {
                    MappingClass::QuasiFirmlyNonexpansive
                } else {
                    MappingClass::QuasiNonexpansive
                }
            }
        }
    }

    /// Whether `‖Q(x)−y‖² + ‖x−Q(x)‖² ≤ ‖x−y‖²` is guaranteed for `y ∈ Fix(Q)`.
    ///
    /// Projections and subgradient projections qualify, reflections do not.
    /// Averages of such mappings with a common fixed point qualify; products
    /// of two or more generally do not.
    pub fn is_quasi_firm(&self) -> bool {
        match self {
            QneMapping::Identity
            | QneMapping::MetricProjection { .. }
            | QneMapping::SubgradientProjection { .. } => true,
            QneMapping::Reflection { .. } => false,
            QneMapping::Product { maps } => maps.len() == 1 && maps[0].is_quasi_firm(),
            QneMapping::WeightedAverage { terms } => terms.iter().all(|t| t.map.is_quasi_firm()),
        }
    }

    pub fn check_input(&self, x: &Point) -> Result<()> {
        match self {
            QneMapping::Identity => Ok(()),
            QneMapping::MetricProjection { set } | QneMapping::Reflection { set } => x.check_dim(set.dim()),
            QneMapping::SubgradientProjection { g } => g.check_input(x),
            QneMapping::Product { maps } => maps.iter().try_for_each(|m| m.check_input(x)),
            QneMapping::WeightedAverage { terms } => terms.iter().try_for_each(|t| t.map.check_input(x)),
        }
    }

    /// Evaluates the mapping, appending every subgradient-oracle answer to `log`.
    pub fn evaluate(&self, x: &Point, tie: &mut TieBreaker, log: &mut Vec<SubgradientSample>) -> Result<Point> {
        self.check_input(x)?;
        self.eval(x, tie, log)
    }

    /// Evaluates the mapping and discards the oracle log.
    pub fn apply(&self, x: &Point, tie: &mut TieBreaker) -> Result<Point> {
        self.evaluate(x, tie, &mut Vec::new())
    }

    fn eval(&self, x: &Point, tie: &mut TieBreaker, log: &mut Vec<SubgradientSample>) -> Result<Point> {
        match self {
            QneMapping::Identity => Ok(x.clone()),
            QneMapping::MetricProjection { set } => Ok(set.project_unchecked(x)),
            QneMapping::Reflection { set } => Ok(set.project_unchecked(x).lincomb(2.0, x, -1.0)),
            QneMapping::SubgradientProjection { g } => {
                let (value, z, tie_broken) = g.eval(x, tie);
                let out = if value > 0.0 {
                    let zz = z.norm_sq();
                    if zz.sqrt() <= DEGENERATE_SUBGRADIENT {
                        return Err(Error::DegenerateSubgradient { value, norm: zz.sqrt() });
                    }
                    x.axpy(-value / zz, &z)
                } else {
                    x.clone()
                };
                log.push(SubgradientSample {
                    at: x.clone(),
                    value,
                    subgradient: z,
                    tie_broken,
                });
                Ok(out)
            }
            QneMapping::Product { maps } => {
                let mut cur = x.clone();
                for m in maps {
                    cur = m.eval(&cur, tie, log)?;
                }
                Ok(cur)
            }
            QneMapping::WeightedAverage { terms } => {
                let mut acc = Point::zeros(x.dim());
                for t in terms {
                    let y = t.map.eval(x, tie, log)?;
                    acc = acc.axpy(t.weight, &y);
                }
                Ok(acc)
            }
        }
    }

    /// `‖x − Q(x)‖`
    pub fn residual(&self, x: &Point, tie: &mut TieBreaker) -> Result<f64> {
        Ok(self.apply(x, tie)?.dist(x))
    }

    /// The constraint function when this is a subgradient projection.
    pub fn constraint(&self) -> Option<&ConvexFn> {
        match self {
            QneMapping::SubgradientProjection { g } => Some(g),
            _ => None,
        }
    }

    /// The set `Fix(Q)` when it is a single known convex set.
    pub fn fixed_set(&self) -> Option<&ClosedConvexSet> {
        match self {
            QneMapping::MetricProjection { set } | QneMapping::Reflection { set } => Some(set),
            _ => None,
        }
    }
}

/// `Q_α := α Id + (1 − α) Q` with `α ∈ [0, 1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelaxedMapping {
    pub base: QneMapping,
    pub alpha: f64,
}

pub fn relax(base: QneMapping, alpha: f64) -> Result<RelaxedMapping> {
    let m = RelaxedMapping { base, alpha };
    m.validate()?;
    Ok(m)
}

impl RelaxedMapping {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.alpha) {
            return Err(Error::InvalidInput(format!("alpha must lie in [0,1), got {}", self.alpha)));
        }
        self.base.validate()
    }

    /// Returns `(Q_α(x), Q(x))` from a single evaluation of the base mapping.
    pub fn evaluate_with_base(
        &self,
        x: &Point,
        tie: &mut TieBreaker,
        log: &mut Vec<SubgradientSample>,
    ) -> Result<(Point, Point)> {
        let base = self.base.evaluate(x, tie, log)?;
        Ok((x.lincomb(self.alpha, &base, 1.0 - self.alpha), base))
    }

    pub fn evaluate(&self, x: &Point, tie: &mut TieBreaker, log: &mut Vec<SubgradientSample>) -> Result<Point> {
        Ok(self.evaluate_with_base(x, tie, log)?.0)
    }

    pub fn apply(&self, x: &Point, tie: &mut TieBreaker) -> Result<Point> {
        self.evaluate(x, tie, &mut Vec::new())
    }

    /// `‖x − Q_α(x)‖`
    pub fn residual(&self, x: &Point, tie: &mut TieBreaker) -> Result<f64> {
        Ok(self.apply(x, tie)?.dist(x))
    }
}

/// `‖x − m(x)‖` for a plain mapping.
pub fn fixed_point_residual(m: &QneMapping, x: &Point, tie: &mut TieBreaker) -> Result<f64> {
    m.residual(x, tie)
}
