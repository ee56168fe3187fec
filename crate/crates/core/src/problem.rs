//! Multi-user problem instances.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functions::ConvexFn;
use crate::geometry::{ClosedConvexSet, QneMapping, RelaxedMapping};
use crate::point::Point;
use crate::rng::TieBreaker;

/// Residual tolerance for a point to count as a common fixed point.
pub const FEASIBILITY_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserSpec {
    pub objective: ConvexFn,
    pub mapping: RelaxedMapping,
    #[serde(default)]
    pub safeguard: Option<ClosedConvexSet>,
}

impl UserSpec {
    pub fn new(objective: ConvexFn, mapping: RelaxedMapping, safeguard: Option<ClosedConvexSet>) -> Self {
        UserSpec {
            objective,
            mapping,
            safeguard,
        }
    }

    pub fn alpha(&self) -> f64 {
        self.mapping.alpha
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReferenceMethod {
    Analytic,
    GridOracle,
    LongRun,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceSolution {
    pub f_star: f64,
    #[serde(default)]
    pub x_star: Option<Point>,
    pub method: ReferenceMethod,
    /// False when a long run did not settle; the value is then only indicative.
    #[serde(default = "yes")]
    pub self_consistent: bool,
}

fn yes() -> bool {
    true
}

/// How `d(x, X)` can be evaluated for an instance.
#[derive(Debug, Clone, PartialEq)]
pub enum XDistance<'a> {
    /// Every mapping is the identity, so `X` is the whole space.
    Everywhere,
    /// Every mapping fixes exactly this set.
    Set(&'a ClosedConvexSet),
}

impl XDistance<'_> {
    pub fn distance(&self, x: &Point) -> f64 {
        match self {
            XDistance::Everywhere => 0.0,
            XDistance::Set(set) => set.project_unchecked(x).dist(x),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemInstance {
    pub dimension: usize,
    pub users: Vec<UserSpec>,
    #[serde(default)]
    pub reference: Option<ReferenceSolution>,
    /// Outer ball used by the ISM baseline and for sampling initial points.
    #[serde(default)]
    pub domain: Option<ClosedConvexSet>,
    /// A certified point of `X`, used as the comparison point of the lemma monitors.
    #[serde(default)]
    pub feasible_point: Option<Point>,
}

impl ProblemInstance {
    pub fn new(dimension: usize, users: Vec<UserSpec>) -> Result<Self> {
        let inst = ProblemInstance {
            dimension,
            users,
            reference: None,
            domain: None,
            feasible_point: None,
        };
        inst.validate()?;
        Ok(inst)
    }

    pub fn with_domain(mut self, domain: ClosedConvexSet) -> Result<Self> {
        domain.validate()?;
        domain.dim().eq(&self.dimension).then_some(()).ok_or(Error::DimensionMismatch {
            expected: self.dimension,
            found: domain.dim(),
        })?;
        self.domain = Some(domain);
        Ok(self)
    }

    pub fn with_feasible_point(mut self, x: Point) -> Result<Self> {
        x.check_dim(self.dimension)?;
        self.feasible_point = Some(x);
        Ok(self)
    }

    pub fn num_users(&self) -> usize {
        self.users.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.users.is_empty() {
            return Err(Error::InvalidInput("an instance needs at least one user".into()));
        }
        if self.dimension == 0 {
            return Err(Error::InvalidInput("dimension must be positive".into()));
        }
        let probe = Point::zeros(self.dimension);
        for (i, u) in self.users.iter().enumerate() {
            u.objective.validate()?;
            u.mapping.validate()?;
            if !(u.alpha() > 0.0 && u.alpha() < 1.0) {
                return Err(Error::InvalidInput(format!(
                    "user {} has alpha {} outside (0,1)",
                    i + 1,
                    u.alpha()
                )));
            }
            u.objective.check_input(&probe)?;
            u.mapping.base.check_input(&probe)?;
            if let Some(s) = &u.safeguard {
                s.validate()?;
                probe.check_dim(s.dim())?;
            }
        }
        if let Some(d) = &self.domain {
            probe.check_dim(d.dim())?;
        }
        if let Some(x) = &self.feasible_point {
            x.check_dim(self.dimension)?;
        }
        Ok(())
    }

    /// `f(x) = Σ_i f^(i)(x)`
    pub fn objective(&self, x: &Point) -> Result<f64> {
        x.check_dim(self.dimension)?;
        Ok(self.users.iter().map(|u| u.objective.value_unchecked(x)).sum())
    }

    /// `‖x − Q^(i)(x)‖` for every user, evaluated with the deterministic `positive` tie rule.
    pub fn residuals(&self, x: &Point) -> Result<Vec<f64>> {
        let mut tie = TieBreaker::Positive;
        self.users.iter().map(|u| u.mapping.base.residual(x, &mut tie)).collect()
    }

    pub fn is_feasible(&self, x: &Point, tol: f64) -> Result<bool> {
        Ok(self.residuals(x)?.iter().all(|r| *r <= tol))
    }

    /// The point the lemma monitors compare against, checked for feasibility.
    pub fn comparison_point(&self) -> Result<Option<Point>> {
        let candidate = self
            .feasible_point
            .clone()
            .or_else(|| self.reference.as_ref().and_then(|r| r.x_star.clone()));
        match candidate {
            Some(x) => {
                if self.is_feasible(&x, FEASIBILITY_TOL)? {
                    Ok(Some(x))
                } else {
                    Err(Error::Precondition("comparison point is not a common fixed point".into()))
                }
            }
            None => Ok(None),
        }
    }

    /// Exact distance to `X` when every user's fixed point set is the same known set.
    pub fn x_distance(&self) -> Option<XDistance<'_>> {
        if self.users.iter().all(|u| u.mapping.base == QneMapping::Identity) {
            return Some(XDistance::Everywhere);
        }
        let first = self.users[0].mapping.base.fixed_set()?;
        self.users
            .iter()
            .all(|u| u.mapping.base.fixed_set() == Some(first))
            .then_some(XDistance::Set(first))
    }

    pub fn all_identity(&self) -> bool {
        self.users.iter().all(|u| u.mapping.base == QneMapping::Identity)
    }

    /// Whether every base mapping is quasi-firmly nonexpansive.
    pub fn quasi_firm(&self) -> bool {
        self.users.iter().all(|u| u.mapping.base.is_quasi_firm())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::relax;
    use crate::pt;

    fn ball_user(center: Point) -> UserSpec {
        let set = ClosedConvexSet::ball(center, 1.0).unwrap();
        UserSpec::new(ConvexFn::zero(), relax(QneMapping::projection(set), 0.5).unwrap(), None)
    }

    #[test]
    fn validation() {
        assert!(ProblemInstance::new(2, vec![]).is_err());
        assert!(ProblemInstance::new(3, vec![ball_user(pt![0, 0])]).is_err());
        let mut u = ball_user(pt![0, 0]);
        u.mapping.alpha = 0.0;
        assert!(ProblemInstance::new(2, vec![u]).is_err());
    }

    #[test]
    fn x_distance_for_shared_set() {
        let inst = ProblemInstance::new(2, vec![ball_user(pt![0, 0]), ball_user(pt![0, 0])]).unwrap();
        let d = inst.x_distance().unwrap();
        assert_eq!(d.distance(&pt![3, 0]), 2.0);
        let mixed = ProblemInstance::new(2, vec![ball_user(pt![0, 0]), ball_user(pt![1, 0])]).unwrap();
        assert!(mixed.x_distance().is_none());
    }

    #[test]
    fn infeasible_comparison_point_is_rejected() {
        let inst = ProblemInstance::new(2, vec![ball_user(pt![0, 0])])
            .unwrap()
            .with_feasible_point(pt![5, 0])
            .unwrap();
        assert!(matches!(inst.comparison_point(), Err(Error::Precondition(_))));
    }
}
