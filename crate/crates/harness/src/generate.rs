//! Random sublevel-set instances.
//!
//! User 1 is constrained to the ball `‖x‖ ≤ 2C`; every other user to a
//! halfspace `⟨c, x⟩ + d ≤ 0` with `c` a unit vector in the open positive
//! orthant and `d ∈ [−C^{1/I}, C^{1/I}]`. All constraints enter through
//! subgradient projections relaxed with `α = 1/2`, and the safeguard of
//! every user is `Y = {‖x‖ ≤ 2C}`.

use fixsub_core::rng::{sample_sphere, stream, Stream};
use fixsub_core::{relax, ClosedConvexSet, ConvexFn, Point, ProblemInstance, QneMapping, TieBreaker, UserSpec};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, ObjectiveFamily, ObjectiveInterpretation};
use crate::error::{HarnessError, Result};

pub const MAX_ATTEMPTS: u64 = 100;
const GENERATOR_TAG: u64 = 0x4745_4e45;
const RELAXATION: f64 = 0.5;

/// A generated instance with enough provenance to regenerate it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceFile {
    pub seed: u64,
    pub attempt: u64,
    #[serde(rename = "C")]
    pub c: f64,
    pub objective_family: ObjectiveFamily,
    pub objective_interpretation: ObjectiveInterpretation,
    pub instance: ProblemInstance,
}

/// Value in `(0, hi]`.
fn open_closed(rng: &mut Stream, hi: f64) -> f64 {
    hi * (1.0 - rng.random::<f64>())
}

fn positive_unit(rng: &mut Stream, dim: usize) -> Point {
    let v = Point::new((0..dim).map(|_| 1.0 - rng.random::<f64>()).collect()).expect("finite");
    let norm = v.norm();
    v.scale(1.0 / norm)
}

fn user_constraint(rng: &mut Stream, i: usize, dim: usize, c: f64) -> Result<ConvexFn> {
    if i == 0 {
        return Ok(ConvexFn::norm_shift(1.0, -2.0 * c)?);
    }
    let normal = positive_unit(rng, dim);
    let r = c.powf(1.0 / dim as f64);
    let d = rng.random_range(-r..=r);
    Ok(ConvexFn::affine_hinge(normal, d)?)
}

fn user_objective(rng: &mut Stream, cfg: &ExperimentConfig, i: usize) -> Result<ConvexFn> {
    let dim = cfg.users;
    let a = open_closed(rng, 100.0);
    if i == 0 && cfg.objective_family == ObjectiveFamily::StronglyConvexFirst {
        let b = Point::new((0..dim).map(|_| rng.random_range(-100.0..=100.0)).collect()).expect("finite");
        return Ok(ConvexFn::quadratic(a, b)?);
    }
    let b = rng.random_range(-100.0..=100.0);
    Ok(match cfg.objective_interpretation {
        ObjectiveInterpretation::Coordinate => ConvexFn::abs_affine(a, b, i)?,
        ObjectiveInterpretation::InnerProduct => ConvexFn::abs_inner(sample_sphere(rng, dim).scale(a), b)?,
    })
}

/// Start for the feasibility search: the smallest multiple of the negated
/// mean hinge normal that satisfies every hinge, or the origin.
fn ray_start(constraints: &[ConvexFn], dim: usize, margin: f64) -> Point {
    let hinges: Vec<(&Point, f64)> = constraints
        .iter()
        .filter_map(|g| match g {
            ConvexFn::AffineHinge { c, d } => Some((c, *d)),
            _ => None,
        })
        .collect();
    let mut v = Point::zeros(dim);
    for (c, _) in &hinges {
        v = v.axpy(-1.0, c);
    }
    let norm = v.norm();
    if norm == 0.0 {
        return v;
    }
    let v = v.scale(1.0 / norm);
    let mut t = 0.0_f64;
    for (c, d) in &hinges {
        let slope = c.dot(&v);
        if slope >= 0.0 {
            return Point::zeros(dim);
        }
        t = t.max((d + margin) / -slope);
    }
    v.scale(t)
}

/// Cyclic subgradient projections onto slightly tightened sublevel sets.
/// Returns a point with every `g ≤ 0`.
pub fn find_feasible_point(constraints: &[ConvexFn], dim: usize, max_sweeps: usize) -> Option<Point> {
    const MARGIN: f64 = 1e-9;
    let mut tie = TieBreaker::Positive;
    let mut x = ray_start(constraints, dim, MARGIN);
    for _ in 0..max_sweeps {
        if constraints.iter().all(|g| g.value(&x).is_ok_and(|v| v <= 0.0)) {
            return Some(x);
        }
        for g in constraints {
            let s = g.subgradient(&x, &mut tie).ok()?;
            let excess = s.value + MARGIN;
            if excess > 0.0 {
                let z2 = s.subgradient.norm_sq();
                if z2 <= 1e-28 {
                    return None;
                }
                x = x.axpy(-excess / z2, &s.subgradient);
            }
        }
    }
    None
}

fn attempt(cfg: &ExperimentConfig, k: u64) -> Result<Option<ProblemInstance>> {
    let dim = cfg.users;
    let mut rng = stream(cfg.seed, &[GENERATOR_TAG, k]);
    let y = ClosedConvexSet::ball(Point::zeros(dim), 2.0 * cfg.c)?;
    let mut users = Vec::with_capacity(dim);
    let mut constraints = Vec::with_capacity(dim);
    for i in 0..dim {
        let objective = user_objective(&mut rng, cfg, i)?;
        let g = user_constraint(&mut rng, i, dim, cfg.c)?;
        constraints.push(g.clone());
        let mapping = relax(QneMapping::subgradient_projection(g)?, RELAXATION)?;
        users.push(UserSpec::new(objective, mapping, Some(y.clone())));
    }
    let Some(x) = find_feasible_point(&constraints, dim, 10_000) else {
        return Ok(None);
    };
    if !y.contains(&x) {
        return Ok(None);
    }
    let inst = ProblemInstance::new(dim, users)?.with_domain(y)?.with_feasible_point(x)?;
    Ok(Some(inst))
}

/// Generates the instance for `cfg`, moving to the next random substream
/// whenever feasibility cannot be certified.
pub fn generate_instance(cfg: &ExperimentConfig) -> Result<InstanceFile> {
    cfg.validate()?;
    for k in 0..MAX_ATTEMPTS {
        if let Some(instance) = attempt(cfg, k)? {
            return Ok(InstanceFile {
                seed: cfg.seed,
                attempt: k,
                c: cfg.c,
                objective_family: cfg.objective_family,
                objective_interpretation: cfg.objective_interpretation,
                instance,
            });
        }
    }
    Err(HarnessError::Generation(format!(
        "no certified feasible point after {MAX_ATTEMPTS} attempts"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use fixsub_core::{Method, StepSchedule};

    fn cfg(users: usize) -> ExperimentConfig {
        ExperimentConfig::new(users, 7, Method::Parallel, StepSchedule::constant(1e-3).unwrap(), 10)
    }

    #[test]
    fn same_seed_same_instance() {
        assert_eq!(generate_instance(&cfg(2)).unwrap(), generate_instance(&cfg(2)).unwrap());
        let mut other = cfg(2);
        other.seed = 8;
        assert_ne!(generate_instance(&other).unwrap().instance, generate_instance(&cfg(2)).unwrap().instance);
    }

    #[test]
    fn generated_parameters_are_in_range() {
        for users in [1, 2, 8, 64] {
            let file = generate_instance(&cfg(users)).unwrap();
            let inst = &file.instance;
            let r = 4f64.powf(1.0 / users as f64);
            for (i, u) in inst.users.iter().enumerate() {
                assert_eq!(u.alpha(), 0.5);
                match &u.objective {
                    ConvexFn::AbsAffine { a, b, index } => {
                        assert!(*a > 0.0 && *a <= 100.0 && b.abs() <= 100.0 && *index == i);
                    }
                    other => panic!("unexpected objective {other:?}"),
                }
                match &u.mapping.base {
                    QneMapping::SubgradientProjection { g: ConvexFn::NormShift { scale, offset } } => {
                        assert_eq!(i, 0);
                        assert_eq!((*scale, *offset), (1.0, -8.0));
                    }
                    QneMapping::SubgradientProjection { g: ConvexFn::AffineHinge { c, d } } => {
                        assert!((c.norm() - 1.0).abs() <= 1e-12);
                        assert!(c.as_slice().iter().all(|v| *v > 0.0));
                        assert!(d.abs() <= r);
                    }
                    other => panic!("unexpected mapping {other:?}"),
                }
            }
            let x = inst.feasible_point.as_ref().unwrap();
            assert!(inst.is_feasible(x, 0.0).unwrap());
        }
    }

    #[test]
    fn strongly_convex_variant() {
        let mut c = cfg(3);
        c.objective_family = ObjectiveFamily::StronglyConvexFirst;
        c.objective_interpretation = ObjectiveInterpretation::InnerProduct;
        let inst = generate_instance(&c).unwrap().instance;
        assert!(matches!(inst.users[0].objective, ConvexFn::Quadratic { .. }));
        assert!(matches!(inst.users[1].objective, ConvexFn::AbsInner { .. }));
    }

    #[test]
    fn feasibility_search_reports_empty_intersections() {
        let e = Point::basis(2, 0, 1.0);
        let gs = vec![
            ConvexFn::affine_hinge(e.clone(), 1.0).unwrap(),
            ConvexFn::affine_hinge(e.scale(-1.0), 1.0).unwrap(),
        ];
        assert!(find_feasible_point(&gs, 2, 100).is_none());
    }
}
