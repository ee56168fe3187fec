//! Reference solutions `(f*, x*)` for rate checks and acceptance tests.

use fixsub_core::problem::FEASIBILITY_TOL;
use fixsub_core::rng::user_streams;
use fixsub_core::solvers::algorithm2_step;
use fixsub_core::{
    ConvexFn, Point, ProblemInstance, ReferenceMethod, ReferenceSolution, SetKind, StepSchedule, TieRule,
};
use rayon::prelude::*;

use crate::error::Result;

#[derive(Debug, Clone, PartialEq)]
pub struct OracleOptions {
    /// Points per axis of the first grid.
    pub grid: usize,
    /// Points per axis of each refinement grid.
    pub refine_grid: usize,
    pub refinements: usize,
    /// Half-width of the search box when the instance has no domain ball.
    pub box_radius: f64,
    pub long_run_iters: usize,
    pub long_run_c: f64,
}

impl Default for OracleOptions {
    fn default() -> Self {
        OracleOptions {
            grid: 2001,
            refine_grid: 2001,
            refinements: 2,
            box_radius: 10.0,
            long_run_iters: 1_000_000,
            long_run_c: 1e-3,
        }
    }
}

/// `f*` and `x*` when the instance is simple enough to solve by inspection.
pub fn analytic(inst: &ProblemInstance) -> Result<Option<ReferenceSolution>> {
    let nonzero: Vec<&ConvexFn> = inst
        .users
        .iter()
        .map(|u| &u.objective)
        .filter(|f| !f.is_zero())
        .collect();
    let solution = |x: Point| ReferenceSolution {
        f_star: 0.0,
        x_star: Some(x),
        method: ReferenceMethod::Analytic,
        self_consistent: true,
    };
    match nonzero.as_slice() {
        [] => {
            let x = match &inst.feasible_point {
                Some(x) => Some(x.clone()),
                None if inst.all_identity() => Some(Point::zeros(inst.dimension)),
                None => None,
            };
            Ok(x.map(solution))
        }
        [ConvexFn::Quadratic { b, .. }] => {
            let x = b.scale(-1.0);
            let in_domain = inst.domain.as_ref().is_none_or(|y| y.contains(&x));
            if in_domain && inst.is_feasible(&x, FEASIBILITY_TOL)? {
                Ok(Some(solution(x)))
            } else {
                Ok(None)
            }
        }
        _ => Ok(None),
    }
}

fn box_of(inst: &ProblemInstance, opts: &OracleOptions) -> (Point, f64) {
    match inst.domain.as_ref().map(|y| &y.kind) {
        Some(SetKind::Ball { center, radius }) => (center.clone(), *radius),
        _ => (Point::zeros(inst.dimension), opts.box_radius),
    }
}

/// Best feasible point of a regular grid with `points` nodes per axis over
/// the box `center ± half`. Ties go to the lowest grid index.
fn grid_search(inst: &ProblemInstance, center: &Point, half: f64, points: usize) -> Result<Option<(f64, Point)>> {
    let dim = inst.dimension;
    let step = if points > 1 { 2.0 * half / (points - 1) as f64 } else { 0.0 };
    let coord = |axis: usize, k: usize| center[axis] - half + step * k as f64;
    let rows = if dim == 2 { points } else { 1 };
    let best: Vec<Option<(f64, usize, Point)>> = (0..rows)
        .into_par_iter()
        .map(|r| -> Result<Option<(f64, usize, Point)>> {
            let mut best: Option<(f64, usize, Point)> = None;
            for k in 0..points {
                let x = match dim {
                    1 => Point::new(vec![coord(0, k)])?,
                    _ => Point::new(vec![coord(0, r), coord(1, k)])?,
                };
                if let Some(y) = &inst.domain {
                    if !y.contains(&x) {
                        continue;
                    }
                }
                if !inst.is_feasible(&x, 0.0)? {
                    continue;
                }
                let v = inst.objective(&x)?;
                if best.as_ref().is_none_or(|(bv, _, _)| v < *bv) {
                    best = Some((v, r * points + k, x));
                }
            }
            Ok(best)
        })
        .collect::<Result<_>>()?;
    Ok(best
        .into_iter()
        .flatten()
        .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
        .map(|(v, _, x)| (v, x)))
}

/// Grid search with successive refinements; `N ≤ 2` only.
///
/// Each refinement re-grids a box one tenth the size of the previous one
/// around the incumbent. A narrower box (a few grid steps) is not enough when
/// the minimizer sits on a curved boundary under a steep objective: the best
/// feasible node then trades depth below the boundary against position along
/// it, and can lie many steps away from the true minimizer.
pub fn grid_oracle(inst: &ProblemInstance, opts: &OracleOptions) -> Result<Option<ReferenceSolution>> {
    if inst.dimension > 2 {
        return Ok(None);
    }
    let (center, mut half) = box_of(inst, opts);
    let Some((mut f, mut x)) = grid_search(inst, &center, half, opts.grid)? else {
        return Ok(None);
    };
    for _ in 0..opts.refinements {
        half /= 10.0;
        if let Some((fr, xr)) = grid_search(inst, &x, half, opts.refine_grid)? {
            if fr <= f {
                f = fr;
                x = xr;
            }
        }
    }
    Ok(Some(ReferenceSolution {
        f_star: f,
        x_star: Some(x),
        method: ReferenceMethod::GridOracle,
        self_consistent: true,
    }))
}

/// Projected incremental subgradient run with `λ_n = c/(n+1)`. The result is
/// flagged self-consistent when the final point is feasible to `1e-6` and the
/// objective moved by at most `1e-6` relative over the second half.
pub fn long_run(inst: &ProblemInstance, opts: &OracleOptions) -> Result<ReferenceSolution> {
    let projected = inst.users.iter().all(|u| u.safeguard.is_some());
    let schedule = StepSchedule::power(opts.long_run_c, 1.0)?;
    let mut ties = user_streams(TieRule::Zero, 0, inst.num_users());
    let mut x = inst
        .feasible_point
        .clone()
        .unwrap_or_else(|| Point::zeros(inst.dimension));
    let half = opts.long_run_iters / 2;
    let mut f_half = f64::NAN;
    for n in 0..opts.long_run_iters {
        x = algorithm2_step(inst, n, &x, &schedule, projected, &mut ties)?.next;
        if n + 1 == half {
            f_half = inst.objective(&x)?;
        }
    }
    let f = inst.objective(&x)?;
    let feasible = inst.residuals(&x)?.iter().all(|r| *r <= 1e-6);
    let settled = (f - f_half).abs() <= 1e-6 * (1.0 + f.abs());
    Ok(ReferenceSolution {
        f_star: f,
        x_star: Some(x),
        method: ReferenceMethod::LongRun,
        self_consistent: feasible && settled,
    })
}

/// Analytic when recognised, grid search for `N ≤ 2`, a long run otherwise.
pub fn reference_solve(inst: &ProblemInstance, opts: &OracleOptions) -> Result<ReferenceSolution> {
    inst.validate()?;
    if let Some(r) = analytic(inst)? {
        return Ok(r);
    }
    if let Some(r) = grid_oracle(inst, opts)? {
        return Ok(r);
    }
    long_run(inst, opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use fixsub_core::{pt, relax, ClosedConvexSet, QneMapping, UserSpec};

    fn coarse() -> OracleOptions {
        OracleOptions {
            grid: 401,
            refine_grid: 201,
            ..OracleOptions::default()
        }
    }

    #[test]
    fn l1_over_shifted_ball() {
        let ball = ClosedConvexSet::ball(pt![2, 0], 1.0).unwrap();
        let u = |j| {
            UserSpec::new(
                ConvexFn::abs_affine(1.0, 0.0, j).unwrap(),
                relax(QneMapping::projection(ball.clone()), 0.5).unwrap(),
                None,
            )
        };
        let inst = ProblemInstance::new(2, vec![u(0), u(1)]).unwrap();
        let r = reference_solve(&inst, &coarse()).unwrap();
        assert_eq!(r.method, ReferenceMethod::GridOracle);
        assert!((r.f_star - 1.0).abs() <= 2e-3, "{}", r.f_star);
        assert!(r.x_star.unwrap().dist(&pt![1, 0]) <= 1e-2);
    }

    #[test]
    fn steep_objective_with_boundary_minimum() {
        let m = pt![21, -66];
        let ball = ClosedConvexSet::ball(pt![0, 0], 8.0).unwrap();
        let user = UserSpec::new(
            ConvexFn::quadratic(80.0, m.scale(-1.0)).unwrap(),
            relax(QneMapping::projection(ball), 0.5).unwrap(),
            None,
        );
        let inst = ProblemInstance::new(2, vec![user]).unwrap();
        let r = grid_oracle(&inst, &OracleOptions::default()).unwrap().unwrap();
        let exact = m.scale(8.0 / m.norm());
        assert!(r.x_star.unwrap().dist(&exact) <= 1e-3);
    }

    #[test]
    fn interior_quadratic_minimum() {
        let user = UserSpec::new(
            ConvexFn::quadratic(3.0, pt![0.5, -1]).unwrap(),
            relax(QneMapping::projection(ClosedConvexSet::ball(pt![0, 0], 4.0).unwrap()), 0.5).unwrap(),
            None,
        );
        let inst = ProblemInstance::new(2, vec![user]).unwrap();
        let r = reference_solve(&inst, &coarse()).unwrap();
        assert_eq!(r.method, ReferenceMethod::Analytic);
        assert_eq!(r.f_star, 0.0);
        assert_eq!(r.x_star.unwrap(), pt![-0.5, 1]);
    }

    #[test]
    fn zero_objective() {
        let user = UserSpec::new(ConvexFn::zero(), relax(QneMapping::Identity, 0.5).unwrap(), None);
        let inst = ProblemInstance::new(3, vec![user]).unwrap();
        let r = reference_solve(&inst, &coarse()).unwrap();
        assert_eq!((r.f_star, r.method), (0.0, ReferenceMethod::Analytic));
    }

    #[test]
    fn long_run_on_three_dimensions() {
        let set = ClosedConvexSet::ball(pt![0, 0, 0], 1.0).unwrap();
        let users = (0..3)
            .map(|j| {
                UserSpec::new(
                    ConvexFn::abs_affine(1.0, -2.0, j).unwrap(),
                    relax(QneMapping::projection(set.clone()), 0.5).unwrap(),
                    Some(set.clone()),
                )
            })
            .collect();
        let inst = ProblemInstance::new(3, users).unwrap();
        let opts = OracleOptions {
            long_run_iters: 20_000,
            long_run_c: 1e-1,
            ..OracleOptions::default()
        };
        let r = reference_solve(&inst, &opts).unwrap();
        assert_eq!(r.method, ReferenceMethod::LongRun);
        let exact = 3.0 * (2.0 - 1.0 / 3f64.sqrt());
        assert!((r.f_star - exact).abs() <= 1e-3, "{} vs {exact}", r.f_star);
    }
}
