//! One iteration of Algorithm 1 (parallel), Algorithm 2 (incremental) and
//! the ISM baseline.
//!
//! Each user's work is done by the free functions [`parallel_user_update`]
//! and [`incremental_user_update`]; both the direct step functions here and
//! the network simulator call them, which is what makes the two paths agree
//! bit for bit.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functions::SubgradientSample;
use crate::geometry::{ClosedConvexSet, QneMapping};
use crate::point::Point;
use crate::problem::{ProblemInstance, UserSpec};
use crate::rng::TieBreaker;
use crate::schedule::StepSchedule;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Parallel,
    Incremental,
    Ism,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Parallel => "parallel",
            Method::Incremental => "incremental",
            Method::Ism => "ism",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "parallel" => Ok(Method::Parallel),
            "incremental" => Ok(Method::Incremental),
            "ism" => Ok(Method::Ism),
            other => Err(Error::Config(format!("unknown method {other:?}"))),
        }
    }
}

/// Everything user `i` computed during one iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserStep {
    /// The point the user started from: `x_n` for Algorithm 1, `x_n^(i-1)` otherwise.
    pub input: Point,
    /// `Q_α^(i)(input)`; for ISM the input itself.
    pub relaxed: Point,
    /// `Q^(i)(input)`; for ISM the input itself.
    pub base: Point,
    /// Oracle answers made while evaluating `Q^(i)`.
    pub mapping_log: Vec<SubgradientSample>,
    /// `f^(i)` and the subgradient `g_n^(i)` used in the update.
    pub objective: SubgradientSample,
    /// `x_n^(i)`
    pub output: Point,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationState {
    pub n: usize,
    /// Shared iterate `x_n`.
    pub x: Point,
    pub lambda: f64,
    pub users: Vec<UserStep>,
    /// ISM only: the subgradient-projection sweep `y_n^(1..I)`.
    #[serde(default)]
    pub sweep: Vec<Point>,
    /// `x_{n+1}`
    pub next: Point,
}

impl IterationState {
    /// `x_n^(1), …, x_n^(I)`
    pub fn per_user(&self) -> Vec<&Point> {
        self.users.iter().map(|u| &u.output).collect()
    }

    /// Every oracle answer of the iteration in the order it was requested.
    pub fn subgradient_log(&self) -> Vec<&SubgradientSample> {
        self.users
            .iter()
            .flat_map(|u| u.mapping_log.iter().chain(std::iter::once(&u.objective)))
            .collect()
    }
}

fn safeguard<'a>(user: &'a UserSpec, projected: bool, i: usize) -> Result<Option<&'a ClosedConvexSet>> {
    if !projected {
        return Ok(None);
    }
    user.safeguard
        .as_ref()
        .map(Some)
        .ok_or_else(|| Error::Config(format!("projected step requested but user {} has no safeguard", i + 1)))
}

fn relaxed_step(
    user: &UserSpec,
    index: usize,
    input: &Point,
    lambda: f64,
    tie: &mut TieBreaker,
    projected: bool,
) -> Result<UserStep> {
    let guard = safeguard(user, projected, index)?;
    let mut mapping_log = Vec::new();
    let (relaxed, base) = user.mapping.evaluate_with_base(input, tie, &mut mapping_log)?;
    let objective = user.objective.subgradient(&relaxed, tie)?;
    let mut output = relaxed.axpy(-lambda, &objective.subgradient);
    if let Some(set) = guard {
        output = set.project_unchecked(&output);
    }
    Ok(UserStep {
        input: input.clone(),
        relaxed,
        base,
        mapping_log,
        objective,
        output,
    })
}

/// User `i`'s part of Algorithm 1: `P^(i)(Q_α^(i)(x_n) − λ_n g)`, `g ∈ ∂f^(i)(Q_α^(i)(x_n))`.
pub fn parallel_user_update(
    inst: &ProblemInstance,
    index: usize,
    x_n: &Point,
    lambda: f64,
    tie: &mut TieBreaker,
    projected: bool,
) -> Result<UserStep> {
    relaxed_step(&inst.users[index], index, x_n, lambda, tie, projected)
}

/// User `i`'s part of Algorithm 2, reading only its predecessor's output.
pub fn incremental_user_update(
    inst: &ProblemInstance,
    index: usize,
    from_predecessor: &Point,
    lambda: f64,
    tie: &mut TieBreaker,
    projected: bool,
) -> Result<UserStep> {
    relaxed_step(&inst.users[index], index, from_predecessor, lambda, tie, projected)
}

/// User `i`'s subgradient sweep entry of ISM: `P_Y(x^(i-1) − λ_n g)`, `g ∈ ∂f^(i)(x^(i-1))`.
pub fn ism_user_update(
    inst: &ProblemInstance,
    index: usize,
    from_predecessor: &Point,
    lambda: f64,
    tie: &mut TieBreaker,
    outer_ball: &ClosedConvexSet,
) -> Result<UserStep> {
    let user = &inst.users[index];
    let objective = user.objective.subgradient(from_predecessor, tie)?;
    let output = outer_ball.project_unchecked(&from_predecessor.axpy(-lambda, &objective.subgradient));
    Ok(UserStep {
        input: from_predecessor.clone(),
        relaxed: from_predecessor.clone(),
        base: from_predecessor.clone(),
        mapping_log: Vec::new(),
        objective,
        output,
    })
}

pub(crate) fn check_step_input(inst: &ProblemInstance, x: &Point, ties: &[TieBreaker]) -> Result<()> {
    x.check_dim(inst.dimension)?;
    if ties.len() != inst.num_users() {
        return Err(Error::InvalidInput(format!(
            "{} tie breakers for {} users",
            ties.len(),
            inst.num_users()
        )));
    }
    Ok(())
}

pub(crate) fn finite_or_diverged(p: Point, n: usize) -> Result<Point> {
    if p.is_finite() {
        Ok(p)
    } else {
        Err(Error::Divergence { n })
    }
}

pub(crate) fn check_users_finite(users: &[UserStep], n: usize) -> Result<()> {
    if users.iter().all(|u| u.output.is_finite() && u.relaxed.is_finite()) {
        Ok(())
    } else {
        Err(Error::Divergence { n })
    }
}

/// Algorithm 1. With `fan_out`, the users run on the rayon pool; the result
/// is identical to serial execution.
pub fn algorithm1_step(
    inst: &ProblemInstance,
    n: usize,
    x_n: &Point,
    sched: &StepSchedule,
    projected: bool,
    ties: &mut [TieBreaker],
    fan_out: bool,
) -> Result<IterationState> {
    check_step_input(inst, x_n, ties)?;
    let lambda = sched.lambda(n);
    let users: Vec<UserStep> = if fan_out {
        ties.par_iter_mut()
            .enumerate()
            .map(|(i, tie)| parallel_user_update(inst, i, x_n, lambda, tie, projected))
            .collect::<Result<_>>()?
    } else {
        ties.iter_mut()
            .enumerate()
            .map(|(i, tie)| parallel_user_update(inst, i, x_n, lambda, tie, projected))
            .collect::<Result<_>>()?
    };
    check_users_finite(&users, n)?;
    let outputs: Vec<Point> = users.iter().map(|u| u.output.clone()).collect();
    let next = finite_or_diverged(Point::mean(&outputs)?, n)?;
    Ok(IterationState {
        n,
        x: x_n.clone(),
        lambda,
        users,
        sweep: Vec::new(),
        next,
    })
}

/// Algorithm 2: users update in ring order and `x_{n+1} = x_n^(I)`.
pub fn algorithm2_step(
    inst: &ProblemInstance,
    n: usize,
    x_n: &Point,
    sched: &StepSchedule,
    projected: bool,
    ties: &mut [TieBreaker],
) -> Result<IterationState> {
    check_step_input(inst, x_n, ties)?;
    let lambda = sched.lambda(n);
    let mut users = Vec::with_capacity(inst.num_users());
    let mut carry = x_n.clone();
    for (i, tie) in ties.iter_mut().enumerate() {
        let step = incremental_user_update(inst, i, &carry, lambda, tie, projected)?;
        carry = step.output.clone();
        users.push(step);
    }
    check_users_finite(&users, n)?;
    let next = finite_or_diverged(carry, n)?;
    Ok(IterationState {
        n,
        x: x_n.clone(),
        lambda,
        users,
        sweep: Vec::new(),
        next,
    })
}

/// Checks that ISM applies: every base mapping must be a subgradient projection.
pub fn ism_supported(inst: &ProblemInstance) -> Result<()> {
    for (i, u) in inst.users.iter().enumerate() {
        if !matches!(u.mapping.base, QneMapping::SubgradientProjection { .. }) {
            return Err(Error::Unsupported(format!(
                "ISM needs subgradient projections, user {} has another mapping",
                i + 1
            )));
        }
    }
    Ok(())
}

/// `y^(i) = Q_sp^(i)(y^(i-1))` starting from `y^(0)`.
pub fn ism_constraint_sweep(inst: &ProblemInstance, start: &Point, ties: &mut [TieBreaker]) -> Result<Vec<Point>> {
    let mut sweep = Vec::with_capacity(inst.num_users());
    let mut y = start.clone();
    for (u, tie) in inst.users.iter().zip(ties.iter_mut()) {
        y = u.mapping.base.apply(&y, tie)?;
        sweep.push(y.clone());
    }
    Ok(sweep)
}

/// The incremental subgradient method used as a baseline.
pub fn ism_step(
    inst: &ProblemInstance,
    n: usize,
    x_n: &Point,
    sched: &StepSchedule,
    outer_ball: &ClosedConvexSet,
    ties: &mut [TieBreaker],
) -> Result<IterationState> {
    ism_supported(inst)?;
    check_step_input(inst, x_n, ties)?;
    x_n.check_dim(outer_ball.dim())?;
    let lambda = sched.lambda(n);
    let mut users = Vec::with_capacity(inst.num_users());
    let mut carry = x_n.clone();
    for (i, tie) in ties.iter_mut().enumerate() {
        let step = ism_user_update(inst, i, &carry, lambda, tie, outer_ball)?;
        carry = step.output.clone();
        users.push(step);
    }
    check_users_finite(&users, n)?;
    let sweep = ism_constraint_sweep(inst, &carry, ties)?;
    let next = finite_or_diverged(sweep.last().cloned().unwrap_or(carry), n)?;
    Ok(IterationState {
        n,
        x: x_n.clone(),
        lambda,
        users,
        sweep,
        next,
    })
}
