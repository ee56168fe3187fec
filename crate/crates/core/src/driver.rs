//! The iteration driver producing a [`RunTrace`].

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{finalize_rows, BoundConstants, MetricRow, RowContext};
use crate::network::{MessageLog, Network, Topology};
use crate::point::Point;
use crate::problem::ProblemInstance;
use crate::rng::{user_streams, TieBreaker, TieRule};
use crate::schedule::StepSchedule;
use crate::solvers::{algorithm1_step, algorithm2_step, ism_step, ism_supported, IterationState, Method};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonitorConfig {
    /// Evaluate the lemma inequalities along the run.
    pub lemma: bool,
    /// Keep full iteration states for `n < retain_states`.
    pub retain_states: usize,
    /// Route Algorithms 1 and 2 through the network simulator and keep its message log.
    pub network: bool,
    /// Run the users of Algorithm 1 on the thread pool.
    pub fan_out: bool,
    /// Record wall-clock time per iteration; off keeps traces byte-reproducible.
    pub timing: bool,
}

impl Default for MonitorConfig {
    fn default() -> Self {
        MonitorConfig {
            lemma: true,
            retain_states: 0,
            network: false,
            fan_out: false,
            timing: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOptions {
    pub method: Method,
    pub schedule: StepSchedule,
    pub n_iters: usize,
    pub projected: bool,
    pub tie_rule: TieRule,
    pub seed: u64,
    pub monitors: MonitorConfig,
}

impl RunOptions {
    pub fn new(method: Method, schedule: StepSchedule, n_iters: usize) -> Self {
        RunOptions {
            method,
            schedule,
            n_iters,
            projected: false,
            tie_rule: TieRule::default(),
            seed: 0,
            monitors: MonitorConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunTrace {
    pub options: RunOptions,
    pub x0: Point,
    /// Full states for the first `retain_states` iterations.
    pub states: Vec<IterationState>,
    /// One row per iteration `n = 0..=n_iters`.
    pub rows: Vec<MetricRow>,
    /// `x_n` for every row, then `x_{n_iters+1}`.
    pub iterates: Vec<Point>,
    pub constants: BoundConstants,
    /// Messages per round when the network simulator was used.
    pub messages_per_round: Option<usize>,
    pub message_log: Option<MessageLog>,
    /// Set when a step failed; the trace then ends at the failing iteration.
    pub failure: Option<String>,
}

impl RunTrace {
    pub fn completed(&self) -> bool {
        self.failure.is_none()
    }

    pub fn final_iterate(&self) -> &Point {
        self.iterates.last().expect("a trace holds x0")
    }
}

/// Runs `n_iters + 1` iterations (`n = 0..=n_iters`) from `x0`.
///
/// Errors in the arguments are returned directly; an error raised by a step
/// ends the run and is recorded in [`RunTrace::failure`].
pub fn run(inst: &ProblemInstance, opts: &RunOptions, x0: &Point) -> Result<RunTrace> {
    inst.validate()?;
    opts.schedule.validate()?;
    x0.check_dim(inst.dimension)?;
    if opts.n_iters == 0 {
        return Err(Error::InvalidInput("n_iters must be at least 1".into()));
    }
    if !x0.is_finite() {
        return Err(Error::InvalidInput("x0 must be finite".into()));
    }
    let outer = match opts.method {
        Method::Ism => {
            ism_supported(inst)?;
            Some(
                inst.domain
                    .clone()
                    .ok_or_else(|| Error::Config("ISM needs the instance domain ball".into()))?,
            )
        }
        _ => None,
    };
    if opts.projected && opts.method != Method::Ism && inst.users.iter().any(|u| u.safeguard.is_none()) {
        return Err(Error::Config("projected run needs a safeguard for every user".into()));
    }
    let x_ref = if opts.monitors.lemma {
        inst.comparison_point()?
    } else {
        None
    };
    let ctx = RowContext::new(inst, opts.method, x_ref.as_ref(), opts.monitors.lemma)?;
    let users = inst.num_users();
    let mut ties: Vec<TieBreaker> = user_streams(opts.tie_rule, opts.seed, users);
    let mut network = match (opts.monitors.network, opts.method) {
        (true, Method::Parallel) => Some(Network::new(Topology::Broadcast { users }, x0)?),
        (true, Method::Incremental) => Some(Network::new(Topology::Ring { users }, x0)?),
        _ => None,
    };

    let started = Instant::now();
    let mut rows = Vec::with_capacity(opts.n_iters + 1);
    let mut states = Vec::new();
    let mut iterates = vec![x0.clone()];
    let mut x = x0.clone();
    let mut failure = None;
    for n in 0..=opts.n_iters {
        let step = match (&mut network, opts.method) {
            (Some(net), _) => net
                .simulate_round(inst, n, &opts.schedule, opts.projected, &mut ties, opts.monitors.fan_out)
                .map(|(s, _)| s),
            (None, Method::Parallel) => algorithm1_step(
                inst,
                n,
                &x,
                &opts.schedule,
                opts.projected,
                &mut ties,
                opts.monitors.fan_out,
            ),
            (None, Method::Incremental) => algorithm2_step(inst, n, &x, &opts.schedule, opts.projected, &mut ties),
            (None, Method::Ism) => ism_step(
                inst,
                n,
                &x,
                &opts.schedule,
                outer.as_ref().expect("checked above"),
                &mut ties,
            ),
        };
        let state = match step {
            Ok(s) => s,
            Err(e) => {
                failure = Some(e.to_string());
                break;
            }
        };
        let elapsed = if opts.monitors.timing {
            started.elapsed().as_nanos() as u64
        } else {
            0
        };
        rows.push(ctx.row(&state, elapsed)?);
        x = state.next.clone();
        iterates.push(x.clone());
        if n < opts.monitors.retain_states {
            states.push(state);
        }
    }

    let alphas: Vec<f64> = inst.users.iter().map(|u| u.alpha()).collect();
    let constants = BoundConstants::from_rows(opts.method, &rows, &alphas, opts.schedule.sum_sq_infinite());
    finalize_rows(opts.method, users, &mut rows, &constants);
    let messages_per_round = network
        .as_ref()
        .map(|net| net.log.round(0).count());
    Ok(RunTrace {
        options: opts.clone(),
        x0: x0.clone(),
        states,
        rows,
        iterates,
        constants,
        messages_per_round,
        message_log: network.map(|n| n.log),
        failure,
    })
}
