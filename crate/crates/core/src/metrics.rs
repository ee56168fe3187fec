//! Performance measures, boundedness constants, lemma monitors and rate-bound checks.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functions::ConvexFn;
use crate::geometry::QneMapping;
use crate::point::Point;
use crate::problem::{ProblemInstance, XDistance};
use crate::rng::TieBreaker;
use crate::solvers::{IterationState, Method};

/// Relative tolerance of every monitored inequality.
pub const MONITOR_TOL: f64 = 1e-9;

/// The pieces of the lemma inequalities that do not depend on the constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LemmaTerms {
    /// `‖x_{n+1} − x‖²`
    pub lhs: f64,
    /// `‖x_n − x‖²`
    pub base: f64,
    /// `Σ_i α(1−α)‖u_i − Q^(i)(u_i)‖²` with `u_i` the user's input point.
    pub resid_sq: f64,
    /// `Σ_i ⟨u_i − x, g_i⟩`
    pub inner: f64,
    /// `f(x) − f(x_n)`
    pub f_gap: f64,
    /// `Σ_i ‖u_i − Q_α^(i)(u_i)‖`
    pub s1: f64,
    /// `Σ_i ‖Q_α^(i)(u_i) − x_n‖`
    pub s2: f64,
}

/// Lemma terms for one iteration against the comparison point `x_ref` with `f(x_ref) = f_ref`.
///
/// `x_next` is passed separately so that a stored (possibly corrupted)
/// successor iterate can be checked.
pub fn lemma_terms(
    inst: &ProblemInstance,
    state: &IterationState,
    x_next: &Point,
    x_ref: &Point,
    f_ref: f64,
) -> Result<LemmaTerms> {
    x_next.check_dim(inst.dimension)?;
    x_ref.check_dim(inst.dimension)?;
    if state.users.len() != inst.num_users() {
        return Err(Error::InvalidInput("state does not match the instance".into()));
    }
    let mut t = LemmaTerms {
        lhs: x_next.dist_sq(x_ref),
        base: state.x.dist_sq(x_ref),
        resid_sq: 0.0,
        inner: 0.0,
        f_gap: f_ref - inst.objective(&state.x)?,
        s1: 0.0,
        s2: 0.0,
    };
    for (u, spec) in state.users.iter().zip(&inst.users) {
        let alpha = spec.alpha();
        t.resid_sq += alpha * (1.0 - alpha) * u.input.dist_sq(&u.base);
        t.inner += u.input.sub(x_ref).dot(&u.objective.subgradient);
        t.s1 += u.input.dist(&u.relaxed);
        t.s2 += u.relaxed.dist(&state.x);
    }
    Ok(t)
}

/// Slack (right side minus left side) of parts (i) and (ii).
///
/// `c1` is `M_1` (resp. `N_1`) and `c2` is `M_2` (resp. `N_2`).
pub fn lemma_slacks(method: Method, users: usize, lambda: f64, t: &LemmaTerms, c1: f64, c2: f64) -> (f64, f64) {
    let i = users as f64;
    match method {
        Method::Parallel => {
            let rhs1 = t.base - 2.0 / i * t.resid_sq + 2.0 * c1 * lambda * lambda - 2.0 * lambda / i * t.inner;
            let rhs2 = t.base
                + 2.0 * c1 * lambda * lambda
                + 2.0 * lambda / i * t.f_gap
                + 2.0 * lambda / i * (c1.sqrt() + c2) * t.s1;
            (rhs1 - t.lhs, rhs2 - t.lhs)
        }
        Method::Incremental => {
            let rhs1 = t.base - 2.0 * t.resid_sq + 2.0 * i * c1 * lambda * lambda - 2.0 * lambda * t.inner;
            let rhs2 = t.base
                + 2.0 * lambda * t.f_gap
                + 2.0 * i * c1 * lambda * lambda
                + 2.0 * lambda * (c1.sqrt() * t.s1 + c2 * t.s2);
            (rhs1 - t.lhs, rhs2 - t.lhs)
        }
        Method::Ism => (f64::NAN, f64::NAN),
    }
}

/// Tolerance for a slack: `MONITOR_TOL · (1 + ‖x_n − x_ref‖²)`.
pub fn slack_tolerance(t: &LemmaTerms) -> f64 {
    MONITOR_TOL * (1.0 + t.base)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LemmaVerdict {
    pub slack_i: f64,
    pub slack_ii: f64,
    pub tol: f64,
}

impl LemmaVerdict {
    pub fn pass_i(&self) -> bool {
        self.slack_i >= -self.tol
    }

    pub fn pass_ii(&self) -> bool {
        self.slack_ii >= -self.tol
    }

    pub fn pass(&self) -> bool {
        self.pass_i() && self.pass_ii()
    }
}

fn check_lemma(
    method: Method,
    inst: &ProblemInstance,
    prev: &IterationState,
    next: &IterationState,
    c1: f64,
    c2: f64,
    x_ref: &Point,
) -> Result<LemmaVerdict> {
    if !inst.is_feasible(x_ref, crate::problem::FEASIBILITY_TOL)? {
        return Err(Error::Precondition("comparison point is not a common fixed point".into()));
    }
    if next.n != prev.n + 1 {
        return Err(Error::InvalidInput("states are not consecutive".into()));
    }
    let f_ref = inst.objective(x_ref)?;
    let t = lemma_terms(inst, prev, &next.x, x_ref, f_ref)?;
    let (slack_i, slack_ii) = lemma_slacks(method, inst.num_users(), prev.lambda, &t, c1, c2);
    Ok(LemmaVerdict {
        slack_i,
        slack_ii,
        tol: slack_tolerance(&t),
    })
}

/// Lemma (i)/(ii) for Algorithm 1 between two consecutive stored states.
pub fn check_lemma_parallel(
    inst: &ProblemInstance,
    prev: &IterationState,
    next: &IterationState,
    constants: &BoundConstants,
    x_ref: &Point,
) -> Result<LemmaVerdict> {
    check_lemma(Method::Parallel, inst, prev, next, constants.m1, constants.m2, x_ref)
}

/// Lemma (i)/(ii) for Algorithm 2 between two consecutive stored states.
pub fn check_lemma_incremental(
    inst: &ProblemInstance,
    prev: &IterationState,
    next: &IterationState,
    constants: &BoundConstants,
    x_ref: &Point,
) -> Result<LemmaVerdict> {
    check_lemma(Method::Incremental, inst, prev, next, constants.n1, constants.n2, x_ref)
}

/// Per-iteration measurements. Columns that do not apply are NaN.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub n: usize,
    pub lambda: f64,
    pub elapsed_ns: u64,
    /// `Σ_i ‖x_n − Q^(i)(x_n)‖`
    pub d_contrib: f64,
    /// `Σ_i f^(i)(x_n^(i))`
    pub f_contrib: f64,
    /// `f(x_n)`
    pub f_x: f64,
    /// `d(x_n, X)`
    pub dist_x: f64,
    /// `max_i ‖g_n^(i)‖²` over the subgradients used in the step.
    pub g_sq_max: f64,
    /// `max_i ‖g‖` for `g ∈ ∂f^(i)(x_n)`.
    pub g_at_x_max: f64,
    /// `‖x_n − Q^(i)(x_n)‖`
    pub residuals: Vec<f64>,
    /// `‖u_i − Q^(i)(u_i)‖` at each user's input point.
    pub input_residuals: Vec<f64>,
    /// `d(u_i, X)`
    pub input_dists: Vec<f64>,
    pub lemma: Option<LemmaTerms>,
    pub lemma1_slack: f64,
    pub lemma2_slack: f64,
}

/// Everything needed to turn a state into a [`MetricRow`].
pub struct RowContext<'a> {
    pub inst: &'a ProblemInstance,
    pub method: Method,
    pub x_ref: Option<&'a Point>,
    pub f_ref: f64,
    pub x_distance: Option<XDistance<'a>>,
    pub lemma: bool,
}

impl<'a> RowContext<'a> {
    pub fn new(inst: &'a ProblemInstance, method: Method, x_ref: Option<&'a Point>, lemma: bool) -> Result<Self> {
        let f_ref = match x_ref {
            Some(x) => inst.objective(x)?,
            None => f64::NAN,
        };
        let monitored = lemma && x_ref.is_some() && method != Method::Ism && inst.quasi_firm();
        Ok(RowContext {
            inst,
            method,
            x_ref,
            f_ref,
            x_distance: inst.x_distance(),
            lemma: monitored,
        })
    }

    /// Measurements of `state`; slacks are filled in later by [`finalize_rows`].
    pub fn row(&self, state: &IterationState, elapsed_ns: u64) -> Result<MetricRow> {
        let inst = self.inst;
        let mut tie = TieBreaker::Positive;
        let residuals: Vec<f64> = match self.method {
            Method::Parallel => state.users.iter().map(|u| u.input.dist(&u.base)).collect(),
            _ => inst.residuals(&state.x)?,
        };
        let input_residuals: Vec<f64> = match self.method {
            Method::Ism => state
                .users
                .iter()
                .zip(&inst.users)
                .map(|(u, spec)| spec.mapping.base.residual(&u.input, &mut tie))
                .collect::<Result<_>>()?,
            _ => state.users.iter().map(|u| u.input.dist(&u.base)).collect(),
        };
        let dist = |p: &Point| self.x_distance.as_ref().map_or(f64::NAN, |d| d.distance(p));
        let mut f_contrib = 0.0;
        let mut g_sq_max: f64 = 0.0;
        let mut g_at_x_max: f64 = 0.0;
        for (u, spec) in state.users.iter().zip(&inst.users) {
            f_contrib += spec.objective.value_unchecked(&u.output);
            g_sq_max = g_sq_max.max(u.objective.subgradient.norm_sq());
            let g = spec.objective.subgradient(&state.x, &mut tie)?;
            g_at_x_max = g_at_x_max.max(g.subgradient.norm());
        }
        let lemma = match (self.lemma, self.x_ref) {
            (true, Some(x_ref)) => Some(lemma_terms(inst, state, &state.next, x_ref, self.f_ref)?),
            _ => None,
        };
        Ok(MetricRow {
            n: state.n,
            lambda: state.lambda,
            elapsed_ns,
            d_contrib: residuals.iter().sum(),
            f_contrib,
            f_x: inst.objective(&state.x)?,
            dist_x: dist(&state.x),
            g_sq_max,
            g_at_x_max,
            input_dists: state.users.iter().map(|u| dist(&u.input)).collect(),
            residuals,
            input_residuals,
            lemma,
            lemma1_slack: f64::NAN,
            lemma2_slack: f64::NAN,
        })
    }
}

/// Constants of the boundedness assumptions, estimated as suprema along a trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundConstants {
    pub m1: f64,
    pub m2: f64,
    pub n1: f64,
    pub n2: f64,
    pub m3: f64,
    pub n3: f64,
    pub m_lambda: f64,
    pub n_lambda: f64,
    pub beta: Vec<f64>,
}

impl BoundConstants {
    /// Suprema over `rows`. `m3`, `n3` need `Σ λ_n² < ∞` and are NaN otherwise.
    pub fn from_rows(method: Method, rows: &[MetricRow], alphas: &[f64], sum_sq_inf: Option<f64>) -> Self {
        let users = alphas.len();
        let i = users as f64;
        let c1 = rows.iter().map(|r| r.g_sq_max).fold(0.0, f64::max);
        let c2 = rows.iter().map(|r| r.g_at_x_max).fold(0.0, f64::max);
        let beta = estimate_beta(method, rows, alphas);
        let d0_sq = rows.first().map_or(f64::NAN, |r| r.dist_x * r.dist_x);
        let inner = |r: &MetricRow| r.lemma.map_or(f64::NAN, |t| t.inner.abs());
        let sup = |f: &dyn Fn(&MetricRow) -> f64| rows.iter().map(f).fold(f64::NAN, f64::max);
        let c3 = |growth: f64| -> f64 {
            let Some(s) = sum_sq_inf else { return f64::NAN };
            alphas
                .iter()
                .zip(&beta)
                .map(|(a, b)| (d0_sq + growth * s) / rate_denominator(*a, *b))
                .fold(f64::NAN, f64::max)
        };
        match method {
            Method::Incremental => BoundConstants {
                m1: f64::NAN,
                m2: f64::NAN,
                n1: c1,
                n2: c2,
                m3: f64::NAN,
                n3: c3(3.0 * i * c1),
                m_lambda: f64::NAN,
                n_lambda: sup(&|r| i * c1 * r.lambda + inner(r)),
                beta,
            },
            _ => BoundConstants {
                m1: c1,
                m2: c2,
                n1: f64::NAN,
                n2: f64::NAN,
                m3: c3(3.0 * c1),
                n3: f64::NAN,
                m_lambda: sup(&|r| c1 * r.lambda + inner(r) / i),
                n_lambda: f64::NAN,
                beta,
            },
        }
    }

    /// `(M_1, M_2)` or `(N_1, N_2)` depending on the method.
    pub fn pair(&self, method: Method) -> (f64, f64) {
        match method {
            Method::Incremental => (self.n1, self.n2),
            _ => (self.m1, self.m2),
        }
    }
}

/// `(1 − α){(β² + 2)α − β²}`
pub fn rate_denominator(alpha: f64, beta: f64) -> f64 {
    let b2 = beta * beta;
    (1.0 - alpha) * ((b2 + 2.0) * alpha - b2)
}

/// Running maximum of `d(u, X) / ‖u − Q_α^(i)(u)‖` per user. Points of `X`
/// (zero distance) impose nothing; a positive distance with a zero residual
/// makes the estimate infinite.
pub fn estimate_beta(method: Method, rows: &[MetricRow], alphas: &[f64]) -> Vec<f64> {
    let mut beta = vec![0.0_f64; alphas.len()];
    for r in rows {
        for (i, a) in alphas.iter().enumerate() {
            let (d, res) = match method {
                Method::Parallel => (r.dist_x, r.residuals.get(i).copied().unwrap_or(f64::NAN)),
                _ => (
                    r.input_dists.get(i).copied().unwrap_or(f64::NAN),
                    r.input_residuals.get(i).copied().unwrap_or(f64::NAN),
                ),
            };
            let relaxed = (1.0 - a) * res;
            let ratio = if d.is_nan() || res.is_nan() {
                f64::NAN
            } else if d == 0.0 {
                0.0
            } else if relaxed == 0.0 {
                f64::INFINITY
            } else {
                d / relaxed
            };
            beta[i] = if ratio.is_nan() { f64::NAN } else { beta[i].max(ratio) };
        }
    }
    beta
}

/// Running suprema `(c1_n, c2_n)` after each row.
pub fn running_suprema(rows: &[MetricRow]) -> Vec<(f64, f64)> {
    let mut c1 = 0.0_f64;
    let mut c2 = 0.0_f64;
    rows.iter()
        .map(|r| {
            c1 = c1.max(r.g_sq_max);
            c2 = c2.max(r.g_at_x_max);
            (c1, c2)
        })
        .collect()
}

/// Fills the lemma slacks of every row using the final suprema of the trace.
pub fn finalize_rows(method: Method, users: usize, rows: &mut [MetricRow], constants: &BoundConstants) {
    let (c1, c2) = constants.pair(method);
    for r in rows.iter_mut() {
        if let Some(t) = &r.lemma {
            let (s1, s2) = lemma_slacks(method, users, r.lambda, t, c1, c2);
            r.lemma1_slack = s1;
            r.lemma2_slack = s2;
        }
    }
}

/// Rows whose lemma slacks fall below tolerance.
pub fn lemma_failures(rows: &[MetricRow]) -> Vec<usize> {
    rows.iter()
        .filter(|r| {
            r.lemma.is_some_and(|t| {
                let tol = slack_tolerance(&t);
                r.lemma1_slack < -tol || r.lemma2_slack < -tol
            })
        })
        .map(|r| r.n)
        .collect()
}

/// `(1/S) Σ_s series_s[n]`, summed in seed order.
pub fn mean_over_seeds(series: &[Vec<f64>]) -> Result<Vec<f64>> {
    let first = series
        .first()
        .ok_or_else(|| Error::InvalidInput("no traces to aggregate".into()))?;
    if series.iter().any(|s| s.len() != first.len()) {
        return Err(Error::InvalidInput("traces have different lengths".into()));
    }
    let inv = 1.0 / series.len() as f64;
    Ok((0..first.len())
        .map(|n| series.iter().map(|s| s[n]).sum::<f64>() * inv)
        .collect())
}

/// `D_n = (1/S) Σ_s Σ_i ‖x_n(s) − Q^(i)(x_n(s))‖` from stored iterates.
pub fn metric_d(iterates: &[Vec<Point>], mappings: &[QneMapping]) -> Result<Vec<f64>> {
    let mut tie = TieBreaker::Positive;
    let per_seed: Vec<Vec<f64>> = iterates
        .iter()
        .map(|xs| {
            xs.iter()
                .map(|x| {
                    let mut total = 0.0;
                    for m in mappings {
                        total += m.residual(x, &mut tie)?;
                    }
                    Ok(total)
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;
    mean_over_seeds(&per_seed)
}

/// `F_n = (1/S) Σ_s Σ_i f^(i)(x_n^(i)(s))`; `per_user[s][n][i]` is `x_n^(i)(s)`.
pub fn metric_f(per_user: &[Vec<Vec<Point>>], objectives: &[ConvexFn]) -> Result<Vec<f64>> {
    let per_seed: Vec<Vec<f64>> = per_user
        .iter()
        .map(|run| {
            run.iter()
                .map(|points| crate::functions::total_value(objectives, points))
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;
    mean_over_seeds(&per_seed)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateBound {
    Cor1,
    Cor2,
    Cor3,
    Cor4,
}

impl RateBound {
    pub fn method(self) -> Method {
        match self {
            RateBound::Cor1 | RateBound::Cor2 => Method::Parallel,
            RateBound::Cor3 | RateBound::Cor4 => Method::Incremental,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            RateBound::Cor1 => "cor1",
            RateBound::Cor2 => "cor2",
            RateBound::Cor3 => "cor3",
            RateBound::Cor4 => "cor4",
        }
    }
}

impl std::str::FromStr for RateBound {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cor1" => Ok(RateBound::Cor1),
            "cor2" => Ok(RateBound::Cor2),
            "cor3" => Ok(RateBound::Cor3),
            "cor4" => Ok(RateBound::Cor4),
            other => Err(Error::Config(format!("unknown bound {other:?}, expected cor1..cor4"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    PreconditionUnmet,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
            Verdict::PreconditionUnmet => "precondition_unmet",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateRow {
    pub n: usize,
    pub which: String,
    pub bound: f64,
    pub observed: f64,
    pub verdict: Verdict,
}

/// What the rate checker needs besides the rows.
#[derive(Debug, Clone, PartialEq)]
pub struct RateContext {
    pub alphas: Vec<f64>,
    pub f_star: Option<f64>,
    /// `Σ_{n≥0} λ_n²`, `None` when it diverges.
    pub sum_sq_inf: Option<f64>,
    /// Whether every `Q^(i)` is the identity; `None` when unknown.
    pub identity_mappings: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RateReport {
    pub rows: Vec<RateRow>,
}

impl RateReport {
    /// Smallest `k` such that every checked row of `which` with `n ≥ k` passes.
    /// `None` if the last checked row fails or nothing was checked.
    pub fn first_satisfied(&self, which: &str) -> Option<usize> {
        let checked: Vec<&RateRow> = self
            .rows
            .iter()
            .filter(|r| r.which == which && r.verdict != Verdict::PreconditionUnmet)
            .collect();
        let last = checked.last()?;
        if last.verdict == Verdict::Fail {
            return None;
        }
        match checked.iter().rposition(|r| r.verdict == Verdict::Fail) {
            Some(k) => Some(checked[k + 1].n),
            None => Some(checked[0].n),
        }
    }

    pub fn kinds(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for r in &self.rows {
            if !out.contains(&r.which) {
                out.push(r.which.clone());
            }
        }
        out
    }

    /// Fraction of rows of `which` whose preconditions held.
    pub fn precondition_rate(&self, which: &str) -> f64 {
        let rows: Vec<&RateRow> = self.rows.iter().filter(|r| r.which == which).collect();
        if rows.is_empty() {
            return 0.0;
        }
        rows.iter().filter(|r| r.verdict != Verdict::PreconditionUnmet).count() as f64 / rows.len() as f64
    }

    pub fn failures(&self) -> usize {
        self.rows.iter().filter(|r| r.verdict == Verdict::Fail).count()
    }
}

fn verdict(observed: f64, bound: f64) -> Verdict {
    if observed <= bound + MONITOR_TOL * (1.0 + bound.abs()) {
        Verdict::Pass
    } else {
        Verdict::Fail
    }
}

fn monotone_step(prev: f64, cur: f64) -> bool {
    cur <= prev + 1e-14 * prev.abs()
}

/// Checks a rate bound along a trace. Traces with fewer than two rows give an empty report.
pub fn check_rate_bounds(rows: &[MetricRow], ctx: &RateContext, which: RateBound) -> Result<RateReport> {
    if rows.len() < 2 {
        return Ok(RateReport::default());
    }
    let f_star = ctx
        .f_star
        .ok_or_else(|| Error::Precondition("rate bounds need a reference value f*".into()))?;
    let users = ctx.alphas.len();
    if rows.iter().any(|r| r.residuals.len() != users || r.input_residuals.len() != users) {
        return Err(Error::InvalidInput("trace rows do not match the number of users".into()));
    }
    let i = users as f64;
    let method = which.method();
    let alphas: Vec<f64> = ctx.alphas.clone();
    let constants = BoundConstants::from_rows(method, rows, &alphas, ctx.sum_sq_inf);
    let (c1, c2) = constants.pair(method);
    let mut report = RateReport::default();
    match which {
        RateBound::Cor1 | RateBound::Cor3 => {
            if ctx.identity_mappings == Some(false) {
                return Err(Error::Unsupported(format!("{} needs identity mappings", which.name())));
            }
            let coef = match which {
                RateBound::Cor1 => i * c1,
                _ => i * ((i - 1.0) / 2.0 * c1.sqrt() * c2 + c1),
            };
            for r in rows {
                let bound = coef * r.lambda;
                let observed = r.f_x - f_star;
                report.rows.push(RateRow {
                    n: r.n,
                    which: which.name().into(),
                    bound,
                    observed,
                    verdict: verdict(observed, bound),
                });
            }
        }
        RateBound::Cor2 | RateBound::Cor4 => {
            if rows.iter().any(|r| r.dist_x.is_nan()) {
                return Err(Error::Unsupported(
                    "residual-rate bounds need an exact distance to the fixed point set".into(),
                ));
            }
            let d0_sq = rows[0].dist_x * rows[0].dist_x;
            let beta_ok = alphas
                .iter()
                .zip(&constants.beta)
                .all(|(a, b)| b.is_finite() && *a > b * b / (b * b + 2.0));
            let incremental = which == RateBound::Cor4;
            let series = |r: &MetricRow| if incremental { r.input_residuals.clone() } else { r.residuals.clone() };
            let growth = if incremental { 3.0 * i * c1 } else { 3.0 * c1 };
            let leading = if incremental { 1.0 } else { i };
            let m3 = if incremental { constants.n3 } else { constants.m3 };
            let res_name = format!("{}_residual", which.name());
            let gap_name = format!("{}_gap", which.name());
            let mut monotone = true;
            let mut sum_sq = 0.0;
            let mut prev: Option<Vec<f64>> = None;
            for r in rows {
                sum_sq += r.lambda * r.lambda;
                let cur = series(r);
                if let Some(p) = &prev {
                    monotone &= p.iter().zip(&cur).all(|(a, b)| monotone_step(*a, *b));
                }
                let ok = monotone && beta_ok && ctx.sum_sq_inf.is_some();
                let n1 = (r.n + 1) as f64;
                // Worst user for the residual bound.
                let mut worst: Option<(f64, f64)> = None;
                for ((res, a), b) in cur.iter().zip(&alphas).zip(&constants.beta) {
                    let bound = leading * (d0_sq + growth * sum_sq) / (rate_denominator(*a, *b) * n1);
                    let observed = res * res;
                    if worst.is_none_or(|(wo, wb)| observed - bound > wo - wb) {
                        worst = Some((observed, bound));
                    }
                }
                let (observed, bound) = worst.unwrap_or((f64::NAN, f64::NAN));
                report.rows.push(RateRow {
                    n: r.n,
                    which: res_name.clone(),
                    bound,
                    observed,
                    verdict: if ok { verdict(observed, bound) } else { Verdict::PreconditionUnmet },
                });
                let gap_bound = if incremental {
                    i * ((c1.sqrt() + (i + 1.0) * c2 / 2.0) * (m3 / n1).sqrt()
                        + ((i - 1.0) * c1.sqrt() * c2 / 2.0 + c1) * r.lambda)
                } else {
                    i * ((c1.sqrt() + c2) * (i * m3 / n1).sqrt() + c1 * r.lambda)
                };
                let gap = r.f_x - f_star;
                report.rows.push(RateRow {
                    n: r.n,
                    which: gap_name.clone(),
                    bound: gap_bound,
                    observed: gap,
                    verdict: if ok { verdict(gap, gap_bound) } else { Verdict::PreconditionUnmet },
                });
                prev = Some(cur);
            }
        }
    }
    Ok(report)
}
