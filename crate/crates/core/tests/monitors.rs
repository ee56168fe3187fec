use fixsub_core::geometry::relax;
use fixsub_core::metrics::{check_lemma_incremental, check_lemma_parallel, lemma_failures, running_suprema};
use fixsub_core::{
    run, BoundConstants, ClosedConvexSet, ConvexFn, Method, MonitorConfig, Point, ProblemInstance, QneMapping,
    RateBound, RunOptions, StepSchedule, UserSpec, Verdict,
};
use fixsub_core::metrics::{check_rate_bounds, RateContext};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random sublevel-set instance in the style of the experiments: user 1 has a
/// ball constraint, the rest unit-normal halfspace hinges through the origin
/// neighbourhood.
fn instance(users: usize, seed: u64) -> ProblemInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let c = 4.0_f64;
    let r = c.powf(1.0 / users as f64);
    let y = ClosedConvexSet::ball(Point::zeros(users), 2.0 * c).unwrap();
    let specs = (0..users)
        .map(|i| {
            let a = rng.random_range(1e-3..=100.0);
            let b = rng.random_range(-100.0..=100.0);
            let g = if i == 0 {
                ConvexFn::norm_shift(1.0, -2.0 * c).unwrap()
            } else {
                let v: Vec<f64> = (0..users).map(|_| rng.random_range(0.0..1.0)).collect();
                let v = Point::new(v).unwrap();
                let v = v.scale(1.0 / v.norm());
                ConvexFn::affine_hinge(v, -rng.random_range(0.0..r)).unwrap()
            };
            UserSpec::new(
                ConvexFn::abs_affine(a, b, i).unwrap(),
                relax(QneMapping::subgradient_projection(g).unwrap(), 0.5).unwrap(),
                Some(y.clone()),
            )
        })
        .collect();
    ProblemInstance::new(users, specs)
        .unwrap()
        .with_domain(y)
        .unwrap()
        .with_feasible_point(Point::zeros(users))
        .unwrap()
}

fn x0(users: usize, seed: u64) -> Point {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    Point::new((0..users).map(|_| rng.random_range(-4.0..4.0)).collect()).unwrap()
}

#[test]
fn degenerate_instance_slack_is_the_step_term() {
    let user = UserSpec::new(ConvexFn::zero(), relax(QneMapping::Identity, 0.5).unwrap(), None);
    let inst = ProblemInstance::new(2, vec![user.clone(), user])
        .unwrap()
        .with_feasible_point(Point::new(vec![1.0, 1.0]).unwrap())
        .unwrap();
    for method in [Method::Parallel, Method::Incremental] {
        let t = run(&inst, &RunOptions::new(method, StepSchedule::constant(0.1).unwrap(), 5), &x0(2, 1)).unwrap();
        for r in &t.rows {
            assert!(r.lemma.is_some());
            assert_eq!(r.lemma1_slack, 0.0);
            assert_eq!(r.lemma2_slack, 0.0);
        }
    }
}

#[test]
fn clean_runs_satisfy_both_lemma_parts() {
    for users in [2, 8] {
        for seed in 0..5 {
            let inst = instance(users, seed);
            for method in [Method::Parallel, Method::Incremental] {
                let mut opts = RunOptions::new(method, StepSchedule::constant(1e-3).unwrap(), 100);
                opts.projected = true;
                opts.seed = seed;
                let t = run(&inst, &opts, &x0(users, seed)).unwrap();
                assert!(t.completed());
                assert!(t.rows.iter().all(|r| r.lemma.is_some()));
                assert!(lemma_failures(&t.rows).is_empty(), "I={users} seed={seed} {method:?}");
            }
        }
    }
}

#[test]
fn corrupted_iterate_is_caught() {
    let inst = instance(2, 7);
    let x_ref = Point::zeros(2);
    for method in [Method::Parallel, Method::Incremental] {
        let mut opts = RunOptions::new(method, StepSchedule::constant(1e-3).unwrap(), 60);
        opts.projected = true;
        opts.monitors = MonitorConfig {
            retain_states: 61,
            ..MonitorConfig::default()
        };
        let t = run(&inst, &opts, &x0(2, 7)).unwrap();
        let check = |prev, next, c: &BoundConstants| match method {
            Method::Parallel => check_lemma_parallel(&inst, prev, next, c, &x_ref),
            _ => check_lemma_incremental(&inst, prev, next, c, &x_ref),
        };
        let (prev, next) = (&t.states[50], &t.states[51]);
        assert!(check(prev, next, &t.constants).unwrap().pass());
        let mut bad = next.clone();
        let k = (0..2).find(|&k| bad.x[k] >= x_ref[k]).unwrap_or(0);
        let sign = if bad.x[k] >= x_ref[k] { 1.0 } else { -1.0 };
        bad.x.coords_mut()[k] += sign;
        assert!(!check(prev, &bad, &t.constants).unwrap().pass());

        let far = Point::new(vec![100.0, 100.0]).unwrap();
        assert!(match method {
            Method::Parallel => check_lemma_parallel(&inst, prev, next, &t.constants, &far),
            _ => check_lemma_incremental(&inst, prev, next, &t.constants, &far),
        }
        .is_err());
    }
}

#[test]
fn constants_are_running_suprema() {
    let inst = instance(8, 3);
    let t = run(
        &inst,
        &RunOptions::new(Method::Incremental, StepSchedule::power(1e-2, 0.5).unwrap(), 200),
        &x0(8, 3),
    )
    .unwrap();
    let s = running_suprema(&t.rows);
    assert!(s.windows(2).all(|w| w[1].0 >= w[0].0 && w[1].1 >= w[0].1));
    assert_eq!(s.last().unwrap().0, t.constants.n1);
    assert!(t.constants.n1 >= 0.0 && t.constants.n2 >= 0.0);
    assert!(t.constants.m1.is_nan());
}

#[test]
fn rate_checker_contracts() {
    let inst = instance(2, 1);
    let t = run(
        &inst,
        &RunOptions::new(Method::Parallel, StepSchedule::power(1e-3, 1.0).unwrap(), 20),
        &x0(2, 1),
    )
    .unwrap();
    let mut ctx = RateContext {
        alphas: vec![0.5, 0.5],
        f_star: None,
        sum_sq_inf: StepSchedule::power(1e-3, 1.0).unwrap().sum_sq_infinite(),
        identity_mappings: Some(false),
    };
    assert!(check_rate_bounds(&t.rows, &ctx, RateBound::Cor2).is_err());
    ctx.f_star = Some(0.0);
    assert!(check_rate_bounds(&t.rows, &ctx, RateBound::Cor1).is_err());
    // No exact distance to X for a two-constraint instance.
    assert!(check_rate_bounds(&t.rows, &ctx, RateBound::Cor2).is_err());
    assert!(check_rate_bounds(&t.rows[..1], &ctx, RateBound::Cor2).unwrap().rows.is_empty());
}

#[test]
fn residual_bound_on_single_ball_reflection() {
    let x = ClosedConvexSet::ball(Point::zeros(2), 1.0).unwrap();
    let users: Vec<UserSpec> = (0..2)
        .map(|_| {
            UserSpec::new(
                ConvexFn::quadratic(1.0, Point::new(vec![-3.0, -1.0]).unwrap()).unwrap(),
                relax(QneMapping::Reflection { set: x.clone() }, 0.5).unwrap(),
                None,
            )
        })
        .collect();
    let inst = ProblemInstance::new(2, users).unwrap();
    let sched = StepSchedule::power(1e-3, 1.0).unwrap();
    let mut opts = RunOptions::new(Method::Parallel, sched.clone(), 300);
    opts.monitors.lemma = false;
    let t = run(&inst, &opts, &Point::new(vec![3.0, 1.2]).unwrap()).unwrap();
    let ctx = RateContext {
        alphas: vec![0.5, 0.5],
        f_star: Some(inst.objective(&Point::new(vec![3.0, 1.0]).unwrap().scale(1.0 / 10f64.sqrt())).unwrap()),
        sum_sq_inf: sched.sum_sq_infinite(),
        identity_mappings: Some(false),
    };
    let rep = check_rate_bounds(&t.rows, &ctx, RateBound::Cor2).unwrap();
    assert!(rep
        .rows
        .iter()
        .filter(|r| r.which == "cor2_residual")
        .all(|r| r.verdict != Verdict::Fail));
}
