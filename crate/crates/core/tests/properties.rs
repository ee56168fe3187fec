use fixsub_core::geometry::relax;
use fixsub_core::metrics::metric_d;
use fixsub_core::rng::user_streams;
use fixsub_core::solvers::{algorithm1_step, algorithm2_step, incremental_user_update, ism_step};
use fixsub_core::{
    run, ClosedConvexSet, ConvexFn, Method, MonitorConfig, Network, Point, ProblemInstance, QneMapping, RunOptions,
    StepSchedule, TieBreaker, TieRule, Topology, UserSpec,
};
use proptest::prelude::*;

fn point(dim: usize, range: f64) -> impl Strategy<Value = Point> {
    prop::collection::vec(-range..range, dim).prop_map(|v| Point::new(v).unwrap())
}

/// Users with |a x_j + b| objectives and either a ball constraint (user 1)
/// or a halfspace hinge, relaxed with α.
fn sublevel_instance(dim: usize, users: usize, params: &[(f64, f64, f64)], alpha: f64) -> ProblemInstance {
    let specs = (0..users)
        .map(|i| {
            let (a, b, d) = params[i % params.len()];
            let g = if i == 0 {
                ConvexFn::norm_shift(1.0, -3.0).unwrap()
            } else {
                let c = Point::new((0..dim).map(|k| 1.0 + ((k + i) % 3) as f64).collect()).unwrap();
                let c = c.scale(1.0 / c.norm());
                ConvexFn::affine_hinge(c, d).unwrap()
            };
            UserSpec::new(
                ConvexFn::abs_affine(a, b, i % dim).unwrap(),
                relax(QneMapping::subgradient_projection(g).unwrap(), alpha).unwrap(),
                Some(ClosedConvexSet::ball(Point::zeros(dim), 6.0).unwrap()),
            )
        })
        .collect();
    ProblemInstance::new(dim, specs)
        .unwrap()
        .with_domain(ClosedConvexSet::ball(Point::zeros(dim), 6.0).unwrap())
        .unwrap()
}

fn params() -> impl Strategy<Value = Vec<(f64, f64, f64)>> {
    prop::collection::vec((0.1..5.0f64, -3.0..3.0f64, -1.0..1.0f64), 1..4)
}

fn bits(p: &Point) -> Vec<u64> {
    p.as_slice().iter().map(|v| v.to_bits()).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn projection_is_idempotent_and_inside(x in point(3, 50.0), c in point(3, 2.0), r in 0.1..4.0f64) {
        let set = ClosedConvexSet::ball(c, r).unwrap();
        let p = set.project(&x).unwrap();
        prop_assert!(set.contains(&p));
        prop_assert!(set.project(&p).unwrap().dist(&p) <= 1e-12 * (1.0 + p.norm()));
    }

    #[test]
    fn relaxation_keeps_fixed_points(y in point(3, 1.0), alpha in 0.0..0.999f64) {
        let sp = QneMapping::subgradient_projection(ConvexFn::norm_shift(1.0, -2.0).unwrap()).unwrap();
        let m = relax(sp, alpha).unwrap();
        let my = m.apply(&y, &mut TieBreaker::Zero).unwrap();
        prop_assert!(my.dist(&y) <= 1e-15 * (1.0 + y.norm()));
    }

    #[test]
    fn relaxation_is_the_convex_combination(x in point(4, 20.0), alpha in 0.0..0.999f64) {
        let set = ClosedConvexSet::halfspace(Point::basis(4, 1, 2.0), -1.0).unwrap();
        let base = QneMapping::projection(set);
        let bx = base.apply(&x, &mut TieBreaker::Zero).unwrap();
        let m = relax(base, alpha).unwrap().apply(&x, &mut TieBreaker::Zero).unwrap();
        prop_assert!(m.dist(&x.lincomb(alpha, &bx, 1.0 - alpha)) <= 1e-12 * (1.0 + x.norm()));
    }

    #[test]
    fn subgradient_projection_is_quasi_firmly_nonexpansive(
        x in point(3, 30.0), y in point(3, 0.8), c in point(3, 1.0), d in -1.0..-0.01f64
    ) {
        prop_assume!(c.norm() > 1e-3);
        let g = ConvexFn::affine_hinge(c, d).unwrap();
        prop_assume!(g.value(&y).unwrap() <= 0.0);
        let q = QneMapping::subgradient_projection(g).unwrap();
        let qx = q.apply(&x, &mut TieBreaker::Zero).unwrap();
        let rhs = x.dist_sq(&y);
        prop_assert!(qx.dist_sq(&y) + x.dist_sq(&qx) <= rhs + 1e-9 * (1.0 + rhs));
    }

    #[test]
    fn single_user_methods_agree(x0 in point(2, 5.0), p in params(), lambda in 1e-4..0.5f64) {
        let inst = sublevel_instance(2, 1, &p, 0.5);
        let sched = StepSchedule::constant(lambda).unwrap();
        let mut t1 = user_streams(TieRule::SeededUniform, 9, 1);
        let mut t2 = user_streams(TieRule::SeededUniform, 9, 1);
        let a = algorithm1_step(&inst, 3, &x0, &sched, true, &mut t1, false).unwrap();
        let b = algorithm2_step(&inst, 3, &x0, &sched, true, &mut t2).unwrap();
        prop_assert_eq!(bits(&a.next), bits(&b.next));
    }

    #[test]
    fn feasible_points_are_stationary_without_objective(y in point(3, 0.5), users in 1usize..4) {
        let mut inst = sublevel_instance(3, users, &[(1.0, 0.0, -0.9)], 0.5);
        for u in &mut inst.users {
            u.objective = ConvexFn::zero();
        }
        prop_assume!(inst.is_feasible(&y, 0.0).unwrap());
        let sched = StepSchedule::constant(0.1).unwrap();
        let outer = inst.domain.clone().unwrap();
        let mut ties = vec![TieBreaker::Zero; users];
        let steps = [
            algorithm1_step(&inst, 0, &y, &sched, true, &mut ties, false).unwrap(),
            algorithm2_step(&inst, 0, &y, &sched, true, &mut ties).unwrap(),
            ism_step(&inst, 0, &y, &sched, &outer, &mut ties).unwrap(),
        ];
        for s in steps {
            prop_assert!(s.next.dist(&y) <= 1e-12);
        }
    }

    #[test]
    fn parallel_average_and_fan_out(x0 in point(3, 5.0), p in params(), users in 1usize..6) {
        let inst = sublevel_instance(3, users, &p, 0.5);
        let sched = StepSchedule::constant(0.01).unwrap();
        let mut serial_ties = user_streams(TieRule::SeededUniform, 4, users);
        let mut pool_ties = user_streams(TieRule::SeededUniform, 4, users);
        let s = algorithm1_step(&inst, 0, &x0, &sched, true, &mut serial_ties, false).unwrap();
        let f = algorithm1_step(&inst, 0, &x0, &sched, true, &mut pool_ties, true).unwrap();
        prop_assert_eq!(bits(&s.next), bits(&f.next));
        let mut acc = vec![0.0; 3];
        for q in s.per_user() {
            for (a, v) in acc.iter_mut().zip(q.as_slice()) {
                *a += v;
            }
        }
        for (a, v) in acc.iter().zip(s.next.as_slice()) {
            let mean = a / users as f64;
            prop_assert!((mean - v).abs() <= 1e-15 * (1.0 + v.abs()));
        }
    }

    #[test]
    fn ring_users_depend_only_on_predecessor(x0 in point(3, 5.0), p in params(), users in 2usize..6) {
        let inst = sublevel_instance(3, users, &p, 0.5);
        let sched = StepSchedule::constant(0.01).unwrap();
        let mut ties = vec![TieBreaker::Positive; users];
        let s = algorithm2_step(&inst, 0, &x0, &sched, true, &mut ties).unwrap();
        for i in 0..users {
            let input = if i == 0 { &x0 } else { &s.users[i - 1].output };
            let again = incremental_user_update(&inst, i, input, s.lambda, &mut TieBreaker::Positive, true).unwrap();
            prop_assert_eq!(bits(&again.output), bits(&s.users[i].output));
        }
    }

    #[test]
    fn safeguards_contain_user_iterates(x0 in point(3, 20.0), p in params(), users in 1usize..5) {
        let inst = sublevel_instance(3, users, &p, 0.5);
        let sched = StepSchedule::constant(0.5).unwrap();
        let mut ties = user_streams(TieRule::SeededUniform, 1, users);
        for s in [
            algorithm1_step(&inst, 0, &x0, &sched, true, &mut ties, false).unwrap(),
            algorithm2_step(&inst, 0, &x0, &sched, true, &mut ties).unwrap(),
        ] {
            for (u, q) in inst.users.iter().zip(s.per_user()) {
                prop_assert!(u.safeguard.as_ref().unwrap().contains(q));
            }
        }
    }

    #[test]
    fn network_rounds_match_direct_steps(x0 in point(2, 5.0), p in params(), users in 1usize..5) {
        let inst = sublevel_instance(2, users, &p, 0.5);
        let sched = StepSchedule::power(0.1, 0.5).unwrap();
        for method in [Method::Parallel, Method::Incremental] {
            let topo = match method {
                Method::Parallel => Topology::Broadcast { users },
                _ => Topology::Ring { users },
            };
            let mut net = Network::new(topo, &x0).unwrap();
            let mut direct_ties = user_streams(TieRule::SeededUniform, 2, users);
            let mut net_ties = user_streams(TieRule::SeededUniform, 2, users);
            let mut x = x0.clone();
            for n in 0..5 {
                let direct = match method {
                    Method::Parallel => algorithm1_step(&inst, n, &x, &sched, true, &mut direct_ties, false),
                    _ => algorithm2_step(&inst, n, &x, &sched, true, &mut direct_ties),
                }
                .unwrap();
                let (sim, msgs) = net.simulate_round(&inst, n, &sched, true, &mut net_ties, false).unwrap();
                prop_assert_eq!(&sim, &direct);
                let expected = if method == Method::Parallel { users + 1 } else { users };
                prop_assert_eq!(msgs.len(), expected);
                x = direct.next;
            }
        }
    }

    #[test]
    fn d_is_zero_exactly_on_feasible_points(x in point(3, 6.0)) {
        let inst = sublevel_instance(3, 3, &[(1.0, 0.0, -0.5)], 0.5);
        let maps: Vec<QneMapping> = inst.users.iter().map(|u| u.mapping.base.clone()).collect();
        let d = metric_d(&[vec![x.clone()]], &maps).unwrap()[0];
        prop_assert!(d >= 0.0);
        prop_assert_eq!(d == 0.0, inst.is_feasible(&x, 0.0).unwrap());
    }
}

#[test]
fn runs_are_deterministic_and_shaped() {
    let inst = sublevel_instance(3, 4, &[(2.0, 1.0, -0.3), (0.5, -1.0, -0.2)], 0.5)
        .with_feasible_point(Point::zeros(3))
        .unwrap();
    let x0 = Point::new(vec![4.0, -2.0, 1.0]).unwrap();
    for method in [Method::Parallel, Method::Incremental, Method::Ism] {
        let mut opts = RunOptions::new(method, StepSchedule::constant(1e-2).unwrap(), 1);
        opts.projected = true;
        opts.seed = 11;
        let t = run(&inst, &opts, &x0).unwrap();
        assert_eq!(t.rows.len(), 2);
        opts.n_iters = 50;
        let a = serde_json::to_vec(&run(&inst, &opts, &x0).unwrap()).unwrap();
        let b = serde_json::to_vec(&run(&inst, &opts, &x0).unwrap()).unwrap();
        assert_eq!(a, b);
    }
    let opts = RunOptions::new(Method::Parallel, StepSchedule::constant(1e-2).unwrap(), 0);
    assert!(run(&inst, &opts, &x0).is_err());
}

#[test]
fn zero_objective_identity_runs_are_constant() {
    let user = UserSpec::new(ConvexFn::zero(), relax(QneMapping::Identity, 0.5).unwrap(), None);
    let inst = ProblemInstance::new(2, vec![user.clone(), user])
        .unwrap()
        .with_domain(ClosedConvexSet::ball(Point::zeros(2), 10.0).unwrap())
        .unwrap();
    let x0 = Point::new(vec![1.5, -0.25]).unwrap();
    for method in [Method::Parallel, Method::Incremental] {
        let opts = RunOptions::new(method, StepSchedule::power(1.0, 1.0).unwrap(), 20);
        let t = run(&inst, &opts, &x0).unwrap();
        assert!(t.iterates.iter().all(|x| *x == x0));
    }
}

#[test]
fn network_runs_match_direct_runs() {
    let inst = sublevel_instance(3, 5, &[(2.0, 1.0, -0.3), (0.5, -1.0, 0.2)], 0.5);
    let x0 = Point::new(vec![4.0, -2.0, 1.0]).unwrap();
    for method in [Method::Parallel, Method::Incremental] {
        let mut opts = RunOptions::new(method, StepSchedule::constant(1e-2).unwrap(), 30);
        opts.projected = true;
        let direct = run(&inst, &opts, &x0).unwrap();
        opts.monitors = MonitorConfig {
            network: true,
            fan_out: true,
            ..MonitorConfig::default()
        };
        let sim = run(&inst, &opts, &x0).unwrap();
        assert_eq!(direct.iterates, sim.iterates);
        assert_eq!(
            serde_json::to_string(&direct.rows).unwrap(),
            serde_json::to_string(&sim.rows).unwrap()
        );
        let per_round = if method == Method::Parallel { 6 } else { 5 };
        assert_eq!(sim.messages_per_round, Some(per_round));
        assert_eq!(sim.message_log.unwrap().len(), per_round * 31);
    }
}
