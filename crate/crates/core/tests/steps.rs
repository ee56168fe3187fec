//! Single steps checked against straight-line re-implementations that use
//! plain arrays and no library arithmetic.

use fixsub_core::geometry::relax;
use fixsub_core::solvers::{algorithm1_step, algorithm2_step, ism_step};
use fixsub_core::{pt, ClosedConvexSet, ConvexFn, Point, ProblemInstance, QneMapping, StepSchedule, TieBreaker, UserSpec};

const RADIUS: f64 = 2.0;
const LAMBDA: f64 = 1e-3;

fn instance() -> ProblemInstance {
    let users = (0..2)
        .map(|i| {
            let sp = QneMapping::subgradient_projection(ConvexFn::norm_shift(1.0, -RADIUS).unwrap()).unwrap();
            UserSpec::new(ConvexFn::abs_affine(1.0, 0.0, i).unwrap(), relax(sp, 0.5).unwrap(), None)
        })
        .collect();
    ProblemInstance::new(2, users).unwrap()
}

// Oracle helpers on [f64; 2].
fn norm(v: [f64; 2]) -> f64 {
    (v[0] * v[0] + v[1] * v[1]).sqrt()
}

fn q_sp(x: [f64; 2]) -> [f64; 2] {
    let r = norm(x);
    let g = r - RADIUS;
    if g > 0.0 {
        // z = x/‖x‖, ‖z‖ = 1
        [x[0] - g * x[0] / r, x[1] - g * x[1] / r]
    } else {
        x
    }
}

fn relaxed(x: [f64; 2]) -> [f64; 2] {
    let q = q_sp(x);
    [0.5 * x[0] + 0.5 * q[0], 0.5 * x[1] + 0.5 * q[1]]
}

fn sign_zero(t: f64) -> f64 {
    if t > 0.0 {
        1.0
    } else if t < 0.0 {
        -1.0
    } else {
        0.0
    }
}

fn user_update(i: usize, x: [f64; 2]) -> [f64; 2] {
    let y = relaxed(x);
    let mut out = y;
    out[i] -= LAMBDA * sign_zero(y[i]);
    out
}

fn close(p: &Point, q: [f64; 2]) -> bool {
    (p[0] - q[0]).abs() <= 1e-12 && (p[1] - q[1]).abs() <= 1e-12
}

fn zero_ties() -> Vec<TieBreaker> {
    vec![TieBreaker::Zero, TieBreaker::Zero]
}

#[test]
fn parallel_step_matches_hand_trace() {
    let inst = instance();
    let sched = StepSchedule::constant(LAMBDA).unwrap();
    for x0 in [[4.0, 0.0], [4.0, 1.0], [-0.3, 5.0], [1.0, 1.0]] {
        let s = algorithm1_step(&inst, 0, &pt![x0[0], x0[1]], &sched, false, &mut zero_ties(), false).unwrap();
        let a = user_update(0, x0);
        let b = user_update(1, x0);
        let expected = [(a[0] + b[0]) / 2.0, (a[1] + b[1]) / 2.0];
        assert!(close(&s.next, expected), "{:?} vs {expected:?}", s.next);
    }
    // The worked case: Q_α(4,0) = (3,0); user 2 sits on its kink.
    let s = algorithm1_step(&inst, 0, &pt![4, 0], &sched, false, &mut zero_ties(), false).unwrap();
    assert!(close(&s.next, [2.9995, 0.0]));
    assert!(s.users[1].objective.tie_broken);
}

#[test]
fn incremental_step_matches_hand_trace() {
    let inst = instance();
    let sched = StepSchedule::constant(LAMBDA).unwrap();
    for x0 in [[4.0, 0.0], [4.0, 1.0], [-0.3, 5.0], [1.0, 1.0]] {
        let s = algorithm2_step(&inst, 0, &pt![x0[0], x0[1]], &sched, false, &mut zero_ties()).unwrap();
        let expected = user_update(1, user_update(0, x0));
        assert!(close(&s.next, expected), "{:?} vs {expected:?}", s.next);
    }
    let s = algorithm2_step(&inst, 0, &pt![4, 0], &sched, false, &mut zero_ties()).unwrap();
    assert!(close(&s.next, [2.4995, 0.0]));
}

#[test]
fn ism_step_matches_hand_trace() {
    let inst = instance();
    let sched = StepSchedule::constant(LAMBDA).unwrap();
    let y_radius = 2.0 * RADIUS;
    let outer = ClosedConvexSet::ball(pt![0, 0], y_radius).unwrap();
    for x0 in [[4.0, 1.0], [-0.3, 5.0], [1.0, 1.0]] {
        let s = ism_step(&inst, 0, &pt![x0[0], x0[1]], &sched, &outer, &mut zero_ties()).unwrap();
        let mut x = x0;
        for i in 0..2 {
            let t = x[i];
            x[i] -= LAMBDA * sign_zero(t);
            let r = norm(x);
            if r > y_radius {
                x = [x[0] * y_radius / r, x[1] * y_radius / r];
            }
        }
        let expected = q_sp(q_sp(x));
        assert!(close(&s.next, expected), "{:?} vs {expected:?}", s.next);
    }
}

#[test]
fn projected_step_stays_in_safeguard() {
    let mut inst = instance();
    let guard = ClosedConvexSet::ball(pt![0, 0], 0.5).unwrap();
    for u in &mut inst.users {
        u.safeguard = Some(guard.clone());
    }
    let sched = StepSchedule::constant(LAMBDA).unwrap();
    let s = algorithm1_step(&inst, 0, &pt![4, 1], &sched, true, &mut zero_ties(), false).unwrap();
    for p in s.per_user() {
        assert!(guard.contains(p));
    }
}
