//! Randomized property suites for mappings and function oracles.
//!
//! Each suite returns a [`CheckReport`] per property so callers (tests, the
//! `verify` command) can print or assert on them.

use rand::Rng;
use serde::Serialize;

use crate::error::Result;
use crate::functions::ConvexFn;
use crate::geometry::{relax, ClosedConvexSet, QneMapping};
use crate::point::Point;
use crate::rng::{sample_ball, sample_sphere, stream, Stream, TieBreaker};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckReport {
    pub name: String,
    pub trials: usize,
    pub failures: usize,
    /// Largest violation observed (0 when every trial passed).
    pub worst: f64,
}

impl CheckReport {
    fn new(name: impl Into<String>) -> Self {
        CheckReport {
            name: name.into(),
            trials: 0,
            failures: 0,
            worst: 0.0,
        }
    }

    /// Records one trial whose inequality holds iff `violation ≤ 0`.
    fn record(&mut self, violation: f64) {
        self.trials += 1;
        if !(violation <= 0.0) {
            self.failures += 1;
            self.worst = if violation.is_nan() { f64::NAN } else { self.worst.max(violation) };
        }
    }

    pub fn passed(&self) -> bool {
        self.failures == 0 && self.trials > 0
    }
}

/// A constraint function with a sampler for its zero sublevel set.
struct Family {
    name: &'static str,
    g: ConvexFn,
    sample_inside: Box<dyn Fn(&mut Stream) -> Point>,
}

fn uniform_point(rng: &mut Stream, dim: usize, radius: f64) -> Point {
    Point::new((0..dim).map(|_| rng.random_range(-radius..=radius)).collect()).expect("finite")
}

fn families(rng: &mut Stream, dim: usize) -> Vec<Family> {
    let radius = rng.random_range(0.5..3.0);
    let c = sample_sphere(rng, dim);
    let d = rng.random_range(-1.0..1.0);
    let c_in = c.clone();
    let a = rng.random_range(0.5..4.0);
    let center = uniform_point(rng, dim, 1.0);
    let r = rng.random_range(0.5..2.0);
    let q_center = center.clone();
    let j = rng.random_range(0..dim);
    let (w1, w2) = (rng.random_range(0.5..2.0), rng.random_range(0.5..2.0));
    let level = rng.random_range(0.5..2.0);
    vec![
        Family {
            name: "norm_ball",
            g: ConvexFn::norm_shift(1.0, -radius).expect("valid"),
            sample_inside: Box::new(move |rng| sample_ball(rng, &Point::zeros(dim), radius)),
        },
        Family {
            name: "affine_hinge",
            g: ConvexFn::affine_hinge(c, d).expect("valid"),
            sample_inside: Box::new(move |rng| {
                let p = uniform_point(rng, dim, 4.0);
                let t = c_in.dot(&p) + d;
                if t > 0.0 {
                    p.axpy(-t - rng.random_range(0.0..1.0), &c_in)
                } else {
                    p
                }
            }),
        },
        Family {
            // a‖x − center‖² − a r², sublevel set ball(center, r)
            name: "quadratic_ball",
            g: ConvexFn::Sum {
                terms: vec![
                    ConvexFn::quadratic(a, center.scale(-1.0)).expect("valid"),
                    ConvexFn::norm_shift(0.0, -a * r * r).expect("valid"),
                ],
            },
            sample_inside: Box::new(move |rng| sample_ball(rng, &q_center, r)),
        },
        Family {
            // w1|x_j| + w2|x_j − 0.5| − level: a slab in coordinate j
            name: "polyhedral_slab",
            g: ConvexFn::Sum {
                terms: vec![
                    ConvexFn::abs_affine(w1, 0.0, j).expect("valid"),
                    ConvexFn::abs_affine(w2, -0.5 * w2, j).expect("valid"),
                    ConvexFn::norm_shift(0.0, -level - 0.5 * w1.min(w2)).expect("valid"),
                ],
            },
            sample_inside: Box::new(move |rng| loop {
                let p = uniform_point(rng, dim, 2.0);
                let v = w1 * p[j].abs() + w2 * (p[j] - 0.5).abs() - level - 0.5 * w1.min(w2);
                if v <= 0.0 {
                    break p;
                }
            }),
        },
    ]
}

fn probe(rng: &mut Stream, dim: usize) -> Point {
    // Mix of near and far points so both branches of Q_sp are exercised.
    let scale = if rng.random_bool(0.5) { 2.0 } else { 10.0 };
    uniform_point(rng, dim, scale)
}

/// Quasi-firm nonexpansivity, the relaxation inequality and the
/// fixed-point characterization of subgradient projections, plus projection
/// idempotence and quasi-nonexpansivity of products and weighted averages.
pub fn geometry_suite(samples: usize, seed: u64) -> Result<Vec<CheckReport>> {
    let mut rng = stream(seed, &[0x6765_6f6d]);
    let mut qfne = CheckReport::new("quasi_firm_nonexpansive");
    let mut prop3 = CheckReport::new("relaxation_inequality");
    let mut fixchar = CheckReport::new("fixed_point_characterization");
    let mut idem = CheckReport::new("projection_idempotence");
    let mut composite = CheckReport::new("composite_quasi_nonexpansive");
    let mut fix_relaxed = CheckReport::new("relaxation_preserves_fixed_points");
    let mut tie = TieBreaker::Zero;
    let alphas = [0.0, 0.25, 0.5, 0.9];
    let rounds = samples.div_ceil(16).max(1);

    for _ in 0..rounds {
        let dim = rng.random_range(1..=6);
        for fam in families(&mut rng, dim) {
            let q = QneMapping::subgradient_projection(fam.g.clone())?;
            for _ in 0..4 {
                let x = probe(&mut rng, dim);
                let y = (fam.sample_inside)(&mut rng);
                let qx = q.apply(&x, &mut tie)?;
                let lhs = qx.dist_sq(&y) + x.dist_sq(&qx);
                let rhs = x.dist_sq(&y);
                qfne.record(lhs - rhs - 1e-9 * (1.0 + rhs));
                for a in alphas {
                    let m = relax(q.clone(), a)?;
                    let qa = m.apply(&x, &mut tie)?;
                    let inner = x.sub(&qa).dot(&x.sub(&y));
                    prop3.record((1.0 - a) * x.dist_sq(&qx) - inner - 1e-9 * (1.0 + rhs));
                    let ya = m.apply(&y, &mut tie)?;
                    fix_relaxed.record(ya.dist(&y) - 1e-12 * (1.0 + y.norm()));
                }
                for p in [&x, &y] {
                    let inside = fam.g.value(p)? <= 0.0;
                    let fixed = q.residual(p, &mut tie)? <= 1e-12 * (1.0 + p.norm());
                    fixchar.record(if inside == fixed { 0.0 } else { 1.0 });
                }
            }
            let _ = fam.name;
        }

        // Sets that all contain the unit ball around the origin.
        let dim = rng.random_range(1..=6);
        let mut maps = Vec::new();
        for k in 0..3 {
            let set = match k {
                0 => {
                    let r = rng.random_range(1.5..3.0);
                    let center = sample_ball(&mut rng, &Point::zeros(dim), r - 1.0);
                    ClosedConvexSet::ball(center, r)?
                }
                1 => ClosedConvexSet::halfspace(sample_sphere(&mut rng, dim), -rng.random_range(1.0..2.0))?,
                _ => {
                    let lo = Point::new((0..dim).map(|_| -rng.random_range(1.0..2.0)).collect())?;
                    let hi = Point::new((0..dim).map(|_| rng.random_range(1.0..2.0)).collect())?;
                    ClosedConvexSet::cuboid(lo, hi)?
                }
            };
            let x = probe(&mut rng, dim);
            let p = set.project(&x)?;
            idem.record(set.project(&p)?.dist(&p) - 1e-12 * (1.0 + p.norm()));
            maps.push(QneMapping::projection(set));
        }
        let w: Vec<f64> = (0..3).map(|_| rng.random_range(0.1..1.0)).collect();
        let total: f64 = w.iter().sum();
        let mut weights: Vec<f64> = w.iter().map(|v| v / total).collect();
        weights[2] = 1.0 - weights[0] - weights[1];
        let avg = QneMapping::weighted_average(weights.into_iter().zip(maps.iter().cloned()).collect())?;
        let prod = QneMapping::product(maps)?;
        for _ in 0..8 {
            let x = probe(&mut rng, dim);
            let y = sample_ball(&mut rng, &Point::zeros(dim), 1.0);
            for m in [&avg, &prod] {
                let mx = m.apply(&x, &mut tie)?;
                composite.record(mx.dist(&y) - x.dist(&y) - 1e-9);
            }
        }
    }
    Ok(vec![qfne, prop3, fixchar, idem, composite, fix_relaxed])
}

fn random_function(rng: &mut Stream, dim: usize) -> ConvexFn {
    match rng.random_range(0..6) {
        0 => ConvexFn::abs_affine(rng.random_range(0.1..100.0), rng.random_range(-100.0..100.0), rng.random_range(0..dim))
            .expect("valid"),
        1 => ConvexFn::AbsInner {
            w: uniform_point(rng, dim, 3.0),
            b: rng.random_range(-2.0..2.0),
        },
        2 => ConvexFn::affine_hinge(sample_sphere(rng, dim), rng.random_range(-2.0..2.0)).expect("valid"),
        3 => ConvexFn::norm_shift(rng.random_range(0.0..3.0), rng.random_range(-3.0..3.0)).expect("valid"),
        4 => ConvexFn::quadratic(rng.random_range(0.1..10.0), uniform_point(rng, dim, 5.0)).expect("valid"),
        _ => ConvexFn::Sum {
            terms: (0..3).map(|_| random_function_leaf(rng, dim)).collect(),
        },
    }
}

fn random_function_leaf(rng: &mut Stream, dim: usize) -> ConvexFn {
    loop {
        let f = random_function(rng, dim);
        if !matches!(f, ConvexFn::Sum { .. }) {
            return f;
        }
    }
}

/// Points that sit exactly on a kink of `f` where one is easy to construct.
fn kink_point(rng: &mut Stream, f: &ConvexFn, dim: usize) -> Option<Point> {
    let mut p = uniform_point(rng, dim, 3.0);
    match f {
        ConvexFn::AbsAffine { a, b, index } => {
            p.coords_mut()[*index] = -b / a;
            Some(p)
        }
        ConvexFn::NormShift { .. } => Some(Point::zeros(dim)),
        _ => None,
    }
}

/// Subgradient inequality, quadratic gradients against finite differences,
/// sum linearity and strong monotonicity.
pub fn functions_suite(samples: usize, seed: u64) -> Result<Vec<CheckReport>> {
    let mut rng = stream(seed, &[0x6675_6e63]);
    let mut subgrad = CheckReport::new("subgradient_inequality");
    let mut fd = CheckReport::new("quadratic_finite_difference");
    let mut linear = CheckReport::new("sum_linearity");
    let mut monotone = CheckReport::new("strong_monotonicity");
    let mut ties = [
        TieBreaker::Zero,
        TieBreaker::Positive,
        TieBreaker::Seeded(Box::new(stream(seed, &[1]))),
    ];
    let points = samples.div_ceil(10).max(1);
    for k in 0..points {
        let dim = rng.random_range(1..=5);
        let f = random_function(&mut rng, dim);
        let x = match kink_point(&mut rng, &f, dim) {
            Some(p) if k % 2 == 0 => p,
            _ => uniform_point(&mut rng, dim, 5.0),
        };
        let tie = &mut ties[k % 3];
        let s = f.subgradient(&x, tie)?;
        for _ in 0..10 {
            let y = uniform_point(&mut rng, dim, 8.0);
            let fy = f.value(&y)?;
            let lower = s.value + y.sub(&x).dot(&s.subgradient);
            subgrad.record(lower - fy - 1e-9 * (1.0 + fy.abs()));
        }

        let g = random_function(&mut rng, dim);
        let both = ConvexFn::Sum {
            terms: vec![f.clone(), g.clone()],
        };
        let (vf, vg, vs) = (f.value(&x)?, g.value(&x)?, both.value(&x)?);
        linear.record((vs - (vf + vg)).abs() - 1e-12 * (1.0 + vs.abs()));

        let a = rng.random_range(0.1..10.0);
        let q = ConvexFn::quadratic(a, uniform_point(&mut rng, dim, 5.0))?;
        let x = uniform_point(&mut rng, dim, 5.0);
        let grad = q.subgradient(&x, &mut TieBreaker::Zero)?.subgradient;
        let h = 1e-6;
        for j in 0..dim {
            let e = Point::basis(dim, j, h);
            let num = (q.value(&x.add(&e))? - q.value(&x.sub(&e))?) / (2.0 * h);
            fd.record((num - grad[j]).abs() - 1e-5 * (1.0 + grad[j].abs()));
        }
        let y = uniform_point(&mut rng, dim, 5.0);
        let gy = q.subgradient(&y, &mut TieBreaker::Zero)?.subgradient;
        let lhs = x.sub(&y).dot(&grad.sub(&gy));
        monotone.record(2.0 * a * x.dist_sq(&y) - lhs - 1e-9 * (1.0 + lhs.abs()));
    }
    Ok(vec![subgrad, fd, linear, monotone])
}
