//! Shared oracles and generators for the integration suites.
//!
//! The finite-difference oracles here are deliberately independent of the
//! library's Taylor arithmetic: they only call plain `f64` evaluation.

#![allow(dead_code)]

use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use relmech::bundle::{CoordinateChange, CHART_CERTIFY_SAMPLES};
use relmech::{DynamicEquation, Expression, JetPoint1, ReferenceFrame, SampleBox};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Relative error with a unit floor, so near-zero quantities are compared
/// absolutely.
pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / f64::max(1.0, f64::max(a.abs(), b.abs()))
}

pub mod fd {
    /// Central first differences.
    pub fn gradient(f: &dyn Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
        (0..x.len())
            .map(|i| {
                let mut hi = x.to_vec();
                let mut lo = x.to_vec();
                hi[i] += h;
                lo[i] -= h;
                (f(&hi) - f(&lo)) / (2.0 * h)
            })
            .collect()
    }

    /// Central second differences, mixed entries by the four-point stencil.
    pub fn hessian(f: &dyn Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<Vec<f64>> {
        let n = x.len();
        let mut out = vec![vec![0.0; n]; n];
        let base = f(x);
        for i in 0..n {
            for j in i..n {
                let value = if i == j {
                    let mut hi = x.to_vec();
                    let mut lo = x.to_vec();
                    hi[i] += h;
                    lo[i] -= h;
                    (f(&hi) - 2.0 * base + f(&lo)) / (h * h)
                } else {
                    let mut pp = x.to_vec();
                    let mut pm = x.to_vec();
                    let mut mp = x.to_vec();
                    let mut mm = x.to_vec();
                    pp[i] += h;
                    pp[j] += h;
                    pm[i] += h;
                    pm[j] -= h;
                    mp[i] -= h;
                    mp[j] += h;
                    mm[i] -= h;
                    mm[j] -= h;
                    (f(&pp) - f(&pm) - f(&mp) + f(&mm)) / (4.0 * h * h)
                };
                out[i][j] = value;
                out[j][i] = value;
            }
        }
        out
    }
}

// ---------------------------------------------------------------------------
// Random expressions and fields
// ---------------------------------------------------------------------------

fn coeff(rng: &mut ChaCha8Rng) -> String {
    let c: f64 = rng.gen_range(-2.0..2.0);
    format!("{c:.4}")
}

fn variable(rng: &mut ChaCha8Rng, m: usize, with_velocity: bool) -> String {
    let n_vars = if with_velocity { 1 + 2 * m } else { 1 + m };
    let k = rng.gen_range(0..n_vars);
    if k == 0 {
        "t".to_string()
    } else if k <= m {
        format!("q{k}")
    } else {
        format!("v{}", k - m)
    }
}

/// One additive term of a random polynomial/transcendental expression. All
/// terms stay finite and domain-safe on the standard box.
fn term(rng: &mut ChaCha8Rng, m: usize, with_velocity: bool) -> String {
    let x = variable(rng, m, with_velocity);
    let y = variable(rng, m, with_velocity);
    let c = coeff(rng);
    match rng.gen_range(0..8) {
        0 => c,
        1 => format!("{c}*{x}"),
        2 => format!("{c}*{x}*{y}"),
        3 => format!("{c}*sin({x})"),
        4 => format!("{c}*cos({x} + {y})"),
        5 => format!("{c}*{x}^2"),
        6 => format!("{c}*exp(0.25*{x})"),
        _ => format!("{c}/(5 + {x}^2)"),
    }
}

pub fn random_expression_source(rng: &mut ChaCha8Rng, m: usize, with_velocity: bool) -> String {
    let n_terms = rng.gen_range(2..=4);
    let mut out = term(rng, m, with_velocity);
    for _ in 1..n_terms {
        let sign = if rng.gen_bool(0.5) { " + " } else { " - " };
        out.push_str(sign);
        out.push_str(&term(rng, m, with_velocity));
    }
    out
}

pub fn random_equation(rng: &mut ChaCha8Rng, m: usize) -> DynamicEquation {
    let comps = (0..m)
        .map(|_| {
            let src = random_expression_source(rng, m, true);
            Expression::parse(&src, m).expect("generated source parses")
        })
        .collect();
    DynamicEquation::from_expressions(comps).unwrap()
}

/// A random equation quadratic in the velocities, with coefficients that may
/// depend on (t, q).
pub fn random_quadratic_equation(rng: &mut ChaCha8Rng, m: usize) -> DynamicEquation {
    let comps = (0..m)
        .map(|_| {
            let b0 = random_expression_source(rng, m, false);
            let mut src = format!("({b0})");
            for j in 1..=m {
                let c = coeff(rng);
                src.push_str(&format!(" + {c}*v{j}"));
                // one (t, q)-dependent linear coefficient per component
                if j == 1 {
                    let lin = random_expression_source(rng, m, false);
                    src.push_str(&format!(" + ({lin})*v{j}"));
                }
                for k in j..=m {
                    let c = coeff(rng);
                    src.push_str(&format!(" + {c}*v{j}*v{k}"));
                }
            }
            // a configuration-dependent quadratic coefficient
            let cq = coeff(rng);
            src.push_str(&format!(" + ({cq}*sin(q1))*v1*v{m}"));
            Expression::parse(&src, m).expect("generated source parses")
        })
        .collect();
    DynamicEquation::from_expressions(comps).unwrap()
}

pub fn random_frame(rng: &mut ChaCha8Rng, m: usize) -> ReferenceFrame {
    let comps = (0..m)
        .map(|_| {
            let src = random_expression_source(rng, m, false);
            Expression::parse(&src, m).expect("generated source parses")
        })
        .collect();
    ReferenceFrame::from_expressions(comps).unwrap()
}

pub fn random_jet_point(rng: &mut ChaCha8Rng, sample_box: &SampleBox) -> JetPoint1 {
    let m = sample_box.dim();
    JetPoint1::new(
        rng.gen_range(sample_box.t.0..sample_box.t.1),
        (0..m)
            .map(|i| rng.gen_range(sample_box.q[i].0..sample_box.q[i].1))
            .collect(),
        (0..m)
            .map(|i| rng.gen_range(sample_box.v[i].0..sample_box.v[i].1))
            .collect(),
    )
}

// ---------------------------------------------------------------------------
// Chart families with matching frames (direction: adapted -> working)
// ---------------------------------------------------------------------------

fn parse_pair(fwd: [String; 2], inv: [String; 2]) -> CoordinateChange {
    let comps = |srcs: [String; 2]| {
        srcs.iter()
            .map(|s| Expression::parse(s, 2).unwrap())
            .collect::<Vec<_>>()
    };
    CoordinateChange::new(
        comps(fwd),
        comps(inv),
        0.0,
        &SampleBox::standard(2),
        CHART_CERTIFY_SAMPLES,
    )
    .unwrap()
}

/// Chart from co-rotating rest coordinates into inertial ones, paired with
/// the rotating observers' velocity field in the working coordinates.
pub fn rotation_pair(omega: f64) -> (CoordinateChange, ReferenceFrame) {
    let chart = parse_pair(
        [
            format!("q1*cos({omega}*t) - q2*sin({omega}*t)"),
            format!("q1*sin({omega}*t) + q2*cos({omega}*t)"),
        ],
        [
            format!("q1*cos({omega}*t) + q2*sin({omega}*t)"),
            format!("-q1*sin({omega}*t) + q2*cos({omega}*t)"),
        ],
    );
    let frame = ReferenceFrame::from_expressions(vec![
        Expression::parse(&format!("-{omega}*q2"), 2).unwrap(),
        Expression::parse(&format!("{omega}*q1"), 2).unwrap(),
    ])
    .unwrap();
    (chart, frame)
}

/// Affine chart with random invertible matrix and translations, paired with
/// its constant frame.
pub fn galilei_pair(rng: &mut ChaCha8Rng) -> (CoordinateChange, ReferenceFrame) {
    let k = loop {
        let k: DMatrix<f64> = DMatrix::from_fn(2, 2, |_, _| rng.gen_range(-1.5..1.5));
        if k.determinant().abs() > 0.3 {
            break k;
        }
    };
    let u = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
    let a = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
    let adapted_to_working = relmech::galilei_chart(&k, &u, &a).unwrap().inverse_change();
    let kinv = k.try_inverse().unwrap();
    let gu = [
        kinv[(0, 0)] * u[0] + kinv[(0, 1)] * u[1],
        kinv[(1, 0)] * u[0] + kinv[(1, 1)] * u[1],
    ];
    (adapted_to_working, ReferenceFrame::constant(&gu))
}

/// Nonlinear time-dependent shear with a closed-form inverse, paired with
/// its frame. Exercises the second-derivative terms of the inertial force.
pub fn shear_pair(rng: &mut ChaCha8Rng) -> (CoordinateChange, ReferenceFrame) {
    let s: f64 = rng.gen_range(0.2..0.7);
    let nu: f64 = rng.gen_range(0.4..1.2);
    let chart = parse_pair(
        [format!("q1 + {s}*sin({nu}*t)*sin(q2)"), "q2".to_string()],
        [format!("q1 - {s}*sin({nu}*t)*sin(q2)"), "q2".to_string()],
    );
    let frame = ReferenceFrame::from_expressions(vec![
        Expression::parse(&format!("{s}*{nu}*cos({nu}*t)*sin(q2)"), 2).unwrap(),
        Expression::parse("0", 2).unwrap(),
    ])
    .unwrap();
    (chart, frame)
}

/// A sweep of adapted-chart/frame pairs drawn from the three families.
pub fn adapted_pairs(
    rng: &mut ChaCha8Rng,
    count: usize,
) -> Vec<(CoordinateChange, ReferenceFrame)> {
    (0..count)
        .map(|i| match i % 3 {
            0 => rotation_pair(rng.gen_range(0.3..1.5)),
            1 => galilei_pair(rng),
            _ => shear_pair(rng),
        })
        .collect()
}
