//! Numerical trajectories of dynamic equations.
//!
//! Fixed-step classic Runge-Kutta only: covariance comparisons between
//! charts need identical time grids, and adaptive stepping would force
//! interpolation into every such check.

use crate::bundle::{CoordinateChange, JetPoint1, JetPoint2};
use crate::connections::DynamicEquation;
use crate::error::EvalError;

/// A numerically integrated solution sampled on a uniform time grid. Each
/// sample carries the acceleration slot filled from the equation, so samples
/// are second-jet points lying on the equation by construction.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub samples: Vec<JetPoint2>,
    pub step: f64,
    pub equation_tag: String,
    /// Set when the state stopped being finite; the trajectory is truncated
    /// at the last finite sample.
    pub diverged: bool,
}

impl Trajectory {
    pub fn dim(&self) -> usize {
        self.samples.first().map_or(0, |p| p.dim())
    }
}

/// Integrates q'' = xi(t, q, q') from `p0` to `t_end` with the classic
/// fourth-order scheme on the equivalent first-order system. The step is
/// snapped to the nearest value that divides the interval exactly, keeping
/// the grid uniform; the snapped value is reported in the trajectory.
pub fn integrate(
    xi: &DynamicEquation,
    p0: &JetPoint1,
    t_end: f64,
    step: f64,
) -> Result<Trajectory, EvalError> {
    if !step.is_finite() || step <= 0.0 {
        return Err(EvalError::InvalidArgument(format!(
            "step must be positive and finite, got {step}"
        )));
    }
    if !t_end.is_finite() || t_end <= p0.t {
        return Err(EvalError::InvalidArgument(format!(
            "t_end {t_end} must exceed the initial time {}",
            p0.t
        )));
    }
    let m = xi.dim();
    if p0.dim() != m {
        return Err(EvalError::DimensionMismatch {
            context: "integration initial point".into(),
            expected: m,
            actual: p0.dim(),
        });
    }
    let n_steps = ((t_end - p0.t) / step).round().max(1.0) as usize;
    // snap the step so the uniform grid ends exactly at t_end
    let step = (t_end - p0.t) / n_steps as f64;

    let rhs = |t: f64, q: &[f64], v: &[f64]| -> Result<(Vec<f64>, Vec<f64>), EvalError> {
        let a = xi.eval(&JetPoint1::new(t, q.to_vec(), v.to_vec()))?;
        Ok((v.to_vec(), a))
    };

    let mut samples = Vec::with_capacity(n_steps + 1);
    let mut q = p0.q.clone();
    let mut v = p0.v.clone();
    let mut diverged = false;
    for k in 0..=n_steps {
        let t = p0.t + k as f64 * step;
        let state = JetPoint1::new(t, q.clone(), v.clone());
        if !state.is_finite() {
            diverged = true;
            break;
        }
        let a = xi.eval(&state)?;
        let sample = JetPoint2::from_first(&state, a);
        if !sample.is_finite() {
            diverged = true;
            break;
        }
        samples.push(sample);
        if k == n_steps {
            break;
        }

        let h = step;
        let (k1q, k1v) = rhs(t, &q, &v)?;
        let q2: Vec<f64> = q.iter().zip(&k1q).map(|(x, d)| x + 0.5 * h * d).collect();
        let v2: Vec<f64> = v.iter().zip(&k1v).map(|(x, d)| x + 0.5 * h * d).collect();
        let (k2q, k2v) = rhs(t + 0.5 * h, &q2, &v2)?;
        let q3: Vec<f64> = q.iter().zip(&k2q).map(|(x, d)| x + 0.5 * h * d).collect();
        let v3: Vec<f64> = v.iter().zip(&k2v).map(|(x, d)| x + 0.5 * h * d).collect();
        let (k3q, k3v) = rhs(t + 0.5 * h, &q3, &v3)?;
        let q4: Vec<f64> = q.iter().zip(&k3q).map(|(x, d)| x + h * d).collect();
        let v4: Vec<f64> = v.iter().zip(&k3v).map(|(x, d)| x + h * d).collect();
        let (k4q, k4v) = rhs(t + h, &q4, &v4)?;
        for i in 0..m {
            q[i] += h / 6.0 * (k1q[i] + 2.0 * k2q[i] + 2.0 * k3q[i] + k4q[i]);
            v[i] += h / 6.0 * (k1v[i] + 2.0 * k2v[i] + 2.0 * k3v[i] + k4v[i]);
        }
    }
    Ok(Trajectory {
        samples,
        step,
        equation_tag: String::new(),
        diverged,
    })
}

/// Max defect of the samples against the equation, with the acceleration
/// estimated by the central second difference of the positions. Scales with
/// the square of the step for true solutions.
pub fn trajectory_residual(xi: &DynamicEquation, tr: &Trajectory) -> Result<f64, EvalError> {
    if tr.samples.len() < 3 {
        return Err(EvalError::InvalidArgument(
            "trajectory residual needs at least three samples".into(),
        ));
    }
    let m = tr.dim();
    let h = tr.step;
    let mut worst = 0.0f64;
    for w in tr.samples.windows(3) {
        let (prev, mid, next) = (&w[0], &w[1], &w[2]);
        let a = xi.eval(&mid.first_jet())?;
        for i in 0..m {
            let fd = (next.q[i] - 2.0 * mid.q[i] + prev.q[i]) / (h * h);
            worst = worst.max((fd - a[i]).abs());
        }
    }
    Ok(worst)
}

/// Moves every sample to the primed chart through the second-jet
/// prolongation.
pub fn pushforward_trajectory(
    chart: &CoordinateChange,
    tr: &Trajectory,
) -> Result<Trajectory, EvalError> {
    let samples = tr
        .samples
        .iter()
        .map(|p| chart.prolong_jet2(p))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Trajectory {
        samples,
        step: tr.step,
        equation_tag: tr.equation_tag.clone(),
        diverged: tr.diverged,
    })
}
