//! Points of the first and second jet spaces of the configuration bundle,
//! and coordinate changes with their jet prolongations.
//!
//! All computation happens in global charts of R x R^m. Time reparametrizes
//! only by a constant offset; fibre coordinates change by arbitrary
//! user-supplied maps q'(t, q) whose inverse must also be supplied; the
//! library never inverts maps numerically. Validity of a pair is certified by
//! sampling a declared box, not proven globally.

use nalgebra::DMatrix;

use crate::ad::Scalar;
use crate::error::{ChartError, EvalError};
use crate::expr::{Ast, Expression, VarRef};
use crate::field::{expr_tq_derivs2, TqDerivs2};
use crate::sample::SampleBox;
use crate::tol;

/// A point of the first jet space: time, positions, velocities.
#[derive(Debug, Clone, PartialEq)]
pub struct JetPoint1 {
    pub t: f64,
    pub q: Vec<f64>,
    pub v: Vec<f64>,
}

impl JetPoint1 {
    pub fn new(t: f64, q: Vec<f64>, v: Vec<f64>) -> Self {
        assert_eq!(q.len(), v.len(), "position/velocity dimension mismatch");
        JetPoint1 { t, q, v }
    }

    pub fn dim(&self) -> usize {
        self.q.len()
    }

    pub fn is_finite(&self) -> bool {
        self.t.is_finite()
            && self.q.iter().all(|x| x.is_finite())
            && self.v.iter().all(|x| x.is_finite())
    }
}

/// A point of the second jet space: a first-jet point plus accelerations.
#[derive(Debug, Clone, PartialEq)]
pub struct JetPoint2 {
    pub t: f64,
    pub q: Vec<f64>,
    pub v: Vec<f64>,
    pub a: Vec<f64>,
}

impl JetPoint2 {
    pub fn new(t: f64, q: Vec<f64>, v: Vec<f64>, a: Vec<f64>) -> Self {
        assert_eq!(q.len(), v.len());
        assert_eq!(q.len(), a.len());
        JetPoint2 { t, q, v, a }
    }

    pub fn from_first(p: &JetPoint1, a: Vec<f64>) -> Self {
        Self::new(p.t, p.q.clone(), p.v.clone(), a)
    }

    pub fn dim(&self) -> usize {
        self.q.len()
    }

    pub fn first_jet(&self) -> JetPoint1 {
        JetPoint1::new(self.t, self.q.clone(), self.v.clone())
    }

    pub fn is_finite(&self) -> bool {
        self.first_jet().is_finite() && self.a.iter().all(|x| x.is_finite())
    }
}

/// Number of box samples used to certify a chart at construction.
pub const CHART_CERTIFY_SAMPLES: usize = 64;

/// A bundle coordinate change t' = t + c, q'^i = forward_i(t, q), with the
/// inverse map supplied by the user. The inverse components are written in
/// the primed variables using the same symbols (`t` means t', `qk` means
/// q'^k).
#[derive(Debug, Clone)]
pub struct CoordinateChange {
    m: usize,
    forward: Vec<Expression>,
    inverse: Vec<Expression>,
    time_offset: f64,
}

impl CoordinateChange {
    /// Builds and certifies a chart pair on the given box: the composition
    /// must return to the start within `tol::CHART_ROUNDTRIP` and the forward
    /// Jacobian must stay away from singular at every sample.
    pub fn new(
        forward: Vec<Expression>,
        inverse: Vec<Expression>,
        time_offset: f64,
        sample_box: &SampleBox,
        samples: usize,
    ) -> Result<Self, ChartError> {
        let chart = Self::new_unchecked(forward, inverse, time_offset)?;
        chart.certify(sample_box, samples)?;
        Ok(chart)
    }

    /// Construction without the sampled certificate, for maps that are valid
    /// by construction (identity, affine with checked determinant).
    pub fn new_unchecked(
        forward: Vec<Expression>,
        inverse: Vec<Expression>,
        time_offset: f64,
    ) -> Result<Self, ChartError> {
        let m = forward.len();
        if m == 0 || inverse.len() != m {
            return Err(ChartError::Dimension(format!(
                "forward has {} components, inverse has {}",
                m,
                inverse.len()
            )));
        }
        for (label, comps) in [("forward", &forward), ("inverse", &inverse)] {
            for (i, e) in comps.iter().enumerate() {
                if e.m() != m {
                    return Err(ChartError::Dimension(format!(
                        "{label} component {} declared for dimension {}, chart has {}",
                        i + 1,
                        e.m(),
                        m
                    )));
                }
                if e.uses_velocity() {
                    return Err(ChartError::VelocityDependence {
                        which: format!("{label} component {}", i + 1),
                    });
                }
            }
        }
        if !time_offset.is_finite() {
            return Err(ChartError::Dimension("non-finite time offset".into()));
        }
        Ok(CoordinateChange {
            m,
            forward,
            inverse,
            time_offset,
        })
    }

    pub fn identity(m: usize) -> Self {
        let comps = |_| {
            (0..m)
                .map(|i| Expression::from_ast(Ast::Var(VarRef::Pos(i)), m).expect("index < m"))
                .collect::<Vec<_>>()
        };
        CoordinateChange {
            m,
            forward: comps(()),
            inverse: comps(()),
            time_offset: 0.0,
        }
    }

    pub fn dim(&self) -> usize {
        self.m
    }

    pub fn forward(&self) -> &[Expression] {
        &self.forward
    }

    pub fn inverse(&self) -> &[Expression] {
        &self.inverse
    }

    pub fn time_offset(&self) -> f64 {
        self.time_offset
    }

    /// The opposite chart: forward and inverse swapped, offset negated.
    pub fn inverse_change(&self) -> CoordinateChange {
        CoordinateChange {
            m: self.m,
            forward: self.inverse.clone(),
            inverse: self.forward.clone(),
            time_offset: -self.time_offset,
        }
    }

    fn certify(&self, sample_box: &SampleBox, samples: usize) -> Result<(), ChartError> {
        for (index, (t, q)) in sample_box
            .config_points(samples.max(1), 0)
            .into_iter()
            .enumerate()
        {
            let d = expr_tq_derivs2(&self.forward, &t, &q)?;
            let jac = DMatrix::from_fn(self.m, self.m, |i, j| d[i].dq[j]);
            let det = jac.determinant();
            if det.abs() <= tol::CHART_MIN_DET {
                return Err(ChartError::SingularJacobian {
                    index,
                    det: det.abs(),
                });
            }
            let primed: Vec<f64> = d.iter().map(|c| c.value).collect();
            let back: Vec<f64> = self
                .inverse
                .iter()
                .map(|e| e.eval(t + self.time_offset, &primed, &[]))
                .collect::<Result<_, _>>()?;
            let residual = back
                .iter()
                .zip(&q)
                .map(|(b, a)| (b - a).abs())
                .fold(0.0, f64::max);
            if residual > tol::CHART_ROUNDTRIP {
                return Err(ChartError::RoundTrip { index, residual });
            }
        }
        Ok(())
    }

    /// Sampled test for an affine map: all second derivatives of the forward
    /// components vanish on the box.
    pub fn is_affine(&self, sample_box: &SampleBox, samples: usize) -> Result<bool, EvalError> {
        for (t, q) in sample_box.config_points(samples.max(1), 0) {
            for d in expr_tq_derivs2(&self.forward, &t, &q)? {
                let mut worst = d.dtt.abs();
                for x in &d.dtq {
                    worst = worst.max(x.abs());
                }
                for row in &d.dqq {
                    for x in row {
                        worst = worst.max(x.abs());
                    }
                }
                if worst > 1e-12 {
                    return Ok(false);
                }
            }
        }
        Ok(true)
    }

    /// Symbolic composition: `self` applied after `inner`. The result is
    /// certified on the given box.
    pub fn compose(
        &self,
        inner: &CoordinateChange,
        sample_box: &SampleBox,
        samples: usize,
    ) -> Result<CoordinateChange, ChartError> {
        if self.m != inner.m {
            return Err(ChartError::Dimension(format!(
                "composing charts of dimensions {} and {}",
                inner.m, self.m
            )));
        }
        let m = self.m;
        // outer forward is a function of (t', q'); substitute t' = t + c1 and
        // q' = inner.forward(t, q)
        let t_fwd = if inner.time_offset == 0.0 {
            Ast::Var(VarRef::Time)
        } else {
            Ast::Add(
                Box::new(Ast::Var(VarRef::Time)),
                Box::new(Ast::Num(inner.time_offset)),
            )
        };
        let q_fwd: Vec<Ast> = inner.forward.iter().map(|e| e.ast().clone()).collect();
        let forward = self
            .forward
            .iter()
            .map(|e| Expression::from_ast(e.ast().substitute(Some(&t_fwd), &q_fwd), m))
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| ChartError::Dimension(e.to_string()))?;
        // inner inverse is a function of (t', q''); substitute downward
        let t_inv = if self.time_offset == 0.0 {
            Ast::Var(VarRef::Time)
        } else {
            Ast::Sub(
                Box::new(Ast::Var(VarRef::Time)),
                Box::new(Ast::Num(self.time_offset)),
            )
        };
        let q_inv: Vec<Ast> = self.inverse.iter().map(|e| e.ast().clone()).collect();
        let inverse = inner
            .inverse
            .iter()
            .map(|e| Expression::from_ast(e.ast().substitute(Some(&t_inv), &q_inv), m))
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| ChartError::Dimension(e.to_string()))?;
        CoordinateChange::new(
            forward,
            inverse,
            inner.time_offset + self.time_offset,
            sample_box,
            samples,
        )
    }

    /// First-jet prolongation at any scalar level: the transported velocity
    /// is the total time derivative of the forward map.
    pub(crate) fn prolong1_scalar<T: Scalar>(
        &self,
        t: &T,
        q: &[T],
        v: &[T],
    ) -> Result<(T, Vec<T>, Vec<T>), EvalError> {
        let d = expr_tq_derivs2(&self.forward, t, q)?;
        let t_out = t.clone() + t.constant_like(self.time_offset);
        let q_out: Vec<T> = d.iter().map(|c| c.value.clone()).collect();
        let v_out: Vec<T> = d.iter().map(|c| c.total_time_derivative(v)).collect();
        Ok((t_out, q_out, v_out))
    }

    /// Transports a first-jet point: (t + c, q'(t, q), d_t q').
    pub fn prolong_jet1(&self, p: &JetPoint1) -> Result<JetPoint1, EvalError> {
        self.check_dim(p.dim())?;
        let (t, q, v) = self.prolong1_scalar(&p.t, &p.q, &p.v)?;
        Ok(JetPoint1::new(t, q, v))
    }

    /// Transports a second-jet point. The first-jet part coincides bitwise
    /// with [`CoordinateChange::prolong_jet1`]; the acceleration picks up the
    /// quadratic-in-velocity curvature of the map:
    /// a'^i = a^j dq'_i/dq_j + v^j v^k d2q'_i/dq_j dq_k
    ///      + 2 v^j d2q'_i/dq_j dt + d2q'_i/dt2.
    pub fn prolong_jet2(&self, p: &JetPoint2) -> Result<JetPoint2, EvalError> {
        self.check_dim(p.dim())?;
        let d = expr_tq_derivs2(&self.forward, &p.t, &p.q)?;
        let t_out = p.t + self.time_offset;
        let q_out: Vec<f64> = d.iter().map(|c| c.value).collect();
        let v_out: Vec<f64> = d.iter().map(|c| c.total_time_derivative(&p.v)).collect();
        let a_out: Vec<f64> = d
            .iter()
            .map(|c| second_prolongation(c, &p.v, &p.a))
            .collect();
        Ok(JetPoint2::new(t_out, q_out, v_out, a_out))
    }

    fn check_dim(&self, dim: usize) -> Result<(), EvalError> {
        if dim != self.m {
            return Err(EvalError::DimensionMismatch {
                context: "coordinate change".into(),
                expected: self.m,
                actual: dim,
            });
        }
        Ok(())
    }
}

/// Acceleration leg of the second prolongation for one forward component.
pub(crate) fn second_prolongation<T: Scalar>(d: &TqDerivs2<T>, v: &[T], a: &[T]) -> T {
    let m = v.len();
    let mut acc = d.dtt.clone();
    for j in 0..m {
        acc = acc + a[j].clone() * d.dq[j].clone();
        let two = d.dtq[j].constant_like(2.0);
        acc = acc + two * v[j].clone() * d.dtq[j].clone();
        for k in 0..m {
            acc = acc + v[j].clone() * v[k].clone() * d.dqq[j][k].clone();
        }
    }
    acc
}

/// Convenience parser for the m expressions of a map component list.
pub fn parse_components(sources: &[&str], m: usize) -> Result<Vec<Expression>, ChartError> {
    sources
        .iter()
        .map(|s| Expression::parse(s, m).map_err(|e| ChartError::Dimension(format!("`{s}`: {e}"))))
        .collect()
}
