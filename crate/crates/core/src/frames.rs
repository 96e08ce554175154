//! Frame-relative calculus: transforming equations between charts, checking
//! adapted coordinates, geodesic frames, frame connections, relative
//! accelerations with their Coriolis/centrifugal split, free-motion
//! equations, and the flatness criterion.

use std::sync::Arc;

use nalgebra::DMatrix;

use crate::ad::Scalar;
use crate::bundle::{second_prolongation, CoordinateChange, JetPoint1, JetPoint2};
use crate::connections::{
    curvature, gamma_from_xi, quadratic_coefficients, DynamicConnection, DynamicEquation,
    ReferenceFrame,
};
use crate::error::{ChartError, EvalError};
use crate::expr::{Ast, Expression, VarRef};
use crate::field::{
    expr_tq_derivs, expr_tq_derivs2, impl_dyn_conn_field, impl_dyn_jet_field, ConnFieldDyn,
    FieldScalar, JetFieldDyn,
};
use crate::sample::SampleBox;
use crate::tol;

// ---------------------------------------------------------------------------
// Transformation of equations between charts
// ---------------------------------------------------------------------------

struct TransformedEquation {
    xi: Arc<dyn JetFieldDyn>,
    chart: CoordinateChange,
    /// The opposite chart, precomputed for the pullback of primed points.
    pullback: CoordinateChange,
}

impl TransformedEquation {
    fn eval_impl<T: FieldScalar>(&self, t: &T, q: &[T], v: &[T]) -> Result<Vec<T>, EvalError> {
        // pull the primed jet point back, evaluate the equation there, then
        // push the resulting acceleration forward through the chart's second
        // prolongation
        let (t0, q0, v0) = self.pullback.prolong1_scalar(t, q, v)?;
        let xi0 = T::eval_jet_field(&*self.xi, &t0, &q0, &v0)?;
        let d = expr_tq_derivs2(self.chart.forward(), &t0, &q0)?;
        Ok(d.iter()
            .map(|c| second_prolongation(c, &v0, &xi0))
            .collect())
    }
}

impl_dyn_jet_field!(TransformedEquation);

/// The same dynamic law written in the primed chart. The returned equation
/// evaluates at primed jet coordinates by pulling them back through the
/// supplied inverse map.
pub fn transform_dynamic_equation(
    xi: &DynamicEquation,
    chart: &CoordinateChange,
) -> DynamicEquation {
    assert_eq!(
        xi.dim(),
        chart.dim(),
        "equation and chart dimensions differ"
    );
    DynamicEquation::from_field(
        xi.dim(),
        Arc::new(TransformedEquation {
            xi: xi.field().clone(),
            chart: chart.clone(),
            pullback: chart.inverse_change(),
        }),
    )
}

/// Max residual, over the sampled box, of the adapted-coordinate condition
/// for `chart.forward` as candidate adapted coordinates of `frame`:
/// sum_i d(qbar^a)/dq_i Gamma^i + d(qbar^a)/dt. Near-zero certifies the pair.
pub fn adapted_frame_residual(
    frame: &ReferenceFrame,
    chart: &CoordinateChange,
    sample_box: &SampleBox,
    samples: usize,
) -> Result<f64, EvalError> {
    let m = frame.dim();
    let mut worst = 0.0f64;
    for (t, q) in sample_box.config_points(samples.max(1), 0) {
        let d = expr_tq_derivs(chart.forward(), &t, &q)?;
        let g = frame.eval(t, &q)?;
        for comp in &d {
            let mut r = comp.dt;
            for i in 0..m {
                r += comp.dq[i] * g[i];
            }
            worst = worst.max(r.abs());
        }
    }
    Ok(worst)
}

/// Residual of the geodesic-frame condition at a configuration point:
/// d_t Gamma^i along the frame itself minus the equation evaluated on the
/// frame's section, d_t Gamma^i - xi^i(t, q, Gamma). Zero means the
/// observers' own world lines solve the equation there.
pub fn geodesic_residual(
    xi: &DynamicEquation,
    frame: &ReferenceFrame,
    t: f64,
    q: &[f64],
) -> Result<Vec<f64>, EvalError> {
    let m = frame.dim();
    if q.len() != m || xi.dim() != m {
        return Err(EvalError::DimensionMismatch {
            context: "geodesic residual".into(),
            expected: m,
            actual: q.len(),
        });
    }
    let d = expr_tq_derivs(frame.components(), &t, q)?;
    let g: Vec<f64> = d.iter().map(|c| c.value).collect();
    let on_section = xi.eval(&JetPoint1::new(t, q.to_vec(), g.clone()))?;
    Ok((0..m)
        .map(|i| {
            let mut r = d[i].dt - on_section[i];
            for j in 0..m {
                r += g[j] * d[i].dq[j];
            }
            r
        })
        .collect())
}

// ---------------------------------------------------------------------------
// Frame connections and relative acceleration
// ---------------------------------------------------------------------------

struct TildeGammaField {
    m: usize,
    gamma: Arc<dyn ConnFieldDyn>,
    frame: ReferenceFrame,
}

impl TildeGammaField {
    fn eval_impl<T: FieldScalar>(&self, t: &T, q: &[T], v: &[T]) -> Result<Vec<Vec<T>>, EvalError> {
        let g = T::eval_conn_field(&*self.gamma, t, q, v)?;
        let d = expr_tq_derivs(self.frame.components(), t, q)?;
        let mut out = g.clone();
        for i in 0..self.m {
            let mut time_leg = d[i].total_time_derivative(v);
            for (k, dk) in d.iter().enumerate() {
                time_leg = time_leg - g[1 + k][i].clone() * dk.value.clone();
            }
            out[0][i] = time_leg;
        }
        Ok(out)
    }
}

impl_dyn_conn_field!(TildeGammaField);

/// The connection with the same fibre legs as `gamma` whose time leg follows
/// the frame: tilde(gamma)^i_k = gamma^i_k,
/// tilde(gamma)^i_0 = d_t Gamma^i - gamma^i_k Gamma^k.
pub fn tilde_gamma(gamma: &DynamicConnection, frame: &ReferenceFrame) -> DynamicConnection {
    assert_eq!(gamma.dim(), frame.dim());
    DynamicConnection::from_field(
        gamma.dim(),
        Arc::new(TildeGammaField {
            m: gamma.dim(),
            gamma: gamma.field().clone(),
            frame: frame.clone(),
        }),
    )
}

struct FrameConnectionField {
    m: usize,
    gamma: Arc<dyn ConnFieldDyn>,
    frame: ReferenceFrame,
}

impl FrameConnectionField {
    fn eval_impl<T: FieldScalar>(&self, t: &T, q: &[T], v: &[T]) -> Result<Vec<Vec<T>>, EvalError> {
        let m = self.m;
        let g = T::eval_conn_field(&*self.gamma, t, q, v)?;
        let d = expr_tq_derivs(self.frame.components(), t, q)?;
        let gv: Vec<T> = d.iter().map(|c| c.value.clone()).collect();
        // "compose with the frame": the same connection evaluated on the
        // frame's section v = Gamma(t, q)
        let g_on_frame = T::eval_conn_field(&*self.gamma, t, q, &gv)?;
        let mut out = vec![vec![t.constant_like(0.0); m]; m + 1];
        for i in 0..m {
            // soldering correction of the fibre legs
            for k in 0..m {
                out[1 + k][i] =
                    g[1 + k][i].clone() + d[i].dq[k].clone() - g_on_frame[1 + k][i].clone();
            }
            let mut time_leg = d[i].total_time_derivative(v);
            for k in 0..m {
                time_leg = time_leg - g[1 + k][i].clone() * gv[k].clone();
                let corr = d[i].dq[k].clone() - g_on_frame[1 + k][i].clone();
                time_leg = time_leg - gv[k].clone() * corr;
            }
            out[0][i] = time_leg;
        }
        Ok(out)
    }
}

impl_dyn_conn_field!(FrameConnectionField);

/// The frame connection: `gamma` corrected by the soldering form of the
/// frame's covariant differential, so that its vertical covariant
/// differential writes the dynamic equation covariantly.
pub fn frame_connection(gamma: &DynamicConnection, frame: &ReferenceFrame) -> DynamicConnection {
    assert_eq!(gamma.dim(), frame.dim());
    DynamicConnection::from_field(
        gamma.dim(),
        Arc::new(FrameConnectionField {
            m: gamma.dim(),
            gamma: gamma.field().clone(),
            frame: frame.clone(),
        }),
    )
}

/// Pointwise components of a frame connection.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameConnectionComponents {
    /// Time legs `g0[i]`.
    pub g0: Vec<f64>,
    /// Fibre legs `gk[k][i]`.
    pub gk: Vec<Vec<f64>>,
}

pub fn frame_connection_components(
    gamma: &DynamicConnection,
    frame: &ReferenceFrame,
    p: &JetPoint1,
) -> Result<FrameConnectionComponents, EvalError> {
    let c = frame_connection(gamma, frame).eval(p)?;
    let mut rows = c.g.into_iter();
    let g0 = rows.next().expect("time leg");
    Ok(FrameConnectionComponents {
        g0,
        gk: rows.collect(),
    })
}

struct FrameXiField {
    m: usize,
    gamma: Arc<dyn ConnFieldDyn>,
    frame: ReferenceFrame,
}

impl FrameXiField {
    fn eval_impl<T: FieldScalar>(&self, t: &T, q: &[T], v: &[T]) -> Result<Vec<T>, EvalError> {
        let m = self.m;
        let g = T::eval_conn_field(&*self.gamma, t, q, v)?;
        let d = expr_tq_derivs(self.frame.components(), t, q)?;
        let gv: Vec<T> = d.iter().map(|c| c.value.clone()).collect();
        let g_on_frame = T::eval_conn_field(&*self.gamma, t, q, &gv)?;
        Ok((0..m)
            .map(|i| {
                let mut acc = d[i].total_time_derivative(v);
                for k in 0..m {
                    let coeff =
                        d[i].dq[k].clone() + g[1 + k][i].clone() - g_on_frame[1 + k][i].clone();
                    acc = acc + coeff * (v[k].clone() - gv[k].clone());
                }
                acc
            })
            .collect())
    }
}

impl_dyn_jet_field!(FrameXiField);

/// The holonomic prolongation of a frame by means of a dynamic connection:
/// xi_Gamma^i = d_t Gamma^i
///            + (d_k Gamma^i + gamma^i_k - gamma^i_k on the frame)(v^k - Gamma^k).
pub fn xi_frame(gamma: &DynamicConnection, frame: &ReferenceFrame) -> DynamicEquation {
    assert_eq!(gamma.dim(), frame.dim());
    DynamicEquation::from_field(
        gamma.dim(),
        Arc::new(FrameXiField {
            m: gamma.dim(),
            gamma: gamma.field().clone(),
            frame: frame.clone(),
        }),
    )
}

/// Relative acceleration with respect to a frame: the absolute acceleration
/// minus the frame's holonomic prolongation built from the equation's own
/// connection, a_Gamma = xi - xi_Gamma.
pub fn relative_acceleration(
    xi: &DynamicEquation,
    frame: &ReferenceFrame,
    p: &JetPoint1,
) -> Result<Vec<f64>, EvalError> {
    let gamma = gamma_from_xi(xi);
    let prolonged = xi_frame(&gamma, frame);
    let absolute = xi.eval(p)?;
    let carried = prolonged.eval(p)?;
    Ok(absolute.iter().zip(&carried).map(|(a, c)| a - c).collect())
}

/// Covariant residual of a second-jet point against an equation, written
/// through the frame connection: (a^i - gFC^i_0 - v^j gFC^i_j) - a_Gamma^i.
/// Zero exactly when the point lies on the equation, in any chart.
pub fn covariant_residual(
    xi: &DynamicEquation,
    frame: &ReferenceFrame,
    p: &JetPoint2,
) -> Result<Vec<f64>, EvalError> {
    let m = xi.dim();
    if p.dim() != m {
        return Err(EvalError::DimensionMismatch {
            context: "covariant residual".into(),
            expected: m,
            actual: p.dim(),
        });
    }
    let first = p.first_jet();
    let gamma = gamma_from_xi(xi);
    let fc = frame_connection(&gamma, frame).eval(&first)?;
    let a_rel = relative_acceleration(xi, frame, &first)?;
    Ok((0..m)
        .map(|i| {
            let mut vertical = p.a[i] - fc.g[0][i];
            for j in 0..m {
                vertical -= p.v[j] * fc.g[1 + j][i];
            }
            vertical - a_rel[i]
        })
        .collect())
}

/// The generalized Coriolis split of the relative acceleration of a
/// quadratic equation.
#[derive(Debug, Clone)]
pub struct CoriolisReport {
    /// a_Gamma evaluated from its definition xi - xi_Gamma.
    pub a_direct: Vec<f64>,
    /// a_Gamma reassembled from the frame's covariant differential:
    /// -(Gamma^l nabla_l Gamma^i + 2 qdot^l nabla_l Gamma^i), with the time
    /// slot of Gamma fixed to 1 and of the relative velocity to 0.
    pub a_decomposed: Vec<f64>,
    /// `nabla[k][l]` = d_l Gamma^k - gamma^k_l on the frame, l = 0..=m.
    pub nabla: Vec<Vec<f64>>,
    /// Relative velocity v - Gamma at the evaluation point.
    pub rel_v: Vec<f64>,
}

pub fn coriolis_decomposition(
    xi: &DynamicEquation,
    frame: &ReferenceFrame,
    p: &JetPoint1,
) -> Result<CoriolisReport, EvalError> {
    let m = xi.dim();
    if frame.dim() != m || p.dim() != m {
        return Err(EvalError::DimensionMismatch {
            context: "coriolis decomposition".into(),
            expected: m,
            actual: p.dim(),
        });
    }
    let fit = quadratic_coefficients(xi, p.t, &p.q)?;
    if !fit.is_quadratic {
        return Err(EvalError::NotQuadratic {
            detail: format!(
                "fit remainder {:.3e} exceeds {:.1e} at the probe velocities",
                fit.max_remainder,
                tol::QUADRATIC_PROBE
            ),
        });
    }
    let gamma = gamma_from_xi(xi);
    let d = expr_tq_derivs(frame.components(), &p.t, &p.q)?;
    let gv: Vec<f64> = d.iter().map(|c| c.value).collect();
    let g_on_frame = gamma.eval(&JetPoint1::new(p.t, p.q.clone(), gv.clone()))?;
    let mut nabla = vec![vec![0.0; m + 1]; m];
    for k in 0..m {
        nabla[k][0] = d[k].dt - g_on_frame.g[0][k];
        for j in 0..m {
            nabla[k][1 + j] = d[k].dq[j] - g_on_frame.g[1 + j][k];
        }
    }
    let rel_v: Vec<f64> = p.v.iter().zip(&gv).map(|(v, g)| v - g).collect();
    let a_decomposed: Vec<f64> = (0..m)
        .map(|i| {
            let mut transport = nabla[i][0]; // Gamma^0 = 1 times the time leg
            for k in 0..m {
                transport += gv[k] * nabla[i][1 + k];
                transport += 2.0 * rel_v[k] * nabla[i][1 + k];
            }
            -transport
        })
        .collect();
    let a_direct = relative_acceleration(xi, frame, p)?;
    Ok(CoriolisReport {
        a_direct,
        a_decomposed,
        nabla,
        rel_v,
    })
}

// ---------------------------------------------------------------------------
// Free motion
// ---------------------------------------------------------------------------

struct FreeMotionField {
    m: usize,
    frame: ReferenceFrame,
    /// Chart from the adapted coordinates to the working ones.
    chart: CoordinateChange,
}

impl FreeMotionField {
    fn eval_impl<T: Scalar>(&self, t: &T, q: &[T], v: &[T]) -> Result<Vec<T>, EvalError> {
        let m = self.m;
        let d = expr_tq_derivs(self.frame.components(), t, q)?;
        let rel: Vec<T> = (0..m).map(|k| v[k].clone() - d[k].value.clone()).collect();
        // adapted coordinates and their curvature in the working chart
        let back = expr_tq_derivs2(self.chart.inverse(), t, q)?;
        let qbar: Vec<T> = back.iter().map(|c| c.value.clone()).collect();
        let t_adapted = t.clone() - t.constant_like(self.chart.time_offset());
        let fwd = expr_tq_derivs(self.chart.forward(), &t_adapted, &qbar)?;
        Ok((0..m)
            .map(|i| {
                let mut acc = d[i].total_time_derivative(v);
                for j in 0..m {
                    acc = acc + d[i].dq[j].clone() * rel[j].clone();
                }
                // quadratic drag of the adapted coordinates' second
                // derivatives, pushed forward by dq^i/dqbar^m
                for a in 0..m {
                    let mut quad = t.constant_like(0.0);
                    for j in 0..m {
                        for k in 0..m {
                            quad =
                                quad + back[a].dqq[j][k].clone() * rel[j].clone() * rel[k].clone();
                        }
                    }
                    acc = acc - fwd[i].dq[a].clone() * quad;
                }
                acc
            })
            .collect())
    }
}

impl_dyn_jet_field!(FreeMotionField);

/// The free-motion equation of a frame, written in the working coordinates
/// reached by `chart` (a map from the frame's adapted coordinates). Its right
/// side is the general inertial force of the frame. The pair must satisfy the
/// adapted-coordinate condition; affine charts are additionally checked
/// against the simplified affine form.
pub fn free_motion_equation(
    frame: &ReferenceFrame,
    chart: &CoordinateChange,
    sample_box: &SampleBox,
    samples: usize,
) -> Result<DynamicEquation, EvalError> {
    let m = frame.dim();
    assert_eq!(chart.dim(), m, "frame and chart dimensions differ");
    let residual = adapted_frame_residual(frame, &chart.inverse_change(), sample_box, samples)?;
    if residual > tol::ADAPTED_PAIR {
        return Err(EvalError::InconsistentFrameChart { residual });
    }
    let xi = DynamicEquation::from_field(
        m,
        Arc::new(FreeMotionField {
            m,
            frame: frame.clone(),
            chart: chart.clone(),
        }),
    );
    if chart.is_affine(sample_box, samples)? {
        // affine transition functions collapse the inertial force to
        // d_t Gamma - Gamma^j d_j Gamma + 2 v^j d_j Gamma
        let mut worst = 0.0f64;
        for p in sample_box.jet_points(samples.min(32), 0) {
            let full = xi.eval(&p)?;
            let d = expr_tq_derivs(frame.components(), &p.t, &p.q)?;
            for i in 0..m {
                let mut simple = d[i].dt;
                for j in 0..m {
                    simple += (2.0 * p.v[j] - d[j].value) * d[i].dq[j];
                }
                worst = worst.max((full[i] - simple).abs());
            }
        }
        if worst > tol::CHAINED {
            return Err(EvalError::InconsistentFrameChart { residual: worst });
        }
    }
    Ok(xi)
}

/// Verdict of the flatness criterion. Vanishing curvature is necessary for
/// free motion but not sufficient, so a pass is never conclusive.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CurvatureVerdict {
    FailsNecessaryCriterion,
    InconclusivePass,
}

impl std::fmt::Display for CurvatureVerdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CurvatureVerdict::FailsNecessaryCriterion => write!(f, "fails necessary criterion"),
            CurvatureVerdict::InconclusivePass => {
                write!(f, "passes necessary criterion (inconclusive)")
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct FreeMotionCurvatureReport {
    pub max_abs_curvature: f64,
    pub tol: f64,
    pub verdict: CurvatureVerdict,
}

/// Max curvature norm of the equation's own connection over the box. A large
/// value rules free motion out; a small one is merely inconclusive.
pub fn free_motion_curvature_test(
    xi: &DynamicEquation,
    sample_box: &SampleBox,
    samples: usize,
    tol: f64,
) -> Result<FreeMotionCurvatureReport, EvalError> {
    let gamma = gamma_from_xi(xi);
    let mut max_abs = 0.0f64;
    for p in sample_box.jet_points(samples.max(1), 0) {
        max_abs = max_abs.max(curvature(&gamma, &p)?.max_abs());
    }
    let verdict = if max_abs > tol {
        CurvatureVerdict::FailsNecessaryCriterion
    } else {
        CurvatureVerdict::InconclusivePass
    };
    Ok(FreeMotionCurvatureReport {
        max_abs_curvature: max_abs,
        tol,
        verdict,
    })
}

// ---------------------------------------------------------------------------
// Galilei charts
// ---------------------------------------------------------------------------

/// Builds sum(coeffs_j * q_j) + t_coeff * t + constant as a parseable tree.
fn linear_combination(q_coeffs: &[f64], t_coeff: f64, constant: f64, m: usize) -> Ast {
    let mut acc: Option<Ast> = None;
    let push = |acc: &mut Option<Ast>, coeff: f64, var: Option<Ast>| {
        if coeff == 0.0 {
            return;
        }
        let mag = coeff.abs();
        let term = match var {
            Some(v) if mag == 1.0 => v,
            Some(v) => Ast::Mul(Box::new(Ast::Num(mag)), Box::new(v)),
            None => Ast::Num(mag),
        };
        *acc = Some(match acc.take() {
            None if coeff < 0.0 => Ast::Neg(Box::new(term)),
            None => term,
            Some(prev) if coeff < 0.0 => Ast::Sub(Box::new(prev), Box::new(term)),
            Some(prev) => Ast::Add(Box::new(prev), Box::new(term)),
        });
    };
    for (j, &c) in q_coeffs.iter().enumerate().take(m) {
        push(&mut acc, c, Some(Ast::Var(VarRef::Pos(j))));
    }
    push(&mut acc, t_coeff, Some(Ast::Var(VarRef::Time)));
    push(&mut acc, constant, None);
    acc.unwrap_or(Ast::Num(0.0))
}

/// The affine adapted-coordinate change of a uniformly moving frame:
/// qbar^i = k^i_j q^j - u^i t - a^i, with the inverse built from k^-1.
/// These are exactly the changes connecting the rest coordinates of the
/// inertial frames of a free particle.
pub fn galilei_chart(
    k: &DMatrix<f64>,
    u: &[f64],
    a: &[f64],
) -> Result<CoordinateChange, ChartError> {
    let m = u.len();
    if k.nrows() != m || k.ncols() != m || a.len() != m {
        return Err(ChartError::Dimension(format!(
            "matrix is {}x{}, translations have lengths {} and {}",
            k.nrows(),
            k.ncols(),
            u.len(),
            a.len()
        )));
    }
    let det = k.determinant();
    if det.abs() <= tol::CHART_MIN_DET {
        return Err(ChartError::SingularMatrix { det: det.abs() });
    }
    let kinv = k
        .clone()
        .try_inverse()
        .ok_or(ChartError::SingularMatrix { det: det.abs() })?;
    let ku: Vec<f64> = (kinv.clone() * DMatrix::from_column_slice(m, 1, u))
        .iter()
        .copied()
        .collect();
    let ka: Vec<f64> = (kinv.clone() * DMatrix::from_column_slice(m, 1, a))
        .iter()
        .copied()
        .collect();
    let forward = (0..m)
        .map(|i| {
            let coeffs: Vec<f64> = (0..m).map(|j| k[(i, j)]).collect();
            Expression::from_ast(linear_combination(&coeffs, -u[i], -a[i], m), m)
        })
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| ChartError::Dimension(e.to_string()))?;
    let inverse = (0..m)
        .map(|i| {
            let coeffs: Vec<f64> = (0..m).map(|j| kinv[(i, j)]).collect();
            Expression::from_ast(linear_combination(&coeffs, ku[i], ka[i], m), m)
        })
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| ChartError::Dimension(e.to_string()))?;
    CoordinateChange::new_unchecked(forward, inverse, 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::connections::{torsion, xi_from_gamma, ConnectionComponents};
    use crate::expr::Expression;
    use crate::testutil::{
        eq_from, frame_from, rotating_frame, rotation_chart, rotation_chart_from_adapted,
    };
    use approx::assert_relative_eq;

    fn free2() -> DynamicEquation {
        DynamicEquation::zero(2)
    }

    #[test]
    fn transform_keeps_free_motion_under_a_boost() {
        let chart = galilei_chart(&DMatrix::identity(1, 1), &[3.0], &[0.0]).unwrap();
        let xi = transform_dynamic_equation(&DynamicEquation::zero(1), &chart);
        for p in SampleBox::standard(1).jet_points(16, 0) {
            assert!(xi.eval(&p).unwrap()[0].abs() <= 1e-12);
        }
    }

    #[test]
    fn transform_into_rotating_chart_produces_inertial_forces() {
        let xi = transform_dynamic_equation(&free2(), &rotation_chart(1.0));
        let p = JetPoint1::new(0.0, vec![1.0, 0.0], vec![0.0, 0.0]);
        let out = xi.eval(&p).unwrap();
        assert_relative_eq!(out[0], 1.0, epsilon = 1e-12);
        assert_relative_eq!(out[1], 0.0, epsilon = 1e-12);
        // analytic centrifugal + velocity-coupled form on the whole box
        for p in SampleBox::standard(2).jet_points(64, 0) {
            let out = xi.eval(&p).unwrap();
            let want = [2.0 * p.v[1] + p.q[0], -2.0 * p.v[0] + p.q[1]];
            assert_relative_eq!(out[0], want[0], epsilon = 1e-10);
            assert_relative_eq!(out[1], want[1], epsilon = 1e-10);
        }
    }

    #[test]
    fn transform_by_identity_is_identity() {
        let xi = eq_from(&["sin(t)*v1 + q2", "q1*v2"]);
        let moved = transform_dynamic_equation(&xi, &CoordinateChange::identity(2));
        for p in SampleBox::standard(2).jet_points(16, 1) {
            let a = xi.eval(&p).unwrap();
            let b = moved.eval(&p).unwrap();
            for i in 0..2 {
                assert!((a[i] - b[i]).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn time_offset_charts_shift_the_clock() {
        // identity fibre map with a clock offset: the transformed equation
        // reads the old law at the unshifted time
        let offset = 5.0;
        let chart = CoordinateChange::new(
            crate::bundle::parse_components(&["q1"], 1).unwrap(),
            crate::bundle::parse_components(&["q1"], 1).unwrap(),
            offset,
            &SampleBox::standard(1),
            16,
        )
        .unwrap();
        let xi = eq_from(&["sin(t) + q1*v1"]);
        let moved = transform_dynamic_equation(&xi, &chart);
        for p in SampleBox::standard(1).jet_points(12, 26) {
            let shifted = chart.prolong_jet1(&p).unwrap();
            assert_relative_eq!(shifted.t, p.t + offset, epsilon = 1e-14);
            let a = moved.eval(&shifted).unwrap();
            let b = xi.eval(&p).unwrap();
            assert_relative_eq!(a[0], b[0], epsilon = 1e-12);
        }
    }

    #[test]
    fn adapted_residual_examples() {
        let sb = SampleBox::standard(2);
        // the rest frame is adapted to the identity chart
        let r = adapted_frame_residual(
            &ReferenceFrame::zero(2),
            &CoordinateChange::identity(2),
            &sb,
            64,
        )
        .unwrap();
        assert_eq!(r, 0.0);
        // the rotating chart is adapted to the rotating frame
        let r =
            adapted_frame_residual(&rotating_frame(1.0), &rotation_chart(1.0), &sb, 64).unwrap();
        assert!(r <= 1e-10, "residual {r}");
        // the identity chart is not: the residual is the frame field itself
        let r = adapted_frame_residual(
            &rotating_frame(1.0),
            &CoordinateChange::identity(2),
            &sb,
            64,
        )
        .unwrap();
        assert!(r > 1.0);
    }

    #[test]
    fn geodesic_residual_examples() {
        // uniformly moving observers solve free motion
        let r = geodesic_residual(
            &DynamicEquation::zero(2),
            &ReferenceFrame::constant(&[0.4, -1.0]),
            0.3,
            &[1.0, 2.0],
        )
        .unwrap();
        assert_eq!(r, vec![0.0, 0.0]);
        // rotating observers do not: they carry centripetal acceleration
        let r = geodesic_residual(&free2(), &rotating_frame(1.0), 0.0, &[1.0, 0.0]).unwrap();
        assert_relative_eq!(r[0], -1.0, epsilon = 1e-14);
        assert_relative_eq!(r[1], 0.0, epsilon = 1e-14);
        // the rest frame touches the oscillator's solutions only at the origin
        let xi = eq_from(&["-q1"]);
        let r = geodesic_residual(&xi, &ReferenceFrame::zero(1), 0.0, &[0.0]).unwrap();
        assert_eq!(r, vec![0.0]);
        let r = geodesic_residual(&xi, &ReferenceFrame::zero(1), 0.0, &[1.0]).unwrap();
        assert_relative_eq!(r[0], 1.0, epsilon = 1e-14);
    }

    #[test]
    fn tilde_gamma_examples() {
        let p = JetPoint1::new(0.0, vec![1.0, 0.0], vec![0.0, 0.0]);
        let g = tilde_gamma(&DynamicConnection::zero(2), &ReferenceFrame::zero(2))
            .eval(&p)
            .unwrap();
        assert!(g.g.iter().flatten().all(|x| *x == 0.0));

        // zero connection, rotating frame: the time leg is d_t Gamma, which
        // vanishes at v = 0 for a time-independent frame
        let g = tilde_gamma(&DynamicConnection::zero(2), &rotating_frame(1.0))
            .eval(&p)
            .unwrap();
        assert_eq!(g.g[0], vec![0.0, 0.0]);

        // rest frame: fibre legs pass through untouched
        let base = DynamicConnection::from_expressions(vec![
            vec![
                Expression::parse("q1", 2).unwrap(),
                Expression::parse("t", 2).unwrap(),
            ],
            vec![
                Expression::parse("v2", 2).unwrap(),
                Expression::parse("0", 2).unwrap(),
            ],
            vec![
                Expression::parse("1", 2).unwrap(),
                Expression::parse("q2", 2).unwrap(),
            ],
        ])
        .unwrap();
        let p = JetPoint1::new(0.7, vec![0.3, -0.6], vec![1.1, 0.9]);
        let tilde = tilde_gamma(&base, &ReferenceFrame::zero(2))
            .eval(&p)
            .unwrap();
        let g = base.eval(&p).unwrap();
        assert_eq!(tilde.g[1], g.g[1]);
        assert_eq!(tilde.g[2], g.g[2]);
        assert_eq!(tilde.g[0], vec![0.0, 0.0]);
    }

    /// Affine split of connection components at a point: constant part at
    /// v = 0 plus the velocity slopes, recovered through Taylor seeds.
    fn affine_split(
        c0: &ConnectionComponents,
        cv: &[ConnectionComponents],
        base_v: &[f64],
    ) -> (Vec<Vec<f64>>, Vec<Vec<Vec<f64>>>) {
        let m = base_v.len();
        let legs = c0.g.len();
        let consts: Vec<Vec<f64>> = c0.g.clone();
        let slopes: Vec<Vec<Vec<f64>>> = (0..legs)
            .map(|l| {
                (0..m)
                    .map(|i| {
                        (0..m)
                            .map(|j| (cv[j].g[l][i] - c0.g[l][i]) / base_v[j])
                            .collect()
                    })
                    .collect()
            })
            .collect();
        (consts, slopes)
    }

    #[test]
    fn frame_connection_matches_affine_coefficient_formulas() {
        // affine connection in two dimensions with nontrivial coefficients
        let gamma = gamma_from_xi(&eq_from(&[
            "q1 + sin(t) + 2*v2 + 0.3*v1*v1",
            "q2*t - v1 + 0.1*v1*v2",
        ]));
        let frame = frame_from(&["q2 + t", "-0.5*q1"]);
        let fc = frame_connection(&gamma, &frame);
        for p in SampleBox::standard(2).jet_points(12, 3) {
            let d = expr_tq_derivs(frame.components(), &p.t, &p.q).unwrap();
            let gv: Vec<f64> = d.iter().map(|c| c.value).collect();
            // affine coefficients of gamma at (t, q): evaluate at v = 0 and
            // at unit-ish velocity probes
            let at = |v: &[f64]| {
                gamma
                    .eval(&JetPoint1::new(p.t, p.q.clone(), v.to_vec()))
                    .unwrap()
            };
            let base_v = [1.0, 1.0];
            let c0 = at(&[0.0, 0.0]);
            let cv = [at(&[1.0, 0.0]), at(&[0.0, 1.0])];
            let (_gconst, gslope) = affine_split(&c0, &cv, &base_v);

            let fc_at = |v: &[f64]| {
                fc.eval(&JetPoint1::new(p.t, p.q.clone(), v.to_vec()))
                    .unwrap()
            };
            let f0 = fc_at(&[0.0, 0.0]);
            let fv = [fc_at(&[1.0, 0.0]), fc_at(&[0.0, 1.0])];
            let (fconst, fslope) = affine_split(&f0, &fv, &base_v);

            for i in 0..2 {
                for k in 0..2 {
                    for j in 0..2 {
                        // fibre-leg slopes are inherited unchanged
                        assert_relative_eq!(
                            fslope[1 + k][i][j],
                            gslope[1 + k][i][j],
                            epsilon = 1e-12
                        );
                    }
                    // fibre-leg constants: d_k Gamma^i - slope^i_{kj} Gamma^j
                    let mut want = d[i].dq[k];
                    for j in 0..2 {
                        want -= gslope[1 + k][i][j] * gv[j];
                    }
                    assert_relative_eq!(fconst[1 + k][i], want, epsilon = 1e-12);
                    // time-leg slopes: d_k Gamma^i - slope^i_{jk} Gamma^j
                    let mut want = d[i].dq[k];
                    for j in 0..2 {
                        want -= gslope[1 + j][i][k] * gv[j];
                    }
                    assert_relative_eq!(fslope[0][i][k], want, epsilon = 1e-12);
                }
                // time-leg constants:
                // d_t Gamma^i - Gamma^j d_j Gamma^i + slope^i_{jk} G^j G^k
                let mut want = d[i].dt;
                for j in 0..2 {
                    want -= gv[j] * d[i].dq[j];
                    for k in 0..2 {
                        want += gslope[1 + j][i][k] * gv[j] * gv[k];
                    }
                }
                assert_relative_eq!(fconst[0][i], want, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn frame_connection_trivializes_in_adapted_coordinates() {
        // with the rest frame, an affine connection keeps only its slopes
        let gamma = gamma_from_xi(&eq_from(&["q1 + 2*v1 + 0.4*v1*v1"]));
        let fc = frame_connection(&gamma, &ReferenceFrame::zero(1));
        for p in SampleBox::standard(1).jet_points(12, 5) {
            let at_rest = fc
                .eval(&JetPoint1::new(p.t, p.q.clone(), vec![0.0]))
                .unwrap();
            // all affine constants vanish
            assert!(at_rest.g[0][0].abs() <= 1e-12);
            assert!(at_rest.g[1][0].abs() <= 1e-12);
        }
        let zero_fc = frame_connection(&DynamicConnection::zero(1), &ReferenceFrame::zero(1));
        let p = JetPoint1::new(0.2, vec![0.4], vec![0.9]);
        assert!(zero_fc
            .eval(&p)
            .unwrap()
            .g
            .iter()
            .flatten()
            .all(|x| *x == 0.0));
    }

    #[test]
    fn pointwise_frame_connection_components_split_the_legs() {
        let gamma = gamma_from_xi(&eq_from(&["2*v2 + q1", "-2*v1 + q2"]));
        let frame = rotating_frame(1.0);
        let p = JetPoint1::new(0.2, vec![0.8, -0.3], vec![0.1, 0.4]);
        let split = frame_connection_components(&gamma, &frame, &p).unwrap();
        let full = frame_connection(&gamma, &frame).eval(&p).unwrap();
        assert_eq!(split.g0, full.g[0]);
        assert_eq!(split.gk.len(), 2);
        for k in 0..2 {
            assert_eq!(split.gk[k], full.g[1 + k]);
        }
    }

    #[test]
    fn xi_frame_vanishes_for_velocity_independent_legs_at_rest_frame() {
        // gamma with v-independent fibre legs and the rest frame
        let gamma = DynamicConnection::from_expressions(vec![
            vec![Expression::parse("0", 1).unwrap()],
            vec![Expression::parse("q1 + t", 1).unwrap()],
        ])
        .unwrap();
        let xi = xi_frame(&gamma, &ReferenceFrame::zero(1));
        for p in SampleBox::standard(1).jet_points(12, 6) {
            assert!(xi.eval(&p).unwrap()[0].abs() <= 1e-13);
        }
    }

    #[test]
    fn xi_frame_in_adapted_coordinates_keeps_only_centered_slopes() {
        // for the rest frame, xi_Gamma = (gamma^i_k - gamma^i_k at v=0) v^k
        let xi = eq_from(&["2*v2 + q1 + 0.5*v1*v1", "-2*v1 + q2"]);
        let gamma = gamma_from_xi(&xi);
        let frame = ReferenceFrame::zero(2);
        let carried = xi_frame(&gamma, &frame);
        for p in SampleBox::standard(2).jet_points(16, 7) {
            let g_at = gamma.eval(&p).unwrap();
            let g_0 = gamma
                .eval(&JetPoint1::new(p.t, p.q.clone(), vec![0.0, 0.0]))
                .unwrap();
            let want: Vec<f64> = (0..2)
                .map(|i| {
                    (0..2)
                        .map(|k| (g_at.fibre_leg(k, i) - g_0.fibre_leg(k, i)) * p.v[k])
                        .sum()
                })
                .collect();
            let got = carried.eval(&p).unwrap();
            for i in 0..2 {
                assert_relative_eq!(got[i], want[i], epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn relative_acceleration_examples() {
        let p = JetPoint1::new(0.0, vec![1.0, 0.0], vec![0.0, 0.0]);
        assert_eq!(
            relative_acceleration(&free2(), &ReferenceFrame::zero(2), &p).unwrap(),
            vec![0.0, 0.0]
        );
        // free particle seen from the rotating observers: centripetal pull
        let a = relative_acceleration(&free2(), &rotating_frame(1.0), &p).unwrap();
        assert_relative_eq!(a[0], -1.0, epsilon = 1e-12);
        assert_relative_eq!(a[1], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn geodesic_frames_have_zero_relative_acceleration_on_their_section() {
        // Gamma = exp(t) is geodesic for xi = v1
        let xi = eq_from(&["v1"]);
        let frame = frame_from(&["exp(t)"]);
        for (t, q) in SampleBox::standard(1).config_points(12, 8) {
            let r = geodesic_residual(&xi, &frame, t, &q).unwrap();
            assert!(r[0].abs() <= 1e-12);
            let g = frame.eval(t, &q).unwrap();
            let on_section = JetPoint1::new(t, q.clone(), g);
            let a = relative_acceleration(&xi, &frame, &on_section).unwrap();
            assert!(a[0].abs() <= 1e-12, "a_rel {}", a[0]);
        }
    }

    #[test]
    fn covariant_residual_examples() {
        let xi = eq_from(&["2*v2 + q1", "-2*v1 + q2 + 0.3*v1*v1"]);
        let frame = frame_from(&["q2", "-q1 + t"]);
        for p in SampleBox::standard(2).jet_points(24, 9) {
            let a = xi.eval(&p).unwrap();
            // on the equation: residual vanishes
            let r = covariant_residual(&xi, &frame, &JetPoint2::from_first(&p, a.clone())).unwrap();
            for x in &r {
                assert!(x.abs() <= 1e-10, "residual {x}");
            }
            // off the equation: the defect appears linearly in the
            // acceleration slot
            let mut shifted = a.clone();
            shifted[0] += 1.0;
            let r = covariant_residual(&xi, &frame, &JetPoint2::from_first(&p, shifted)).unwrap();
            assert_relative_eq!(r[0], 1.0, epsilon = 1e-10);
            assert!(r[1].abs() <= 1e-10);
        }
    }

    #[test]
    fn covariant_form_in_relative_velocities_matches_the_vertical_form() {
        // d_t(v - Gamma) - gFC^i_k (v - Gamma)^k equals
        // a - gFC^i_0 - v^j gFC^i_j identically
        let xi = eq_from(&["2*v2 + q1 + 0.2*v1*v1", "-2*v1 + q2"]);
        let frame = frame_from(&["q2 + t", "-0.7*q1"]);
        let gamma = gamma_from_xi(&xi);
        let fc = frame_connection(&gamma, &frame);
        for p in SampleBox::standard(2).jet_points(16, 27) {
            let a = xi.eval(&p).unwrap();
            let c = fc.eval(&p).unwrap();
            let d = expr_tq_derivs(frame.components(), &p.t, &p.q).unwrap();
            let gv: Vec<f64> = d.iter().map(|c| c.value).collect();
            for i in 0..2 {
                let mut vertical = a[i] - c.g[0][i];
                for j in 0..2 {
                    vertical -= p.v[j] * c.g[1 + j][i];
                }
                // d_t qdot^i = a^i - d_t Gamma^i along the jet point
                let mut rel_form = a[i] - d[i].dt;
                for j in 0..2 {
                    rel_form -= p.v[j] * d[i].dq[j];
                    rel_form -= c.g[1 + j][i] * (p.v[j] - gv[j]);
                }
                assert_relative_eq!(vertical, rel_form, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn frame_contraction_of_the_covariant_differential_is_the_geodesic_residual() {
        let xi = eq_from(&["q1 + 2*v1 + 0.4*v2*v2", "t - q2 + v1*v2"]);
        let frame = frame_from(&["sin(t) + q2", "0.5*q1"]);
        for p in SampleBox::standard(2).jet_points(12, 28) {
            let report = coriolis_decomposition(&xi, &frame, &p).unwrap();
            let g = frame.eval(p.t, &p.q).unwrap();
            let geo = geodesic_residual(&xi, &frame, p.t, &p.q).unwrap();
            for i in 0..2 {
                let mut contracted = report.nabla[i][0];
                for k in 0..2 {
                    contracted += g[k] * report.nabla[i][1 + k];
                }
                assert_relative_eq!(contracted, geo[i], epsilon = 1e-11);
            }
        }
    }

    #[test]
    fn vertical_differential_vanishes_for_free_motion_in_its_own_frame() {
        // the free equation carried into the rotating chart, watched by the
        // inertial observers (expressed in that chart): the frame-connection
        // differential alone annihilates points on the equation
        let chart = rotation_chart(1.0);
        let xi = transform_dynamic_equation(&free2(), &chart);
        let inertial_in_rotating = frame_from(&["q2", "-q1"]);
        let gamma = gamma_from_xi(&xi);
        let fc = frame_connection(&gamma, &inertial_in_rotating);
        for p in SampleBox::standard(2).jet_points(24, 19) {
            let a = xi.eval(&p).unwrap();
            let c = fc.eval(&p).unwrap();
            for i in 0..2 {
                let mut vertical = a[i] - c.g[0][i];
                for j in 0..2 {
                    vertical -= p.v[j] * c.g[1 + j][i];
                }
                assert!(vertical.abs() <= 1e-10, "differential {vertical:.3e}");
            }
        }
    }

    #[test]
    fn coriolis_split_agrees_with_the_direct_definition() {
        // hand-checkable rotating case
        let report = coriolis_decomposition(
            &free2(),
            &rotating_frame(1.0),
            &JetPoint1::new(0.0, vec![1.0, 0.0], vec![0.0, 0.0]),
        )
        .unwrap();
        assert_relative_eq!(report.a_direct[0], -1.0, epsilon = 1e-12);
        assert_relative_eq!(report.a_decomposed[0], -1.0, epsilon = 1e-12);
        assert_relative_eq!(report.a_direct[1], 0.0, epsilon = 1e-12);
        // nabla holds the frame's rotation generator
        assert_relative_eq!(report.nabla[0][2], -1.0, epsilon = 1e-12);
        assert_relative_eq!(report.nabla[1][1], 1.0, epsilon = 1e-12);
        assert_relative_eq!(report.rel_v[1], -1.0, epsilon = 1e-12);

        // velocity-quadratic equation with a moving observer
        let xi = eq_from(&["v1^2"]);
        let frame = ReferenceFrame::constant(&[1.0]);
        for p in SampleBox::standard(1).jet_points(16, 10) {
            let report = coriolis_decomposition(&xi, &frame, &p).unwrap();
            assert_relative_eq!(report.a_direct[0], report.a_decomposed[0], epsilon = 1e-10);
            // closed form: xi - (v-1)^2 = 2v - 1
            assert_relative_eq!(report.a_direct[0], 2.0 * p.v[0] - 1.0, epsilon = 1e-10);
        }

        // trivial case
        let report = coriolis_decomposition(
            &DynamicEquation::zero(1),
            &ReferenceFrame::zero(1),
            &JetPoint1::new(0.0, vec![0.5], vec![0.5]),
        )
        .unwrap();
        assert_eq!(report.a_direct, vec![0.0]);
        assert_eq!(report.a_decomposed, vec![0.0]);
    }

    #[test]
    fn coriolis_rejects_non_quadratic_equations() {
        let err = coriolis_decomposition(
            &eq_from(&["sin(v1)"]),
            &ReferenceFrame::zero(1),
            &JetPoint1::new(0.0, vec![0.0], vec![2.0]),
        )
        .unwrap_err();
        assert!(matches!(err, EvalError::NotQuadratic { .. }));
    }

    #[test]
    fn free_motion_equation_examples() {
        let sb = SampleBox::standard(2);
        // identity chart, rest frame: no inertial force
        let xi = free_motion_equation(
            &ReferenceFrame::zero(2),
            &CoordinateChange::identity(2),
            &sb,
            32,
        )
        .unwrap();
        for p in sb.jet_points(8, 0) {
            assert!(xi.eval(&p).unwrap().iter().all(|x| x.abs() <= 1e-13));
        }

        // rotating pair: must match the transformed free equation
        let chart = rotation_chart_from_adapted(1.0);
        let xi = free_motion_equation(&rotating_frame(1.0), &chart, &sb, 64).unwrap();
        let transformed = transform_dynamic_equation(&free2(), &chart);
        for p in sb.jet_points(48, 11) {
            let a = xi.eval(&p).unwrap();
            let b = transformed.eval(&p).unwrap();
            for i in 0..2 {
                assert_relative_eq!(a[i], b[i], epsilon = 1e-10);
            }
        }

        // affine boost: constant frames feel no inertial force
        let chart = galilei_chart(&DMatrix::identity(2, 2), &[0.7, -0.2], &[1.0, 0.0])
            .unwrap()
            .inverse_change();
        let xi =
            free_motion_equation(&ReferenceFrame::constant(&[0.7, -0.2]), &chart, &sb, 32).unwrap();
        for p in sb.jet_points(8, 12) {
            assert!(xi.eval(&p).unwrap().iter().all(|x| x.abs() <= 1e-12));
        }
    }

    #[test]
    fn free_motion_equation_rejects_mismatched_pairs() {
        let err = free_motion_equation(
            &rotating_frame(1.0),
            &CoordinateChange::identity(2),
            &SampleBox::standard(2),
            32,
        )
        .unwrap_err();
        assert!(matches!(err, EvalError::InconsistentFrameChart { .. }));
    }

    #[test]
    fn transform_built_free_motion_is_flat() {
        // the deepest composition in the crate: curvature of the connection
        // of a transformed equation chains three Taylor levels
        let xi = transform_dynamic_equation(&free2(), &rotation_chart(1.0));
        let gamma = gamma_from_xi(&xi);
        for p in SampleBox::standard(2).jet_points(24, 20) {
            let r = crate::connections::curvature(&gamma, &p).unwrap();
            assert!(r.max_abs() <= 1e-10, "curvature {}", r.max_abs());
        }
    }

    #[test]
    fn affine_charts_transport_acceleration_by_the_matrix() {
        let k = DMatrix::from_row_slice(2, 2, &[1.2, -0.4, 0.3, 0.9]);
        let chart = galilei_chart(&k, &[0.5, -1.0], &[2.0, 0.0]).unwrap();
        let p = JetPoint1::new(0.3, vec![1.0, -0.5], vec![0.2, 0.7]);
        let push = |a: Vec<f64>| chart.prolong_jet2(&JetPoint2::from_first(&p, a)).unwrap().a;
        let base = push(vec![0.0, 0.0]);
        for (j, e) in [(0, [1.0, 0.0]), (1, [0.0, 1.0])] {
            let shifted = push(e.to_vec());
            for i in 0..2 {
                assert_relative_eq!(shifted[i] - base[i], k[(i, j)], epsilon = 1e-13);
            }
        }
    }

    #[test]
    fn curvature_criterion_verdicts() {
        let sb = SampleBox::standard(2);
        let chart = rotation_chart_from_adapted(1.0);
        let xi = free_motion_equation(&rotating_frame(1.0), &chart, &sb, 64).unwrap();
        let report = free_motion_curvature_test(&xi, &sb, 64, tol::CURVATURE_FLAT).unwrap();
        assert_eq!(report.verdict, CurvatureVerdict::InconclusivePass);
        assert!(report.max_abs_curvature <= 1e-8);

        let harmonic = eq_from(&["-q1"]);
        let report =
            free_motion_curvature_test(&harmonic, &SampleBox::standard(1), 64, tol::CURVATURE_FLAT)
                .unwrap();
        assert_eq!(report.verdict, CurvatureVerdict::FailsNecessaryCriterion);
        assert!(report.max_abs_curvature >= 0.1);

        let report = free_motion_curvature_test(
            &DynamicEquation::zero(1),
            &SampleBox::standard(1),
            32,
            tol::CURVATURE_FLAT,
        )
        .unwrap();
        assert_eq!(report.verdict, CurvatureVerdict::InconclusivePass);
    }

    #[test]
    fn galilei_identity_is_the_identity() {
        let chart = galilei_chart(&DMatrix::identity(2, 2), &[0.0, 0.0], &[0.0, 0.0]).unwrap();
        let p = JetPoint1::new(0.4, vec![1.0, -2.0], vec![0.3, 0.6]);
        assert_eq!(chart.prolong_jet1(&p).unwrap(), p);
    }

    #[test]
    fn galilei_transforms_preserve_free_motion() {
        let k = DMatrix::from_row_slice(2, 2, &[1.0, 0.4, -0.3, 1.2]);
        let chart = galilei_chart(&k, &[3.0, -1.0], &[0.5, 2.0]).unwrap();
        let xi = transform_dynamic_equation(&free2(), &chart);
        for p in SampleBox::standard(2).jet_points(16, 13) {
            for x in xi.eval(&p).unwrap() {
                assert!(x.abs() <= 1e-12, "residual {x}");
            }
        }
    }

    #[test]
    fn galilei_charts_compose_into_galilei_charts() {
        let sb = SampleBox::standard(2);
        let k1 = DMatrix::from_row_slice(2, 2, &[1.0, 0.2, 0.0, 0.8]);
        let k2 = DMatrix::from_row_slice(2, 2, &[0.9, -0.1, 0.3, 1.1]);
        let (u1, a1) = ([0.5, -0.5], [1.0, 0.0]);
        let (u2, a2) = ([-0.2, 0.4], [0.0, 2.0]);
        let c1 = galilei_chart(&k1, &u1, &a1).unwrap();
        let c2 = galilei_chart(&k2, &u2, &a2).unwrap();
        // composite parameters: k = k2 k1, u = k2 u1 + u2, a = k2 a1 + a2
        let k = k2.clone() * k1.clone();
        let mul = |m: &DMatrix<f64>, x: &[f64; 2]| {
            [
                m[(0, 0)] * x[0] + m[(0, 1)] * x[1],
                m[(1, 0)] * x[0] + m[(1, 1)] * x[1],
            ]
        };
        let u = mul(&k2, &u1);
        let u = [u[0] + u2[0], u[1] + u2[1]];
        let a = mul(&k2, &a1);
        let a = [a[0] + a2[0], a[1] + a2[1]];
        let direct = galilei_chart(&k, &u, &a).unwrap();
        let composed = c2.compose(&c1, &sb, 32).unwrap();
        for p in sb.jet_points(12, 14) {
            let x = composed.prolong_jet1(&p).unwrap();
            let y = direct.prolong_jet1(&p).unwrap();
            for i in 0..2 {
                assert_relative_eq!(x.q[i], y.q[i], epsilon = 1e-12);
                assert_relative_eq!(x.v[i], y.v[i], epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn galilei_rejects_singular_matrices() {
        let k = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        assert!(matches!(
            galilei_chart(&k, &[0.0, 0.0], &[0.0, 0.0]),
            Err(ChartError::SingularMatrix { .. })
        ));
    }

    #[test]
    fn frame_connection_inherits_symmetry() {
        let xi = eq_from(&["sin(t)*v1 + q2^2", "v1*v2 - cos(q1)"]);
        let gamma = gamma_from_xi(&xi);
        let frame = frame_from(&["q2 + sin(t)", "-q1"]);
        let fc = frame_connection(&gamma, &frame);
        for p in SampleBox::standard(2).jet_points(24, 15) {
            let t = torsion(&fc, &p).unwrap();
            assert!(t.max_abs() <= 1e-10, "torsion {}", t.max_abs());
        }
    }

    #[test]
    fn relative_acceleration_via_jp_closed_form_at_rest_frame() {
        // with the rest frame, a_Gamma has the closed velocity-centered form
        let xi = eq_from(&["sin(t)*v1 + q2^2 + v2*v2", "cos(q1)*v2"]);
        let frame = ReferenceFrame::zero(2);
        for p in SampleBox::standard(2).jet_points(24, 16) {
            let a = relative_acceleration(&xi, &frame, &p).unwrap();
            let gamma = gamma_from_xi(&xi);
            let g_at = gamma.eval(&p).unwrap();
            let g_0 = gamma
                .eval(&JetPoint1::new(p.t, p.q.clone(), vec![0.0, 0.0]))
                .unwrap();
            let xi_val = xi.eval(&p).unwrap();
            for i in 0..2 {
                let mut want = xi_val[i];
                for k in 0..2 {
                    want -= (g_at.fibre_leg(k, i) - g_0.fibre_leg(k, i)) * p.v[k];
                }
                assert_relative_eq!(a[i], want, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn tilde_gamma_generates_the_frame_transport_equation() {
        // sanity: xi of tilde(gamma) evaluated on the frame's section equals
        // the frame's own transport acceleration
        let gamma = gamma_from_xi(&eq_from(&["q1 + v1"]));
        let frame = frame_from(&["sin(t) + q1"]);
        for (t, q) in SampleBox::standard(1).config_points(12, 17) {
            let g = frame.eval(t, &q).unwrap();
            let p = JetPoint1::new(t, q.clone(), g.clone());
            let xi_tilde = xi_from_gamma(&tilde_gamma(&gamma, &frame))
                .eval(&p)
                .unwrap();
            let d = expr_tq_derivs(frame.components(), &t, &q).unwrap();
            // on the section, gamma^i_k (v^k - Gamma^k) drops out
            let want = d[0].dt + g[0] * d[0].dq[0];
            assert_relative_eq!(xi_tilde[0], want, epsilon = 1e-12);
        }
    }
}
