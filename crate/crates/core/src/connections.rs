//! Dynamic equations, reference frames, dynamic connections, and the
//! calculus relating them.
//!
//! A dynamic equation is an explicit second-order law a^i = xi^i(t, q, v),
//! held as an evaluable field so that derived equations (transformed,
//! frame-relative, ...) compose freely. A reference frame is a connection on
//! the configuration bundle, i.e. a time-dependent velocity field
//! Gamma^i(t, q). A dynamic connection gamma^i_lambda(t, q, v) is a
//! connection on the affine jet bundle; the two directions of the
//! equation/connection correspondence are [`xi_from_gamma`] and
//! [`gamma_from_xi`].

use std::sync::Arc;

use crate::ad::Scalar;
use crate::ad::Taylor2;
use crate::bundle::{JetPoint1, JetPoint2};
use crate::error::EvalError;
use crate::expr::{Ast, Expression};
use crate::field::{
    expr_tq_derivs, impl_dyn_conn_field, impl_dyn_jet_field, jet_field_v_derivs, seed_full,
    seed_velocities, ConnFieldDyn, ExprConnField, ExprJetField, FieldScalar, JetFieldDyn, T1,
};
use crate::sample::{probe_velocities, SampleBox};
use crate::tol;

/// An explicit second-order dynamic equation a^i = xi^i(t, q, v).
#[derive(Clone)]
pub struct DynamicEquation {
    m: usize,
    field: Arc<dyn JetFieldDyn>,
}

impl std::fmt::Debug for DynamicEquation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DynamicEquation")
            .field("m", &self.m)
            .finish_non_exhaustive()
    }
}

impl DynamicEquation {
    pub fn from_expressions(comps: Vec<Expression>) -> Result<Self, EvalError> {
        let m = comps.len();
        if m == 0 {
            return Err(EvalError::InvalidArgument(
                "equation needs at least one component".into(),
            ));
        }
        for (i, e) in comps.iter().enumerate() {
            if e.m() != m {
                return Err(EvalError::DimensionMismatch {
                    context: format!("equation component {}", i + 1),
                    expected: m,
                    actual: e.m(),
                });
            }
        }
        Ok(DynamicEquation {
            m,
            field: Arc::new(ExprJetField { comps }),
        })
    }

    /// The free-motion right side in its own adapted coordinates: xi = 0.
    pub fn zero(m: usize) -> Self {
        let comps = (0..m)
            .map(|_| Expression::from_ast(Ast::Num(0.0), m).expect("constant"))
            .collect();
        Self::from_expressions(comps).expect("m > 0")
    }

    pub(crate) fn from_field(m: usize, field: Arc<dyn JetFieldDyn>) -> Self {
        DynamicEquation { m, field }
    }

    pub(crate) fn field(&self) -> &Arc<dyn JetFieldDyn> {
        &self.field
    }

    pub fn dim(&self) -> usize {
        self.m
    }

    pub fn eval(&self, p: &JetPoint1) -> Result<Vec<f64>, EvalError> {
        self.check_dim(p.dim())?;
        self.field.eval_f64(&p.t, &p.q, &p.v)
    }

    pub(crate) fn eval_scalar<T: FieldScalar>(
        &self,
        t: &T,
        q: &[T],
        v: &[T],
    ) -> Result<Vec<T>, EvalError> {
        T::eval_jet_field(&*self.field, t, q, v)
    }

    fn check_dim(&self, dim: usize) -> Result<(), EvalError> {
        if dim != self.m {
            return Err(EvalError::DimensionMismatch {
                context: "dynamic equation".into(),
                expected: self.m,
                actual: dim,
            });
        }
        Ok(())
    }
}

/// A reference frame: a connection Gamma^i(t, q) on the configuration
/// bundle, describing an observer family by its velocity field.
#[derive(Clone, Debug)]
pub struct ReferenceFrame {
    m: usize,
    comps: Vec<Expression>,
}

impl ReferenceFrame {
    pub fn from_expressions(comps: Vec<Expression>) -> Result<Self, EvalError> {
        let m = comps.len();
        if m == 0 {
            return Err(EvalError::InvalidArgument(
                "frame needs at least one component".into(),
            ));
        }
        for (i, e) in comps.iter().enumerate() {
            if e.m() != m {
                return Err(EvalError::DimensionMismatch {
                    context: format!("frame component {}", i + 1),
                    expected: m,
                    actual: e.m(),
                });
            }
            if e.uses_velocity() {
                return Err(EvalError::InvalidArgument(format!(
                    "frame component {} depends on a velocity; a frame is a field on the configuration space",
                    i + 1
                )));
            }
        }
        Ok(ReferenceFrame { m, comps })
    }

    /// The frame at rest in the current coordinates.
    pub fn zero(m: usize) -> Self {
        let comps = (0..m)
            .map(|_| Expression::from_ast(Ast::Num(0.0), m).expect("constant"))
            .collect();
        Self::from_expressions(comps).expect("m > 0")
    }

    /// A uniformly moving observer family.
    pub fn constant(u: &[f64]) -> Self {
        let m = u.len();
        let comps = u
            .iter()
            .map(|&c| {
                let ast = if c < 0.0 {
                    Ast::Neg(Box::new(Ast::Num(-c)))
                } else {
                    Ast::Num(c)
                };
                Expression::from_ast(ast, m).expect("constant")
            })
            .collect();
        Self::from_expressions(comps).expect("m > 0")
    }

    pub fn dim(&self) -> usize {
        self.m
    }

    pub fn components(&self) -> &[Expression] {
        &self.comps
    }

    pub fn eval(&self, t: f64, q: &[f64]) -> Result<Vec<f64>, EvalError> {
        self.eval_scalar(&t, q)
    }

    pub(crate) fn eval_scalar<T: Scalar>(&self, t: &T, q: &[T]) -> Result<Vec<T>, EvalError> {
        self.comps
            .iter()
            .map(|e| e.eval_scalar(t, q, &[]))
            .collect()
    }
}

/// A connection on the affine jet bundle, with components
/// gamma^i_lambda(t, q, v), lambda = 0 (time leg) or 1..=m (fibre legs).
#[derive(Clone)]
pub struct DynamicConnection {
    m: usize,
    field: Arc<dyn ConnFieldDyn>,
}

impl std::fmt::Debug for DynamicConnection {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DynamicConnection")
            .field("m", &self.m)
            .finish_non_exhaustive()
    }
}

/// Pointwise components of a dynamic connection.
#[derive(Debug, Clone, PartialEq)]
pub struct ConnectionComponents {
    /// `g[lambda][i]` with lambda = 0..=m.
    pub g: Vec<Vec<f64>>,
}

impl ConnectionComponents {
    pub fn time_leg(&self, i: usize) -> f64 {
        self.g[0][i]
    }
    pub fn fibre_leg(&self, k: usize, i: usize) -> f64 {
        self.g[1 + k][i]
    }
}

impl DynamicConnection {
    /// Builds from (m + 1) * m expressions, outer index lambda = 0..=m.
    pub fn from_expressions(comps: Vec<Vec<Expression>>) -> Result<Self, EvalError> {
        if comps.is_empty() || comps[0].is_empty() {
            return Err(EvalError::InvalidArgument(
                "connection needs at least one component".into(),
            ));
        }
        let m = comps[0].len();
        if comps.len() != m + 1 {
            return Err(EvalError::DimensionMismatch {
                context: "connection legs".into(),
                expected: m + 1,
                actual: comps.len(),
            });
        }
        for row in &comps {
            if row.len() != m || row.iter().any(|e| e.m() != m) {
                return Err(EvalError::DimensionMismatch {
                    context: "connection components".into(),
                    expected: m,
                    actual: row.len(),
                });
            }
        }
        Ok(DynamicConnection {
            m,
            field: Arc::new(ExprConnField { comps }),
        })
    }

    pub fn zero(m: usize) -> Self {
        let comps = (0..=m)
            .map(|_| {
                (0..m)
                    .map(|_| Expression::from_ast(Ast::Num(0.0), m).expect("constant"))
                    .collect()
            })
            .collect();
        Self::from_expressions(comps).expect("m > 0")
    }

    pub(crate) fn from_field(m: usize, field: Arc<dyn ConnFieldDyn>) -> Self {
        DynamicConnection { m, field }
    }

    pub(crate) fn field(&self) -> &Arc<dyn ConnFieldDyn> {
        &self.field
    }

    pub fn dim(&self) -> usize {
        self.m
    }

    pub fn eval(&self, p: &JetPoint1) -> Result<ConnectionComponents, EvalError> {
        self.check_dim(p.dim())?;
        Ok(ConnectionComponents {
            g: self.field.eval_f64(&p.t, &p.q, &p.v)?,
        })
    }

    pub(crate) fn eval_scalar<T: FieldScalar>(
        &self,
        t: &T,
        q: &[T],
        v: &[T],
    ) -> Result<Vec<Vec<T>>, EvalError> {
        T::eval_conn_field(&*self.field, t, q, v)
    }

    fn check_dim(&self, dim: usize) -> Result<(), EvalError> {
        if dim != self.m {
            return Err(EvalError::DimensionMismatch {
                context: "dynamic connection".into(),
                expected: self.m,
                actual: dim,
            });
        }
        Ok(())
    }
}

/// A second-order connection: a horizontal field
/// d_t + chi^i_t d_i + xi^i d^t_i on the first jet space. Holonomic means
/// chi^i_t coincides with the velocity coordinate itself.
pub struct SecondOrderConnection {
    chi: Arc<dyn JetFieldDyn>,
    xi: DynamicEquation,
    holonomic: bool,
}

impl SecondOrderConnection {
    pub fn chi_at(&self, p: &JetPoint1) -> Result<Vec<f64>, EvalError> {
        self.chi.eval_f64(&p.t, &p.q, &p.v)
    }

    pub fn xi(&self) -> &DynamicEquation {
        &self.xi
    }

    pub fn is_holonomic(&self) -> bool {
        self.holonomic
    }
}

/// Velocities relative to the observer family: v^i - Gamma^i(t, q). This is
/// the covariant differential of the frame applied to the jet point.
pub fn relative_velocity(frame: &ReferenceFrame, p: &JetPoint1) -> Result<Vec<f64>, EvalError> {
    if frame.dim() != p.dim() {
        return Err(EvalError::DimensionMismatch {
            context: "relative velocity".into(),
            expected: frame.dim(),
            actual: p.dim(),
        });
    }
    let g = frame.eval(p.t, &p.q)?;
    Ok(p.v.iter().zip(&g).map(|(v, g)| v - g).collect())
}

struct FrameProlongationXi {
    frame: ReferenceFrame,
}

impl FrameProlongationXi {
    fn eval_impl<T: Scalar>(&self, t: &T, q: &[T], v: &[T]) -> Result<Vec<T>, EvalError> {
        let d = expr_tq_derivs(self.frame.components(), t, q)?;
        Ok(d.iter().map(|c| c.total_time_derivative(v)).collect())
    }
}

impl_dyn_jet_field!(FrameProlongationXi);

/// Prolongs a frame to a second-order connection on the jet space:
/// chi^i = Gamma^i, xi^i = d_t Gamma^i. The result is never holonomic for a
/// genuine frame (chi has no velocity dependence), but the flag is checked by
/// sampling rather than assumed.
pub fn frame_jet_prolongation(frame: &ReferenceFrame) -> Result<SecondOrderConnection, EvalError> {
    let m = frame.dim();
    let chi: Arc<dyn JetFieldDyn> = Arc::new(ExprJetField {
        comps: frame.components().to_vec(),
    });
    let xi = DynamicEquation::from_field(
        m,
        Arc::new(FrameProlongationXi {
            frame: frame.clone(),
        }),
    );
    let mut holonomic = true;
    for p in SampleBox::standard(m).jet_points(64, 0) {
        let c = chi.eval_f64(&p.t, &p.q, &p.v)?;
        if c.iter()
            .zip(&p.v)
            .any(|(chi_i, v_i)| (chi_i - v_i).abs() > tol::HOLONOMIC)
        {
            holonomic = false;
            break;
        }
    }
    Ok(SecondOrderConnection { chi, xi, holonomic })
}

struct XiFromGamma {
    m: usize,
    gamma: Arc<dyn ConnFieldDyn>,
}

impl XiFromGamma {
    fn eval_impl<T: FieldScalar>(&self, t: &T, q: &[T], v: &[T]) -> Result<Vec<T>, EvalError> {
        let g = T::eval_conn_field(&*self.gamma, t, q, v)?;
        Ok((0..self.m)
            .map(|i| {
                let mut acc = g[0][i].clone();
                for (j, vj) in v.iter().enumerate() {
                    acc = acc + vj.clone() * g[1 + j][i].clone();
                }
                acc
            })
            .collect())
    }
}

impl_dyn_jet_field!(XiFromGamma);

/// The dynamic equation generated by a dynamic connection:
/// xi^i = gamma^i_0 + v^j gamma^i_j.
pub fn xi_from_gamma(gamma: &DynamicConnection) -> DynamicEquation {
    DynamicEquation::from_field(
        gamma.dim(),
        Arc::new(XiFromGamma {
            m: gamma.dim(),
            gamma: gamma.field().clone(),
        }),
    )
}

struct GammaFromXi {
    m: usize,
    xi: Arc<dyn JetFieldDyn>,
}

impl GammaFromXi {
    fn eval_impl<T>(&self, t: &T, q: &[T], v: &[T]) -> Result<Vec<Vec<T>>, EvalError>
    where
        T: FieldScalar,
        Taylor2<T>: FieldScalar,
    {
        let d = jet_field_v_derivs(&*self.xi, t, q, v)?;
        let half = t.constant_like(0.5);
        // fibre legs gamma^i_j = (1/2) dxi^i/dv_j; time leg balances so the
        // generated equation returns xi itself
        let mut out = vec![Vec::with_capacity(self.m); self.m + 1];
        for i in 0..self.m {
            let mut time_leg = d[i].value.clone();
            for (j, vj) in v.iter().enumerate() {
                let leg = half.clone() * d[i].dv[j].clone();
                time_leg = time_leg - vj.clone() * leg.clone();
                out[1 + j].push(leg);
            }
            out[0].push(time_leg);
        }
        Ok(out)
    }
}

impl_dyn_conn_field!(GammaFromXi, depth_limited);

/// The symmetric dynamic connection associated to an equation:
/// gamma^i_j = (1/2) dxi^i/dv_j, gamma^i_0 = xi^i - v^j gamma^i_j.
/// Components are closures over the equation's evaluator; derivatives are
/// taken in Taylor arithmetic at each evaluation point.
pub fn gamma_from_xi(xi: &DynamicEquation) -> DynamicConnection {
    DynamicConnection::from_field(
        xi.dim(),
        Arc::new(GammaFromXi {
            m: xi.dim(),
            xi: xi.field().clone(),
        }),
    )
}

/// Torsion of a dynamic connection at a point:
/// T^k_i = gamma^k_i - d(gamma^k_0)/dv_i - v^j d(gamma^k_j)/dv_i.
/// A connection is recoverable from its own equation exactly when this
/// vanishes.
#[derive(Debug, Clone)]
pub struct TorsionTensor {
    /// `t[k][i]`.
    pub t: Vec<Vec<f64>>,
}

impl TorsionTensor {
    pub fn max_abs(&self) -> f64 {
        self.t
            .iter()
            .flatten()
            .fold(0.0, |acc, x| f64::max(acc, x.abs()))
    }
}

pub fn torsion(gamma: &DynamicConnection, p: &JetPoint1) -> Result<TorsionTensor, EvalError> {
    let m = gamma.dim();
    if p.dim() != m {
        return Err(EvalError::DimensionMismatch {
            context: "torsion".into(),
            expected: m,
            actual: p.dim(),
        });
    }
    let (t, q, v) = seed_velocities(&p.t, &p.q, &p.v);
    let g = gamma.eval_scalar::<T1>(&t, &q, &v)?;
    let mut out = vec![vec![0.0; m]; m];
    for k in 0..m {
        for i in 0..m {
            let mut val = *g[1 + i][k].value() - g[0][k].grad()[i];
            for j in 0..m {
                val -= p.v[j] * g[1 + j][k].grad()[i];
            }
            out[k][i] = val;
        }
    }
    Ok(TorsionTensor { t: out })
}

/// Curvature of a dynamic connection at a point, antisymmetric in the two
/// base legs by storage:
/// R^i_{lm} = d_l gamma^i_m - d_m gamma^i_l
///          + gamma^j_l d(gamma^i_m)/dv_j - gamma^j_m d(gamma^i_l)/dv_j,
/// with l, m = 0..=dim and d_0 the time derivative.
#[derive(Debug, Clone)]
pub struct CurvatureTensor {
    m: usize,
    /// Entries for l < m only, laid out i-major then (l, m) lexicographic.
    packed: Vec<f64>,
}

impl CurvatureTensor {
    fn pair_index(m: usize, l: usize, mu: usize) -> usize {
        debug_assert!(l < mu && mu <= m);
        // pairs (l, mu) with l < mu over 0..=m, lexicographic
        l * (2 * m + 1 - l) / 2 + (mu - l - 1)
    }

    pub fn dim(&self) -> usize {
        self.m
    }

    /// R^i_{l mu}; the antisymmetric partner is the negated stored entry and
    /// the diagonal is exactly zero.
    pub fn component(&self, i: usize, l: usize, mu: usize) -> f64 {
        use std::cmp::Ordering;
        let pairs = (self.m + 1) * self.m / 2;
        match l.cmp(&mu) {
            Ordering::Equal => 0.0,
            Ordering::Less => self.packed[i * pairs + Self::pair_index(self.m, l, mu)],
            Ordering::Greater => -self.packed[i * pairs + Self::pair_index(self.m, mu, l)],
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.packed
            .iter()
            .fold(0.0, |acc, x| f64::max(acc, x.abs()))
    }
}

pub fn curvature(gamma: &DynamicConnection, p: &JetPoint1) -> Result<CurvatureTensor, EvalError> {
    let m = gamma.dim();
    if p.dim() != m {
        return Err(EvalError::DimensionMismatch {
            context: "curvature".into(),
            expected: m,
            actual: p.dim(),
        });
    }
    // seed order: t, q_1..q_m, v_1..v_m
    let (t, q, v) = seed_full(&p.t, &p.q, &p.v);
    let g = gamma.eval_scalar::<T1>(&t, &q, &v)?;
    let base = |comp: &T1, lambda: usize| comp.grad()[lambda]; // d_lambda, lambda <= m
    let vert = |comp: &T1, j: usize| comp.grad()[1 + m + j]; // d/dv_j
    let mut packed = Vec::with_capacity(m * (m + 1) * m / 2);
    for i in 0..m {
        for l in 0..=m {
            for mu in (l + 1)..=m {
                let mut r = base(&g[mu][i], l) - base(&g[l][i], mu);
                for j in 0..m {
                    r += *g[l][j].value() * vert(&g[mu][i], j)
                        - *g[mu][j].value() * vert(&g[l][i], j);
                }
                packed.push(r);
            }
        }
    }
    Ok(CurvatureTensor { m, packed })
}

/// Residual of a second-jet point against the equation generated by a
/// connection: a^i - gamma^i_0 - v^j gamma^i_j. Zero exactly on the equation.
pub fn vertical_covariant_differential(
    gamma: &DynamicConnection,
    p: &JetPoint2,
) -> Result<Vec<f64>, EvalError> {
    let m = gamma.dim();
    if p.dim() != m {
        return Err(EvalError::DimensionMismatch {
            context: "vertical covariant differential".into(),
            expected: m,
            actual: p.dim(),
        });
    }
    let g = gamma.eval(&p.first_jet())?;
    Ok((0..m)
        .map(|i| {
            let mut acc = p.a[i] - g.g[0][i];
            for j in 0..m {
                acc -= p.v[j] * g.g[1 + j][i];
            }
            acc
        })
        .collect())
}

/// Fit of an equation's velocity dependence at a configuration point:
/// xi^i = b0^i + b1^i_j v^j + b2^i_{jk} v^j v^k, with the remainder probed at
/// fixed quasi-random velocities.
#[derive(Debug, Clone)]
pub struct QuadraticCoefficients {
    pub b0: Vec<f64>,
    /// `b1[i][j]`.
    pub b1: Vec<Vec<f64>>,
    /// `b2[i][j][k]`, symmetric in (j, k).
    pub b2: Vec<Vec<Vec<f64>>>,
    pub is_quadratic: bool,
    pub max_remainder: f64,
}

impl QuadraticCoefficients {
    pub fn predict(&self, v: &[f64]) -> Vec<f64> {
        let m = self.b0.len();
        (0..m)
            .map(|i| {
                let mut acc = self.b0[i];
                for j in 0..m {
                    acc += self.b1[i][j] * v[j];
                    for k in 0..m {
                        acc += self.b2[i][j][k] * v[j] * v[k];
                    }
                }
                acc
            })
            .collect()
    }
}

const QUADRATIC_PROBE_COUNT: usize = 16;

pub fn quadratic_coefficients(
    xi: &DynamicEquation,
    t: f64,
    q: &[f64],
) -> Result<QuadraticCoefficients, EvalError> {
    let m = xi.dim();
    if q.len() != m {
        return Err(EvalError::DimensionMismatch {
            context: "quadratic coefficients".into(),
            expected: m,
            actual: q.len(),
        });
    }
    let zero_v = vec![0.0; m];
    let (lt, lq, lv) = seed_velocities(&t, q, &zero_v);
    let at_origin = xi.eval_scalar::<T1>(&lt, &lq, &lv)?;
    let b0: Vec<f64> = at_origin.iter().map(|c| *c.value()).collect();
    let b1: Vec<Vec<f64>> = at_origin.iter().map(|c| c.grad().to_vec()).collect();
    let b2: Vec<Vec<Vec<f64>>> = at_origin
        .iter()
        .map(|c| {
            (0..m)
                .map(|j| (0..m).map(|k| 0.5 * *c.hess(j, k)).collect())
                .collect()
        })
        .collect();
    let fit = QuadraticCoefficients {
        b0,
        b1,
        b2,
        is_quadratic: true,
        max_remainder: 0.0,
    };
    let mut max_remainder = 0.0f64;
    for v in probe_velocities(m, QUADRATIC_PROBE_COUNT) {
        let actual = xi.eval(&JetPoint1::new(t, q.to_vec(), v.clone()))?;
        let predicted = fit.predict(&v);
        for (a, p) in actual.iter().zip(&predicted) {
            max_remainder = max_remainder.max((a - p).abs());
        }
    }
    Ok(QuadraticCoefficients {
        is_quadratic: max_remainder <= tol::QUADRATIC_PROBE,
        max_remainder,
        ..fit
    })
}
