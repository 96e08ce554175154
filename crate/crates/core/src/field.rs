//! Runtime-composable fields on the first jet space.
//!
//! Equations, frames, and connections are composed at run time (an equation
//! may be a transformed equation, a connection may be derived from an
//! equation, ...), so they are held behind trait objects. Derivatives of such
//! composites are taken by lifting the evaluation one Taylor level: a field
//! evaluated at coefficient type `T` extracts derivatives of an inner field
//! by evaluating it at `Taylor2<T>`. Trait objects cannot carry a generic
//! method, so the dyn traits expose one entry point per supported level
//! (`f64`, `T1`, `T2`, `T3`); three levels of nesting cover every operation
//! in the crate, and anything deeper fails with `NestingTooDeep`.

use crate::ad::{Scalar, Taylor2};
use crate::error::EvalError;
use crate::expr::Expression;

pub(crate) type T1 = Taylor2<f64>;
pub(crate) type T2 = Taylor2<T1>;
pub(crate) type T3 = Taylor2<T2>;

/// An m-component field over (t, q, v), dispatchable at each Taylor level.
pub trait JetFieldDyn: Send + Sync {
    fn eval_f64(&self, t: &f64, q: &[f64], v: &[f64]) -> Result<Vec<f64>, EvalError>;
    fn eval_t1(&self, t: &T1, q: &[T1], v: &[T1]) -> Result<Vec<T1>, EvalError>;
    fn eval_t2(&self, t: &T2, q: &[T2], v: &[T2]) -> Result<Vec<T2>, EvalError>;
    fn eval_t3(&self, t: &T3, q: &[T3], v: &[T3]) -> Result<Vec<T3>, EvalError>;
}

/// Components of a connection on the affine jet bundle: `out[lambda][i]`
/// with `lambda = 0` the time leg and `lambda = 1..=m` the fibre legs.
pub trait ConnFieldDyn: Send + Sync {
    fn eval_f64(&self, t: &f64, q: &[f64], v: &[f64]) -> Result<Vec<Vec<f64>>, EvalError>;
    fn eval_t1(&self, t: &T1, q: &[T1], v: &[T1]) -> Result<Vec<Vec<T1>>, EvalError>;
    fn eval_t2(&self, t: &T2, q: &[T2], v: &[T2]) -> Result<Vec<Vec<T2>>, EvalError>;
    fn eval_t3(&self, t: &T3, q: &[T3], v: &[T3]) -> Result<Vec<Vec<T3>>, EvalError>;
}

/// Scalar levels at which dyn fields can be evaluated; the methods route a
/// generic call site to the matching monomorphized entry point.
pub trait FieldScalar: Scalar {
    fn eval_jet_field(
        f: &dyn JetFieldDyn,
        t: &Self,
        q: &[Self],
        v: &[Self],
    ) -> Result<Vec<Self>, EvalError>;
    fn eval_conn_field(
        c: &dyn ConnFieldDyn,
        t: &Self,
        q: &[Self],
        v: &[Self],
    ) -> Result<Vec<Vec<Self>>, EvalError>;
}

macro_rules! impl_field_scalar {
    ($ty:ty, $jet:ident, $conn:ident) => {
        impl FieldScalar for $ty {
            fn eval_jet_field(
                f: &dyn JetFieldDyn,
                t: &Self,
                q: &[Self],
                v: &[Self],
            ) -> Result<Vec<Self>, EvalError> {
                f.$jet(t, q, v)
            }
            fn eval_conn_field(
                c: &dyn ConnFieldDyn,
                t: &Self,
                q: &[Self],
                v: &[Self],
            ) -> Result<Vec<Vec<Self>>, EvalError> {
                c.$conn(t, q, v)
            }
        }
    };
}

impl_field_scalar!(f64, eval_f64, eval_f64);
impl_field_scalar!(T1, eval_t1, eval_t1);
impl_field_scalar!(T2, eval_t2, eval_t2);
impl_field_scalar!(T3, eval_t3, eval_t3);

/// Stamps the four dyn entry points from a struct's generic `eval_impl`.
/// The `depth_limited` form is for fields that differentiate an inner dyn
/// field (and so would need a level beyond `T3` at the deepest entry).
macro_rules! impl_dyn_jet_field {
    ($ty:ty) => {
        impl crate::field::JetFieldDyn for $ty {
            fn eval_f64(&self, t: &f64, q: &[f64], v: &[f64]) -> Result<Vec<f64>, EvalError> {
                self.eval_impl(t, q, v)
            }
            fn eval_t1(
                &self,
                t: &crate::field::T1,
                q: &[crate::field::T1],
                v: &[crate::field::T1],
            ) -> Result<Vec<crate::field::T1>, EvalError> {
                self.eval_impl(t, q, v)
            }
            fn eval_t2(
                &self,
                t: &crate::field::T2,
                q: &[crate::field::T2],
                v: &[crate::field::T2],
            ) -> Result<Vec<crate::field::T2>, EvalError> {
                self.eval_impl(t, q, v)
            }
            fn eval_t3(
                &self,
                t: &crate::field::T3,
                q: &[crate::field::T3],
                v: &[crate::field::T3],
            ) -> Result<Vec<crate::field::T3>, EvalError> {
                self.eval_impl(t, q, v)
            }
        }
    };
    ($ty:ty, depth_limited) => {
        impl crate::field::JetFieldDyn for $ty {
            fn eval_f64(&self, t: &f64, q: &[f64], v: &[f64]) -> Result<Vec<f64>, EvalError> {
                self.eval_impl(t, q, v)
            }
            fn eval_t1(
                &self,
                t: &crate::field::T1,
                q: &[crate::field::T1],
                v: &[crate::field::T1],
            ) -> Result<Vec<crate::field::T1>, EvalError> {
                self.eval_impl(t, q, v)
            }
            fn eval_t2(
                &self,
                t: &crate::field::T2,
                q: &[crate::field::T2],
                v: &[crate::field::T2],
            ) -> Result<Vec<crate::field::T2>, EvalError> {
                self.eval_impl(t, q, v)
            }
            fn eval_t3(
                &self,
                _t: &crate::field::T3,
                _q: &[crate::field::T3],
                _v: &[crate::field::T3],
            ) -> Result<Vec<crate::field::T3>, EvalError> {
                Err(EvalError::NestingTooDeep)
            }
        }
    };
}

macro_rules! impl_dyn_conn_field {
    ($ty:ty) => {
        impl crate::field::ConnFieldDyn for $ty {
            fn eval_f64(&self, t: &f64, q: &[f64], v: &[f64]) -> Result<Vec<Vec<f64>>, EvalError> {
                self.eval_impl(t, q, v)
            }
            fn eval_t1(
                &self,
                t: &crate::field::T1,
                q: &[crate::field::T1],
                v: &[crate::field::T1],
            ) -> Result<Vec<Vec<crate::field::T1>>, EvalError> {
                self.eval_impl(t, q, v)
            }
            fn eval_t2(
                &self,
                t: &crate::field::T2,
                q: &[crate::field::T2],
                v: &[crate::field::T2],
            ) -> Result<Vec<Vec<crate::field::T2>>, EvalError> {
                self.eval_impl(t, q, v)
            }
            fn eval_t3(
                &self,
                t: &crate::field::T3,
                q: &[crate::field::T3],
                v: &[crate::field::T3],
            ) -> Result<Vec<Vec<crate::field::T3>>, EvalError> {
                self.eval_impl(t, q, v)
            }
        }
    };
    ($ty:ty, depth_limited) => {
        impl crate::field::ConnFieldDyn for $ty {
            fn eval_f64(&self, t: &f64, q: &[f64], v: &[f64]) -> Result<Vec<Vec<f64>>, EvalError> {
                self.eval_impl(t, q, v)
            }
            fn eval_t1(
                &self,
                t: &crate::field::T1,
                q: &[crate::field::T1],
                v: &[crate::field::T1],
            ) -> Result<Vec<Vec<crate::field::T1>>, EvalError> {
                self.eval_impl(t, q, v)
            }
            fn eval_t2(
                &self,
                t: &crate::field::T2,
                q: &[crate::field::T2],
                v: &[crate::field::T2],
            ) -> Result<Vec<Vec<crate::field::T2>>, EvalError> {
                self.eval_impl(t, q, v)
            }
            fn eval_t3(
                &self,
                _t: &crate::field::T3,
                _q: &[crate::field::T3],
                _v: &[crate::field::T3],
            ) -> Result<Vec<Vec<crate::field::T3>>, EvalError> {
                Err(EvalError::NestingTooDeep)
            }
        }
    };
}

pub(crate) use {impl_dyn_conn_field, impl_dyn_jet_field};

// ---------------------------------------------------------------------------
// Leaf fields backed by expressions
// ---------------------------------------------------------------------------

pub(crate) struct ExprJetField {
    pub comps: Vec<Expression>,
}

impl ExprJetField {
    fn eval_impl<T: Scalar>(&self, t: &T, q: &[T], v: &[T]) -> Result<Vec<T>, EvalError> {
        self.comps.iter().map(|e| e.eval_scalar(t, q, v)).collect()
    }
}

impl_dyn_jet_field!(ExprJetField);

pub(crate) struct ExprConnField {
    /// `comps[lambda][i]`, lambda = 0..=m.
    pub comps: Vec<Vec<Expression>>,
}

impl ExprConnField {
    fn eval_impl<T: Scalar>(&self, t: &T, q: &[T], v: &[T]) -> Result<Vec<Vec<T>>, EvalError> {
        self.comps
            .iter()
            .map(|row| row.iter().map(|e| e.eval_scalar(t, q, v)).collect())
            .collect()
    }
}

impl_dyn_conn_field!(ExprConnField);

// ---------------------------------------------------------------------------
// Seeding helpers
// ---------------------------------------------------------------------------

/// Lifts a point one Taylor level with only the velocities seeded
/// (n = m, seed j <-> v_j).
pub(crate) fn seed_velocities<T: Scalar>(
    t: &T,
    q: &[T],
    v: &[T],
) -> (Taylor2<T>, Vec<Taylor2<T>>, Vec<Taylor2<T>>) {
    let m = v.len();
    let lt = Taylor2::constant(t.clone(), m);
    let lq = q.iter().map(|x| Taylor2::constant(x.clone(), m)).collect();
    let lv = v
        .iter()
        .enumerate()
        .map(|(j, x)| Taylor2::variable(x.clone(), j, m))
        .collect();
    (lt, lq, lv)
}

/// Lifts (t, q) one Taylor level with time and positions seeded
/// (n = 1 + m, seed 0 <-> t, seed 1+j <-> q_j).
pub(crate) fn seed_time_positions<T: Scalar>(t: &T, q: &[T]) -> (Taylor2<T>, Vec<Taylor2<T>>) {
    let n = 1 + q.len();
    let lt = Taylor2::variable(t.clone(), 0, n);
    let lq = q
        .iter()
        .enumerate()
        .map(|(j, x)| Taylor2::variable(x.clone(), 1 + j, n))
        .collect();
    (lt, lq)
}

/// Lifts a full jet point with every slot seeded
/// (n = 1 + 2m, order t, q.., v..).
pub(crate) fn seed_full<T: Scalar>(
    t: &T,
    q: &[T],
    v: &[T],
) -> (Taylor2<T>, Vec<Taylor2<T>>, Vec<Taylor2<T>>) {
    let m = q.len();
    let n = 1 + 2 * m;
    let lt = Taylor2::variable(t.clone(), 0, n);
    let lq = q
        .iter()
        .enumerate()
        .map(|(j, x)| Taylor2::variable(x.clone(), 1 + j, n))
        .collect();
    let lv = v
        .iter()
        .enumerate()
        .map(|(j, x)| Taylor2::variable(x.clone(), 1 + m + j, n))
        .collect();
    (lt, lq, lv)
}

// ---------------------------------------------------------------------------
// Derivative extraction
// ---------------------------------------------------------------------------

/// First derivatives of a map of (t, q) only, such as a frame component or a
/// chart component.
pub(crate) struct TqDerivs<T> {
    pub value: T,
    pub dt: T,
    pub dq: Vec<T>,
}

/// First and second derivatives of a map of (t, q).
pub(crate) struct TqDerivs2<T> {
    pub value: T,
    pub dt: T,
    pub dq: Vec<T>,
    pub dtt: T,
    pub dtq: Vec<T>,
    /// Symmetric block d2/dq_j dq_k, stored fully.
    pub dqq: Vec<Vec<T>>,
}

impl<T: Scalar> TqDerivs2<T> {
    /// Total time derivative along a velocity: dt + sum_j v_j dq_j.
    pub fn total_time_derivative(&self, v: &[T]) -> T {
        let mut acc = self.dt.clone();
        for (j, vj) in v.iter().enumerate() {
            acc = acc + vj.clone() * self.dq[j].clone();
        }
        acc
    }
}

impl<T: Scalar> TqDerivs<T> {
    pub fn total_time_derivative(&self, v: &[T]) -> T {
        let mut acc = self.dt.clone();
        for (j, vj) in v.iter().enumerate() {
            acc = acc + vj.clone() * self.dq[j].clone();
        }
        acc
    }
}

/// Evaluates expression components of (t, q) with first and second
/// derivatives carried at level `T`.
pub(crate) fn expr_tq_derivs2<T: Scalar>(
    comps: &[Expression],
    t: &T,
    q: &[T],
) -> Result<Vec<TqDerivs2<T>>, EvalError> {
    let m = q.len();
    let (lt, lq) = seed_time_positions(t, q);
    comps
        .iter()
        .map(|e| {
            let r = e.eval_scalar(&lt, &lq, &[])?;
            let dq = (0..m).map(|j| r.grad()[1 + j].clone()).collect();
            let dtq = (0..m).map(|j| r.hess(0, 1 + j).clone()).collect();
            let dqq = (0..m)
                .map(|j| (0..m).map(|k| r.hess(1 + j, 1 + k).clone()).collect())
                .collect();
            Ok(TqDerivs2 {
                value: r.value().clone(),
                dt: r.grad()[0].clone(),
                dq,
                dtt: r.hess(0, 0).clone(),
                dtq,
                dqq,
            })
        })
        .collect()
}

/// First-derivative variant of [`expr_tq_derivs2`]; shares its lift so both
/// read the same Taylor coefficients.
pub(crate) fn expr_tq_derivs<T: Scalar>(
    comps: &[Expression],
    t: &T,
    q: &[T],
) -> Result<Vec<TqDerivs<T>>, EvalError> {
    Ok(expr_tq_derivs2(comps, t, q)?
        .into_iter()
        .map(|d| TqDerivs {
            value: d.value,
            dt: d.dt,
            dq: d.dq,
        })
        .collect())
}

/// Component values together with velocity derivatives of a dyn field,
/// obtained by one Taylor lift.
pub(crate) struct ValueAndVDerivs<T> {
    pub value: T,
    pub dv: Vec<T>,
}

pub(crate) fn jet_field_v_derivs<T>(
    field: &dyn JetFieldDyn,
    t: &T,
    q: &[T],
    v: &[T],
) -> Result<Vec<ValueAndVDerivs<T>>, EvalError>
where
    T: FieldScalar,
    Taylor2<T>: FieldScalar,
{
    let (lt, lq, lv) = seed_velocities(t, q, v);
    let out = <Taylor2<T> as FieldScalar>::eval_jet_field(field, &lt, &lq, &lv)?;
    Ok(out
        .into_iter()
        .map(|c| ValueAndVDerivs {
            value: c.value().clone(),
            dv: c.grad().to_vec(),
        })
        .collect())
}
