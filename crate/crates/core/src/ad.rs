//! Truncated second-order Taylor arithmetic.
//!
//! A [`Taylor2`] carries a value together with its gradient and Hessian with
//! respect to a declared seed set, and propagates both exactly through
//! arithmetic and the supported transcendental functions in a single forward
//! pass. The coefficient type is generic: `Taylor2<f64>` is the everyday
//! first-and-second-derivative scalar, while `Taylor2<Taylor2<f64>>` (and one
//! level deeper) lets composite fields expose exact derivatives of quantities
//! that are themselves derivatives, tangent-over-tangent style.
//!
//! Seed sets are per evaluation; there is no global tape. Finite differences
//! are used in the test suites as an independent oracle, never as a fallback.

use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

use crate::error::EvalError;

/// Coefficient algebra for Taylor arithmetic.
///
/// Implemented by `f64` and, generically, by `Taylor2<T>` for any scalar `T`,
/// which is what allows Taylor levels to nest.
pub trait Scalar:
    Clone
    + fmt::Debug
    + PartialEq
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    /// The innermost plain value, used for domain checks and branching.
    fn primal(&self) -> f64;
    /// A constant with the same seed structure as `self`.
    fn constant_like(&self, c: f64) -> Self;
    fn sin(&self) -> Self;
    fn cos(&self) -> Self;
    fn exp(&self) -> Self;
    fn ln(&self) -> Self;
    fn sqrt(&self) -> Self;
    /// Integer power, computed by repeated multiplication.
    fn powi(&self, k: i32) -> Self;
    /// Real power with a constant exponent. The caller guards the domain.
    fn powf(&self, k: f64) -> Self;
}

impl Scalar for f64 {
    fn primal(&self) -> f64 {
        *self
    }
    fn constant_like(&self, c: f64) -> Self {
        c
    }
    fn sin(&self) -> Self {
        f64::sin(*self)
    }
    fn cos(&self) -> Self {
        f64::cos(*self)
    }
    fn exp(&self) -> Self {
        f64::exp(*self)
    }
    fn ln(&self) -> Self {
        f64::ln(*self)
    }
    fn sqrt(&self) -> Self {
        f64::sqrt(*self)
    }
    fn powi(&self, k: i32) -> Self {
        f64::powi(*self, k)
    }
    fn powf(&self, k: f64) -> Self {
        f64::powf(*self, k)
    }
}

/// Length of the packed upper triangle of an `n`-by-`n` symmetric matrix.
fn tri_len(n: usize) -> usize {
    n * (n + 1) / 2
}

/// Packed index of entry `(i, j)` with `i <= j`.
fn tri_index(n: usize, i: usize, j: usize) -> usize {
    debug_assert!(i <= j && j < n);
    i * (2 * n - i + 1) / 2 + (j - i)
}

/// Value, gradient, and Hessian with respect to a seed set of size `n`.
///
/// The Hessian is stored as its upper triangle, so symmetry holds to exact
/// equality by construction.
#[derive(Clone, Debug, PartialEq)]
pub struct Taylor2<T> {
    value: T,
    grad: Vec<T>,
    hess: Vec<T>,
}

/// The everyday scalar: exact value, gradient, and Hessian over `f64`.
pub type Taylor2Scalar = Taylor2<f64>;

impl<T: Scalar> Taylor2<T> {
    /// A constant: zero gradient and Hessian over `n` seeds.
    pub fn constant(value: T, n: usize) -> Self {
        let zero = value.constant_like(0.0);
        Taylor2 {
            value,
            grad: vec![zero.clone(); n],
            hess: vec![zero; tri_len(n)],
        }
    }

    /// The `index`-th seed variable: unit gradient entry, zero Hessian.
    pub fn variable(value: T, index: usize, n: usize) -> Self {
        assert!(index < n, "seed index {index} out of range for {n} seeds");
        let mut out = Self::constant(value, n);
        out.grad[index] = out.value.constant_like(1.0);
        out
    }

    /// Number of seed variables.
    pub fn nvars(&self) -> usize {
        self.grad.len()
    }

    pub fn value(&self) -> &T {
        &self.value
    }

    pub fn grad(&self) -> &[T] {
        &self.grad
    }

    /// Hessian entry `(i, j)`; the symmetric partner resolves to the same
    /// stored element.
    pub fn hess(&self, i: usize, j: usize) -> &T {
        let n = self.nvars();
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        &self.hess[tri_index(n, i, j)]
    }

    pub fn into_value(self) -> T {
        self.value
    }

    /// Chain rule for a univariate map with derivatives `g1 = g'(f)` and
    /// `g2 = g''(f)` at the current value:
    /// grad = g1 * f_i, hess = g2 * f_i * f_j + g1 * f_ij.
    fn unary(&self, g0: T, g1: T, g2: T) -> Self {
        let n = self.nvars();
        let grad: Vec<T> = self.grad.iter().map(|fi| g1.clone() * fi.clone()).collect();
        let mut hess = Vec::with_capacity(tri_len(n));
        for i in 0..n {
            for j in i..n {
                let fifj = self.grad[i].clone() * self.grad[j].clone();
                let fij = self.hess[tri_index(n, i, j)].clone();
                hess.push(g2.clone() * fifj + g1.clone() * fij);
            }
        }
        Taylor2 {
            value: g0,
            grad,
            hess,
        }
    }

    /// 1 / self. The caller guards against a zero primal.
    pub fn recip(&self) -> Self {
        let one = self.value.constant_like(1.0);
        let w = one / self.value.clone(); // 1/f
        let w2 = w.clone() * w.clone();
        let w3 = w2.clone() * w.clone();
        // (1/f)' = -1/f^2, (1/f)'' = 2/f^3
        self.unary(w, -w2, w3.constant_like(2.0) * w3)
    }
}

impl<T: Scalar> Add for Taylor2<T> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        debug_assert_eq!(self.nvars(), rhs.nvars());
        Taylor2 {
            value: self.value + rhs.value,
            grad: self
                .grad
                .into_iter()
                .zip(rhs.grad)
                .map(|(a, b)| a + b)
                .collect(),
            hess: self
                .hess
                .into_iter()
                .zip(rhs.hess)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }
}

impl<T: Scalar> Sub for Taylor2<T> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        debug_assert_eq!(self.nvars(), rhs.nvars());
        Taylor2 {
            value: self.value - rhs.value,
            grad: self
                .grad
                .into_iter()
                .zip(rhs.grad)
                .map(|(a, b)| a - b)
                .collect(),
            hess: self
                .hess
                .into_iter()
                .zip(rhs.hess)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }
}

impl<T: Scalar> Neg for Taylor2<T> {
    type Output = Self;
    fn neg(self) -> Self {
        Taylor2 {
            value: -self.value,
            grad: self.grad.into_iter().map(|a| -a).collect(),
            hess: self.hess.into_iter().map(|a| -a).collect(),
        }
    }
}

impl<T: Scalar> Mul for Taylor2<T> {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        let n = self.nvars();
        debug_assert_eq!(n, rhs.nvars());
        let value = self.value.clone() * rhs.value.clone();
        let mut grad = Vec::with_capacity(n);
        for i in 0..n {
            grad.push(
                self.grad[i].clone() * rhs.value.clone() + self.value.clone() * rhs.grad[i].clone(),
            );
        }
        // (fg)_ij = f_ij g + f_i g_j + f_j g_i + f g_ij
        let mut hess = Vec::with_capacity(tri_len(n));
        for i in 0..n {
            for j in i..n {
                let k = tri_index(n, i, j);
                hess.push(
                    self.hess[k].clone() * rhs.value.clone()
                        + self.grad[i].clone() * rhs.grad[j].clone()
                        + self.grad[j].clone() * rhs.grad[i].clone()
                        + self.value.clone() * rhs.hess[k].clone(),
                );
            }
        }
        Taylor2 { value, grad, hess }
    }
}

impl<T: Scalar> Div for Taylor2<T> {
    type Output = Self;
    #[allow(clippy::suspicious_arithmetic_impl)] // division as recip-then-mul
    fn div(self, rhs: Self) -> Self {
        let r = rhs.recip();
        self * r
    }
}

impl<T: Scalar> Scalar for Taylor2<T> {
    fn primal(&self) -> f64 {
        self.value.primal()
    }

    fn constant_like(&self, c: f64) -> Self {
        Taylor2::constant(self.value.constant_like(c), self.nvars())
    }

    fn sin(&self) -> Self {
        let s = self.value.sin();
        let c = self.value.cos();
        self.unary(s.clone(), c, -s)
    }

    fn cos(&self) -> Self {
        let s = self.value.sin();
        let c = self.value.cos();
        self.unary(c.clone(), -s, -c)
    }

    fn exp(&self) -> Self {
        let e = self.value.exp();
        self.unary(e.clone(), e.clone(), e)
    }

    fn ln(&self) -> Self {
        let one = self.value.constant_like(1.0);
        let w = one / self.value.clone();
        let w2 = w.clone() * w.clone();
        self.unary(self.value.ln(), w, -w2)
    }

    fn sqrt(&self) -> Self {
        let r = self.value.sqrt();
        let half = self.value.constant_like(0.5);
        let g1 = half.clone() / r.clone();
        // (sqrt f)'' = -1/4 f^(-3/2)
        let g2 = -(half * g1.clone() / self.value.clone());
        self.unary(r, g1, g2)
    }

    fn powi(&self, k: i32) -> Self {
        if k == 0 {
            return self.constant_like(1.0);
        }
        if k < 0 {
            return self.powi(-k).recip();
        }
        // square-and-multiply keeps the chain rule exact through Mul
        let mut base = self.clone();
        let mut acc: Option<Self> = None;
        let mut e = k as u32;
        loop {
            if e & 1 == 1 {
                acc = Some(match acc {
                    None => base.clone(),
                    Some(a) => a * base.clone(),
                });
            }
            e >>= 1;
            if e == 0 {
                break;
            }
            base = base.clone() * base;
        }
        acc.expect("k > 0")
    }

    fn powf(&self, k: f64) -> Self {
        let g0 = self.value.powf(k);
        let p1 = self.value.powf(k - 1.0);
        let g1 = p1.constant_like(k) * p1;
        let p2 = self.value.powf(k - 2.0);
        let g2 = p2.constant_like(k * (k - 1.0)) * p2;
        self.unary(g0, g1, g2)
    }
}

/// Evaluates `f` with every entry of `x` seeded as an independent variable,
/// returning the value together with the full gradient and Hessian.
pub fn taylor2_eval<F>(f: F, x: &[f64]) -> Result<Taylor2Scalar, EvalError>
where
    F: FnOnce(&[Taylor2Scalar]) -> Result<Taylor2Scalar, EvalError>,
{
    let n = x.len();
    let vars: Vec<Taylor2Scalar> = x
        .iter()
        .enumerate()
        .map(|(i, &xi)| Taylor2Scalar::variable(xi, i, n))
        .collect();
    f(&vars)
}
