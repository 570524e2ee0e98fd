//! Forward-mode automatic differentiation.
//!
//! The differentiable part of the pipeline (window prediction through the
//! losses) is generic over [`Real`], instantiated with plain `f64` for
//! production runs and with [`Dual`] when analytic gradients are needed.
//! A [`Dual`] carries the value together with its partial derivatives with
//! respect to `N` fit parameters, so one forward evaluation yields the exact
//! chain-rule gradient.

use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

/// Largest magnitude fed to `exp`; beyond it the result saturates and the
/// derivative is treated as zero.
pub const EXP_CLAMP: f64 = 500.0;

/// Scalar abstraction over `f64` and [`Dual`].
pub trait Real:
    Copy
    + fmt::Debug
    + PartialOrd
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    /// Lift a constant (zero derivative).
    fn lit(x: f64) -> Self;

    /// The underlying value.
    fn value(self) -> f64;

    /// `exp` with the argument clamped to `±EXP_CLAMP`.
    fn exp_clamped(self) -> Self;

    /// Absolute value (derivative 0 at the origin).
    fn abs(self) -> Self;

    /// The operand with the larger value.
    fn vmax(self, other: Self) -> Self {
        if self.value() >= other.value() {
            self
        } else {
            other
        }
    }
}

impl Real for f64 {
    fn lit(x: f64) -> Self {
        x
    }

    fn value(self) -> f64 {
        self
    }

    fn exp_clamped(self) -> Self {
        self.clamp(-EXP_CLAMP, EXP_CLAMP).exp()
    }

    fn abs(self) -> Self {
        f64::abs(self)
    }
}

/// Value plus partial derivatives with respect to `N` parameters.
#[derive(Clone, Copy)]
pub struct Dual<const N: usize> {
    pub v: f64,
    pub g: [f64; N],
}

impl<const N: usize> Dual<N> {
    /// Constant with zero gradient.
    pub fn constant(v: f64) -> Self {
        Dual { v, g: [0.0; N] }
    }

    /// Value seeded as the `index`-th independent parameter.
    pub fn parameter(v: f64, index: usize) -> Self {
        let mut g = [0.0; N];
        g[index] = 1.0;
        Dual { v, g }
    }
}

impl<const N: usize> fmt::Debug for Dual<N> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Dual({:?}, grad {:?})", self.v, self.g)
    }
}

/// Comparisons look at the value only; gradients ride along.
impl<const N: usize> PartialEq for Dual<N> {
    fn eq(&self, other: &Self) -> bool {
        self.v == other.v
    }
}

impl<const N: usize> PartialOrd for Dual<N> {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        self.v.partial_cmp(&other.v)
    }
}

impl<const N: usize> Add for Dual<N> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        let mut g = self.g;
        for (a, b) in g.iter_mut().zip(rhs.g.iter()) {
            *a += b;
        }
        Dual { v: self.v + rhs.v, g }
    }
}

impl<const N: usize> Sub for Dual<N> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        let mut g = self.g;
        for (a, b) in g.iter_mut().zip(rhs.g.iter()) {
            *a -= b;
        }
        Dual { v: self.v - rhs.v, g }
    }
}

impl<const N: usize> Mul for Dual<N> {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        let mut g = self.g;
        for (a, b) in g.iter_mut().zip(rhs.g.iter()) {
            *a = *a * rhs.v + self.v * b;
        }
        Dual { v: self.v * rhs.v, g }
    }
}

impl<const N: usize> Div for Dual<N> {
    type Output = Self;
    fn div(self, rhs: Self) -> Self {
        let v = self.v / rhs.v;
        let inv = 1.0 / rhs.v;
        let mut g = self.g;
        for (a, b) in g.iter_mut().zip(rhs.g.iter()) {
            *a = (*a - v * b) * inv;
        }
        Dual { v, g }
    }
}

impl<const N: usize> Neg for Dual<N> {
    type Output = Self;
    fn neg(self) -> Self {
        let mut g = self.g;
        for a in g.iter_mut() {
            *a = -*a;
        }
        Dual { v: -self.v, g }
    }
}

impl<const N: usize> Real for Dual<N> {
    fn lit(x: f64) -> Self {
        Dual::constant(x)
    }

    fn value(self) -> f64 {
        self.v
    }

    fn exp_clamped(self) -> Self {
        if self.v.abs() >= EXP_CLAMP {
            // Saturated: value pinned, derivative flushed to zero.
            return Dual::constant(self.v.clamp(-EXP_CLAMP, EXP_CLAMP).exp());
        }
        let e = self.v.exp();
        let mut g = self.g;
        for a in g.iter_mut() {
            *a *= e;
        }
        Dual { v: e, g }
    }

    fn abs(self) -> Self {
        if self.v > 0.0 {
            self
        } else if self.v < 0.0 {
            -self
        } else {
            Dual::constant(0.0)
        }
    }
}

/// `1 / (1 + exp(-x))` built on the clamped exponential.
pub fn logistic<T: Real>(x: T) -> T {
    T::lit(1.0) / (T::lit(1.0) + (-x).exp_clamped())
}

/// Sum of a slice by pairwise tree reduction.
///
/// The reduction order depends only on the slice order, so results are
/// bit-identical across runs and thread counts, and better conditioned than
/// a running sum for long inputs.
pub fn pairwise_sum<T: Real>(xs: &[T]) -> T {
    match xs.len() {
        0 => T::lit(0.0),
        1 => xs[0],
        2 => xs[0] + xs[1],
        n => {
            let mid = n / 2;
            pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
        }
    }
}
