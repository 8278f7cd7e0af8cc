//! Hyper-dual numbers for exact first and mixed second derivatives.
//!
//! A [`HyperDual`] carries a value together with its derivatives along two
//! parameter directions `a` and `b` and the mixed derivative `∂a∂b`. Feeding
//! the derivatives of the propagator into any functional written against
//! [`Scalar`] yields the functional's gradient component (`a = b = e_p`) or
//! its curvature along a direction (`a = b = d`, with second-order input).

use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use num_complex::Complex64 as C64;

/// Arithmetic needed by the entanglement and fidelity kernels.
pub trait Scalar:
    Copy + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> + Neg<Output = Self> + AddAssign
{
    fn zero() -> Self;
    fn constant(c: C64) -> Self;
    fn conj(self) -> Self;
    fn scale(self, s: C64) -> Self;
    /// Value part.
    fn value(self) -> C64;
}

impl Scalar for C64 {
    fn zero() -> Self {
        C64::new(0.0, 0.0)
    }
    fn constant(c: C64) -> Self {
        c
    }
    fn conj(self) -> Self {
        C64::conj(&self)
    }
    fn scale(self, s: C64) -> Self {
        self * s
    }
    fn value(self) -> C64 {
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct HyperDual {
    pub v: C64,
    pub a: C64,
    pub b: C64,
    pub ab: C64,
}

impl HyperDual {
    pub fn new(v: C64, a: C64, b: C64, ab: C64) -> Self {
        Self { v, a, b, ab }
    }

    pub fn real(v: f64, a: f64, b: f64, ab: f64) -> Self {
        Self::new(v.into(), a.into(), b.into(), ab.into())
    }

    /// Applies a scalar function given its value and first two derivatives
    /// at `self.v`.
    fn chain(self, f: C64, df: C64, d2f: C64) -> Self {
        Self {
            v: f,
            a: df * self.a,
            b: df * self.b,
            ab: df * self.ab + d2f * self.a * self.b,
        }
    }

    pub fn exp(self) -> Self {
        let e = self.v.exp();
        self.chain(e, e, e)
    }

    pub fn powi(self, n: u32) -> Self {
        let mut out = Self::constant(C64::new(1.0, 0.0));
        for _ in 0..n {
            out = out * self;
        }
        out
    }

    pub fn sqrt(self) -> Self {
        let r = self.v.sqrt();
        self.chain(r, 0.5 / r, -0.25 / (r * r * r))
    }

    pub fn recip(self) -> Self {
        let r = self.v.inv();
        self.chain(r, -r * r, 2.0 * r * r * r)
    }

    pub fn re(self) -> [f64; 4] {
        [self.v.re, self.a.re, self.b.re, self.ab.re]
    }
}

impl Add for HyperDual {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(self.v + o.v, self.a + o.a, self.b + o.b, self.ab + o.ab)
    }
}

impl AddAssign for HyperDual {
    fn add_assign(&mut self, o: Self) {
        self.v += o.v;
        self.a += o.a;
        self.b += o.b;
        self.ab += o.ab;
    }
}

impl Sub for HyperDual {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self::new(self.v - o.v, self.a - o.a, self.b - o.b, self.ab - o.ab)
    }
}

impl Neg for HyperDual {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.v, -self.a, -self.b, -self.ab)
    }
}

impl Mul for HyperDual {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        Self {
            v: self.v * o.v,
            a: self.a * o.v + self.v * o.a,
            b: self.b * o.v + self.v * o.b,
            ab: self.ab * o.v + self.a * o.b + self.b * o.a + self.v * o.ab,
        }
    }
}

impl Scalar for HyperDual {
    fn zero() -> Self {
        Self::default()
    }
    fn constant(c: C64) -> Self {
        Self::new(c, C64::new(0.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0))
    }
    fn conj(self) -> Self {
        Self::new(self.v.conj(), self.a.conj(), self.b.conj(), self.ab.conj())
    }
    fn scale(self, s: C64) -> Self {
        Self::new(self.v * s, self.a * s, self.b * s, self.ab * s)
    }
    fn value(self) -> C64 {
        self.v
    }
}
