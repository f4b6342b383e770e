//! Truncated Taylor arithmetic of order 5.
//!
//! A [`Jet5`] stores the Taylor coefficients `c_k = f^(k)(t0) / k!` of a scalar
//! function at an expansion point. Arithmetic on jets propagates derivatives
//! exactly up to the truncation order, which is all the normal-part formulas
//! ever need (nothing past the fifth derivative of the curve appears there).
//!
//! Operations that can hit a singularity (division by a jet with zero constant
//! term, square roots of nonpositive values) return [`JetError`] instead of
//! producing NaN, so callers can tell "undefined" apart from "zero".

use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

use thiserror::Error;

/// Highest derivative order carried by a [`Jet5`].
pub const ORDER: usize = 5;
const LEN: usize = ORDER + 1;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum JetError {
    #[error("singularity: division by a jet with zero constant term")]
    DivisionByZero,
    #[error("singularity: {func} undefined at {value}")]
    Domain { func: &'static str, value: f64 },
    #[error("degenerate parametrization: zero speed at the expansion point")]
    ZeroSpeed,
}

/// Truncated Taylor expansion of order 5.
#[derive(Clone, Copy, PartialEq, Default)]
pub struct Jet5 {
    c: [f64; LEN],
}

impl fmt::Debug for Jet5 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_tuple("Jet5").field(&self.c).finish()
    }
}

impl Jet5 {
    pub const ZERO: Jet5 = Jet5 { c: [0.0; LEN] };

    pub fn from_coeffs(c: [f64; LEN]) -> Self {
        Jet5 { c }
    }

    pub fn constant(v: f64) -> Self {
        let mut c = [0.0; LEN];
        c[0] = v;
        Jet5 { c }
    }

    /// The identity function `t` expanded at `t0`.
    pub fn variable(t0: f64) -> Self {
        let mut c = [0.0; LEN];
        c[0] = t0;
        c[1] = 1.0;
        Jet5 { c }
    }

    pub fn coeffs(&self) -> &[f64; LEN] {
        &self.c
    }

    pub fn coeff(&self, k: usize) -> f64 {
        self.c[k]
    }

    pub fn value(&self) -> f64 {
        self.c[0]
    }

    /// The k-th derivative `k! * c_k`.
    pub fn derivative(&self, k: usize) -> f64 {
        self.c[k] * factorial(k)
    }

    pub fn is_constant(&self) -> bool {
        self.c[1..].iter().all(|&x| x == 0.0)
    }

    pub fn is_finite(&self) -> bool {
        self.c.iter().all(|x| x.is_finite())
    }

    /// Jet of `f'`. The top coefficient becomes zero, so the result is only
    /// meaningful up to order 4.
    pub fn differentiate(&self) -> Self {
        let mut c = [0.0; LEN];
        for k in 0..ORDER {
            c[k] = (k + 1) as f64 * self.c[k + 1];
        }
        Jet5 { c }
    }

    /// Jet of the antiderivative vanishing at the expansion point (the input's
    /// top coefficient is dropped).
    pub fn integrate(&self) -> Self {
        let mut c = [0.0; LEN];
        for k in 1..LEN {
            c[k] = self.c[k - 1] / k as f64;
        }
        Jet5 { c }
    }

    pub fn scale(&self, a: f64) -> Self {
        let mut c = self.c;
        c.iter_mut().for_each(|x| *x *= a);
        Jet5 { c }
    }

    /// Evaluates the truncated polynomial at offset `h` from the expansion point.
    pub fn eval_at(&self, h: f64) -> f64 {
        self.c.iter().rev().fold(0.0, |acc, &ck| acc * h + ck)
    }

    pub fn try_div(&self, rhs: &Jet5) -> Result<Jet5, JetError> {
        let b0 = rhs.c[0];
        if b0 == 0.0 || !b0.is_finite() {
            return Err(JetError::DivisionByZero);
        }
        let mut q = [0.0; LEN];
        for k in 0..LEN {
            let mut acc = self.c[k];
            for i in 1..=k {
                acc -= rhs.c[i] * q[k - i];
            }
            q[k] = acc / b0;
        }
        Ok(Jet5 { c: q })
    }

    pub fn recip(&self) -> Result<Jet5, JetError> {
        Jet5::constant(1.0).try_div(self)
    }

    pub fn sqrt(&self) -> Result<Jet5, JetError> {
        let a0 = self.c[0];
        if !(a0 > 0.0) {
            return Err(JetError::Domain { func: "sqrt", value: a0 });
        }
        let mut r = [0.0; LEN];
        r[0] = a0.sqrt();
        for k in 1..LEN {
            let mut acc = self.c[k];
            for j in 1..k {
                acc -= r[j] * r[k - j];
            }
            r[k] = acc / (2.0 * r[0]);
        }
        Ok(Jet5 { c: r })
    }

    pub fn exp(&self) -> Jet5 {
        let mut e = [0.0; LEN];
        e[0] = self.c[0].exp();
        for k in 1..LEN {
            let mut acc = 0.0;
            for j in 1..=k {
                acc += j as f64 * self.c[j] * e[k - j];
            }
            e[k] = acc / k as f64;
        }
        Jet5 { c: e }
    }

    pub fn sin_cos(&self) -> (Jet5, Jet5) {
        let mut s = [0.0; LEN];
        let mut c = [0.0; LEN];
        s[0] = self.c[0].sin();
        c[0] = self.c[0].cos();
        for k in 1..LEN {
            let mut acc_s = 0.0;
            let mut acc_c = 0.0;
            for j in 1..=k {
                let ja = j as f64 * self.c[j];
                acc_s += ja * c[k - j];
                acc_c -= ja * s[k - j];
            }
            s[k] = acc_s / k as f64;
            c[k] = acc_c / k as f64;
        }
        (Jet5 { c: s }, Jet5 { c })
    }

    pub fn sin(&self) -> Jet5 {
        self.sin_cos().0
    }

    pub fn cos(&self) -> Jet5 {
        self.sin_cos().1
    }

    /// `self^p` for a constant exponent.
    ///
    /// Integer exponents work for any base (negative ones need a nonzero
    /// constant term); other exponents need a positive constant term.
    pub fn powf(&self, p: f64) -> Result<Jet5, JetError> {
        if p == 0.0 {
            return Ok(Jet5::constant(1.0));
        }
        if p.fract() == 0.0 && p.abs() <= 64.0 {
            let base = if p < 0.0 { self.recip()? } else { *self };
            return Ok(base.powi(p.abs() as u32));
        }
        let a0 = self.c[0];
        if !(a0 > 0.0) {
            return Err(JetError::Domain { func: "pow", value: a0 });
        }
        let mut y = [0.0; LEN];
        y[0] = a0.powf(p);
        for k in 1..LEN {
            let mut acc = 0.0;
            for j in 1..=k {
                acc += ((p + 1.0) * j as f64 - k as f64) * self.c[j] * y[k - j];
            }
            y[k] = acc / (k as f64 * a0);
        }
        Ok(Jet5 { c: y })
    }

    fn powi(&self, mut n: u32) -> Jet5 {
        let mut result = Jet5::constant(1.0);
        let mut base = *self;
        while n > 0 {
            if n & 1 == 1 {
                result = result * base;
            }
            base = base * base;
            n >>= 1;
        }
        result
    }

    /// `self ∘ inner` where `inner` has zero constant term, i.e. the Taylor
    /// expansion of `f(t0 + inner(σ))` in σ.
    pub fn compose(&self, inner: &Jet5) -> Jet5 {
        debug_assert!(inner.c[0] == 0.0);
        let mut acc = Jet5::constant(self.c[ORDER]);
        for k in (0..ORDER).rev() {
            acc = acc * *inner + Jet5::constant(self.c[k]);
        }
        acc
    }

    /// Series reversion: returns `g` with `g(0) = 0` and `self ∘ g = id`.
    ///
    /// Requires `c0 = 0` and `c1 != 0`. Each fixed-point sweep fixes one more
    /// order, so `ORDER` sweeps give the exact truncated inverse.
    pub fn revert(&self) -> Result<Jet5, JetError> {
        let a1 = self.c[1];
        if a1 == 0.0 || !a1.is_finite() {
            return Err(JetError::ZeroSpeed);
        }
        let sigma = Jet5::variable(0.0);
        let mut g = sigma.scale(1.0 / a1);
        let mut shifted = *self;
        shifted.c[0] = 0.0;
        for _ in 0..ORDER {
            let residual = sigma - shifted.compose(&g);
            g += residual.scale(1.0 / a1);
        }
        Ok(g)
    }

    fn binary(&self, rhs: &Jet5, f: impl Fn(f64, f64) -> f64) -> Jet5 {
        let mut c = [0.0; LEN];
        for k in 0..LEN {
            c[k] = f(self.c[k], rhs.c[k]);
        }
        Jet5 { c }
    }
}

impl Add for Jet5 {
    type Output = Jet5;
    fn add(self, rhs: Jet5) -> Jet5 {
        self.binary(&rhs, |a, b| a + b)
    }
}

impl Sub for Jet5 {
    type Output = Jet5;
    fn sub(self, rhs: Jet5) -> Jet5 {
        self.binary(&rhs, |a, b| a - b)
    }
}

impl Mul for Jet5 {
    type Output = Jet5;
    fn mul(self, rhs: Jet5) -> Jet5 {
        let mut c = [0.0; LEN];
        for k in 0..LEN {
            let mut acc = 0.0;
            for i in 0..=k {
                acc += self.c[i] * rhs.c[k - i];
            }
            c[k] = acc;
        }
        Jet5 { c }
    }
}

impl Neg for Jet5 {
    type Output = Jet5;
    fn neg(self) -> Jet5 {
        self.scale(-1.0)
    }
}

impl AddAssign for Jet5 {
    fn add_assign(&mut self, rhs: Jet5) {
        *self = *self + rhs;
    }
}

impl SubAssign for Jet5 {
    fn sub_assign(&mut self, rhs: Jet5) {
        *self = *self - rhs;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArithOp {
    Add,
    Sub,
    Mul,
    Div,
}

pub fn jet_arith(a: Jet5, b: Jet5, op: ArithOp) -> Result<Jet5, JetError> {
    Ok(match op {
        ArithOp::Add => a + b,
        ArithOp::Sub => a - b,
        ArithOp::Mul => a * b,
        ArithOp::Div => a.try_div(&b)?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Elementary {
    Sin,
    Cos,
    Exp,
    Sqrt,
    PowConst(f64),
}

pub fn jet_elementary(a: Jet5, func: Elementary) -> Result<Jet5, JetError> {
    match func {
        Elementary::Sin => Ok(a.sin()),
        Elementary::Cos => Ok(a.cos()),
        Elementary::Exp => Ok(a.exp()),
        Elementary::Sqrt => a.sqrt(),
        Elementary::PowConst(p) => a.powf(p),
    }
}

pub(crate) fn factorial(k: usize) -> f64 {
    (1..=k).fold(1.0, |acc, i| acc * i as f64)
}

/// A point of a curve in ℝⁿ expanded as one jet per coordinate.
#[derive(Debug, Clone, PartialEq)]
pub struct JetPoint {
    pub t0: f64,
    pub components: Vec<Jet5>,
}

impl JetPoint {
    pub fn new(t0: f64, components: Vec<Jet5>) -> Self {
        JetPoint { t0, components }
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    /// The k-th derivative vector at the expansion point.
    pub fn derivative(&self, k: usize) -> Vec<f64> {
        self.components.iter().map(|j| j.derivative(k)).collect()
    }

    /// Jet-valued k-th derivative (valid up to order `5 - k`).
    pub fn derivative_jets(&self, k: usize) -> Vec<Jet5> {
        self.components
            .iter()
            .map(|j| (0..k).fold(*j, |acc, _| acc.differentiate()))
            .collect()
    }

    pub fn speed(&self) -> f64 {
        self.derivative(1).iter().map(|x| x * x).sum::<f64>().sqrt()
    }
}

/// Re-expands a curve jet in arclength.
///
/// The arclength jet `s(t)` is obtained by integrating the speed jet, inverted
/// by series reversion, and composed into every coordinate. The result is
/// expanded at the same point with `s = 0` there and `t0` carried through.
pub fn unit_speed_lift(curve: &JetPoint) -> Result<JetPoint, JetError> {
    let velocity: Vec<Jet5> = curve.components.iter().map(Jet5::differentiate).collect();
    let speed_sq = velocity.iter().fold(Jet5::ZERO, |acc, v| acc + *v * *v);
    let scale = curve
        .components
        .iter()
        .map(|j| j.value().abs())
        .fold(1.0, f64::max);
    if !(speed_sq.value() > (1e-14 * scale).powi(2)) {
        return Err(JetError::ZeroSpeed);
    }
    let speed = speed_sq.sqrt()?;
    let arclength = speed.integrate();
    let inverse = arclength.revert()?;
    let components = curve
        .components
        .iter()
        .map(|j| j.compose(&inverse))
        .collect();
    Ok(JetPoint {
        t0: curve.t0,
        components,
    })
}
