//! First-order dual numbers, nestable for higher derivatives.
//!
//! A `Dual<f64>` carries a value and its first derivative through arithmetic
//! exactly (product/chain rules, no step-size tuning). Nesting the type, as in
//! `Dual<Dual<Dual<f64>>>`, propagates mixed first-order seeds whose
//! cross-term equals a third derivative; [`seed3`] and [`Dual3Parts`] package
//! that pattern for the PDE residual checks.

use std::ops::{Add, Div, Mul, Neg, Sub};

/// Scalar arithmetic shared by `f64` and nested dual numbers.
///
/// Expression evaluation and the closed-form solution families are generic
/// over this trait so the same code path yields values, derivatives and
/// third derivatives.
pub trait Scalar:
    Copy
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    fn from_f64(x: f64) -> Self;
    /// Innermost (primal) value, used for domain checks.
    fn primal(&self) -> f64;
    /// True when every derivative slot is exactly zero.
    fn deriv_is_zero(&self) -> bool;
    /// True when the whole number (value and derivatives) is zero.
    fn is_all_zero(&self) -> bool;
    fn sqrt(self) -> Self;
    fn exp(self) -> Self;
    fn ln(self) -> Self;
    fn abs(self) -> Self;
    fn sin(self) -> Self;
    fn cos(self) -> Self;
    fn powi(self, n: i32) -> Self;
}

impl Scalar for f64 {
    fn from_f64(x: f64) -> Self {
        x
    }
    fn primal(&self) -> f64 {
        *self
    }
    fn deriv_is_zero(&self) -> bool {
        true
    }
    fn is_all_zero(&self) -> bool {
        *self == 0.0
    }
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    fn exp(self) -> Self {
        f64::exp(self)
    }
    fn ln(self) -> Self {
        f64::ln(self)
    }
    fn abs(self) -> Self {
        f64::abs(self)
    }
    fn sin(self) -> Self {
        f64::sin(self)
    }
    fn cos(self) -> Self {
        f64::cos(self)
    }
    fn powi(self, n: i32) -> Self {
        f64::powi(self, n)
    }
}

/// Dual number `re + eps·ε` with `ε² = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dual<T> {
    pub re: T,
    pub eps: T,
}

/// One derivative slot.
pub type Dual1 = Dual<f64>;
/// Two nested slots.
pub type Dual2 = Dual<Dual1>;
/// Three nested slots; the ε₁ε₂ε₃ cross-term is a third derivative.
pub type Dual3 = Dual<Dual2>;

impl<T: Scalar> Dual<T> {
    pub fn new(re: T, eps: T) -> Self {
        Dual { re, eps }
    }

    /// Lift a plain value (all derivative slots zero).
    pub fn constant(x: f64) -> Self {
        Dual {
            re: T::from_f64(x),
            eps: T::from_f64(0.0),
        }
    }

    /// Lift a value with unit seed in this layer's slot.
    pub fn variable(x: f64) -> Self {
        Dual {
            re: T::from_f64(x),
            eps: T::from_f64(1.0),
        }
    }
}

impl Dual1 {
    pub fn value(&self) -> f64 {
        self.re
    }
    pub fn derivative(&self) -> f64 {
        self.eps
    }
}

impl<T: Scalar> Add for Dual<T> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Dual::new(self.re + rhs.re, self.eps + rhs.eps)
    }
}

impl<T: Scalar> Sub for Dual<T> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        Dual::new(self.re - rhs.re, self.eps - rhs.eps)
    }
}

impl<T: Scalar> Mul for Dual<T> {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        Dual::new(self.re * rhs.re, self.re * rhs.eps + self.eps * rhs.re)
    }
}

impl<T: Scalar> Div for Dual<T> {
    type Output = Self;
    fn div(self, rhs: Self) -> Self {
        let inv = T::from_f64(1.0) / rhs.re;
        Dual::new(
            self.re * inv,
            (self.eps * rhs.re - self.re * rhs.eps) * inv * inv,
        )
    }
}

impl<T: Scalar> Neg for Dual<T> {
    type Output = Self;
    fn neg(self) -> Self {
        Dual::new(-self.re, -self.eps)
    }
}

impl<T: Scalar> Scalar for Dual<T> {
    fn from_f64(x: f64) -> Self {
        Dual::constant(x)
    }

    fn primal(&self) -> f64 {
        self.re.primal()
    }

    fn deriv_is_zero(&self) -> bool {
        self.eps.is_all_zero() && self.re.deriv_is_zero()
    }

    fn is_all_zero(&self) -> bool {
        self.re.is_all_zero() && self.eps.is_all_zero()
    }

    fn sqrt(self) -> Self {
        let r = self.re.sqrt();
        let half = T::from_f64(0.5);
        Dual::new(r, self.eps * half / r)
    }

    fn exp(self) -> Self {
        let e = self.re.exp();
        Dual::new(e, self.eps * e)
    }

    fn ln(self) -> Self {
        Dual::new(self.re.ln(), self.eps / self.re)
    }

    fn abs(self) -> Self {
        if self.re.primal() < 0.0 {
            -self
        } else {
            self
        }
    }

    fn sin(self) -> Self {
        Dual::new(self.re.sin(), self.eps * self.re.cos())
    }

    fn cos(self) -> Self {
        Dual::new(self.re.cos(), -(self.eps * self.re.sin()))
    }

    fn powi(self, n: i32) -> Self {
        if n == 0 {
            return Dual::constant(1.0);
        }
        if n < 0 {
            return Dual::<T>::constant(1.0) / self.powi(-n);
        }
        let mut acc = self;
        for _ in 1..n {
            acc = acc * self;
        }
        acc
    }
}

/// Value, first and third x-derivative extracted from a [`seed3`] evaluation.
#[derive(Debug, Clone, Copy)]
pub struct Dual3Parts {
    pub value: f64,
    pub d1: f64,
    pub d3: f64,
}

/// Seed `x + ε₁ + ε₂ + ε₃` so that a smooth `f` evaluated on the result has
/// `f'''(x)` in the ε₁ε₂ε₃ slot (no factorial factor: the slots are distinct
/// nilpotents).
pub fn seed3(x: f64) -> Dual3 {
    Dual3 {
        re: Dual2 {
            re: Dual1 { re: x, eps: 1.0 },
            eps: Dual1 { re: 1.0, eps: 0.0 },
        },
        eps: Dual2 {
            re: Dual1 { re: 1.0, eps: 0.0 },
            eps: Dual1 { re: 0.0, eps: 0.0 },
        },
    }
}

/// Extract value, ∂x and ∂xxx components from an evaluation seeded by [`seed3`].
pub fn dual3_parts(v: Dual3) -> Dual3Parts {
    Dual3Parts {
        value: v.re.re.re,
        d1: v.re.re.eps,
        d3: v.eps.eps.eps,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn f<S: Scalar>(x: S) -> S {
        // x·exp(sin x) + ln(x²+1)... keep it (x>0) friendly
        x * x.sin().exp() + (x * x + S::from_f64(1.0)).ln()
    }

    #[test]
    fn first_derivative_matches_finite_difference() {
        let x0 = 0.7;
        let d = f(Dual1::variable(x0));
        let h = 1e-6;
        let fd = (f(x0 + h) - f(x0 - h)) / (2.0 * h);
        assert_relative_eq!(d.derivative(), fd, max_relative = 1e-8);
        assert_relative_eq!(d.value(), f(x0), max_relative = 1e-14);
    }

    #[test]
    fn third_derivative_of_cubed() {
        // (x^3)''' = 6 exactly
        let parts = dual3_parts(seed3(1.3).powi(3));
        assert_relative_eq!(parts.value, 1.3f64.powi(3), max_relative = 1e-15);
        assert_relative_eq!(parts.d1, 3.0 * 1.3f64.powi(2), max_relative = 1e-15);
        assert_relative_eq!(parts.d3, 6.0, max_relative = 1e-15);
    }

    #[test]
    fn third_derivative_of_sech_like() {
        // f = exp(x)/(1+exp(2x)); compare d3 against a 7-point finite difference
        fn g<S: Scalar>(x: S) -> S {
            x.exp() / (S::from_f64(1.0) + (x + x).exp())
        }
        let x0 = 0.35;
        let parts = dual3_parts(g(seed3(x0)));
        let h = 1e-2;
        let stencil = [
            (-3.0, 1.0 / 8.0),
            (-2.0, -1.0),
            (-1.0, 13.0 / 8.0),
            (1.0, -13.0 / 8.0),
            (2.0, 1.0),
            (3.0, -1.0 / 8.0),
        ];
        let fd: f64 = stencil.iter().map(|&(k, w)| w * g(x0 + k * h)).sum::<f64>() / h.powi(3);
        assert_relative_eq!(parts.d3, fd, max_relative = 1e-6);
    }

    #[test]
    fn abs_follows_primal_sign() {
        let d = Dual1::variable(-2.0).abs();
        assert_eq!(d.value(), 2.0);
        assert_eq!(d.derivative(), -1.0);
    }

    #[test]
    fn deriv_is_zero_detects_constants() {
        assert!(Dual1::constant(3.0).deriv_is_zero());
        assert!(!Dual1::variable(3.0).deriv_is_zero());
        assert!(Dual3::constant(3.0).deriv_is_zero());
        assert!(!seed3(3.0).deriv_is_zero());
    }
}
