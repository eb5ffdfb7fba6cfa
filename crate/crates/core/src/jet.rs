//! Truncated power series in the initial radius `h`.
//!
//! Coefficients are stored from the constant term upward, `coeffs[i]` being the
//! coefficient of `h^i`. Radius jets such as `r(theta, h)` have a zero constant
//! term; general series `g(h)` may carry one.

use std::ops::{Add, Mul, Neg, Sub};

use crate::error::{Error, Result};
use crate::real::Real;

/// Leading divisor coefficients at or below this magnitude are treated as zero.
pub const SINGULAR_DIVISOR: f64 = 1e-300;

#[derive(Debug, Clone, PartialEq)]
pub struct Jet<T = f64> {
    coeffs: Vec<T>,
}

impl<T: Real> Jet<T> {
    pub fn zero(order: usize) -> Self {
        Jet { coeffs: vec![T::zero(); order + 1] }
    }

    pub fn constant(c: T, order: usize) -> Self {
        let mut jet = Self::zero(order);
        jet.coeffs[0] = c;
        jet
    }

    /// The series `h`.
    pub fn identity(order: usize) -> Self {
        let mut jet = Self::zero(order);
        if order >= 1 {
            jet.coeffs[1] = T::one();
        }
        jet
    }

    /// Builds a jet from `[c0, c1, ..., cK]`.
    pub fn from_coeffs(coeffs: Vec<T>) -> Self {
        assert!(!coeffs.is_empty(), "a jet needs at least a constant term");
        Jet { coeffs }
    }

    /// Builds a constant-free jet from `[c1, ..., cK]`.
    pub fn from_radius_coeffs(coeffs: &[T]) -> Self {
        let mut all = Vec::with_capacity(coeffs.len() + 1);
        all.push(T::zero());
        all.extend_from_slice(coeffs);
        Jet { coeffs: all }
    }

    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeffs(&self) -> &[T] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [T] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<T> {
        self.coeffs
    }

    pub fn coeff(&self, i: usize) -> T {
        self.coeffs.get(i).copied().unwrap_or_else(T::zero)
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_finite())
    }

    pub fn truncate(&self, order: usize) -> Self {
        let mut coeffs = self.coeffs.clone();
        coeffs.resize(order + 1, T::zero());
        Jet { coeffs }
    }

    pub fn scale(&self, s: T) -> Self {
        Jet { coeffs: self.coeffs.iter().map(|&c| c * s).collect() }
    }

    /// Horner evaluation at `h`.
    pub fn eval(&self, h: T) -> T {
        self.coeffs.iter().rev().fold(T::zero(), |acc, &c| acc * h + c)
    }

    fn check_orders(&self, other: &Self) {
        assert_eq!(self.order(), other.order(), "jet orders differ");
    }

    pub fn mul_jet(&self, other: &Self) -> Self {
        self.check_orders(other);
        let n = self.coeffs.len();
        let mut out = vec![T::zero(); n];
        for (i, &a) in self.coeffs.iter().enumerate() {
            if a == T::zero() {
                continue;
            }
            for (o, &b) in out[i..].iter_mut().zip(&other.coeffs) {
                *o += a * b;
            }
        }
        Jet { coeffs: out }
    }

    /// Quotient `self / divisor`.
    ///
    /// When the divisor starts at `h^s` with `s > 0`, the numerator must vanish
    /// below `h^s` as well; the quotient is then known only through order `K - s`
    /// and the top `s` coefficients are returned as zero.
    pub fn div_jet(&self, divisor: &Self) -> Result<Self> {
        self.check_orders(divisor);
        let n = self.coeffs.len();
        let s = divisor
            .coeffs
            .iter()
            .position(|c| c.abs().to_f64() > SINGULAR_DIVISOR)
            .ok_or_else(|| Error::SingularDivision(divisor.coeff(0).to_f64()))?;
        if let Some(c) = self.coeffs[..s].iter().find(|c| c.abs().to_f64() > SINGULAR_DIVISOR) {
            return Err(Error::SingularDivision(c.to_f64()));
        }
        let a = &self.coeffs[s..];
        let b = &divisor.coeffs[s..];
        let lead = b[0];
        let mut out = vec![T::zero(); n];
        for i in 0..a.len() {
            let mut acc = a[i];
            for j in 1..=i {
                acc -= b[j] * out[i - j];
            }
            out[i] = acc / lead;
        }
        Ok(Jet { coeffs: out })
    }

    /// `outer(inner(h))`; `inner` must have no constant term.
    pub fn compose(&self, inner: &Self) -> Result<Self> {
        self.check_orders(inner);
        if inner.coeffs[0] != T::zero() {
            return Err(Error::Precondition(format!(
                "composition needs an inner series without constant term (got {})",
                inner.coeffs[0]
            )));
        }
        let n = self.order();
        let mut acc = Self::constant(self.coeffs[n], n);
        for &c in self.coeffs[..n].iter().rev() {
            acc = acc.mul_jet(inner);
            acc.coeffs[0] += c;
        }
        Ok(acc)
    }

    /// `self^n` by repeated squaring.
    pub fn powi(&self, n: u32) -> Self {
        let mut result = Self::constant(T::one(), self.order());
        let mut base = self.clone();
        let mut e = n;
        while e > 0 {
            if e & 1 == 1 {
                result = result.mul_jet(&base);
            }
            base = base.mul_jet(&base);
            e >>= 1;
        }
        result
    }

    pub fn to_f64(&self) -> Jet<f64> {
        Jet { coeffs: self.coeffs.iter().map(|c| c.to_f64()).collect() }
    }
}

impl<T: Real> Add for &Jet<T> {
    type Output = Jet<T>;
    fn add(self, other: &Jet<T>) -> Jet<T> {
        self.check_orders(other);
        Jet { coeffs: self.coeffs.iter().zip(&other.coeffs).map(|(&a, &b)| a + b).collect() }
    }
}

impl<T: Real> Sub for &Jet<T> {
    type Output = Jet<T>;
    fn sub(self, other: &Jet<T>) -> Jet<T> {
        self.check_orders(other);
        Jet { coeffs: self.coeffs.iter().zip(&other.coeffs).map(|(&a, &b)| a - b).collect() }
    }
}

impl<T: Real> Mul for &Jet<T> {
    type Output = Jet<T>;
    fn mul(self, other: &Jet<T>) -> Jet<T> {
        self.mul_jet(other)
    }
}

impl<T: Real> Neg for &Jet<T> {
    type Output = Jet<T>;
    fn neg(self) -> Jet<T> {
        Jet { coeffs: self.coeffs.iter().map(|&c| -c).collect() }
    }
}

impl<T: Real> serde::Serialize for Jet<T> {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let v: Vec<f64> = self.coeffs.iter().map(|c| c.to_f64()).collect();
        v.serialize(s)
    }
}

pub fn jet_add<T: Real>(a: &Jet<T>, b: &Jet<T>) -> Jet<T> {
    a + b
}

pub fn jet_mul<T: Real>(a: &Jet<T>, b: &Jet<T>) -> Jet<T> {
    a * b
}

pub fn jet_div<T: Real>(a: &Jet<T>, b: &Jet<T>) -> Result<Jet<T>> {
    a.div_jet(b)
}

pub fn jet_compose<T: Real>(outer: &Jet<T>, inner: &Jet<T>) -> Result<Jet<T>> {
    outer.compose(inner)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn jet(c: &[f64]) -> Jet {
        Jet::from_coeffs(c.to_vec())
    }

    #[test]
    fn h_times_h() {
        let h = Jet::<f64>::identity(4);
        assert_eq!((&h * &h).coeffs(), &[0.0, 0.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn compose_hand_expansion() {
        // (h + h^2) o (h + h^3) = h + h^2 + h^3 + O(h^4)
        let outer = jet(&[0.0, 1.0, 1.0, 0.0]);
        let inner = jet(&[0.0, 1.0, 0.0, 1.0]);
        assert_eq!(outer.compose(&inner).unwrap().coeffs(), &[0.0, 1.0, 1.0, 1.0]);
    }

    #[test]
    fn compose_rejects_constant_inner() {
        let err = jet(&[0.0, 1.0]).compose(&jet(&[1.0, 1.0])).unwrap_err();
        assert!(matches!(err, Error::Precondition(_)));
    }

    #[test]
    fn division_with_shift() {
        // (h^2 + h^3) / (h) = h + h^2, known through order K-1
        let a = jet(&[0.0, 0.0, 1.0, 1.0]);
        let b = jet(&[0.0, 1.0, 0.0, 0.0]);
        assert_eq!(a.div_jet(&b).unwrap().coeffs(), &[0.0, 1.0, 1.0, 0.0]);
    }

    #[test]
    fn division_by_zero_jet_is_singular() {
        let err = jet(&[1.0, 2.0]).div_jet(&jet(&[0.0, 1e-301])).unwrap_err();
        assert!(matches!(err, Error::SingularDivision(_)));
        let err = jet(&[1.0, 2.0]).div_jet(&jet(&[0.0, 1.0])).unwrap_err();
        assert!(matches!(err, Error::SingularDivision(_)));
    }

    #[test]
    fn powi_and_eval() {
        let a = jet(&[1.0, 1.0, 0.0, 0.0, 0.0]);
        assert_eq!(a.powi(4).coeffs(), &[1.0, 4.0, 6.0, 4.0, 1.0]);
        assert_eq!(a.powi(4).eval(1.0), 16.0);
    }

    const K: usize = 8;

    fn arb_jet() -> impl Strategy<Value = Jet> {
        prop::collection::vec(-2.0f64..2.0, K + 1).prop_map(Jet::from_coeffs)
    }

    fn arb_unit_jet() -> impl Strategy<Value = Jet> {
        arb_jet().prop_map(|mut j| {
            j.coeffs_mut()[0] = 1.0;
            j
        })
    }

    fn arb_radius_jet() -> impl Strategy<Value = Jet> {
        arb_jet().prop_map(|mut j| {
            j.coeffs_mut()[0] = 0.0;
            j
        })
    }

    fn close(a: &Jet, b: &Jet, tol: f64) -> bool {
        a.coeffs().iter().zip(b.coeffs()).all(|(x, y)| (x - y).abs() <= tol * (1.0 + x.abs().max(y.abs())))
    }

    proptest! {
        #[test]
        fn add_mul_commute(a in arb_jet(), b in arb_jet()) {
            prop_assert_eq!(&a + &b, &b + &a);
            prop_assert!(close(&(&a * &b), &(&b * &a), 1e-15));
        }

        #[test]
        fn add_associates(a in arb_jet(), b in arb_jet(), c in arb_jet()) {
            prop_assert!(close(&(&(&a + &b) + &c), &(&a + &(&b + &c)), 1e-15));
        }

        #[test]
        fn mul_distributes(a in arb_jet(), b in arb_jet(), c in arb_jet()) {
            let lhs = &a * &(&b + &c);
            let rhs = &(&a * &b) + &(&a * &c);
            prop_assert!(close(&lhs, &rhs, 1e-13));
        }

        #[test]
        fn div_inverts_mul(a in arb_jet(), b in arb_unit_jet()) {
            let back = (&a * &b).div_jet(&b).unwrap();
            // Recurrences amplify by up to |b|^K; compare in a scale-aware way.
            let scale = a.coeffs().iter().chain(b.coeffs()).fold(1.0f64, |m, c| m.max(c.abs()));
            prop_assert!(close(&back, &a, 1e-12 * scale.powi(K as i32)));
        }

        #[test]
        fn compose_with_identity(x in arb_radius_jet(), y in arb_jet()) {
            let id = Jet::identity(K);
            prop_assert_eq!(id.compose(&x).unwrap(), x.clone());
            prop_assert!(close(&y.compose(&id).unwrap(), &y, 0.0));
        }
    }
}
