//! Scalar abstraction shared by the integrator, jets and the polar right-hand side.
//!
//! Two implementations exist: plain `f64` and [`DoubleDouble`], an unevaluated
//! sum of two doubles carrying roughly 106 bits of mantissa. The latter backs the
//! `extended` precision mode used when nested parameter hierarchies push focal
//! values below double-precision resolution.

use std::cmp::Ordering;
use std::fmt;
use std::sync::OnceLock;
use std::ops::{Add, AddAssign, Div, DivAssign, Mul, MulAssign, Neg, Sub, SubAssign};

use serde::{Deserialize, Serialize};

/// Arithmetic precision selected per run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    #[default]
    Double,
    Extended,
}

impl std::str::FromStr for Precision {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "double" => Ok(Precision::Double),
            "extended" => Ok(Precision::Extended),
            other => Err(format!("unknown precision '{other}' (expected double|extended)")),
        }
    }
}

pub trait Real:
    Copy
    + fmt::Debug
    + fmt::Display
    + PartialEq
    + PartialOrd
    + Send
    + Sync
    + 'static
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Add<f64, Output = Self>
    + Sub<f64, Output = Self>
    + Mul<f64, Output = Self>
    + Div<f64, Output = Self>
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
{
    /// Unit roundoff of the representation.
    const EPSILON: f64;

    fn from_f64(x: f64) -> Self;
    fn to_f64(self) -> f64;
    fn abs(self) -> Self;
    fn sqrt(self) -> Self;
    fn exp(self) -> Self;
    fn ln(self) -> Self;
    fn sin_cos(self) -> (Self, Self);
    fn pi() -> Self;

    fn zero() -> Self {
        Self::from_f64(0.0)
    }

    fn one() -> Self {
        Self::from_f64(1.0)
    }

    fn is_finite(self) -> bool {
        self.to_f64().is_finite()
    }

    fn powi(self, n: i32) -> Self {
        if n < 0 {
            return Self::one() / self.powi(-n);
        }
        let mut base = self;
        let mut e = n as u32;
        let mut acc = Self::one();
        while e > 0 {
            if e & 1 == 1 {
                acc *= base;
            }
            base = base * base;
            e >>= 1;
        }
        acc
    }

    fn powf(self, e: Self) -> Self {
        (self.ln() * e).exp()
    }

    fn max(self, other: Self) -> Self {
        if self >= other {
            self
        } else {
            other
        }
    }

    fn min(self, other: Self) -> Self {
        if self <= other {
            self
        } else {
            other
        }
    }

    fn signum(self) -> f64 {
        let v = self.to_f64();
        if v > 0.0 {
            1.0
        } else if v < 0.0 {
            -1.0
        } else {
            0.0
        }
    }
}

impl Real for f64 {
    const EPSILON: f64 = f64::EPSILON;

    #[inline]
    fn from_f64(x: f64) -> Self {
        x
    }
    #[inline]
    fn to_f64(self) -> f64 {
        self
    }
    #[inline]
    fn abs(self) -> Self {
        f64::abs(self)
    }
    #[inline]
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    #[inline]
    fn exp(self) -> Self {
        f64::exp(self)
    }
    #[inline]
    fn ln(self) -> Self {
        f64::ln(self)
    }
    #[inline]
    fn sin_cos(self) -> (Self, Self) {
        f64::sin_cos(self)
    }
    #[inline]
    fn pi() -> Self {
        std::f64::consts::PI
    }
    #[inline]
    fn powi(self, n: i32) -> Self {
        f64::powi(self, n)
    }
    #[inline]
    fn powf(self, e: Self) -> Self {
        f64::powf(self, e)
    }
}

/// Double-double number `hi + lo` with `|lo| <= ulp(hi)/2`.
#[derive(Clone, Copy, Default, PartialEq)]
pub struct DoubleDouble {
    hi: f64,
    lo: f64,
}

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

#[inline]
fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

const DD_PI: DoubleDouble = DoubleDouble::new_raw(std::f64::consts::PI, 1.2246467991473532e-16);
const DD_HALF_PI: DoubleDouble = DoubleDouble::new_raw(std::f64::consts::FRAC_PI_2, 6.123233995736766e-17);
const DD_LN2: DoubleDouble = DoubleDouble::new_raw(std::f64::consts::LN_2, 2.3190468138462996e-17);

impl DoubleDouble {
    const fn new_raw(hi: f64, lo: f64) -> Self {
        DoubleDouble { hi, lo }
    }

    pub fn new(hi: f64, lo: f64) -> Self {
        let (hi, lo) = two_sum(hi, lo);
        DoubleDouble { hi, lo }
    }

    pub fn hi(self) -> f64 {
        self.hi
    }

    pub fn lo(self) -> f64 {
        self.lo
    }

    /// Exact quotient `num/den` of two integers representable in f64.
    pub fn ratio(num: f64, den: f64) -> Self {
        DoubleDouble::from(num) / DoubleDouble::from(den)
    }

    fn mul_pow2(self, k: i32) -> Self {
        let s = 2f64.powi(k);
        DoubleDouble { hi: self.hi * s, lo: self.lo * s }
    }

    /// Taylor series of sin and cos on |x| <= pi/4.
    fn sin_cos_reduced(x: Self) -> (Self, Self) {
        let (sin_c, cos_c) = trig_coefficients();
        let x2 = x * x;
        let mut sin = Self::from(0.0);
        let mut cos = Self::from(0.0);
        for n in (0..TRIG_TERMS).rev() {
            sin = sin * x2 + sin_c[n];
            cos = cos * x2 + cos_c[n];
        }
        (sin * x, cos)
    }
}

// (pi/4)^30 / 30! is below 1e-34.
const TRIG_TERMS: usize = 15;

/// Signed reciprocal factorials (-1)^n/(2n+1)! and (-1)^n/(2n)!.
fn trig_coefficients() -> &'static ([DoubleDouble; TRIG_TERMS], [DoubleDouble; TRIG_TERMS]) {
    static COEFFS: OnceLock<([DoubleDouble; TRIG_TERMS], [DoubleDouble; TRIG_TERMS])> =
        OnceLock::new();
    COEFFS.get_or_init(|| {
        let mut sin_c = [DoubleDouble::from(0.0); TRIG_TERMS];
        let mut cos_c = [DoubleDouble::from(0.0); TRIG_TERMS];
        let mut fact = DoubleDouble::from(1.0);
        for k in 0..2 * TRIG_TERMS {
            if k > 0 {
                fact = fact * k as f64;
            }
            let sign = if (k / 2) % 2 == 0 { 1.0 } else { -1.0 };
            let c = DoubleDouble::from(sign) / fact;
            if k % 2 == 0 {
                cos_c[k / 2] = c;
            } else {
                sin_c[k / 2] = c;
            }
        }
        (sin_c, cos_c)
    })
}

impl From<f64> for DoubleDouble {
    fn from(x: f64) -> Self {
        DoubleDouble { hi: x, lo: 0.0 }
    }
}

impl fmt::Debug for DoubleDouble {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "DD({:e} + {:e})", self.hi, self.lo)
    }
}

impl fmt::Display for DoubleDouble {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.hi + self.lo)
    }
}

impl PartialOrd for DoubleDouble {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        match self.hi.partial_cmp(&other.hi) {
            Some(Ordering::Equal) => self.lo.partial_cmp(&other.lo),
            ord => ord,
        }
    }
}

impl Add for DoubleDouble {
    type Output = Self;
    #[inline]
    fn add(self, b: Self) -> Self {
        let (s1, s2) = two_sum(self.hi, b.hi);
        let (t1, t2) = two_sum(self.lo, b.lo);
        let (s1, s2) = quick_two_sum(s1, s2 + t1);
        let (hi, lo) = quick_two_sum(s1, s2 + t2);
        DoubleDouble { hi, lo }
    }
}

impl Sub for DoubleDouble {
    type Output = Self;
    #[inline]
    fn sub(self, b: Self) -> Self {
        self + (-b)
    }
}

impl Neg for DoubleDouble {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        DoubleDouble { hi: -self.hi, lo: -self.lo }
    }
}

impl Mul for DoubleDouble {
    type Output = Self;
    #[inline]
    fn mul(self, b: Self) -> Self {
        let (p1, p2) = two_prod(self.hi, b.hi);
        let p2 = p2 + (self.hi * b.lo + self.lo * b.hi);
        let (hi, lo) = quick_two_sum(p1, p2);
        DoubleDouble { hi, lo }
    }
}

impl Div for DoubleDouble {
    type Output = Self;
    #[inline]
    fn div(self, b: Self) -> Self {
        let q1 = self.hi / b.hi;
        let r = self - b * q1;
        let q2 = r.hi / b.hi;
        let r = r - b * q2;
        let q3 = r.hi / b.hi;
        let (q1, q2) = quick_two_sum(q1, q2);
        DoubleDouble { hi: q1, lo: q2 } + q3
    }
}

impl Add<f64> for DoubleDouble {
    type Output = Self;
    #[inline]
    fn add(self, b: f64) -> Self {
        let (s1, s2) = two_sum(self.hi, b);
        let (hi, lo) = quick_two_sum(s1, s2 + self.lo);
        DoubleDouble { hi, lo }
    }
}

impl Sub<f64> for DoubleDouble {
    type Output = Self;
    #[inline]
    fn sub(self, b: f64) -> Self {
        self + (-b)
    }
}

impl Mul<f64> for DoubleDouble {
    type Output = Self;
    #[inline]
    fn mul(self, b: f64) -> Self {
        let (p1, p2) = two_prod(self.hi, b);
        let (hi, lo) = quick_two_sum(p1, p2 + self.lo * b);
        DoubleDouble { hi, lo }
    }
}

impl Div<f64> for DoubleDouble {
    type Output = Self;
    #[inline]
    fn div(self, b: f64) -> Self {
        self / DoubleDouble::from(b)
    }
}

macro_rules! assign_ops {
    ($($tr:ident $f:ident $op:tt),*) => {$(
        impl $tr for DoubleDouble {
            #[inline]
            fn $f(&mut self, rhs: Self) {
                *self = *self $op rhs;
            }
        }
    )*};
}
assign_ops!(AddAssign add_assign +, SubAssign sub_assign -, MulAssign mul_assign *, DivAssign div_assign /);

impl Real for DoubleDouble {
    const EPSILON: f64 = 4.93038065763132e-32;

    fn from_f64(x: f64) -> Self {
        DoubleDouble::from(x)
    }

    fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    fn abs(self) -> Self {
        if self.hi < 0.0 {
            -self
        } else {
            self
        }
    }

    fn sqrt(self) -> Self {
        if self.hi <= 0.0 {
            return DoubleDouble::from(self.hi.sqrt());
        }
        let q = DoubleDouble::from(self.hi.sqrt());
        q + (self - q * q) / (q * 2.0)
    }

    fn exp(self) -> Self {
        if self.hi > 709.0 {
            return DoubleDouble::from(f64::INFINITY);
        }
        if self.hi < -745.0 {
            return DoubleDouble::from(0.0);
        }
        let k = (self.hi / DD_LN2.hi).round();
        // r = (x - k ln2) / 512, |r| <= ln2/1024
        let r = (self - DD_LN2 * k).mul_pow2(-9);
        let mut term = DoubleDouble::from(1.0);
        let mut sum = DoubleDouble::from(1.0);
        for n in 1..=14 {
            term = term * r / n as f64;
            sum += term;
        }
        for _ in 0..9 {
            sum = sum * sum;
        }
        sum.mul_pow2(k as i32)
    }

    fn ln(self) -> Self {
        if self.hi <= 0.0 {
            return DoubleDouble::from(f64::NAN);
        }
        // Newton on exp(y) = x, quadratic convergence from the f64 seed.
        let mut y = DoubleDouble::from(self.hi.ln());
        for _ in 0..2 {
            y = y + self * (-y).exp() - 1.0;
        }
        y
    }

    fn sin_cos(self) -> (Self, Self) {
        let k = (self.hi / DD_HALF_PI.hi).round();
        let r = self - DD_HALF_PI * k;
        let (s, c) = DoubleDouble::sin_cos_reduced(r);
        match (k as i64).rem_euclid(4) {
            0 => (s, c),
            1 => (c, -s),
            2 => (-s, -c),
            _ => (-c, s),
        }
    }

    fn pi() -> Self {
        DD_PI
    }
}
