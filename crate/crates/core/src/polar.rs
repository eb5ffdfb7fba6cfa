//! Generalized polar chart `x = r^p cos(theta)`, `y = r^q sin(theta)`.
//!
//! With `(P, Q)` the full weights of the field,
//!
//! ```text
//! R_k = cos * X_{2PQ-Q+k} + sin * Y_{2PQ-P+k}
//! Q_k = -Q sin * X_{2PQ-Q+k} + P cos * Y_{2PQ-P+k}
//! dr/dtheta = r * sum R_k r^k / sum Q_k r^k
//! ```
//!
//! where `X_m`, `Y_m` are the weight-`m` parts evaluated at `(cos, sin)`. When the
//! weights share a factor `d`, the chart radius is `r^d` and only every `d`-th
//! index survives.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::field::{gcd, WeightedField};
use crate::real::Real;

/// Denominators below this magnitude count as a chart breakdown.
pub const BREAKDOWN: f64 = 1e-12;

/// One monomial `coef * cos^i sin^j` contributing to `R` or `Q` at a chart index.
#[derive(Debug, Clone, Copy, PartialEq)]
struct TrigTerm {
    index: usize,
    coef: f64,
    cos_exp: u32,
    sin_exp: u32,
}

/// Evaluated coefficient lists at one angle.
///
/// `n[j]`, `q[j]` multiply `r^j` in numerator and denominator after the leading
/// closed forms `n0`, `q0` have been split off; `n[0]` and `q[0]` hold only
/// extra terms sitting exactly on the leading weight.
#[derive(Debug, Clone)]
pub struct Coefficients<T> {
    pub n0: T,
    pub q0: T,
    pub n: Vec<T>,
    pub q: Vec<T>,
}

/// Precomputed polar right-hand side for a normalized field with coprime chart weights.
#[derive(Debug, Clone)]
pub struct PolarRhs {
    field: WeightedField,
    /// Full weights `(P, Q)`.
    weights: (u32, u32),
    chart_power: u32,
    r_terms: Vec<TrigTerm>,
    q_terms: Vec<TrigTerm>,
    k_max: usize,
    max_exp: u32,
    relaxed: bool,
    valid_radius: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ChartOptions {
    /// Accept extra terms of exactly leading weight (elementary foci such as
    /// linear damping), provided the leading denominator stays positive.
    pub relaxed: bool,
}

impl PolarRhs {
    pub fn new(field: &WeightedField) -> Result<Self> {
        Self::with_options(field, ChartOptions::default())
    }

    pub fn with_options(field: &WeightedField, options: ChartOptions) -> Result<Self> {
        let report = field.validate();
        if !report.ok && !(options.relaxed && report.only_leading_weight_violations()) {
            let detail: Vec<String> = report
                .violations
                .iter()
                .map(|v| format!("{} term ({}, {}) {}", v.component, v.monomial.k, v.monomial.j, v.rule.name()))
                .chain(report.structural.iter().cloned())
                .collect();
            return Err(Error::InvalidField(detail.join("; ")));
        }
        let normalized = field.normalize()?.field;
        let (reduced, _) = normalized.reduce_weights();
        let (p, q) = reduced.full_weights();
        let d = reduced.chart_power;
        let mut r_terms = Vec::new();
        let mut q_terms = Vec::new();
        let x_base = 2 * p * q - q;
        let y_base = 2 * p * q - p;
        let mut push = |weight: u32, base: u32, r: TrigTerm, qt: TrigTerm| {
            let k = weight - base;
            debug_assert_eq!(k % d, 0);
            let index = (k / d) as usize;
            r_terms.push(TrigTerm { index, ..r });
            q_terms.push(TrigTerm { index, ..qt });
        };
        for m in reduced.x_terms() {
            let w = reduced.weight(m.k, m.j);
            let r = TrigTerm { index: 0, coef: m.c, cos_exp: m.k + 1, sin_exp: m.j };
            let qt = TrigTerm { index: 0, coef: -(q as f64) * m.c, cos_exp: m.k, sin_exp: m.j + 1 };
            push(w, x_base, r, qt);
        }
        for m in reduced.y_terms() {
            let w = reduced.weight(m.k, m.j);
            let r = TrigTerm { index: 0, coef: m.c, cos_exp: m.k, sin_exp: m.j + 1 };
            let qt = TrigTerm { index: 0, coef: p as f64 * m.c, cos_exp: m.k + 1, sin_exp: m.j };
            push(w, y_base, r, qt);
        }
        let merge = |terms: Vec<TrigTerm>| {
            let mut map: BTreeMap<(usize, u32, u32), f64> = BTreeMap::new();
            for t in terms {
                *map.entry((t.index, t.cos_exp, t.sin_exp)).or_insert(0.0) += t.coef;
            }
            map.into_iter()
                .filter(|&(_, c)| c != 0.0)
                .map(|((index, cos_exp, sin_exp), coef)| TrigTerm { index, coef, cos_exp, sin_exp })
                .collect::<Vec<_>>()
        };
        let r_terms = merge(r_terms);
        let q_terms = merge(q_terms);
        let k_max = r_terms.iter().chain(&q_terms).map(|t| t.index).max().unwrap_or(0);
        let max_exp = r_terms
            .iter()
            .chain(&q_terms)
            .map(|t| t.cos_exp.max(t.sin_exp))
            .max()
            .unwrap_or(0)
            .max(2 * p.max(q));
        let mut rhs = PolarRhs {
            field: reduced,
            weights: (p, q),
            chart_power: d,
            r_terms,
            q_terms,
            k_max,
            max_exp,
            relaxed: options.relaxed,
            valid_radius: f64::INFINITY,
        };
        if options.relaxed {
            let q_min = (0..2048)
                .map(|i| {
                    let th = i as f64 * std::f64::consts::TAU / 2048.0;
                    let c = rhs.coefficients(th);
                    c.q0 + c.q[0]
                })
                .fold(f64::INFINITY, f64::min);
            if q_min <= 0.0 {
                return Err(Error::InvalidField(format!(
                    "leading-weight extras make the leading denominator nonpositive (min {q_min:.3e})"
                )));
            }
        }
        rhs.valid_radius = rhs.estimate_valid_radius();
        Ok(rhs)
    }

    /// Normalized, weight-reduced field the chart is built on.
    pub fn field(&self) -> &WeightedField {
        &self.field
    }

    /// Coprime chart weights `(p, q)`.
    pub fn chart_weights(&self) -> (u32, u32) {
        (self.field.p, self.field.q)
    }

    pub fn full_weights(&self) -> (u32, u32) {
        self.weights
    }

    /// Factor `d` with `r_chart = r^d`.
    pub fn chart_power(&self) -> u32 {
        self.chart_power
    }

    pub fn k_max(&self) -> usize {
        self.k_max
    }

    pub fn is_relaxed(&self) -> bool {
        self.relaxed
    }

    /// Half the smallest positive radius at which the denominator vanishes on a theta grid.
    pub fn valid_radius(&self) -> f64 {
        self.valid_radius
    }

    fn trig_powers<T: Real>(&self, theta: T) -> (Vec<T>, Vec<T>) {
        let (s, c) = theta.sin_cos();
        let n = self.max_exp as usize + 2;
        let mut cp = vec![T::one(); n];
        let mut sp = vec![T::one(); n];
        for i in 1..n {
            cp[i] = cp[i - 1] * c;
            sp[i] = sp[i - 1] * s;
        }
        (cp, sp)
    }

    /// Leading closed forms `d R_0`, `Q_0` from the normalized leading part.
    fn leading<T: Real>(&self, cp: &[T], sp: &[T]) -> (T, T) {
        let (p, q) = self.weights;
        let (p2, q2) = (2 * p as usize, 2 * q as usize);
        let (pf, qf) = (p as f64, q as f64);
        let r0 = cp[1] * sp[1] * (cp[q2 - 2] * qf - sp[p2 - 2] * pf);
        let q0 = (cp[q2] + sp[p2]) * (pf * qf);
        (r0 * self.chart_power as f64, q0)
    }

    /// All chart coefficients at `theta`.
    pub fn coefficients<T: Real>(&self, theta: T) -> Coefficients<T> {
        let (cp, sp) = self.trig_powers(theta);
        let (n0, q0) = self.leading(&cp, &sp);
        let d = self.chart_power as f64;
        let mut n = vec![T::zero(); self.k_max + 1];
        let mut q = vec![T::zero(); self.k_max + 1];
        for t in &self.r_terms {
            n[t.index] += cp[t.cos_exp as usize] * sp[t.sin_exp as usize] * (t.coef * d);
        }
        for t in &self.q_terms {
            q[t.index] += cp[t.cos_exp as usize] * sp[t.sin_exp as usize] * t.coef;
        }
        Coefficients { n0, q0, n, q }
    }

    /// `(R_k, Q_k)` at `theta` in the chart of the full weights (`k` in the
    /// original radius, before any reduction).
    pub fn rq(&self, k: usize, theta: f64) -> (f64, f64) {
        let d = self.chart_power as usize;
        if !k.is_multiple_of(d) {
            return (0.0, 0.0);
        }
        let j = k / d;
        let c = self.coefficients(theta);
        if j > self.k_max {
            return (0.0, 0.0);
        }
        let (n0, q0) = if j == 0 { (c.n0, c.q0) } else { (0.0, 0.0) };
        ((n0 + c.n[j]) / self.chart_power as f64, q0 + c.q[j])
    }

    /// Numerator and denominator series at `(theta, r)`.
    pub fn series<T: Real>(c: &Coefficients<T>, r: T) -> (T, T) {
        let mut num = T::zero();
        let mut den = T::zero();
        for j in (0..c.n.len()).rev() {
            num = num * r + c.n[j];
            den = den * r + c.q[j];
        }
        (num + c.n0, den + c.q0)
    }

    /// `dr/dtheta` in the chart radius.
    pub fn rhs<T: Real>(&self, theta: T, r: T) -> Result<T> {
        let c = self.coefficients(theta);
        let (num, den) = Self::series(&c, r);
        if den.abs().to_f64() < BREAKDOWN {
            return Err(Error::ChartBreakdown { theta: theta.to_f64(), r: r.to_f64(), denominator: den.to_f64() });
        }
        Ok(r * num / den)
    }

    /// Closed-form first coefficient `(cos^{2Q} + sin^{2P})^{-d/(2PQ)}` of the leading part.
    pub fn nu1_closed<T: Real>(&self, theta: T) -> T {
        let (p, q) = self.weights;
        let (s, c) = theta.sin_cos();
        let base = c.powi(2 * q as i32) + s.powi(2 * p as i32);
        base.powf(T::from_f64(-(self.chart_power as f64)) / T::from_f64((2 * p * q) as f64))
    }

    fn estimate_valid_radius(&self) -> f64 {
        if self.k_max == 0 {
            return f64::INFINITY;
        }
        let mut best = f64::INFINITY;
        for i in 0..720 {
            let th = i as f64 * std::f64::consts::TAU / 720.0;
            let c = self.coefficients(th);
            let den = |r: f64| Self::series(&c, r).1;
            // March outwards geometrically until the denominator turns nonpositive.
            let mut lo = 0.0;
            let mut r = 1e-3;
            while r < 1e6 && r < best {
                if den(r) <= BREAKDOWN {
                    let mut hi = r;
                    for _ in 0..60 {
                        let mid = 0.5 * (lo + hi);
                        if den(mid) <= BREAKDOWN {
                            hi = mid;
                        } else {
                            lo = mid;
                        }
                    }
                    best = best.min(hi);
                    break;
                }
                lo = r;
                r *= 1.05;
            }
        }
        0.5 * best
    }

    /// Rows `(theta, R_0, Q_0, ..., R_kmax, Q_kmax)` on an even grid of `[0, 2 pi)`.
    pub fn table(&self, samples: usize) -> Vec<Vec<f64>> {
        (0..samples)
            .map(|i| {
                let th = i as f64 * std::f64::consts::TAU / samples as f64;
                let mut row = vec![th];
                for j in 0..=self.k_max {
                    let (r, q) = self.rq(j * self.chart_power as usize, th);
                    row.push(r);
                    row.push(q);
                }
                row
            })
            .collect()
    }

    pub fn write_table_csv<W: std::io::Write>(&self, mut out: W, samples: usize) -> Result<()> {
        let mut header = vec!["theta".to_string()];
        for j in 0..=self.k_max {
            let k = j * self.chart_power as usize;
            header.push(format!("R{k}"));
            header.push(format!("Q{k}"));
        }
        writeln!(out, "{}", header.join(","))?;
        for row in self.table(samples) {
            let line: Vec<String> = row.iter().map(|v| format!("{v:.17e}")).collect();
            writeln!(out, "{}", line.join(","))?;
        }
        Ok(())
    }
}

/// Weight-`m` components `(X_m, Y_m)` of the field evaluated at `(cos, sin)`.
pub fn homog_component(field: &WeightedField, m: u32, theta: f64) -> (f64, f64) {
    let (s, c) = theta.sin_cos();
    let poly = field.to_polynomial();
    let (p, q) = field.full_weights();
    let part = |terms: Vec<crate::field::Monomial>| {
        terms
            .into_iter()
            .filter(|t| t.k * p + t.j * q == m)
            .map(|t| t.c * c.powi(t.k as i32) * s.powi(t.j as i32))
            .sum::<f64>()
    };
    (part(poly.x_terms().collect()), part(poly.y_terms().collect()))
}

/// `(R_k, Q_k)` of a field at `theta`, `k` counted in the radius of the full weights.
pub fn rq(field: &WeightedField, k: usize, theta: f64) -> Result<(f64, f64)> {
    Ok(PolarRhs::new(field)?.rq(k, theta))
}

/// `d/dtheta` of the chart radius at `(theta, r)`.
pub fn polar_rhs(rhs: &PolarRhs, theta: f64, r: f64) -> Result<f64> {
    rhs.rhs(theta, r)
}

/// Weight-homogeneous scaling check helper: `gcd(p, q)` of a field's full weights.
pub fn weight_gcd(field: &WeightedField) -> u32 {
    let (p, q) = field.full_weights();
    gcd(p, q)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

    fn f31(a22: f64, a50: f64, b13: f64, b41: f64) -> WeightedField {
        WeightedField::new(2, 3).x(2, 2, a22).x(5, 0, a50).y(1, 3, b13).y(4, 1, b41)
    }

    fn closed_r1(f: (f64, f64, f64, f64), th: f64) -> (f64, f64) {
        let (a22, a50, b13, b41) = f;
        let (s, c) = th.sin_cos();
        let r1 = c * (c.powi(3) * (a50 * c * c + b41 * s * s) + s * s * (a22 * c * c + b13 * s * s));
        let q1 = -c * c * s * ((3.0 * a50 - 2.0 * b41) * c.powi(3) + (3.0 * a22 - 2.0 * b13) * s * s);
        (r1, q1)
    }

    #[test]
    fn homogeneous_components_examples() {
        let f = f31(0.7, 1.3, -0.4, 2.0);
        assert_eq!(homog_component(&f, 10, 0.0).0, 1.3);
        assert!(homog_component(&f, 11, FRAC_PI_2).1.abs() < 1e-15);
        let expect = 0.7 * 0.25 + 1.3 * (0.5f64.sqrt()).powi(5);
        assert!((homog_component(&f, 10, FRAC_PI_4).0 - expect).abs() < 1e-15);
    }

    #[test]
    fn leading_coefficients() {
        let f = f31(0.0, 0.0, 0.0, 0.0);
        assert_eq!(rq(&f, 0, 0.0).unwrap(), (0.0, 6.0));
        let (r0, _) = rq(&f, 0, FRAC_PI_4).unwrap();
        assert!((r0 + 0.125).abs() < 1e-15);
        for (p, q) in [(1, 1), (1, 2), (2, 3), (3, 4)] {
            let (r0, q0) = rq(&WeightedField::new(p, q), 0, FRAC_PI_2).unwrap();
            assert!(r0.abs() < 1e-15);
            assert!((q0 - (p * q) as f64).abs() < 1e-15);
        }
    }

    #[test]
    fn rhs_examples() {
        let core = PolarRhs::new(&f31(0.0, 0.0, 0.0, 0.0)).unwrap();
        assert_eq!(core.rhs(1.0, 0.0).unwrap(), 0.0);
        let c = core.coefficients(0.7);
        assert!((core.rhs(0.7, 0.3).unwrap() - 0.3 * c.n0 / c.q0).abs() < 1e-16);
        let rhs = PolarRhs::new(&f31(0.0, 1.0, 0.0, 0.0)).unwrap();
        assert!((rhs.rhs(0.0, 0.1).unwrap() - 0.1 * (0.1 / 6.0)).abs() < 1e-17);
    }

    #[test]
    fn breakdown_far_from_origin() {
        // Q_1 large enough to cancel Q_0 at moderate r.
        let rhs = PolarRhs::new(&f31(0.0, 10.0, 0.0, -10.0)).unwrap();
        let radius = rhs.valid_radius();
        assert!(radius < 1.0);
        let min_den = (0..720)
            .map(|i| PolarRhs::series(&rhs.coefficients(i as f64 * 2.0 * PI / 720.0), 2.5 * radius).1)
            .fold(f64::INFINITY, f64::min);
        assert!(min_den < 0.0);
        // Bisect to the vanishing denominator along the worst ray.
        let th = (0..720)
            .map(|i| i as f64 * 2.0 * PI / 720.0)
            .min_by(|a, b| {
                let da = PolarRhs::series(&rhs.coefficients(*a), 2.5 * radius).1;
                let db = PolarRhs::series(&rhs.coefficients(*b), 2.5 * radius).1;
                da.total_cmp(&db)
            })
            .unwrap();
        let c = rhs.coefficients(th);
        let (mut lo, mut hi) = (0.0, 2.5 * radius);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if PolarRhs::series(&c, mid).1 > 0.0 { lo = mid } else { hi = mid }
        }
        assert!(matches!(rhs.rhs(th, hi), Err(Error::ChartBreakdown { .. })));
    }

    #[test]
    fn reduced_chart_matches_direct_computation() {
        // (2,2) reduces to (1,1) with d = 2: chart radius is r^2.
        let f = WeightedField::new(2, 2).x(3, 1, 0.8).y(1, 3, -0.3);
        let rhs = PolarRhs::new(&f).unwrap();
        assert_eq!(rhs.chart_power(), 2);
        assert_eq!(rhs.chart_weights(), (1, 1));
        let (r, th) = (0.2f64, 0.9f64);
        let (s, c) = th.sin_cos();
        let rho = r.sqrt();
        let (x, y) = (rho * rho * c, rho * rho * s);
        let (xd, yd) = f.to_polynomial().eval(x, y);
        // x = rho^2 c, y = rho^2 s -> rho' via the determinant formula.
        let det = 2.0 * rho.powi(3);
        let rho_dot = (rho * rho * c * xd + rho * rho * s * yd) / det;
        let th_dot = (2.0 * rho * c * yd - 2.0 * rho * s * xd) / det;
        let expect = 2.0 * rho * rho_dot / th_dot;
        assert!((rhs.rhs(th, r).unwrap() - expect).abs() < 1e-12 * expect.abs().max(1e-3));
    }

    #[test]
    fn q0_positive_on_dense_grid() {
        for (p, q) in [(1, 1), (1, 2), (2, 3), (3, 4)] {
            let rhs = PolarRhs::new(&WeightedField::new(p, q)).unwrap();
            let min = (0..10_000)
                .map(|i| rhs.coefficients(i as f64 * 2.0 * PI / 1e4).q0)
                .fold(f64::INFINITY, f64::min);
            assert!(min > 0.0, "({p},{q}) min {min}");
        }
    }

    #[test]
    fn relaxed_mode_accepts_leading_weight_extras() {
        let f = WeightedField::new(1, 1).x(1, 0, -0.1).y(0, 1, -0.1);
        assert!(matches!(PolarRhs::new(&f), Err(Error::InvalidField(_))));
        let rhs = PolarRhs::with_options(&f, ChartOptions { relaxed: true }).unwrap();
        let c = rhs.coefficients(0.4);
        assert!((c.n[0] + 0.1).abs() < 1e-15);
        assert!(c.q[0].abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn r1_q1_match_closed_forms(
            a22 in -2.0f64..2.0, a50 in -2.0f64..2.0, b13 in -2.0f64..2.0, b41 in -2.0f64..2.0,
            th in 0.0f64..(2.0 * PI),
        ) {
            let (r1, q1) = rq(&f31(a22, a50, b13, b41), 1, th).unwrap();
            let (er, eq) = closed_r1((a22, a50, b13, b41), th);
            prop_assert!((r1 - er).abs() < 1e-13);
            prop_assert!((q1 - eq).abs() < 1e-13);
        }

        #[test]
        fn weighted_scaling_of_components(
            lambda in 0.2f64..3.0, x in -1.0f64..1.0, y in -1.0f64..1.0,
            a in -2.0f64..2.0, b in -2.0f64..2.0,
        ) {
            // X_10 of the 2:3 field: a x^2 y^2 + b x^5.
            let xm = |x: f64, y: f64| a * x * x * y * y + b * x.powi(5);
            let lhs = xm(lambda.powi(2) * x, lambda.powi(3) * y);
            let rhs = lambda.powi(10) * xm(x, y);
            prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()));
        }

        #[test]
        fn polar_agrees_with_cartesian_flow(
            a22 in -1.0f64..1.0, a50 in -1.0f64..1.0, b13 in -1.0f64..1.0, b41 in -1.0f64..1.0,
            th in 0.0f64..(2.0 * PI), r in 0.01f64..0.2,
        ) {
            let f = f31(a22, a50, b13, b41);
            let rhs = PolarRhs::new(&f).unwrap();
            let (s, c) = th.sin_cos();
            let (x, y) = (r * r * c, r.powi(3) * s);
            let (xd, yd) = f.to_polynomial().eval(x, y);
            let det = r.powi(4) * (2.0 * c * c + 3.0 * s * s);
            let r_dot = (r.powi(3) * c * xd + r * r * s * yd) / det;
            let th_dot = (2.0 * r * c * yd - 3.0 * r * r * s * xd) / det;
            let expect = r_dot / th_dot;
            let got = rhs.rhs(th, r).unwrap();
            prop_assert!((got - expect).abs() <= 1e-10 * (1.0 + expect.abs()), "{} vs {}", got, expect);
        }
    }
}
