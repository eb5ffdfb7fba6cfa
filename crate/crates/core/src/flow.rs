//! Integration of the polar equation and of Cartesian flows.
//!
//! Radii are integrated in factored form `r = nu1(theta) * (h + zeta)`, where
//! `nu1` is the closed-form first coefficient of the leading part. The error
//! controller then sees `zeta`, whose size is that of the nonlinear correction
//! rather than of `h`, so the displacement keeps its relative accuracy even when
//! it is many orders of magnitude below `h`.

use std::f64::consts::{PI, TAU};
use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::PolynomialField;
use crate::integrate::{HasTableau, Rkf78, Settings, Stats};
use crate::jet::Jet;
use crate::polar::{Coefficients, PolarRhs, BREAKDOWN};
use crate::real::{DoubleDouble, Precision, Real};

pub const DEFAULT_TOL: f64 = 1e-12;

/// How the jet hierarchy is transported.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub enum JetForm {
    /// `r = nu1_closed(theta) * u`, integrating `u`.
    #[default]
    Factored,
    /// `r` itself, with `nu1` integrated like every other coefficient.
    Direct,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JetOptions {
    pub tol: f64,
    pub precision: Precision,
    pub form: JetForm,
    /// Number of evenly spaced output samples including both ends (at least 2).
    pub samples: usize,
}

impl Default for JetOptions {
    fn default() -> Self {
        JetOptions { tol: DEFAULT_TOL, precision: Precision::Double, form: JetForm::Factored, samples: 2 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct JetTrajectory {
    pub thetas: Vec<f64>,
    /// `nu_k(theta)` with the constant term at index 0.
    pub jets: Vec<Jet<f64>>,
    /// `nu1(theta1) - nu1(theta0)`, formed before rounding to `f64`.
    pub nu1_change: f64,
    pub stats: Stats,
}

impl JetTrajectory {
    pub fn last(&self) -> &Jet<f64> {
        self.jets.last().expect("trajectory has samples")
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let order = self.last().order();
        let header: Vec<String> =
            std::iter::once("theta".to_string()).chain((1..=order).map(|k| format!("nu{k}"))).collect();
        writeln!(out, "{}", header.join(","))?;
        for (th, jet) in self.thetas.iter().zip(&self.jets) {
            let row: Vec<String> =
                std::iter::once(*th).chain(jet.coeffs()[1..].iter().copied()).map(|v| format!("{v:.17e}")).collect();
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }
}

fn nu1_from_q0<T: Real>(rhs: &PolarRhs, q0: T) -> T {
    let (p, q) = rhs.full_weights();
    let pq = (p * q) as f64;
    let expo = T::from_f64(-(rhs.chart_power() as f64)) / T::from_f64(2.0 * pq);
    (q0 / pq).powf(expo)
}

/// `zeta'` for the scalar factored form.
fn zeta_slope<T: Real>(c: &Coefficients<T>, nu1: T, u: T, theta: T) -> Result<T> {
    let r = nu1 * u;
    let mut s = T::zero();
    let mut den = T::zero();
    for j in (0..c.n.len()).rev() {
        s = s * r + (c.n[j] * c.q0 - c.n0 * c.q[j]);
        den = den * r + c.q[j];
    }
    den += c.q0;
    if den.abs().to_f64() < BREAKDOWN {
        return Err(Error::ChartBreakdown { theta: theta.to_f64(), r: r.to_f64(), denominator: den.to_f64() });
    }
    Ok(u * s / (den * c.q0))
}

fn check_span(theta0: f64, theta1: f64) -> Result<()> {
    if !((theta1 - theta0).abs() < 4.0 * PI) {
        return Err(Error::Precondition(format!(
            "angular span |{theta1} - {theta0}| must be below 4 pi"
        )));
    }
    Ok(())
}

fn check_radius(rhs: &PolarRhs, r0: f64) -> Result<()> {
    if r0.abs() > rhs.valid_radius() {
        return Err(Error::ChartBreakdown { theta: 0.0, r: r0, denominator: f64::NAN });
    }
    Ok(())
}

/// Scalar radius transport from `(theta0, r0)` to `theta1`.
///
/// Returns `(u0, zeta(theta1), nu1(theta1))` with `r(theta1) = nu1 * (u0 + zeta)`.
fn transport<T: HasTableau>(
    rhs: &PolarRhs,
    theta0: T,
    theta1: T,
    r0: T,
    settings: Settings,
) -> Result<(T, T, T, Stats)> {
    let c0 = rhs.coefficients(theta0);
    let u0 = r0 / nu1_from_q0(rhs, c0.q0);
    let mut rk = Rkf78::<T>::new(settings);
    let mut y = [T::zero()];
    rk.integrate(
        |th, y, dy| {
            let c = rhs.coefficients(th);
            let nu1 = nu1_from_q0(rhs, c.q0);
            dy[0] = zeta_slope(&c, nu1, u0 + y[0], th)?;
            Ok(())
        },
        theta0,
        theta1,
        &mut y,
    )?;
    let nu1 = nu1_from_q0(rhs, rhs.coefficients(theta1).q0);
    Ok((u0, y[0], nu1, rk.stats))
}

fn scalar_settings(tol: f64, h: f64) -> Settings {
    Settings { rtol: tol, atol: tol * 1e-4 * h.abs().max(f64::MIN_POSITIVE), ..Settings::default() }
}

/// `r~(theta1, r0)` for a start at angle `theta0`.
pub fn radius_between<T: HasTableau>(rhs: &PolarRhs, theta0: T, theta1: T, r0: T, tol: f64) -> Result<T> {
    check_span(theta0.to_f64(), theta1.to_f64())?;
    check_radius(rhs, r0.to_f64())?;
    if r0 == T::zero() {
        return Ok(T::zero());
    }
    let (u0, zeta, nu1, _) = transport(rhs, theta0, theta1, r0, scalar_settings(tol, r0.to_f64()))?;
    Ok(nu1 * (u0 + zeta))
}

/// `r~(theta, h)`: the solution through `r = h` at `theta = 0`.
pub fn radius_at<T: HasTableau>(rhs: &PolarRhs, theta: T, h: T, tol: f64) -> Result<T> {
    radius_between(rhs, T::zero(), theta, h, tol)
}

/// `Delta(h) = r~(2 pi, h) - h` in working precision.
pub fn displacement_in<T: HasTableau>(rhs: &PolarRhs, h: T, tol: f64) -> Result<T> {
    check_radius(rhs, h.to_f64())?;
    if h == T::zero() {
        return Ok(T::zero());
    }
    let two_pi = T::pi() * 2.0;
    let (u0, zeta, nu1, _) = transport(rhs, T::zero(), two_pi, h, scalar_settings(tol, h.to_f64()))?;
    Ok(zeta + (nu1 - 1.0) * (u0 + zeta))
}

pub fn displacement(rhs: &PolarRhs, h: f64, tol: f64, precision: Precision) -> Result<f64> {
    match precision {
        Precision::Double => displacement_in::<f64>(rhs, h, tol),
        Precision::Extended => displacement_in::<DoubleDouble>(rhs, DoubleDouble::from(h), tol).map(|v| v.to_f64()),
    }
}

/// Return map `r~(2 pi, h)`.
pub fn return_map(rhs: &PolarRhs, h: f64, tol: f64) -> Result<f64> {
    Ok(h + displacement(rhs, h, tol, Precision::Double)?)
}

/// Direct scalar integration of `dr/dtheta` without factoring.
pub fn radius_direct(rhs: &PolarRhs, theta0: f64, theta1: f64, r0: f64, tol: f64) -> Result<f64> {
    check_span(theta0, theta1)?;
    let mut rk = Rkf78::<f64>::new(Settings::with_tol(tol));
    let mut y = [r0];
    rk.integrate(
        |th, y, dy| {
            dy[0] = rhs.rhs(th, y[0])?;
            Ok(())
        },
        theta0,
        theta1,
        &mut y,
    )?;
    Ok(y[0])
}

fn jet_slope<T: Real>(rhs: &PolarRhs, theta: T, u: &Jet<T>, form: JetForm) -> Result<Jet<T>> {
    let c = rhs.coefficients(theta);
    let order = u.order();
    let r = match form {
        JetForm::Factored => u.scale(nu1_from_q0(rhs, c.q0)),
        JetForm::Direct => u.clone(),
    };
    let mut s = Jet::zero(order);
    let mut den = Jet::zero(order);
    for j in (0..c.n.len()).rev() {
        s = s.mul_jet(&r);
        den = den.mul_jet(&r);
        let (sj, dj) = match form {
            JetForm::Factored => (c.n[j] * c.q0 - c.n0 * c.q[j], c.q[j]),
            JetForm::Direct => (c.n[j] + if j == 0 { c.n0 } else { T::zero() }, c.q[j]),
        };
        s.coeffs_mut()[0] += sj;
        den.coeffs_mut()[0] += dj;
    }
    den.coeffs_mut()[0] += c.q0;
    if den.coeff(0).abs().to_f64() < BREAKDOWN {
        return Err(Error::ChartBreakdown { theta: theta.to_f64(), r: 0.0, denominator: den.coeff(0).to_f64() });
    }
    let ratio = match form {
        JetForm::Factored => s.div_jet(&den.scale(c.q0))?,
        JetForm::Direct => s.div_jet(&den)?,
    };
    Ok(u.mul_jet(&ratio))
}

fn integrate_jet_in<T: HasTableau>(
    rhs: &PolarRhs,
    theta0: f64,
    theta1: f64,
    init: &Jet<f64>,
    options: &JetOptions,
) -> Result<JetTrajectory> {
    check_span(theta0, theta1)?;
    let order = init.order();
    let samples = options.samples.max(2);
    let th = |i: usize| {
        if i == 0 {
            T::from_f64(theta0)
        } else if i == samples - 1 && theta1 == TAU {
            T::pi() * 2.0
        } else {
            T::from_f64(theta0) + T::from_f64(theta1 - theta0) * T::from_f64(i as f64) / T::from_f64((samples - 1) as f64)
        }
    };
    let nu1_at = |t: T| match options.form {
        JetForm::Factored => nu1_from_q0(rhs, rhs.coefficients(t).q0),
        JetForm::Direct => T::one(),
    };
    let init_t: Vec<T> = init.coeffs().iter().map(|&c| T::from_f64(c)).collect();
    let mut u: Vec<T> = {
        let n = nu1_at(th(0));
        init_t.iter().map(|&c| c / n).collect()
    };
    let settings = Settings::with_tol(options.tol);
    let mut rk = Rkf78::<T>::new(settings);
    let form = options.form;
    let mut f = |theta: T, y: &[T], dy: &mut [T]| {
        let jet = Jet::from_coeffs(y.to_vec());
        let slope = jet_slope(rhs, theta, &jet, form)?;
        dy.copy_from_slice(slope.coeffs());
        Ok(())
    };
    let emit = |t: T, u: &[T]| {
        let n = nu1_at(t);
        Jet::from_coeffs(u.iter().map(|&c| (c * n).to_f64()).collect())
    };
    let mut thetas = vec![theta0];
    let mut jets = vec![emit(th(0), &u)];
    for i in 1..samples {
        rk.integrate_observed(&mut f, th(i - 1), th(i), &mut u, |_, _| {})?;
        thetas.push(th(i).to_f64());
        jets.push(emit(th(i), &u));
    }
    debug_assert_eq!(jets[0].order(), order);
    let nu1_change = match init_t.get(1) {
        Some(&start) => (u[1] * nu1_at(th(samples - 1)) - start).to_f64(),
        None => 0.0,
    };
    Ok(JetTrajectory { thetas, jets, nu1_change, stats: rk.stats })
}

/// Transports the jet `init(h)` of the radius at `theta0` to `theta1`.
pub fn integrate_jet(
    rhs: &PolarRhs,
    theta0: f64,
    theta1: f64,
    init: &Jet<f64>,
    options: &JetOptions,
) -> Result<JetTrajectory> {
    if !init.is_finite() {
        return Err(Error::Precondition("initial jet has non-finite coefficients".into()));
    }
    match options.precision {
        Precision::Double => integrate_jet_in::<f64>(rhs, theta0, theta1, init, options),
        Precision::Extended => integrate_jet_in::<DoubleDouble>(rhs, theta0, theta1, init, options),
    }
}

/// `nu_k(2 pi)` for the standard initial jet `r(0) = h`, index 0 being the constant term.
pub fn period_jet(rhs: &PolarRhs, order: usize, tol: f64, precision: Precision) -> Result<Jet<f64>> {
    let options = JetOptions { tol, precision, ..JetOptions::default() };
    Ok(integrate_jet(rhs, 0.0, TAU, &Jet::identity(order), &options)?.last().clone())
}

/// Which functional identity a residual belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Identity {
    /// `r(theta + 2pi, h) = r(theta, r(2pi, h))`.
    Composition,
    /// `-r(theta + pi, h) = r(theta, -r(pi, h))`, both weights odd.
    HalfTurn,
    /// `r(theta, -h) = -r(theta, h)`, both weights even (unreduced chart).
    OddInH,
    /// `-r(pi - theta, h) = r(theta, -r(pi, h))`.
    ReflectPi,
    /// `-r(2pi - theta, h) = r(theta, -r(2pi, h))`.
    ReflectTwoPi,
}

#[derive(Debug, Clone, Serialize)]
pub struct IdentityResidual {
    pub identity: Identity,
    pub theta: f64,
    pub residual: f64,
    /// Whether the identity is predicted for this weight class.
    pub expected: bool,
}

/// Residuals of the functional identities applicable to the chart weights.
///
/// For mixed parity both reflection variants are reported, with `expected`
/// marking the one whose symmetry `(r, theta)` map is valid for the weights.
pub fn identity_residuals(rhs: &PolarRhs, h: f64, thetas: &[f64], tol: f64) -> Result<Vec<IdentityResidual>> {
    let (p, q) = rhs.chart_weights();
    let r = |theta: f64, h0: f64| radius_at::<f64>(rhs, theta, h0, tol);
    let r_pi = r(PI, h)?;
    let r_2pi = r(TAU, h)?;
    let mut out = Vec::new();
    let mut push = |identity, theta, residual, expected| out.push(IdentityResidual { identity, theta, residual, expected });
    for &th in thetas {
        push(Identity::Composition, th, (r(th + TAU, h)? - r(th, r_2pi)?).abs(), true);
        match (p % 2, q % 2) {
            (1, 1) => push(Identity::HalfTurn, th, (-r(th + PI, h)? - r(th, -r_pi)?).abs(), true),
            (0, 0) => push(Identity::OddInH, th, (r(th, -h)? + r(th, h)?).abs(), true),
            (odd_p, _) => {
                push(Identity::ReflectPi, th, (-r(PI - th, h)? - r(th, -r_pi)?).abs(), odd_p == 1);
                push(Identity::ReflectTwoPi, th, (-r(TAU - th, h)? - r(th, -r_2pi)?).abs(), odd_p == 0);
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SectionCrossing {
    pub x: f64,
    pub y: f64,
    pub time: f64,
    /// Sign of dy/dt at the crossing.
    pub direction: i8,
    pub steps: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SectionOptions {
    pub tol: f64,
    pub max_steps: usize,
    pub precision: Precision,
}

impl Default for SectionOptions {
    fn default() -> Self {
        SectionOptions { tol: DEFAULT_TOL, max_steps: 1_000_000, precision: Precision::Double }
    }
}

fn section_in<T: HasTableau>(
    field: &PolynomialField,
    x0: f64,
    options: &SectionOptions,
    trace: Option<&mut Vec<[f64; 3]>>,
) -> Result<SectionCrossing> {
    if !(x0 > 0.0) {
        return Err(Error::Precondition(format!("section start must satisfy x0 > 0, got {x0}")));
    }
    let (_, vy) = field.eval(x0, 0.0);
    if vy == 0.0 {
        return Err(Error::Precondition(format!("flow is tangent to the section at x0={x0}")));
    }
    let dir = vy.signum();
    let settings = Settings {
        rtol: options.tol,
        atol: options.tol * 1e-2 * x0,
        max_steps: options.max_steps,
        initial_step: 1e-3,
        max_step: f64::INFINITY,
    };
    let mut rk = Rkf78::<T>::new(settings);
    let mut y = [T::from_f64(x0), T::zero()];
    let mut f = |_: T, s: &[T], ds: &mut [T]| {
        let (a, b) = field.eval(s[0], s[1]);
        ds[0] = a;
        ds[1] = b;
        Ok(())
    };
    let mut sink = trace;
    if let Some(t) = sink.as_deref_mut() {
        t.push([0.0, x0, 0.0]);
    }
    let crossed = |a: &[T], b: &[T]| {
        let (ya, yb) = (a[1].to_f64() * dir, b[1].to_f64() * dir);
        ya < 0.0 && yb >= 0.0 && b[0].to_f64() > 0.0
    };
    let root_tol = options.tol * 1e-3 * x0;
    let time = rk.integrate_to_event(&mut f, T::zero(), &mut y, crossed, |s| s[1], root_tol, |t, s| {
        if let Some(tr) = sink.as_deref_mut() {
            tr.push([t.to_f64(), s[0].to_f64(), s[1].to_f64()]);
        }
    })?;
    Ok(SectionCrossing {
        x: y[0].to_f64(),
        y: y[1].to_f64(),
        time: time.to_f64(),
        direction: dir as i8,
        steps: rk.stats.steps,
    })
}

/// Next same-direction crossing of the positive x-axis starting from `(x0, 0)`.
pub fn section_return(field: &PolynomialField, x0: f64, options: &SectionOptions) -> Result<SectionCrossing> {
    match options.precision {
        Precision::Double => section_in::<f64>(field, x0, options, None),
        Precision::Extended => section_in::<DoubleDouble>(field, x0, options, None),
    }
}

/// As [`section_return`], also recording `(t, x, y)` at every accepted step.
pub fn section_trace(
    field: &PolynomialField,
    x0: f64,
    options: &SectionOptions,
) -> Result<(SectionCrossing, Vec<[f64; 3]>)> {
    let mut trace = Vec::new();
    let crossing = match options.precision {
        Precision::Double => section_in::<f64>(field, x0, options, Some(&mut trace))?,
        Precision::Extended => section_in::<DoubleDouble>(field, x0, options, Some(&mut trace))?,
    };
    Ok((crossing, trace))
}

pub fn write_trace_csv<W: Write>(trace: &[[f64; 3]], mut out: W) -> Result<()> {
    writeln!(out, "t,x,y")?;
    for [t, x, y] in trace {
        writeln!(out, "{t:.17e},{x:.17e},{y:.17e}")?;
    }
    Ok(())
}

/// Largest relative change of `x^{2q} + y^{2p}` along one revolution of the
/// leading part `(-p y^{2p-1}, q x^{2q-1})` started at `(h^p, 0)`.
pub fn core_energy_drift(p: u32, q: u32, h: f64, options: &SectionOptions) -> Result<f64> {
    if p == 0 || q == 0 || !(h > 0.0) {
        return Err(Error::Precondition(format!("need p, q >= 1 and h > 0, got ({p}, {q}, {h})")));
    }
    let core = PolynomialField::new().x(0, 2 * p - 1, -(p as f64)).y(2 * q - 1, 0, q as f64);
    let (_, trace) = section_trace(&core, h.powi(p as i32), options)?;
    let e0 = h.powi((2 * p * q) as i32);
    Ok(trace
        .iter()
        .map(|&[_, x, y]| ((x.powi(2 * q as i32) + y.powi(2 * p as i32)) - e0).abs() / e0)
        .fold(0.0, f64::max))
}

/// Remainders `|r~(2 pi, h) - sum_k nu_k(2 pi) h^k|` and their log-log slope in `h`.
#[derive(Debug, Clone, Serialize)]
pub struct RemainderFit {
    pub order: usize,
    pub hs: Vec<f64>,
    pub remainders: Vec<f64>,
    pub slope: f64,
}

/// Compares the degree-`order` period jet against scalar returns at each `h`.
pub fn remainder_fit(rhs: &PolarRhs, order: usize, hs: &[f64], tol: f64, precision: Precision) -> Result<RemainderFit> {
    if hs.len() < 2 || hs.iter().any(|&h| !(h > 0.0)) {
        return Err(Error::Precondition("need at least two positive amplitudes".into()));
    }
    let options = JetOptions { tol, precision, ..JetOptions::default() };
    let traj = integrate_jet(rhs, 0.0, TAU, &Jet::identity(order), &options)?;
    let jet = traj.last();
    let remainders = hs
        .iter()
        .map(|&h| {
            let series = (2..=order).rev().fold(0.0, |acc, k| (acc + jet.coeff(k)) * h) * h + traj.nu1_change * h;
            Ok((displacement(rhs, h, tol, precision)? - series).abs())
        })
        .collect::<Result<Vec<f64>>>()?;
    let (lx, ly): (Vec<f64>, Vec<f64>) = hs.iter().zip(&remainders).map(|(h, r)| (h.ln(), r.ln())).unzip();
    let n = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    Ok(RemainderFit { order, hs: hs.to_vec(), remainders, slope: sxy / sxx })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::WeightedField;

    fn f31(a22: f64, a50: f64, b13: f64, b41: f64) -> WeightedField {
        WeightedField::new(2, 3).x(2, 2, a22).x(5, 0, a50).y(1, 3, b13).y(4, 1, b41)
    }

    #[test]
    fn core_field_is_a_center() {
        let rhs = PolarRhs::new(&WeightedField::new(2, 3)).unwrap();
        for h in [0.01, 0.1, 0.3] {
            assert!((return_map(&rhs, h, 1e-12).unwrap() - h).abs() < 1e-11);
        }
        let jet = period_jet(&rhs, 7, 1e-12, Precision::Double).unwrap();
        assert!((jet.coeff(1) - 1.0).abs() < 1e-14);
        assert!(jet.coeffs()[2..].iter().all(|c| c.abs() < 1e-12));
    }

    #[test]
    fn hamiltonian_center_has_tiny_displacement() {
        let rhs = PolarRhs::new(&f31(-1.5 * 2.0, -0.2, 2.0, 1.0)).unwrap();
        for h in [0.05, 0.15, 0.3] {
            assert!(displacement(&rhs, h, 1e-12, Precision::Double).unwrap().abs() < 1e-9);
        }
    }

    #[test]
    fn direct_and_factored_jets_agree() {
        let rhs = PolarRhs::new(&f31(0.3, 1.0, -0.5, 1.0)).unwrap();
        let base = JetOptions { tol: 1e-13, ..Default::default() };
        let a = integrate_jet(&rhs, 0.0, TAU, &Jet::identity(5), &base).unwrap();
        let b = integrate_jet(&rhs, 0.0, TAU, &Jet::identity(5), &JetOptions { form: JetForm::Direct, ..base })
            .unwrap();
        for k in 1..=5 {
            let (x, y) = (a.last().coeff(k), b.last().coeff(k));
            assert!((x - y).abs() < 1e-9 * (1.0 + x.abs()), "k={k}: {x} vs {y}");
        }
    }

    #[test]
    fn scalar_matches_jet_series() {
        let rhs = PolarRhs::new(&f31(0.0, 1.0, 0.0, 1.0)).unwrap();
        let jet = period_jet(&rhs, 7, 1e-13, Precision::Double).unwrap();
        let h = 0.05;
        let delta = displacement(&rhs, h, 1e-13, Precision::Double).unwrap();
        let series = jet.eval(h) - h;
        assert!((delta - series).abs() < 1e-3 * delta.abs());
        assert!(delta > 0.0);
    }

    #[test]
    fn composition_identity() {
        let rhs = PolarRhs::new(&f31(0.4, -0.3, 0.8, 0.6)).unwrap();
        let res = identity_residuals(&rhs, 0.05, &[1.0, -1.0], 1e-12).unwrap();
        for r in res.iter().filter(|r| r.expected) {
            assert!(r.residual < 1e-9, "{r:?}");
        }
    }

    #[test]
    fn linear_center_rotation() {
        let field = PolynomialField::new().x(0, 1, -1.0).y(1, 0, 1.0);
        let c = section_return(&field, 0.2, &SectionOptions::default()).unwrap();
        assert!((c.x - 0.2).abs() < 1e-11);
        assert!((c.time - TAU).abs() < 1e-10);
        assert_eq!(c.direction, 1);
    }

    #[test]
    fn linear_focus_contracts() {
        let eps = -0.01;
        let field = PolynomialField::new().x(0, 1, -1.0).x(1, 0, eps).y(1, 0, 1.0).y(0, 1, eps);
        let c = section_return(&field, 0.1, &SectionOptions::default()).unwrap();
        let expect = 0.1 * (TAU * eps).exp();
        assert!((c.x - expect).abs() < 1e-12);
    }

    #[test]
    fn radial_escape_is_no_return() {
        let field = PolynomialField::new().x(1, 0, 1.0).y(0, 0, 1.0);
        let opts = SectionOptions { max_steps: 2000, ..Default::default() };
        let err = section_return(&field, 0.5, &opts).unwrap_err();
        assert!(matches!(err, Error::NoReturn { .. }), "{err}");
    }

    #[test]
    fn span_limit() {
        let rhs = PolarRhs::new(&WeightedField::new(1, 1)).unwrap();
        let err = radius_at::<f64>(&rhs, 13.0, 0.1, 1e-12).unwrap_err();
        assert!(matches!(err, Error::Precondition(_)));
    }
}
