//! Small-amplitude limit cycles from sign changes of the displacement.

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::{PolynomialField, WeightedField};
use crate::flow::{self, section_return, SectionOptions, DEFAULT_TOL};
use crate::focal::{focal_values_rhs, Family, FocalOptions, FocalReport};
use crate::polar::{ChartOptions, PolarRhs};
use crate::real::Precision;

pub const DEFAULT_GRID_RATIO: f64 = 1.15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    Polar,
    Cartesian,
}

/// A system prepared for displacement evaluation.
#[derive(Debug, Clone)]
pub enum System {
    /// Polar chart radius `h`, with the Cartesian field and the section coordinate
    /// `x = scale_x * h^p` kept for re-integration.
    Polar { rhs: PolarRhs, cartesian: PolynomialField, scale_x: f64 },
    /// Start `(h, 0)` on the positive x-axis.
    Cartesian(PolynomialField),
}

impl System {
    pub fn polar(field: &WeightedField, chart: ChartOptions) -> Result<Self> {
        let rhs = PolarRhs::with_options(field, chart)?;
        let scale_x = field.normalize()?.scale_x;
        Ok(System::Polar { rhs, cartesian: field.to_polynomial(), scale_x })
    }

    pub fn backend(&self) -> Backend {
        match self {
            System::Polar { .. } => Backend::Polar,
            System::Cartesian(_) => Backend::Cartesian,
        }
    }

    pub fn cartesian(&self) -> &PolynomialField {
        match self {
            System::Polar { cartesian, .. } => cartesian,
            System::Cartesian(f) => f,
        }
    }

    /// Positive x-axis coordinate of the point with amplitude `h`.
    pub fn section_x(&self, h: f64) -> f64 {
        match self {
            System::Polar { rhs, scale_x, .. } => scale_x * h.powi(rhs.chart_weights().0 as i32),
            System::Cartesian(_) => h,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DisplacementOptions {
    pub tol: f64,
    pub precision: Precision,
    pub max_steps: usize,
}

impl Default for DisplacementOptions {
    fn default() -> Self {
        DisplacementOptions { tol: DEFAULT_TOL, precision: Precision::Double, max_steps: 1_000_000 }
    }
}

/// `Delta(h)`: return minus start, in the chart radius (polar) or on the x-axis (Cartesian).
pub fn displacement(system: &System, h: f64, options: &DisplacementOptions) -> Result<f64> {
    match system {
        System::Polar { rhs, .. } => flow::displacement(rhs, h, options.tol, options.precision),
        System::Cartesian(field) => {
            let so = SectionOptions { tol: options.tol, max_steps: options.max_steps, precision: options.precision };
            Ok(section_return(field, h, &so)?.x - h)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Stability {
    Stable,
    Unstable,
}

#[derive(Debug, Clone, Serialize)]
pub struct Cycle {
    pub h_star: f64,
    pub bracket: (f64, f64),
    pub residual: f64,
    pub stability: Stability,
    /// Section coordinate of the cycle on the positive x-axis.
    pub section_x: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ScanGrid {
    pub h_min: f64,
    pub h_max: f64,
    pub points: usize,
    pub ratio: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CycleSet {
    pub backend: Backend,
    pub cycles: Vec<Cycle>,
    pub scan_grid: ScanGrid,
    /// `(h, Delta(h))` along the grid; failed evaluations are omitted.
    pub samples: Vec<(f64, f64)>,
    pub tol: f64,
    pub null_tol: f64,
    pub precision: Precision,
    pub warnings: Vec<String>,
}

impl CycleSet {
    pub fn count(&self) -> usize {
        self.cycles.len()
    }

    pub fn write_scan_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "h,delta")?;
        for (h, d) in &self.samples {
            writeln!(out, "{h:.17e},{d:.17e}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanOptions {
    pub h_min: f64,
    pub h_max: f64,
    pub grid: usize,
    /// Relative bracket width at which bisection stops.
    pub tol: f64,
    /// Displacements with `|Delta(h)| <= null_tol * h` carry no sign; `None` picks a
    /// level matching the working precision.
    pub null_tol: Option<f64>,
    pub displacement: DisplacementOptions,
}

impl Default for ScanOptions {
    fn default() -> Self {
        ScanOptions {
            h_min: 1e-3,
            h_max: 0.3,
            grid: 48,
            tol: 1e-13,
            null_tol: None,
            displacement: DisplacementOptions::default(),
        }
    }
}

fn default_null_tol(precision: Precision) -> f64 {
    match precision {
        Precision::Double => 1e-14,
        Precision::Extended => 1e-26,
    }
}

/// Geometric grid of `n` points from `h_min` to `h_max`.
pub fn geometric_grid(h_min: f64, h_max: f64, n: usize) -> Vec<f64> {
    let ratio = (h_max / h_min).powf(1.0 / (n - 1) as f64);
    (0..n).map(|i| if i == n - 1 { h_max } else { h_min * ratio.powi(i as i32) }).collect()
}

/// Scans `Delta` on a geometric grid, brackets sign changes and bisects each one.
pub fn find_cycles(system: &System, options: &ScanOptions) -> Result<CycleSet> {
    if !(options.h_min > 0.0 && options.h_max > options.h_min) {
        return Err(Error::Precondition(format!("need 0 < h_min < h_max, got [{}, {}]", options.h_min, options.h_max)));
    }
    if options.grid < 16 {
        return Err(Error::Precondition(format!("grid needs at least 16 points, got {}", options.grid)));
    }
    let dopts = options.displacement;
    let null_tol = options.null_tol.unwrap_or_else(|| default_null_tol(dopts.precision));
    let grid = geometric_grid(options.h_min, options.h_max, options.grid);
    let values: Vec<Result<f64>> = grid.par_iter().map(|&h| displacement(system, h, &dopts)).collect();
    let mut warnings = Vec::new();
    let mut samples = Vec::new();
    let mut signed: Vec<(f64, f64, i8)> = Vec::new();
    for (&h, v) in grid.iter().zip(values) {
        match v {
            Ok(d) => {
                samples.push((h, d));
                if d.abs() > null_tol * h {
                    signed.push((h, d, d.signum() as i8));
                }
            }
            Err(e) => warnings.push(format!("h={h:.6e}: {e}")),
        }
    }
    let brackets: Vec<(f64, f64, i8)> = signed
        .windows(2)
        .filter(|w| w[0].2 != w[1].2)
        .map(|w| (w[0].0, w[1].0, w[0].2))
        .collect();
    let cycles = brackets
        .par_iter()
        .map(|&(lo, hi, sign_lo)| refine(system, lo, hi, sign_lo, options.tol, null_tol, &dopts))
        .collect::<Result<Vec<_>>>()?;
    let ratio = (options.h_max / options.h_min).powf(1.0 / (options.grid - 1) as f64);
    for pair in cycles.windows(2) {
        if pair[1].h_star / pair[0].h_star < ratio {
            warnings.push(format!(
                "unresolved pair: cycles at h={:.6e} and h={:.6e} lie within one grid step",
                pair[0].h_star, pair[1].h_star
            ));
        }
    }
    Ok(CycleSet {
        backend: system.backend(),
        cycles,
        scan_grid: ScanGrid { h_min: options.h_min, h_max: options.h_max, points: options.grid, ratio },
        samples,
        tol: options.tol,
        null_tol,
        precision: dopts.precision,
        warnings,
    })
}

fn refine(
    system: &System,
    mut lo: f64,
    mut hi: f64,
    sign_lo: i8,
    tol: f64,
    null_tol: f64,
    dopts: &DisplacementOptions,
) -> Result<Cycle> {
    let bracket = (lo, hi);
    let mut mid = 0.5 * (lo + hi);
    let mut residual = f64::INFINITY;
    for _ in 0..200 {
        mid = 0.5 * (lo + hi);
        let d = displacement(system, mid, dopts)?;
        residual = d.abs();
        if d.abs() <= null_tol * mid {
            break;
        }
        if (d.signum() as i8) == sign_lo {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= tol * hi {
            mid = 0.5 * (lo + hi);
            residual = displacement(system, mid, dopts)?.abs();
            break;
        }
    }
    let stability = if sign_lo > 0 { Stability::Stable } else { Stability::Unstable };
    Ok(Cycle { h_star: mid, bracket, residual, stability, section_x: system.section_x(mid) })
}

/// Section return minus start for the Cartesian orbit through the cycle's section point.
pub fn cycle_closure(system: &System, cycle: &Cycle, options: &SectionOptions) -> Result<f64> {
    Ok(section_return(system.cartesian(), cycle.section_x, options)?.x - cycle.section_x)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlternationOptions {
    /// Amplitude at which the outermost cycle should appear.
    pub h_scale: f64,
    /// Factor between successive magnitude ratios.
    pub gap: f64,
    pub passes: usize,
    pub focal: FocalOptions,
}

impl Default for AlternationOptions {
    fn default() -> Self {
        AlternationOptions { h_scale: 0.3, gap: 10.0, passes: 4, focal: FocalOptions::default() }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct AlternationResult {
    pub parameters: Vec<String>,
    pub point: Vec<f64>,
    pub chain: Vec<usize>,
    pub values: Vec<f64>,
    pub signs_ok: bool,
    /// `|c_i / c_{i+1}|` along the chain.
    pub ratios: Vec<f64>,
    pub gaps_ok: bool,
    pub evaluations: usize,
}

/// Tunes family parameters so the chain of `Delta` coefficients `chain` alternates
/// with the prescribed signs and geometrically separated magnitudes.
///
/// Parameter `i` tunes `chain[i]`; the top coefficient is left to the family. The
/// ratio `|c_i / c_{i+1}|` is driven to `h_scale^(k_{i+1} - k_i) / gap^(m - 2 - i)`,
/// which places the outermost root of the truncated displacement near `h_scale`.
/// Relative accuracy to which each magnitude ratio is tuned.
const RATIO_TOL: f64 = 1e-4;

pub fn alternation_search(
    family: &dyn Family,
    chain: &[usize],
    signs: &[i8],
    bounds: &[(f64, f64)],
    start: &[f64],
    options: &AlternationOptions,
) -> Result<AlternationResult> {
    let m = chain.len();
    if m < 2 || signs.len() != m || bounds.len() != m - 1 || start.len() != family.dim() || family.dim() < m - 1 {
        return Err(Error::Precondition(format!(
            "chain of {m} needs {m} signs, {} bounds and at least {} parameters",
            m.saturating_sub(1),
            m.saturating_sub(1)
        )));
    }
    let order = chain.iter().copied().max().unwrap().max(3);
    let fo = FocalOptions { order: Some(order), ..options.focal };
    let mut evaluations = 0usize;
    let mut eval = |params: &[f64]| -> Result<FocalReport> {
        evaluations += 1;
        focal_values_rhs(&family.rhs(params)?, &fo)
    };
    let target_ratio = |i: usize| {
        options.h_scale.powi((chain[i + 1] - chain[i]) as i32) / options.gap.powi((m - 2 - i) as i32)
    };
    let mut point = start.to_vec();
    let top = eval(&point)?.value(chain[m - 1]);
    if top == 0.0 || (top.signum() as i8) != signs[m - 1] {
        return Err(Error::NoAlternation(format!(
            "top coefficient of index {} is {top:.3e}, sign {} required",
            chain[m - 1],
            signs[m - 1]
        )));
    }
    for _ in 0..options.passes {
        for i in (0..m - 1).rev() {
            let ratio = target_ratio(i);
            let mut f = |x: f64, point: &mut Vec<f64>| -> Result<(f64, f64)> {
                point[i] = x;
                let r = eval(point)?;
                let target = ratio * r.value(chain[i + 1]).abs();
                Ok((r.value(chain[i]) - signs[i] as f64 * target, target))
            };
            let (mut a, mut b) = bounds[i];
            let (mut fa, mut fb) = (f(a, &mut point)?.0, f(b, &mut point)?.0);
            if fa.signum() == fb.signum() {
                return Err(Error::NoAlternation(format!(
                    "parameter {} has no bracket in [{a:.3e}, {b:.3e}] (residuals {fa:.3e}, {fb:.3e})",
                    family.names()[i]
                )));
            }
            // Illinois iteration on the residual.
            let mut side = 0i8;
            let mut x = a;
            for _ in 0..100 {
                x = (a * fb - b * fa) / (fb - fa);
                let (fx, target) = f(x, &mut point)?;
                if fx.abs() <= RATIO_TOL * target || (b - a).abs() <= 1e-14 * a.abs().max(b.abs()) {
                    break;
                }
                if fx.signum() == fb.signum() {
                    b = x;
                    fb = fx;
                    if side == -1 {
                        fa *= 0.5;
                    }
                    side = -1;
                } else {
                    a = x;
                    fa = fx;
                    if side == 1 {
                        fb *= 0.5;
                    }
                    side = 1;
                }
            }
            point[i] = x;
        }
    }
    let report = eval(&point)?;
    let values: Vec<f64> = chain.iter().map(|&k| report.value(k)).collect();
    let signs_ok = values.iter().zip(signs).all(|(v, &s)| *v != 0.0 && (v.signum() as i8) == s);
    let ratios: Vec<f64> = values.windows(2).map(|w| (w[0] / w[1]).abs()).collect();
    let gaps_ok = ratios.iter().all(|&r| r <= 0.1);
    let result = AlternationResult {
        parameters: family.names(),
        point,
        chain: chain.to_vec(),
        values,
        signs_ok,
        ratios,
        gaps_ok,
        evaluations,
    };
    if !signs_ok {
        return Err(Error::NoAlternation(format!("signs after tuning: {:?}", result.values)));
    }
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::focal::FnFamily;

    fn linear_focus(eps: f64) -> System {
        System::Cartesian(PolynomialField::new().x(1, 0, eps).x(0, 1, -1.0).y(1, 0, 1.0).y(0, 1, eps))
    }

    #[test]
    fn linear_focus_contracts_by_exp_two_pi_eps() {
        let d = displacement(&linear_focus(-0.01), 0.1, &DisplacementOptions::default()).unwrap();
        let exact = 0.1 * ((std::f64::consts::TAU * -0.01).exp() - 1.0);
        assert!(d < 0.0);
        assert!((d - exact).abs() < 1e-11);
    }

    #[test]
    fn center_has_no_cycles() {
        let system = System::polar(&WeightedField::new(2, 3).x(3, 2, 1.0).y(2, 3, -3.0), ChartOptions::default()).unwrap();
        let set = find_cycles(&system, &ScanOptions { h_max: 0.2, grid: 16, ..ScanOptions::default() }).unwrap();
        assert_eq!(set.count(), 0);
    }

    /// `dx = eps x - y - x r^2`, `dy = x + eps y - y r^2`: one stable cycle at `r = sqrt(eps)`.
    fn hopf(eps: f64) -> WeightedField {
        WeightedField::new(1, 1)
            .x(1, 0, eps)
            .y(0, 1, eps)
            .x(3, 0, -1.0)
            .x(1, 2, -1.0)
            .y(2, 1, -1.0)
            .y(0, 3, -1.0)
    }

    #[test]
    fn hopf_cycle_is_found_in_both_backends() {
        let eps = 0.01;
        let relaxed = ChartOptions { relaxed: true };
        let polar = System::polar(&hopf(eps), relaxed).unwrap();
        let opts = ScanOptions { h_min: 0.01, h_max: 0.5, grid: 24, ..ScanOptions::default() };
        let set = find_cycles(&polar, &opts).unwrap();
        assert_eq!(set.count(), 1, "{set:?}");
        let c = &set.cycles[0];
        assert_eq!(c.stability, Stability::Stable);
        assert!((c.h_star - eps.sqrt()).abs() < 1e-10, "{}", c.h_star);
        let cart = System::Cartesian(hopf(eps).to_polynomial());
        let set = find_cycles(&cart, &opts).unwrap();
        assert_eq!(set.count(), 1);
        assert!((set.cycles[0].h_star - eps.sqrt()).abs() < 1e-9);
        let closure = cycle_closure(&polar, c, &SectionOptions::default()).unwrap();
        assert!(closure.abs() < 1e-10);
    }

    #[test]
    fn time_scaling_family_has_no_alternation() {
        let fam = FnFamily::new(&["s"], |s: &[f64]| {
            Ok(WeightedField::new(2, 3).with_lambdas(2.0 * s[0], 3.0 * s[0]).x(5, 0, s[0]).y(4, 1, s[0]))
        });
        let err = alternation_search(&fam, &[2, 4], &[-1, 1], &[(0.5, 2.0)], &[1.0], &AlternationOptions::default());
        assert!(matches!(err, Err(Error::NoAlternation(_))), "{err:?}");
    }
}
