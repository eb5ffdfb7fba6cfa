//! Acceptance suite: one line per criterion, nonzero exit if any fails.
//!
//! Reference integrals were evaluated independently with mpmath at 40 digits.

use std::f64::consts::{PI, TAU};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use qhfocus::case_study::{self, Coeffs, RescaledFamily, UnfoldingFamily, RELAXED};
use qhfocus::cycles::{
    alternation_search, cycle_closure, find_cycles, AlternationOptions, DisplacementOptions, ScanOptions, System,
};
use qhfocus::flow::{self, JetForm, JetOptions, SectionOptions};
use qhfocus::focal::{self, Family, FocalOptions};
use qhfocus::quadrature::quad_periodic;
use qhfocus::{Jet, PolarRhs, Precision, WeightedField};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const I2: f64 = 6.570_292_885_500_709;
const I4: f64 = 0.983_089_423_372_793_6;
const IA: f64 = 4.672_877_278_001_164;
const IB: f64 = 0.158_336_583_097_978_73;

/// Unfolding point found by the alternation search for the outer chain.
const EPS: (f64, f64) = (7.015_437_540_089_91e-9, 1.615_867_006_656_11e-4);

struct Line {
    pass: bool,
    detail: String,
}

fn line(pass: bool, detail: String) -> Line {
    Line { pass, detail }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn combination() -> qhfocus::Result<Line> {
    let t = Instant::now();
    let v = case_study::verify_322(1e-13)?;
    let elapsed = t.elapsed();
    let oracle = rel(v.a_trapezoid.value, IA).max(rel(v.b_trapezoid.value, IB));
    let pass = v.passed() && v.scheme_agreement <= 1e-10 && oracle < 1e-12 && elapsed < Duration::from_secs(30);
    Ok(line(
        pass,
        format!(
            "value {:.6} under {:?} (target {:.6}, rel {:.1e}); schemes agree to {:.1e}; mpmath oracle {:.1e}; {:.2?}",
            v.combination_value, v.reading_used, v.target, v.relative_error, v.scheme_agreement, oracle, elapsed
        ),
    ))
}

fn first_value() -> qhfocus::Result<Line> {
    let i2 = quad_periodic(|t| case_study::Integrand::G2.eval(t), 0.0, TAU, 1e-14)?.value;
    let s = case_study::prop31_slice(&FocalOptions::default())?;
    let err = rel(s.mean, i2 / 60.0);
    Ok(line(
        s.signs_agree && s.spread < 1e-6 && err < 1e-8 && rel(i2, I2) < 1e-13,
        format!("nu2/V2 = {:.12e}, spread {:.1e}, vs I2/60 rel {:.1e}", s.mean, s.spread, err),
    ))
}

fn second_value() -> qhfocus::Result<Line> {
    let s = case_study::prop32_slice(&FocalOptions::default())?;
    let expected = 13.0 / 16800.0 * I4;
    Ok(line(
        s.signs_agree && s.mean > 0.0 && s.spread < 1e-5,
        format!("nu4/V4 = {:.12e}, spread {:.1e}; 13 I4 / 16800 = {:.12e}", s.mean, s.spread, expected),
    ))
}

fn third_value() -> qhfocus::Result<Line> {
    let s = case_study::prop33_slice(&FocalOptions::default())?;
    Ok(line(
        s.signs_agree && s.spread < 1e-4,
        format!("signs agree {}; nu6/V6 = {:.10e}, spread {:.1e}", s.signs_agree, s.mean, s.spread),
    ))
}

fn centers() -> qhfocus::Result<Line> {
    let (c1, c2) = case_study::center_samples();
    let mut worst = 0.0f64;
    let mut classified = 0;
    for c in &c1 {
        let r = case_study::center_check(c, 1e-13)?;
        worst = worst.max(r.max_displacement);
        classified += usize::from(r.structural.hamiltonian);
    }
    for c in &c2 {
        let r = case_study::center_check(c, 1e-13)?;
        worst = worst.max(r.max_displacement);
        classified += usize::from(!r.structural.mirrors.is_empty());
    }
    let n = c1.len() + c2.len();
    Ok(line(
        worst < 1e-9 && classified == n && n == 10,
        format!("max |Delta| {worst:.1e} over {n} samples x 10 radii; {classified}/{n} structurally certified"),
    ))
}

fn parity() -> qhfocus::Result<Line> {
    let mut pass = true;
    let mut parts = Vec::new();
    for (p, q) in [(1, 1), (1, 2), (2, 3), (3, 4)] {
        let s = focal::parity_survey(p, q, 20, 42, &FocalOptions::default())?;
        let resolved: usize = s.histogram.values().sum();
        pass &= s.all_consistent && s.violations == 0 && resolved > 0;
        parts.push(format!("{p}:{q} {}/{} resolved, {} violations", resolved, s.samples, s.violations));
    }
    Ok(line(pass, parts.join("; ")))
}

fn identities() -> qhfocus::Result<Line> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let weights = [(1, 1), (1, 2), (2, 3), (3, 4), (2, 2)];
    let (mut composition, mut conditional, mut count) = (0.0f64, 0.0f64, 0);
    for &(p, q) in weights.iter().cycle().take(20) {
        let field = focal::random_field(p, q, &mut rng);
        let rhs = PolarRhs::new(&field)?;
        for r in flow::identity_residuals(&rhs, 0.05, &[1.0, -1.0, 2.0, -2.0], 1e-13)? {
            match (r.identity, r.expected) {
                (flow::Identity::Composition, _) => composition = composition.max(r.residual),
                (_, true) => conditional = conditional.max(r.residual),
                (_, false) => {}
            }
        }
        count += 1;
    }
    Ok(line(
        composition < 1e-8 && conditional < 1e-8,
        format!("{count} fields: composition {composition:.1e}, parity-conditional {conditional:.1e}"),
    ))
}

fn outer_cycles() -> qhfocus::Result<Line> {
    let opts = AlternationOptions { h_scale: 0.25, ..Default::default() };
    let found = alternation_search(&UnfoldingFamily, &[2, 4, 6], &[1, -1, 1], &[(-1e-3, 1e-3), (-0.5, 0.5)], &[0.0, 0.0], &opts)?;
    let system = System::polar(&UnfoldingFamily.field(&found.point)?, Default::default())?;
    let set = find_cycles(&system, &ScanOptions { h_min: 0.01, h_max: 0.4, ..Default::default() })?;
    let section = SectionOptions { tol: 1e-13, ..Default::default() };
    let closure = set
        .cycles
        .iter()
        .map(|c| cycle_closure(&system, c, &section))
        .collect::<qhfocus::Result<Vec<_>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    let near_frozen = rel(found.point[0], EPS.0) < 1e-4 && rel(found.point[1], EPS.1) < 1e-4;
    let hs: Vec<String> = set.cycles.iter().map(|c| format!("{:.6}", c.h_star)).collect();
    Ok(line(
        found.signs_ok && set.count() == 2 && closure < 1e-8 && near_frozen,
        format!(
            "eps = ({:.6e}, {:.6e}), chain {:?}; {} cycles at h = [{}]; closure {:.1e}",
            found.point[0],
            found.point[1],
            found.values.iter().map(|v| format!("{v:.2e}")).collect::<Vec<_>>(),
            set.count(),
            hs.join(", "),
            closure
        ),
    ))
}

fn elementary_focus() -> qhfocus::Result<Line> {
    let samples = [(1.0, 0.0), (0.0, 5.0), (0.3, -0.4), (-0.5, 1.0)];
    let r = case_study::verify_thm34(0.1, &samples, 1.0 / 7.0, 5.0 / 21.0, &FocalOptions::default())?;
    let pass = r.max_lower < 1e-10 && r.ratio_spread < 1e-4 && r.sigma_linearity.abs() < 1e-6;
    Ok(line(
        pass,
        format!(
            "lower values {:.1e}; ratio {:.10} (spread {:.1e}, sigma linearity {:.1e}); 47/128 = {:.10}, ratio/(47/128) = {:.7} (pi = {:.7})",
            r.max_lower, r.ratio_mean, r.ratio_spread, r.sigma_linearity, r.paper_ratio, r.ratio_over_paper, PI
        ),
    ))
}

fn inner_cycles() -> qhfocus::Result<Line> {
    let family = RescaledFamily { sigma: 0.1, coeffs: Coeffs::unfolding(EPS.0, EPS.1) };
    let chain = [1, 3, 5, 7];
    let signs = [-1, 1, -1, 1];
    let bounds = [(-1e-9, 1e-9), (-1e-7, 1e-7), (-1e-5, 1e-5)];
    let double = alternation_search(&family, &chain, &signs, &bounds, &[0.0; 3], &AlternationOptions::default())?;
    let focal = FocalOptions { precision: Precision::Extended, tol: 1e-22, ..Default::default() };
    let opts = AlternationOptions { h_scale: 0.1, passes: 2, focal, ..Default::default() };
    let extended = alternation_search(&family, &chain, &signs, &bounds, &[0.0; 3], &opts)?;
    // The lowest value is -2 pi sigma delta0 to leading order; compare the double search against it.
    let linear = |d0: f64| -TAU * 0.1 * d0;
    let system = System::polar(&family.field(&extended.point)?, RELAXED)?;
    let scan = ScanOptions {
        h_min: 0.003,
        h_max: 0.2,
        grid: 32,
        tol: 1e-8,
        displacement: DisplacementOptions { precision: Precision::Extended, tol: 1e-24, ..Default::default() },
        ..Default::default()
    };
    let set = find_cycles(&system, &scan)?;
    let inner: Vec<f64> = set.cycles.iter().map(|c| c.h_star).filter(|&h| h < 0.12).collect();
    Ok(line(
        double.signs_ok && extended.signs_ok && !inner.is_empty(),
        format!(
            "double: chain {:?}, lowest value vs -2 pi sigma delta0 rel {:.1e}; extended: chain {:?}, lowest rel {:.1e}; \
             extended scan: {} sign changes at h = {:?}, {} inside the hierarchy",
            double.values.iter().map(|v| format!("{v:.2e}")).collect::<Vec<_>>(),
            rel(double.values[0], linear(double.point[0])),
            extended.values.iter().map(|v| format!("{v:.2e}")).collect::<Vec<_>>(),
            rel(extended.values[0], linear(extended.point[0])),
            set.count(),
            set.cycles.iter().map(|c| format!("{:.4}", c.h_star)).collect::<Vec<_>>(),
            inner.len()
        ),
    ))
}

fn sample_23(rng: &mut ChaCha8Rng) -> WeightedField {
    focal::random_field(2, 3, rng)
}

fn engine() -> qhfocus::Result<Line> {
    let drift = flow::core_energy_drift(2, 3, 0.1, &SectionOptions { tol: 1e-13, ..Default::default() })?;
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let rhs = PolarRhs::new(&sample_23(&mut rng))?;
    let direct = JetOptions { form: JetForm::Direct, tol: 1e-13, ..Default::default() };
    let mut nu1 = 0.0f64;
    for i in 1..=100 {
        let th = i as f64 * TAU / 100.0;
        let jet = flow::integrate_jet(&rhs, 0.0, th, &Jet::identity(1), &direct)?;
        nu1 = nu1.max((jet.last().coeff(1) - rhs.nu1_closed(th)).abs());
    }
    let order = 5;
    let hs: Vec<f64> = (0..9).map(|i| 1e-3 * 10f64.powf(i as f64 / 4.0)).collect();
    let mut slopes = Vec::new();
    for (p, q) in [(1, 1), (1, 2), (2, 3)] {
        let rhs = PolarRhs::new(&focal::random_field(p, q, &mut rng))?;
        slopes.push(flow::remainder_fit(&rhs, order, &hs, 1e-26, Precision::Extended)?.slope);
    }
    let min_slope = slopes.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(line(
        drift < 1e-10 && nu1 < 1e-10 && min_slope >= order as f64 + 0.5,
        format!(
            "energy drift {drift:.1e}; nu1 vs closed form {nu1:.1e}; remainder slopes {:?} (K = {order})",
            slopes.iter().map(|s| format!("{s:.2}")).collect::<Vec<_>>()
        ),
    ))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> qhfocus::Result<Line>); 11] = [
        ("printed combination constant", combination),
        ("first focal value proportionality", first_value),
        ("second focal value slice", second_value),
        ("third focal value slice", third_value),
        ("center conditions", centers),
        ("parity of the first nonzero index", parity),
        ("functional identities", identities),
        ("two outer cycles", outer_cycles),
        ("elementary focus of the rescaled system", elementary_focus),
        ("inner cycles of the rescaled system", inner_cycles),
        ("engine sanity", engine),
    ];
    let mut failures = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let l = check().unwrap_or_else(|e| line(false, format!("error: {e}")));
        failures += usize::from(!l.pass);
        println!(
            "[{}] {:>2} {name}: {} ({:.1?})",
            if l.pass { "PASS" } else { "FAIL" },
            i + 1,
            l.detail,
            t.elapsed()
        );
    }
    println!("{} of {} criteria passed", criteria.len() - failures, criteria.len());
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
