//! Focal values, weak-focus order and parameter Jacobians.

use std::collections::BTreeMap;
use std::f64::consts::TAU;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::{gcd, Mirror, WeightedField};
use crate::flow::{integrate_jet, JetOptions, DEFAULT_TOL};
use crate::jet::Jet;
use crate::polar::{ChartOptions, PolarRhs};
use crate::real::Precision;

pub const DEFAULT_ZERO_TOL: f64 = 1e-9;

/// A parameter-to-field map.
pub trait Family: Sync {
    fn names(&self) -> Vec<String>;

    fn field(&self, params: &[f64]) -> Result<WeightedField>;

    fn chart(&self) -> ChartOptions {
        ChartOptions::default()
    }

    fn dim(&self) -> usize {
        self.names().len()
    }

    fn rhs(&self, params: &[f64]) -> Result<PolarRhs> {
        PolarRhs::with_options(&self.field(params)?, self.chart())
    }
}

/// A [`Family`] built from a closure.
pub struct FnFamily<F> {
    pub names: Vec<String>,
    pub chart: ChartOptions,
    pub build: F,
}

impl<F> FnFamily<F>
where
    F: Fn(&[f64]) -> Result<WeightedField> + Sync,
{
    pub fn new(names: &[&str], build: F) -> Self {
        FnFamily { names: names.iter().map(|s| s.to_string()).collect(), chart: ChartOptions::default(), build }
    }
}

impl<F> Family for FnFamily<F>
where
    F: Fn(&[f64]) -> Result<WeightedField> + Sync,
{
    fn names(&self) -> Vec<String> {
        self.names.clone()
    }

    fn field(&self, params: &[f64]) -> Result<WeightedField> {
        (self.build)(params)
    }

    fn chart(&self) -> ChartOptions {
        self.chart
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ParityClass {
    EvenSum,
    OddSum,
}

impl ParityClass {
    pub fn of(p: u32, q: u32) -> Self {
        if (p + q).is_multiple_of(2) {
            ParityClass::EvenSum
        } else {
            ParityClass::OddSum
        }
    }

    /// Whether `k` can be the first nonzero index for this class.
    pub fn admits(self, k: usize) -> bool {
        match self {
            ParityClass::EvenSum => !k.is_multiple_of(2),
            ParityClass::OddSum => k.is_multiple_of(2),
        }
    }

    /// Weak-focus order for a first nonzero index.
    pub fn focus_order(self, k: usize) -> Option<usize> {
        self.admits(k).then(|| match self {
            ParityClass::EvenSum => (k - 1) / 2,
            ParityClass::OddSum => k / 2,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", content = "order", rename_all = "kebab-case")]
pub enum Verdict {
    WeakFocus(usize),
    CenterCandidate,
    Indeterminate,
}

#[derive(Debug, Clone, Serialize)]
pub struct FocalValue {
    pub index: usize,
    /// Coefficient of `h^index` in `Delta(h)`; for index 1 this is `nu_1(2 pi) - 1`.
    pub value: f64,
    pub threshold: f64,
    pub nonzero: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct FocalReport {
    /// Chart weights after reduction.
    pub p: u32,
    pub q: u32,
    pub chart_power: u32,
    pub order: usize,
    pub tol: f64,
    pub precision: Precision,
    pub zero_tol: f64,
    pub values: Vec<FocalValue>,
    pub first_nonzero_index: Option<usize>,
    pub focus_order: Option<usize>,
    pub parity_class: ParityClass,
    pub parity_consistent: bool,
    pub verdict: Verdict,
}

impl FocalReport {
    /// Coefficient of `h^k` in the displacement.
    pub fn value(&self, k: usize) -> f64 {
        self.values.iter().find(|v| v.index == k).map_or(0.0, |v| v.value)
    }

    pub fn sign(&self, k: usize) -> f64 {
        self.value(k).signum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FocalOptions {
    /// Jet order `K`; `None` picks 8 for even `p + q` and 7 for odd.
    pub order: Option<usize>,
    pub tol: f64,
    pub zero_tol: f64,
    pub precision: Precision,
}

impl Default for FocalOptions {
    fn default() -> Self {
        FocalOptions { order: None, tol: DEFAULT_TOL, zero_tol: DEFAULT_ZERO_TOL, precision: Precision::Double }
    }
}

pub fn default_order(class: ParityClass) -> usize {
    match class {
        ParityClass::EvenSum => 8,
        ParityClass::OddSum => 7,
    }
}

const MAGNITUDE_SAMPLES: usize = 33;

/// Focal values of a prepared chart.
///
/// The zero threshold of `nu_k(2 pi)` is `zero_tol` times the largest magnitude
/// `nu_k(theta)` reaches over the revolution (at least 1), so cancellation in the
/// period integral is not mistaken for a nonzero value.
pub fn focal_values_rhs(rhs: &PolarRhs, options: &FocalOptions) -> Result<FocalReport> {
    let (p, q) = rhs.chart_weights();
    let class = ParityClass::of(p, q);
    let order = options.order.unwrap_or_else(|| default_order(class));
    if order < 3 {
        return Err(Error::Precondition(format!("jet order must be at least 3, got {order}")));
    }
    let jet_options = JetOptions { tol: options.tol, precision: options.precision, samples: MAGNITUDE_SAMPLES, ..JetOptions::default() };
    let traj = integrate_jet(rhs, 0.0, TAU, &Jet::identity(order), &jet_options)?;
    let end = traj.last();
    let values: Vec<FocalValue> = (1..=order)
        .map(|k| {
            let peak = traj.jets.iter().map(|j| j.coeff(k).abs()).fold(1.0, f64::max);
            let value = if k == 1 { traj.nu1_change } else { end.coeff(k) };
            let threshold = options.zero_tol * peak;
            FocalValue { index: k, value, threshold, nonzero: value.abs() > threshold }
        })
        .collect();
    let first = values.iter().find(|v| v.nonzero).map(|v| v.index);
    let parity_consistent = first.is_none_or(|k| class.admits(k));
    let focus_order = first.and_then(|k| class.focus_order(k));
    let verdict = match (first, focus_order) {
        (None, _) => Verdict::CenterCandidate,
        (Some(_), Some(m)) => Verdict::WeakFocus(m),
        (Some(_), None) => Verdict::Indeterminate,
    };
    Ok(FocalReport {
        p,
        q,
        chart_power: rhs.chart_power(),
        order,
        tol: options.tol,
        precision: options.precision,
        zero_tol: options.zero_tol,
        values,
        first_nonzero_index: first,
        focus_order,
        parity_class: class,
        parity_consistent,
        verdict,
    })
}

pub fn focal_values(field: &WeightedField, options: &FocalOptions) -> Result<FocalReport> {
    focal_values_rhs(&PolarRhs::new(field)?, options)
}

#[derive(Debug, Clone, Serialize)]
pub struct ShiftedCheck {
    /// `nu*_k(2 pi) - nu*_k(0)` for `k = 1..K`.
    pub shifted: Vec<f64>,
    /// Standard-start `Delta` coefficients for `k = 1..K`.
    pub standard: Vec<f64>,
    pub first_shifted: Option<usize>,
    pub first_standard: Option<usize>,
    pub relative_difference: Option<f64>,
    pub consistent: bool,
}

/// Compares the displacement from a shifted initial series `g(h) = h + c_2 h^2 + ...`
/// against the standard start: the first nonzero index and the value there must agree.
pub fn shifted_focal_check(field: &WeightedField, g: &Jet<f64>, options: &FocalOptions) -> Result<ShiftedCheck> {
    if g.coeff(0) != 0.0 || g.coeff(1) != 1.0 {
        return Err(Error::Precondition("g must have zero constant term and unit linear coefficient".into()));
    }
    let rhs = PolarRhs::new(field)?;
    let report = focal_values_rhs(&rhs, &FocalOptions { order: Some(g.order()), ..*options })?;
    let jet_options = JetOptions { tol: options.tol, precision: options.precision, ..JetOptions::default() };
    let traj = integrate_jet(&rhs, 0.0, TAU, g, &jet_options)?;
    let end = traj.last();
    let shifted: Vec<f64> = (1..=g.order()).map(|k| end.coeff(k) - g.coeff(k)).collect();
    let standard: Vec<f64> = report.values.iter().map(|v| v.value).collect();
    let first_shifted = shifted
        .iter()
        .zip(&report.values)
        .find(|(s, v)| s.abs() > v.threshold)
        .map(|(_, v)| v.index);
    let first_standard = report.first_nonzero_index;
    let relative_difference = first_standard.map(|k| {
        let (a, b) = (shifted[k - 1], standard[k - 1]);
        (a - b).abs() / b.abs()
    });
    let consistent = first_shifted == first_standard && relative_difference.is_none_or(|d| d <= 1e-8);
    Ok(ShiftedCheck { shifted, standard, first_shifted, first_standard, relative_difference, consistent })
}

#[derive(Debug, Clone, Serialize)]
pub struct FocalJacobian {
    pub indices: Vec<usize>,
    pub parameters: Vec<String>,
    pub point: Vec<f64>,
    /// Row `i` holds the derivatives of the focal value `indices[i]`.
    pub matrix: Vec<Vec<f64>>,
    pub steps: Vec<f64>,
    pub singular_values: Vec<f64>,
    pub rank: usize,
    /// Ratio of the last retained singular value to the first dropped one.
    pub gap: f64,
    pub ill_conditioned: bool,
}

const RANK_TOL: f64 = 1e-6;
const MIN_GAP: f64 = 1e3;

/// Central-difference Jacobian of selected `Delta` coefficients with respect to the family parameters.
///
/// Each column tries the steps `1e-2 * 2^-i` and keeps the pair of successive
/// estimates that agree best.
pub fn focal_jacobian(family: &dyn Family, point: &[f64], indices: &[usize], options: &FocalOptions) -> Result<FocalJacobian> {
    let order = indices.iter().copied().max().unwrap_or(3).max(3);
    let opts = FocalOptions { order: Some(order), ..*options };
    let eval = |params: &[f64]| -> Result<Vec<f64>> {
        let report = focal_values_rhs(&family.rhs(params)?, &opts)?;
        Ok(indices.iter().map(|&k| report.value(k)).collect())
    };
    let n = point.len();
    let columns: Vec<(Vec<f64>, f64)> = (0..n)
        .into_par_iter()
        .map(|c| {
            let diff = |step: f64| -> Result<Vec<f64>> {
                let mut hi = point.to_vec();
                let mut lo = point.to_vec();
                hi[c] += step;
                lo[c] -= step;
                let (a, b) = (eval(&hi)?, eval(&lo)?);
                Ok(a.iter().zip(&b).map(|(x, y)| (x - y) / (2.0 * step)).collect())
            };
            let steps: Vec<f64> = (0..8).map(|i| 1e-2 * 0.5f64.powi(i)).collect();
            let ests = steps.iter().map(|&s| diff(s)).collect::<Result<Vec<_>>>()?;
            let (best, _) = ests
                .windows(2)
                .enumerate()
                .map(|(i, w)| {
                    let scale = w[1].iter().fold(f64::MIN_POSITIVE, |m, v| m.max(v.abs()));
                    let d = w[0].iter().zip(&w[1]).fold(0.0f64, |m, (a, b)| m.max((a - b).abs())) / scale;
                    (i + 1, d)
                })
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .unwrap();
            Ok((ests[best].clone(), steps[best]))
        })
        .collect::<Result<Vec<_>>>()?;
    let m = indices.len();
    let matrix: Vec<Vec<f64>> = (0..m).map(|r| columns.iter().map(|(col, _)| col[r]).collect()).collect();
    let steps = columns.iter().map(|(_, s)| *s).collect();
    let (singular_values, rank, gap) = rank_of(&matrix);
    Ok(FocalJacobian {
        indices: indices.to_vec(),
        parameters: family.names(),
        point: point.to_vec(),
        matrix,
        steps,
        singular_values,
        rank,
        gap,
        ill_conditioned: gap < MIN_GAP,
    })
}

/// Singular values (descending), numerical rank and singular-value gap.
pub fn rank_of(matrix: &[Vec<f64>]) -> (Vec<f64>, usize, f64) {
    let rows = matrix.len();
    let cols = matrix.first().map_or(0, Vec::len);
    if rows == 0 || cols == 0 {
        return (Vec::new(), 0, f64::INFINITY);
    }
    let m = DMatrix::from_fn(rows, cols, |i, j| matrix[i][j]);
    let mut sv: Vec<f64> = m.singular_values().iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    let top = sv[0];
    let rank = sv.iter().filter(|&&s| s > RANK_TOL * top).count();
    let gap = match (rank, sv.get(rank)) {
        (0, _) => 0.0,
        (r, Some(&next)) if next > 0.0 => sv[r - 1] / next,
        _ => f64::INFINITY,
    };
    (sv, rank, gap)
}

#[derive(Debug, Clone, Serialize)]
pub struct StructuralCenter {
    pub hamiltonian: bool,
    pub mirrors: Vec<Mirror>,
}

impl StructuralCenter {
    pub fn certified(&self) -> bool {
        self.hamiltonian || !self.mirrors.is_empty()
    }
}

/// Coefficient tests that are each sufficient for a center: zero divergence or a reversing mirror.
pub fn structural_center(field: &WeightedField) -> StructuralCenter {
    let poly = field.to_polynomial();
    StructuralCenter { hamiltonian: poly.is_hamiltonian(1e-12), mirrors: poly.reversibility(1e-12) }
}

#[derive(Debug, Clone, Serialize)]
pub struct ParitySurvey {
    pub p: u32,
    pub q: u32,
    pub reduced: (u32, u32),
    pub seed: u64,
    pub order: usize,
    pub samples: usize,
    pub failed: usize,
    pub unresolved: usize,
    /// First nonzero index to number of samples.
    pub histogram: BTreeMap<usize, usize>,
    pub parity_class: ParityClass,
    pub violations: usize,
    pub all_consistent: bool,
}

/// Monomials on the `levels` lowest weights strictly above `bound`.
fn low_levels(p: u32, q: u32, bound: u32, forbidden: (u32, u32), levels: usize) -> Vec<(u32, u32)> {
    let mut weights: Vec<u32> = Vec::new();
    let limit = bound + levels as u32 * p * q + p + q;
    for k in 0..=limit / p {
        for j in 0..=limit / q {
            let w = k * p + j * q;
            if w > bound && w <= limit && (k, j) != forbidden {
                weights.push(w);
            }
        }
    }
    weights.sort_unstable();
    weights.dedup();
    weights.truncate(levels);
    let top = *weights.last().unwrap_or(&bound);
    let mut out = Vec::new();
    for k in 0..=top / p {
        for j in 0..=top / q {
            let w = k * p + j * q;
            if w > bound && w <= top && (k, j) != forbidden {
                out.push((k, j));
            }
        }
    }
    out
}

/// A random field with coefficients uniform on `[-1, 1]` over the three lowest weight levels.
pub fn random_field(p: u32, q: u32, rng: &mut impl Rng) -> WeightedField {
    let mut field = WeightedField::new(p, q);
    for (k, j) in low_levels(p, q, (2 * p - 1) * q, (0, 2 * p - 1), 3) {
        field.add_x(k, j, rng.random_range(-1.0..=1.0));
    }
    for (k, j) in low_levels(p, q, (2 * q - 1) * p, (2 * q - 1, 0), 3) {
        field.add_y(k, j, rng.random_range(-1.0..=1.0));
    }
    field
}

/// Distribution of first nonzero focal indices over random `p:q` fields.
pub fn parity_survey(p: u32, q: u32, samples: usize, seed: u64, options: &FocalOptions) -> Result<ParitySurvey> {
    if p == 0 || q == 0 {
        return Err(Error::Domain("weights must be positive".into()));
    }
    let d = gcd(p, q);
    let class = ParityClass::of(p / d, q / d);
    let order = options.order.unwrap_or_else(|| default_order(class));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let fields: Vec<WeightedField> = (0..samples).map(|_| random_field(p, q, &mut rng)).collect();
    let opts = FocalOptions { order: Some(order), ..*options };
    let outcomes: Vec<Option<Option<usize>>> = fields
        .par_iter()
        .map(|f| focal_values(f, &opts).ok().map(|r| r.first_nonzero_index))
        .collect();
    let mut histogram = BTreeMap::new();
    let (mut failed, mut unresolved, mut violations) = (0, 0, 0);
    for o in outcomes {
        match o {
            None => failed += 1,
            Some(None) => unresolved += 1,
            Some(Some(k)) => {
                *histogram.entry(k).or_insert(0) += 1;
                if !class.admits(k) {
                    violations += 1;
                }
            }
        }
    }
    Ok(ParitySurvey {
        p,
        q,
        reduced: (p / d, q / d),
        seed,
        order,
        samples,
        failed,
        unresolved,
        histogram,
        parity_class: class,
        violations,
        all_consistent: violations == 0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn system_31(a22: f64, a50: f64, b13: f64, b41: f64) -> WeightedField {
        WeightedField::new(2, 3).x(2, 2, a22).x(5, 0, a50).y(1, 3, b13).y(4, 1, b41)
    }

    #[test]
    fn core_field_is_a_center_candidate() {
        let r = focal_values(&WeightedField::new(2, 3), &FocalOptions::default()).unwrap();
        assert_eq!(r.verdict, Verdict::CenterCandidate);
        assert!(r.values.iter().all(|v| v.value.abs() < 1e-12));
        assert_eq!(r.order, 7);
    }

    #[test]
    fn first_focal_value_sign_follows_five_a50_plus_b41() {
        let r = focal_values(&system_31(0.0, 1.0, 0.0, 1.0), &FocalOptions::default()).unwrap();
        assert_eq!(r.first_nonzero_index, Some(2));
        assert_eq!(r.focus_order, Some(1));
        assert!(r.value(2) > 0.0);
        let r = focal_values(&system_31(0.0, -1.0, 0.0, 1.0), &FocalOptions::default()).unwrap();
        assert!(r.value(2) < 0.0);
    }

    #[test]
    fn hamiltonian_condition_gives_center_candidate() {
        let f = system_31(-3.0, -0.2, 2.0, 1.0);
        let r = focal_values(&f, &FocalOptions::default()).unwrap();
        assert_eq!(r.verdict, Verdict::CenterCandidate, "{:?}", r.values);
        assert!(structural_center(&f).hamiltonian);
    }

    #[test]
    fn identity_shift_reproduces_standard_values() {
        let f = system_31(0.3, 1.0, -0.4, 1.0);
        let c = shifted_focal_check(&f, &Jet::identity(6), &FocalOptions::default()).unwrap();
        assert!(c.consistent);
        for (a, b) in c.shifted.iter().zip(&c.standard) {
            assert!((a - b).abs() <= 1e-9 * b.abs().max(1.0), "{a} vs {b}");
        }
    }

    #[test]
    fn quadratic_shift_keeps_first_focal_value() {
        let f = system_31(0.0, 1.0, 0.0, 1.0);
        let g = Jet::from_coeffs(vec![0.0, 1.0, 0.3, 0.0, 0.0, 0.0, 0.0]);
        let c = shifted_focal_check(&f, &g, &FocalOptions::default()).unwrap();
        assert_eq!(c.first_shifted, Some(2));
        assert!(c.consistent, "{c:?}");
    }

    #[test]
    fn duplicated_parameter_has_rank_one() {
        let fam = FnFamily::new(&["e", "e_copy"], |e: &[f64]| Ok(system_31(0.0, e[0] + e[1], 0.0, 1.0)));
        let jac = focal_jacobian(&fam, &[0.1, 0.1], &[2, 3], &FocalOptions::default()).unwrap();
        assert!((jac.matrix[0][0] - jac.matrix[0][1]).abs() < 1e-8 * jac.matrix[0][0].abs());
        assert_eq!(jac.rank, 1);
    }

    #[test]
    fn rank_of_identity() {
        let (sv, rank, gap) = rank_of(&[vec![1.0, 0.0], vec![0.0, 2.0]]);
        assert_eq!(sv, vec![2.0, 1.0]);
        assert_eq!(rank, 2);
        assert!(gap.is_infinite());
    }

    #[test]
    fn random_fields_are_valid() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for &(p, q) in &[(1, 1), (1, 2), (2, 3), (3, 4), (2, 2)] {
            let f = random_field(p, q, &mut rng);
            assert!(f.validate().ok, "({p},{q}) {:?}", f.validate());
            assert!(f.x_terms().count() > 0 && f.y_terms().count() > 0);
        }
    }

    #[test]
    fn parity_survey_is_deterministic() {
        let a = parity_survey(1, 2, 4, 7, &FocalOptions::default()).unwrap();
        let b = parity_survey(1, 2, 4, 7, &FocalOptions::default()).unwrap();
        assert_eq!(a.histogram, b.histogram);
        assert!(a.all_consistent);
    }
}
