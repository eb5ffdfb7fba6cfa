//! Command layer behind the `qhfocus` binary: configuration, dispatch and
//! rendering of reports as text, JSON and CSV.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;

use serde::Serialize;
use serde_json::{json, Value};

use crate::case_study::{self, Coeffs, Integrand, RescaledFamily, UnfoldingFamily};
use crate::cycles::{self, Backend, CycleSet, ScanOptions, System};
use crate::error::{Error, Result};
use crate::field::WeightedField;
use crate::flow::SectionOptions;
use crate::focal::{self, Family, FocalOptions, FocalReport, Verdict};
use crate::polar::{ChartOptions, PolarRhs};
use crate::quadrature::{self, QuadResult};
use crate::real::Precision;

/// Named parameter families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum FamilyKind {
    /// The `2:3` unfolding in `(eps1, eps2)`.
    Eq325,
    /// The rescaled perturbation in `(delta0, delta1, delta2)` at fixed `sigma, eps1, eps2`.
    Eq327,
}

impl FamilyKind {
    pub fn keys(self) -> &'static [&'static str] {
        match self {
            FamilyKind::Eq325 => &["eps1", "eps2"],
            FamilyKind::Eq327 => &["sigma", "eps1", "eps2", "delta0", "delta1", "delta2"],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FamilySpec {
    pub kind: FamilyKind,
    pub params: BTreeMap<String, f64>,
}

impl FamilySpec {
    /// Parses `k=v,k=v`; missing keys default to zero, except `sigma` (0.1).
    pub fn parse(kind: FamilyKind, text: &str) -> Result<Self> {
        let mut params: BTreeMap<String, f64> = kind.keys().iter().map(|k| (k.to_string(), 0.0)).collect();
        if kind == FamilyKind::Eq327 {
            params.insert("sigma".into(), 0.1);
        }
        for item in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let (key, value) = item
                .split_once('=')
                .ok_or_else(|| Error::Precondition(format!("parameter '{item}' is not of the form k=v")))?;
            let key = key.trim();
            if !params.contains_key(key) {
                return Err(Error::Precondition(format!(
                    "unknown parameter '{key}' for {kind:?}; expected one of {}",
                    kind.keys().join(", ")
                )));
            }
            let v: f64 = value
                .trim()
                .parse()
                .map_err(|e| Error::Precondition(format!("bad value for '{key}': {e}")))?;
            if !v.is_finite() {
                return Err(Error::Precondition(format!("non-finite value for '{key}'")));
            }
            params.insert(key.to_string(), v);
        }
        Ok(FamilySpec { kind, params })
    }

    fn get(&self, key: &str) -> f64 {
        self.params[key]
    }

    fn coeffs(&self) -> Coeffs {
        Coeffs::unfolding(self.get("eps1"), self.get("eps2"))
    }

    /// The family together with the point selected by the parameters.
    pub fn family(&self) -> (Box<dyn Family + Send + Sync>, Vec<f64>) {
        match self.kind {
            FamilyKind::Eq325 => (Box::new(UnfoldingFamily), vec![self.get("eps1"), self.get("eps2")]),
            FamilyKind::Eq327 => (
                Box::new(RescaledFamily { sigma: self.get("sigma"), coeffs: self.coeffs() }),
                vec![self.get("delta0"), self.get("delta1"), self.get("delta2")],
            ),
        }
    }

    pub fn field(&self) -> Result<(WeightedField, ChartOptions)> {
        let (family, point) = self.family();
        Ok((family.field(&point)?, family.chart()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Source {
    File(PathBuf),
    Family(FamilySpec),
}

impl Source {
    pub fn load(&self) -> Result<(WeightedField, ChartOptions)> {
        match self {
            Source::File(path) => {
                let text = std::fs::read_to_string(path)?;
                Ok((WeightedField::parse(&text)?, ChartOptions::default()))
            }
            Source::Family(spec) => spec.field(),
        }
    }

    fn describe(&self) -> String {
        match self {
            Source::File(path) => path.display().to_string(),
            Source::Family(spec) => {
                let params: Vec<String> = spec.params.iter().map(|(k, v)| format!("{k}={v:e}")).collect();
                format!("{:?} {}", spec.kind, params.join(",")).to_lowercase()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Command {
    Analyze { source: Source, focal: FocalOptions },
    Cycles { source: Source, backend: Backend, scan: ScanOptions },
    Verify { tol: f64 },
    Quad { tol: f64 },
    Jacobian { family: FamilySpec, indices: Vec<usize>, focal: FocalOptions },
    Survey { p: u32, q: u32, samples: usize, seed: u64, focal: FocalOptions },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Success,
    ReproductionFailure,
}

impl Status {
    pub fn code(self) -> i32 {
        match self {
            Status::Success => 0,
            Status::ReproductionFailure => 2,
        }
    }
}

/// Exit code for an error: 1 for bad input, 2 when a computation failed.
pub fn error_code(e: &Error) -> i32 {
    match e {
        Error::Parse { .. } | Error::Io(_) | Error::Precondition(_) | Error::InvalidField(_) | Error::Domain(_) => 1,
        _ => 2,
    }
}

/// Rendered result of one command.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub status: Status,
    pub text: String,
    pub json: Value,
    /// Plot data, when the command produces any.
    pub csv: Option<String>,
}

pub fn run(command: &Command) -> Result<Outcome> {
    match command {
        Command::Analyze { source, focal } => analyze(source, focal),
        Command::Cycles { source, backend, scan } => cycles_cmd(source, *backend, scan),
        Command::Verify { tol } => verify(*tol),
        Command::Quad { tol } => quad(*tol),
        Command::Jacobian { family, indices, focal } => jacobian(family, indices, focal),
        Command::Survey { p, q, samples, seed, focal } => survey(*p, *q, *samples, *seed, focal),
    }
}

fn precision_name(p: Precision) -> &'static str {
    match p {
        Precision::Double => "double",
        Precision::Extended => "extended",
    }
}

fn verdict_text(v: &Verdict) -> String {
    match v {
        Verdict::WeakFocus(m) => format!("weak focus of order {m}"),
        Verdict::CenterCandidate => "center candidate (all computed values below threshold)".into(),
        Verdict::Indeterminate => "indeterminate (first nonzero index has the wrong parity)".into(),
    }
}

fn focal_text(report: &FocalReport, out: &mut String) {
    let _ = writeln!(
        out,
        "weights {}:{}  chart power {}  order {}  tol {:e}  zero_tol {:e}  precision {}",
        report.p,
        report.q,
        report.chart_power,
        report.order,
        report.tol,
        report.zero_tol,
        precision_name(report.precision)
    );
    let _ = writeln!(out, "{:>3}  {:>24}  {:>10}  nonzero", "k", "nu_k(2pi)", "threshold");
    for v in &report.values {
        let _ = writeln!(out, "{:>3}  {:>24.16e}  {:>10.2e}  {}", v.index, v.value, v.threshold, v.nonzero);
    }
    let _ = writeln!(
        out,
        "first nonzero index {}  parity consistent {}  {}",
        report.first_nonzero_index.map_or("-".to_string(), |k| k.to_string()),
        report.parity_consistent,
        verdict_text(&report.verdict)
    );
}

fn analyze(source: &Source, focal: &FocalOptions) -> Result<Outcome> {
    let (field, chart) = source.load()?;
    let rhs = PolarRhs::with_options(&field, chart)?;
    let report = focal::focal_values_rhs(&rhs, focal)?;
    let mut text = format!("analyze {}\n", source.describe());
    focal_text(&report, &mut text);
    let json = json!({ "command": "analyze", "source": source.describe(), "report": report });
    Ok(Outcome { status: Status::Success, text, json, csv: None })
}

fn cycles_text(set: &CycleSet, out: &mut String) {
    let _ = writeln!(
        out,
        "backend {:?}  grid {} points on [{:e}, {:e}]  tol {:e}  null_tol {:e}  precision {}",
        set.backend,
        set.scan_grid.points,
        set.scan_grid.h_min,
        set.scan_grid.h_max,
        set.tol,
        set.null_tol,
        precision_name(set.precision)
    );
    let _ = writeln!(out, "{} cycle(s)", set.count());
    for c in &set.cycles {
        let _ = writeln!(
            out,
            "  h* {:.12e}  bracket [{:.6e}, {:.6e}]  |Delta| {:.2e}  {:?}  section x {:.12e}",
            c.h_star, c.bracket.0, c.bracket.1, c.residual, c.stability, c.section_x
        );
    }
    for w in &set.warnings {
        let _ = writeln!(out, "warning: {w}");
    }
}

fn cycles_cmd(source: &Source, backend: Backend, scan: &ScanOptions) -> Result<Outcome> {
    let (field, chart) = source.load()?;
    let system = match backend {
        Backend::Polar => System::polar(&field, chart)?,
        Backend::Cartesian => System::Cartesian(field.to_polynomial()),
    };
    let set = cycles::find_cycles(&system, scan)?;
    let section = SectionOptions { tol: scan.displacement.tol, precision: scan.displacement.precision, ..Default::default() };
    let closures: Vec<Option<f64>> =
        set.cycles.iter().map(|c| cycles::cycle_closure(&system, c, &section).ok()).collect();
    let mut text = format!("cycles {}\n", source.describe());
    cycles_text(&set, &mut text);
    for (c, cl) in set.cycles.iter().zip(&closures) {
        match cl {
            Some(v) => {
                let _ = writeln!(text, "  closure at h* {:.6e}: {v:.2e} (tol {:e})", c.h_star, section.tol);
            }
            None => {
                let _ = writeln!(text, "  closure at h* {:.6e}: failed", c.h_star);
            }
        }
    }
    let mut csv = Vec::new();
    set.write_scan_csv(&mut csv)?;
    let json = json!({
        "command": "cycles",
        "source": source.describe(),
        "cycle_set": set,
        "closures": closures,
        "closure_tol": section.tol,
    });
    Ok(Outcome { status: Status::Success, text, json, csv: Some(String::from_utf8_lossy(&csv).into_owned()) })
}

fn verify(tol: f64) -> Result<Outcome> {
    let v322 = case_study::verify_322(tol.min(1e-13))?;
    let claims = case_study::claims(tol)?;
    let mut text = format!("verify  tol {tol:e}\n");
    let _ = writeln!(text, "{:<20} {:>24} {:>24}  result  detail", "claim", "computed", "expected");
    for c in &claims {
        let _ = writeln!(
            text,
            "{:<20} {:>24.15e} {:>24.15e}  {:<6}  {}",
            c.id,
            c.computed,
            c.expected,
            if c.pass { "pass" } else { "FAIL" },
            c.detail
        );
    }
    let all = claims.iter().all(|c| c.pass);
    if !v322.passed() {
        let _ = writeln!(
            text,
            "discrepancy: neither prefactor reading matches {:.6}; once {:.10e}, twice {:.10e}, scheme agreement {:.1e}",
            v322.target, v322.once, v322.twice, v322.scheme_agreement
        );
    }
    let json = json!({ "command": "verify", "tol": tol, "combination": v322, "claims": claims, "all_pass": all });
    Ok(Outcome { status: if all { Status::Success } else { Status::ReproductionFailure }, text, json, csv: None })
}

#[derive(Debug, Clone, Serialize)]
pub struct QuadRow {
    pub integrand: &'static str,
    pub trapezoid: QuadResult,
    pub gauss: QuadResult,
    /// Difference of the two schemes relative to the integral of `|f|`.
    pub relative_difference: f64,
}

/// Every case-study integrand over one period by both schemes, followed by the nested `B` integral.
pub fn quad_rows(tol: f64) -> Result<Vec<QuadRow>> {
    let tau = std::f64::consts::TAU;
    let mut rows = Integrand::ALL
        .iter()
        .map(|&g| {
            let f = |t: f64| g.eval(t);
            let trapezoid = quadrature::trapezoid(&f, 0.0, tau, tol)?;
            let gauss = quadrature::gauss_panels(&f, 0.0, tau, tol)?;
            let l1 = quadrature::gauss_panels(&|t: f64| g.eval(t).abs(), 0.0, tau, 1e-8)?.value;
            Ok(QuadRow {
                integrand: g.name(),
                relative_difference: (trapezoid.value - gauss.value).abs() / l1,
                trapezoid,
                gauss,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let v = case_study::verify_322(tol)?;
    rows.push(QuadRow {
        integrand: "B",
        relative_difference: (v.b_trapezoid.value - v.b_gauss.value).abs() / v.b_trapezoid.value.abs(),
        trapezoid: v.b_trapezoid,
        gauss: v.b_gauss,
    });
    Ok(rows)
}

fn quad(tol: f64) -> Result<Outcome> {
    let rows = quad_rows(tol)?;
    let mut text = format!("quad over [0, 2pi]  tol {tol:e}\n");
    let _ = writeln!(text, "{:<10} {:>24} {:>9} {:>8} {:>24} {:>9}  diff / int |f|", "integrand", "trapezoid", "err est", "nodes", "gauss panels", "err est");
    for r in &rows {
        let _ = writeln!(
            text,
            "{:<10} {:>24.16e} {:>9.1e} {:>8} {:>24.16e} {:>9.1e}  {:.1e}",
            r.integrand,
            r.trapezoid.value,
            r.trapezoid.error_estimate,
            r.trapezoid.nodes_used,
            r.gauss.value,
            r.gauss.error_estimate,
            r.relative_difference
        );
    }
    let json = json!({ "command": "quad", "tol": tol, "rows": rows });
    Ok(Outcome { status: Status::Success, text, json, csv: None })
}

fn jacobian(spec: &FamilySpec, indices: &[usize], focal: &FocalOptions) -> Result<Outcome> {
    let (family, point) = spec.family();
    let jac = focal::focal_jacobian(family.as_ref(), &point, indices, focal)?;
    let mut text = format!(
        "jacobian {}  tol {:e}  precision {}\n",
        Source::Family(spec.clone()).describe(),
        focal.tol,
        precision_name(focal.precision)
    );
    let _ = writeln!(text, "{:>6}  {}", "k", jac.parameters.join("  "));
    for (k, row) in jac.indices.iter().zip(&jac.matrix) {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:>22.14e}")).collect();
        let _ = writeln!(text, "{k:>6}  {}", cells.join(" "));
    }
    let _ = writeln!(
        text,
        "singular values {:?}\nrank {}  gap {:.2e}  ill-conditioned {}",
        jac.singular_values, jac.rank, jac.gap, jac.ill_conditioned
    );
    let json = json!({ "command": "jacobian", "tol": focal.tol, "jacobian": jac });
    Ok(Outcome { status: Status::Success, text, json, csv: None })
}

fn survey(p: u32, q: u32, samples: usize, seed: u64, focal: &FocalOptions) -> Result<Outcome> {
    let s = focal::parity_survey(p, q, samples, seed, focal)?;
    let mut text = format!(
        "survey {p}:{q} (reduced {}:{})  samples {}  seed {}  order {}  tol {:e}  zero_tol {:e}\n",
        s.reduced.0, s.reduced.1, s.samples, s.seed, s.order, focal.tol, focal.zero_tol
    );
    let _ = writeln!(text, "parity class {:?}  failed {}  unresolved {}", s.parity_class, s.failed, s.unresolved);
    for (k, n) in &s.histogram {
        let _ = writeln!(text, "  first nonzero index {k}: {n}");
    }
    let _ = writeln!(text, "violations {}", s.violations);
    let status = if s.all_consistent { Status::Success } else { Status::ReproductionFailure };
    let json = json!({ "command": "survey", "tol": focal.tol, "survey": s });
    Ok(Outcome { status, text, json, csv: None })
}
