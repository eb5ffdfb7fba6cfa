//! Planar polynomial vector fields with a `p:q` quasi-homogeneous leading part.
//!
//! A [`WeightedField`] describes
//!
//! ```text
//! dx/dt = -lambda1 * y^(2p-1) + sum a_kj x^k y^j
//! dy/dt =  lambda2 * x^(2q-1) + sum b_kj x^k y^j
//! ```
//!
//! where every higher-order monomial has weight `k p + j q` strictly above the
//! weight of the leading term of its component. Only the higher-order terms are
//! stored; the leading part is implied by the weights and the two lambdas.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::real::Real;

pub const DEFAULT_DEGREE_CAP: u32 = 12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Monomial {
    pub k: u32,
    pub j: u32,
    pub c: f64,
}

impl Monomial {
    pub fn new(k: u32, j: u32, c: f64) -> Self {
        Monomial { k, j, c }
    }

    pub fn degree(&self) -> u32 {
        self.k + self.j
    }
}

/// Which right-hand side component a monomial belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Component {
    X,
    Y,
}

impl fmt::Display for Component {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Component::X => write!(f, "x"),
            Component::Y => write!(f, "y"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "kebab-case")]
pub enum Rule {
    /// `a_{0,2p-1}` or `b_{2q-1,0}` set explicitly; that position belongs to the leading part.
    ForbiddenPosition,
    /// Weight not strictly above the leading weight of the component.
    WeightBound { weight: u32, bound: u32 },
    NonFiniteCoefficient,
    /// Total degree above `degree_cap` (warning only).
    AboveDegreeCap { cap: u32 },
}

impl Rule {
    pub fn name(&self) -> &'static str {
        match self {
            Rule::ForbiddenPosition => "forbidden-position",
            Rule::WeightBound { .. } => "weight-bound",
            Rule::NonFiniteCoefficient => "non-finite-coefficient",
            Rule::AboveDegreeCap { .. } => "above-degree-cap",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Finding {
    pub component: Component,
    pub monomial: Monomial,
    #[serde(flatten)]
    pub rule: Rule,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ValidationReport {
    pub ok: bool,
    pub violations: Vec<Finding>,
    pub warnings: Vec<Finding>,
    /// Problems with the weights or lambdas themselves.
    pub structural: Vec<String>,
}

impl ValidationReport {
    /// True when the only violations are terms sitting exactly on the leading weight.
    ///
    /// Such terms (for instance the linear damping of an elementary focus) keep the
    /// polar chart well defined as long as the leading denominator stays positive.
    pub fn only_leading_weight_violations(&self) -> bool {
        self.structural.is_empty()
            && self.violations.iter().all(|v| {
                matches!(v.rule, Rule::WeightBound { weight, bound } if weight == bound)
            })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedField {
    pub p: u32,
    pub q: u32,
    /// Common factor `d` already divided out of the weights; the leading part uses `(p d, q d)`.
    pub chart_power: u32,
    pub lambda1: f64,
    pub lambda2: f64,
    x_terms: BTreeMap<(u32, u32), f64>,
    y_terms: BTreeMap<(u32, u32), f64>,
    pub degree_cap: u32,
}

/// Result of rescaling a field to `lambda1 = p`, `lambda2 = q`.
///
/// Original coordinates relate to the normalized ones by `x = scale_x u`,
/// `y = scale_y v`, `t = time_scale tau`.
#[derive(Debug, Clone, PartialEq)]
pub struct Normalized {
    pub field: WeightedField,
    pub scale_x: f64,
    pub scale_y: f64,
    pub time_scale: f64,
}

impl WeightedField {
    pub fn new(p: u32, q: u32) -> Self {
        WeightedField {
            p,
            q,
            chart_power: 1,
            lambda1: p as f64,
            lambda2: q as f64,
            x_terms: BTreeMap::new(),
            y_terms: BTreeMap::new(),
            degree_cap: DEFAULT_DEGREE_CAP,
        }
    }

    pub fn with_lambdas(mut self, lambda1: f64, lambda2: f64) -> Self {
        self.lambda1 = lambda1;
        self.lambda2 = lambda2;
        self
    }

    pub fn with_degree_cap(mut self, cap: u32) -> Self {
        self.degree_cap = cap;
        self
    }

    /// Adds `c x^k y^j` to dx/dt.
    pub fn x(mut self, k: u32, j: u32, c: f64) -> Self {
        self.add_x(k, j, c);
        self
    }

    /// Adds `c x^k y^j` to dy/dt.
    pub fn y(mut self, k: u32, j: u32, c: f64) -> Self {
        self.add_y(k, j, c);
        self
    }

    pub fn add_x(&mut self, k: u32, j: u32, c: f64) {
        *self.x_terms.entry((k, j)).or_insert(0.0) += c;
    }

    pub fn add_y(&mut self, k: u32, j: u32, c: f64) {
        *self.y_terms.entry((k, j)).or_insert(0.0) += c;
    }

    pub fn x_coeff(&self, k: u32, j: u32) -> f64 {
        self.x_terms.get(&(k, j)).copied().unwrap_or(0.0)
    }

    pub fn y_coeff(&self, k: u32, j: u32) -> f64 {
        self.y_terms.get(&(k, j)).copied().unwrap_or(0.0)
    }

    pub fn x_terms(&self) -> impl Iterator<Item = Monomial> + '_ {
        self.x_terms.iter().map(|(&(k, j), &c)| Monomial { k, j, c })
    }

    pub fn y_terms(&self) -> impl Iterator<Item = Monomial> + '_ {
        self.y_terms.iter().map(|(&(k, j), &c)| Monomial { k, j, c })
    }

    /// Weights `(p d, q d)` entering the leading part and the weight bounds.
    pub fn full_weights(&self) -> (u32, u32) {
        (self.p * self.chart_power, self.q * self.chart_power)
    }

    pub fn weight(&self, k: u32, j: u32) -> u32 {
        let (p, q) = self.full_weights();
        k * p + j * q
    }

    /// Weight of the leading term `y^(2p-1)` of dx/dt.
    pub fn x_leading_weight(&self) -> u32 {
        let (p, q) = self.full_weights();
        (2 * p - 1) * q
    }

    /// Weight of the leading term `x^(2q-1)` of dy/dt.
    pub fn y_leading_weight(&self) -> u32 {
        let (p, q) = self.full_weights();
        (2 * q - 1) * p
    }

    pub fn is_normalized(&self) -> bool {
        let (p, q) = self.full_weights();
        self.lambda1 == p as f64 && self.lambda2 == q as f64
    }

    pub fn validate(&self) -> ValidationReport {
        let mut report = ValidationReport::default();
        if self.p == 0 || self.q == 0 || self.chart_power == 0 {
            report.structural.push(format!(
                "weights must be positive (p={}, q={}, d={})",
                self.p, self.q, self.chart_power
            ));
        }
        if !(self.lambda1 > 0.0 && self.lambda1.is_finite()) {
            report.structural.push(format!("lambda1 must be positive, got {}", self.lambda1));
        }
        if !(self.lambda2 > 0.0 && self.lambda2.is_finite()) {
            report.structural.push(format!("lambda2 must be positive, got {}", self.lambda2));
        }
        if !report.structural.is_empty() && (self.p == 0 || self.q == 0 || self.chart_power == 0) {
            report.ok = false;
            return report;
        }
        let (p, q) = self.full_weights();
        let checks = [
            (Component::X, &self.x_terms, (0, 2 * p - 1), self.x_leading_weight()),
            (Component::Y, &self.y_terms, (2 * q - 1, 0), self.y_leading_weight()),
        ];
        for (component, terms, forbidden, bound) in checks {
            for (&(k, j), &c) in terms {
                let monomial = Monomial { k, j, c };
                let mut push = |rule| report.violations.push(Finding { component, monomial, rule });
                if !c.is_finite() {
                    push(Rule::NonFiniteCoefficient);
                }
                if (k, j) == forbidden {
                    push(Rule::ForbiddenPosition);
                    continue;
                }
                let weight = self.weight(k, j);
                if weight <= bound {
                    push(Rule::WeightBound { weight, bound });
                }
                if k + j > self.degree_cap {
                    report.warnings.push(Finding {
                        component,
                        monomial,
                        rule: Rule::AboveDegreeCap { cap: self.degree_cap },
                    });
                }
            }
        }
        report.ok = report.violations.is_empty() && report.structural.is_empty();
        report
    }

    /// Rescales so that the leading coefficients become `p` and `q`.
    pub fn normalize(&self) -> Result<Normalized> {
        if !(self.lambda1 > 0.0) || !(self.lambda2 > 0.0) {
            return Err(Error::Domain(format!(
                "normalization needs lambda1 > 0 and lambda2 > 0 (got {}, {})",
                self.lambda1, self.lambda2
            )));
        }
        let (p, q) = self.full_weights();
        let (pf, qf) = (p as f64, q as f64);
        let scale_x = if self.lambda2 == qf { 1.0 } else { (qf / self.lambda2).powf(1.0 / (2.0 * qf)) };
        let scale_y = if self.lambda1 == pf { 1.0 } else { (pf / self.lambda1).powf(1.0 / (2.0 * pf)) };
        let time_scale = scale_x * scale_y;
        let mut field = self.clone();
        field.lambda1 = pf;
        field.lambda2 = qf;
        // u' = (T/sx) X(sx u, sy v) with T/sx = sy, v' = (T/sy) Y(...) with T/sy = sx.
        for (&(k, j), c) in field.x_terms.iter_mut() {
            *c *= scale_x.powi(k as i32) * scale_y.powi(j as i32 + 1);
        }
        for (&(k, j), c) in field.y_terms.iter_mut() {
            *c *= scale_x.powi(k as i32 + 1) * scale_y.powi(j as i32);
        }
        Ok(Normalized { field, scale_x, scale_y, time_scale })
    }

    /// Divides `gcd(p, q)` out of the weights. The polar radius of the reduced
    /// chart is `r* = r^d`.
    pub fn reduce_weights(&self) -> (WeightedField, u32) {
        let d = gcd(self.p, self.q).max(1);
        let mut field = self.clone();
        field.p /= d;
        field.q /= d;
        field.chart_power *= d;
        (field, d)
    }

    /// Cartesian form including the leading terms.
    pub fn to_polynomial(&self) -> PolynomialField {
        let (p, q) = self.full_weights();
        let mut poly = PolynomialField::default();
        poly.add_x(0, 2 * p - 1, -self.lambda1);
        poly.add_y(2 * q - 1, 0, self.lambda2);
        for m in self.x_terms() {
            poly.add_x(m.k, m.j, m.c);
        }
        for m in self.y_terms() {
            poly.add_y(m.k, m.j, m.c);
        }
        poly
    }

    /// Parses the line-oriented system description.
    ///
    /// ```text
    /// # 2:3 example
    /// p 2
    /// q 3
    /// x 5 0 1.0     # a50
    /// y 4 1 1.0     # b41
    /// ```
    pub fn parse(text: &str) -> Result<WeightedField> {
        let mut p = None;
        let mut q = None;
        let mut lambda1 = None;
        let mut lambda2 = None;
        let mut cap = DEFAULT_DEGREE_CAP;
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        let mut last_line = 0;
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            last_line = line;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let tokens: Vec<&str> = content.split_whitespace().collect();
            let err = |message: String| Error::Parse { line, message };
            let expect = |n: usize| {
                if tokens.len() != n {
                    Err(err(format!("'{}' expects {} argument(s), got {}", tokens[0], n - 1, tokens.len() - 1)))
                } else {
                    Ok(())
                }
            };
            let int = |s: &str| s.parse::<u32>().map_err(|e| err(format!("bad integer '{s}': {e}")));
            let real = |s: &str| {
                s.parse::<f64>()
                    .map_err(|e| err(format!("bad number '{s}': {e}")))
                    .and_then(|v| if v.is_finite() { Ok(v) } else { Err(err(format!("non-finite number '{s}'"))) })
            };
            match tokens[0] {
                "p" => {
                    expect(2)?;
                    p = Some(int(tokens[1])?);
                }
                "q" => {
                    expect(2)?;
                    q = Some(int(tokens[1])?);
                }
                "lambda1" => {
                    expect(2)?;
                    lambda1 = Some(real(tokens[1])?);
                }
                "lambda2" => {
                    expect(2)?;
                    lambda2 = Some(real(tokens[1])?);
                }
                "degree_cap" => {
                    expect(2)?;
                    cap = int(tokens[1])?;
                }
                "x" | "y" => {
                    expect(4)?;
                    let term = (int(tokens[1])?, int(tokens[2])?, real(tokens[3])?);
                    if tokens[0] == "x" {
                        xs.push(term);
                    } else {
                        ys.push(term);
                    }
                }
                other => return Err(err(format!("unknown keyword '{other}'"))),
            }
        }
        let line = last_line.max(1);
        let p = p.ok_or_else(|| Error::Parse { line, message: "missing 'p <int>'".into() })?;
        let q = q.ok_or_else(|| Error::Parse { line, message: "missing 'q <int>'".into() })?;
        if p == 0 || q == 0 {
            return Err(Error::Parse { line, message: "weights p and q must be positive".into() });
        }
        let mut field = WeightedField::new(p, q).with_degree_cap(cap);
        field.lambda1 = lambda1.unwrap_or(p as f64);
        field.lambda2 = lambda2.unwrap_or(q as f64);
        for (k, j, c) in xs {
            field.add_x(k, j, c);
        }
        for (k, j, c) in ys {
            field.add_y(k, j, c);
        }
        Ok(field)
    }

    pub fn to_text(&self) -> String {
        let (p, q) = self.full_weights();
        let mut out = format!("p {p}\nq {q}\nlambda1 {:e}\nlambda2 {:e}\n", self.lambda1, self.lambda2);
        if self.degree_cap != DEFAULT_DEGREE_CAP {
            out.push_str(&format!("degree_cap {}\n", self.degree_cap));
        }
        for m in self.x_terms() {
            out.push_str(&format!("x {} {} {:e}\n", m.k, m.j, m.c));
        }
        for m in self.y_terms() {
            out.push_str(&format!("y {} {} {:e}\n", m.k, m.j, m.c));
        }
        out
    }
}

pub fn gcd(mut a: u32, mut b: u32) -> u32 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

/// General planar polynomial vector field in Cartesian coordinates.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PolynomialField {
    x_terms: BTreeMap<(u32, u32), f64>,
    y_terms: BTreeMap<(u32, u32), f64>,
}

/// Mirror reversibility of a vector field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mirror {
    /// Invariant under `(x, y, t) -> (x, -y, -t)`.
    XAxis,
    /// Invariant under `(x, y, t) -> (-x, y, -t)`.
    YAxis,
}

impl PolynomialField {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn x(mut self, k: u32, j: u32, c: f64) -> Self {
        self.add_x(k, j, c);
        self
    }

    pub fn y(mut self, k: u32, j: u32, c: f64) -> Self {
        self.add_y(k, j, c);
        self
    }

    pub fn add_x(&mut self, k: u32, j: u32, c: f64) {
        *self.x_terms.entry((k, j)).or_insert(0.0) += c;
    }

    pub fn add_y(&mut self, k: u32, j: u32, c: f64) {
        *self.y_terms.entry((k, j)).or_insert(0.0) += c;
    }

    pub fn x_terms(&self) -> impl Iterator<Item = Monomial> + '_ {
        self.x_terms.iter().map(|(&(k, j), &c)| Monomial { k, j, c })
    }

    pub fn y_terms(&self) -> impl Iterator<Item = Monomial> + '_ {
        self.y_terms.iter().map(|(&(k, j), &c)| Monomial { k, j, c })
    }

    pub fn max_degree(&self) -> u32 {
        self.x_terms
            .keys()
            .chain(self.y_terms.keys())
            .map(|&(k, j)| k.max(j))
            .max()
            .unwrap_or(0)
    }

    pub fn eval<T: Real>(&self, x: T, y: T) -> (T, T) {
        let n = self.max_degree() as usize + 1;
        let mut xp = vec![T::one(); n];
        let mut yp = vec![T::one(); n];
        for i in 1..n {
            xp[i] = xp[i - 1] * x;
            yp[i] = yp[i - 1] * y;
        }
        let sum = |terms: &BTreeMap<(u32, u32), f64>| {
            terms
                .iter()
                .fold(T::zero(), |acc, (&(k, j), &c)| acc + xp[k as usize] * yp[j as usize] * c)
        };
        (sum(&self.x_terms), sum(&self.y_terms))
    }

    /// Divergence as a coefficient map `(k, j) -> c` of `c x^k y^j`, zero entries dropped.
    pub fn divergence(&self) -> BTreeMap<(u32, u32), f64> {
        let mut div = BTreeMap::new();
        for m in self.x_terms() {
            if m.k > 0 {
                *div.entry((m.k - 1, m.j)).or_insert(0.0) += m.k as f64 * m.c;
            }
        }
        for m in self.y_terms() {
            if m.j > 0 {
                *div.entry((m.k, m.j - 1)).or_insert(0.0) += m.j as f64 * m.c;
            }
        }
        div.retain(|_, c| *c != 0.0);
        div
    }

    fn scale(&self) -> f64 {
        self.x_terms
            .values()
            .chain(self.y_terms.values())
            .fold(0.0f64, |m, c| m.max(c.abs()))
    }

    /// Coefficientwise test for a vanishing divergence, relative to the largest coefficient.
    pub fn is_hamiltonian(&self, rel_tol: f64) -> bool {
        let bound = rel_tol * self.scale().max(f64::MIN_POSITIVE);
        self.divergence().values().all(|c| c.abs() <= bound)
    }

    /// Mirror symmetries under which the field is time-reversible, checked coefficientwise.
    pub fn reversibility(&self, rel_tol: f64) -> Vec<Mirror> {
        let bound = rel_tol * self.scale().max(f64::MIN_POSITIVE);
        let ok = |terms: &BTreeMap<(u32, u32), f64>, pick: fn(u32, u32) -> u32, parity: u32| {
            terms.iter().all(|(&(k, j), c)| pick(k, j) % 2 == parity || c.abs() <= bound)
        };
        let mut out = Vec::new();
        // x-axis mirror: dx/dt odd in y, dy/dt even in y.
        if ok(&self.x_terms, |_, j| j, 1) && ok(&self.y_terms, |_, j| j, 0) {
            out.push(Mirror::XAxis);
        }
        // y-axis mirror: dx/dt even in x, dy/dt odd in x.
        if ok(&self.x_terms, |k, _| k, 0) && ok(&self.y_terms, |k, _| k, 1) {
            out.push(Mirror::YAxis);
        }
        out
    }
}
