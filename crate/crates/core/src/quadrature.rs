//! Quadrature for smooth periodic integrands.
//!
//! Two independent schemes are provided so that each value can be cross-checked:
//! the uniform trapezoid rule (spectrally accurate over a full period, with
//! cumulative integrals from an FFT antiderivative) and adaptive Gauss-Legendre
//! panels (cumulative integrals from cached panel sums).

use std::f64::consts::TAU;
use std::num::NonZeroUsize;

use gauss_quad::GaussLegendre;
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::Serialize;

use crate::error::{Error, Result};

pub const NODE_CAP: usize = 1 << 20;
const PANEL_ORDER: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuadResult {
    pub value: f64,
    pub error_estimate: f64,
    pub nodes_used: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    Trapezoid,
    GaussPanels,
}

fn is_full_period(a: f64, b: f64) -> bool {
    let periods = (b - a) / TAU;
    periods >= 0.5 && (periods - periods.round()).abs() < 1e-14
}

/// Adaptive integral of `f` over `[a, b]`.
///
/// Whole periods use the trapezoid rule; other intervals use Gauss-Legendre panels.
pub fn quad_periodic<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> Result<QuadResult> {
    if is_full_period(a, b) {
        trapezoid(&f, a, b, tol)
    } else {
        gauss_panels(&f, a, b, tol)
    }
}

/// Trapezoid sums on `16 * 2^i` nodes until successive sums agree.
pub fn trapezoid<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> Result<QuadResult> {
    let mut n = 16;
    let h = |n: usize| (b - a) / n as f64;
    let mut sum: f64 = (0..n).map(|i| f(a + i as f64 * h(n))).sum();
    let mut abs_sum: f64 = (0..n).map(|i| f(a + i as f64 * h(n)).abs()).sum();
    let mut prev = sum * h(n);
    loop {
        let step = h(2 * n);
        let (odd, odd_abs) = (0..n).fold((0.0, 0.0), |(s, sa), i| {
            let v = f(a + (2 * i + 1) as f64 * step);
            (s + v, sa + v.abs())
        });
        sum += odd;
        abs_sum += odd_abs;
        n *= 2;
        let value = sum * step;
        let scale = (abs_sum * step).max(value.abs());
        let error_estimate = (value - prev).abs();
        if error_estimate <= tol * scale || scale == 0.0 {
            return Ok(QuadResult { value, error_estimate, nodes_used: n });
        }
        if n >= NODE_CAP {
            return Err(Error::QuadratureCap { nodes: n, estimate: error_estimate, target: tol * scale });
        }
        prev = value;
    }
}

struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
    abs: f64,
}

fn rules() -> &'static (GaussLegendre, GaussLegendre) {
    static RULES: std::sync::OnceLock<(GaussLegendre, GaussLegendre)> = std::sync::OnceLock::new();
    RULES.get_or_init(|| {
        (
            GaussLegendre::new(NonZeroUsize::new(PANEL_ORDER).unwrap()),
            GaussLegendre::new(NonZeroUsize::new(PANEL_ORDER + 10).unwrap()),
        )
    })
}

fn panel<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Panel {
    let (lo, hi) = rules();
    let coarse = lo.integrate(a, b, f);
    let value = hi.integrate(a, b, f);
    let abs = hi.integrate(a, b, |x| f(x).abs());
    Panel { a, b, value, error: (value - coarse).abs(), abs }
}

fn adaptive_panels<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> Result<Vec<Panel>> {
    let mut panels: Vec<Panel> = (0..8)
        .map(|i| {
            let w = (b - a) / 8.0;
            panel(f, a + i as f64 * w, a + (i + 1) as f64 * w)
        })
        .collect();
    let evals_per_panel = 3 * PANEL_ORDER + 20;
    loop {
        let error: f64 = panels.iter().map(|p| p.error).sum();
        let value: f64 = panels.iter().map(|p| p.value).sum();
        let scale = panels.iter().map(|p| p.abs).sum::<f64>().max(value.abs());
        if error <= tol * scale || scale == 0.0 {
            panels.sort_by(|x, y| x.a.total_cmp(&y.a));
            return Ok(panels);
        }
        if panels.len() * evals_per_panel >= NODE_CAP {
            return Err(Error::QuadratureCap { nodes: panels.len() * evals_per_panel, estimate: error, target: tol * scale });
        }
        // Split every panel carrying more than its share of the error budget.
        let share = tol * scale / panels.len() as f64;
        let mut next = Vec::with_capacity(panels.len() * 2);
        let mut split_any = false;
        let worst = panels.iter().map(|p| p.error).fold(0.0, f64::max);
        for p in panels {
            if p.error > share || p.error == worst {
                let mid = 0.5 * (p.a + p.b);
                next.push(panel(f, p.a, mid));
                next.push(panel(f, mid, p.b));
                split_any = true;
            } else {
                next.push(p);
            }
        }
        debug_assert!(split_any);
        panels = next;
    }
}

/// Adaptive Gauss-Legendre panels with a 20/30-point error estimate per panel.
pub fn gauss_panels<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> Result<QuadResult> {
    let panels = adaptive_panels(f, a, b, tol)?;
    Ok(QuadResult {
        value: panels.iter().map(|p| p.value).sum(),
        error_estimate: panels.iter().map(|p| p.error).sum(),
        nodes_used: panels.len() * (3 * PANEL_ORDER + 20),
    })
}

/// Cumulative integral `F(x) = int_a^x f` with cached panel sums.
pub struct CumulativeIntegral<F> {
    f: F,
    a: f64,
    b: f64,
    edges: Vec<f64>,
    cumulative: Vec<f64>,
}

impl<F: Fn(f64) -> f64> CumulativeIntegral<F> {
    pub fn new(f: F, a: f64, b: f64, tol: f64) -> Result<Self> {
        let panels = adaptive_panels(&f, a, b, tol)?;
        let mut edges = Vec::with_capacity(panels.len() + 1);
        let mut cumulative = Vec::with_capacity(panels.len() + 1);
        let mut acc = 0.0;
        edges.push(a);
        cumulative.push(0.0);
        for p in &panels {
            acc += p.value;
            edges.push(p.b);
            cumulative.push(acc);
        }
        Ok(CumulativeIntegral { f, a, b, edges, cumulative })
    }

    pub fn total(&self) -> f64 {
        *self.cumulative.last().unwrap()
    }

    /// `F(x)`; outside `[a, b]` the integrand is assumed periodic with period `b - a`.
    pub fn eval(&self, x: f64) -> f64 {
        let period = self.b - self.a;
        let turns = ((x - self.a) / period).floor();
        let y = x - turns * period;
        let i = match self.edges.binary_search_by(|e| e.total_cmp(&y)) {
            Ok(i) => return turns * self.total() + self.cumulative[i],
            Err(i) => i - 1,
        };
        let (_, hi) = rules();
        turns * self.total() + self.cumulative[i] + hi.integrate(self.edges[i], y, &self.f)
    }
}

/// Values of `int_0^{theta_n} g` at the trapezoid nodes `theta_n = 2 pi n / N`,
/// from the Fourier antiderivative of the samples `g(theta_n)`.
pub fn spectral_antiderivative(samples: &[f64]) -> Vec<f64> {
    let n = samples.len();
    let mut planner = FftPlanner::<f64>::new();
    let mut buf: Vec<Complex64> = samples.iter().map(|&v| Complex64::new(v / n as f64, 0.0)).collect();
    planner.plan_fft_forward(n).process(&mut buf);
    let mean = buf[0].re;
    for (k, c) in buf.iter_mut().enumerate() {
        let freq = if k <= n / 2 { k as f64 } else { k as f64 - n as f64 };
        *c = if k == 0 || (n.is_multiple_of(2) && k == n / 2) { Complex64::new(0.0, 0.0) } else { *c / Complex64::new(0.0, freq) };
    }
    let base: Complex64 = buf.iter().sum();
    planner.plan_fft_inverse(n).process(&mut buf);
    (0..n).map(|i| (buf[i] - base).re + mean * TAU * i as f64 / n as f64).collect()
}

/// Trapezoid rule over `[0, 2 pi)` for `kernel(theta) * G(theta)` with `G` the
/// running integral of `inner`, doubling nodes until converged.
pub fn trapezoid_nested<K: Fn(f64) -> f64, G: Fn(f64) -> f64>(kernel: K, inner: G, tol: f64) -> Result<QuadResult> {
    let eval = |n: usize| {
        let nodes: Vec<f64> = (0..n).map(|i| TAU * i as f64 / n as f64).collect();
        let g: Vec<f64> = nodes.iter().map(|&t| inner(t)).collect();
        let cum = spectral_antiderivative(&g);
        let terms: Vec<f64> = nodes.iter().zip(&cum).map(|(&t, &c)| kernel(t) * c).collect();
        let h = TAU / n as f64;
        (terms.iter().sum::<f64>() * h, terms.iter().map(|v| v.abs()).sum::<f64>() * h)
    };
    let mut n = 32;
    let (mut prev, _) = eval(n);
    loop {
        n *= 2;
        let (value, abs) = eval(n);
        let error_estimate = (value - prev).abs();
        if error_estimate <= tol * abs.max(value.abs()) || abs == 0.0 {
            return Ok(QuadResult { value, error_estimate, nodes_used: n });
        }
        if n >= NODE_CAP {
            return Err(Error::QuadratureCap { nodes: n, estimate: error_estimate, target: tol * abs });
        }
        prev = value;
    }
}
