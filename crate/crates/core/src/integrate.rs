//! Adaptive Runge-Kutta-Fehlberg 7(8) integration, generic over [`Real`].
//!
//! The error norm is measured against the running peak of each component, so a
//! quantity that stays small for the whole run (a displacement, say) is resolved
//! relative to its own size rather than to the size of unrelated components.

use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::real::{DoubleDouble, Real};

const STAGES: usize = 13;

/// Nodes as numerator/denominator pairs.
const C: [(f64, f64); STAGES] = [
    (0.0, 1.0),
    (2.0, 27.0),
    (1.0, 9.0),
    (1.0, 6.0),
    (5.0, 12.0),
    (1.0, 2.0),
    (5.0, 6.0),
    (1.0, 6.0),
    (2.0, 3.0),
    (1.0, 3.0),
    (1.0, 1.0),
    (0.0, 1.0),
    (1.0, 1.0),
];

const A: [&[(f64, f64)]; STAGES] = [
    &[],
    &[(2.0, 27.0)],
    &[(1.0, 36.0), (1.0, 12.0)],
    &[(1.0, 24.0), (0.0, 1.0), (1.0, 8.0)],
    &[(5.0, 12.0), (0.0, 1.0), (-25.0, 16.0), (25.0, 16.0)],
    &[(1.0, 20.0), (0.0, 1.0), (0.0, 1.0), (1.0, 4.0), (1.0, 5.0)],
    &[(-25.0, 108.0), (0.0, 1.0), (0.0, 1.0), (125.0, 108.0), (-65.0, 27.0), (125.0, 54.0)],
    &[(31.0, 300.0), (0.0, 1.0), (0.0, 1.0), (0.0, 1.0), (61.0, 225.0), (-2.0, 9.0), (13.0, 900.0)],
    &[(2.0, 1.0), (0.0, 1.0), (0.0, 1.0), (-53.0, 6.0), (704.0, 45.0), (-107.0, 9.0), (67.0, 90.0), (3.0, 1.0)],
    &[
        (-91.0, 108.0),
        (0.0, 1.0),
        (0.0, 1.0),
        (23.0, 108.0),
        (-976.0, 135.0),
        (311.0, 54.0),
        (-19.0, 60.0),
        (17.0, 6.0),
        (-1.0, 12.0),
    ],
    &[
        (2383.0, 4100.0),
        (0.0, 1.0),
        (0.0, 1.0),
        (-341.0, 164.0),
        (4496.0, 1025.0),
        (-301.0, 82.0),
        (2133.0, 4100.0),
        (45.0, 82.0),
        (45.0, 164.0),
        (18.0, 41.0),
    ],
    &[
        (3.0, 205.0),
        (0.0, 1.0),
        (0.0, 1.0),
        (0.0, 1.0),
        (0.0, 1.0),
        (-6.0, 41.0),
        (-3.0, 205.0),
        (-3.0, 41.0),
        (3.0, 41.0),
        (6.0, 41.0),
        (0.0, 1.0),
    ],
    &[
        (-1777.0, 4100.0),
        (0.0, 1.0),
        (0.0, 1.0),
        (-341.0, 164.0),
        (4496.0, 1025.0),
        (-289.0, 82.0),
        (2193.0, 4100.0),
        (51.0, 82.0),
        (33.0, 164.0),
        (12.0, 41.0),
        (0.0, 1.0),
        (1.0, 1.0),
    ],
];

/// Eighth-order weights.
const B: [(f64, f64); STAGES] = [
    (0.0, 1.0),
    (0.0, 1.0),
    (0.0, 1.0),
    (0.0, 1.0),
    (0.0, 1.0),
    (34.0, 105.0),
    (9.0, 35.0),
    (9.0, 35.0),
    (9.0, 280.0),
    (9.0, 280.0),
    (0.0, 1.0),
    (41.0, 840.0),
    (41.0, 840.0),
];

/// Butcher tableau converted once into the working precision.
pub struct Tableau<T> {
    c: [T; STAGES],
    a: Vec<Vec<(usize, T)>>,
    b: Vec<(usize, T)>,
    err: T,
}

fn ratio<T: Real>((n, d): (f64, f64)) -> T {
    T::from_f64(n) / T::from_f64(d)
}

impl<T: Real> Tableau<T> {
    fn build() -> Self {
        let sparse = |row: &[(f64, f64)]| {
            row.iter()
                .enumerate()
                .filter(|(_, &(n, _))| n != 0.0)
                .map(|(i, &r)| (i, ratio::<T>(r)))
                .collect::<Vec<_>>()
        };
        Tableau {
            c: C.map(ratio),
            a: A.iter().map(|row| sparse(row)).collect(),
            b: sparse(&B),
            err: ratio((41.0, 840.0)),
        }
    }
}

/// Per-precision tableau cache.
pub trait HasTableau: Real {
    fn tableau() -> &'static Tableau<Self>;
}

impl HasTableau for f64 {
    fn tableau() -> &'static Tableau<f64> {
        static T: OnceLock<Tableau<f64>> = OnceLock::new();
        T.get_or_init(Tableau::build)
    }
}

impl HasTableau for DoubleDouble {
    fn tableau() -> &'static Tableau<DoubleDouble> {
        static T: OnceLock<Tableau<DoubleDouble>> = OnceLock::new();
        T.get_or_init(Tableau::build)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, serde::Serialize)]
pub struct Stats {
    pub steps: usize,
    pub rejected: usize,
    pub evaluations: usize,
    /// Largest accepted normalized error estimate.
    pub max_error: f64,
}

/// Tolerances and limits for a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Settings {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
    pub initial_step: f64,
    pub max_step: f64,
}

impl Default for Settings {
    fn default() -> Self {
        Settings { rtol: 1e-12, atol: 1e-12, max_steps: 1_000_000, initial_step: 1e-2, max_step: f64::INFINITY }
    }
}

impl Settings {
    pub fn with_tol(tol: f64) -> Self {
        Settings { rtol: tol, atol: tol, ..Default::default() }
    }
}

/// Stepper state: carries the step size and component peaks across calls.
pub struct Rkf78<T: HasTableau> {
    pub settings: Settings,
    pub stats: Stats,
    step: Option<f64>,
    peak: Vec<f64>,
    k: Vec<Vec<T>>,
    scratch: Vec<T>,
    big: Vec<T>,
    half: Vec<T>,
}

impl<T: HasTableau> Rkf78<T> {
    pub fn new(settings: Settings) -> Self {
        Rkf78 {
            settings,
            stats: Stats::default(),
            step: None,
            peak: Vec::new(),
            k: Vec::new(),
            scratch: Vec::new(),
            big: Vec::new(),
            half: Vec::new(),
        }
    }

    fn prepare(&mut self, y: &[T]) {
        let n = y.len();
        if self.k.len() != STAGES || self.k[0].len() != n {
            self.k = vec![vec![T::zero(); n]; STAGES];
            self.scratch = vec![T::zero(); n];
            self.big = vec![T::zero(); n];
            self.half = vec![T::zero(); n];
        }
        if self.peak.len() != n {
            self.peak = vec![0.0; n];
        }
        for (p, v) in self.peak.iter_mut().zip(y) {
            *p = p.max(v.to_f64().abs());
        }
    }

    /// One step of size `h` from `(t, y)`; writes the solution into `out` and
    /// returns the raw error estimate per component through the stage buffers.
    fn attempt<F>(&mut self, f: &mut F, t: T, y: &[T], h: T, out: &mut [T]) -> Result<f64>
    where
        F: FnMut(T, &[T], &mut [T]) -> Result<()>,
    {
        let tab = T::tableau();
        let n = y.len();
        for s in 0..STAGES {
            self.scratch.copy_from_slice(y);
            for &(j, a) in &tab.a[s] {
                let ha = h * a;
                for i in 0..n {
                    self.scratch[i] += ha * self.k[j][i];
                }
            }
            let (ks, _) = self.k.split_at_mut(s + 1);
            f(t + h * tab.c[s], &self.scratch, &mut ks[s])?;
        }
        self.stats.evaluations += STAGES;
        out.copy_from_slice(y);
        for &(j, b) in &tab.b {
            let hb = h * b;
            for (o, &k) in out.iter_mut().zip(&self.k[j]) {
                *o += hb * k;
            }
        }
        let mut err = 0.0f64;
        let herr = h * tab.err;
        for i in 0..n {
            let e = (herr * (self.k[0][i] + self.k[10][i] - self.k[11][i] - self.k[12][i])).to_f64().abs();
            let scale = self.settings.atol + self.settings.rtol * self.peak[i].max(out[i].to_f64().abs());
            err = err.max(e / scale);
        }
        if !out.iter().all(|v| v.is_finite()) || !err.is_finite() {
            return Ok(f64::INFINITY);
        }
        Ok(err)
    }

    /// A full step and two half steps; the half-step result goes to `out`. The
    /// error is the larger of the embedded estimates and the full/half difference
    /// (the embedded one vanishes for state-independent slopes).
    fn doubled_attempt<F>(&mut self, f: &mut F, t: T, y: &[T], h: T, out: &mut [T]) -> Result<f64>
    where
        F: FnMut(T, &[T], &mut [T]) -> Result<()>,
    {
        let mut big = std::mem::take(&mut self.big);
        let mut half = std::mem::take(&mut self.half);
        let result = (|| {
            let e_big = self.attempt(f, t, y, h, &mut big)?;
            let h2 = h * 0.5;
            let e1 = self.attempt(f, t, y, h2, &mut half)?;
            let e2 = self.attempt(f, t + h2, &half, h2, out)?;
            let mut diff = 0.0f64;
            for i in 0..y.len() {
                let scale = self.settings.atol + self.settings.rtol * self.peak[i].max(out[i].to_f64().abs());
                diff = diff.max((out[i] - big[i]).to_f64().abs() / scale);
            }
            let err = e_big.max(e1).max(e2).max(diff / 32.0);
            Ok(if err.is_finite() { err } else { f64::INFINITY })
        })();
        self.big = big;
        self.half = half;
        result
    }

    fn min_step(t: T) -> f64 {
        64.0 * T::EPSILON * t.to_f64().abs().max(1.0)
    }

    /// Takes one accepted step towards `t_end`; returns the step actually taken.
    fn accepted_step<F>(&mut self, f: &mut F, t: T, y: &mut [T], t_end: T, buf: &mut [T]) -> Result<T>
    where
        F: FnMut(T, &[T], &mut [T]) -> Result<()>,
    {
        let remaining = (t_end - t).to_f64();
        let dir = remaining.signum();
        loop {
            let mut h = self.step.unwrap_or(self.settings.initial_step).abs().min(self.settings.max_step);
            let last = h >= remaining.abs() * (1.0 - 1e-12);
            let hs = if last { t_end - t } else { T::from_f64(dir * h) };
            if last {
                h = remaining.abs();
            }
            let err = self.doubled_attempt(f, t, y, hs, buf)?;
            if err <= 1.0 {
                self.stats.steps += 1;
                self.stats.max_error = self.stats.max_error.max(err);
                y.copy_from_slice(buf);
                for (p, v) in self.peak.iter_mut().zip(y.iter()) {
                    *p = p.max(v.to_f64().abs());
                }
                let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-1.0 / 8.0)).clamp(0.2, 5.0) };
                // A step clipped to hit t_end says little about the natural size.
                if !last || self.step.is_none() {
                    self.step = Some(h * factor);
                }
                return Ok(hs);
            }
            self.stats.rejected += 1;
            let factor = if err.is_finite() { (0.9 * err.powf(-1.0 / 8.0)).clamp(0.2, 1.0) } else { 0.2 };
            let next = h * factor;
            if next < Self::min_step(t) {
                if !err.is_finite() {
                    return Err(Error::NonFinite { t: t.to_f64() });
                }
                return Err(Error::StepUnderflow { t: t.to_f64(), step: next });
            }
            self.step = Some(next);
        }
    }

    /// Integrates `y' = f(t, y)` from `t0` to `t1` in place.
    pub fn integrate<F>(&mut self, mut f: F, t0: T, t1: T, y: &mut [T]) -> Result<()>
    where
        F: FnMut(T, &[T], &mut [T]) -> Result<()>,
    {
        self.integrate_observed(&mut f, t0, t1, y, |_, _| {})
    }

    /// As [`Self::integrate`], calling `observe(t, y)` after every accepted step.
    pub fn integrate_observed<F, O>(&mut self, f: &mut F, t0: T, t1: T, y: &mut [T], mut observe: O) -> Result<()>
    where
        F: FnMut(T, &[T], &mut [T]) -> Result<()>,
        O: FnMut(T, &[T]),
    {
        self.prepare(y);
        let mut buf = vec![T::zero(); y.len()];
        let mut t = t0;
        while (t1 - t).to_f64() != 0.0 {
            if self.stats.steps >= self.settings.max_steps {
                return Err(Error::StepLimit { steps: self.stats.steps, t: t.to_f64() });
            }
            let h = self.accepted_step(f, t, y, t1, &mut buf)?;
            t = if (t1 - (t + h)).to_f64() * (t1 - t0).to_f64() <= 0.0 { t1 } else { t + h };
            observe(t, y);
        }
        Ok(())
    }

    /// Integrates forward until `event(y_old, y_new)` reports a crossing, then
    /// locates the zero of `g(y)` inside the last step by re-stepping from its start.
    ///
    /// Returns the crossing time and state.
    pub fn integrate_to_event<F, E, G, O>(
        &mut self,
        f: &mut F,
        t0: T,
        y: &mut [T],
        mut crossed: E,
        g: G,
        root_tol: f64,
        mut observe: O,
    ) -> Result<T>
    where
        F: FnMut(T, &[T], &mut [T]) -> Result<()>,
        E: FnMut(&[T], &[T]) -> bool,
        G: Fn(&[T]) -> T,
        O: FnMut(T, &[T]),
    {
        self.prepare(y);
        let n = y.len();
        let mut buf = vec![T::zero(); n];
        let mut prev = vec![T::zero(); n];
        let mut t = t0;
        let far = T::from_f64(f64::MAX / 4.0);
        loop {
            if self.stats.steps >= self.settings.max_steps {
                return Err(Error::NoReturn {
                    steps: self.stats.steps,
                    t: t.to_f64(),
                    x: y[0].to_f64(),
                    y: y.get(1).map_or(0.0, |v| v.to_f64()),
                });
            }
            prev.copy_from_slice(y);
            let h = self.accepted_step(f, t, y, far, &mut buf)?;
            if crossed(&prev, y) {
                let tau = self.locate(f, t, &prev, h, &g, root_tol, y)?;
                let tc = t + tau;
                observe(tc, y);
                return Ok(tc);
            }
            t += h;
            observe(t, y);
        }
    }

    /// Illinois iteration on the step size from `(t, y0)`; leaves the state at the root in `out`.
    #[allow(clippy::too_many_arguments)]
    fn locate<F, G>(&mut self, f: &mut F, t: T, y0: &[T], h: T, g: &G, root_tol: f64, out: &mut [T]) -> Result<T>
    where
        F: FnMut(T, &[T], &mut [T]) -> Result<()>,
        G: Fn(&[T]) -> T,
    {
        let mut buf = vec![T::zero(); y0.len()];
        let mut lo = T::zero();
        let mut g_lo = g(y0);
        let mut hi = h;
        let mut g_hi = g(out);
        let mut side = 0i8;
        for _ in 0..200 {
            if g_hi.abs().to_f64() <= root_tol {
                return Ok(hi);
            }
            let mut mid = (lo * g_hi - hi * g_lo) / (g_hi - g_lo);
            if !(mid.to_f64().is_finite()) || (mid - lo).to_f64() * (mid - hi).to_f64() > 0.0 {
                mid = (lo + hi) * 0.5;
            }
            self.attempt(f, t, y0, mid, &mut buf)?;
            let g_mid = g(&buf);
            if g_mid.abs().to_f64() <= root_tol || ((hi - lo).abs().to_f64() <= 4.0 * T::EPSILON * t.to_f64().abs().max(1.0)) {
                out.copy_from_slice(&buf);
                return Ok(mid);
            }
            if g_mid.signum() == g_hi.signum() {
                hi = mid;
                g_hi = g_mid;
                if side == 1 {
                    g_lo = g_lo * 0.5;
                }
                side = 1;
            } else {
                lo = mid;
                g_lo = g_mid;
                if side == -1 {
                    g_hi = g_hi * 0.5;
                }
                side = -1;
            }
            out.copy_from_slice(&buf);
        }
        Ok(hi)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tableau_rows_sum_to_nodes() {
        for (row, c) in A.iter().zip(C) {
            let sum: f64 = row.iter().map(|(n, d)| n / d).sum();
            assert!((sum - c.0 / c.1).abs() < 1e-14, "{row:?}");
        }
        let total: f64 = B.iter().map(|(n, d)| n / d).sum();
        assert!((total - 1.0).abs() < 1e-15);
    }

    #[test]
    fn exponential_decay() {
        let mut rk = Rkf78::<f64>::new(Settings::with_tol(1e-13));
        let mut y = [1.0];
        rk.integrate(|_, y, dy| { dy[0] = -y[0]; Ok(()) }, 0.0, 3.0, &mut y).unwrap();
        assert!((y[0] - (-3.0f64).exp()).abs() < 1e-13);
    }

    #[test]
    fn backward_integration() {
        let mut rk = Rkf78::<f64>::new(Settings::with_tol(1e-13));
        let mut y = [1.0];
        rk.integrate(|_, y, dy| { dy[0] = y[0]; Ok(()) }, 0.0, -2.0, &mut y).unwrap();
        assert!((y[0] - (-2.0f64).exp()).abs() < 1e-13);
    }

    #[test]
    fn rotation_in_extended_precision() {
        let mut rk = Rkf78::<DoubleDouble>::new(Settings::with_tol(1e-28));
        let mut y = [DoubleDouble::from(1.0), DoubleDouble::from(0.0)];
        let two_pi = DoubleDouble::pi() * 2.0;
        rk.integrate(|_, y, dy| { dy[0] = -y[1]; dy[1] = y[0]; Ok(()) }, DoubleDouble::from(0.0), two_pi, &mut y)
            .unwrap();
        assert!((y[0] - 1.0).abs().to_f64() < 1e-26, "{:?}", y[0]);
        assert!(y[1].abs().to_f64() < 1e-26);
    }

    #[test]
    fn event_on_rotation_returns_after_full_turn() {
        let mut rk = Rkf78::<f64>::new(Settings::with_tol(1e-13));
        let mut y = [0.2, 0.0];
        let mut f = |_: f64, y: &[f64], dy: &mut [f64]| {
            dy[0] = -y[1];
            dy[1] = y[0];
            Ok(())
        };
        let t = rk
            .integrate_to_event(&mut f, 0.0, &mut y, |a, b| a[1] < 0.0 && b[1] >= 0.0 && b[0] > 0.0, |y| y[1], 1e-15, |_, _| {})
            .unwrap();
        assert!((t - 2.0 * std::f64::consts::PI).abs() < 1e-11);
        assert!((y[0] - 0.2).abs() < 1e-12);
    }

    #[test]
    fn step_cap_reports_no_return() {
        let settings = Settings { max_steps: 50, ..Settings::with_tol(1e-12) };
        let mut rk = Rkf78::<f64>::new(settings);
        let mut y = [1.0, 0.0];
        let mut f = |_: f64, _: &[f64], dy: &mut [f64]| {
            dy[0] = 1.0;
            dy[1] = 0.0;
            Ok(())
        };
        let err = rk.integrate_to_event(&mut f, 0.0, &mut y, |_, _| false, |y| y[1], 1e-12, |_, _| {}).unwrap_err();
        assert!(matches!(err, Error::NoReturn { .. }), "{err}");
    }
}
