//! Sampled complex control fields and their diagnostics.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{c, cis, C64, ZERO};

/// Uniform time grid. Controls are sampled at interval midpoints, states
/// live on the `n_steps + 1` boundaries.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub t_start: f64,
    pub t_stop: f64,
    pub n_steps: usize,
}

impl TimeGrid {
    pub fn new(t_start: f64, t_stop: f64, n_steps: usize) -> Result<Self> {
        if n_steps == 0 || !(t_stop > t_start) || !t_start.is_finite() || !t_stop.is_finite() {
            return Err(Error::InvalidParams("time grid needs t_stop > t_start and n_steps ≥ 1".into()));
        }
        Ok(TimeGrid { t_start, t_stop, n_steps })
    }

    /// Grid on `[0, duration]`.
    pub fn span(duration: f64, n_steps: usize) -> Result<Self> {
        Self::new(0.0, duration, n_steps)
    }

    pub fn duration(&self) -> f64 {
        self.t_stop - self.t_start
    }

    pub fn dt(&self) -> f64 {
        self.duration() / self.n_steps as f64
    }

    /// Start of interval `k`.
    pub fn boundary(&self, k: usize) -> f64 {
        self.t_start + self.dt() * k as f64
    }

    pub fn midpoint(&self, k: usize) -> f64 {
        self.t_start + self.dt() * (k as f64 + 0.5)
    }

    pub fn midpoints(&self) -> Vec<f64> {
        (0..self.n_steps).map(|k| self.midpoint(k)).collect()
    }

    pub fn boundaries(&self) -> Vec<f64> {
        (0..=self.n_steps).map(|k| self.boundary(k)).collect()
    }
}

/// Blackman window (a = 0.16) on `[0, duration]`; exactly zero at both ends.
pub fn blackman(t: f64, duration: f64) -> f64 {
    if t <= 0.0 || t >= duration {
        return 0.0;
    }
    let x = 2.0 * PI * t / duration;
    0.42 - 0.5 * Float::cos(x) + 0.08 * Float::cos(2.0 * x)
}

/// Piecewise-constant complex control field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlPulse {
    pub grid: TimeGrid,
    /// ε at interval midpoints (rad/s).
    pub samples: Vec<C64>,
    /// Rotating-frame frequency the field refers to (rad/s).
    pub omega_r: f64,
}

impl ControlPulse {
    pub fn new(grid: TimeGrid, samples: Vec<C64>, omega_r: f64) -> Result<Self> {
        if samples.len() != grid.n_steps {
            return Err(Error::DimensionMismatch { expected: grid.n_steps, got: samples.len() });
        }
        if samples.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(ControlPulse { grid, samples, omega_r })
    }

    pub fn zeros(grid: TimeGrid, omega_r: f64) -> Self {
        ControlPulse { grid, samples: vec![ZERO; grid.n_steps], omega_r }
    }

    pub fn max_amplitude(&self) -> f64 {
        self.samples.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Linear interpolation through the midpoint samples, pinned to zero at
    /// `t_start` and `t_stop`.
    pub fn value_at(&self, t: f64) -> C64 {
        let g = &self.grid;
        if t <= g.t_start || t >= g.t_stop {
            return ZERO;
        }
        let dt = g.dt();
        let n = g.n_steps;
        // node positions: t_start, midpoints..., t_stop
        let x = (t - g.t_start) / dt - 0.5;
        if x < 0.0 {
            let w = (t - g.t_start) / (0.5 * dt);
            return self.samples[0] * w;
        }
        if x >= (n - 1) as f64 {
            let w = (g.t_stop - t) / (0.5 * dt);
            return self.samples[n - 1] * w;
        }
        let k = Float::floor(x) as usize;
        let f = x - k as f64;
        self.samples[k] * (1.0 - f) + self.samples[k + 1] * f
    }
}

/// `E₀ · B(t)` sampled at the grid midpoints (real-valued).
pub fn blackman_pulse(grid: TimeGrid, e0: f64, omega_r: f64) -> Result<ControlPulse> {
    if !(e0 >= 0.0) || !e0.is_finite() {
        return Err(Error::InvalidParams("amplitude E0 must be finite and ≥ 0".into()));
    }
    let duration = grid.duration();
    let samples = grid
        .midpoints()
        .iter()
        .map(|&t| c(e0 * blackman(t - grid.t_start, duration), 0.0))
        .collect();
    Ok(ControlPulse { grid, samples, omega_r })
}

/// Update-shape for Krotov: one inside, Blackman ramps of length `t_rise` at
/// both ends, and exactly zero on the first and last interval.
pub fn flattop_shape(grid: &TimeGrid, t_rise: f64) -> Vec<f64> {
    let n = grid.n_steps;
    let duration = grid.duration();
    let mut s: Vec<f64> = grid
        .midpoints()
        .iter()
        .map(|&t| {
            let t = t - grid.t_start;
            let edge = t.min(duration - t);
            if t_rise <= 0.0 || edge >= t_rise {
                1.0
            } else {
                blackman(edge, 2.0 * t_rise)
            }
        })
        .collect();
    if n > 0 {
        s[0] = 0.0;
        s[n - 1] = 0.0;
    }
    s
}

/// Discrete spectrum `F(δ) = √(dt/n) Σ ε(t_m) e^{−iδ t_m}` on offsets
/// `δ_k = 2πk/(n dt)`, zero bin centered. A tone `e^{+iδ₀t}` peaks at
/// `+δ₀`. Normalized so that `Σ|ε|²dt = Σ|F|²`. Returns (δ in rad/s, |F|).
pub fn pulse_spectrum(pulse: &ControlPulse) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = pulse.samples.len();
    if n < 2 {
        return Err(Error::InvalidParams("spectrum needs at least 2 samples".into()));
    }
    let dt = pulse.grid.dt();
    let norm = Float::sqrt(dt / n as f64);
    let twiddle: Vec<C64> = (0..n).map(|m| cis(-2.0 * PI * m as f64 / n as f64)).collect();
    let k0 = -((n / 2) as i64);
    let mut freqs = Vec::with_capacity(n);
    let mut mags = Vec::with_capacity(n);
    for idx in 0..n {
        let k = k0 + idx as i64;
        let kk = k.rem_euclid(n as i64) as usize;
        let mut acc = ZERO;
        for (m, s) in pulse.samples.iter().enumerate() {
            acc += s * twiddle[(kk * m) % n];
        }
        freqs.push(2.0 * PI * k as f64 / (n as f64 * dt));
        mags.push(acc.norm() * norm);
    }
    Ok((freqs, mags))
}

/// Moving-average smoothed derivative of the unwrapped phase at the grid
/// midpoints (rad/s). `None` where `|ε| < 1e-3 · max|ε|`.
pub fn phase_derivative(pulse: &ControlPulse, smoothing_window: usize) -> Result<Vec<Option<f64>>> {
    if smoothing_window == 0 || smoothing_window.is_multiple_of(2) {
        return Err(Error::InvalidParams("smoothing window must be odd and ≥ 1".into()));
    }
    let n = pulse.samples.len();
    let peak = pulse.max_amplitude();
    if peak == 0.0 {
        return Ok(vec![None; n]);
    }
    let mask: Vec<bool> = pulse.samples.iter().map(|z| z.norm() >= 1e-3 * peak).collect();
    let mut phase = Vec::with_capacity(n);
    let mut prev = 0.0;
    for (k, z) in pulse.samples.iter().enumerate() {
        let raw = z.arg();
        let p = if k == 0 {
            raw
        } else {
            let x = raw - prev + PI;
            let d = x - 2.0 * PI * Float::floor(x / (2.0 * PI)) - PI;
            prev + d
        };
        phase.push(p);
        prev = p;
    }
    let dt = pulse.grid.dt();
    let deriv: Vec<f64> = (0..n)
        .map(|k| {
            if n == 1 {
                0.0
            } else if k == 0 {
                (phase[1] - phase[0]) / dt
            } else if k == n - 1 {
                (phase[n - 1] - phase[n - 2]) / dt
            } else {
                (phase[k + 1] - phase[k - 1]) / (2.0 * dt)
            }
        })
        .collect();
    let half = smoothing_window / 2;
    let out = (0..n)
        .map(|k| {
            if !mask[k] {
                return None;
            }
            let lo = k.saturating_sub(half);
            let hi = (k + half).min(n - 1);
            let (sum, cnt) = (lo..=hi).filter(|&j| mask[j]).fold((0.0, 0usize), |(s, c), j| (s + deriv[j], c + 1));
            Some(sum / cnt as f64)
        })
        .collect();
    Ok(out)
}

/// Default smoothing window: the odd sample count closest to `T/50`.
pub fn default_smoothing_window(grid: &TimeGrid) -> usize {
    let w = (grid.n_steps / 50).max(1);
    if w.is_multiple_of(2) {
        w + 1
    } else {
        w
    }
}
