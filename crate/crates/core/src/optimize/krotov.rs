//! First-order Krotov optimization of a complex piecewise-constant control
//! for a set of simultaneously propagated basis states.
//!
//! The controls enter as `H(ε) = H₀ + Re ε · H_re + Im ε · H_im`. The final
//! states are projected onto a logical basis (interaction picture), giving
//! `Ũ`, and the final-time functional supplies `∂J/∂Ũ*` as the co-state
//! boundary condition. The update on interval `k` is
//! `Δε_k = S_k/λ · Σ_n Im⟨χ_n|∂H|ψ_n⟩`, with the overlap averaged over the
//! two ends of the interval.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Executor;
use crate::gates::functionals::{FunctionalValue, Objective};
use crate::linalg::{c, cis, inner, CMatrix, Csr, C64, ZERO};
use crate::propagate::{propagate, Generator, LinearGenerator, PropagatorConfig, Stepper};
use crate::pulse::{flattop_shape, ControlPulse};
use crate::spectrum::DressedFrame;

/// States `|φ_j⟩` and energies `E_j` defining `Ũ_jk = e^{iE_jT}⟨φ_j|ψ_k(T)⟩`.
#[derive(Debug, Clone, PartialEq)]
pub struct LogicalBasis {
    pub vectors: Vec<Vec<C64>>,
    pub energies: Vec<f64>,
}

impl LogicalBasis {
    pub fn from_frame(frame: &DressedFrame) -> Self {
        LogicalBasis { vectors: frame.logical_states(), energies: frame.logical_energies().to_vec() }
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn project(&self, states: &[Vec<C64>], duration: f64) -> CMatrix {
        let d = self.len();
        CMatrix::from_fn(d, states.len(), |j, k| inner(&self.vectors[j], &states[k]) * cis(self.energies[j] * duration))
    }

    /// `χ_k(T) = −Σ_j G_jk e^{−iE_jT} |φ_j⟩` for `G = ∂J/∂Ũ*`.
    pub fn costates(&self, grad: &CMatrix, duration: f64) -> Vec<Vec<C64>> {
        let n = self.vectors.first().map_or(0, |v| v.len());
        (0..grad.ncols())
            .map(|k| {
                let mut chi = vec![ZERO; n];
                for j in 0..self.len() {
                    let w = -grad[(j, k)] * cis(-self.energies[j] * duration);
                    for (x, p) in chi.iter_mut().zip(&self.vectors[j]) {
                        *x += w * p;
                    }
                }
                chi
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KrotovOptions {
    /// Inverse step size (seconds).
    pub lambda_a: f64,
    pub iter_max: usize,
    /// Ramp length of the update shape (seconds).
    pub t_rise: f64,
    /// Step-size doublings allowed per iteration before giving up.
    pub max_retries: usize,
    /// Stop once an iteration improves the functional by less than this.
    pub min_improvement: f64,
    /// Allowed increase that still counts as monotonic.
    pub slack: f64,
}

impl Default for KrotovOptions {
    fn default() -> Self {
        KrotovOptions {
            lambda_a: 1.0 / (2.0 * core::f64::consts::PI * 10e6),
            iter_max: 100,
            t_rise: 2e-9,
            max_retries: 20,
            min_improvement: 1e-7,
            slack: 1e-10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iter: usize,
    pub total: f64,
    pub main: f64,
    pub loss_term: f64,
    pub lambda_a: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KrotovResult {
    pub pulse: ControlPulse,
    pub u_tilde: CMatrix,
    pub value: FunctionalValue,
    pub log: Vec<IterationRecord>,
    pub lambda_a: f64,
}

/// Everything Krotov needs besides the pulse.
pub struct KrotovProblem<'a> {
    pub generator: &'a Generator,
    pub basis: &'a LogicalBasis,
    pub objective: &'a Objective,
    pub cfg: PropagatorConfig,
}

impl<'a> KrotovProblem<'a> {
    fn forward_all<E: Executor>(&self, pulse: &ControlPulse, exec: &E) -> Result<Vec<Vec<C64>>> {
        exec.map(&self.basis.vectors, |v| propagate(self.generator, pulse, v, &self.cfg)).into_iter().collect()
    }

    /// `Ũ` and functional for `pulse`.
    pub fn evaluate<E: Executor>(&self, pulse: &ControlPulse, exec: &E) -> Result<(CMatrix, FunctionalValue)> {
        let finals = self.forward_all(pulse, exec)?;
        let u = self.basis.project(&finals, pulse.grid.duration());
        let v = self.objective.evaluate(&u)?;
        Ok((u, v))
    }

    /// Co-states at every grid boundary for the given final gate.
    fn backward_all<E: Executor>(&self, pulse: &ControlPulse, u: &CMatrix, exec: &E) -> Result<Vec<Vec<Vec<C64>>>> {
        let (_, grad) = self.objective.gradient(u)?;
        let chis = self.basis.costates(&grad, pulse.grid.duration());
        let back = self.generator.backward();
        let n = pulse.grid.n_steps;
        let dt = pulse.grid.dt();
        let eps_max = pulse.max_amplitude();
        let cfg = self.cfg;
        exec.map(&chis, |chi| {
            let mut stepper = Stepper::new(&back, dt, eps_max, &cfg);
            let mut v = chi.clone();
            let mut out = vec![Vec::new(); n + 1];
            out[n] = v.clone();
            for k in (0..n).rev() {
                stepper.step(pulse.samples[k], &mut v)?;
                out[k] = v.clone();
            }
            Ok(out)
        })
        .into_iter()
        .collect()
    }

    /// `dJ/dRe ε_k + i dJ/dIm ε_k` for every interval.
    pub fn gradient<E: Executor>(&self, pulse: &ControlPulse, exec: &E) -> Result<Vec<C64>> {
        let (u, _) = self.evaluate(pulse, exec)?;
        let chis = self.backward_all(pulse, &u, exec)?;
        let n = pulse.grid.n_steps;
        let dt = pulse.grid.dt();
        let mut stepper = Stepper::new(self.generator, dt, pulse.max_amplitude(), &self.cfg);
        let mut psis = self.basis.vectors.clone();
        let mut scratch = Scratch::new(self.generator.dim());
        let mut grad = Vec::with_capacity(n);
        for k in 0..n {
            let mut a = ZERO;
            for (m, psi) in psis.iter_mut().enumerate() {
                let start = scratch.couplings(self.generator, &chis[m][k], psi);
                stepper.step(pulse.samples[k], psi)?;
                let end = scratch.couplings(self.generator, &chis[m][k + 1], psi);
                a += c(0.5 * (start.0 + end.0).im, 0.5 * (start.1 + end.1).im);
            }
            grad.push(a * (-2.0 * dt));
        }
        Ok(grad)
    }
}

struct Scratch {
    buf: Vec<C64>,
}

impl Scratch {
    fn new(n: usize) -> Self {
        Scratch { buf: vec![ZERO; n] }
    }

    fn apply(&mut self, m: &Csr, chi: &[C64], psi: &[C64]) -> C64 {
        m.matvec(psi, &mut self.buf);
        inner(chi, &self.buf)
    }

    /// `(⟨χ|H_re|ψ⟩, ⟨χ|H_im|ψ⟩)`
    fn couplings(&mut self, g: &Generator, chi: &[C64], psi: &[C64]) -> (C64, C64) {
        (self.apply(&g.ctrl_re, chi, psi), self.apply(&g.ctrl_im, chi, psi))
    }
}

/// One sequential sweep: returns the updated pulse and final states.
fn sweep(
    problem: &KrotovProblem,
    pulse: &ControlPulse,
    chis: &[Vec<Vec<C64>>],
    shape: &[f64],
    lambda_a: f64,
) -> Result<(ControlPulse, Vec<Vec<C64>>)> {
    let n = pulse.grid.n_steps;
    let dt = pulse.grid.dt();
    let g = problem.generator;
    let mut bound = 2.0 * pulse.max_amplitude().max(1.0 / lambda_a);
    let mut old_stepper = Stepper::new(g, dt, pulse.max_amplitude(), &problem.cfg);
    let mut new_stepper = Stepper::new(g, dt, bound, &problem.cfg);
    let mut psis = problem.basis.vectors.clone();
    let mut scratch = Scratch::new(g.dim());
    let mut tmp = vec![ZERO; g.dim()];
    let mut samples = pulse.samples.clone();
    for k in 0..n {
        let mut a = ZERO;
        if shape[k] != 0.0 {
            for (m, psi) in psis.iter().enumerate() {
                let start = scratch.couplings(g, &chis[m][k], psi);
                tmp.copy_from_slice(psi);
                old_stepper.step(pulse.samples[k], &mut tmp)?;
                let end = scratch.couplings(g, &chis[m][k + 1], &tmp);
                a += c(0.5 * (start.0 + end.0).im, 0.5 * (start.1 + end.1).im);
            }
        }
        let eps = pulse.samples[k] + a * (shape[k] / lambda_a);
        if !(eps.re.is_finite() && eps.im.is_finite()) {
            return Err(Error::NonFinite);
        }
        if eps.norm() > bound {
            bound = 2.0 * eps.norm();
            new_stepper = Stepper::new(g, dt, bound, &problem.cfg);
        }
        samples[k] = eps;
        for psi in psis.iter_mut() {
            new_stepper.step(eps, psi)?;
        }
    }
    Ok((ControlPulse::new(pulse.grid, samples, pulse.omega_r)?, psis))
}

/// Run Krotov iterations from `start`. The logged functional never
/// increases by more than `opts.slack`; if it would, or if the updated pulse
/// cannot be propagated, `λ_a` is doubled and the iteration retried.
pub fn krotov<E: Executor>(problem: &KrotovProblem, start: &ControlPulse, opts: &KrotovOptions, exec: &E) -> Result<KrotovResult> {
    if problem.basis.len() != problem.objective.dim().unwrap_or(problem.basis.len()) {
        return Err(Error::DimensionMismatch { expected: problem.objective.dim().unwrap_or(0), got: problem.basis.len() });
    }
    if !(opts.lambda_a > 0.0) {
        return Err(Error::InvalidParams("lambda_a must be positive".into()));
    }
    let shape = flattop_shape(&start.grid, opts.t_rise);
    let duration = start.grid.duration();
    let mut pulse = start.clone();
    let (mut u, mut value) = problem.evaluate(&pulse, exec)?;
    let mut lambda_a = opts.lambda_a;
    let mut log = vec![IterationRecord { iter: 0, total: value.total, main: value.main, loss_term: value.loss_term, lambda_a }];
    for iter in 1..=opts.iter_max {
        let chis = problem.backward_all(&pulse, &u, exec)?;
        let mut retries = 0;
        let (new_pulse, new_u, new_value) = loop {
            let attempt = sweep(problem, &pulse, &chis, &shape, lambda_a).and_then(|(p, finals)| {
                let nu = problem.basis.project(&finals, duration);
                let nv = problem.objective.evaluate(&nu)?;
                Ok((p, nu, nv))
            });
            match attempt {
                Ok(step) if step.2.total <= value.total + opts.slack => break step,
                // an oversized update that breaks propagation is rejected like an uphill one
                Ok(_) | Err(Error::Convergence { .. } | Error::NonFinite | Error::DegenerateProjection(_)) => {}
                Err(e) => return Err(e),
            }
            retries += 1;
            if retries > opts.max_retries {
                return Err(Error::NonMonotonic { iteration: iter, retries: opts.max_retries });
            }
            lambda_a *= 2.0;
        };
        let improvement = value.total - new_value.total;
        pulse = new_pulse;
        u = new_u;
        value = new_value;
        log.push(IterationRecord { iter, total: value.total, main: value.main, loss_term: value.loss_term, lambda_a });
        if improvement < opts.min_improvement {
            break;
        }
    }
    Ok(KrotovResult { pulse, u_tilde: u, value, log, lambda_a })
}
