//! The three optimization stages and their composition.
//!
//! Stage 1 scans Blackman pulses over amplitude and drive frequency, stage 2
//! refines the best candidates with a simplex over the same two numbers, and
//! stage 3 lets Krotov's method reshape the (now complex) pulse freely. The
//! final pulse is re-evaluated with the full master equation.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Executor;
use crate::gates::fidelity::{avg_gate_error, closest_unitary, j_sm, pop_loss};
use crate::gates::functionals::Objective;
use crate::gates::report::GateReport;
use crate::gates::weyl::{gate_concurrence, local_invariants, weyl_unchecked, LocalInvariants};
use crate::linalg::{matrix_serde, unitarity_deviation, CMatrix};
use crate::model::{build_operators, OperatorSet, SystemParams};
use crate::optimize::krotov::{krotov, IterationRecord, KrotovOptions, KrotovProblem, LogicalBasis};
use crate::optimize::simplex::{nelder_mead, SimplexOptions};
use crate::propagate::{evolve_logical_basis, evolve_logical_map, Generator, LindbladGenerator, Mode, PropagatorConfig};
use crate::pulse::{blackman_pulse, ControlPulse, TimeGrid};
use crate::spectrum::diagonalize_and_assign;
use crate::units::{ghz, mhz, ns};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GoalKind {
    /// Drive towards a perfect entangler.
    MaximizeEntanglement,
    /// Drive towards a local (non-entangling) gate.
    MinimizeEntanglement,
    SpecificGate {
        #[serde(with = "matrix_serde")]
        target: CMatrix,
        /// Only the local-equivalence class of the target matters.
        #[serde(default)]
        up_to_local: bool,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizationGoal {
    #[serde(flatten)]
    pub kind: GoalKind,
    /// Gate duration (seconds).
    pub duration: f64,
}

impl OptimizationGoal {
    pub fn new(kind: GoalKind, duration: f64) -> Result<Self> {
        let goal = OptimizationGoal { kind, duration };
        goal.validate()?;
        Ok(goal)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.duration > 0.0) || !self.duration.is_finite() {
            return Err(Error::InvalidParams("gate duration must be positive".into()));
        }
        if let GoalKind::SpecificGate { target, .. } = &self.kind {
            if target.shape() != (4, 4) {
                return Err(Error::DimensionMismatch { expected: 4, got: target.nrows() });
            }
            let dev = unitarity_deviation(target);
            if !(dev <= 1e-8) {
                return Err(Error::NotUnitary(dev));
            }
        }
        Ok(())
    }

    /// Concurrence the scan functional aims for.
    pub fn target_concurrence(&self) -> f64 {
        match &self.kind {
            GoalKind::MaximizeEntanglement => 1.0,
            GoalKind::MinimizeEntanglement => 0.0,
            GoalKind::SpecificGate { target, .. } => gate_concurrence(&weyl_unchecked(target)),
        }
    }

    pub fn target(&self) -> Option<&CMatrix> {
        match &self.kind {
            GoalKind::SpecificGate { target, .. } => Some(target),
            _ => None,
        }
    }

    /// Differentiable functional used by Krotov.
    pub fn objective(&self) -> Objective {
        match &self.kind {
            GoalKind::MaximizeEntanglement => Objective::PerfectEntangler,
            GoalKind::MinimizeEntanglement => Objective::LocalInvariants(identity_class()),
            GoalKind::SpecificGate { target, up_to_local: true } => {
                Objective::LocalInvariants(local_invariants(target).unwrap_or(identity_class()))
            }
            GoalKind::SpecificGate { target, up_to_local: false } => Objective::Overlap(target.clone()),
        }
    }

    pub fn label(&self) -> String {
        match &self.kind {
            GoalKind::MaximizeEntanglement => "pe".to_string(),
            GoalKind::MinimizeEntanglement => "sq".to_string(),
            GoalKind::SpecificGate { .. } => "gate".to_string(),
        }
    }
}

/// Invariants of the identity (and every local gate).
fn identity_class() -> LocalInvariants {
    LocalInvariants { g1: 1.0, g2: 0.0, g3: 3.0 }
}

/// `1 − (1 − |C − C*|)(1 − ε_pop)`; reduces to `1 − C(1 − ε_pop)` for
/// `C* = 1` and `1 − (1 − C)(1 − ε_pop)` for `C* = 0`.
pub fn scan_functional(concurrence: f64, target_concurrence: f64, pop_loss: f64) -> f64 {
    1.0 - (1.0 - (concurrence - target_concurrence).abs()) * (1.0 - pop_loss)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Stage1Config {
    /// Drive frequencies sampled in total, spread over the three centers.
    pub n_freq_samples: usize,
    pub n_amplitudes: usize,
    pub e0_min_mhz: f64,
    pub e0_max_mhz: f64,
    /// Half-width of the sampling window around each center.
    pub freq_halfwidth_ghz: f64,
    pub seed: u64,
}

impl Default for Stage1Config {
    fn default() -> Self {
        Stage1Config { n_freq_samples: 60, n_amplitudes: 30, e0_min_mhz: 10.0, e0_max_mhz: 900.0, freq_halfwidth_ghz: 0.5, seed: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Stage2Config {
    /// Stage-1 candidates refined.
    pub top_k: usize,
    pub max_evals: usize,
    /// Simplex diameter tolerance relative to the initial steps.
    pub x_tol: f64,
    pub f_tol: f64,
    /// Initial amplitude step relative to the starting amplitude.
    pub e0_step_rel: f64,
    pub omega_step_mhz: f64,
}

impl Default for Stage2Config {
    fn default() -> Self {
        Stage2Config { top_k: 3, max_evals: 100, x_tol: 1e-3, f_tol: 1e-6, e0_step_rel: 0.1, omega_step_mhz: 20.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Stage3Config {
    pub iter_max: usize,
    pub lambda_a_ns: f64,
    pub t_rise_ns: f64,
    pub max_retries: usize,
    pub min_improvement: f64,
}

impl Default for Stage3Config {
    fn default() -> Self {
        Stage3Config {
            iter_max: 50,
            lambda_a_ns: 1e9 / (2.0 * PI * 10e6),
            t_rise_ns: 2.0,
            max_retries: 20,
            min_improvement: 1e-7,
        }
    }
}

impl Stage3Config {
    pub fn krotov_options(&self) -> KrotovOptions {
        KrotovOptions {
            lambda_a: ns(self.lambda_a_ns),
            iter_max: self.iter_max,
            t_rise: ns(self.t_rise_ns),
            max_retries: self.max_retries,
            min_improvement: self.min_improvement,
            slack: 1e-10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluationConfig {
    /// Evaluate the final pulse with the master equation.
    pub lindblad: bool,
    /// Also report the error with dissipation switched off.
    pub no_dissipation: bool,
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        EvaluationConfig { lindblad: true, no_dissipation: true }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Pulse sampling interval.
    pub time_step_ns: f64,
    pub stage1: Stage1Config,
    pub stage2: Stage2Config,
    pub stage3: Stage3Config,
    pub evaluation: EvaluationConfig,
    pub propagator: PropagatorConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            time_step_ns: 0.1,
            stage1: Stage1Config::default(),
            stage2: Stage2Config::default(),
            stage3: Stage3Config::default(),
            evaluation: EvaluationConfig::default(),
            propagator: PropagatorConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn grid(&self, duration: f64) -> Result<TimeGrid> {
        if !(self.time_step_ns > 0.0) {
            return Err(Error::InvalidParams("time_step_ns must be positive".into()));
        }
        let n = Float::ceil(duration / ns(self.time_step_ns) - 1e-9).max(2.0) as usize;
        TimeGrid::span(duration, n)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageResult {
    pub pulse: ControlPulse,
    /// Value of the stage's own functional.
    pub value: f64,
    /// Blackman amplitude (stages 1 and 2) or peak amplitude (stage 3), rad/s.
    pub e0: f64,
    pub report: GateReport,
    pub log: Vec<IterationRecord>,
    pub evals: usize,
    /// False when an evaluation cap stopped the stage.
    pub converged: bool,
    /// Filled in by callers that can measure time.
    pub wall_time_s: Option<f64>,
}

/// Operators and dressed basis for one drive frequency.
pub struct DriveSetup {
    pub params: SystemParams,
    pub ops: OperatorSet,
    pub basis: LogicalBasis,
    pub generator: Generator,
}

impl DriveSetup {
    pub fn new(params: &SystemParams, omega_r: f64, cfg: &PropagatorConfig) -> Result<Self> {
        let params = params.with_rotating_frame(omega_r);
        let ops = build_operators(&params)?;
        let frame = diagonalize_and_assign(&ops)?;
        let basis = LogicalBasis::from_frame(&frame);
        let generator = Generator::from_ops(&ops, Mode::Effective, cfg.block_rate)?;
        Ok(DriveSetup { params, ops, basis, generator })
    }

    pub fn gate(&self, pulse: &ControlPulse, cfg: &PropagatorConfig) -> Result<CMatrix> {
        let finals: Result<Vec<_>> =
            self.basis.vectors.iter().map(|v| crate::propagate::propagate(&self.generator, pulse, v, cfg)).collect();
        Ok(self.basis.project(&finals?, pulse.grid.duration()))
    }
}

/// Stage-1/2 value of a gate. An exact target is scored by its overlap
/// error (leakage lowers the overlap); entanglement goals and targets up to
/// local operations by the concurrence functional.
fn scan_value(u: &CMatrix, goal: &OptimizationGoal) -> f64 {
    if let GoalKind::SpecificGate { target, up_to_local: false } = &goal.kind {
        return j_sm(u, target);
    }
    let c = closest_unitary(u).map(|p| gate_concurrence(&weyl_unchecked(&p))).unwrap_or(0.0);
    scan_functional(c, goal.target_concurrence(), pop_loss(u))
}

fn candidate(setup: &DriveSetup, grid: TimeGrid, e0: f64, goal: &OptimizationGoal, cfg: &PropagatorConfig) -> Result<(f64, ControlPulse, CMatrix)> {
    let pulse = blackman_pulse(grid, e0, setup.params.omega_r)?;
    let u = setup.gate(&pulse, cfg)?;
    let v = scan_value(&u, goal);
    if !v.is_finite() {
        return Err(Error::NonFinite);
    }
    Ok((v, pulse, u))
}

fn stage_result(pulse: ControlPulse, value: f64, e0: f64, u: &CMatrix, target: Option<&CMatrix>) -> StageResult {
    StageResult { pulse, value, e0, report: GateReport::new(u, target), log: Vec::new(), evals: 1, converged: true, wall_time_s: None }
}

/// Outcome of the scan: candidates sorted by ascending functional and the
/// failures that were skipped.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanOutcome {
    pub candidates: Vec<StageResult>,
    pub failures: Vec<(f64, f64, Error)>,
}

/// Drive frequencies: uniform within the half-width around ω₁, ω₂ and ω_c,
/// cycling through the three centers.
pub fn scan_frequencies(params: &SystemParams, cfg: &Stage1Config) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let centers = [params.omega1, params.omega2, params.omega_c];
    let hw = ghz(cfg.freq_halfwidth_ghz);
    (0..cfg.n_freq_samples).map(|k| centers[k % 3] + if hw > 0.0 { rng.gen_range(-hw..hw) } else { 0.0 }).collect()
}

/// Log-spaced amplitudes in rad/s.
pub fn scan_amplitudes(cfg: &Stage1Config) -> Vec<f64> {
    let n = cfg.n_amplitudes;
    if n == 1 {
        return alloc::vec![mhz(cfg.e0_min_mhz)];
    }
    let (lo, hi) = (Float::ln(cfg.e0_min_mhz), Float::ln(cfg.e0_max_mhz));
    (0..n).map(|k| mhz(Float::exp(lo + (hi - lo) * k as f64 / (n - 1) as f64))).collect()
}

/// Stage 1: amplitude × frequency scan of Blackman pulses. A zero-amplitude
/// candidate is always included.
pub fn stage1_scan<E: Executor>(params: &SystemParams, goal: &OptimizationGoal, cfg: &PipelineConfig, exec: &E) -> Result<ScanOutcome> {
    goal.validate()?;
    if cfg.stage1.n_freq_samples == 0 || cfg.stage1.n_amplitudes == 0 {
        return Err(Error::InvalidParams("stage 1 needs at least one frequency and amplitude".into()));
    }
    if !(cfg.stage1.e0_min_mhz > 0.0 && cfg.stage1.e0_max_mhz >= cfg.stage1.e0_min_mhz) {
        return Err(Error::InvalidParams("stage 1 amplitude range".into()));
    }
    let grid = cfg.grid(goal.duration)?;
    let freqs = scan_frequencies(params, &cfg.stage1);
    let amps = scan_amplitudes(&cfg.stage1);
    let prop = cfg.propagator;
    let target = goal.target();
    let jobs: Vec<(usize, f64)> = freqs.iter().copied().enumerate().collect();
    let per_freq = exec.map(&jobs, |&(idx, omega_r)| {
        let mut ok = Vec::new();
        let mut failed = Vec::new();
        let setup = match DriveSetup::new(params, omega_r, &prop) {
            Ok(s) => s,
            Err(e) => {
                failed.push((omega_r, f64::NAN, e));
                return (ok, failed);
            }
        };
        let mut list: Vec<f64> = amps.clone();
        if idx == 0 {
            list.insert(0, 0.0);
        }
        for e0 in list {
            match candidate(&setup, grid, e0, goal, &prop) {
                Ok((v, pulse, u)) => ok.push(stage_result(pulse, v, e0, &u, target)),
                Err(e) => failed.push((omega_r, e0, e)),
            }
        }
        (ok, failed)
    });
    let mut candidates = Vec::new();
    let mut failures = Vec::new();
    for (ok, failed) in per_freq {
        candidates.extend(ok);
        failures.extend(failed);
    }
    // stable sort keeps generation order among ties
    candidates.sort_by(|a, b| a.value.partial_cmp(&b.value).unwrap_or(core::cmp::Ordering::Equal));
    Ok(ScanOutcome { candidates, failures })
}

/// Stage 2: Nelder–Mead over `(E₀, ω_r)` on the scan functional. Never
/// returns something worse than `start`.
pub fn stage2_simplex(params: &SystemParams, start: &StageResult, goal: &OptimizationGoal, cfg: &PipelineConfig) -> Result<StageResult> {
    let grid = start.pulse.grid;
    let prop = cfg.propagator;
    let target = goal.target();
    let e_step = if start.e0 > 0.0 { start.e0 * cfg.stage2.e0_step_rel } else { mhz(cfg.stage1.e0_min_mhz) };
    let w_step = mhz(cfg.stage2.omega_step_mhz);
    // optimize in units of the initial steps
    let x0 = [start.e0 / e_step, start.pulse.omega_r / w_step];
    let mut log = Vec::new();
    let mut best: Option<(f64, f64, f64)> = None;
    let opts = SimplexOptions { x_tol: cfg.stage2.x_tol, f_tol: cfg.stage2.f_tol, max_evals: cfg.stage2.max_evals };
    let result = nelder_mead(
        |x| {
            let e0 = (x[0] * e_step).abs();
            let omega_r = x[1] * w_step;
            let v = DriveSetup::new(params, omega_r, &prop)
                .and_then(|s| candidate(&s, grid, e0, goal, &prop))
                .map(|(v, _, _)| v)
                .unwrap_or(f64::INFINITY);
            if best.is_none_or(|b| v < b.0) {
                best = Some((v, e0, omega_r));
            }
            let shown = best.map_or(v, |b| b.0);
            log.push(IterationRecord { iter: log.len(), total: shown, main: v, loss_term: 0.0, lambda_a: 0.0 });
            v
        },
        &x0,
        &[1.0, 1.0],
        &opts,
    );
    let evals = result.evals;
    match best {
        Some((v, e0, omega_r)) if v < start.value => {
            let setup = DriveSetup::new(params, omega_r, &prop)?;
            let (v2, pulse, u) = candidate(&setup, grid, e0, goal, &prop)?;
            let mut r = stage_result(pulse, v2, e0, &u, target);
            r.log = log;
            r.evals = evals;
            r.converged = result.converged;
            debug_assert!((v2 - v).abs() < 1e-9);
            Ok(r)
        }
        _ => {
            let mut r = start.clone();
            r.log = log;
            r.evals = evals;
            r.converged = result.converged;
            r.wall_time_s = None;
            Ok(r)
        }
    }
}

/// Stage 3: Krotov refinement with the goal's differentiable functional in
/// effective (non-Hermitian) mode.
pub fn stage3_krotov<E: Executor>(params: &SystemParams, start: &StageResult, goal: &OptimizationGoal, cfg: &PipelineConfig, exec: &E) -> Result<StageResult> {
    let prop = cfg.propagator;
    let setup = DriveSetup::new(params, start.pulse.omega_r, &prop)?;
    let objective = goal.objective();
    let problem = KrotovProblem { generator: &setup.generator, basis: &setup.basis, objective: &objective, cfg: prop };
    let r = krotov(&problem, &start.pulse, &cfg.stage3.krotov_options(), exec)?;
    Ok(StageResult {
        e0: r.pulse.max_amplitude(),
        report: GateReport::new(&r.u_tilde, goal.target()),
        value: r.value.total,
        evals: r.log.len(),
        converged: true,
        log: r.log,
        pulse: r.pulse,
        wall_time_s: None,
    })
}

/// Average gate error target: the requested gate, or the closest unitary
/// of the optimized gate for entanglement goals.
pub fn evaluation_target(goal: &OptimizationGoal, u_tilde: &CMatrix) -> Option<CMatrix> {
    match goal.target() {
        Some(t) => Some(t.clone()),
        None => closest_unitary(u_tilde).ok(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineOutcome {
    pub candidates: Vec<StageResult>,
    pub stage1_failures: usize,
    pub stage2: StageResult,
    pub stage3: StageResult,
    /// Final report; `eps_avg` comes from the master equation.
    pub report: GateReport,
    pub eps_avg_no_dissipation: Option<f64>,
    pub evaluation_target: Option<CMatrix>,
}

/// Evaluate a pulse: effective-mode gate for the report, master-equation
/// map for `eps_avg`, Hermitian gate for the dissipation-free error.
pub fn evaluate_pulse(params: &SystemParams, pulse: &ControlPulse, target: Option<&CMatrix>, cfg: &PipelineConfig) -> Result<(GateReport, Option<f64>)> {
    let prop = cfg.propagator;
    let frame_params = params.with_rotating_frame(pulse.omega_r);
    let ops = build_operators(&frame_params)?;
    let frame = diagonalize_and_assign(&ops)?;
    let g = Generator::from_ops(&ops, Mode::Effective, prop.block_rate)?;
    let u = evolve_logical_basis(&g, pulse, &frame, &prop)?;
    let mut report = GateReport::new(&u, target);
    if let (true, Some(t)) = (cfg.evaluation.lindblad, target) {
        let lg = LindbladGenerator::from_ops(&ops)?;
        let map = evolve_logical_map(&lg, pulse, &frame, &prop)?;
        report = report.with_map(&map, t);
    }
    let mut no_diss = None;
    if let (true, Some(t)) = (cfg.evaluation.no_dissipation, target) {
        let h = Generator::from_ops(&ops, Mode::Hermitian, prop.block_rate)?;
        let u0 = evolve_logical_basis(&h, pulse, &frame, &prop)?;
        no_diss = Some(avg_gate_error(&u0, t)?);
    }
    Ok((report, no_diss))
}

/// Stages 1 → 2 → 3 followed by the master-equation evaluation.
pub fn run_pipeline<E: Executor>(params: &SystemParams, goal: &OptimizationGoal, cfg: &PipelineConfig, exec: &E) -> Result<PipelineOutcome> {
    params.validate()?;
    goal.validate()?;
    let scan = stage1_scan(params, goal, cfg, exec)?;
    if scan.candidates.is_empty() {
        let reason = scan.failures.first().map(|f| f.2.to_string()).unwrap_or_default();
        return Err(Error::NoConvergence(alloc::format!("stage 1 produced no candidates ({reason})")));
    }
    let top: Vec<StageResult> = scan.candidates.iter().take(cfg.stage2.top_k.max(1)).cloned().collect();
    let refined: Vec<Result<StageResult>> = exec.map(&top, |s| stage2_simplex(params, s, goal, cfg));
    let mut best: Option<StageResult> = None;
    for r in refined {
        let r = r?;
        if best.as_ref().is_none_or(|b| r.value < b.value) {
            best = Some(r);
        }
    }
    let stage2 = best.expect("top_k ≥ 1");
    let stage3 = stage3_krotov(params, &stage2, goal, cfg, exec)?;
    let target = evaluation_target(goal, &stage3.report.u_tilde);
    let (report, eps_avg_no_dissipation) = evaluate_pulse(params, &stage3.pulse, target.as_ref(), cfg)?;
    Ok(PipelineOutcome {
        candidates: top,
        stage1_failures: scan.failures.len(),
        stage2,
        stage3,
        report,
        eps_avg_no_dissipation,
        evaluation_target: target,
    })
}
