//! Time evolution under piecewise-constant controls.
//!
//! Every step applies `exp(−i G dt)` for a (possibly non-Hermitian) linear
//! generator `G` through a Chebyshev expansion about the center of a box
//! that contains its field of values. The same engine drives closed and
//! effective state propagation and the Lindblad superoperator.

use alloc::vec;
use alloc::vec::Vec;

use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{c, cis, inner, vec_norm, CMatrix, Csr, C64, ZERO};
use crate::model::{build_effective_hamiltonian, OperatorSet};
use crate::pulse::ControlPulse;
use crate::spectrum::DressedFrame;

/// Which Hamiltonian drives state propagation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Drift plus control only.
    Hermitian,
    /// Adds `−(i/2)Σ rate A†A` and the absorbing top-level term.
    Effective,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PropagatorConfig {
    /// A step's expansion stops once two consecutive terms fall below
    /// `tolerance · ‖v‖`.
    pub tolerance: f64,
    pub max_order: usize,
    /// Rate for the top-level absorbing term in effective mode.
    pub block_rate: f64,
}

impl Default for PropagatorConfig {
    fn default() -> Self {
        PropagatorConfig { tolerance: 1e-14, max_order: 2000, block_rate: crate::model::DEFAULT_BLOCK_RATE }
    }
}

/// A linear generator `G(ε)` acting on flat complex vectors.
pub trait LinearGenerator {
    fn dim(&self) -> usize;
    /// `out = G(ε) x`
    fn apply(&self, eps: C64, x: &[C64], out: &mut [C64]);
    /// Boxes `(re_lo, re_hi), (im_lo, im_hi)` containing the field of values
    /// of `G(ε)` for all `|ε| ≤ eps_max`.
    fn bounds(&self, eps_max: f64) -> ((f64, f64), (f64, f64));
}

/// `H(ε) = drift + Re ε · ctrl_re + Im ε · ctrl_im` in sparse form.
#[derive(Debug, Clone, PartialEq)]
pub struct Generator {
    pub drift: Csr,
    pub ctrl_re: Csr,
    pub ctrl_im: Csr,
    drift_box: ((f64, f64), (f64, f64)),
    ctrl_box: [((f64, f64), (f64, f64)); 2],
}

fn widen(b: (f64, f64), r: f64) -> (f64, f64) {
    (b.0 - r, b.1 + r)
}

fn box_radius(b: ((f64, f64), (f64, f64))) -> (f64, f64) {
    (b.0 .0.abs().max(b.0 .1.abs()), b.1 .0.abs().max(b.1 .1.abs()))
}

impl Generator {
    pub fn new(drift: &CMatrix, ctrl_re: &CMatrix, ctrl_im: &CMatrix) -> Result<Self> {
        let n = drift.nrows();
        for m in [drift, ctrl_re, ctrl_im] {
            if m.nrows() != n || m.ncols() != n {
                return Err(Error::DimensionMismatch { expected: n, got: m.nrows() });
            }
        }
        let drift = Csr::from_dense(drift);
        let ctrl_re = Csr::from_dense(ctrl_re);
        let ctrl_im = Csr::from_dense(ctrl_im);
        let drift_box = drift.field_of_values_box();
        let ctrl_box = [ctrl_re.field_of_values_box(), ctrl_im.field_of_values_box()];
        Ok(Generator { drift, ctrl_re, ctrl_im, drift_box, ctrl_box })
    }

    pub fn from_ops(ops: &OperatorSet, mode: Mode, block_rate: f64) -> Result<Self> {
        match mode {
            Mode::Hermitian => Self::new(&ops.h_drift, &ops.h_ctrl_re, &ops.h_ctrl_im),
            Mode::Effective => {
                let h = build_effective_hamiltonian(ops, block_rate)?;
                Self::new(&h, &ops.h_ctrl_re, &ops.h_ctrl_im)
            }
        }
    }

    /// `−H(ε)†`: stepping with it forward in time is the backward
    /// propagation `exp(+i H† dt)` used for co-states.
    pub fn backward(&self) -> Self {
        let neg = |m: &Csr| {
            let mut a = m.adjoint();
            for v in a.vals.iter_mut() {
                *v = -*v;
            }
            a
        };
        // ε multiplies Hermitian controls; conjugate-transposing keeps ε real
        // coefficients unchanged, so (Re ε ctrl)† = Re ε ctrl†.
        let drift = neg(&self.drift);
        let ctrl_re = neg(&self.ctrl_re);
        let ctrl_im = neg(&self.ctrl_im);
        let drift_box = drift.field_of_values_box();
        let ctrl_box = [ctrl_re.field_of_values_box(), ctrl_im.field_of_values_box()];
        Generator { drift, ctrl_re, ctrl_im, drift_box, ctrl_box }
    }
}

impl LinearGenerator for Generator {
    fn dim(&self) -> usize {
        self.drift.n
    }

    #[inline]
    fn apply(&self, eps: C64, x: &[C64], out: &mut [C64]) {
        self.drift.matvec(x, out);
        if eps.re != 0.0 {
            self.ctrl_re.matvec_add(c(eps.re, 0.0), x, out);
        }
        if eps.im != 0.0 {
            self.ctrl_im.matvec_add(c(eps.im, 0.0), x, out);
        }
    }

    fn bounds(&self, eps_max: f64) -> ((f64, f64), (f64, f64)) {
        let (r_re0, i_re0) = box_radius(self.ctrl_box[0]);
        let (r_re1, i_re1) = box_radius(self.ctrl_box[1]);
        let r = eps_max * (r_re0 + r_re1);
        let i = eps_max * (i_re0 + i_re1);
        (widen(self.drift_box.0, r), widen(self.drift_box.1, i))
    }
}

/// Lindblad generator on column-major `vec(ρ)`:
/// `G ρ = H ρ − ρ H† + i Σ rate A ρ A†` with `H = H₀ − (i/2) Σ rate A†A`,
/// so that `dρ/dt = −i G ρ`.
#[derive(Debug, Clone, PartialEq)]
pub struct LindbladGenerator {
    pub hamiltonian: Generator,
    pub jumps: Vec<(Csr, f64)>,
    jump_norm: f64,
}

impl LindbladGenerator {
    pub fn new(h_drift: &CMatrix, ctrl_re: &CMatrix, ctrl_im: &CMatrix, jumps: &[(CMatrix, f64)]) -> Result<Self> {
        let n = h_drift.nrows();
        let mut h = h_drift.clone();
        let mut sparse = Vec::new();
        let mut jump_norm = 0.0;
        for (a, rate) in jumps {
            if a.nrows() != n || a.ncols() != n {
                return Err(Error::DimensionMismatch { expected: n, got: a.nrows() });
            }
            if *rate < 0.0 {
                return Err(Error::InvalidParams("negative Lindblad rate".into()));
            }
            if *rate == 0.0 {
                continue;
            }
            let ada = a.adjoint() * a;
            h -= &ada * c(0.0, 0.5 * rate);
            let (_, hi) = crate::linalg::gershgorin(&ada);
            jump_norm += rate * hi;
            sparse.push((Csr::from_dense(a), *rate));
        }
        let hamiltonian = Generator::new(&h, ctrl_re, ctrl_im)?;
        Ok(LindbladGenerator { hamiltonian, jumps: sparse, jump_norm })
    }

    pub fn from_ops(ops: &OperatorSet) -> Result<Self> {
        Self::new(&ops.h_drift, &ops.h_ctrl_re, &ops.h_ctrl_im, &ops.lindblad_ops)
    }

    pub fn hilbert_dim(&self) -> usize {
        self.hamiltonian.dim()
    }
}

/// `out_col_j += alpha · Σ_k conj(m_jk) x_col_k`, i.e. `out += alpha · X M†`.
fn right_mul_adjoint(m: &Csr, alpha: C64, x: &[C64], out: &mut [C64]) {
    let n = m.n;
    for j in 0..n {
        for idx in m.row_ptr[j]..m.row_ptr[j + 1] {
            let k = m.cols[idx];
            let coef = alpha * m.vals[idx].conj();
            let (src, dst) = (k * n, j * n);
            for r in 0..n {
                out[dst + r] += coef * x[src + r];
            }
        }
    }
}

impl LinearGenerator for LindbladGenerator {
    fn dim(&self) -> usize {
        let n = self.hilbert_dim();
        n * n
    }

    fn apply(&self, eps: C64, x: &[C64], out: &mut [C64]) {
        let n = self.hilbert_dim();
        let h = &self.hamiltonian;
        // H ρ column by column
        for col in 0..n {
            h.apply(eps, &x[col * n..(col + 1) * n], &mut out[col * n..(col + 1) * n]);
        }
        // − ρ H†
        right_mul_adjoint(&h.drift, c(-1.0, 0.0), x, out);
        if eps.re != 0.0 {
            right_mul_adjoint(&h.ctrl_re, c(-eps.re, 0.0), x, out);
        }
        if eps.im != 0.0 {
            right_mul_adjoint(&h.ctrl_im, c(-eps.im, 0.0), x, out);
        }
        // + i Σ rate A ρ A†, entry (a, b) = Σ A_ak ρ_kl conj(A_bl)
        for (a_op, rate) in &self.jumps {
            let coef = c(0.0, *rate);
            for b in 0..n {
                for jb in a_op.row_ptr[b]..a_op.row_ptr[b + 1] {
                    let l = a_op.cols[jb];
                    let vb = coef * a_op.vals[jb].conj();
                    let src = &x[l * n..(l + 1) * n];
                    let dst = &mut out[b * n..(b + 1) * n];
                    for a in 0..n {
                        for ja in a_op.row_ptr[a]..a_op.row_ptr[a + 1] {
                            dst[a] += a_op.vals[ja] * src[a_op.cols[ja]] * vb;
                        }
                    }
                }
            }
        }
    }

    fn bounds(&self, eps_max: f64) -> ((f64, f64), (f64, f64)) {
        let ((rl, rh), (il, ih)) = self.hamiltonian.bounds(eps_max);
        let w = rh - rl;
        let s = self.jump_norm;
        ((-w - s, w + s), (2.0 * il - s, 2.0 * ih + s))
    }
}

/// Bessel functions `J_0(a) … J_kmax(a)` by Miller's backward recurrence.
pub fn bessel_j_sequence(a: f64, kmax: usize) -> Vec<f64> {
    let mut out = vec![0.0; kmax + 1];
    if a == 0.0 {
        out[0] = 1.0;
        return out;
    }
    let ax = a.abs();
    let base = kmax.max(Float::ceil(ax) as usize);
    let mut m = base + 40 + Float::ceil(4.0 * Float::sqrt(ax)) as usize;
    if m % 2 == 1 {
        m += 1;
    }
    let mut jp1 = 0.0f64;
    let mut j = 1e-300f64;
    let mut norm = 0.0f64;
    let mut store = vec![0.0; kmax + 1];
    for k in (1..=m).rev() {
        if k <= kmax {
            store[k] = j;
        }
        if k % 2 == 0 {
            norm += 2.0 * j;
        }
        let jm1 = 2.0 * k as f64 / ax * j - jp1;
        jp1 = j;
        j = jm1;
        if j.abs() > 1e250 {
            j *= 1e-250;
            jp1 *= 1e-250;
            norm *= 1e-250;
            for v in store.iter_mut() {
                *v *= 1e-250;
            }
        }
    }
    store[0] = j;
    norm += j;
    for k in 0..=kmax {
        out[k] = store[k] / norm;
        if a < 0.0 && k % 2 == 1 {
            out[k] = -out[k];
        }
    }
    out
}

/// Chebyshev expansion of `exp(−i G τ)` for one substep length `τ`.
#[derive(Debug, Clone)]
struct StepPlan {
    center: C64,
    radius: f64,
    /// Expansion argument `radius · τ`.
    arg: f64,
    coeffs: Vec<C64>,
    /// `exp(−i center τ)`
    phase: C64,
    substeps: usize,
}

impl StepPlan {
    fn new(bounds: ((f64, f64), (f64, f64)), dt: f64, cfg: &PropagatorConfig) -> Self {
        let ((rl, rh), (il, ih)) = bounds;
        let center = c(0.5 * (rl + rh), 0.5 * (il + ih));
        let hw_re = 0.5 * (rh - rl);
        let hw_im = 0.5 * (ih - il);
        let radius = (hw_re + hw_im).max(1e-300);
        // keep transient growth from the imaginary extent and the order
        // of the expansion moderate
        let by_im = Float::ceil(hw_im * dt / 2.0) as usize;
        let by_order = Float::ceil(radius * dt / 400.0) as usize;
        let substeps = by_im.max(by_order).max(1);
        let tau = dt / substeps as f64;
        let arg = radius * tau;
        let kmax = (Float::ceil(arg) as usize + 60).min(cfg.max_order);
        let j = bessel_j_sequence(arg, kmax);
        let mut coeffs = Vec::with_capacity(kmax + 1);
        let mut pow = c(1.0, 0.0);
        for (k, jk) in j.iter().enumerate() {
            let w = if k == 0 { 1.0 } else { 2.0 };
            coeffs.push(pow * (w * jk));
            pow *= c(0.0, -1.0);
        }
        let e = center * c(0.0, -tau);
        let phase = cis(e.im) * Float::exp(e.re);
        StepPlan { center, radius, arg, coeffs, phase, substeps }
    }
}

/// Stateful stepper that reuses its work buffers.
pub struct Stepper<'g, G: LinearGenerator> {
    generator: &'g G,
    plan: StepPlan,
    tolerance: f64,
    max_order: usize,
    phi_prev: Vec<C64>,
    phi: Vec<C64>,
    phi_next: Vec<C64>,
    acc: Vec<C64>,
}

impl<'g, G: LinearGenerator> Stepper<'g, G> {
    /// Stepper for steps of length `dt` with `|ε| ≤ eps_max`.
    pub fn new(generator: &'g G, dt: f64, eps_max: f64, cfg: &PropagatorConfig) -> Self {
        let n = generator.dim();
        let plan = StepPlan::new(generator.bounds(eps_max), dt, cfg);
        Stepper {
            generator,
            plan,
            tolerance: cfg.tolerance,
            max_order: cfg.max_order,
            phi_prev: vec![ZERO; n],
            phi: vec![ZERO; n],
            phi_next: vec![ZERO; n],
            acc: vec![ZERO; n],
        }
    }

    /// In-place `v ← exp(−i G(ε) dt) v`.
    pub fn step(&mut self, eps: C64, v: &mut [C64]) -> Result<()> {
        for _ in 0..self.plan.substeps {
            self.substep(eps, v)?;
        }
        Ok(())
    }

    fn substep(&mut self, eps: C64, v: &mut [C64]) -> Result<()> {
        let n = v.len();
        let p = &self.plan;
        let inv_r = 1.0 / p.radius;
        let vnorm = vec_norm(v);
        if vnorm == 0.0 {
            return Ok(());
        }
        if !vnorm.is_finite() {
            return Err(Error::NonFinite);
        }
        let threshold = self.tolerance * vnorm;
        // X = (G − center)/radius
        self.phi_prev.copy_from_slice(v);
        for i in 0..n {
            self.acc[i] = p.coeffs[0] * v[i];
        }
        self.generator.apply(eps, v, &mut self.phi);
        for i in 0..n {
            self.phi[i] = (self.phi[i] - p.center * v[i]) * inv_r;
        }
        let mut small = 0usize;
        let mut k = 1usize;
        loop {
            let ak = p.coeffs[k];
            let mut norm_sq = 0.0;
            for i in 0..n {
                self.acc[i] += ak * self.phi[i];
                norm_sq += self.phi[i].norm_sqr();
            }
            let term = ak.norm() * Float::sqrt(norm_sq);
            if (k as f64) > p.arg && term < threshold {
                small += 1;
                if small >= 2 {
                    break;
                }
            } else {
                small = 0;
            }
            k += 1;
            if k >= p.coeffs.len() {
                return Err(Error::Convergence { max_order: self.max_order });
            }
            self.generator.apply(eps, &self.phi, &mut self.phi_next);
            for i in 0..n {
                self.phi_next[i] = (self.phi_next[i] - p.center * self.phi[i]) * (2.0 * inv_r) - self.phi_prev[i];
            }
            core::mem::swap(&mut self.phi_prev, &mut self.phi);
            core::mem::swap(&mut self.phi, &mut self.phi_next);
        }
        let mut finite = true;
        for i in 0..n {
            v[i] = self.acc[i] * p.phase;
            finite &= v[i].re.is_finite() && v[i].im.is_finite();
        }
        if finite {
            Ok(())
        } else {
            Err(Error::NonFinite)
        }
    }
}

/// Propagate `v0` through every interval of the pulse. `observer` is called
/// with `(k, v)` at the boundary points `k = 0..=n_steps`.
pub fn propagate_observed<G: LinearGenerator>(
    generator: &G,
    pulse: &ControlPulse,
    v0: &[C64],
    cfg: &PropagatorConfig,
    observer: &mut dyn FnMut(usize, &[C64]),
) -> Result<Vec<C64>> {
    if v0.len() != generator.dim() {
        return Err(Error::DimensionMismatch { expected: generator.dim(), got: v0.len() });
    }
    let mut v = v0.to_vec();
    let mut stepper = Stepper::new(generator, pulse.grid.dt(), pulse.max_amplitude(), cfg);
    observer(0, &v);
    for (k, &eps) in pulse.samples.iter().enumerate() {
        stepper.step(eps, &mut v)?;
        observer(k + 1, &v);
    }
    Ok(v)
}

pub fn propagate<G: LinearGenerator>(generator: &G, pulse: &ControlPulse, v0: &[C64], cfg: &PropagatorConfig) -> Result<Vec<C64>> {
    propagate_observed(generator, pulse, v0, cfg, &mut |_, _| {})
}

/// Closed or effective state propagation.
pub fn propagate_state(psi0: &[C64], ops: &OperatorSet, pulse: &ControlPulse, mode: Mode, cfg: &PropagatorConfig) -> Result<Vec<C64>> {
    let g = Generator::from_ops(ops, mode, cfg.block_rate)?;
    propagate(&g, pulse, psi0, cfg)
}

/// Lindblad propagation of a density matrix.
pub fn propagate_density(rho0: &CMatrix, ops: &OperatorSet, pulse: &ControlPulse, cfg: &PropagatorConfig) -> Result<CMatrix> {
    let g = LindbladGenerator::from_ops(ops)?;
    let n = g.hilbert_dim();
    let out = propagate(&g, pulse, rho0.as_slice(), cfg)?;
    Ok(CMatrix::from_column_slice(n, n, &out))
}

/// Logical-basis diagnostics along a propagation, in the interaction picture.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    /// Four amplitudes (state) or sixteen row-major block entries (density).
    pub logical: Vec<Vec<C64>>,
    pub p_outside: Vec<f64>,
}

/// Coefficients `⟨φ_k|ψ⟩` in the dressed logical basis and the population
/// outside it.
pub fn logical_projection(psi: &[C64], frame: &DressedFrame) -> ([C64; 4], f64) {
    let mut coeffs = [ZERO; 4];
    let mut pop = 0.0;
    for (k, coef) in coeffs.iter_mut().enumerate() {
        let idx = frame.logical_index[k];
        let mut acc = ZERO;
        for (r, x) in psi.iter().enumerate() {
            acc += frame.eigenvectors[(r, idx)].conj() * x;
        }
        *coef = acc;
        pop += acc.norm_sqr();
    }
    (coeffs, (1.0 - pop).clamp(0.0, 1.0))
}

/// 4×4 block `⟨φ_k|ρ|φ_l⟩` and `1 − tr(block)`.
pub fn logical_block(rho: &CMatrix, frame: &DressedFrame) -> (CMatrix, f64) {
    let cols: Vec<usize> = frame.logical_index.to_vec();
    let phi = CMatrix::from_fn(rho.nrows(), 4, |r, k| frame.eigenvectors[(r, cols[k])]);
    let block = phi.adjoint() * rho * &phi;
    let tr: f64 = (0..4).map(|k| block[(k, k)].re).sum();
    (block, (1.0 - tr).clamp(0.0, 1.0))
}

/// State propagation recording the interaction-picture logical amplitudes
/// every `save_every` steps (and at the final time).
pub fn propagate_state_trajectory(
    psi0: &[C64],
    generator: &Generator,
    pulse: &ControlPulse,
    frame: &DressedFrame,
    save_every: usize,
    cfg: &PropagatorConfig,
) -> Result<(Vec<C64>, Trajectory)> {
    let save_every = save_every.max(1);
    let n_steps = pulse.grid.n_steps;
    let energies = frame.logical_energies();
    let mut traj = Trajectory::default();
    let grid = pulse.grid;
    let out = propagate_observed(generator, pulse, psi0, cfg, &mut |k, v| {
        if k % save_every == 0 || k == n_steps {
            let t = grid.boundary(k) - grid.t_start;
            let (coeffs, p_out) = logical_projection(v, frame);
            traj.times.push(grid.boundary(k));
            traj.logical.push((0..4).map(|j| coeffs[j] * cis(energies[j] * t)).collect());
            traj.p_outside.push(p_out);
        }
    })?;
    Ok((out, traj))
}

/// Density propagation recording the interaction-picture logical block.
pub fn propagate_density_trajectory(
    rho0: &CMatrix,
    generator: &LindbladGenerator,
    pulse: &ControlPulse,
    frame: &DressedFrame,
    save_every: usize,
    cfg: &PropagatorConfig,
) -> Result<(CMatrix, Trajectory)> {
    let save_every = save_every.max(1);
    let n = generator.hilbert_dim();
    let n_steps = pulse.grid.n_steps;
    let energies = frame.logical_energies();
    let mut traj = Trajectory::default();
    let grid = pulse.grid;
    let out = propagate_observed(generator, pulse, rho0.as_slice(), cfg, &mut |k, v| {
        if k % save_every == 0 || k == n_steps {
            let t = grid.boundary(k) - grid.t_start;
            let rho = CMatrix::from_column_slice(n, n, v);
            let (block, p_out) = logical_block(&rho, frame);
            let mut entries = Vec::with_capacity(16);
            for a in 0..4 {
                for b in 0..4 {
                    entries.push(block[(a, b)] * cis((energies[a] - energies[b]) * t));
                }
            }
            traj.times.push(grid.boundary(k));
            traj.logical.push(entries);
            traj.p_outside.push(p_out);
        }
    })?;
    Ok((CMatrix::from_column_slice(n, n, &out), traj))
}

/// Projected gate `Ũ_jk = e^{iE_j T} ⟨φ_j|ψ_k(T)⟩` (interaction picture).
pub fn evolve_logical_basis(generator: &Generator, pulse: &ControlPulse, frame: &DressedFrame, cfg: &PropagatorConfig) -> Result<CMatrix> {
    let t = pulse.grid.duration();
    let energies = frame.logical_energies();
    let mut u = CMatrix::zeros(4, 4);
    for k in 0..4 {
        let psi = propagate(generator, pulse, &frame.logical_state(k), cfg)?;
        let (coeffs, _) = logical_projection(&psi, frame);
        for j in 0..4 {
            u[(j, k)] = coeffs[j] * cis(energies[j] * t);
        }
    }
    Ok(u)
}

/// Logical dynamical map in the interaction picture:
/// `ops[4i + j]` is the 4×4 block of `E(|i⟩⟨j|)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DynamicalMap {
    pub ops: Vec<CMatrix>,
}

impl DynamicalMap {
    pub fn get(&self, i: usize, j: usize) -> &CMatrix {
        &self.ops[4 * i + j]
    }

    /// Map of a (possibly non-unitary) logical gate: `E(X) = Ũ X Ũ†`.
    pub fn from_gate(u: &CMatrix) -> Self {
        let mut ops = Vec::with_capacity(16);
        for i in 0..4 {
            for j in 0..4 {
                let x = CMatrix::from_fn(4, 4, |a, b| u[(a, i)] * u[(b, j)].conj());
                ops.push(x);
            }
        }
        DynamicalMap { ops }
    }

    /// Apply the map to an arbitrary 4×4 operator by linearity.
    pub fn apply(&self, x: &CMatrix) -> CMatrix {
        let mut out = CMatrix::zeros(4, 4);
        for i in 0..4 {
            for j in 0..4 {
                if x[(i, j)] != ZERO {
                    out += self.get(i, j) * x[(i, j)];
                }
            }
        }
        out
    }
}

/// Evolve `|φ_i⟩⟨φ_j|` for `i ≤ j` under the Lindblad equation; the
/// remaining blocks follow from `E(|j⟩⟨i|) = E(|i⟩⟨j|)†`.
pub fn evolve_logical_map(generator: &LindbladGenerator, pulse: &ControlPulse, frame: &DressedFrame, cfg: &PropagatorConfig) -> Result<DynamicalMap> {
    evolve_logical_map_with(generator, pulse, frame, cfg, &crate::exec::Sequential)
}

/// [`evolve_logical_map`] with the ten propagations distributed by `exec`.
pub fn evolve_logical_map_with<E: crate::exec::Executor>(
    generator: &LindbladGenerator,
    pulse: &ControlPulse,
    frame: &DressedFrame,
    cfg: &PropagatorConfig,
    exec: &E,
) -> Result<DynamicalMap> {
    let n = generator.hilbert_dim();
    let t = pulse.grid.duration();
    let energies = frame.logical_energies();
    let states = frame.logical_states();
    let pairs: Vec<(usize, usize)> = (0..4).flat_map(|i| (i..4).map(move |j| (i, j))).collect();
    let blocks: Vec<Result<CMatrix>> = exec.map(&pairs, |&(i, j)| {
        let rho = CMatrix::from_fn(n, n, |a, b| states[i][a] * states[j][b].conj());
        let out = propagate(generator, pulse, rho.as_slice(), cfg)?;
        let rho_t = CMatrix::from_column_slice(n, n, &out);
        let (block, _) = logical_block(&rho_t, frame);
        Ok(CMatrix::from_fn(4, 4, |a, b| block[(a, b)] * cis((energies[a] - energies[b]) * t)))
    });
    let mut ops = vec![CMatrix::zeros(4, 4); 16];
    for (&(i, j), block) in pairs.iter().zip(blocks) {
        let block = block?;
        if i != j {
            ops[4 * j + i] = block.adjoint();
        }
        ops[4 * i + j] = block;
    }
    Ok(DynamicalMap { ops })
}

/// `⟨a|b⟩` for convenience in callers working with plain slices.
pub fn overlap(a: &[C64], b: &[C64]) -> C64 {
    inner(a, b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{hermitian_eigen, unitarity_deviation};
    use crate::model::{basis_index, build_operators, SystemParams};
    use crate::pulse::{blackman, blackman_pulse, TimeGrid};
    use crate::spectrum::diagonalize_and_assign;
    use crate::units::{mhz, ns};

    fn small(g: f64, gamma: f64, kappa: f64) -> SystemParams {
        SystemParams { g, gamma, kappa, n_transmon: 3, n_cavity: 3, ..SystemParams::reference() }
    }

    #[test]
    fn bessel_reference_values() {
        let j = bessel_j_sequence(1.0, 3);
        assert!((j[0] - 0.765_197_686_557_966_6).abs() < 1e-15);
        assert!((j[1] - 0.440_050_585_744_933_5).abs() < 1e-15);
        let j = bessel_j_sequence(10.0, 5);
        assert!((j[0] + 0.245_935_764_451_348_3).abs() < 1e-14);
        assert!((j[5] + 0.234_061_528_186_793_6).abs() < 1e-14);
        let j = bessel_j_sequence(150.0, 250);
        let s: f64 = j[0] * j[0] + 2.0 * j[1..].iter().map(|x| x * x).sum::<f64>();
        assert!((s - 1.0).abs() < 1e-12);
    }

    #[test]
    fn field_free_eigenstate_acquires_phase() {
        let p = small(mhz(70.0), 0.0, 0.0);
        let ops = build_operators(&p).unwrap();
        let (vals, vecs) = hermitian_eigen(&ops.h_drift);
        let grid = TimeGrid::span(ns(20.0), 200).unwrap();
        let pulse = crate::pulse::ControlPulse::zeros(grid, p.omega_r);
        let k = 7;
        let psi0: Vec<C64> = vecs.column(k).iter().copied().collect();
        let psi = propagate_state(&psi0, &ops, &pulse, Mode::Hermitian, &PropagatorConfig::default()).unwrap();
        let expected = cis(-vals[k] * ns(20.0));
        for (a, b) in psi.iter().zip(&psi0) {
            assert!((a - b * expected).norm() < 1e-11);
        }
    }

    #[test]
    fn two_level_resonant_rabi() {
        // σ_x/2 control on a resonant two-level system: P₁ = sin²(A/2)
        let drift = CMatrix::zeros(2, 2);
        let sx = CMatrix::from_row_slice(2, 2, &[ZERO, c(0.5, 0.0), c(0.5, 0.0), ZERO]);
        let g = Generator::new(&drift, &sx, &CMatrix::zeros(2, 2)).unwrap();
        let t = ns(40.0);
        let e0 = mhz(20.0);
        let grid = TimeGrid::span(t, 800).unwrap();
        let pulse = blackman_pulse(grid, e0, 0.0).unwrap();
        let area: f64 = pulse.samples.iter().map(|z| z.re).sum::<f64>() * grid.dt();
        let out = propagate(&g, &pulse, &[c(1.0, 0.0), ZERO], &PropagatorConfig::default()).unwrap();
        let expected = Float::sin(area / 2.0).powi(2);
        assert!((out[1].norm_sqr() - expected).abs() < 1e-8);
        // the midpoint sum is a quadrature of the analytic area 0.42 E0 T
        assert!((area - 0.42 * e0 * t).abs() < 1e-6 * area);
        let _ = blackman(0.0, 1.0);
    }

    #[test]
    fn effective_decay_matches_exponential() {
        let p = small(0.0, mhz(0.5), 0.0);
        let ops = build_operators(&p).unwrap();
        let grid = TimeGrid::span(ns(100.0), 100).unwrap();
        let pulse = crate::pulse::ControlPulse::zeros(grid, p.omega_r);
        let mut psi0 = vec![ZERO; ops.dim()];
        psi0[basis_index(1, 0, 0, 3, 3)] = c(1.0, 0.0);
        let psi = propagate_state(&psi0, &ops, &pulse, Mode::Effective, &PropagatorConfig::default()).unwrap();
        let n2: f64 = psi.iter().map(|z| z.norm_sqr()).sum();
        assert!((n2 - Float::exp(-p.gamma * ns(100.0))).abs() < 1e-10);
    }

    #[test]
    fn block_rate_absorbs_top_level() {
        let p = small(mhz(70.0), 0.0, 0.0);
        let ops = build_operators(&p).unwrap();
        let block = 100.0 * p.g;
        let cfg = PropagatorConfig { block_rate: block, ..Default::default() };
        let t = 2.0 / block;
        let grid = TimeGrid::span(t, 4).unwrap();
        let pulse = crate::pulse::ControlPulse::zeros(grid, p.omega_r);
        let mut psi0 = vec![ZERO; ops.dim()];
        psi0[basis_index(2, 0, 0, 3, 3)] = c(1.0, 0.0);
        let psi = propagate_state(&psi0, &ops, &pulse, Mode::Effective, &cfg).unwrap();
        let n2: f64 = psi.iter().map(|z| z.norm_sqr()).sum();
        assert!(n2 <= Float::exp(-1.0), "{n2}");
    }

    #[test]
    fn lindblad_closed_matches_state() {
        let p = small(mhz(70.0), 0.0, 0.0);
        let ops = build_operators(&p).unwrap();
        let grid = TimeGrid::span(ns(10.0), 200).unwrap();
        let pulse = blackman_pulse(grid, mhz(150.0), p.omega_r).unwrap();
        let mut psi0 = vec![ZERO; ops.dim()];
        psi0[basis_index(1, 0, 0, 3, 3)] = c(0.6, 0.0);
        psi0[basis_index(0, 1, 0, 3, 3)] = c(0.0, 0.8);
        let cfg = PropagatorConfig::default();
        let psi = propagate_state(&psi0, &ops, &pulse, Mode::Hermitian, &cfg).unwrap();
        let rho0 = CMatrix::from_fn(ops.dim(), ops.dim(), |a, b| psi0[a] * psi0[b].conj());
        let rho = propagate_density(&rho0, &ops, &pulse, &cfg).unwrap();
        let expected = CMatrix::from_fn(ops.dim(), ops.dim(), |a, b| psi[a] * psi[b].conj());
        assert!((rho - expected).iter().all(|z| z.norm() < 1e-9));
    }

    #[test]
    fn lindblad_single_qubit_decay() {
        let p = small(0.0, mhz(1.0), 0.0);
        let ops = build_operators(&p).unwrap();
        let t = ns(200.0);
        let grid = TimeGrid::span(t, 50).unwrap();
        let pulse = crate::pulse::ControlPulse::zeros(grid, p.omega_r);
        let i0 = basis_index(0, 0, 0, 3, 3);
        let i1 = basis_index(1, 0, 0, 3, 3);
        let mut rho0 = CMatrix::zeros(ops.dim(), ops.dim());
        rho0[(i0, i0)] = c(0.5, 0.0);
        rho0[(i1, i1)] = c(0.5, 0.0);
        rho0[(i0, i1)] = c(0.5, 0.0);
        rho0[(i1, i0)] = c(0.5, 0.0);
        let rho = propagate_density(&rho0, &ops, &pulse, &PropagatorConfig::default()).unwrap();
        let gt = p.gamma * t;
        assert!((rho[(i1, i1)].re - 0.5 * Float::exp(-gt)).abs() < 1e-10);
        // coherence also rotates at δ₁ in the rotating frame
        assert!((rho[(i0, i1)].norm() - 0.5 * Float::exp(-gt / 2.0)).abs() < 1e-10);
        let tr: f64 = (0..ops.dim()).map(|k| rho[(k, k)].re).sum();
        assert!((tr - 1.0).abs() < 1e-9);
    }

    #[test]
    fn projections() {
        let p = small(mhz(70.0), 0.0, 0.0);
        let ops = build_operators(&p).unwrap();
        let frame = diagonalize_and_assign(&ops).unwrap();
        let (coeffs, p_out) = logical_projection(&frame.logical_state(0), &frame);
        assert!((coeffs[0].re - 1.0).abs() < 1e-12 && p_out < 1e-12);
        let aux = frame.aux_state("002").unwrap();
        assert!(logical_projection(&aux, &frame).1 >= 0.9);
        let n = ops.dim();
        let mixed = CMatrix::identity(n, n) * c(1.0 / n as f64, 0.0);
        let (_, p_out) = logical_block(&mixed, &frame);
        assert!((p_out - (1.0 - 4.0 / n as f64)).abs() < 1e-12);
    }

    #[test]
    fn field_free_gate_is_diagonal_phase_gate() {
        let p = small(mhz(70.0), 0.0, 0.0);
        let ops = build_operators(&p).unwrap();
        let frame = diagonalize_and_assign(&ops).unwrap();
        let g = Generator::from_ops(&ops, Mode::Hermitian, 0.0).unwrap();
        let grid = TimeGrid::span(ns(30.0), 60).unwrap();
        let pulse = crate::pulse::ControlPulse::zeros(grid, p.omega_r);
        let u = evolve_logical_basis(&g, &pulse, &frame, &PropagatorConfig::default()).unwrap();
        assert!(unitarity_deviation(&u) < 1e-9);
        for a in 0..4 {
            for b in 0..4 {
                let expected = if a == b { 1.0 } else { 0.0 };
                assert!((u[(a, b)].norm() - expected).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn effective_gate_is_contraction() {
        let p = SystemParams { n_transmon: 3, n_cavity: 3, gamma: mhz(0.5), kappa: mhz(2.0), ..SystemParams::reference() };
        let ops = build_operators(&p).unwrap();
        let frame = diagonalize_and_assign(&ops).unwrap();
        let g = Generator::from_ops(&ops, Mode::Effective, crate::model::DEFAULT_BLOCK_RATE).unwrap();
        let grid = TimeGrid::span(ns(20.0), 400).unwrap();
        let pulse = blackman_pulse(grid, mhz(300.0), p.omega_r).unwrap();
        let u = evolve_logical_basis(&g, &pulse, &frame, &PropagatorConfig::default()).unwrap();
        let sv = u.clone().svd(false, false).singular_values;
        assert!(sv.iter().all(|&s| s <= 1.0 + 1e-9));
    }

    #[test]
    fn map_reconstruction_matches_gate_without_loss() {
        let p = small(mhz(70.0), 0.0, 0.0);
        let ops = build_operators(&p).unwrap();
        let frame = diagonalize_and_assign(&ops).unwrap();
        let grid = TimeGrid::span(ns(10.0), 100).unwrap();
        let pulse = blackman_pulse(grid, mhz(200.0), p.omega_r).unwrap();
        let cfg = PropagatorConfig::default();
        let g = Generator::from_ops(&ops, Mode::Hermitian, 0.0).unwrap();
        let u = evolve_logical_basis(&g, &pulse, &frame, &cfg).unwrap();
        let lg = LindbladGenerator::from_ops(&ops).unwrap();
        let map = evolve_logical_map(&lg, &pulse, &frame, &cfg).unwrap();
        let reference = DynamicalMap::from_gate(&u);
        for (a, b) in map.ops.iter().zip(&reference.ops) {
            assert!((a - b).iter().all(|z| z.norm() < 1e-9));
        }
    }

    #[test]
    fn grid_refinement_converges() {
        let p = small(mhz(70.0), mhz(0.2), mhz(0.5));
        let ops = build_operators(&p).unwrap();
        let mut psi0 = vec![ZERO; ops.dim()];
        psi0[basis_index(1, 1, 0, 3, 3)] = c(1.0, 0.0);
        let cfg = PropagatorConfig::default();
        let run = |n| {
            let grid = TimeGrid::span(ns(20.0), n).unwrap();
            let pulse = blackman_pulse(grid, mhz(100.0), p.omega_r).unwrap();
            propagate_state(&psi0, &ops, &pulse, Mode::Effective, &cfg).unwrap()
        };
        let a = run(8000);
        let b = run(16000);
        let d: f64 = a.iter().zip(&b).map(|(x, y)| (x - y).norm_sqr()).sum();
        assert!(Float::sqrt(d) < 1e-8, "{}", Float::sqrt(d));
    }
}
