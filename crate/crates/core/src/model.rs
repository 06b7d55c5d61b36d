//! Two transmons coupled to a shared, driven cavity in the rotating frame.
//!
//! With `δ_j = ω_j − ω_r` the drift Hamiltonian is
//!
//! ```text
//! H₀ = Σ_q [δ_q b_q†b_q + (α_q/2) b_q†b_q†b_q b_q + g (b_q†a + b_q a†)] + δ_c a†a
//! ```
//!
//! and the complex cavity drive enters as `½(ε a + ε* a†)`, i.e.
//! `H(t) = H₀ + Re ε(t) · ½(a + a†) + Im ε(t) · ½ i(a − a†)`.

use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{c, identity, kron, CMatrix, C64, ZERO};
use crate::units::{ghz, mhz};

/// Default cap on the total Hilbert-space dimension.
pub const DEFAULT_DIMENSION_CAP: usize = 4096;

/// Rate used in place of an infinite decay rate on the top transmon and
/// cavity levels (2π · 7 GHz, one hundred times the default coupling).
pub const DEFAULT_BLOCK_RATE: f64 = 2.0 * core::f64::consts::PI * 7.0e9;

/// Stand-in for the universal-set working point: `Δ₂/α = −0.45`,
/// `Δc/g = 3.0`. The cavity frequency of the original working point is not
/// published; this point sits inside the quasi-dispersive window
/// `1 < Δc/g < 10` with the qubits straddling each other's anharmonic
/// transition. It is a documented substitute, not a published value.
pub const POINT_X_TILDE: (f64, f64) = (-0.45, 3.0);

/// Physical parameters of one point of the design landscape.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    pub omega1: f64,
    pub omega2: f64,
    pub omega_c: f64,
    pub alpha1: f64,
    pub alpha2: f64,
    pub g: f64,
    pub gamma: f64,
    pub kappa: f64,
    pub omega_r: f64,
    pub n_transmon: usize,
    pub n_cavity: usize,
}

impl SystemParams {
    /// Fixed values of the reference device: ω₁/2π = 6 GHz,
    /// α₁/2π = −290 MHz, α₂/2π = −310 MHz, g/2π = 70 MHz,
    /// γ/2π = 0.012 MHz, κ/2π = 0.05 MHz. ω₂ and ω_c are placed at
    /// [`POINT_X_TILDE`] and the rotating frame sits midway between the qubits.
    pub fn reference() -> Self {
        let base = SystemParams {
            omega1: ghz(6.0),
            omega2: ghz(6.0),
            omega_c: ghz(6.0),
            alpha1: mhz(-290.0),
            alpha2: mhz(-310.0),
            g: mhz(70.0),
            gamma: mhz(0.012),
            kappa: mhz(0.05),
            omega_r: ghz(6.0),
            n_transmon: 5,
            n_cavity: 6,
        };
        let (p, _) = landscape_point(POINT_X_TILDE.0, POINT_X_TILDE.1, &base);
        SystemParams { omega_r: 0.5 * (p.omega1 + p.omega2), ..p }
    }

    /// `α = |α₁ + α₂| / 2`
    pub fn alpha(&self) -> f64 {
        (self.alpha1 + self.alpha2).abs() / 2.0
    }

    /// `Δ₂ = ω₂ − ω₁`
    pub fn delta2(&self) -> f64 {
        self.omega2 - self.omega1
    }

    /// `Δ_c = ω_c − ω₁`
    pub fn delta_c(&self) -> f64 {
        self.omega_c - self.omega1
    }

    pub fn delta2_over_alpha(&self) -> f64 {
        self.delta2() / self.alpha()
    }

    pub fn deltac_over_g(&self) -> f64 {
        self.delta_c() / self.g
    }

    pub fn dim(&self) -> usize {
        self.n_transmon * self.n_transmon * self.n_cavity
    }

    pub fn with_rotating_frame(&self, omega_r: f64) -> Self {
        SystemParams { omega_r, ..*self }
    }

    pub fn without_dissipation(&self) -> Self {
        SystemParams { gamma: 0.0, kappa: 0.0, ..*self }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_transmon < 3 {
            return Err(Error::InvalidParams(format!(
                "n_transmon = {} but at least 3 transmon levels are required",
                self.n_transmon
            )));
        }
        if self.n_cavity < 2 {
            return Err(Error::InvalidParams(format!(
                "n_cavity = {} but at least 2 cavity levels are required",
                self.n_cavity
            )));
        }
        let finite = [
            self.omega1,
            self.omega2,
            self.omega_c,
            self.alpha1,
            self.alpha2,
            self.g,
            self.gamma,
            self.kappa,
            self.omega_r,
        ]
        .iter()
        .all(|x| x.is_finite());
        if !finite {
            return Err(Error::InvalidParams("non-finite parameter".into()));
        }
        // g = 0 and α₁ = α₂ = 0 are accepted: they are the uncoupled and
        // harmonic reference limits.
        if self.g < 0.0 {
            return Err(Error::InvalidParams("coupling g must be non-negative".into()));
        }
        if self.gamma < 0.0 || self.kappa < 0.0 {
            return Err(Error::InvalidParams("decay rates must be non-negative".into()));
        }
        Ok(())
    }
}

/// Basis index of `|i j n⟩` (transmon 1, transmon 2, cavity).
#[inline]
pub fn basis_index(i: usize, j: usize, n: usize, n_transmon: usize, n_cavity: usize) -> usize {
    i * n_transmon * n_cavity + j * n_cavity + n
}

/// Inverse of [`basis_index`].
#[inline]
pub fn basis_label(index: usize, n_transmon: usize, n_cavity: usize) -> (usize, usize, usize) {
    let i = index / (n_transmon * n_cavity);
    let rem = index % (n_transmon * n_cavity);
    (i, rem / n_cavity, rem % n_cavity)
}

/// Truncated lowering operator, `⟨n−1|b|n⟩ = √n`.
pub fn lowering(n: usize) -> CMatrix {
    let mut m = CMatrix::zeros(n, n);
    for k in 1..n {
        m[(k - 1, k)] = c(libm::sqrt(k as f64), 0.0);
    }
    m
}

/// All operators of the model on the full truncated space.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorSet {
    pub n_transmon: usize,
    pub n_cavity: usize,
    pub b1: CMatrix,
    pub b2: CMatrix,
    pub a: CMatrix,
    pub h_drift: CMatrix,
    /// Multiplies `Re ε(t)`.
    pub h_ctrl_re: CMatrix,
    /// Multiplies `Im ε(t)`.
    pub h_ctrl_im: CMatrix,
    /// `(A, rate)` pairs; the dissipator uses `√rate · A`.
    pub lindblad_ops: Vec<(CMatrix, f64)>,
}

impl OperatorSet {
    pub fn dim(&self) -> usize {
        self.h_drift.nrows()
    }

    /// Total excitation number `b₁†b₁ + b₂†b₂ + a†a` (diagonal).
    pub fn excitation_number(&self) -> CMatrix {
        self.b1.adjoint() * &self.b1 + self.b2.adjoint() * &self.b2 + self.a.adjoint() * &self.a
    }

    /// `Σ_i rate_i A_i†A_i`
    pub fn decay_operator(&self) -> CMatrix {
        let n = self.dim();
        let mut g = CMatrix::zeros(n, n);
        for (op, rate) in &self.lindblad_ops {
            // (A†A)_ij = Σ_k conj(A_ki) A_kj over the nonzeros of each row
            for k in 0..n {
                let nz: Vec<(usize, C64)> = (0..n).map(|j| (j, op[(k, j)])).filter(|(_, z)| *z != ZERO).collect();
                for &(i, zi) in &nz {
                    for &(j, zj) in &nz {
                        g[(i, j)] += zi.conj() * zj * *rate;
                    }
                }
            }
        }
        g
    }

    /// Projector onto basis states with a transmon in its top level or the
    /// cavity in its top level.
    pub fn top_level_projector(&self) -> CMatrix {
        let n = self.dim();
        let mut p = CMatrix::zeros(n, n);
        for k in 0..n {
            let (i, j, m) = basis_label(k, self.n_transmon, self.n_cavity);
            if i == self.n_transmon - 1 || j == self.n_transmon - 1 || m == self.n_cavity - 1 {
                p[(k, k)] = c(1.0, 0.0);
            }
        }
        p
    }
}

pub fn build_operators(params: &SystemParams) -> Result<OperatorSet> {
    build_operators_with_cap(params, DEFAULT_DIMENSION_CAP)
}

pub fn build_operators_with_cap(params: &SystemParams, cap: usize) -> Result<OperatorSet> {
    params.validate()?;
    let nt = params.n_transmon;
    let nc = params.n_cavity;
    let dim = nt * nt * nc;
    if dim > cap {
        return Err(Error::DimensionOverflow { dim, cap });
    }
    let bt = lowering(nt);
    let ac = lowering(nc);
    let it = identity(nt);
    let ic = identity(nc);
    let kron3 = |x: &CMatrix, y: &CMatrix, z: &CMatrix| kron(&kron(x, y), z);
    let b1 = kron3(&bt, &it, &ic);
    let b2 = kron3(&it, &bt, &ic);
    let a = kron3(&it, &it, &ac);

    // assemble from single-mode factors; dense products at full size are slow
    let wr = params.omega_r;
    let btd = bt.adjoint();
    let acd = ac.adjoint();
    let num = &btd * &bt;
    let anh = &btd * &btd * &bt * &bt;
    let transmon = |omega: f64, alpha: f64| &num * c(omega - wr, 0.0) + &anh * c(alpha / 2.0, 0.0);
    let gc = c(params.g, 0.0);
    let mut h = kron3(&transmon(params.omega1, params.alpha1), &it, &ic);
    h += kron3(&it, &transmon(params.omega2, params.alpha2), &ic);
    h += kron3(&it, &it, &(&acd * &ac * c(params.omega_c - wr, 0.0)));
    h += (kron3(&btd, &it, &ac) + kron3(&bt, &it, &acd) + kron3(&it, &btd, &ac) + kron3(&it, &bt, &acd)) * gc;

    let h_ctrl_re = (&a + a.adjoint()) * c(0.5, 0.0);
    let h_ctrl_im = (&a - a.adjoint()) * c(0.0, 0.5);

    let lindblad_ops = alloc::vec![(b1.clone(), params.gamma), (b2.clone(), params.gamma), (a.clone(), params.kappa)];
    Ok(OperatorSet {
        n_transmon: nt,
        n_cavity: nc,
        b1,
        b2,
        a,
        h_drift: h,
        h_ctrl_re,
        h_ctrl_im,
        lindblad_ops,
    })
}

/// `H_eff = H₀ − (i/2) Σ rate_i A_i†A_i − (i/2) block_rate · P_top`.
pub fn build_effective_hamiltonian(ops: &OperatorSet, block_rate: f64) -> Result<CMatrix> {
    if !(block_rate >= 0.0) {
        return Err(Error::InvalidParams("block_rate must be non-negative".into()));
    }
    let n = ops.dim();
    for (op, _) in &ops.lindblad_ops {
        if op.nrows() != n || op.ncols() != n {
            return Err(Error::DimensionMismatch { expected: n, got: op.nrows() });
        }
    }
    let mut h = ops.h_drift.clone();
    h += ops.decay_operator() * c(0.0, -0.5);
    if block_rate > 0.0 {
        h += ops.top_level_projector() * c(0.0, -0.5 * block_rate);
    }
    Ok(h)
}

/// Scan window of the reference design: ω₂/2π ∈ [5, 7] GHz and
/// ω_c/2π ∈ [4.5, 9] GHz.
pub const OMEGA2_WINDOW_GHZ: (f64, f64) = (5.0, 7.0);
pub const OMEGAC_WINDOW_GHZ: (f64, f64) = (4.5, 9.0);

/// Landscape coordinates `(Δ₂/α, Δc/g)` spanned by the scan window for the
/// fixed `ω₁, α, g` of `base`.
pub fn window_ratios(base: &SystemParams) -> ((f64, f64), (f64, f64)) {
    let d2 = (
        (ghz(OMEGA2_WINDOW_GHZ.0) - base.omega1) / base.alpha(),
        (ghz(OMEGA2_WINDOW_GHZ.1) - base.omega1) / base.alpha(),
    );
    let dc = (
        (ghz(OMEGAC_WINDOW_GHZ.0) - base.omega1) / base.g,
        (ghz(OMEGAC_WINDOW_GHZ.1) - base.omega1) / base.g,
    );
    (d2, dc)
}

/// Parameters at landscape coordinates `(Δ₂/α, Δc/g)`, keeping ω₁, g, α₁, α₂
/// (and everything else) from `base`. The flag is `true` when ω₂ or ω_c
/// falls outside the scan window (beyond a relative slack of 1e-3 of the
/// window width).
pub fn landscape_point(delta2_over_alpha: f64, deltac_over_g: f64, base: &SystemParams) -> (SystemParams, bool) {
    let omega2 = base.omega1 + delta2_over_alpha * base.alpha();
    let omega_c = base.omega1 + deltac_over_g * base.g;
    let outside = |w: f64, (lo, hi): (f64, f64)| {
        let (lo, hi) = (ghz(lo), ghz(hi));
        let slack = 1e-3 * (hi - lo);
        w < lo - slack || w > hi + slack
    };
    let warn = outside(omega2, OMEGA2_WINDOW_GHZ) || outside(omega_c, OMEGAC_WINDOW_GHZ);
    (SystemParams { omega2, omega_c, ..*base }, warn)
}

/// Excitation number of every basis state.
pub fn excitation_numbers(n_transmon: usize, n_cavity: usize) -> Vec<usize> {
    (0..n_transmon * n_transmon * n_cavity)
        .map(|k| {
            let (i, j, n) = basis_label(k, n_transmon, n_cavity);
            i + j + n
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{hermiticity_deviation, hermitian_eigen, ZERO};
    use crate::units::to_ghz;

    fn uncoupled() -> SystemParams {
        SystemParams {
            omega1: ghz(6.0),
            omega2: ghz(5.7),
            omega_c: ghz(7.1),
            alpha1: 0.0,
            alpha2: 0.0,
            g: 0.0,
            gamma: 0.0,
            kappa: 0.0,
            omega_r: 0.0,
            n_transmon: 3,
            n_cavity: 2,
        }
    }

    #[test]
    fn uncoupled_harmonic_limit_is_diagonal() {
        let p = uncoupled();
        let ops = build_operators(&p).unwrap();
        for r in 0..ops.dim() {
            for col in 0..ops.dim() {
                let z = ops.h_drift[(r, col)];
                if r == col {
                    let (i, j, n) = basis_label(r, p.n_transmon, p.n_cavity);
                    let e = p.omega1 * i as f64 + p.omega2 * j as f64 + p.omega_c * n as f64;
                    assert!((z.re - e).abs() <= 1e-15 * e.abs() && z.im == 0.0);
                } else {
                    assert_eq!(z, ZERO);
                }
            }
        }
    }

    #[test]
    fn drift_is_hermitian_and_conserves_excitations() {
        let ops = build_operators(&SystemParams::reference()).unwrap();
        assert_eq!(ops.dim(), 150);
        assert_eq!(hermiticity_deviation(&ops.h_drift), 0.0);
        assert_eq!(hermiticity_deviation(&ops.h_ctrl_re), 0.0);
        assert_eq!(hermiticity_deviation(&ops.h_ctrl_im), 0.0);
        let n = ops.excitation_number();
        let comm = &ops.h_drift * &n - &n * &ops.h_drift;
        let scale = ops.h_drift.iter().map(|z| z.norm()).fold(0.0, f64::max);
        assert!(comm.iter().all(|z| z.norm() <= 1e-12 * scale));
    }

    #[test]
    fn ladder_relation() {
        let b = lowering(5);
        for r in 0..5 {
            for col in 0..5 {
                let expected = if col == r + 1 { libm::sqrt(col as f64) } else { 0.0 };
                assert_eq!(b[(r, col)].re, expected);
            }
        }
    }

    #[test]
    fn rotating_frame_detuning_at_reference_frame() {
        let p = SystemParams::reference();
        assert!((to_ghz(p.omega_r) - 5.9325).abs() < 1e-12);
        let delta1 = p.omega1 - p.omega_r;
        assert!((crate::units::to_mhz(delta1) - 67.5).abs() < 1e-9);
        let ops = build_operators(&p).unwrap();
        let k = basis_index(1, 0, 0, 5, 6);
        // bare diagonal element of |100⟩ is δ₁
        assert!((ops.h_drift[(k, k)].re - delta1).abs() < 1e-3);
    }

    #[test]
    fn jaynes_cummings_doublet() {
        // two-level transmon (via a private builder) resonant with the cavity
        let g = mhz(70.0);
        let delta = mhz(40.0);
        let nt = 2;
        let nc = 2;
        let bt = lowering(nt);
        let ac = lowering(nc);
        let b1 = kron(&kron(&bt, &identity(nt)), &identity(nc));
        let a = kron(&kron(&identity(nt), &identity(nt)), &ac);
        let h = b1.adjoint() * &b1 * c(delta, 0.0) + a.adjoint() * &a * c(delta, 0.0) + (b1.adjoint() * &a + &b1 * a.adjoint()) * c(g, 0.0);
        // single-excitation block {|100⟩, |001⟩}
        let i100 = basis_index(1, 0, 0, nt, nc);
        let i001 = basis_index(0, 0, 1, nt, nc);
        let block = CMatrix::from_row_slice(2, 2, &[h[(i100, i100)], h[(i100, i001)], h[(i001, i100)], h[(i001, i001)]]);
        let (vals, _) = hermitian_eigen(&block);
        assert!((vals[0] - (delta - g)).abs() < 1e-6 * g);
        assert!((vals[1] - (delta + g)).abs() < 1e-6 * g);
    }

    #[test]
    fn effective_hamiltonian_decay_terms() {
        let p = SystemParams { gamma: mhz(1.0), kappa: 0.0, ..SystemParams::reference() };
        let ops = build_operators(&p).unwrap();
        let h = build_effective_hamiltonian(&ops, 0.0).unwrap();
        let k = basis_index(1, 0, 0, 5, 6);
        assert!((h[(k, k)].im + p.gamma / 2.0).abs() < 1e-9 * p.gamma);
        let p0 = SystemParams { gamma: 0.0, kappa: 0.0, ..p };
        let ops0 = build_operators(&p0).unwrap();
        assert_eq!(build_effective_hamiltonian(&ops0, 0.0).unwrap(), ops0.h_drift);
        assert!(build_effective_hamiltonian(&ops0, -1.0).is_err());
    }

    #[test]
    fn invalid_truncation_and_cap() {
        let p = SystemParams { n_transmon: 2, ..SystemParams::reference() };
        assert!(matches!(build_operators(&p), Err(Error::InvalidParams(_))));
        let p = SystemParams { n_cavity: 1, ..SystemParams::reference() };
        assert!(matches!(build_operators(&p), Err(Error::InvalidParams(_))));
        assert!(matches!(
            build_operators_with_cap(&SystemParams::reference(), 100),
            Err(Error::DimensionOverflow { dim: 150, cap: 100 })
        ));
    }

    #[test]
    fn landscape_point_examples() {
        let base = SystemParams::reference();
        let (p, warn) = landscape_point(0.0, 0.0, &base);
        assert_eq!(p.omega2, p.omega1);
        assert_eq!(p.omega_c, p.omega1);
        assert!(!warn);
        let (p, _) = landscape_point(-0.45, 3.0, &base);
        assert!((to_ghz(p.omega2) - 5.865).abs() < 1e-12);
        let (p, warn) = landscape_point(3.33, 42.9, &base);
        assert!((to_ghz(p.omega2) - 7.0).abs() < 2e-3);
        assert!((to_ghz(p.omega_c) - 9.0).abs() < 5e-3);
        assert!(!warn);
        let (_, warn) = landscape_point(5.0, 0.0, &base);
        assert!(warn);
    }

    #[test]
    fn build_is_deterministic() {
        let p = SystemParams::reference();
        assert_eq!(build_operators(&p).unwrap(), build_operators(&p).unwrap());
    }
}
