//! Dressed spectrum and field-free observables.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{c, hermitian_eigen, CMatrix};
use crate::model::{basis_index, excitation_numbers, OperatorSet, SystemParams};

/// Logical labels in the order used everywhere: 00, 01, 10, 11 (transmon 1
/// first).
pub const LOGICAL_LABELS: [(usize, usize, usize); 4] = [(0, 0, 0), (0, 1, 0), (1, 0, 0), (1, 1, 0)];

/// Minimum lead of the assigned overlap over the runner-up eigenvector.
pub const AMBIGUITY_MARGIN: f64 = 0.2;

/// Auxiliary labels assigned alongside the logical ones.
pub const AUX_LABELS: [(usize, usize, usize); 3] = [(0, 0, 1), (0, 0, 2), (2, 0, 0)];

pub fn label_string((i, j, n): (usize, usize, usize)) -> String {
    let mut s = String::new();
    for d in [i, j, n] {
        s.push_str(&d.to_string());
    }
    s
}

/// Eigen-decomposition of the drift Hamiltonian with logical and auxiliary
/// state assignment.
#[derive(Debug, Clone, PartialEq)]
pub struct DressedFrame {
    pub n_transmon: usize,
    pub n_cavity: usize,
    /// Ascending, rad/s.
    pub eigenvalues: Vec<f64>,
    /// Columns are eigenvectors; phases fixed so that the overlap with the
    /// assigned bare state is real and positive.
    pub eigenvectors: CMatrix,
    /// Eigenvector index for 00, 01, 10, 11.
    pub logical_index: [usize; 4],
    /// Eigenvector index keyed by bare label ("001", ...).
    pub aux_index: BTreeMap<String, usize>,
    /// `|⟨bare|dressed⟩|²` of each logical assignment.
    pub logical_overlaps: [f64; 4],
    /// Set when a logical or 001 assignment has overlap below ½, or when a
    /// second eigenvector comes within [`AMBIGUITY_MARGIN`] of it.
    pub ambiguous: bool,
    /// `E₀₀ − E₀₁ − E₁₀ + E₁₁` (rad/s).
    pub zeta: f64,
}

impl DressedFrame {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Energies of 00, 01, 10, 11.
    pub fn logical_energies(&self) -> [f64; 4] {
        let mut e = [0.0; 4];
        for (k, &idx) in self.logical_index.iter().enumerate() {
            e[k] = self.eigenvalues[idx];
        }
        e
    }

    /// Dressed logical state `k` (0..4) as a full-space vector.
    pub fn logical_state(&self, k: usize) -> Vec<crate::C64> {
        self.eigenvectors.column(self.logical_index[k]).iter().copied().collect()
    }

    pub fn logical_states(&self) -> Vec<Vec<crate::C64>> {
        (0..4).map(|k| self.logical_state(k)).collect()
    }

    pub fn aux_state(&self, label: &str) -> Option<Vec<crate::C64>> {
        self.aux_index
            .get(label)
            .map(|&idx| self.eigenvectors.column(idx).iter().copied().collect())
    }

    pub fn aux_energy(&self, label: &str) -> Option<f64> {
        self.aux_index.get(label).map(|&idx| self.eigenvalues[idx])
    }
}

/// Diagonalize the drift Hamiltonian one excitation-number block at a time
/// (the drift conserves excitations); falls back to the full matrix when the
/// blocks are coupled.
fn diagonalize(ops: &OperatorSet) -> (Vec<f64>, CMatrix) {
    let h = &ops.h_drift;
    let n = h.nrows();
    let nums = excitation_numbers(ops.n_transmon, ops.n_cavity);
    let scale = h.iter().map(|z| z.norm()).fold(0.0, f64::max).max(1.0);
    let mut block_diag = true;
    'outer: for r in 0..n {
        for col in 0..n {
            if nums[r] != nums[col] && h[(r, col)].norm() > 1e-14 * scale {
                block_diag = false;
                break 'outer;
            }
        }
    }
    if !block_diag {
        return hermitian_eigen(h);
    }
    let max_n = nums.iter().copied().max().unwrap_or(0);
    let mut pairs: Vec<(f64, Vec<crate::C64>)> = Vec::with_capacity(n);
    for sector in 0..=max_n {
        let idx: Vec<usize> = (0..n).filter(|&k| nums[k] == sector).collect();
        if idx.is_empty() {
            continue;
        }
        let m = idx.len();
        let block = CMatrix::from_fn(m, m, |r, col| h[(idx[r], idx[col])]);
        let (vals, vecs) = hermitian_eigen(&block);
        for k in 0..m {
            let mut v = vec![crate::linalg::ZERO; n];
            for r in 0..m {
                v[idx[r]] = vecs[(r, k)];
            }
            pairs.push((vals[k], v));
        }
    }
    // stable sort keeps the sector order as tie-break
    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(core::cmp::Ordering::Equal));
    let vals = pairs.iter().map(|p| p.0).collect();
    let vecs = CMatrix::from_fn(n, n, |r, col| pairs[col].1[r]);
    (vals, vecs)
}

/// Greedy descending-overlap assignment of the given bare labels to
/// eigenvectors. Returns the chosen indices and their overlaps.
fn assign(
    vectors: &CMatrix,
    labels: &[(usize, usize, usize)],
    nt: usize,
    nc: usize,
) -> Result<(Vec<usize>, Vec<f64>, Vec<f64>)> {
    let n = vectors.ncols();
    let overlaps: Vec<Vec<f64>> = labels
        .iter()
        .map(|&(i, j, m)| {
            let b = basis_index(i, j, m, nt, nc);
            (0..n).map(|k| vectors[(b, k)].norm_sqr()).collect()
        })
        .collect();
    let mut candidates: Vec<(f64, usize, usize)> = Vec::with_capacity(labels.len() * n);
    for (l, row) in overlaps.iter().enumerate() {
        for (k, &o) in row.iter().enumerate() {
            candidates.push((o, l, k));
        }
    }
    candidates.sort_by(|a, b| {
        b.0.partial_cmp(&a.0)
            .unwrap_or(core::cmp::Ordering::Equal)
            .then(a.1.cmp(&b.1))
            .then(a.2.cmp(&b.2))
    });
    let mut chosen = vec![usize::MAX; labels.len()];
    let mut best = vec![0.0; labels.len()];
    let mut taken = vec![false; n];
    let mut remaining = labels.len();
    for (o, l, k) in candidates {
        if remaining == 0 {
            break;
        }
        if chosen[l] != usize::MAX || taken[k] {
            continue;
        }
        if o <= 0.0 {
            break;
        }
        chosen[l] = k;
        best[l] = o;
        taken[k] = true;
        remaining -= 1;
    }
    if remaining > 0 {
        let l = chosen.iter().position(|&k| k == usize::MAX).unwrap_or(0);
        return Err(Error::DegenerateAssignment { label: label_string(labels[l]), overlaps });
    }
    let runner_up = overlaps
        .iter()
        .zip(&chosen)
        .map(|(row, &k)| row.iter().enumerate().filter(|&(j, _)| j != k).map(|(_, &o)| o).fold(0.0, f64::max))
        .collect();
    Ok((chosen, best, runner_up))
}

/// Diagonalize the drift Hamiltonian and assign dressed logical (00, 01, 10,
/// 11) and auxiliary (001, 002, 200) states by greedy descending overlap.
pub fn diagonalize_and_assign(ops: &OperatorSet) -> Result<DressedFrame> {
    let nt = ops.n_transmon;
    let nc = ops.n_cavity;
    let (vals, mut vecs) = diagonalize(ops);
    if vals.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite);
    }

    let mut labels: Vec<(usize, usize, usize)> = LOGICAL_LABELS.to_vec();
    let aux: Vec<(usize, usize, usize)> =
        AUX_LABELS.iter().copied().filter(|&(i, j, m)| i < nt && j < nt && m < nc).collect();
    labels.extend(aux.iter().copied());
    let (chosen, overlaps, runner_up) = assign(&vecs, &labels, nt, nc)?;

    // phase convention: ⟨bare|dressed⟩ real and positive
    for (l, &(i, j, m)) in labels.iter().enumerate() {
        let b = basis_index(i, j, m, nt, nc);
        let k = chosen[l];
        let z = vecs[(b, k)];
        let norm = z.norm();
        if norm > 0.0 {
            let phase = c(z.re / norm, -z.im / norm);
            for r in 0..vecs.nrows() {
                vecs[(r, k)] *= phase;
            }
        }
    }

    let logical_index = [chosen[0], chosen[1], chosen[2], chosen[3]];
    let logical_overlaps = [overlaps[0], overlaps[1], overlaps[2], overlaps[3]];
    let ambiguous = (0..labels.len().min(5))
        .any(|l| overlaps[l] < 0.5 || overlaps[l] - runner_up[l] < AMBIGUITY_MARGIN);
    let mut aux_index = BTreeMap::new();
    for (l, &lab) in aux.iter().enumerate() {
        aux_index.insert(label_string(lab), chosen[4 + l]);
    }
    let e = |k: usize| vals[logical_index[k]];
    let zeta = e(0) - e(1) - e(2) + e(3);
    Ok(DressedFrame {
        n_transmon: nt,
        n_cavity: nc,
        eigenvalues: vals,
        eigenvectors: vecs,
        logical_index,
        aux_index,
        logical_overlaps,
        ambiguous,
        zeta,
    })
}

/// `ζ = E₀₀ − E₀₁ − E₁₀ + E₁₁`.
pub fn static_interaction(frame: &DressedFrame) -> f64 {
    let e = frame.logical_energies();
    e[0] - e[1] - e[2] + e[3]
}

/// Concurrence `|sin(ζT/2)|` of the field-free evolution.
pub fn field_free_concurrence(zeta: f64, t: f64) -> f64 {
    Float::abs(Float::sin(zeta * t / 2.0))
}

/// `T_π = π/|ζ|`; `+∞` for `ζ = 0`.
pub fn t_pi(zeta: f64) -> f64 {
    if zeta == 0.0 {
        f64::INFINITY
    } else {
        core::f64::consts::PI / Float::abs(zeta)
    }
}

/// `max_{01,10} ⟨ψ|Σ rate A†A|ψ⟩ / γ`. The absorbing top-level term is not
/// part of the physical decay and is excluded.
pub fn dressed_decay_ratio(frame: &DressedFrame, ops: &OperatorSet) -> Result<f64> {
    let gamma = ops.lindblad_ops.first().map(|(_, r)| *r).unwrap_or(0.0);
    if !(gamma > 0.0) {
        return Err(Error::InvalidParams("decay ratio requires γ > 0".into()));
    }
    // Σ rate A†A is diagonal in the bare basis for this model; use it directly
    let g = ops.decay_operator();
    let mut worst: f64 = 0.0;
    for k in [1usize, 2] {
        let v = frame.eigenvectors.column(frame.logical_index[k]);
        let gv = &g * v;
        worst = worst.max(v.dotc(&gv).re);
    }
    Ok(worst / gamma)
}

/// Average gate error of the identity under pure qubit decay with rate γ
/// for duration T.
pub fn lifetime_error_bound(gamma: f64, t: f64) -> f64 {
    let x = gamma * t;
    // expm1 form avoids cancellation for small γT
    let em = |a: f64| Float::exp_m1(-a * x);
    -(0.3 * em(1.0) + 0.05 * em(2.0) + 0.2 * em(0.5) + 0.2 * em(1.5))
}

/// Small-γT linearization `0.8·γT` of [`lifetime_error_bound`].
pub fn lifetime_error_linear(gamma: f64, t: f64) -> f64 {
    0.8 * gamma * t
}

/// Dressed shifts `(E₀₁−δ₂, E₁₀−δ₁, E₁₁−δ₁−δ₂, E₀₀₁−δ_c)` relative to
/// `E₀₀ = 0`, using rotating-frame detunings (the frame offset cancels).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Shifts {
    pub de01: f64,
    pub de10: f64,
    pub de11: f64,
    pub de_cav: f64,
}

pub fn dressed_shifts(frame: &DressedFrame, params: &SystemParams) -> Result<Shifts> {
    let e = frame.logical_energies();
    let ecav = frame.aux_energy("001").ok_or_else(|| Error::MissingAssignment("001".into()))?;
    let d1 = params.omega1 - params.omega_r;
    let d2 = params.omega2 - params.omega_r;
    let dc = params.omega_c - params.omega_r;
    Ok(Shifts {
        de01: (e[1] - e[0]) - d2,
        de10: (e[2] - e[0]) - d1,
        de11: (e[3] - e[0]) - d1 - d2,
        de_cav: (ecav - e[0]) - dc,
    })
}

/// One grid point of the field-free map.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldFreeMapRow {
    pub delta2_over_alpha: f64,
    pub deltac_over_g: f64,
    pub zeta: f64,
    pub t_pi: f64,
    pub decay_ratio: f64,
    pub shifts: Shifts,
    pub ambiguous: bool,
}

/// All field-free observables at one landscape point.
pub fn field_free_row(params: &SystemParams) -> Result<FieldFreeMapRow> {
    let ops = crate::model::build_operators(params)?;
    let frame = diagonalize_and_assign(&ops)?;
    let decay_ratio = dressed_decay_ratio(&frame, &ops)?;
    let shifts = dressed_shifts(&frame, params)?;
    Ok(FieldFreeMapRow {
        delta2_over_alpha: params.delta2_over_alpha(),
        deltac_over_g: params.deltac_over_g(),
        zeta: frame.zeta,
        t_pi: t_pi(frame.zeta),
        decay_ratio,
        shifts,
        ambiguous: frame.ambiguous,
    })
}
