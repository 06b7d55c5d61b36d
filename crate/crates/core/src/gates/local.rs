//! Recover the single-qubit factors `k₁`, `k₂` of `U = k₁ A(w) k₂`.

use alloc::vec::Vec;
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::gates::weyl::{canonical_gate, WeylCoords, UNITARITY_TOL};
use crate::linalg::{cis, frobenius, kron, unitarity_deviation, CMatrix};
use crate::optimize::simplex::{nelder_mead, SimplexOptions};
use core::f64::consts::PI;

pub const DEFAULT_RESTARTS: usize = 32;
const TARGET_RESIDUAL: f64 = 1e-6;

/// `e^{iφ} [[cos θ e^{iφ₁}, sin θ e^{iφ₂}], [−sin θ e^{−iφ₂}, cos θ e^{−iφ₁}]]`
pub fn single_qubit(phi: f64, theta: f64, phi1: f64, phi2: f64) -> CMatrix {
    let (s, co) = (Float::sin(theta), Float::cos(theta));
    let g = cis(phi);
    CMatrix::from_row_slice(2, 2, &[g * cis(phi1) * co, g * cis(phi2) * s, -g * cis(-phi2) * s, g * cis(-phi1) * co])
}

/// Local two-qubit gate from eight parameters (four per qubit).
pub fn local_gate(p: &[f64]) -> CMatrix {
    kron(&single_qubit(p[0], p[1], p[2], p[3]), &single_qubit(p[4], p[5], p[6], p[7]))
}

#[derive(Debug, Clone)]
pub struct LocalFit {
    pub k1: CMatrix,
    pub k2: CMatrix,
    /// `‖U − k₁ A(w) k₂‖_F`
    pub residual: f64,
    pub params: Vec<f64>,
}

fn residual_sq(u: &CMatrix, a: &CMatrix, p: &[f64]) -> f64 {
    let k1 = local_gate(&p[..8]);
    let k2 = local_gate(&p[8..]);
    let r = frobenius(&(u - k1 * a * k2));
    r * r
}

/// Multi-start Nelder–Mead fit over the 16 local parameters.
pub fn fit_local_operations(u: &CMatrix, w: &WeylCoords, restarts: usize, seed: u64) -> Result<LocalFit> {
    if u.shape() != (4, 4) {
        return Err(Error::DimensionMismatch { expected: 4, got: u.nrows() });
    }
    let dev = unitarity_deviation(u);
    if !(dev <= UNITARITY_TOL) {
        return Err(Error::NotUnitary(dev));
    }
    let a = canonical_gate(w);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let opts = SimplexOptions { x_tol: 1e-12, f_tol: 1e-26, max_evals: 20_000 };
    let scale = [0.3; 16];
    let mut best: Option<(f64, Vec<f64>)> = None;
    for attempt in 0..restarts.max(1) {
        let x0: Vec<f64> = if attempt == 0 {
            alloc::vec![0.0; 16]
        } else {
            (0..16).map(|_| rng.gen_range(-PI..PI)).collect()
        };
        let mut r = nelder_mead(|p| residual_sq(u, &a, p), &x0, &scale, &opts);
        // restart the simplex in place until it stops improving
        for _ in 0..20 {
            let small = [1e-2_f64.min(Float::sqrt(r.value).max(1e-6)); 16];
            let r2 = nelder_mead(|p| residual_sq(u, &a, p), &r.x, &small, &opts);
            let improved = r2.value < 0.5 * r.value;
            if r2.value <= r.value {
                r = r2;
            }
            if !improved || r.value < 1e-20 {
                break;
            }
        }
        if best.as_ref().is_none_or(|(v, _)| r.value < *v) {
            best = Some((r.value, r.x));
        }
        if let Some((v, _)) = &best {
            if Float::sqrt(*v) < 1e-9 {
                break;
            }
        }
    }
    let (v, p) = best.expect("at least one attempt");
    let residual = Float::sqrt(v.max(0.0));
    if residual >= TARGET_RESIDUAL {
        return Err(Error::NoConvergence(alloc::format!("local fit residual {residual:e} after {restarts} restarts")));
    }
    Ok(LocalFit { k1: local_gate(&p[..8]), k2: local_gate(&p[8..]), residual, params: p })
}
