//! Closest unitary, gate overlaps and average gate fidelity.

use num_traits::Float;

use crate::error::{Error, Result};
use crate::linalg::{CMatrix, C64};
use crate::propagate::DynamicalMap;

/// Polar factor `P = V W†` of `Ũ = V Σ W†`, with the SVD kept for
/// derivatives.
#[derive(Debug, Clone)]
pub struct Polar {
    pub unitary: CMatrix,
    pub v: CMatrix,
    pub sigma: [f64; 4],
    pub w: CMatrix,
}

pub fn polar(u: &CMatrix) -> Result<Polar> {
    if u.nrows() != 4 || u.ncols() != 4 {
        return Err(Error::DimensionMismatch { expected: 4, got: u.nrows() });
    }
    if u.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::NonFinite);
    }
    let svd = u.clone().svd(true, true);
    let v = svd.u.expect("requested");
    let w = svd.v_t.expect("requested").adjoint();
    let s = svd.singular_values;
    let sigma = [s[0], s[1], s[2], s[3]];
    let smin = sigma.iter().copied().fold(f64::INFINITY, f64::min);
    if smin < 1e-12 {
        return Err(Error::DegenerateProjection(smin));
    }
    let unitary = &v * w.adjoint();
    Ok(Polar { unitary, v, sigma, w })
}

/// Unitary nearest to `Ũ` in Frobenius norm.
pub fn closest_unitary(u: &CMatrix) -> Result<CMatrix> {
    Ok(polar(u)?.unitary)
}

/// Pull a gradient through the polar map: given `Γ` with
/// `dJ = Re tr(Γ† dP)`, return `Γ̃` with `dJ = Re tr(Γ̃† dŨ)`.
pub fn polar_pullback(p: &Polar, gamma: &CMatrix) -> CMatrix {
    let a = p.v.adjoint() * gamma * &p.w;
    let b = CMatrix::from_fn(4, 4, |i, j| (a[(i, j)] - a[(j, i)].conj()) / (p.sigma[i] + p.sigma[j]));
    &p.v * b * p.w.adjoint()
}

/// `1 − min_i ‖Ũ|i⟩‖`
pub fn pop_loss(u: &CMatrix) -> f64 {
    let mut min_norm = f64::INFINITY;
    for j in 0..u.ncols() {
        let n = Float::sqrt(u.column(j).iter().map(|z| z.norm_sqr()).sum::<f64>());
        min_norm = min_norm.min(n);
    }
    (1.0 - min_norm).max(0.0)
}

/// `tr(Ũ†Ũ)/d`
pub fn loss_factor(u: &CMatrix) -> f64 {
    u.iter().map(|z| z.norm_sqr()).sum::<f64>() / u.nrows() as f64
}

/// `F_sm = |tr(O†Ũ)|²/d²`
pub fn f_sm(u: &CMatrix, target: &CMatrix) -> f64 {
    let d = u.nrows() as f64;
    (target.adjoint() * u).trace().norm_sqr() / (d * d)
}

pub fn j_sm(u: &CMatrix, target: &CMatrix) -> f64 {
    1.0 - f_sm(u, target)
}

/// Average gate fidelity of a (possibly leaky) logical gate against `O`:
/// `[tr(MM†) + |tr M|²]/(d(d+1))` with `M = O†Ũ`.
pub fn avg_gate_fidelity(u: &CMatrix, target: &CMatrix) -> Result<f64> {
    if u.shape() != target.shape() {
        return Err(Error::DimensionMismatch { expected: target.nrows(), got: u.nrows() });
    }
    let d = u.nrows() as f64;
    let m = target.adjoint() * u;
    let trmm = m.iter().map(|z| z.norm_sqr()).sum::<f64>();
    Ok((trmm + m.trace().norm_sqr()) / (d * (d + 1.0)))
}

/// Average gate fidelity of a logical dynamical map against `O`, with
/// `Õ(X) = O† E(X) O`:
/// `F = (1/20) [Σ_ij ⟨i|Õ(|i⟩⟨j|)|j⟩ + Σ_ij ⟨j|Õ(|i⟩⟨i|)|j⟩]`.
pub fn avg_gate_fidelity_map(map: &DynamicalMap, target: &CMatrix) -> Result<f64> {
    if map.ops.len() != 16 || map.ops.iter().any(|m| m.shape() != (4, 4)) || target.shape() != (4, 4) {
        return Err(Error::DimensionMismatch { expected: 16, got: map.ops.len() });
    }
    let o = target;
    let od = target.adjoint();
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..4 {
        for j in 0..4 {
            let t = &od * map.get(i, j) * o;
            acc += t[(i, j)];
        }
        let t = &od * map.get(i, i) * o;
        acc += t.trace();
    }
    Ok(acc.re / 20.0)
}

pub fn avg_gate_error(u: &CMatrix, target: &CMatrix) -> Result<f64> {
    Ok((1.0 - avg_gate_fidelity(u, target)?).clamp(0.0, 1.0))
}

pub fn avg_gate_error_map(map: &DynamicalMap, target: &CMatrix) -> Result<f64> {
    Ok((1.0 - avg_gate_fidelity_map(map, target)?).clamp(0.0, 1.0))
}

/// `∂J_sm/∂Ũ* = −tr(O†Ũ) O / d²`
pub fn j_sm_costate_gradient(u: &CMatrix, target: &CMatrix) -> CMatrix {
    let d = u.nrows() as f64;
    let tau = (target.adjoint() * u).trace();
    target * (-tau / (d * d))
}
