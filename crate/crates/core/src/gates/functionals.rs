//! Differentiable gate functionals on the projected logical gate `Ũ`.
//!
//! Every functional `J` is combined with the loss factor
//! `f = tr(Ũ†Ũ)/d` as `J_total = (1 − f) + f·J`, i.e.
//! `1 − J_total = f (1 − J)`, so that leakage is penalized. Gradients are
//! returned as `∂J_total/∂Ũ*`, the boundary condition of the co-states.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gates::fidelity::{f_sm, j_sm_costate_gradient, loss_factor, polar, polar_pullback};
use crate::gates::weyl::{
    coords_from_angles, coords_gradient, invariants_unchecked, magic_basis, magic_spectrum, magic_symmetric, pe_projection,
    LocalInvariants, WeylCoords,
};
use crate::linalg::{c, CMatrix};
use core::f64::consts::PI;

#[derive(Debug, Clone, PartialEq)]
pub enum Objective {
    /// `1 − |tr(O†Ũ)|²/d²`
    Overlap(CMatrix),
    /// `Σ (gᵢ − gᵢ*)²` on the closest unitary.
    LocalInvariants(LocalInvariants),
    /// Squared chamber distance to the perfect-entangler polyhedron, on the
    /// closest unitary.
    PerfectEntangler,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FunctionalValue {
    pub total: f64,
    pub main: f64,
    /// `1 − f`
    pub loss_term: f64,
}

/// Pre-mirror chamber coordinates in radians (continuous where the mirrored
/// ones jump; the polyhedron is symmetric under the mirror).
fn raw_coords(u: &CMatrix) -> WeylCoords {
    let s = magic_spectrum(u);
    let w = coords_from_angles(&s.angles);
    WeylCoords::new(w[0] * PI, w[1] * PI, w[2] * PI)
}

pub fn j_pe(u: &CMatrix) -> Result<f64> {
    let p = polar(u)?;
    let w = raw_coords(&p.unitary);
    let proj = pe_projection(&w);
    let d = w.distance(&proj);
    Ok(d * d)
}

pub fn j_li(u: &CMatrix, target: &LocalInvariants) -> Result<f64> {
    let p = polar(u)?;
    let g = invariants_unchecked(&p.unitary).as_array();
    let t = target.as_array();
    Ok((0..3).map(|k| (g[k] - t[k]) * (g[k] - t[k])).sum())
}

impl Objective {
    pub fn dim(&self) -> Option<usize> {
        match self {
            Objective::Overlap(o) => Some(o.nrows()),
            _ => Some(4),
        }
    }

    pub fn main_value(&self, u: &CMatrix) -> Result<f64> {
        self.check(u)?;
        match self {
            Objective::Overlap(o) => Ok(1.0 - f_sm(u, o)),
            Objective::LocalInvariants(t) => j_li(u, t),
            Objective::PerfectEntangler => j_pe(u),
        }
    }

    fn check(&self, u: &CMatrix) -> Result<()> {
        let d = self.dim().unwrap_or(4);
        if u.nrows() != d || u.ncols() != d {
            return Err(Error::DimensionMismatch { expected: d, got: u.nrows() });
        }
        Ok(())
    }

    /// Value and `∂J/∂Ũ*` of the main functional.
    pub fn main_gradient(&self, u: &CMatrix) -> Result<(f64, CMatrix)> {
        self.check(u)?;
        match self {
            Objective::Overlap(o) => Ok((1.0 - f_sm(u, o), j_sm_costate_gradient(u, o))),
            Objective::LocalInvariants(t) => {
                let p = polar(u)?;
                let pu = &p.unitary;
                let g = invariants_unchecked(pu);
                let (ga, ta) = (g.as_array(), t.as_array());
                let value = (0..3).map(|k| (ga[k] - ta[k]) * (ga[k] - ta[k])).sum();
                let (ub, m) = magic_symmetric(pu);
                let q = magic_basis();
                let det = crate::gates::weyl::det4(pu);
                let trm = m.trace();
                let tr2 = (&m * &m).trace();
                let g1 = trm * trm / (det * 16.0);
                let g2 = (trm * trm - tr2) / (det * 4.0);
                let pinv = pu.adjoint();
                let qubt = &q * ub.transpose() * q.adjoint();
                let k1 = &qubt * (trm / (det * 4.0)) - &pinv * g1;
                let k2 = (&qubt * trm - &q * &m * ub.transpose() * q.adjoint()) / det - &pinv * g2;
                let a = c(2.0 * (ga[0] - ta[0]), -2.0 * (ga[1] - ta[1]));
                let b = c(2.0 * (ga[2] - ta[2]), 0.0);
                let gamma = (k1 * a + k2 * b).adjoint();
                Ok((value, polar_pullback(&p, &gamma) * c(0.5, 0.0)))
            }
            Objective::PerfectEntangler => {
                let p = polar(u)?;
                let w = raw_coords(&p.unitary);
                let proj = pe_projection(&w);
                let diff = [w.c1 - proj.c1, w.c2 - proj.c2, w.c3 - proj.c3];
                let value = diff.iter().map(|x| x * x).sum();
                if value == 0.0 {
                    return Ok((0.0, CMatrix::zeros(4, 4)));
                }
                let gamma = coords_gradient(&p.unitary, [2.0 * diff[0], 2.0 * diff[1], 2.0 * diff[2]]);
                Ok((value, polar_pullback(&p, &gamma) * c(0.5, 0.0)))
            }
        }
    }

    pub fn evaluate(&self, u: &CMatrix) -> Result<FunctionalValue> {
        let main = self.main_value(u)?;
        let f = loss_factor(u);
        Ok(FunctionalValue { total: (1.0 - f) + f * main, main, loss_term: 1.0 - f })
    }

    /// Value and `∂J_total/∂Ũ*`.
    pub fn gradient(&self, u: &CMatrix) -> Result<(FunctionalValue, CMatrix)> {
        let (main, gm) = self.main_gradient(u)?;
        let d = u.nrows() as f64;
        let f = loss_factor(u);
        let grad = u * c((main - 1.0) / d, 0.0) + gm * c(f, 0.0);
        Ok((FunctionalValue { total: (1.0 - f) + f * main, main, loss_term: 1.0 - f }, grad))
    }
}
