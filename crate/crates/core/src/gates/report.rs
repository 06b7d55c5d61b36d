use serde::{Deserialize, Serialize};

use crate::gates::fidelity::{avg_gate_error, avg_gate_error_map, j_sm, loss_factor, polar, pop_loss};
use crate::gates::functionals::{j_li, j_pe};
use crate::gates::weyl::{gate_concurrence, is_perfect_entangler, local_invariants, weyl_unchecked, LocalInvariants, WeylCoords};
use crate::linalg::{matrix_serde, CMatrix};
use crate::propagate::DynamicalMap;

/// Summary of a logical gate: geometry, entangling power, leakage and
/// distance to a target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateReport {
    #[serde(with = "matrix_serde")]
    pub u_tilde: CMatrix,
    /// Closest unitary; absent when `Ũ` is rank deficient.
    #[serde(with = "matrix_serde::option")]
    pub u_closest: Option<CMatrix>,
    pub weyl: Option<WeylCoords>,
    pub concurrence: Option<f64>,
    pub perfect_entangler: Option<bool>,
    pub pop_loss: f64,
    /// `tr(Ũ†Ũ)/4`
    pub loss_factor: f64,
    pub j_pe: Option<f64>,
    /// Towards the target's local class, or the identity class without a
    /// target.
    pub j_li: Option<f64>,
    pub j_sm: Option<f64>,
    /// Average gate error of `Ũ` against the target.
    pub eps_avg_closed: Option<f64>,
    /// Average gate error of the full dissipative map against the target.
    pub eps_avg: Option<f64>,
}

impl GateReport {
    pub fn new(u_tilde: &CMatrix, target: Option<&CMatrix>) -> Self {
        let p = polar(u_tilde).ok();
        let u_closest = p.map(|p| p.unitary);
        let weyl = u_closest.as_ref().map(weyl_unchecked);
        let li_target = target
            .and_then(|t| local_invariants(t).ok())
            .unwrap_or(LocalInvariants { g1: 1.0, g2: 0.0, g3: 3.0 });
        GateReport {
            u_tilde: u_tilde.clone(),
            weyl,
            concurrence: weyl.as_ref().map(gate_concurrence),
            perfect_entangler: weyl.as_ref().map(is_perfect_entangler),
            pop_loss: pop_loss(u_tilde),
            loss_factor: loss_factor(u_tilde),
            j_pe: u_closest.as_ref().and(j_pe(u_tilde).ok()),
            j_li: u_closest.as_ref().and(j_li(u_tilde, &li_target).ok()),
            j_sm: target.map(|t| j_sm(u_tilde, t)),
            eps_avg_closed: target.and_then(|t| avg_gate_error(u_tilde, t).ok()),
            eps_avg: None,
            u_closest,
        }
    }

    /// Attach the average gate error of a dissipative logical map.
    pub fn with_map(mut self, map: &DynamicalMap, target: &CMatrix) -> Self {
        self.eps_avg = avg_gate_error_map(map, target).ok();
        self
    }
}
