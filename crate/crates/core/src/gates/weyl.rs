//! Cartan decomposition of two-qubit gates: Weyl-chamber coordinates, local
//! invariants, gate concurrence and the perfect-entangler polyhedron.

use core::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, PI};

use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gates::named::{pauli_x, pauli_y, pauli_z};
use crate::linalg::{c, kron, normal_eigen, unitarity_deviation, CMatrix, C64, ZERO};

/// Tolerance on `‖U†U − 1‖` accepted as unitary.
pub const UNITARITY_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeylCoords {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
}

impl WeylCoords {
    pub fn new(c1: f64, c2: f64, c3: f64) -> Self {
        WeylCoords { c1, c2, c3 }
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.c1, self.c2, self.c3]
    }

    pub fn distance(&self, other: &WeylCoords) -> f64 {
        let d = [self.c1 - other.c1, self.c2 - other.c2, self.c3 - other.c3];
        Float::sqrt(d.iter().map(|x| x * x).sum::<f64>())
    }
}

/// Named points of the chamber (radians).
pub mod points {
    use super::WeylCoords;
    use core::f64::consts::PI;

    pub const O: WeylCoords = WeylCoords { c1: 0.0, c2: 0.0, c3: 0.0 };
    pub const A1: WeylCoords = WeylCoords { c1: PI, c2: 0.0, c3: 0.0 };
    pub const A2: WeylCoords = WeylCoords { c1: PI / 2.0, c2: PI / 2.0, c3: 0.0 };
    pub const A3: WeylCoords = WeylCoords { c1: PI / 2.0, c2: PI / 2.0, c3: PI / 2.0 };
    pub const L: WeylCoords = WeylCoords { c1: PI / 2.0, c2: 0.0, c3: 0.0 };
    pub const M: WeylCoords = WeylCoords { c1: 3.0 * PI / 4.0, c2: PI / 4.0, c3: 0.0 };
    pub const N: WeylCoords = WeylCoords { c1: 3.0 * PI / 4.0, c2: PI / 4.0, c3: PI / 4.0 };
    pub const P: WeylCoords = WeylCoords { c1: PI / 4.0, c2: PI / 4.0, c3: PI / 4.0 };
    pub const Q: WeylCoords = WeylCoords { c1: PI / 4.0, c2: PI / 4.0, c3: 0.0 };
    pub const B: WeylCoords = WeylCoords { c1: PI / 2.0, c2: PI / 4.0, c3: 0.0 };
}

/// Magic (Bell) basis transformation.
pub fn magic_basis() -> CMatrix {
    let r = FRAC_1_SQRT_2;
    let (o, z, i) = (c(r, 0.0), ZERO, c(0.0, r));
    CMatrix::from_row_slice(4, 4, &[o, z, z, i, z, i, o, z, z, i, -o, z, o, z, z, -i])
}

/// `U_B = Q†UQ` and `m = U_Bᵀ U_B`.
pub fn magic_symmetric(u: &CMatrix) -> (CMatrix, CMatrix) {
    let q = magic_basis();
    let ub = q.adjoint() * u * &q;
    let m = ub.transpose() * &ub;
    (ub, m)
}

fn check_unitary(u: &CMatrix) -> Result<()> {
    if u.nrows() != 4 || u.ncols() != 4 {
        return Err(Error::DimensionMismatch { expected: 4, got: u.nrows() });
    }
    let dev = unitarity_deviation(u);
    if !(dev <= UNITARITY_TOL) {
        return Err(Error::NotUnitary(dev));
    }
    Ok(())
}

pub fn det4(u: &CMatrix) -> C64 {
    u.clone().determinant()
}

/// Makhlin invariants `(g₁, g₂, g₃)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalInvariants {
    pub g1: f64,
    pub g2: f64,
    pub g3: f64,
}

impl LocalInvariants {
    pub fn as_array(&self) -> [f64; 3] {
        [self.g1, self.g2, self.g3]
    }
}

/// `G₁ = tr²(m)/(16 det U)`, `G₂ = (tr²m − tr m²)/(4 det U)`, returning
/// `(Re G₁, Im G₁, Re G₂)` without a unitarity check.
pub fn invariants_unchecked(u: &CMatrix) -> LocalInvariants {
    let (_, m) = magic_symmetric(u);
    let det = det4(u);
    let tr = m.trace();
    let tr2 = (&m * &m).trace();
    let g1 = tr * tr / (det * 16.0);
    let g2 = (tr * tr - tr2) / (det * 4.0);
    LocalInvariants { g1: g1.re, g2: g1.im, g3: g2.re }
}

pub fn local_invariants(u: &CMatrix) -> Result<LocalInvariants> {
    check_unitary(u)?;
    Ok(invariants_unchecked(u))
}

/// Invariants of the canonical gate at `w`.
pub fn invariants_from_coords(w: &WeylCoords) -> LocalInvariants {
    let (c1, c2, c3) = (w.c1, w.c2, w.c3);
    let (cc1, cc2, cc3) = (Float::cos(c1), Float::cos(c2), Float::cos(c3));
    let (s1, s2, s3) = (Float::sin(c1), Float::sin(c2), Float::sin(c3));
    let g1 = cc1 * cc1 * cc2 * cc2 * cc3 * cc3 - s1 * s1 * s2 * s2 * s3 * s3;
    let g2 = 0.25 * Float::sin(2.0 * c1) * Float::sin(2.0 * c2) * Float::sin(2.0 * c3);
    let g3 = 4.0 * g1 - Float::cos(2.0 * c1) * Float::cos(2.0 * c2) * Float::cos(2.0 * c3);
    LocalInvariants { g1, g2, g3 }
}

/// `exp[(i/2)(c₁ XX + c₂ YY + c₃ ZZ)]`; the three terms commute and each
/// squares to one, so the exponential factorizes.
pub fn canonical_gate(w: &WeylCoords) -> CMatrix {
    let paulis = [pauli_x(), pauli_y(), pauli_z()];
    let mut u = CMatrix::identity(4, 4);
    for (coef, p) in w.as_array().iter().zip(paulis.iter()) {
        let pp = kron(p, p);
        let half = coef / 2.0;
        let term = CMatrix::identity(4, 4) * c(Float::cos(half), 0.0) + pp * c(0.0, Float::sin(half));
        u *= term;
    }
    u
}

/// Normalized eigen-angles `arg λ_k(m / det U^{1/2})` of the magic-basis
/// symmetric matrix, together with the eigenvalues and eigenvectors of `m`.
pub(crate) struct Spectrum {
    pub angles: [f64; 4],
    pub lambda: [C64; 4],
    pub vectors: CMatrix,
    pub ub: CMatrix,
}

pub(crate) fn magic_spectrum(u: &CMatrix) -> Spectrum {
    let (ub, m) = magic_symmetric(u);
    let det = det4(u);
    // principal fourth root
    let root4 = crate::linalg::cis(det.arg() / 4.0) * Float::powf(det.norm(), 0.25);
    let norm2 = root4 * root4;
    let (vals, vecs) = normal_eigen(&m);
    let mut angles = [0.0; 4];
    let mut lambda = [ZERO; 4];
    for k in 0..4 {
        lambda[k] = vals[k];
        angles[k] = (vals[k] / norm2).arg();
    }
    Spectrum { angles, lambda, vectors: vecs, ub }
}

/// Chamber coordinates (units of π, before the c₃ = 0 mirror) from the
/// normalized eigen-angles.
pub(crate) fn coords_from_angles(angles: &[f64; 4]) -> [f64; 3] {
    let mut two_s = [0.0; 4];
    for k in 0..4 {
        let mut v = angles[k] / PI;
        if v <= -0.5 {
            v += 2.0;
        }
        two_s[k] = v;
    }
    let mut s: [f64; 4] = [two_s[0] / 2.0, two_s[1] / 2.0, two_s[2] / 2.0, two_s[3] / 2.0];
    s.sort_by(|a, b| b.partial_cmp(a).unwrap_or(core::cmp::Ordering::Equal));
    let n = Float::round(s.iter().sum::<f64>()) as i64;
    let n = n.clamp(0, 4) as usize;
    for v in s.iter_mut().take(n) {
        *v -= 1.0;
    }
    s.rotate_left(n % 4);
    let mut c1 = s[0] + s[1];
    let c2 = s[0] + s[2];
    let mut c3 = s[1] + s[2];
    if c3 < 0.0 {
        c1 = 1.0 - c1;
        c3 = -c3;
    }
    [c1, c2, c3]
}

/// Mirror `(c₁, c₂, 0) → (π − c₁, c₂, 0)` for `c₁ > π/2` on the bottom face,
/// where both points are locally equivalent.
fn canonical_mirror(w: [f64; 3]) -> [f64; 3] {
    if w[2].abs() < 1e-10 && w[0] > FRAC_PI_2 {
        [PI - w[0], w[1], w[2]]
    } else {
        w
    }
}

/// Canonical Weyl-chamber coordinates (radians).
pub fn weyl_coordinates(u: &CMatrix) -> Result<WeylCoords> {
    check_unitary(u)?;
    Ok(weyl_unchecked(u))
}

pub(crate) fn weyl_unchecked(u: &CMatrix) -> WeylCoords {
    let spec = magic_spectrum(u);
    let w = coords_from_angles(&spec.angles);
    let w = canonical_mirror([w[0] * PI, w[1] * PI, w[2] * PI]);
    // clean round-off on the chamber faces
    let tidy = |x: f64| if x.abs() < 1e-13 { 0.0 } else { x };
    WeylCoords { c1: tidy(w[0]), c2: tidy(w[1]), c3: tidy(w[2]) }
}

/// The seven half-spaces `a·c ≤ b` whose intersection is the
/// perfect-entangler polyhedron (four chamber faces plus three cuts).
pub const PE_CONSTRAINTS: [([f64; 3], f64); 7] = [
    ([0.0, 0.0, -1.0], 0.0),
    ([0.0, -1.0, 1.0], 0.0),
    ([-1.0, 1.0, 0.0], 0.0),
    ([1.0, 1.0, 0.0], PI),
    ([-1.0, -1.0, 0.0], -FRAC_PI_2),
    ([1.0, -1.0, 0.0], FRAC_PI_2),
    ([0.0, 1.0, 1.0], FRAC_PI_2),
];

/// Membership in the polyhedron spanned by L, M, A₂, Q, P, N.
pub fn is_perfect_entangler(w: &WeylCoords) -> bool {
    pe_distance(w) <= 1e-9
}

fn dot3(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Solve the symmetric positive definite system `G y = r` of size ≤ 3 by
/// Gaussian elimination; `None` when singular.
fn solve_small(g: &mut [[f64; 3]; 3], r: &mut [f64; 3], n: usize) -> Option<()> {
    for col in 0..n {
        let pivot = (col..n).max_by(|&a, &b| g[a][col].abs().partial_cmp(&g[b][col].abs()).unwrap())?;
        if g[pivot][col].abs() < 1e-12 {
            return None;
        }
        g.swap(col, pivot);
        r.swap(col, pivot);
        for row in 0..n {
            if row != col {
                let f = g[row][col] / g[col][col];
                for k in col..n {
                    g[row][k] -= f * g[col][k];
                }
                r[row] -= f * r[col];
            }
        }
    }
    for k in 0..n {
        r[k] /= g[k][k];
    }
    Some(())
}

/// Euclidean projection of `w` onto the perfect-entangler polyhedron. The
/// projection lies on some face, so it is the nearest feasible point among
/// the projections onto all affine hulls of up to three active constraints.
pub fn pe_projection(w: &WeylCoords) -> WeylCoords {
    let x = w.as_array();
    let feasible = |p: &[f64; 3]| PE_CONSTRAINTS.iter().all(|(a, b)| dot3(a, p) <= b + 1e-12);
    if feasible(&x) {
        return *w;
    }
    let mut best: Option<([f64; 3], f64)> = None;
    let k = PE_CONSTRAINTS.len();
    let mut consider = |set: &[usize]| {
        let n = set.len();
        let mut g = [[0.0; 3]; 3];
        let mut r = [0.0; 3];
        for (i, &si) in set.iter().enumerate() {
            let (ai, bi) = &PE_CONSTRAINTS[si];
            r[i] = dot3(ai, &x) - bi;
            for (j, &sj) in set.iter().enumerate() {
                g[i][j] = dot3(ai, &PE_CONSTRAINTS[sj].0);
            }
        }
        if solve_small(&mut g, &mut r, n).is_none() {
            return;
        }
        let mut p = x;
        for (i, &si) in set.iter().enumerate() {
            let a = &PE_CONSTRAINTS[si].0;
            for d in 0..3 {
                p[d] -= r[i] * a[d];
            }
        }
        if feasible(&p) {
            let dist = (0..3).map(|d| (p[d] - x[d]) * (p[d] - x[d])).sum::<f64>();
            if best.is_none_or(|(_, bd)| dist < bd) {
                best = Some((p, dist));
            }
        }
    };
    for i in 0..k {
        consider(&[i]);
        for j in (i + 1)..k {
            consider(&[i, j]);
            for l in (j + 1)..k {
                consider(&[i, j, l]);
            }
        }
    }
    let (p, _) = best.expect("polyhedron vertices are always candidates");
    WeylCoords::new(p[0], p[1], p[2])
}

/// Distance to the perfect-entangler polyhedron (zero inside).
pub fn pe_distance(w: &WeylCoords) -> f64 {
    w.distance(&pe_projection(w))
}

/// Gate concurrence: one inside the perfect-entangler polyhedron, otherwise
/// `max |sin(cᵢ ± cⱼ)|`.
pub fn gate_concurrence(w: &WeylCoords) -> f64 {
    if is_perfect_entangler(w) {
        return 1.0;
    }
    let c = w.as_array();
    let mut best: f64 = 0.0;
    for i in 0..3 {
        for j in (i + 1)..3 {
            best = best.max(Float::abs(Float::sin(c[i] + c[j])));
            best = best.max(Float::abs(Float::sin(c[i] - c[j])));
        }
    }
    best.min(1.0)
}

/// Concurrence of a two-qubit pure state `(a00, a01, a10, a11)`.
pub fn state_concurrence(psi: &[C64]) -> f64 {
    2.0 * (psi[0] * psi[3] - psi[1] * psi[2]).norm()
}

/// Jacobian `∂c_i/∂θ_k` (radians per radian) of the chamber coordinates with
/// respect to the normalized eigen-angles; piecewise constant, evaluated by
/// symmetric differences.
pub(crate) fn coords_jacobian(angles: &[f64; 4]) -> [[f64; 4]; 3] {
    let h = 1e-7;
    let mut jac = [[0.0; 4]; 3];
    for k in 0..4 {
        let mut plus = *angles;
        let mut minus = *angles;
        plus[k] += h;
        minus[k] -= h;
        let cp = coords_from_angles(&plus);
        let cm = coords_from_angles(&minus);
        for i in 0..3 {
            // coordinates are in units of π
            jac[i][k] = (cp[i] - cm[i]) * PI / (2.0 * h);
        }
    }
    jac
}

/// Gradient of a function of the (pre-mirror) coordinates with respect to a
/// unitary: returns `Γ` such that `dJ = Re tr(Γ† dU)`, given `∂J/∂c`.
pub(crate) fn coords_gradient(u: &CMatrix, dj_dc: [f64; 3]) -> CMatrix {
    let spec = magic_spectrum(u);
    let jac = coords_jacobian(&spec.angles);
    let q = magic_basis();
    let mut gamma = CMatrix::zeros(4, 4);
    let mut total_dtheta = 0.0;
    for k in 0..4 {
        let w_k: f64 = (0..3).map(|i| dj_dc[i] * jac[i][k]).sum();
        if w_k == 0.0 {
            continue;
        }
        total_dtheta += w_k;
        let uk = spec.vectors.column(k).into_owned();
        let ub_conj_u = &spec.ub * uk.map(|z| z.conj());
        let wv = &spec.ub * &uk;
        // dλ/λ = tr(dU_B Y)/λ with Y = ū wᵀ + u (U_B ū)ᵀ
        let y = uk.map(|z| z.conj()) * wv.transpose() + &uk * ub_conj_u.transpose();
        let z = y * (c(0.0, -1.0) / spec.lambda[k]);
        // Re tr(Z dU_B) with dU_B = Q† dU Q
        let zp = &q * z * q.adjoint();
        gamma += zp.adjoint() * c(w_k, 0.0);
    }
    // the normalization by det^{1/2} shifts every angle by −½ Im tr(U†dU)
    gamma += u * c(0.0, -0.5 * total_dtheta);
    gamma
}
