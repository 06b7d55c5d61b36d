//! Random matrices and states for sampling-based checks.

use alloc::vec::Vec;
use core::f64::consts::PI;

use num_traits::Float;
use rand::Rng;

use crate::linalg::{c, kron, CMatrix, C64};

/// Standard complex normal sample (Box–Muller), `E|z|² = 1`.
pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let u1: f64 = 1.0 - rng.gen::<f64>();
    let u2: f64 = rng.gen::<f64>();
    let r = Float::sqrt(-Float::ln(u1));
    c(r * Float::cos(2.0 * PI * u2), r * Float::sin(2.0 * PI * u2))
}

/// Haar-random unitary via QR of a Ginibre matrix with the phases of `R`'s
/// diagonal divided out.
pub fn haar_unitary<R: Rng + ?Sized>(rng: &mut R, n: usize) -> CMatrix {
    let g = CMatrix::from_fn(n, n, |_, _| complex_normal(rng));
    let qr = g.qr();
    let (mut q, r) = qr.unpack();
    for j in 0..n {
        let d = r[(j, j)];
        let ph = if d.norm() > 0.0 { d / d.norm() } else { c(1.0, 0.0) };
        for i in 0..n {
            q[(i, j)] *= ph;
        }
    }
    q
}

/// `k₁ ⊗ k₂` with Haar-random single-qubit factors.
pub fn random_local<R: Rng + ?Sized>(rng: &mut R) -> CMatrix {
    let a = haar_unitary(rng, 2);
    let b = haar_unitary(rng, 2);
    kron(&a, &b)
}

/// Haar-random pure state.
pub fn haar_state<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<C64> {
    let mut v: Vec<C64> = (0..n).map(|_| complex_normal(rng)).collect();
    let norm = Float::sqrt(v.iter().map(|z| z.norm_sqr()).sum::<f64>());
    for z in v.iter_mut() {
        *z /= norm;
    }
    v
}

/// Random contraction `V diag(s) W†` with singular values in `[lo, 1]`.
pub fn random_contraction<R: Rng + ?Sized>(rng: &mut R, n: usize, lo: f64) -> CMatrix {
    let v = haar_unitary(rng, n);
    let w = haar_unitary(rng, n);
    let s = CMatrix::from_fn(n, n, |i, j| if i == j { c(lo + (1.0 - lo) * rng.gen::<f64>(), 0.0) } else { c(0.0, 0.0) });
    v * s * w.adjoint()
}
