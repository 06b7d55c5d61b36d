//! Dense/sparse complex linear algebra helpers on top of `nalgebra`.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_traits::Float;

pub type C64 = num_complex::Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

pub const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
pub const ONE: C64 = C64 { re: 1.0, im: 0.0 };
pub const I: C64 = C64 { re: 0.0, im: 1.0 };

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// `exp(iθ)`
#[inline]
pub fn cis(theta: f64) -> C64 {
    C64::new(Float::cos(theta), Float::sin(theta))
}

pub fn frobenius(m: &CMatrix) -> f64 {
    Float::sqrt(m.iter().map(|z| z.norm_sqr()).sum::<f64>())
}

pub fn vec_norm(v: &[C64]) -> f64 {
    Float::sqrt(v.iter().map(|z| z.norm_sqr()).sum::<f64>())
}

/// `⟨a|b⟩`
pub fn inner(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// max |(U†U − 1)_ij|
pub fn unitarity_deviation(u: &CMatrix) -> f64 {
    let p = u.adjoint() * u;
    let mut dev = 0.0f64;
    for i in 0..p.nrows() {
        for j in 0..p.ncols() {
            let target = if i == j { ONE } else { ZERO };
            dev = dev.max((p[(i, j)] - target).norm());
        }
    }
    dev
}

/// max |H − H†|
pub fn hermiticity_deviation(h: &CMatrix) -> f64 {
    let mut dev = 0.0f64;
    for i in 0..h.nrows() {
        for j in 0..h.ncols() {
            dev = dev.max((h[(i, j)] - h[(j, i)].conj()).norm());
        }
    }
    dev
}

pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

pub fn identity(n: usize) -> CMatrix {
    CMatrix::identity(n, n)
}

/// Eigen-decomposition of a Hermitian matrix; eigenvalues ascending,
/// eigenvectors in the matching columns.
pub fn hermitian_eigen(h: &CMatrix) -> (Vec<f64>, CMatrix) {
    let n = h.nrows();
    // symmetrize against round-off so the solver sees an exactly Hermitian input
    let sym = CMatrix::from_fn(n, n, |i, j| (h[(i, j)] + h[(j, i)].conj()) * 0.5);
    let eig = SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[a]
            .partial_cmp(&eig.eigenvalues[b])
            .unwrap_or(core::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vectors = CMatrix::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])]);
    (values, vectors)
}

/// Eigenvalues and an orthonormal eigenbasis of a normal matrix (e.g. a
/// unitary). Uses the commuting Hermitian/anti-Hermitian parts: the
/// eigenvectors of a generic real combination of the two diagonalize both.
pub fn normal_eigen(m: &CMatrix) -> (Vec<C64>, CMatrix) {
    let n = m.nrows();
    let herm = CMatrix::from_fn(n, n, |i, j| (m[(i, j)] + m[(j, i)].conj()) * 0.5);
    let anti = CMatrix::from_fn(n, n, |i, j| (m[(i, j)] - m[(j, i)].conj()) * c(0.0, -0.5));
    let mut best: Option<(f64, Vec<C64>, CMatrix)> = None;
    for weight in [0.618_033_988_749_894_9, 1.324_717_957_244_746, core::f64::consts::E] {
        let pencil = &herm + &anti * c(weight, 0.0);
        let (_, vecs) = hermitian_eigen(&pencil);
        let mut values = Vec::with_capacity(n);
        let mut residual = 0.0f64;
        for k in 0..n {
            let v = vecs.column(k);
            let mv = m * v;
            let lambda = v.dotc(&mv);
            let r = (mv - v * lambda).norm();
            residual = residual.max(r);
            values.push(lambda);
        }
        let better = best.as_ref().is_none_or(|(r, _, _)| residual < *r);
        if better {
            best = Some((residual, values, vecs));
        }
        if residual < 1e-11 {
            break;
        }
    }
    let (_, values, vecs) = best.expect("at least one attempt");
    (values, vecs)
}

/// Compressed sparse row matrix used for fast matrix-vector products during
/// propagation.
#[derive(Debug, Clone, PartialEq)]
pub struct Csr {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub cols: Vec<usize>,
    pub vals: Vec<C64>,
}

impl Csr {
    pub fn from_dense(m: &CMatrix) -> Self {
        let n = m.nrows();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for i in 0..n {
            for j in 0..m.ncols() {
                let z = m[(i, j)];
                if z.re != 0.0 || z.im != 0.0 {
                    cols.push(j);
                    vals.push(z);
                }
            }
            row_ptr.push(cols.len());
        }
        Csr { n, row_ptr, cols, vals }
    }

    pub fn to_dense(&self) -> CMatrix {
        let mut m = CMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                m[(i, self.cols[k])] += self.vals[k];
            }
        }
        m
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    /// `out = self · x`
    #[inline]
    pub fn matvec(&self, x: &[C64], out: &mut [C64]) {
        for i in 0..self.n {
            let mut acc = ZERO;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.vals[k] * x[self.cols[k]];
            }
            out[i] = acc;
        }
    }

    /// `out += alpha · self · x`
    #[inline]
    pub fn matvec_add(&self, alpha: C64, x: &[C64], out: &mut [C64]) {
        for i in 0..self.n {
            let mut acc = ZERO;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.vals[k] * x[self.cols[k]];
            }
            out[i] += alpha * acc;
        }
    }

    pub fn adjoint(&self) -> Csr {
        Csr::from_dense(&self.to_dense().adjoint())
    }

    /// Bounds `[lo, hi]` on the spectrum of the Hermitian part `(A + A†)/2`
    /// and of the anti-Hermitian part `(A − A†)/2i` (Gershgorin discs).
    pub fn field_of_values_box(&self) -> ((f64, f64), (f64, f64)) {
        let d = self.to_dense();
        let n = self.n;
        let herm = CMatrix::from_fn(n, n, |i, j| (d[(i, j)] + d[(j, i)].conj()) * 0.5);
        let anti = CMatrix::from_fn(n, n, |i, j| (d[(i, j)] - d[(j, i)].conj()) * c(0.0, -0.5));
        (gershgorin(&herm), gershgorin(&anti))
    }
}

/// Gershgorin bounds on the (real) spectrum of a Hermitian matrix.
pub fn gershgorin(h: &CMatrix) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..h.nrows() {
        let center = h[(i, i)].re;
        let radius: f64 = (0..h.ncols()).filter(|&j| j != i).map(|j| h[(i, j)].norm()).sum();
        lo = lo.min(center - radius);
        hi = hi.max(center + radius);
    }
    if h.nrows() == 0 {
        (0.0, 0.0)
    } else {
        (lo, hi)
    }
}

/// Column-major slice view helpers for dense matrices stored as vectors.
pub fn column_mut(data: &mut [C64], n: usize, col: usize) -> &mut [C64] {
    &mut data[col * n..(col + 1) * n]
}

pub fn zeros(n: usize) -> Vec<C64> {
    vec![ZERO; n]
}


/// Serde adapter writing a complex matrix as row-major rows of `[re, im]`.
pub mod matrix_serde {
    use super::{c, CMatrix};
    use alloc::vec::Vec;
    use serde::de::Error as _;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn to_rows(m: &CMatrix) -> Vec<Vec<[f64; 2]>> {
        (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect()).collect()
    }

    pub fn from_rows(rows: &[Vec<[f64; 2]>]) -> Option<CMatrix> {
        let n = rows.len();
        let m = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != m) {
            return None;
        }
        Some(CMatrix::from_fn(n, m, |i, j| c(rows[i][j][0], rows[i][j][1])))
    }

    pub fn serialize<S: Serializer>(m: &CMatrix, s: S) -> Result<S::Ok, S::Error> {
        to_rows(m).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<CMatrix, D::Error> {
        let rows = Vec::<Vec<[f64; 2]>>::deserialize(d)?;
        from_rows(&rows).ok_or_else(|| D::Error::custom("ragged matrix rows"))
    }

    /// Same encoding for an optional matrix.
    pub mod option {
        use super::*;

        pub fn serialize<S: Serializer>(m: &Option<CMatrix>, s: S) -> Result<S::Ok, S::Error> {
            m.as_ref().map(to_rows).serialize(s)
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<CMatrix>, D::Error> {
            match Option::<Vec<Vec<[f64; 2]>>>::deserialize(d)? {
                None => Ok(None),
                Some(rows) => from_rows(&rows).map(Some).ok_or_else(|| D::Error::custom("ragged matrix rows")),
            }
        }
    }
}
