//! Named one- and two-qubit gates. Two-qubit matrices use the basis
//! 00, 01, 10, 11 with the first qubit as the most significant bit.

use core::f64::consts::{FRAC_1_SQRT_2, PI};

use num_traits::Float;

use crate::linalg::{c, cis, kron, CMatrix, ONE, ZERO};

pub fn identity2() -> CMatrix {
    CMatrix::identity(2, 2)
}

pub fn identity4() -> CMatrix {
    CMatrix::identity(4, 4)
}

pub fn hadamard() -> CMatrix {
    let h = c(FRAC_1_SQRT_2, 0.0);
    CMatrix::from_row_slice(2, 2, &[h, h, h, -h])
}

/// `diag(1, e^{−iπ/4})`
pub fn s_pi8() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[ONE, ZERO, ZERO, cis(-PI / 4.0)])
}

pub fn pauli_x() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO])
}

pub fn pauli_y() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[ZERO, c(0.0, -1.0), c(0.0, 1.0), ZERO])
}

pub fn pauli_z() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[ONE, ZERO, ZERO, -ONE])
}

pub fn cnot() -> CMatrix {
    let mut m = CMatrix::zeros(4, 4);
    m[(0, 0)] = ONE;
    m[(1, 1)] = ONE;
    m[(2, 3)] = ONE;
    m[(3, 2)] = ONE;
    m
}

pub fn cphase() -> CMatrix {
    let mut m = identity4();
    m[(3, 3)] = -ONE;
    m
}

pub fn swap() -> CMatrix {
    let mut m = CMatrix::zeros(4, 4);
    m[(0, 0)] = ONE;
    m[(1, 2)] = ONE;
    m[(2, 1)] = ONE;
    m[(3, 3)] = ONE;
    m
}

pub fn iswap() -> CMatrix {
    let mut m = CMatrix::zeros(4, 4);
    m[(0, 0)] = ONE;
    m[(1, 2)] = c(0.0, 1.0);
    m[(2, 1)] = c(0.0, 1.0);
    m[(3, 3)] = ONE;
    m
}

pub fn sqrt_iswap() -> CMatrix {
    let mut m = CMatrix::zeros(4, 4);
    let r = c(FRAC_1_SQRT_2, 0.0);
    m[(0, 0)] = ONE;
    m[(1, 1)] = r;
    m[(2, 2)] = r;
    m[(1, 2)] = c(0.0, FRAC_1_SQRT_2);
    m[(2, 1)] = c(0.0, FRAC_1_SQRT_2);
    m[(3, 3)] = ONE;
    m
}

pub fn bgate() -> CMatrix {
    let (c1, s1) = (Float::cos(PI / 8.0), Float::sin(PI / 8.0));
    let (c3, s3) = (Float::cos(3.0 * PI / 8.0), Float::sin(3.0 * PI / 8.0));
    CMatrix::from_row_slice(
        4,
        4,
        &[
            c(c1, 0.0), ZERO, ZERO, c(0.0, s1),
            ZERO, c(c3, 0.0), c(0.0, s3), ZERO,
            ZERO, c(0.0, s3), c(c3, 0.0), ZERO,
            c(0.0, s1), ZERO, ZERO, c(c1, 0.0),
        ],
    )
}

pub fn h_x_1() -> CMatrix {
    kron(&hadamard(), &identity2())
}

pub fn one_x_h() -> CMatrix {
    kron(&identity2(), &hadamard())
}

pub fn s_x_1() -> CMatrix {
    kron(&s_pi8(), &identity2())
}

pub fn one_x_s() -> CMatrix {
    kron(&identity2(), &s_pi8())
}

/// Look up a gate by name (case-insensitive): identity, cnot, cphase, swap,
/// iswap, sqrt_iswap, bgate, h1 (H⊗1), h2 (1⊗H), s1 (S⊗1), s2 (1⊗S).
pub fn by_name(name: &str) -> Option<CMatrix> {
    let lower = name.to_ascii_lowercase();
    let g = match lower.as_str() {
        "identity" | "id" | "i" => identity4(),
        "cnot" => cnot(),
        "cphase" | "cz" => cphase(),
        "swap" => swap(),
        "iswap" => iswap(),
        "sqrt_iswap" | "sqrtiswap" => sqrt_iswap(),
        "bgate" | "b" => bgate(),
        "h1" | "hx1" | "h_x_1" => h_x_1(),
        "h2" | "1xh" | "one_x_h" => one_x_h(),
        "s1" | "sx1" | "s_x_1" => s_x_1(),
        "s2" | "1xs" | "one_x_s" => one_x_s(),
        _ => return None,
    };
    Some(g)
}

pub const GATE_NAMES: [&str; 11] = ["identity", "cnot", "cphase", "swap", "iswap", "sqrt_iswap", "bgate", "h1", "h2", "s1", "s2"];

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::unitarity_deviation;

    #[test]
    fn all_named_gates_are_unitary() {
        for name in GATE_NAMES {
            let g = by_name(name).unwrap();
            assert!(unitarity_deviation(&g) < 1e-15, "{name}");
        }
        assert!(by_name("nope").is_none());
    }

    #[test]
    fn s_pi8_is_diagonal() {
        let s = s_pi8();
        assert_eq!(s[(0, 0)], ONE);
        assert_eq!(s[(0, 1)], ZERO);
        assert!((s[(1, 1)] - c(FRAC_1_SQRT_2, -FRAC_1_SQRT_2)).norm() < 1e-15);
    }

    #[test]
    fn sqrt_iswap_squares_to_iswap() {
        let s = sqrt_iswap();
        assert!((&s * &s - iswap()).iter().all(|z| z.norm() < 1e-15));
    }
}
