//! Small dense complex linear-algebra helpers.

use nalgebra::DMatrix;
use num_complex::Complex64;

pub type CMatrix = DMatrix<Complex64>;

/// Matrix exponential of a small dense complex matrix by scaling and
/// squaring with a degree-13 Pade approximant (Higham 2005).
pub fn expm(a: &CMatrix) -> CMatrix {
    let n = a.nrows();
    assert_eq!(n, a.ncols());
    // 1-norm
    let norm = (0..n)
        .map(|j| a.column(j).iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0_f64, f64::max);
    let theta13 = 5.371920351148152;
    let s = if norm > theta13 {
        (norm / theta13).log2().ceil() as i32
    } else {
        0
    };
    let a = a.map(|z| z / 2f64.powi(s));

    const B: [f64; 14] = [
        64764752532480000.0,
        32382376266240000.0,
        7771770303897600.0,
        1187353796428800.0,
        129060195264000.0,
        10559470521600.0,
        670442572800.0,
        33522128640.0,
        1323241920.0,
        40840800.0,
        960960.0,
        16380.0,
        182.0,
        1.0,
    ];

    let id = CMatrix::identity(n, n);
    let a2 = &a * &a;
    let a4 = &a2 * &a2;
    let a6 = &a2 * &a4;

    let b = |i: usize| Complex64::new(B[i], 0.0);
    let u_inner = &a6 * (&a6 * b(13) + &a4 * b(11) + &a2 * b(9))
        + &a6 * b(7)
        + &a4 * b(5)
        + &a2 * b(3)
        + &id * b(1);
    let u = &a * &u_inner;
    let v = &a6 * (&a6 * b(12) + &a4 * b(10) + &a2 * b(8))
        + &a6 * b(6)
        + &a4 * b(4)
        + &a2 * b(2)
        + &id * b(0);

    let lhs = &v - &u;
    let rhs = &v + &u;
    let mut r = lhs
        .lu()
        .solve(&rhs)
        .expect("expm: Pade denominator is singular");
    for _ in 0..s {
        r = &r * &r;
    }
    r
}

/// Max-norm of the anti-Hermitian part of a matrix.
pub fn hermiticity_defect(m: &CMatrix) -> f64 {
    let adj = m.adjoint();
    (m - adj)
        .iter()
        .map(|z| z.norm())
        .fold(0.0_f64, f64::max)
}

/// Eigenvalues of a Hermitian matrix, via nalgebra's symmetric eigensolver.
pub fn hermitian_eigenvalues(m: &CMatrix) -> Vec<f64> {
    let sym = m.clone().symmetric_eigen();
    sym.eigenvalues.iter().copied().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use num_complex::Complex64 as C;

    #[test]
    fn expm_of_zero_is_identity() {
        let a = CMatrix::zeros(4, 4);
        let e = expm(&a);
        assert!((e - CMatrix::identity(4, 4)).norm() < 1e-15);
    }

    #[test]
    fn expm_diagonal() {
        let mut a = CMatrix::zeros(2, 2);
        a[(0, 0)] = C::new(-0.3, 1.7);
        a[(1, 1)] = C::new(2.0, -4.0);
        let e = expm(&a);
        assert!((e[(0, 0)] - a[(0, 0)].exp()).norm() < 1e-14);
        assert!((e[(1, 1)] - a[(1, 1)].exp()).norm() < 1e-12);
        assert!(e[(0, 1)].norm() < 1e-15);
    }

    #[test]
    fn expm_antihermitian_rotation() {
        // exp of i*sigma_x*phi = cos(phi) I + i sin(phi) sigma_x
        let phi = 0.7;
        let mut a = CMatrix::zeros(2, 2);
        a[(0, 1)] = C::new(0.0, phi);
        a[(1, 0)] = C::new(0.0, phi);
        let e = expm(&a);
        assert_abs_diff_eq!(e[(0, 0)].re, phi.cos(), epsilon = 1e-14);
        assert_abs_diff_eq!(e[(0, 1)].im, phi.sin(), epsilon = 1e-14);
    }

    #[test]
    fn expm_large_norm_uses_squaring() {
        let mut a = CMatrix::zeros(2, 2);
        a[(0, 0)] = C::new(-40.0, 25.0);
        a[(1, 1)] = C::new(-10.0, -90.0);
        let e = expm(&a);
        assert!((e[(0, 0)] - a[(0, 0)].exp()).norm() < 1e-14);
        assert!((e[(1, 1)] - a[(1, 1)].exp()).norm() < 1e-14);
    }
}
