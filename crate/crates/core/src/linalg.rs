//! Small dense kernels over little-endian qubit indexing: qubit `q` is bit `q`
//! of a basis-state index.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

pub type Mat2 = [[C64; 2]; 2];

pub fn rz(theta: f64) -> Mat2 {
    let zero = C64::new(0.0, 0.0);
    [
        [C64::from_polar(1.0, -theta / 2.0), zero],
        [zero, C64::from_polar(1.0, theta / 2.0)],
    ]
}

pub fn matmul2(a: &Mat2, b: &Mat2) -> Mat2 {
    let mut out = [[C64::new(0.0, 0.0); 2]; 2];
    for (i, row) in out.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    out
}

/// Left-multiplies `m` by a single-qubit gate acting on `qubit`.
pub fn apply_1q_rows(m: &mut DMatrix<C64>, u: &Mat2, qubit: usize) {
    let bit = 1usize << qubit;
    for c in 0..m.ncols() {
        for r0 in (0..m.nrows()).filter(|r| r & bit == 0) {
            let r1 = r0 | bit;
            let (a, b) = (m[(r0, c)], m[(r1, c)]);
            m[(r0, c)] = u[0][0] * a + u[0][1] * b;
            m[(r1, c)] = u[1][0] * a + u[1][1] * b;
        }
    }
}

/// Left-multiplies `m` by CX(control, target).
pub fn cx_rows(m: &mut DMatrix<C64>, control: usize, target: usize) {
    let (cb, tb) = (1usize << control, 1usize << target);
    for r in (0..m.nrows()).filter(|r| r & cb != 0 && r & tb == 0) {
        m.swap_rows(r, r | tb);
    }
}

/// Left-multiplies a state vector by a single-qubit gate.
pub fn apply_1q_vec(psi: &mut [C64], u: &Mat2, qubit: usize) {
    let bit = 1usize << qubit;
    for r0 in (0..psi.len()).filter(|r| r & bit == 0) {
        let r1 = r0 | bit;
        let (a, b) = (psi[r0], psi[r1]);
        psi[r0] = u[0][0] * a + u[0][1] * b;
        psi[r1] = u[1][0] * a + u[1][1] * b;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rz_composes_additively() {
        let a = matmul2(&rz(0.3), &rz(0.4));
        let b = rz(0.7);
        for i in 0..2 {
            for j in 0..2 {
                assert!((a[i][j] - b[i][j]).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn cx_is_a_permutation() {
        let mut m = DMatrix::<C64>::identity(4, 4);
        cx_rows(&mut m, 0, 1);
        // |01> (q0 = 1) -> |11>
        assert_eq!(m[(3, 1)], C64::new(1.0, 0.0));
        assert_eq!(m[(1, 3)], C64::new(1.0, 0.0));
        assert_eq!(m[(0, 0)], C64::new(1.0, 0.0));
        assert_eq!(m[(2, 2)], C64::new(1.0, 0.0));
    }
}
