//! Dense complex helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};

use crate::C64;

pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

pub const I: C64 = C64 { re: 0.0, im: 1.0 };

/// Eigen-decomposition of a hermitian matrix, eigenvalues ascending.
pub fn eigh(h: &CMatrix) -> (Vec<f64>, CMatrix) {
    let n = h.nrows();
    if n == 0 {
        return (Vec::new(), CMatrix::zeros(0, 0));
    }
    // symmetrize to kill rounding-level anti-hermitian parts
    let hs = (h + h.adjoint()) * C64::new(0.5, 0.0);
    let eig = hs.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let vals = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vecs = CMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    (vals, vecs)
}

pub fn eigvalsh(h: &CMatrix) -> Vec<f64> {
    eigh(h).0
}

/// exp(−i H t) for hermitian H.
pub fn expm_hermitian(h: &CMatrix, t: f64) -> CMatrix {
    let (vals, v) = eigh(h);
    propagator_from_eigen(&vals, &v, t)
}

pub fn propagator_from_eigen(vals: &[f64], v: &CMatrix, t: f64) -> CMatrix {
    let n = vals.len();
    let mut scaled = v.clone();
    for c in 0..n {
        let ph = C64::from_polar(1.0, -vals[c] * t);
        for r in 0..n {
            scaled[(r, c)] *= ph;
        }
    }
    scaled * v.adjoint()
}

pub fn commutator(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a * b - b * a
}

pub fn frobenius(a: &CMatrix) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

/// max |A − A†| element.
pub fn hermiticity_defect(a: &CMatrix) -> f64 {
    let mut worst: f64 = 0.0;
    for r in 0..a.nrows() {
        for c in r..a.ncols() {
            worst = worst.max((a[(r, c)] - a[(c, r)].conj()).norm());
        }
    }
    worst
}

pub fn inner(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn norm(a: &[C64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn expm_of_pauli_x() {
        let mut h = CMatrix::zeros(2, 2);
        h[(0, 1)] = C64::new(1.0, 0.0);
        h[(1, 0)] = C64::new(1.0, 0.0);
        let u = expm_hermitian(&h, 0.3);
        assert!((u[(0, 0)] - C64::new(0.3f64.cos(), 0.0)).norm() < 1e-14);
        assert!((u[(1, 0)] - C64::new(0.0, -(0.3f64.sin()))).norm() < 1e-14);
    }

    #[test]
    fn eigh_sorted_and_accurate() {
        let h = CMatrix::from_fn(4, 4, |r, c| {
            let x = (r * 7 + c * 3) as f64;
            if r == c {
                C64::new(x.sin(), 0.0)
            } else if r < c {
                C64::new(x.cos(), (x * 0.5).sin())
            } else {
                let y = (c * 7 + r * 3) as f64;
                C64::new(y.cos(), -(y * 0.5).sin())
            }
        });
        let (vals, v) = eigh(&h);
        assert!(vals.windows(2).all(|w| w[0] <= w[1]));
        for (k, lam) in vals.iter().enumerate() {
            let col = v.column(k);
            let r = &h * col - col * C64::new(*lam, 0.0);
            assert!(r.norm() < 1e-12);
        }
    }
}
