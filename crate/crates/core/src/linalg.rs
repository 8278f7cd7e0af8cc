//! Dense complex matrix helpers shared by all modules.
//!
//! Operators are `ndarray` matrices of `Complex64`; the Hermitian
//! eigensolver is delegated to `faer`.

use faer::{Mat, Side};
use ndarray::{Array1, Array2, ArrayView2};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type Operator = Array2<C64>;
pub type StateVector = Array1<C64>;

pub const I: C64 = C64::new(0.0, 1.0);

pub fn identity(n: usize) -> Operator {
    Array2::from_diag_elem(n, C64::new(1.0, 0.0))
}

pub fn dagger(a: &Operator) -> Operator {
    a.t().mapv(|z| z.conj())
}

/// Largest entry modulus, `‖A‖_max`.
pub fn max_abs(a: ArrayView2<C64>) -> f64 {
    a.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn max_abs_diff(a: &Operator, b: &Operator) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

pub fn frobenius(a: ArrayView2<C64>) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// `‖A − A†‖_max`
pub fn hermiticity_defect(a: &Operator) -> f64 {
    let n = a.nrows();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((a[[i, j]] - a[[j, i]].conj()).norm());
        }
    }
    worst
}

/// `‖U†U − 1‖_max`
pub fn unitarity_defect(u: &Operator) -> f64 {
    let prod = dagger(u).dot(u);
    max_abs_diff(&prod, &identity(u.nrows()))
}

pub fn kron(a: &Operator, b: &Operator) -> Operator {
    let (ar, ac) = a.dim();
    let (br, bc) = b.dim();
    let mut out = Array2::zeros((ar * br, ac * bc));
    for i in 0..ar {
        for j in 0..ac {
            let s = a[[i, j]];
            if s == C64::new(0.0, 0.0) {
                continue;
            }
            for k in 0..br {
                for l in 0..bc {
                    out[[i * br + k, j * bc + l]] = s * b[[k, l]];
                }
            }
        }
    }
    out
}

pub fn trace(a: &Operator) -> C64 {
    a.diag().iter().sum()
}

pub fn inner(a: &StateVector, b: &StateVector) -> C64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
}

pub fn norm(v: &StateVector) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Eigendecomposition of a Hermitian matrix. Eigenvalues ascend; eigenvectors
/// are the columns of the returned matrix.
pub fn eigh(a: &Operator) -> Result<(Vec<f64>, Operator)> {
    let n = a.nrows();
    let m = Mat::<C64>::from_fn(n, n, |i, j| a[[i, j]]);
    let evd = m.self_adjoint_eigen(Side::Lower).map_err(|_| Error::EigenFailed)?;
    let s = evd.S().column_vector();
    let u = evd.U();
    let values = (0..n).map(|i| s[i].re).collect();
    let vectors = Array2::from_shape_fn((n, n), |(i, j)| u[(i, j)]);
    Ok((values, vectors))
}

/// `exp(−i H t)` for Hermitian `H`.
pub fn expm_hermitian(h: &Operator, t: f64) -> Result<Operator> {
    let (values, vectors) = eigh(h)?;
    let phases = Array1::from_iter(values.iter().map(|&e| (-I * e * t).exp()));
    let scaled = &vectors * &phases.view().insert_axis(ndarray::Axis(0));
    Ok(scaled.dot(&dagger(&vectors)))
}

/// Principal square root of a positive semidefinite Hermitian matrix;
/// eigenvalues in `[−tol, 0)` are clipped, anything lower is rejected.
pub fn psd_sqrt(a: &Operator, tol: f64) -> Result<Operator> {
    let (values, vectors) = eigh(a)?;
    let mut roots = Vec::with_capacity(values.len());
    for &e in &values {
        if e < -tol {
            return Err(Error::NotPositive(e));
        }
        roots.push(C64::new(e.max(0.0).sqrt(), 0.0));
    }
    let roots = Array1::from(roots);
    let scaled = &vectors * &roots.view().insert_axis(ndarray::Axis(0));
    Ok(scaled.dot(&dagger(&vectors)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pauli_x() -> Operator {
        ndarray::array![
            [C64::new(0.0, 0.0), C64::new(1.0, 0.0)],
            [C64::new(1.0, 0.0), C64::new(0.0, 0.0)]
        ]
    }

    #[test]
    fn eigh_reconstructs_matrix() {
        let h = ndarray::array![
            [C64::new(1.0, 0.0), C64::new(0.3, -0.2), C64::new(0.0, 0.5)],
            [C64::new(0.3, 0.2), C64::new(-0.4, 0.0), C64::new(0.1, 0.0)],
            [C64::new(0.0, -0.5), C64::new(0.1, 0.0), C64::new(2.0, 0.0)]
        ];
        let (vals, vecs) = eigh(&h).unwrap();
        assert!(vals.windows(2).all(|w| w[0] <= w[1]));
        let d = Array2::from_diag(&Array1::from_iter(vals.iter().map(|&v| C64::new(v, 0.0))));
        let back = vecs.dot(&d).dot(&dagger(&vecs));
        assert!(max_abs_diff(&back, &h) < 1e-13);
    }

    #[test]
    fn expm_of_pauli_matches_closed_form() {
        let t = 0.37;
        let u = expm_hermitian(&pauli_x(), t).unwrap();
        let expected = identity(2).mapv(|z| z * t.cos()) - pauli_x().mapv(|z| z * I * t.sin());
        assert!(max_abs_diff(&u, &expected) < 1e-14);
    }

    #[test]
    fn kron_dimensions_and_entries() {
        let k = kron(&pauli_x(), &identity(2));
        assert_eq!(k.dim(), (4, 4));
        assert_eq!(k[[0, 2]], C64::new(1.0, 0.0));
        assert_eq!(k[[0, 1]], C64::new(0.0, 0.0));
    }
}
