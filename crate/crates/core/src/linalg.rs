//! Internal dense linear-algebra helpers shared by the public modules.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub(crate) type CMatrix = DMatrix<Complex64>;
pub(crate) type CVector = DVector<Complex64>;

/// Largest |A - A†| element, as a cheap Hermiticity gauge.
pub(crate) fn hermiticity_error(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0_f64;
    for i in 0..n {
        for j in i..n {
            let d = (m[(i, j)] - m[(j, i)].conj()).norm();
            if d > worst {
                worst = d;
            }
        }
    }
    worst
}

pub(crate) struct HermitianEigen {
    pub values: DVector<f64>,
    pub vectors: CMatrix,
}

/// Eigendecomposition of a Hermitian matrix. Fails if the input deviates from
/// Hermiticity by more than `tol`; the decomposition itself acts on the
/// symmetrized (A + A†)/2 so round-off never leaks into complex eigenvalues.
pub(crate) fn hermitian_eigen(m: &CMatrix, tol: f64) -> Result<HermitianEigen> {
    let err = hermiticity_error(m);
    if err > tol {
        return Err(Error::NotHermitian(err));
    }
    let sym = (m + m.adjoint()).scale(0.5);
    let eig = SymmetricEigen::new(sym);
    Ok(HermitianEigen {
        values: eig.eigenvalues,
        vectors: eig.eigenvectors,
    })
}

impl HermitianEigen {
    /// V f(Λ) V† for a scalar function on the spectrum.
    pub(crate) fn apply_spectral<F>(&self, f: F) -> CMatrix
    where
        F: Fn(f64) -> Complex64,
    {
        let fl = CVector::from_iterator(self.values.len(), self.values.iter().map(|&x| f(x)));
        let scaled = {
            let mut v = self.vectors.clone();
            for (j, mut col) in v.column_iter_mut().enumerate() {
                let s = fl[j];
                for x in col.iter_mut() {
                    *x *= s;
                }
            }
            v
        };
        scaled * self.vectors.adjoint()
    }
}

pub(crate) fn commutator(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a * b - b * a
}

/// Largest |m_ij|; a test-side deviation gauge.
#[cfg(test)]
pub(crate) fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}
