//! Truncated oscillator algebra: ladder operators, position/momentum,
//! coherent states and the displacement operator, all on a Fock space cut at
//! `cutoff` levels (ħ = 1 throughout).

use nalgebra::DVector;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::hilbert::{HilbertDims, Operator, StateVector};
use crate::linalg::{self, CMatrix, CVector};

/// Norm-squared deficit above which a truncated coherent state is rejected.
pub const COHERENT_NORM_TOL: f64 = 1e-9;

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// â: â|n⟩ = √n |n−1⟩.
pub fn annihilation(cutoff: usize) -> Operator {
    let mut m = CMatrix::zeros(cutoff, cutoff);
    for n in 1..cutoff {
        m[(n - 1, n)] = c((n as f64).sqrt());
    }
    Operator::from_matrix(m).expect("square by construction")
}

/// â†.
pub fn creation(cutoff: usize) -> Operator {
    annihilation(cutoff).dagger()
}

/// â†â.
pub fn number(cutoff: usize) -> Operator {
    let mut m = CMatrix::zeros(cutoff, cutoff);
    for n in 0..cutoff {
        m[(n, n)] = c(n as f64);
    }
    Operator::from_matrix(m).expect("square by construction")
}

/// x̂ = (â + â†)/√(2 m ω).
pub fn position(cutoff: usize, mass: f64, omega: f64) -> Operator {
    let a = annihilation(cutoff);
    let ad = creation(cutoff);
    (&a + &ad).scale(1.0 / (2.0 * mass * omega).sqrt())
}

/// p̂ = i√(m ω / 2)(â† − â).
pub fn momentum(cutoff: usize, mass: f64, omega: f64) -> Operator {
    let a = annihilation(cutoff);
    let ad = creation(cutoff);
    (&ad - &a).scale_c(Complex64::new(0.0, (mass * omega / 2.0).sqrt()))
}

/// The (â, â†, x̂) triple used when building interaction Hamiltonians.
pub fn ladder_operators(cutoff: usize, mass: f64, omega: f64) -> (Operator, Operator, Operator) {
    (annihilation(cutoff), creation(cutoff), position(cutoff, mass, omega))
}

/// Ĥ_o = ω(â†â + ½).
pub fn oscillator_hamiltonian(cutoff: usize, omega: f64) -> Operator {
    let mut m = CMatrix::zeros(cutoff, cutoff);
    for n in 0..cutoff {
        m[(n, n)] = c(omega * (n as f64 + 0.5));
    }
    Operator::from_matrix(m).expect("square by construction")
}

/// Coherent-state amplitudes e^{−|α|²/2} αⁿ/√(n!) for n < cutoff, without
/// the final renormalization. Returned together with the norm² deficit.
fn coherent_amplitudes(alpha: Complex64, cutoff: usize) -> (CVector, f64) {
    let mut amps = CVector::zeros(cutoff);
    let mut coeff = c((-alpha.norm_sqr() / 2.0).exp());
    let mut norm_sqr = 0.0;
    for n in 0..cutoff {
        amps[n] = coeff;
        norm_sqr += coeff.norm_sqr();
        coeff = coeff * alpha / c(((n + 1) as f64).sqrt());
    }
    (amps, 1.0 - norm_sqr)
}

/// Truncated coherent state |α⟩, renormalized after the cut. Rejects cutoffs
/// whose truncated norm² falls more than [`COHERENT_NORM_TOL`] short of one.
pub fn coherent_state(alpha: Complex64, cutoff: usize) -> Result<StateVector> {
    if cutoff == 0 {
        return Err(Error::InvalidDims("cutoff must be >= 1".into()));
    }
    let (amps, deficit) = coherent_amplitudes(alpha, cutoff);
    if deficit > COHERENT_NORM_TOL {
        return Err(Error::CutoffTooSmall {
            cutoff,
            alpha_abs: alpha.norm(),
            deficit,
            tol: COHERENT_NORM_TOL,
        });
    }
    StateVector::normalized(HilbertDims::single(cutoff)?, amps)
}

/// D̂(β) = exp(β â† − β* â), via eigendecomposition of the Hermitian
/// generator K = −i(β â† − β* â), so D̂ = e^{iK}.
pub fn displacement_operator(beta: Complex64, cutoff: usize) -> Result<Operator> {
    if cutoff < 2 {
        return Err(Error::InvalidDims("displacement needs cutoff >= 2".into()));
    }
    let a = annihilation(cutoff);
    let ad = creation(cutoff);
    let generator = &ad.scale_c(beta) - &a.scale_c(beta.conj());
    let k = generator.scale_c(Complex64::new(0.0, -1.0));
    let eig = linalg::hermitian_eigen(k.matrix(), 1e-10)?;
    let d = eig.apply_spectral(|x| Complex64::new(0.0, x).exp());
    Operator::from_matrix(d)
}

/// ⟨â†â⟩ on a single-factor oscillator state.
pub fn mean_occupation(psi: &StateVector) -> f64 {
    psi.vector()
        .iter()
        .enumerate()
        .map(|(n, amp)| n as f64 * amp.norm_sqr())
        .sum()
}

/// Population of the top two Fock levels of an oscillator density matrix
/// given as a bare matrix diagonal; the truncation-boundary gauge.
pub fn top_two_population(diag: &DVector<f64>) -> f64 {
    let n = diag.len();
    if n < 2 {
        return diag.iter().sum();
    }
    diag[n - 1] + diag[n - 2]
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn ladder_action_on_fock_states() {
        let cutoff = 8;
        let a = annihilation(cutoff);
        for n in 1..cutoff {
            let psi = StateVector::basis(cutoff, n).unwrap();
            let lowered = a.matrix() * psi.vector();
            assert_abs_diff_eq!(lowered[n - 1].re, (n as f64).sqrt(), epsilon = 1e-14);
            assert_abs_diff_eq!(lowered.norm(), (n as f64).sqrt(), epsilon = 1e-14);
        }
        // a|0> = 0
        let vac = StateVector::basis(cutoff, 0).unwrap();
        assert!((a.matrix() * vac.vector()).norm() < 1e-15);
    }

    #[test]
    fn commutator_is_identity_away_from_the_boundary() {
        let cutoff = 10;
        let a = annihilation(cutoff);
        let ad = creation(cutoff);
        let comm = a.commutator(&ad);
        for i in 0..cutoff - 1 {
            assert_abs_diff_eq!(comm.matrix()[(i, i)].re, 1.0, epsilon = 1e-14);
        }
        // known truncation artifact on the last row
        assert_abs_diff_eq!(
            comm.matrix()[(cutoff - 1, cutoff - 1)].re,
            1.0 - cutoff as f64,
            epsilon = 1e-12
        );
    }

    #[test]
    fn coherent_state_mean_occupation_is_alpha_squared() {
        let psi = coherent_state(Complex64::new(1.0, 0.0), 30).unwrap();
        assert_abs_diff_eq!(mean_occupation(&psi), 1.0, epsilon = 1e-9);

        let psi = coherent_state(Complex64::new(2.0, 0.0), 40).unwrap();
        assert_abs_diff_eq!(mean_occupation(&psi), 4.0, epsilon = 1e-8);
    }

    #[test]
    fn coherent_alpha_zero_is_the_vacuum() {
        let psi = coherent_state(Complex64::new(0.0, 0.0), 5).unwrap();
        assert_abs_diff_eq!(psi.vector()[0].re, 1.0, epsilon = 1e-15);
        for n in 1..5 {
            assert!(psi.vector()[n].norm() < 1e-15);
        }
    }

    #[test]
    fn coherent_norm_deficit_guard_rejects_small_cutoffs() {
        assert!(matches!(
            coherent_state(Complex64::new(3.0, 0.0), 10),
            Err(Error::CutoffTooSmall { .. })
        ));
    }

    #[test]
    fn spin_tensor_coherent_places_amplitudes_at_composite_index_n() {
        // |0>_s (x) |alpha=1>: amplitude e^{-1/2}/sqrt(n!) at index n
        let cutoff = 30;
        let spin = StateVector::basis(2, 0).unwrap();
        let coh = coherent_state(Complex64::new(1.0, 0.0), cutoff).unwrap();
        let joint = spin.tensor(&coh).unwrap();
        assert_eq!(joint.dims().factors(), &[2, cutoff]);
        let mut factorial = 1.0_f64;
        for n in 0..10 {
            if n > 0 {
                factorial *= n as f64;
            }
            let expect = (-0.5_f64).exp() / factorial.sqrt();
            assert_abs_diff_eq!(joint.vector()[n].re, expect, epsilon = 1e-12);
            assert!(joint.vector()[cutoff + n].norm() < 1e-15);
        }
    }

    #[test]
    fn coherent_position_expectation() {
        // <alpha|x|alpha> = sqrt(2/(m omega)) Re(alpha); m = omega = 1, alpha = 1
        let psi = coherent_state(Complex64::new(1.0, 0.0), 30).unwrap();
        let x = position(30, 1.0, 1.0);
        let val = x.expectation_vec(&psi);
        assert_abs_diff_eq!(val.re, 2.0_f64.sqrt(), epsilon = 1e-9);
        assert_abs_diff_eq!(val.im, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn displacement_of_zero_is_identity() {
        let d = displacement_operator(Complex64::new(0.0, 0.0), 12).unwrap();
        let id = CMatrix::identity(12, 12);
        assert!(crate::linalg::max_abs(&(d.matrix() - id)) < 1e-12);
    }

    #[test]
    fn displacement_generates_coherent_states() {
        let cutoff = 40;
        let beta = Complex64::new(1.2, -0.3);
        let d = displacement_operator(beta, cutoff).unwrap();
        let vac = StateVector::basis(cutoff, 0).unwrap();
        let displaced = d.matrix() * vac.vector();
        let target = coherent_state(beta, cutoff).unwrap();
        let overlap = target.vector().dotc(&displaced).norm();
        assert!(overlap > 1.0 - 1e-9, "overlap {overlap}");
    }

    #[test]
    fn displacement_shifts_position_on_the_interior_block() {
        // D(-beta) x D(beta) = x + sqrt(2/(m omega)) Re(beta) on rows/cols
        // far from the truncation boundary
        let cutoff = 64;
        let m = 1.3;
        let omega = 0.8;
        let beta = Complex64::new(0.9, 0.4);
        let d = displacement_operator(beta, cutoff).unwrap();
        let dm = displacement_operator(-beta, cutoff).unwrap();
        let x = position(cutoff, m, omega);
        let lhs = &(&dm * &x) * &d;
        let shift = (2.0 / (m * omega)).sqrt() * beta.re;
        let interior = cutoff / 2;
        for i in 0..interior {
            for j in 0..interior {
                let expect = x.matrix()[(i, j)] + if i == j { c(shift) } else { c(0.0) };
                assert!(
                    (lhs.matrix()[(i, j)] - expect).norm() < 1e-8,
                    "entry ({i},{j}) off by {}",
                    (lhs.matrix()[(i, j)] - expect).norm()
                );
            }
        }
    }

    #[test]
    fn displacement_inverse_on_interior_block() {
        let cutoff = 30;
        let beta = Complex64::new(0.7, 0.2);
        let d = displacement_operator(beta, cutoff).unwrap();
        let dm = displacement_operator(-beta, cutoff).unwrap();
        let prod = &d * &dm;
        let interior = cutoff - (4.0 * beta.norm()).ceil() as usize;
        for i in 0..interior {
            for j in 0..interior {
                let expect = if i == j { c(1.0) } else { c(0.0) };
                assert!((prod.matrix()[(i, j)] - expect).norm() < 1e-8);
            }
        }
    }
}
