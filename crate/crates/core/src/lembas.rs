//! Exact local decomposition of subsystem energy flow into coherent (work)
//! and incoherent (heat) parts.
//!
//! For a bipartite split ρ = ρ₁⊗ρ₂ + C the local motion is
//!
//!   ρ̇₁ = −i[Ĥ₁ + Ĥ_eff,1(t), ρ₁] + L_eff,1[ρ],
//!   Ĥ_eff,1 = tr₂{Ĥ₁₂(1⊗ρ₂)},   L_eff,1[ρ] = −i tr₂{[Ĥ₁₂, C]},
//!
//! and with Ĥ_eff = Ĥ_eff,a + Ĥ_eff,b split against the bare Ĥ₁
//! (Ĥ_eff,a the part commuting with Ĥ₁) the fluxes read
//!
//!   Ẇ = tr{Ḣ_eff,a ρ₁ − i[Ĥ₁', Ĥ_eff,b] ρ₁},   Q̇ = tr{Ĥ₁' L_eff,1[ρ]},
//!
//! with Ĥ₁' = Ĥ₁ + Ĥ_eff,a. The identity u̇ ≡ d/dt tr(Ĥ₁'ρ₁) = Ẇ + Q̇
//! holds exactly and is carried along as a per-sample diagnostic.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::hilbert::{DensityMatrix, HilbertDims, Operator};
use crate::linalg::{self, CMatrix, CVector};
use crate::models::{self, ModelKind, SystemParams};
use crate::propagation::{self, PureEnsemble, TimeGrid};

/// Imaginary parts of flux traces above this are treated as upstream
/// Hermiticity bugs rather than round-off.
pub const IMAG_RESIDUE_TOL: f64 = 1e-10;

/// Eigenvalues of the local Hamiltonian closer than this count as degenerate
/// when building the pinching projector.
pub const PINCH_DEGENERACY_TOL: f64 = 1e-10;

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

fn mi() -> Complex64 {
    Complex64::new(0.0, -1.0)
}

fn bipartite_dims(op: &Operator) -> Result<(usize, usize)> {
    let f = op.dims().factors();
    if f.len() != 2 {
        return Err(Error::InvalidFactor { index: 1, count: f.len() });
    }
    Ok((f[0], f[1]))
}

fn check_which(which: usize) -> Result<()> {
    if which > 1 {
        return Err(Error::InvalidFactor { index: which, count: 2 });
    }
    Ok(())
}

/// Contract a bipartite operator with a matrix on the complementary factor:
/// which = 0 gives tr₂{M(1⊗ω)}, which = 1 gives tr₁{M(ω⊗1)}.
fn contract_other(m: &CMatrix, d0: usize, d1: usize, other: &CMatrix, which: usize) -> CMatrix {
    match which {
        0 => {
            let mut out = CMatrix::zeros(d0, d0);
            for i in 0..d0 {
                for j in 0..d0 {
                    let mut acc = Complex64::new(0.0, 0.0);
                    for k in 0..d1 {
                        for n in 0..d1 {
                            acc += m[(i * d1 + k, j * d1 + n)] * other[(n, k)];
                        }
                    }
                    out[(i, j)] = acc;
                }
            }
            out
        }
        1 => {
            let mut out = CMatrix::zeros(d1, d1);
            for k in 0..d1 {
                for n in 0..d1 {
                    let mut acc = Complex64::new(0.0, 0.0);
                    for i in 0..d0 {
                        for l in 0..d0 {
                            acc += m[(i * d1 + k, l * d1 + n)] * other[(l, i)];
                        }
                    }
                    out[(k, n)] = acc;
                }
            }
            out
        }
        _ => unreachable!(),
    }
}

/// Ĥ_eff,1 = tr₂{Ĥ₁₂(1⊗ρ₂)} (or the mirrored contraction for which = 1).
pub fn effective_hamiltonian(
    h12: &Operator,
    rho_other: &DensityMatrix,
    which: usize,
) -> Result<Operator> {
    check_which(which)?;
    let (d0, d1) = bipartite_dims(h12)?;
    let d_other = if which == 0 { d1 } else { d0 };
    if rho_other.dim() != d_other {
        return Err(Error::DimensionMismatch(format!(
            "environment state has dimension {}, expected {}",
            rho_other.dim(),
            d_other
        )));
    }
    let out = contract_other(h12.matrix(), d0, d1, rho_other.matrix(), which);
    let d_sys = if which == 0 { d0 } else { d1 };
    Operator::new(HilbertDims::single(d_sys)?, out)
}

/// Block-diagonal projection onto the eigenspaces of a fixed Hermitian
/// operator; the unique Frobenius-orthogonal projection onto its commutant.
pub struct Pinch {
    basis: CMatrix,
    blocks: Vec<(usize, usize)>,
}

impl Pinch {
    pub fn new(h_local: &Operator) -> Result<Self> {
        let eig = linalg::hermitian_eigen(h_local.matrix(), 1e-10)?;
        // sort the eigenbasis, then group near-degenerate eigenvalues
        let mut order: Vec<usize> = (0..eig.values.len()).collect();
        order.sort_by(|&a, &b| eig.values[a].total_cmp(&eig.values[b]));
        let n = order.len();
        let mut basis = CMatrix::zeros(n, n);
        for (col, &src) in order.iter().enumerate() {
            basis.column_mut(col).copy_from(&eig.vectors.column(src));
        }
        let scale = eig.values.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
        let tol = PINCH_DEGENERACY_TOL * scale;
        let mut blocks = Vec::new();
        let mut start = 0;
        for i in 1..=n {
            if i == n || eig.values[order[i]] - eig.values[order[i - 1]] > tol {
                blocks.push((start, i));
                start = i;
            }
        }
        Ok(Self { basis, blocks })
    }

    /// Keep only the blocks diagonal in the eigenbasis.
    pub fn apply(&self, op: &Operator) -> Operator {
        let in_basis = self.basis.adjoint() * op.matrix() * &self.basis;
        let n = in_basis.nrows();
        let mut pinched = CMatrix::zeros(n, n);
        for &(lo, hi) in &self.blocks {
            for i in lo..hi {
                for j in lo..hi {
                    pinched[(i, j)] = in_basis[(i, j)];
                }
            }
        }
        let out = &self.basis * pinched * self.basis.adjoint();
        Operator::new(op.dims().clone(), out).expect("pinch preserves shape")
    }

    /// (commuting part, remainder); the two add back to the input exactly.
    pub fn split(&self, h_eff: &Operator) -> (Operator, Operator) {
        let a = self.apply(h_eff);
        let b = h_eff - &a;
        (a, b)
    }
}

/// Split Ĥ_eff into the part commuting with Ĥ₁ (by pinching onto the
/// eigenspaces of Ĥ₁) and the remainder.
pub fn split_commuting(h_eff: &Operator, h_local: &Operator) -> Result<(Operator, Operator)> {
    if h_eff.dims() != h_local.dims() {
        return Err(Error::DimensionMismatch(
            "effective and local Hamiltonians on different spaces".into(),
        ));
    }
    Ok(Pinch::new(h_local)?.split(h_eff))
}

/// The effective-Hamiltonian split entering the flux formulas.
pub struct LembasSplit {
    pub h_local: Operator,
    pub h_eff: Operator,
    pub h_eff_a: Operator,
    pub h_eff_b: Operator,
    pub h_prime: Operator,
    pinch: Pinch,
}

impl LembasSplit {
    /// Build the split for one snapshot: Ĥ_eff from the current
    /// environment state, pinched against the bare local Hamiltonian.
    pub fn build(
        h12: &Operator,
        h_local: &Operator,
        rho_other: &DensityMatrix,
        which: usize,
    ) -> Result<Self> {
        let h_eff = effective_hamiltonian(h12, rho_other, which)?;
        if h_eff.dims() != h_local.dims() {
            return Err(Error::DimensionMismatch(
                "local Hamiltonian does not live on the kept factor".into(),
            ));
        }
        let pinch = Pinch::new(h_local)?;
        let (h_eff_a, h_eff_b) = pinch.split(&h_eff);
        let h_prime = h_local + &h_eff_a;
        Ok(Self { h_local: h_local.clone(), h_eff, h_eff_a, h_eff_b, h_prime, pinch })
    }

    pub fn pinch(&self) -> &Pinch {
        &self.pinch
    }
}

/// L_eff,1[ρ] = −i tr₂{[Ĥ₁₂, C]} with C = ρ − ρ₁⊗ρ₂; traceless and
/// Hermitian, the incoherent part of the exact local motion.
pub fn incoherent_generator(
    h12: &Operator,
    rho_total: &DensityMatrix,
    which: usize,
) -> Result<Operator> {
    check_which(which)?;
    let (d0, d1) = bipartite_dims(h12)?;
    if rho_total.dims() != h12.dims() {
        return Err(Error::DimensionMismatch(
            "state and interaction live on different spaces".into(),
        ));
    }
    let rho1 = rho_total.partial_trace(0)?;
    let rho2 = rho_total.partial_trace(1)?;
    let product = rho1.tensor(&rho2)?;
    let corr = rho_total.matrix() - product.matrix();
    let comm = linalg::commutator(h12.matrix(), &corr);
    let traced = crate::hilbert::Operator::new(h12.dims().clone(), comm)?.partial_trace(which)?;
    let _ = (d0, d1);
    Ok(traced.scale_c(mi()))
}

/// Ḣ_eff,1 = tr₂{Ĥ₁₂(1⊗ρ̇₂)} with ρ̇₂ = tr₁(−i[Ĥ, ρ]); the raw (unpinched)
/// derivative — the flux formulas pinch it, which commutes with d/dt since
/// Ĥ₁ is time-independent.
pub fn h_eff_time_derivative(
    h12: &Operator,
    rho_total: &DensityMatrix,
    h_total: &Operator,
    which: usize,
) -> Result<Operator> {
    check_which(which)?;
    let (d0, d1) = bipartite_dims(h12)?;
    if h_total.dims() != h12.dims() || rho_total.dims() != h12.dims() {
        return Err(Error::DimensionMismatch(
            "state, interaction and total Hamiltonian must share one space".into(),
        ));
    }
    let lvn = linalg::commutator(h_total.matrix(), rho_total.matrix()).map(|z| z * mi());
    let rho_dot_other = Operator::new(h12.dims().clone(), lvn)?.partial_trace(1 - which)?;
    let out = contract_other(h12.matrix(), d0, d1, rho_dot_other.matrix(), which);
    let d_sys = if which == 0 { d0 } else { d1 };
    Operator::new(HilbertDims::single(d_sys)?, out)
}

/// One snapshot of the work/heat decomposition.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FluxSample {
    pub t: f64,
    /// Work flux Ẇ(t).
    pub w_dot: f64,
    /// Heat flux Q̇(t).
    pub q_dot: f64,
    /// d/dt tr(Ĥ₁'ρ₁), which must equal Ẇ + Q̇.
    pub u_dot: f64,
}

fn real_part(value: Complex64) -> Result<f64> {
    if value.im.abs() > IMAG_RESIDUE_TOL {
        return Err(Error::ImaginaryResidue { residue: value.im.abs(), tol: IMAG_RESIDUE_TOL });
    }
    Ok(value.re)
}

fn trace_prod(a: &CMatrix, b: &CMatrix) -> Complex64 {
    let n = a.nrows();
    let mut acc = Complex64::new(0.0, 0.0);
    for i in 0..n {
        for j in 0..n {
            acc += a[(i, j)] * b[(j, i)];
        }
    }
    acc
}

/// Work, heat and local-energy fluxes for one snapshot of the exact dynamics.
pub fn fluxes(
    t: f64,
    rho_total: &DensityMatrix,
    h_total: &Operator,
    h12: &Operator,
    split: &LembasSplit,
    which: usize,
) -> Result<FluxSample> {
    check_which(which)?;
    let rho1 = rho_total.partial_trace(which)?;
    let h_dot_eff = h_eff_time_derivative(h12, rho_total, h_total, which)?;
    let h_dot_eff_a = split.pinch.apply(&h_dot_eff);
    let l_eff = incoherent_generator(h12, rho_total, which)?;

    let lvn = linalg::commutator(h_total.matrix(), rho_total.matrix()).map(|z| z * mi());
    let rho1_dot = Operator::new(h_total.dims().clone(), lvn)?.partial_trace(which)?;

    assemble_fluxes(
        t,
        rho1.matrix(),
        &rho1_dot.into_matrix(),
        split,
        h_dot_eff_a.matrix(),
        l_eff.matrix(),
    )
}

/// Final algebra shared by the general path and the trajectory engine.
fn assemble_fluxes(
    t: f64,
    rho1: &CMatrix,
    rho1_dot: &CMatrix,
    split: &LembasSplit,
    h_dot_eff_a: &CMatrix,
    l_eff: &CMatrix,
) -> Result<FluxSample> {
    let drive = real_part(trace_prod(h_dot_eff_a, rho1))?;
    let comm = linalg::commutator(split.h_prime.matrix(), split.h_eff_b.matrix());
    let torque = real_part(trace_prod(&comm.map(|z| z * mi()), rho1))?;
    let w_dot = drive + torque;
    let q_dot = real_part(trace_prod(split.h_prime.matrix(), l_eff))?;
    let u_dot = drive + real_part(trace_prod(split.h_prime.matrix(), rho1_dot))?;
    Ok(FluxSample { t, w_dot, q_dot, u_dot })
}

/// Sampled fluxes along one exact trajectory, with the metadata the integral
/// measures need.
#[derive(Clone, Debug)]
pub struct FluxSeries {
    grid: TimeGrid,
    samples: Vec<FluxSample>,
    first_tainted: Option<usize>,
    occupation_threshold: f64,
}

impl FluxSeries {
    pub fn new(
        grid: TimeGrid,
        samples: Vec<FluxSample>,
        first_tainted: Option<usize>,
        occupation_threshold: f64,
    ) -> Self {
        Self { grid, samples, first_tainted, occupation_threshold }
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn samples(&self) -> &[FluxSample] {
        &self.samples
    }

    pub fn first_tainted(&self) -> Option<usize> {
        self.first_tainted
    }

    pub fn occupation_threshold(&self) -> f64 {
        self.occupation_threshold
    }

    pub fn first_tainted_time(&self) -> Option<f64> {
        self.first_tainted.map(|k| self.grid.t(k))
    }
}

/// Exact-dynamics fluxes for the spin (system 1) along the trajectory of a
/// model instance from its standard initial state. All per-sample work is
/// O(dim²): reduced states, commutator traces and the incoherent generator
/// are evaluated from the pure branches rather than the full density matrix.
pub fn flux_trajectory(
    params: &SystemParams,
    kind: ModelKind,
    cutoff: usize,
    grid: &TimeGrid,
) -> Result<FluxSeries> {
    flux_trajectory_with_threshold(params, kind, cutoff, grid, crate::OCCUPATION_THRESHOLD)
}

pub fn flux_trajectory_with_threshold(
    params: &SystemParams,
    kind: ModelKind,
    cutoff: usize,
    grid: &TimeGrid,
    occupation_threshold: f64,
) -> Result<FluxSeries> {
    let h_total = models::build_hamiltonian(params, kind, cutoff)?;
    let h12 = models::interaction_hamiltonian(params, kind, cutoff)?;
    let h_local = models::spin_hamiltonian(params);
    let branches = models::initial_branches(params, cutoff)?;
    let engine = FluxEngine::new(&h_total, &h12, &h_local)?;

    let mut samples = Vec::with_capacity(grid.n_samples());
    let mut first_tainted = None;
    propagation::scan_semi_mixed(branches, &h_total, grid, |k, t, ens| {
        if first_tainted.is_none() && ens.top_two_population() > occupation_threshold {
            first_tainted = Some(k);
        }
        samples.push(engine.sample(t, ens)?);
        Ok(())
    })?;
    Ok(FluxSeries { grid: *grid, samples, first_tainted, occupation_threshold })
}

/// Per-snapshot flux evaluator for spin-system trajectories.
pub struct FluxEngine {
    h_total: CMatrix,
    h12: CMatrix,
    h_local: Operator,
    pinch: Pinch,
    d0: usize,
    d1: usize,
}

impl FluxEngine {
    pub fn new(h_total: &Operator, h12: &Operator, h_local: &Operator) -> Result<Self> {
        let (d0, d1) = bipartite_dims(h12)?;
        if h_local.dim() != d0 {
            return Err(Error::DimensionMismatch(
                "flux engine keeps the first factor as the system".into(),
            ));
        }
        if h_total.dims() != h12.dims() {
            return Err(Error::DimensionMismatch(
                "total and interaction Hamiltonians on different spaces".into(),
            ));
        }
        Ok(Self {
            h_total: h_total.matrix().clone(),
            h12: h12.matrix().clone(),
            h_local: h_local.clone(),
            pinch: Pinch::new(h_local)?,
            d0,
            d1,
        })
    }

    /// tr_osc of Σ_b w_b [(Mψ)ψ† − ψ(Mψ)†] scaled by −i: the spin-side
    /// partial trace of −i[M, ρ] without forming either product.
    fn spin_trace_of_lvn(&self, m: &CMatrix, ens: &PureEnsemble) -> CMatrix {
        let (d0, d1) = (self.d0, self.d1);
        let mut out = CMatrix::zeros(d0, d0);
        for (w, v) in ens.branches() {
            let mv: CVector = m * v;
            for s in 0..d0 {
                for sp in 0..d0 {
                    let mut acc = Complex64::new(0.0, 0.0);
                    for k in 0..d1 {
                        acc += mv[s * d1 + k] * v[sp * d1 + k].conj()
                            - v[s * d1 + k] * mv[sp * d1 + k].conj();
                    }
                    out[(s, sp)] += acc * c(*w);
                }
            }
        }
        out.map(|z| z * mi())
    }

    /// Oscillator-side analogue of [`Self::spin_trace_of_lvn`].
    fn osc_trace_of_lvn(&self, m: &CMatrix, ens: &PureEnsemble) -> CMatrix {
        let (d0, d1) = (self.d0, self.d1);
        let mut out = CMatrix::zeros(d1, d1);
        for (w, v) in ens.branches() {
            let mv: CVector = m * v;
            for k in 0..d1 {
                for kp in 0..d1 {
                    let mut acc = Complex64::new(0.0, 0.0);
                    for s in 0..d0 {
                        acc += mv[s * d1 + k] * v[s * d1 + kp].conj()
                            - v[s * d1 + k] * mv[s * d1 + kp].conj();
                    }
                    out[(k, kp)] += acc * c(*w);
                }
            }
        }
        out.map(|z| z * mi())
    }

    /// Fluxes for the current snapshot of a semi-mixed ensemble.
    pub fn sample(&self, t: f64, ens: &PureEnsemble) -> Result<FluxSample> {
        let rho1 = ens.reduced_spin();
        let rho2 = ens.reduced_osc();

        let h_eff = Operator::new(
            HilbertDims::single(self.d0)?,
            contract_other(&self.h12, self.d0, self.d1, rho2.matrix(), 0),
        )?;
        let (h_eff_a, h_eff_b) = self.pinch.split(&h_eff);
        let h_prime = &self.h_local + &h_eff_a;
        let split = LembasSplit {
            h_local: self.h_local.clone(),
            h_eff,
            h_eff_a,
            h_eff_b,
            h_prime,
            pinch: Pinch::new(&self.h_local)?,
        };

        // rho2_dot -> pinched effective-Hamiltonian derivative
        let rho2_dot = self.osc_trace_of_lvn(&self.h_total, ens);
        let h_dot_eff = Operator::new(
            HilbertDims::single(self.d0)?,
            contract_other(&self.h12, self.d0, self.d1, &rho2_dot, 0),
        )?;
        let h_dot_eff_a = self.pinch.apply(&h_dot_eff);

        // L_eff = -i tr_2[H12, rho] + i [H_eff, rho1]
        let traced = self.spin_trace_of_lvn(&self.h12, ens);
        let l_eff = traced + linalg::commutator(split.h_eff.matrix(), rho1.matrix()).map(|z| z * -mi());

        let rho1_dot = self.spin_trace_of_lvn(&self.h_total, ens);

        assemble_fluxes(t, rho1.matrix(), &rho1_dot, &split, h_dot_eff_a.matrix(), &l_eff)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bosonic;
    use crate::hilbert::StateVector;
    use crate::linalg::max_abs;
    use crate::propagation::{eigen_propagator, StorePolicy};
    use approx::assert_abs_diff_eq;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn ci(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn random_density(n: usize, rng: &mut StdRng) -> CMatrix {
        let g = CMatrix::from_fn(n, n, |_, _| ci(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
        let m = &g * g.adjoint();
        let tr = m.trace().re;
        m.map(|z| z / c(tr))
    }

    fn random_hermitian(n: usize, rng: &mut StdRng) -> CMatrix {
        let g = CMatrix::from_fn(n, n, |_, _| ci(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
        (&g + &g.adjoint()).map(|z| z * c(0.5))
    }

    fn params() -> SystemParams {
        SystemParams {
            omega_s: 1.0,
            omega_o: 1.0,
            lambda: 0.1,
            kappa: 0.1,
            mass: 1.0,
            alpha: c(1.0),
            ground_weight: 0.7,
        }
    }

    #[test]
    fn effective_hamiltonian_of_zero_interaction_is_zero() {
        let dims = HilbertDims::bipartite(2, 5).unwrap();
        let h12 = Operator::zeros(dims);
        let rho2 = DensityMatrix::pure(&StateVector::basis(5, 0).unwrap());
        let h_eff = effective_hamiltonian(&h12, &rho2, 0).unwrap();
        assert!(max_abs(h_eff.matrix()) == 0.0);
    }

    #[test]
    fn z_som_spin_side_effective_hamiltonian_is_lambda_x_sigma_z() {
        let p = params();
        let cutoff = 24;
        let h12 = models::interaction_hamiltonian(&p, ModelKind::ZSom, cutoff).unwrap();
        let alpha = ci(0.8, -0.3);
        let rho2 = DensityMatrix::pure(&bosonic::coherent_state(alpha, cutoff).unwrap());
        let x = bosonic::position(cutoff, p.mass, p.omega_o);
        let x0 = x.expectation(&rho2).re;

        let h_eff = effective_hamiltonian(&h12, &rho2, 0).unwrap();
        let expect = models::sigma_z().scale(p.lambda * x0);
        assert!(max_abs(&(h_eff.matrix() - expect.matrix())) < 1e-12);
    }

    #[test]
    fn z_som_oscillator_side_effective_hamiltonian_matches_mean_field_drive() {
        let p = params();
        let cutoff = 12;
        let h12 = models::interaction_hamiltonian(&p, ModelKind::ZSom, cutoff).unwrap();
        let rho1 = DensityMatrix::new(
            HilbertDims::single(2).unwrap(),
            CMatrix::from_diagonal(&CVector::from_vec(vec![c(0.7), c(0.3)])),
        )
        .unwrap();
        let h_eff = effective_hamiltonian(&h12, &rho1, 1).unwrap();
        // tr(sigma_z diag(c, 1-c)) = 1 - 2c with the ground state first
        let x = bosonic::position(cutoff, p.mass, p.omega_o);
        let expect = x.scale(p.lambda * (1.0 - 2.0 * p.ground_weight));
        assert!(max_abs(&(h_eff.matrix() - expect.matrix())) < 1e-12);
    }

    #[test]
    fn effective_hamiltonian_matches_the_literal_kron_contraction() {
        // tr_2{H12 (1 x rho2)} and tr_1{H12 (rho1 x 1)} spelled out with
        // dense kron products and partial traces
        let mut rng = StdRng::seed_from_u64(17);
        let dims = HilbertDims::bipartite(3, 4).unwrap();
        for _ in 0..6 {
            let h12 = Operator::new(dims.clone(), random_hermitian(12, &mut rng)).unwrap();
            let rho1 = DensityMatrix::new(
                HilbertDims::single(3).unwrap(),
                random_density(3, &mut rng),
            )
            .unwrap();
            let rho2 = DensityMatrix::new(
                HilbertDims::single(4).unwrap(),
                random_density(4, &mut rng),
            )
            .unwrap();

            let id3 = CMatrix::identity(3, 3);
            let id4 = CMatrix::identity(4, 4);

            let lhs = effective_hamiltonian(&h12, &rho2, 0).unwrap();
            let product = h12.matrix() * id3.kronecker(rho2.matrix());
            let rhs = Operator::new(dims.clone(), product).unwrap().partial_trace(0).unwrap();
            assert!(max_abs(&(lhs.matrix() - rhs.matrix())) < 1e-13);

            let lhs = effective_hamiltonian(&h12, &rho1, 1).unwrap();
            let product = h12.matrix() * rho1.matrix().kronecker(&id4);
            let rhs = Operator::new(dims.clone(), product).unwrap().partial_trace(1).unwrap();
            assert!(max_abs(&(lhs.matrix() - rhs.matrix())) < 1e-13);
        }
    }

    #[test]
    fn pinching_on_nondegenerate_sigma_z_is_the_diagonal_part() {
        let h_local = models::sigma_z().scale(0.5);
        let mut rng = StdRng::seed_from_u64(11);
        let h_eff = Operator::from_matrix(random_hermitian(2, &mut rng)).unwrap();
        let (a, b) = split_commuting(&h_eff, &h_local).unwrap();
        // a = diagonal part, b = off-diagonal part
        assert!(a.matrix()[(0, 1)].norm() < 1e-14);
        assert!(a.matrix()[(1, 0)].norm() < 1e-14);
        assert!((a.matrix()[(0, 0)] - h_eff.matrix()[(0, 0)]).norm() < 1e-14);
        assert!(b.matrix()[(0, 0)].norm() < 1e-14);
        assert!(max_abs((&(&a + &b) - &h_eff).matrix()) < 1e-14);
        // exact commutation
        assert!(max_abs(a.commutator(&h_local).matrix()) < 1e-13);
    }

    #[test]
    fn pure_transverse_field_has_no_commuting_part() {
        let h_local = models::sigma_z();
        let h_eff = models::sigma_x().scale(0.37);
        let (a, b) = split_commuting(&h_eff, &h_local).unwrap();
        assert!(max_abs(a.matrix()) < 1e-14);
        assert!(max_abs(&(b.matrix() - h_eff.matrix())) < 1e-14);
    }

    #[test]
    fn aligned_field_is_entirely_commuting() {
        let h_local = models::sigma_z().scale(0.5);
        let h_eff = models::sigma_z().scale(0.12);
        let (a, b) = split_commuting(&h_eff, &h_local).unwrap();
        assert!(max_abs(&(a.matrix() - h_eff.matrix())) < 1e-14);
        assert!(max_abs(b.matrix()) < 1e-14);
    }

    #[test]
    fn pinching_respects_degenerate_blocks() {
        // h_local = identity is fully degenerate: everything commutes
        let h_local = Operator::identity(HilbertDims::single(3).unwrap());
        let mut rng = StdRng::seed_from_u64(5);
        let h_eff = Operator::from_matrix(random_hermitian(3, &mut rng)).unwrap();
        let (a, b) = split_commuting(&h_eff, &h_local).unwrap();
        assert!(max_abs(&(a.matrix() - h_eff.matrix())) < 1e-12);
        assert!(max_abs(b.matrix()) < 1e-12);
    }

    #[test]
    fn incoherent_generator_vanishes_on_product_states() {
        let p = params();
        let cutoff = 20;
        let h12 = models::interaction_hamiltonian(&p, ModelKind::XzSom, cutoff).unwrap();
        let rho = models::initial_state(&p, cutoff).unwrap();
        let l = incoherent_generator(&h12, &rho, 0).unwrap();
        assert!(max_abs(l.matrix()) < 1e-13);
    }

    #[test]
    fn incoherent_generator_is_traceless_and_hermitian_on_random_states() {
        let mut rng = StdRng::seed_from_u64(23);
        let dims = HilbertDims::bipartite(2, 4).unwrap();
        for _ in 0..10 {
            let rho = DensityMatrix::new(dims.clone(), random_density(8, &mut rng)).unwrap();
            let h12 = Operator::new(dims.clone(), random_hermitian(8, &mut rng)).unwrap();
            for which in [0, 1] {
                let l = incoherent_generator(&h12, &rho, which).unwrap();
                assert!(l.trace().norm() < 1e-12, "trace {}", l.trace());
                assert!(l.hermiticity_error() < 1e-12);
            }
        }
    }

    #[test]
    fn exact_local_motion_reassembles_from_the_decomposition() {
        // rho1_dot from the split (commutator part + L_eff) must equal the
        // partial trace of the exact Liouville derivative
        let mut rng = StdRng::seed_from_u64(31);
        let dims = HilbertDims::bipartite(3, 4).unwrap();
        for _ in 0..8 {
            let n = 12;
            let rho = DensityMatrix::new(dims.clone(), random_density(n, &mut rng)).unwrap();
            let h12 = Operator::new(dims.clone(), random_hermitian(n, &mut rng)).unwrap();
            let h1 = Operator::from_matrix(random_hermitian(3, &mut rng)).unwrap();
            let h2 = Operator::from_matrix(random_hermitian(4, &mut rng)).unwrap();
            let id1 = Operator::identity(HilbertDims::single(3).unwrap());
            let id2 = Operator::identity(HilbertDims::single(4).unwrap());
            let h_total = &(&h1.tensor(&id2).unwrap() + &id1.tensor(&h2).unwrap()) + &h12;

            let rho1 = rho.partial_trace(0).unwrap();
            let rho2 = rho.partial_trace(1).unwrap();
            let h_eff = effective_hamiltonian(&h12, &rho2, 0).unwrap();
            let l_eff = incoherent_generator(&h12, &rho, 0).unwrap();

            let gen = &h1 + &h_eff;
            let coherent = linalg::commutator(gen.matrix(), rho1.matrix()).map(|z| z * mi());
            let assembled = coherent + l_eff.matrix();

            let lvn = linalg::commutator(h_total.matrix(), rho.matrix()).map(|z| z * mi());
            let exact = Operator::new(dims.clone(), lvn).unwrap().partial_trace(0).unwrap();

            assert!(max_abs(&(&assembled - exact.matrix())) < 1e-12);
        }
    }

    #[test]
    fn h_eff_derivative_vanishes_on_stationary_states() {
        let p = params();
        let cutoff = 14;
        let h_total = models::build_hamiltonian(&p, ModelKind::XzSom, cutoff).unwrap();
        let h12 = models::interaction_hamiltonian(&p, ModelKind::XzSom, cutoff).unwrap();
        // ground state of the full Hamiltonian is stationary
        let eig = crate::linalg::hermitian_eigen(h_total.matrix(), 1e-10).unwrap();
        let gs_idx = (0..eig.values.len())
            .min_by(|&a, &b| eig.values[a].total_cmp(&eig.values[b]))
            .unwrap();
        let gs = StateVector::normalized(
            h_total.dims().clone(),
            CVector::from_column_slice(eig.vectors.column(gs_idx).as_slice()),
        )
        .unwrap();
        let rho = DensityMatrix::pure(&gs);
        let hdot = h_eff_time_derivative(&h12, &rho, &h_total, 0).unwrap();
        assert!(max_abs(hdot.matrix()) < 1e-10);
    }

    #[test]
    fn z_som_h_eff_derivative_obeys_ehrenfest() {
        // d/dt H_eff,s = lambda <p/m> sigma_z on the reduced oscillator state
        let p = params();
        let cutoff = 24;
        let h_total = models::build_hamiltonian(&p, ModelKind::ZSom, cutoff).unwrap();
        let h12 = models::interaction_hamiltonian(&p, ModelKind::ZSom, cutoff).unwrap();
        let u = eigen_propagator(&h_total, 1.7).unwrap();
        let rho0 = models::initial_state(&p, cutoff).unwrap();
        let rho_t = DensityMatrix::new(
            h_total.dims().clone(),
            u.matrix() * rho0.matrix() * u.matrix().adjoint(),
        )
        .unwrap();

        let hdot = h_eff_time_derivative(&h12, &rho_t, &h_total, 0).unwrap();
        let rho_osc = rho_t.partial_trace(1).unwrap();
        let momentum = bosonic::momentum(cutoff, p.mass, p.omega_o);
        let x_dot = momentum.expectation(&rho_osc).re / p.mass;
        let expect = models::sigma_z().scale(p.lambda * x_dot);
        assert!(max_abs(&(hdot.matrix() - expect.matrix())) < 1e-12);
    }

    #[test]
    fn h_eff_derivative_matches_central_differences() {
        let p = params();
        let cutoff = 20;
        let h_total = models::build_hamiltonian(&p, ModelKind::XzSom, cutoff).unwrap();
        let h12 = models::interaction_hamiltonian(&p, ModelKind::XzSom, cutoff).unwrap();
        let rho0 = models::initial_state(&p, cutoff).unwrap();

        let evolve_to = |t: f64| -> DensityMatrix {
            let u = eigen_propagator(&h_total, t).unwrap();
            DensityMatrix::new(
                h_total.dims().clone(),
                u.matrix() * rho0.matrix() * u.matrix().adjoint(),
            )
            .unwrap()
        };

        let t = 2.3;
        let h = 1e-4;
        let analytic = h_eff_time_derivative(&h12, &evolve_to(t), &h_total, 0).unwrap();
        let plus = effective_hamiltonian(&h12, &evolve_to(t + h).partial_trace(1).unwrap(), 0).unwrap();
        let minus = effective_hamiltonian(&h12, &evolve_to(t - h).partial_trace(1).unwrap(), 0).unwrap();
        let fd = (&plus - &minus).scale(1.0 / (2.0 * h));
        assert!(max_abs(&(analytic.matrix() - fd.matrix())) < 1e-6);
    }

    #[test]
    fn uncoupled_system_has_zero_fluxes() {
        let mut p = params();
        p.lambda = 0.0;
        let cutoff = 12;
        let grid = TimeGrid::from_step(0.0, 2.0, 0.1).unwrap();
        let series = flux_trajectory(&p, ModelKind::XzSom, cutoff, &grid).unwrap();
        for s in series.samples() {
            assert_abs_diff_eq!(s.w_dot, 0.0, epsilon = 1e-13);
            assert_abs_diff_eq!(s.q_dot, 0.0, epsilon = 1e-13);
            assert_abs_diff_eq!(s.u_dot, 0.0, epsilon = 1e-13);
        }
    }

    #[test]
    fn energy_balance_holds_per_sample() {
        let p = params();
        let cutoff = 20;
        let grid = TimeGrid::from_step(0.0, 5.0, 0.05).unwrap();
        let series = flux_trajectory(&p, ModelKind::XzSom, cutoff, &grid).unwrap();
        for s in series.samples() {
            assert!(
                (s.u_dot - (s.w_dot + s.q_dot)).abs() < 1e-10,
                "balance violated at t = {}: {}",
                s.t,
                (s.u_dot - (s.w_dot + s.q_dot)).abs()
            );
        }
    }

    #[test]
    fn engine_agrees_with_the_general_path() {
        let p = params();
        let cutoff = 16;
        let h_total = models::build_hamiltonian(&p, ModelKind::XzSom, cutoff).unwrap();
        let h12 = models::interaction_hamiltonian(&p, ModelKind::XzSom, cutoff).unwrap();
        let h_local = models::spin_hamiltonian(&p);
        let grid = TimeGrid::from_step(0.0, 2.0, 0.25).unwrap();

        let series = flux_trajectory(&p, ModelKind::XzSom, cutoff, &grid).unwrap();

        // general path on densely evolved states
        let traj = propagation::evolve(
            &models::initial_state(&p, cutoff).unwrap(),
            &h_total,
            &grid,
            StorePolicy { totals: true, reduced_osc: true },
        )
        .unwrap();
        let totals = traj.totals().unwrap();
        for (k, rho) in totals.iter().enumerate() {
            let rho2 = rho.partial_trace(1).unwrap();
            let split = LembasSplit::build(&h12, &h_local, &rho2, 0).unwrap();
            let general = fluxes(grid.t(k), rho, &h_total, &h12, &split, 0).unwrap();
            let fast = series.samples()[k];
            assert_abs_diff_eq!(general.w_dot, fast.w_dot, epsilon = 1e-11);
            assert_abs_diff_eq!(general.q_dot, fast.q_dot, epsilon = 1e-11);
            assert_abs_diff_eq!(general.u_dot, fast.u_dot, epsilon = 1e-11);
        }
    }

    #[test]
    fn z_som_work_flux_is_the_driven_zeeman_modulation() {
        // W-dot = lambda d<x>/dt tr(sigma_z rho_s) with d<x>/dt = <p>/m
        let p = SystemParams { kappa: 0.0, ..params() };
        let cutoff = 20;
        let grid = TimeGrid::from_step(0.0, 6.0, 0.05).unwrap();
        let series = flux_trajectory(&p, ModelKind::ZSom, cutoff, &grid).unwrap();

        let h = models::build_hamiltonian(&p, ModelKind::ZSom, cutoff).unwrap();
        let branches = models::initial_branches(&p, cutoff).unwrap();
        let momentum = bosonic::momentum(cutoff, p.mass, p.omega_o);
        let sz_exp = 1.0 - 2.0 * p.ground_weight;
        let mut k = 0usize;
        propagation::scan_semi_mixed(branches, &h, &grid, |_, _, ens| {
            let rho_osc = ens.reduced_osc();
            let x_dot = momentum.expectation(&rho_osc).re / p.mass;
            let expect = p.lambda * x_dot * sz_exp;
            assert!(
                (series.samples()[k].w_dot - expect).abs() < 1e-11,
                "w_dot {} vs {} at sample {k}",
                series.samples()[k].w_dot,
                expect
            );
            k += 1;
            Ok(())
        })
        .unwrap();
    }

    #[test]
    fn jcm_vacuum_rabi_fluxes_match_the_closed_form() {
        // |1,0> under the resonant JCM stays in span{|1,0>, |0,1>}; both
        // reduced states remain diagonal, so H_eff vanishes and the whole
        // exchange is heat: W-dot = 0, Q-dot = -omega g sin(2gt)
        let p = SystemParams { ground_weight: 0.0, alpha: c(0.0), ..params() };
        let g = p.jcm_coupling();
        let grid = TimeGrid::from_step(0.0, 50.0, 0.05).unwrap();
        let series = flux_trajectory(&p, ModelKind::JcmRwa, 8, &grid).unwrap();
        for s in series.samples() {
            assert!(s.w_dot.abs() < 1e-12, "w_dot = {} at t = {}", s.w_dot, s.t);
            let expect = -p.omega_s * g * (2.0 * g * s.t).sin();
            assert!(
                (s.q_dot - expect).abs() < 1e-10,
                "q_dot = {} vs {} at t = {}",
                s.q_dot,
                expect,
                s.t
            );
        }
    }

    #[test]
    fn z_som_heat_flux_is_numerically_zero_and_xi_bounded() {
        // the block structure freezes the reduced spin state, so Q-dot is an
        // exact zero; the xi sweep keeps it below an ever-tighter bound
        let base = SystemParams { kappa: 0.0, ..params() };
        let mut last_bound = f64::INFINITY;
        for scale in [1.0_f64, 2.0, 4.0] {
            let p = SystemParams {
                omega_o: base.omega_o * scale,
                lambda: base.lambda * scale.sqrt(),
                ..base
            };
            let xi = p.xi();
            assert!(xi < last_bound);
            last_bound = xi;
            let grid = TimeGrid::from_step(0.0, 2.0 * std::f64::consts::PI / p.omega_o,
                2.0 * std::f64::consts::PI / p.omega_o / 200.0).unwrap();
            let series = flux_trajectory(&p, ModelKind::ZSom, 20, &grid).unwrap();
            let max_q = series.samples().iter().map(|s| s.q_dot.abs()).fold(0.0, f64::max);
            assert!(max_q < 1e-12 * (1.0 + xi), "max |q_dot| = {max_q} at xi = {xi}");
        }
    }
}
