//! Spin-oscillator model construction: parameter records, the z / xz / RWA
//! Hamiltonians, canonicalization of arbitrary spin-side couplings and Fock
//! cutoff selection.
//!
//! Spin basis convention: index 0 is the ground state |0⟩ with energy
//! −ω_s/2, index 1 the excited state |1⟩ with +ω_s/2, so σ_z = diag(−1, +1)
//! and σ_+ = |1⟩⟨0|. The composite layout is spin ⊗ oscillator.

use num_complex::Complex64;

use crate::bosonic;
use crate::error::{Error, Result};
use crate::hilbert::{DensityMatrix, HilbertDims, Operator, StateVector};
use crate::linalg::CMatrix;

/// Upper bound for the automatic cutoff search.
pub const MAX_CUTOFF_SEARCH: usize = 512;

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

fn ci(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn sigma_x() -> Operator {
    Operator::from_matrix(CMatrix::from_row_slice(2, 2, &[
        c(0.0), c(1.0),
        c(1.0), c(0.0),
    ]))
    .expect("2x2")
}

pub fn sigma_y() -> Operator {
    Operator::from_matrix(CMatrix::from_row_slice(2, 2, &[
        c(0.0), ci(0.0, 1.0),
        ci(0.0, -1.0), c(0.0),
    ]))
    .expect("2x2")
}

/// σ_z with the ground state first: diag(−1, +1).
pub fn sigma_z() -> Operator {
    Operator::from_matrix(CMatrix::from_row_slice(2, 2, &[
        c(-1.0), c(0.0),
        c(0.0), c(1.0),
    ]))
    .expect("2x2")
}

/// σ_+ = |1⟩⟨0|.
pub fn sigma_plus() -> Operator {
    Operator::from_matrix(CMatrix::from_row_slice(2, 2, &[
        c(0.0), c(0.0),
        c(1.0), c(0.0),
    ]))
    .expect("2x2")
}

/// σ_− = |0⟩⟨1|.
pub fn sigma_minus() -> Operator {
    sigma_plus().dagger()
}

/// Full parameter record for one spin-oscillator instance.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SystemParams {
    /// Spin splitting ω_s.
    pub omega_s: f64,
    /// Oscillator frequency ω_o.
    pub omega_o: f64,
    /// Coupling strength λ.
    pub lambda: f64,
    /// σ_x admixture κ (0 for the pure σ_z coupling).
    pub kappa: f64,
    /// Oscillator mass m.
    pub mass: f64,
    /// Coherent amplitude α of the initial oscillator state.
    pub alpha: Complex64,
    /// Ground-state weight c of the initial spin mixture, c ∈ [0, 1].
    pub ground_weight: f64,
}

impl SystemParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.omega_s > 0.0) {
            return Err(Error::InvalidParams(format!("omega_s = {} must be > 0", self.omega_s)));
        }
        if !(self.omega_o > 0.0) {
            return Err(Error::InvalidParams(format!("omega_o = {} must be > 0", self.omega_o)));
        }
        if !(self.mass > 0.0) {
            return Err(Error::InvalidParams(format!("mass = {} must be > 0", self.mass)));
        }
        if !(0.0..=1.0).contains(&self.ground_weight) {
            return Err(Error::InvalidParams(format!(
                "ground_weight = {} must lie in [0, 1]",
                self.ground_weight
            )));
        }
        for (name, v) in [("lambda", self.lambda), ("kappa", self.kappa)] {
            if !v.is_finite() {
                return Err(Error::InvalidParams(format!("{name} = {v} is not finite")));
            }
        }
        if !self.alpha.re.is_finite() || !self.alpha.im.is_finite() {
            return Err(Error::InvalidParams(format!("alpha = {} is not finite", self.alpha)));
        }
        Ok(())
    }

    pub fn derived(&self) -> DerivedConstants {
        derived_constants(self)
    }

    /// ξ = λ²/(m ω_o³).
    pub fn xi(&self) -> f64 {
        self.lambda * self.lambda / (self.mass * self.omega_o.powi(3))
    }

    /// g = λκ/√(2 m ω_o).
    pub fn jcm_coupling(&self) -> f64 {
        self.lambda * self.kappa / (2.0 * self.mass * self.omega_o).sqrt()
    }
}

/// Which interaction the instance carries.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModelKind {
    /// λ σ_z x̂.
    ZSom,
    /// λ (σ_z + κ σ_x) x̂.
    XzSom,
    /// Resonant rotating-wave limit: g(σ_+ â + σ_− â†), g = λκ/√(2mω).
    JcmRwa,
}

/// Constants derivable from [`SystemParams`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DerivedConstants {
    /// JCM coupling g = λκ/√(2mω_o).
    pub g: f64,
    /// ξ = λ²/(mω_o³).
    pub xi: f64,
    /// γ = √(ξ/2)(1 − 2c).
    pub gamma: f64,
    /// Ω = ω_s + ω_o.
    pub omega_sum: f64,
    /// Δ = ω_s − ω_o.
    pub delta: f64,
}

pub fn derived_constants(params: &SystemParams) -> DerivedConstants {
    let xi = params.xi();
    DerivedConstants {
        g: params.jcm_coupling(),
        xi,
        gamma: (xi / 2.0).sqrt() * (1.0 - 2.0 * params.ground_weight),
        omega_sum: params.omega_s + params.omega_o,
        delta: params.omega_s - params.omega_o,
    }
}

/// Ĥ_s = (ω_s/2) σ_z on the bare spin factor.
pub fn spin_hamiltonian(params: &SystemParams) -> Operator {
    sigma_z().scale(params.omega_s / 2.0)
}

/// Ĥ_o = ω_o(â†â + ½) on the bare oscillator factor.
pub fn oscillator_hamiltonian(params: &SystemParams, cutoff: usize) -> Operator {
    bosonic::oscillator_hamiltonian(cutoff, params.omega_o)
}

/// The spin-side coupling operator ŝ of the interaction λ ŝ x̂.
fn coupling_operator(params: &SystemParams, kind: ModelKind) -> Operator {
    match kind {
        ModelKind::ZSom => sigma_z(),
        ModelKind::XzSom => &sigma_z() + &sigma_x().scale(params.kappa),
        ModelKind::JcmRwa => unreachable!("JCM interaction is not of the λ ŝ x̂ form"),
    }
}

/// Interaction term alone, on the composite space.
pub fn interaction_hamiltonian(
    params: &SystemParams,
    kind: ModelKind,
    cutoff: usize,
) -> Result<Operator> {
    params.validate()?;
    match kind {
        ModelKind::ZSom | ModelKind::XzSom => {
            let s = coupling_operator(params, kind).scale(params.lambda);
            let x = bosonic::position(cutoff, params.mass, params.omega_o);
            s.tensor(&x)
        }
        ModelKind::JcmRwa => {
            let delta = params.omega_s - params.omega_o;
            if delta != 0.0 {
                return Err(Error::NotResonant(delta));
            }
            let g = params.jcm_coupling();
            let up = sigma_plus().tensor(&bosonic::annihilation(cutoff))?;
            let down = sigma_minus().tensor(&bosonic::creation(cutoff))?;
            Ok((&up + &down).scale(g))
        }
    }
}

/// Free part Ĥ_s ⊗ 1 + 1 ⊗ Ĥ_o on the composite space.
pub fn free_hamiltonian(params: &SystemParams, cutoff: usize) -> Result<Operator> {
    params.validate()?;
    let id_o = Operator::identity(HilbertDims::single(cutoff)?);
    let id_s = Operator::identity(HilbertDims::single(2)?);
    Ok(&spin_hamiltonian(params).tensor(&id_o)?
        + &id_s.tensor(&oscillator_hamiltonian(params, cutoff))?)
}

/// Full Hamiltonian Ĥ = Ĥ_s + Ĥ_int + Ĥ_o on the 2 ⊗ cutoff space.
pub fn build_hamiltonian(
    params: &SystemParams,
    kind: ModelKind,
    cutoff: usize,
) -> Result<Operator> {
    let local = free_hamiltonian(params, cutoff)?;
    let int = interaction_hamiltonian(params, kind, cutoff)?;
    Ok(&local + &int)
}

/// Standard initial state: spin mixture diag(c, 1−c) ⊗ |α⟩⟨α|.
pub fn initial_state(params: &SystemParams, cutoff: usize) -> Result<DensityMatrix> {
    let branches = initial_branches(params, cutoff)?;
    DensityMatrix::mixture(&branches)
}

/// The two pure branches of the initial mixture, zero-weight ones dropped:
/// (c, |0⟩⊗|α⟩) and (1−c, |1⟩⊗|α⟩).
pub fn initial_branches(
    params: &SystemParams,
    cutoff: usize,
) -> Result<Vec<(f64, StateVector)>> {
    params.validate()?;
    let alpha_state = bosonic::coherent_state(params.alpha, cutoff)?;
    let mut branches = Vec::with_capacity(2);
    let weights = [params.ground_weight, 1.0 - params.ground_weight];
    for (idx, w) in weights.into_iter().enumerate() {
        if w > 0.0 {
            let spin = StateVector::basis(2, idx)?;
            branches.push((w, spin.tensor(&alpha_state)?));
        }
    }
    Ok(branches)
}

/// Canonical form of an arbitrary Hermitian spin-side coupling.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CanonicalCoupling {
    /// Scale of the canonical σ_z + κσ_x form (signed).
    pub lambda: f64,
    /// Transverse admixture, normalized non-negative.
    pub kappa: f64,
    /// Rotation angle: e^{iφσ_z} ŝ e^{−iφσ_z} = λ(σ_z + κσ_x) + shift·1.
    pub phi: f64,
    /// Identity component, absorbable into the oscillator Hamiltonian.
    pub shift: f64,
}

const HERMITIAN_COEFF_TOL: f64 = 1e-12;

/// Bring ŝ = c₀·1 + c_x σ_x + c_y σ_y + c_z σ_z to the form λ(σ_z + κσ_x)
/// by a rotation about the z-axis. Coefficients are in the plain Pauli basis
/// and must be real (Hermitian ŝ).
pub fn canonicalize_coupling(coefficients: [Complex64; 4]) -> Result<CanonicalCoupling> {
    let worst_im = coefficients.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
    if worst_im > HERMITIAN_COEFF_TOL {
        return Err(Error::NotHermitian(worst_im));
    }
    let [c0, cx, cy, cz] = coefficients.map(|z| z.re);
    let transverse = cx.hypot(cy);
    if transverse <= HERMITIAN_COEFF_TOL {
        return Ok(CanonicalCoupling { lambda: cz, kappa: 0.0, phi: 0.0, shift: c0 });
    }
    if cz.abs() <= HERMITIAN_COEFF_TOL {
        return Err(Error::NoLongitudinalCoupling);
    }
    // e^{iφσ_z} σ_x e^{−iφσ_z} = cos(2φ)σ_x − sin(2φ)σ_y
    // e^{iφσ_z} σ_y e^{−iφσ_z} = sin(2φ)σ_x + cos(2φ)σ_y
    // so 2φ = atan2(c_y, c_x) rotates the transverse part onto +σ_x; an
    // extra π/2 in φ flips its sign when κ would come out negative.
    let mut phi = cy.atan2(cx) / 2.0;
    let kappa = transverse / cz.abs();
    if cz < 0.0 {
        phi += std::f64::consts::FRAC_PI_2;
    }
    Ok(CanonicalCoupling { lambda: cz, kappa, phi, shift: c0 })
}

impl CanonicalCoupling {
    /// The rotated coupling λ(σ_z + κσ_x) + shift·1 as a 2×2 operator.
    pub fn canonical_operator(&self) -> Operator {
        let base = &sigma_z() + &sigma_x().scale(self.kappa);
        let id = Operator::identity(HilbertDims::single(2).expect("2"));
        &base.scale(self.lambda) + &id.scale(self.shift)
    }

    /// e^{iφσ_z} as a 2×2 operator.
    pub fn rotation(&self) -> Operator {
        let m = CMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![
            ci(0.0, -self.phi).exp(),
            ci(0.0, self.phi).exp(),
        ]));
        Operator::from_matrix(m).expect("2x2")
    }
}

/// Assemble ŝ from plain Pauli coefficients (test and canonicalization aid).
pub fn coupling_from_coefficients(coefficients: [Complex64; 4]) -> Operator {
    let id = Operator::identity(HilbertDims::single(2).expect("2"));
    let terms = [id, sigma_x(), sigma_y(), sigma_z()];
    let mut acc = Operator::zeros(HilbertDims::single(2).expect("2"));
    for (coeff, op) in coefficients.into_iter().zip(terms) {
        acc = &acc + &op.scale_c(coeff);
    }
    acc
}

/// Smallest cutoff whose pilot run keeps the population of the two highest
/// Fock levels below `threshold` up to `horizon`. Never returns less than
/// ⌈|α|² + 6|α| + 10⌉; doubling search, then bisection to the smallest pass.
pub fn choose_cutoff(
    params: &SystemParams,
    kind: ModelKind,
    horizon: f64,
    threshold: f64,
) -> Result<usize> {
    params.validate()?;
    if !(0.0 < threshold && threshold < 1.0) {
        return Err(Error::InvalidParams(format!(
            "occupation threshold {threshold} must lie in (0, 1)"
        )));
    }
    if !(horizon > 0.0) {
        return Err(Error::InvalidParams(format!("horizon {horizon} must be > 0")));
    }
    let a = params.alpha.norm();
    let floor = (a * a + 6.0 * a + 10.0).ceil() as usize;
    if floor > MAX_CUTOFF_SEARCH {
        return Err(Error::CutoffSearchExhausted { max: MAX_CUTOFF_SEARCH });
    }

    let passes = |cutoff: usize| -> Result<bool> {
        let peak = crate::propagation::pilot_max_top_two(params, kind, cutoff, horizon)?;
        Ok(peak < threshold)
    };

    if passes(floor)? {
        return Ok(floor);
    }
    let mut lo = floor; // known failing
    let mut hi = floor;
    loop {
        hi *= 2;
        if hi > MAX_CUTOFF_SEARCH {
            return Err(Error::CutoffSearchExhausted { max: MAX_CUTOFF_SEARCH });
        }
        if passes(hi)? {
            break;
        }
        lo = hi;
    }
    // smallest passing cutoff in (lo, hi]
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if passes(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}
