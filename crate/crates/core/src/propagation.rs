//! Time evolution: exact diagonalization propagators, semi-mixed branch
//! evolution (the fast path for initial states of the mixture ⊗ pure form),
//! the closed-form resonant JCM propagator, the analytic z-SOM state, and the
//! mean-field coupled-ODE integrator.

use num_complex::Complex64;

use crate::bosonic;
use crate::error::{Error, Result};
use crate::hilbert::{DensityMatrix, HilbertDims, Operator, StateVector};
use crate::linalg::{self, CMatrix, CVector};
use crate::models::{self, ModelKind, SystemParams};
use crate::OCCUPATION_THRESHOLD;

/// Cap on grid samples; anything larger is a configuration mistake at desk scale.
pub const MAX_GRID_SAMPLES: usize = 40_000;

/// Hermiticity tolerance accepted by the eigendecomposition propagator.
pub const PROPAGATOR_HERMITICITY_TOL: f64 = 1e-10;

/// Default local-error tolerance of the mean-field RK4 integrator.
pub const FA_LOCAL_ERROR_TOL: f64 = 1e-8;

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

fn ci(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Uniform sampling of [t0, t1]; `step` must divide the span.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TimeGrid {
    t0: f64,
    step: f64,
    n_steps: usize,
}

impl TimeGrid {
    pub fn from_step(t0: f64, t1: f64, step: f64) -> Result<Self> {
        if !(t1 > t0) {
            return Err(Error::InvalidGrid(format!("t1 = {t1} must exceed t0 = {t0}")));
        }
        if !(step > 0.0) {
            return Err(Error::InvalidGrid(format!("step = {step} must be > 0")));
        }
        let span = t1 - t0;
        let n = (span / step).round();
        if n < 1.0 {
            return Err(Error::InvalidGrid(format!("step = {step} exceeds the span {span}")));
        }
        if (n * step - span).abs() > 1e-9 * span.max(1.0) {
            return Err(Error::InvalidGrid(format!(
                "step = {step} does not divide the span {span}"
            )));
        }
        let n_steps = n as usize;
        if n_steps + 1 > MAX_GRID_SAMPLES {
            return Err(Error::InvalidGrid(format!(
                "{} samples exceed the cap {MAX_GRID_SAMPLES}",
                n_steps + 1
            )));
        }
        Ok(Self { t0, step, n_steps })
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn t1(&self) -> f64 {
        self.t(self.n_steps)
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn n_samples(&self) -> usize {
        self.n_steps + 1
    }

    /// k-th sample time, computed without accumulation.
    pub fn t(&self, k: usize) -> f64 {
        self.t0 + k as f64 * self.step
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.n_samples()).map(|k| self.t(k)).collect()
    }

    /// Sample index of a time on the grid, if it lies on it.
    pub fn index_of(&self, t: f64) -> Option<usize> {
        let k = ((t - self.t0) / self.step).round();
        if k < 0.0 || k > self.n_steps as f64 {
            return None;
        }
        let k = k as usize;
        if (self.t(k) - t).abs() <= 1e-9 * self.t1().abs().max(1.0) {
            Some(k)
        } else {
            None
        }
    }

    /// Same span with half the step (quadrature-convergence checks).
    pub fn halved(&self) -> Result<Self> {
        if 2 * self.n_steps + 1 > MAX_GRID_SAMPLES {
            return Err(Error::InvalidGrid(format!(
                "halving would need {} samples (cap {MAX_GRID_SAMPLES})",
                2 * self.n_steps + 1
            )));
        }
        Ok(Self { t0: self.t0, step: self.step / 2.0, n_steps: 2 * self.n_steps })
    }
}

/// What a [`Trajectory`] retains beyond purities and reduced spin states.
#[derive(Clone, Copy, Debug, Default)]
pub struct StorePolicy {
    pub reduced_osc: bool,
    pub totals: bool,
}

/// Per-sample record of a bipartite evolution.
#[derive(Clone, Debug)]
pub struct Trajectory {
    grid: TimeGrid,
    purity_spin: Vec<f64>,
    purity_osc: Vec<f64>,
    reduced_spin: Vec<DensityMatrix>,
    reduced_osc: Option<Vec<DensityMatrix>>,
    totals: Option<Vec<DensityMatrix>>,
    first_tainted: Option<usize>,
    occupation_threshold: f64,
    max_top_two: f64,
}

impl Trajectory {
    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn purity_spin(&self) -> &[f64] {
        &self.purity_spin
    }

    pub fn purity_osc(&self) -> &[f64] {
        &self.purity_osc
    }

    pub fn reduced_spin(&self) -> &[DensityMatrix] {
        &self.reduced_spin
    }

    pub fn reduced_osc(&self) -> Option<&[DensityMatrix]> {
        self.reduced_osc.as_deref()
    }

    pub fn totals(&self) -> Option<&[DensityMatrix]> {
        self.totals.as_deref()
    }

    /// First sample index where the top-two Fock population crossed the
    /// occupation threshold, if any.
    pub fn first_tainted(&self) -> Option<usize> {
        self.first_tainted
    }

    pub fn occupation_threshold(&self) -> f64 {
        self.occupation_threshold
    }

    /// Largest top-two Fock population seen along the run.
    pub fn max_top_two(&self) -> f64 {
        self.max_top_two
    }

    pub fn first_tainted_time(&self) -> Option<f64> {
        self.first_tainted.map(|k| self.grid.t(k))
    }
}

/// U(t) = V e^{−iΛt} V† from the eigendecomposition of a Hermitian H.
pub fn eigen_propagator(h: &Operator, t: f64) -> Result<Operator> {
    let eig = linalg::hermitian_eigen(h.matrix(), PROPAGATOR_HERMITICITY_TOL)?;
    let u = eig.apply_spectral(|e| ci(0.0, -e * t).exp());
    Operator::new(h.dims().clone(), u)
}

/// Weighted ensemble of pure branches on the spin ⊗ oscillator space.
/// Mixture-⊗-pure initial states stay rank-two forever, so evolving the two
/// vectors and reducing on the fly is exact and keeps every per-sample
/// quantity at O(dim²).
#[derive(Clone, Debug)]
pub struct PureEnsemble {
    dims: HilbertDims,
    branches: Vec<(f64, CVector)>,
}

impl PureEnsemble {
    pub fn new(branches: Vec<(f64, StateVector)>) -> Result<Self> {
        let (_, first) = branches
            .first()
            .ok_or_else(|| Error::InvalidState("empty ensemble".into()))?;
        let dims = first.dims().clone();
        if dims.n_factors() != 2 {
            return Err(Error::InvalidFactor { index: 1, count: dims.n_factors() });
        }
        let mut total = 0.0;
        let mut out = Vec::with_capacity(branches.len());
        for (w, psi) in branches {
            if psi.dims() != &dims {
                return Err(Error::DimensionMismatch("ensemble branch on different space".into()));
            }
            if w < 0.0 {
                return Err(Error::InvalidState(format!("negative branch weight {w}")));
            }
            total += w;
            out.push((w, psi.vector().clone()));
        }
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidState(format!("branch weights sum to {total}")));
        }
        Ok(Self { dims, branches: out })
    }

    pub fn dims(&self) -> &HilbertDims {
        &self.dims
    }

    pub fn branches(&self) -> &[(f64, CVector)] {
        &self.branches
    }

    fn spin_dim(&self) -> usize {
        self.dims.factors()[0]
    }

    fn osc_dim(&self) -> usize {
        self.dims.factors()[1]
    }

    pub fn density_matrix(&self) -> DensityMatrix {
        let n = self.dims.total();
        let mut m = CMatrix::zeros(n, n);
        for (w, v) in &self.branches {
            m += (v * v.adjoint()).map(|z| z * c(*w));
        }
        DensityMatrix::from_parts_unchecked(self.dims.clone(), m)
    }

    /// Reduced spin state, Σ_b w_b tr_osc |ψ_b⟩⟨ψ_b|.
    pub fn reduced_spin(&self) -> DensityMatrix {
        let (ds, no) = (self.spin_dim(), self.osc_dim());
        let mut m = CMatrix::zeros(ds, ds);
        for (w, v) in &self.branches {
            for s in 0..ds {
                for sp in 0..ds {
                    let mut acc = Complex64::new(0.0, 0.0);
                    for k in 0..no {
                        acc += v[s * no + k] * v[sp * no + k].conj();
                    }
                    m[(s, sp)] += acc * c(*w);
                }
            }
        }
        DensityMatrix::from_parts_unchecked(HilbertDims::single(ds).expect("dims"), m)
    }

    /// Reduced oscillator state, Σ_b w_b tr_spin |ψ_b⟩⟨ψ_b|.
    pub fn reduced_osc(&self) -> DensityMatrix {
        let (ds, no) = (self.spin_dim(), self.osc_dim());
        let mut m = CMatrix::zeros(no, no);
        for (w, v) in &self.branches {
            for s in 0..ds {
                let off = s * no;
                for k in 0..no {
                    let vk = v[off + k] * c(*w);
                    for kp in 0..no {
                        m[(k, kp)] += vk * v[off + kp].conj();
                    }
                }
            }
        }
        DensityMatrix::from_parts_unchecked(HilbertDims::single(no).expect("dims"), m)
    }

    /// Population of the top two Fock levels of the reduced oscillator state.
    pub fn top_two_population(&self) -> f64 {
        let (ds, no) = (self.spin_dim(), self.osc_dim());
        if no < 2 {
            return 1.0;
        }
        let mut pop = 0.0;
        for (w, v) in &self.branches {
            for s in 0..ds {
                let off = s * no;
                pop += w * (v[off + no - 1].norm_sqr() + v[off + no - 2].norm_sqr());
            }
        }
        pop
    }

    fn apply(&mut self, u: &CMatrix) {
        for (_, v) in &mut self.branches {
            let mut next = u * &*v;
            let norm = next.norm();
            next /= c(norm);
            *v = next;
        }
    }
}

/// Drives a [`PureEnsemble`] along a uniform grid with a cached one-step
/// propagator.
pub struct BranchPropagator {
    ensemble: PureEnsemble,
    u_step: CMatrix,
    grid: TimeGrid,
    k: usize,
}

impl BranchPropagator {
    pub fn new(ensemble: PureEnsemble, h: &Operator, grid: TimeGrid) -> Result<Self> {
        if h.dims() != ensemble.dims() {
            return Err(Error::DimensionMismatch(
                "Hamiltonian and ensemble live on different spaces".into(),
            ));
        }
        let u_step = eigen_propagator(h, grid.step())?;
        Ok(Self { ensemble, u_step: u_step.into_matrix(), grid, k: 0 })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    /// Current sample index and time.
    pub fn position(&self) -> (usize, f64) {
        (self.k, self.grid.t(self.k))
    }

    pub fn ensemble(&self) -> &PureEnsemble {
        &self.ensemble
    }

    /// Advance one grid step; false once the grid is exhausted.
    pub fn step(&mut self) -> bool {
        if self.k >= self.grid.n_steps() {
            return false;
        }
        self.ensemble.apply(&self.u_step);
        self.k += 1;
        true
    }
}

/// Evolve a semi-mixed ensemble along the grid, calling `visit` at every
/// sample (including the initial one).
pub fn scan_semi_mixed<F>(
    branches: Vec<(f64, StateVector)>,
    h: &Operator,
    grid: &TimeGrid,
    mut visit: F,
) -> Result<()>
where
    F: FnMut(usize, f64, &PureEnsemble) -> Result<()>,
{
    let ensemble = PureEnsemble::new(branches)?;
    let mut prop = BranchPropagator::new(ensemble, h, *grid)?;
    loop {
        let (k, t) = prop.position();
        visit(k, t, prop.ensemble())?;
        if !prop.step() {
            break;
        }
    }
    Ok(())
}

struct TrajectoryBuilder {
    grid: TimeGrid,
    threshold: f64,
    purity_spin: Vec<f64>,
    purity_osc: Vec<f64>,
    reduced_spin: Vec<DensityMatrix>,
    reduced_osc: Option<Vec<DensityMatrix>>,
    totals: Option<Vec<DensityMatrix>>,
    first_tainted: Option<usize>,
    max_top_two: f64,
}

impl TrajectoryBuilder {
    fn new(grid: TimeGrid, policy: StorePolicy, threshold: f64) -> Self {
        let n = grid.n_samples();
        Self {
            grid,
            threshold,
            purity_spin: Vec::with_capacity(n),
            purity_osc: Vec::with_capacity(n),
            reduced_spin: Vec::with_capacity(n),
            reduced_osc: policy.reduced_osc.then(|| Vec::with_capacity(n)),
            totals: policy.totals.then(|| Vec::with_capacity(n)),
            first_tainted: None,
            max_top_two: 0.0,
        }
    }

    fn push(
        &mut self,
        k: usize,
        rho_spin: DensityMatrix,
        rho_osc: DensityMatrix,
        total: Option<DensityMatrix>,
    ) {
        let top_two = {
            let m = rho_osc.matrix();
            let n = m.nrows();
            if n < 2 {
                1.0
            } else {
                m[(n - 1, n - 1)].re + m[(n - 2, n - 2)].re
            }
        };
        if top_two > self.max_top_two {
            self.max_top_two = top_two;
        }
        if top_two > self.threshold && self.first_tainted.is_none() {
            self.first_tainted = Some(k);
        }
        self.purity_spin.push(rho_spin.purity());
        self.purity_osc.push(rho_osc.purity());
        self.reduced_spin.push(rho_spin);
        if let Some(store) = self.reduced_osc.as_mut() {
            store.push(rho_osc);
        }
        if let (Some(store), Some(rho)) = (self.totals.as_mut(), total) {
            store.push(rho);
        }
    }

    fn finish(self) -> Trajectory {
        Trajectory {
            grid: self.grid,
            purity_spin: self.purity_spin,
            purity_osc: self.purity_osc,
            reduced_spin: self.reduced_spin,
            reduced_osc: self.reduced_osc,
            totals: self.totals,
            first_tainted: self.first_tainted,
            occupation_threshold: self.threshold,
            max_top_two: self.max_top_two,
        }
    }
}

/// Exact evolution of an arbitrary bipartite density matrix: ρ(t_k) =
/// U ρ(t_{k-1}) U† with the one-step U cached from the eigendecomposition.
pub fn evolve(
    initial: &DensityMatrix,
    h: &Operator,
    grid: &TimeGrid,
    policy: StorePolicy,
) -> Result<Trajectory> {
    if initial.dims() != h.dims() {
        return Err(Error::DimensionMismatch(
            "initial state and Hamiltonian live on different spaces".into(),
        ));
    }
    if initial.dims().n_factors() != 2 {
        return Err(Error::InvalidFactor { index: 1, count: initial.dims().n_factors() });
    }
    let u = eigen_propagator(h, grid.step())?.into_matrix();
    let u_dag = u.adjoint();

    let mut builder = TrajectoryBuilder::new(*grid, policy, OCCUPATION_THRESHOLD);
    let mut rho = initial.matrix().clone();
    for k in 0..grid.n_samples() {
        if k > 0 {
            rho = &u * &rho * &u_dag;
            // re-Hermitize to stop round-off drift over long grids
            rho = (&rho + &rho.adjoint()).map(|z| z * c(0.5));
        }
        let state = DensityMatrix::from_parts_unchecked(initial.dims().clone(), rho.clone());
        let rs = state.partial_trace(0)?;
        let ro = state.partial_trace(1)?;
        builder.push(k, rs, ro, policy.totals.then(|| state.clone()));
    }
    Ok(builder.finish())
}

/// Exact evolution of a semi-mixed ensemble (the fast path); produces the
/// same [`Trajectory`] records as [`evolve`].
pub fn evolve_semi_mixed(
    branches: Vec<(f64, StateVector)>,
    h: &Operator,
    grid: &TimeGrid,
    policy: StorePolicy,
) -> Result<Trajectory> {
    let mut builder = TrajectoryBuilder::new(*grid, policy, OCCUPATION_THRESHOLD);
    scan_semi_mixed(branches, h, grid, |k, _t, ens| {
        let total = policy.totals.then(|| ens.density_matrix());
        builder.push(k, ens.reduced_spin(), ens.reduced_osc(), total);
        Ok(())
    })?;
    Ok(builder.finish())
}

/// Exact model trajectory from the standard mixture ⊗ coherent initial state.
pub fn model_trajectory(
    params: &SystemParams,
    kind: ModelKind,
    cutoff: usize,
    grid: &TimeGrid,
    policy: StorePolicy,
) -> Result<Trajectory> {
    let h = models::build_hamiltonian(params, kind, cutoff)?;
    let branches = models::initial_branches(params, cutoff)?;
    evolve_semi_mixed(branches, &h, grid, policy)
}

/// Peak top-two Fock population over a pilot run to `horizon`; the cutoff
/// search oracle.
pub(crate) fn pilot_max_top_two(
    params: &SystemParams,
    kind: ModelKind,
    cutoff: usize,
    horizon: f64,
) -> Result<f64> {
    // ~24 samples per oscillator period is plenty: the one-step propagator is
    // exact, sampling only has to catch the smooth occupation peaks.
    let periods = horizon * params.omega_o / (2.0 * std::f64::consts::PI);
    let n = ((periods * 24.0).ceil() as usize).clamp(96, 4096);
    let grid = TimeGrid::from_step(0.0, horizon, horizon / n as f64)?;
    let h = models::build_hamiltonian(params, kind, cutoff)?;
    let branches = match models::initial_branches(params, cutoff) {
        Ok(b) => b,
        // a cutoff too small for the coherent tail certainly fails the test
        Err(Error::CutoffTooSmall { .. }) => return Ok(1.0),
        Err(e) => return Err(e),
    };
    let mut peak: f64 = 0.0;
    scan_semi_mixed(branches, &h, &grid, |_, _, ens| {
        peak = peak.max(ens.top_two_population());
        Ok(())
    })?;
    Ok(peak)
}

/// Exact resonant-JCM propagator in the interaction picture, assembled on
/// the truncated space:
///
/// U(t) = [[cos(gt B), −i a† sin(gt A)/A], [−i sin(gt A)/A a, cos(gt A)]]
///
/// with A = √(a†a + 1), B = √(a†a). Top boundary rows are not unitary (the
/// a† column leaves the truncated space), so compare only on states
/// supported well below the cutoff.
pub fn jcm_closed_form_propagator(g: f64, cutoff: usize, t: f64) -> Result<Operator> {
    if cutoff < 2 {
        return Err(Error::InvalidDims("JCM propagator needs cutoff >= 2".into()));
    }
    let n = cutoff;
    let gt = g * t;
    let mut u = CMatrix::zeros(2 * n, 2 * n);
    for k in 0..n {
        let root_k = (k as f64).sqrt();
        let root_k1 = ((k + 1) as f64).sqrt();
        // ground block: cos(gt sqrt(n))
        u[(k, k)] = c((gt * root_k).cos());
        // excited block: cos(gt sqrt(n+1))
        u[(n + k, n + k)] = c((gt * root_k1).cos());
        // -i a† sin(gt A)/A : |0, k+1>  <-  |1, k>
        if k + 1 < n {
            u[(k + 1, n + k)] = ci(0.0, -(gt * root_k1).sin());
        }
        // -i sin(gt A)/A a : |1, k-1>  <-  |0, k>
        if k >= 1 {
            u[(n + k - 1, k)] = ci(0.0, -(gt * root_k).sin());
        }
    }
    Operator::new(HilbertDims::bipartite(2, n)?, u)
}

/// Closed-form z-SOM state at time t: coherent branches
/// |α_±(t)⟩ = |(α + β_±)e^{−iω_o t} − β_±⟩ with β_± = ±λ/√(2 m ω_o³),
/// weighted c and 1−c on the spin blocks (global phases dropped).
pub fn z_som_analytic_state(
    params: &SystemParams,
    t: f64,
    cutoff: usize,
) -> Result<DensityMatrix> {
    params.validate()?;
    if params.kappa != 0.0 {
        return Err(Error::KappaNotZero(params.kappa));
    }
    let beta = params.lambda / (2.0 * params.mass * params.omega_o.powi(3)).sqrt();
    let phase = ci(0.0, -params.omega_o * t).exp();
    let branch_alpha = |sign: f64| -> Complex64 {
        let b = c(sign * beta);
        (params.alpha + b) * phase - b
    };
    let mut branches = Vec::with_capacity(2);
    let weights = [(0usize, params.ground_weight, -1.0), (1usize, 1.0 - params.ground_weight, 1.0)];
    for (spin_idx, w, sign) in weights {
        if w > 0.0 {
            let osc = bosonic::coherent_state(branch_alpha(sign), cutoff)?;
            let spin = StateVector::basis(2, spin_idx)?;
            branches.push((w, spin.tensor(&osc)?));
        }
    }
    DensityMatrix::mixture(&branches)
}

/// Mean-field pair: a mixed spin state driven by the oscillator expectation
/// ⟨x̂⟩ and a pure oscillator state driven by tr(ŝρ_s).
#[derive(Clone, Debug)]
pub struct FAState {
    pub rho_spin: DensityMatrix,
    pub psi_osc: StateVector,
}

/// Internal integration variable of the coupled mean-field equations.
#[derive(Clone)]
struct FaVec {
    rho: CMatrix,
    psi: CVector,
}

impl FaVec {
    fn axpy(&self, scale: f64, d: &FaVec) -> FaVec {
        FaVec {
            rho: &self.rho + &d.rho.map(|z| z * c(scale)),
            psi: &self.psi + &d.psi.map(|z| z * c(scale)),
        }
    }

    fn rk4_combine(&self, h: f64, k1: &FaVec, k2: &FaVec, k3: &FaVec, k4: &FaVec) -> FaVec {
        let w = h / 6.0;
        FaVec {
            rho: &self.rho
                + &(&k1.rho + &k2.rho.map(|z| z * c(2.0)) + &k3.rho.map(|z| z * c(2.0)) + &k4.rho)
                    .map(|z| z * c(w)),
            psi: &self.psi
                + &(&k1.psi + &k2.psi.map(|z| z * c(2.0)) + &k3.psi.map(|z| z * c(2.0)) + &k4.psi)
                    .map(|z| z * c(w)),
        }
    }

    fn distance(&self, other: &FaVec) -> f64 {
        let drho = (&self.rho - &other.rho).iter().map(|z| z.norm()).fold(0.0, f64::max);
        let dpsi = (&self.psi - &other.psi).iter().map(|z| z.norm()).fold(0.0, f64::max);
        drho.max(dpsi)
    }

    fn cleanup(&mut self) {
        self.rho = (&self.rho + &self.rho.adjoint()).map(|z| z * c(0.5));
        let norm = self.psi.norm();
        self.psi /= c(norm);
    }
}

struct FaSystem {
    h_spin: CMatrix,
    s_op: CMatrix,
    h_osc: CMatrix,
    x_op: CMatrix,
    lambda: f64,
}

impl FaSystem {
    fn new(params: &SystemParams, cutoff: usize) -> Self {
        let s_op = &models::sigma_z() + &models::sigma_x().scale(params.kappa);
        Self {
            h_spin: models::spin_hamiltonian(params).into_matrix(),
            s_op: s_op.into_matrix(),
            h_osc: bosonic::oscillator_hamiltonian(cutoff, params.omega_o).into_matrix(),
            x_op: bosonic::position(cutoff, params.mass, params.omega_o).into_matrix(),
            lambda: params.lambda,
        }
    }

    /// i ρ̇_s = [H_s + λ⟨x̂⟩ ŝ, ρ_s],  i ψ̇_o = (H_o + λ tr(ŝ ρ_s) x̂) ψ_o.
    fn derivative(&self, y: &FaVec) -> FaVec {
        let psi_norm_sqr = y.psi.norm_squared();
        let x_exp = {
            let xv = &self.x_op * &y.psi;
            y.psi.dotc(&xv).re / psi_norm_sqr
        };
        let s_exp = {
            // tr(s rho), real for Hermitian factors
            let m = &self.s_op * &y.rho;
            m.trace().re
        };
        let h_eff_spin = &self.h_spin + &self.s_op.map(|z| z * c(self.lambda * x_exp));
        let comm = linalg::commutator(&h_eff_spin, &y.rho);
        let drho = comm.map(|z| z * ci(0.0, -1.0));
        let h_eff_osc = &self.h_osc + &self.x_op.map(|z| z * c(self.lambda * s_exp));
        let dpsi = (&h_eff_osc * &y.psi).map(|z| z * ci(0.0, -1.0));
        FaVec { rho: drho, psi: dpsi }
    }

    fn rk4_step(&self, y: &FaVec, h: f64) -> FaVec {
        let k1 = self.derivative(y);
        let k2 = self.derivative(&y.axpy(h / 2.0, &k1));
        let k3 = self.derivative(&y.axpy(h / 2.0, &k2));
        let k4 = self.derivative(&y.axpy(h, &k3));
        y.rk4_combine(h, &k1, &k2, &k3, &k4)
    }
}

/// Integrate the coupled mean-field equations from an arbitrary pair.
/// Classic RK4 at the grid step; each step is crosschecked against two half
/// steps and rejected if the Richardson estimate exceeds `tol`.
pub fn fa_evolve_from(
    initial: &FAState,
    params: &SystemParams,
    grid: &TimeGrid,
    tol: f64,
) -> Result<Vec<FAState>> {
    params.validate()?;
    let cutoff = initial.psi_osc.dims().total();
    if initial.rho_spin.dim() != 2 {
        return Err(Error::DimensionMismatch("mean-field spin state must be 2x2".into()));
    }
    let sys = FaSystem::new(params, cutoff);
    let h = grid.step();

    let mut y = FaVec {
        rho: initial.rho_spin.matrix().clone(),
        psi: initial.psi_osc.vector().clone(),
    };
    let spin_dims = HilbertDims::single(2)?;
    let osc_dims = HilbertDims::single(cutoff)?;
    let snapshot = |y: &FaVec| -> Result<FAState> {
        Ok(FAState {
            rho_spin: DensityMatrix::from_parts_unchecked(spin_dims.clone(), y.rho.clone()),
            psi_osc: StateVector::new(osc_dims.clone(), y.psi.clone())?,
        })
    };

    let mut out = Vec::with_capacity(grid.n_samples());
    out.push(snapshot(&y)?);
    for k in 0..grid.n_steps() {
        let full = sys.rk4_step(&y, h);
        let half = sys.rk4_step(&sys.rk4_step(&y, h / 2.0), h / 2.0);
        let estimate = full.distance(&half) / 15.0;
        if estimate > tol {
            return Err(Error::StepRejected { t: grid.t(k), estimate, tol });
        }
        y = half;
        y.cleanup();
        out.push(snapshot(&y)?);
    }
    Ok(out)
}

/// Mean-field evolution from the standard mixture ⊗ coherent initial state.
pub fn fa_evolve(params: &SystemParams, grid: &TimeGrid, cutoff: usize) -> Result<Vec<FAState>> {
    let c0 = params.ground_weight;
    let rho_spin = DensityMatrix::new(
        HilbertDims::single(2)?,
        CMatrix::from_diagonal(&CVector::from_vec(vec![c(c0), c(1.0 - c0)])),
    )?;
    let psi_osc = bosonic::coherent_state(params.alpha, cutoff)?;
    fa_evolve_from(&FAState { rho_spin, psi_osc }, params, grid, FA_LOCAL_ERROR_TOL)
}
