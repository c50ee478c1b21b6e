//! Closed-form reference results used to validate the numerical engine:
//! the analytic oscillator purity of the pure-σ_z model, the peak-to-peak
//! amplitude of the induced spin splitting, first-order perturbation theory
//! for the resonant JCM, and the two ξ → 0 work-source limit sweeps.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::hilbert::{HilbertDims, StateVector};
use crate::linalg::CVector;
use crate::measures;
use crate::models::SystemParams;
use crate::propagation;
use crate::bosonic;

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// Analytic oscillator purity of the pure-σ_z model:
/// c² + (1−c)² + 2c(1−c) exp[−8ξ sin²(ω_o t/2)].
pub fn analytic_purity(params: &SystemParams, t: f64) -> Result<f64> {
    params.validate()?;
    if params.kappa != 0.0 {
        return Err(Error::KappaNotZero(params.kappa));
    }
    let cw = params.ground_weight;
    let xi = params.xi();
    let overlap = (-8.0 * xi * (0.5 * params.omega_o * t).sin().powi(2)).exp();
    Ok(cw * cw + (1.0 - cw) * (1.0 - cw) + 2.0 * cw * (1.0 - cw) * overlap)
}

/// Peak-to-peak amplitude of the induced spin splitting in the mean-field
/// limit: Δω_s^eff = 2λ√(2/(mω_o)) |α + γ| with γ = √(ξ/2)(1 − 2c).
/// Derived for real α; complex α is rejected rather than guessed.
pub fn stroke_amplitude(params: &SystemParams) -> Result<f64> {
    params.validate()?;
    if params.kappa != 0.0 {
        return Err(Error::KappaNotZero(params.kappa));
    }
    if params.alpha.im != 0.0 {
        return Err(Error::ComplexAlpha(params.alpha));
    }
    let gamma = params.derived().gamma;
    Ok(2.0 * params.lambda.abs() * (2.0 / (params.mass * params.omega_o)).sqrt()
        * (params.alpha.re + gamma).abs())
}

/// Which pure initial state the perturbative expansion starts from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PtBranch {
    /// |0⟩⊗|α⟩ — factorizes at first order.
    Ground,
    /// |1⟩⊗|α⟩ — entangles at first order through â†|α⟩.
    Excited,
}

/// First-order interaction-picture state of the resonant JCM,
/// [1 − i g t (σ₊â + σ₋â†)] |branch⟩⊗|α⟩, normalized. The â†|α⟩ branch is
/// expanded term by term in the Fock basis.
pub fn first_order_pt_state(
    branch: PtBranch,
    alpha: Complex64,
    g: f64,
    t: f64,
    cutoff: usize,
) -> Result<StateVector> {
    let coh = bosonic::coherent_state(alpha, cutoff)?;
    let gt = g * t;
    let n = cutoff;
    let mut v = CVector::zeros(2 * n);
    match branch {
        PtBranch::Ground => {
            // sigma_+ a |0>|alpha> = alpha |1>|alpha>
            let corr = Complex64::new(0.0, -1.0) * alpha * c(gt);
            for k in 0..n {
                v[k] = coh.vector()[k];
                v[n + k] = corr * coh.vector()[k];
            }
        }
        PtBranch::Excited => {
            // sigma_- a† |1>|alpha> = |0> a†|alpha>; a†|alpha> level by level
            let mut raised = CVector::zeros(n);
            for k in 1..n {
                raised[k] = c((k as f64).sqrt()) * coh.vector()[k - 1];
            }
            // the dropped sqrt(n)|n> component must be negligible
            let expected_sq = 1.0 + alpha.norm_sqr();
            let deficit = expected_sq - raised.norm_squared();
            if deficit / expected_sq > 1e-9 {
                return Err(Error::CutoffTooSmall {
                    cutoff,
                    alpha_abs: alpha.norm(),
                    deficit,
                    tol: 1e-9,
                });
            }
            let corr = Complex64::new(0.0, -gt);
            for k in 0..n {
                v[n + k] = coh.vector()[k];
                v[k] = corr * raised[k];
            }
        }
    }
    StateVector::normalized(HilbertDims::bipartite(2, n)?, v)
}

/// Phase-invariant distance to the exact interaction-picture JCM state,
/// √(2(1 − |⟨ψ_PT|ψ_exact⟩|)). Scales as (gt)² for small gt.
pub fn pt_infidelity(
    branch: PtBranch,
    alpha: Complex64,
    g: f64,
    t: f64,
    cutoff: usize,
) -> Result<f64> {
    let pt = first_order_pt_state(branch, alpha, g, t, cutoff)?;
    let exact = exact_jcm_state(branch, alpha, g, t, cutoff)?;
    let overlap = pt.inner(&exact).norm();
    Ok((2.0 * (1.0 - overlap).max(0.0)).sqrt())
}

/// Exact interaction-picture JCM state from the closed-form propagator.
pub fn exact_jcm_state(
    branch: PtBranch,
    alpha: Complex64,
    g: f64,
    t: f64,
    cutoff: usize,
) -> Result<StateVector> {
    let coh = bosonic::coherent_state(alpha, cutoff)?;
    let spin_idx = match branch {
        PtBranch::Ground => 0,
        PtBranch::Excited => 1,
    };
    let spin = StateVector::basis(2, spin_idx)?;
    let initial = spin.tensor(&coh)?;
    let u = propagation::jcm_closed_form_propagator(g, cutoff, t)?;
    StateVector::normalized(initial.dims().clone(), u.matrix() * initial.vector())
}

/// The two ways of enforcing ξ → 0.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LimitKind {
    /// m → s·m at fixed ω_o, λ; optionally α → √s·α so |α|²/m stays put.
    Classical { hold_excitation_per_mass: bool },
    /// ω_o → s·ω_o with λ → √s·λ, keeping λ²/ω_o fixed.
    Quantum,
}

/// One scaled instance of a limit sweep.
#[derive(Clone, Copy, Debug)]
pub struct LimitSpec {
    pub kind: LimitKind,
    pub scale: f64,
}

impl LimitSpec {
    pub fn apply(&self, params: &SystemParams) -> SystemParams {
        let s = self.scale;
        match self.kind {
            LimitKind::Classical { hold_excitation_per_mass } => {
                let mut p = *params;
                p.mass *= s;
                if hold_excitation_per_mass {
                    p.alpha *= c(s.sqrt());
                }
                p
            }
            LimitKind::Quantum => {
                let mut p = *params;
                p.omega_o *= s;
                p.lambda *= s.sqrt();
                p
            }
        }
    }
}

/// One row of a limit sweep: the scaled parameters with their ξ, purity
/// bound and splitting amplitude.
#[derive(Clone, Copy, Debug)]
pub struct LimitRow {
    pub scale: f64,
    pub params: SystemParams,
    pub xi: f64,
    pub min_purity_bound: f64,
    pub stroke_amplitude: f64,
}

/// Closed-form sweep of ξ, P_o^min and Δω_s^eff along one of the ξ → 0
/// routes.
pub fn limit_sweep(
    params: &SystemParams,
    kind: LimitKind,
    scales: &[f64],
) -> Result<Vec<LimitRow>> {
    params.validate()?;
    if params.kappa != 0.0 {
        return Err(Error::KappaNotZero(params.kappa));
    }
    scales
        .iter()
        .map(|&scale| {
            if !(scale > 0.0) {
                return Err(Error::InvalidParams(format!("sweep scale {scale} must be > 0")));
            }
            let scaled = LimitSpec { kind, scale }.apply(params);
            let xi = scaled.xi();
            Ok(LimitRow {
                scale,
                params: scaled,
                xi,
                min_purity_bound: measures::min_purity_bound(xi),
                stroke_amplitude: stroke_amplitude(&scaled)?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::ModelKind;
    use crate::propagation::{fa_evolve, StorePolicy, TimeGrid};
    use approx::assert_abs_diff_eq;

    fn fig1_params() -> SystemParams {
        SystemParams {
            omega_s: 1.0,
            omega_o: 1.0,
            lambda: 0.1,
            kappa: 0.0,
            mass: 1.0,
            alpha: c(0.0),
            ground_weight: 0.7,
        }
    }

    #[test]
    fn analytic_purity_is_one_at_t_zero() {
        for cw in [0.0, 0.3, 0.5, 0.7, 1.0] {
            let p = SystemParams { ground_weight: cw, ..fig1_params() };
            assert_abs_diff_eq!(analytic_purity(&p, 0.0).unwrap(), 1.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn analytic_purity_at_half_period() {
        // 0.58 + 0.42 e^{-0.08}
        let p = fig1_params();
        let expect = 0.58 + 0.42 * (-0.08_f64).exp();
        assert_abs_diff_eq!(
            analytic_purity(&p, std::f64::consts::PI).unwrap(),
            expect,
            epsilon = 1e-15
        );
        assert!((expect - 0.96771).abs() < 1e-5);
    }

    #[test]
    fn equal_mixture_minimum_matches_the_bound() {
        let p = SystemParams { ground_weight: 0.5, ..fig1_params() };
        let min = analytic_purity(&p, std::f64::consts::PI).unwrap();
        assert_abs_diff_eq!(min, measures::min_purity_bound(p.xi()), epsilon = 1e-14);
        // and it is the minimum over a dense time sweep
        let sweep_min = (0..=2000)
            .map(|k| analytic_purity(&p, k as f64 * 0.005 * std::f64::consts::PI).unwrap())
            .fold(f64::INFINITY, f64::min);
        assert!(sweep_min >= min - 1e-14);
    }

    #[test]
    fn analytic_purity_matches_exact_dynamics_over_a_period() {
        let p = fig1_params();
        let cutoff = 16;
        let period = 2.0 * std::f64::consts::PI;
        let grid = TimeGrid::from_step(0.0, period, period / 512.0).unwrap();
        let traj = propagation::model_trajectory(
            &p,
            ModelKind::ZSom,
            cutoff,
            &grid,
            StorePolicy::default(),
        )
        .unwrap();
        for (k, t) in grid.times().iter().enumerate() {
            let a = analytic_purity(&p, *t).unwrap();
            assert!(
                (a - traj.purity_osc()[k]).abs() < 1e-8,
                "t = {t}: analytic {a} vs numeric {}",
                traj.purity_osc()[k]
            );
        }
    }

    #[test]
    fn stroke_amplitude_examples() {
        // alpha = 0, c = 0.5 -> gamma = 0 -> zero amplitude
        let p = SystemParams { ground_weight: 0.5, ..fig1_params() };
        assert_abs_diff_eq!(stroke_amplitude(&p).unwrap(), 0.0, epsilon = 1e-15);

        // lambda = 0.1, m = omega = 1, c = 0.5, alpha = 1 -> 0.2 sqrt(2)
        let p = SystemParams { ground_weight: 0.5, alpha: c(1.0), ..fig1_params() };
        assert_abs_diff_eq!(
            stroke_amplitude(&p).unwrap(),
            0.2 * 2.0_f64.sqrt(),
            epsilon = 1e-15
        );

        let p = SystemParams { alpha: Complex64::new(1.0, 0.5), ..fig1_params() };
        assert!(matches!(stroke_amplitude(&p), Err(Error::ComplexAlpha(_))));
    }

    #[test]
    fn stroke_amplitude_matches_mean_field_extremes() {
        // with the oscillator driven by the constant displacement term alone,
        // lambda (max<x> - min<x>) over one period equals the closed form
        let p = SystemParams { alpha: c(1.0), ..fig1_params() };
        let cutoff = 24;
        let period = 2.0 * std::f64::consts::PI / p.omega_o;
        let grid = TimeGrid::from_step(0.0, period, period / 1000.0).unwrap();
        let states = fa_evolve(&p, &grid, cutoff).unwrap();
        let x = bosonic::position(cutoff, p.mass, p.omega_o);
        let xs: Vec<f64> = states.iter().map(|s| x.expectation_vec(&s.psi_osc).re).collect();
        let max = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let min = xs.iter().cloned().fold(f64::INFINITY, f64::min);
        let amp = p.lambda.abs() * (max - min);
        assert_abs_diff_eq!(amp, stroke_amplitude(&p).unwrap(), epsilon = 1e-6);
    }

    #[test]
    fn pt_ground_branch_with_vacuum_is_unchanged() {
        let psi = first_order_pt_state(PtBranch::Ground, c(0.0), 0.01, 5.0, 16).unwrap();
        // |0>|0> exactly: the alpha = 0 correction vanishes
        assert_abs_diff_eq!(psi.vector()[0].norm(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn pt_ground_branch_factorizes_but_excited_does_not() {
        let alpha = c(1.0);
        let (g, t, cutoff) = (0.01, 5.0, 40);
        let ground = first_order_pt_state(PtBranch::Ground, alpha, g, t, cutoff).unwrap();
        let excited = first_order_pt_state(PtBranch::Excited, alpha, g, t, cutoff).unwrap();
        let p_ground = crate::hilbert::DensityMatrix::pure(&ground)
            .partial_trace(0)
            .unwrap()
            .purity();
        let p_excited = crate::hilbert::DensityMatrix::pure(&excited)
            .partial_trace(0)
            .unwrap()
            .purity();
        assert!(1.0 - p_ground < 1e-12, "ground deficit {}", 1.0 - p_ground);
        assert!(1.0 - p_excited > 1e-6, "excited deficit {}", 1.0 - p_excited);
    }

    #[test]
    fn pt_infidelity_drops_fourfold_when_g_halves() {
        let alpha = c(1.0);
        let (t, cutoff) = (5.0, 40);
        for branch in [PtBranch::Ground, PtBranch::Excited] {
            let i1 = pt_infidelity(branch, alpha, 0.01, t, cutoff).unwrap();
            let i2 = pt_infidelity(branch, alpha, 0.005, t, cutoff).unwrap();
            let ratio = i1 / i2;
            assert!(
                (ratio - 4.0).abs() < 0.4,
                "{branch:?}: infidelity ratio {ratio} not ~4"
            );
        }
    }

    #[test]
    fn classical_limit_without_alpha_scaling_kills_the_amplitude() {
        let p = SystemParams { alpha: c(1.0), ..fig1_params() };
        let rows = limit_sweep(
            &p,
            LimitKind::Classical { hold_excitation_per_mass: false },
            &[1.0, 4.0, 16.0, 64.0],
        )
        .unwrap();
        for pair in rows.windows(2) {
            assert!(pair[1].stroke_amplitude < pair[0].stroke_amplitude);
            assert!(pair[1].xi < pair[0].xi);
            assert!(pair[1].min_purity_bound > pair[0].min_purity_bound);
        }
        assert!(rows.last().unwrap().stroke_amplitude < 0.2 * rows[0].stroke_amplitude);
    }

    #[test]
    fn classical_limit_with_alpha_scaling_keeps_the_amplitude() {
        let p = SystemParams { alpha: c(1.0), ground_weight: 0.5, ..fig1_params() };
        let rows = limit_sweep(
            &p,
            LimitKind::Classical { hold_excitation_per_mass: true },
            &[1.0, 4.0, 16.0],
        )
        .unwrap();
        // gamma = 0 here, so the amplitude is constant exactly
        for r in &rows {
            assert_abs_diff_eq!(r.stroke_amplitude, rows[0].stroke_amplitude, epsilon = 1e-12);
        }
    }

    #[test]
    fn quantum_limit_keeps_a_finite_amplitude() {
        let p = SystemParams { alpha: c(1.0), ground_weight: 0.7, ..fig1_params() };
        let rows =
            limit_sweep(&p, LimitKind::Quantum, &[1.0, 4.0, 16.0, 64.0]).unwrap();
        let limit_value = 2.0 * p.lambda * (2.0 / (p.mass * p.omega_o)).sqrt() * p.alpha.re;
        for pair in rows.windows(2) {
            assert!(pair[1].xi < pair[0].xi);
            assert!(pair[1].min_purity_bound > pair[0].min_purity_bound);
        }
        let last = rows.last().unwrap();
        assert!((last.stroke_amplitude - limit_value).abs() / limit_value < 1e-2);
        // xi column matches the scaled parameter sets exactly
        for r in &rows {
            assert_abs_diff_eq!(r.xi, r.params.xi(), epsilon = 1e-18);
        }
    }
}
