//! Work-source quality measures: the instantaneous ratio r(t), the
//! time-integrated ratio R(t₁,t₀) with its quadrature crosscheck, signed
//! work/heat integrals, the minimum-purity bound and the breakdown time.

use crate::error::{Error, Result};
use crate::lembas::FluxSeries;
use crate::models::{ModelKind, SystemParams};
use crate::propagation::{self, StorePolicy, TimeGrid};

/// Default relative tolerance on R under quadrature changes (step halving,
/// rectangle vs trapezoid).
pub const QUADRATURE_REL_TOL: f64 = 1e-3;

/// r(t) = |Ẇ|/(|Ẇ|+|Q̇|); absent when both fluxes vanish — such samples
/// carry zero weight in R anyway.
pub fn instantaneous_ratio(w_dot: f64, q_dot: f64) -> Option<f64> {
    let total = w_dot.abs() + q_dot.abs();
    if total == 0.0 {
        None
    } else {
        Some(w_dot.abs() / total)
    }
}

/// (1 + e^{−8ξ})/2: the purity floor of the pure-σ_z model over all times
/// and initial mixtures.
pub fn min_purity_bound(xi: f64) -> f64 {
    0.5 * (1.0 + (-8.0 * xi).exp())
}

/// Rectangle-vs-trapezoid crosscheck on the reported R.
#[derive(Clone, Copy, Debug, Default)]
pub struct QuadratureCrosscheck {
    pub r_rectangle: Option<f64>,
    pub r_trapezoid: Option<f64>,
    /// |rect − trap| relative to the rectangle value.
    pub rel_gap: Option<f64>,
}

/// Integral quality measures over one window of a flux series.
#[derive(Clone, Debug)]
pub struct QualityReport {
    pub t0: f64,
    pub t1: f64,
    /// r(t) per window sample; absent where both fluxes vanish.
    pub r_series: Vec<Option<f64>>,
    /// R(t₁,t₀) = 𝒲/(𝒲+𝒬); absent when no energy was exchanged at all.
    pub r: Option<f64>,
    /// The same R computed as the flux-weighted mean of r(t); agrees with
    /// `r` to round-off by construction (same quadrature on both routes).
    pub r_weighted: Option<f64>,
    /// 𝒲 = ∫|Ẇ|dt (rectangle rule).
    pub w_abs: f64,
    /// 𝒬 = ∫|Q̇|dt (rectangle rule).
    pub q_abs: f64,
    /// Cumulative signed ∫Ẇ dt along the window.
    pub w_signed: Vec<f64>,
    /// Cumulative signed ∫Q̇ dt along the window.
    pub q_signed: Vec<f64>,
    /// Breakdown time, attached by the caller when a purity series is at hand.
    pub t_star: Option<f64>,
    pub crosscheck: QuadratureCrosscheck,
}

impl QualityReport {
    pub fn with_t_star(mut self, t_star: Option<f64>) -> Self {
        self.t_star = t_star;
        self
    }
}

fn window_indices(series: &FluxSeries, t0: f64, t1: f64) -> Result<(usize, usize)> {
    let grid = series.grid();
    let k0 = grid.index_of(t0).ok_or(Error::WindowOffGrid { t0, t1 })?;
    let k1 = grid.index_of(t1).ok_or(Error::WindowOffGrid { t0, t1 })?;
    if k1 <= k0 {
        return Err(Error::InvalidGrid(format!("window [{t0}, {t1}] is empty")));
    }
    if let Some(kt) = series.first_tainted() {
        if kt <= k1 {
            return Err(Error::TaintedRange {
                t: grid.t(kt),
                population: f64::NAN,
                threshold: series.occupation_threshold(),
            });
        }
    }
    Ok((k0, k1))
}

fn rectangle_sum(values: impl Iterator<Item = f64>, h: f64) -> f64 {
    values.map(|v| v * h).sum()
}

/// 𝒲, 𝒬, R and the signed integrals over [t0, t1] (both on the grid).
/// Rectangle rule throughout, with the trapezoid value of R recorded as a
/// crosscheck, never silently substituted.
pub fn integral_quality(series: &FluxSeries, t0: f64, t1: f64) -> Result<QualityReport> {
    let (k0, k1) = window_indices(series, t0, t1)?;
    let h = series.grid().step();
    let samples = &series.samples()[k0..=k1];

    let w_abs = rectangle_sum(samples[..samples.len() - 1].iter().map(|s| s.w_dot.abs()), h);
    let q_abs = rectangle_sum(samples[..samples.len() - 1].iter().map(|s| s.q_dot.abs()), h);

    let r_series: Vec<Option<f64>> =
        samples.iter().map(|s| instantaneous_ratio(s.w_dot, s.q_dot)).collect();

    let total = w_abs + q_abs;
    let r = if total > 0.0 { Some(w_abs / total) } else { None };

    // weighted-mean route: Σ r_k (|W|+|Q|)_k h / Σ (|W|+|Q|)_k h, zero-flux
    // samples contributing zero weight
    let r_weighted = if total > 0.0 {
        let num: f64 = samples[..samples.len() - 1]
            .iter()
            .map(|s| {
                instantaneous_ratio(s.w_dot, s.q_dot)
                    .map(|r| r * (s.w_dot.abs() + s.q_dot.abs()) * h)
                    .unwrap_or(0.0)
            })
            .sum();
        Some(num / total)
    } else {
        None
    };

    // trapezoid crosscheck
    let trap = |f: &dyn Fn(&crate::lembas::FluxSample) -> f64| -> f64 {
        let inner: f64 = samples[1..samples.len() - 1].iter().map(|s| f(s) * h).sum();
        inner + 0.5 * h * (f(&samples[0]) + f(samples.last().unwrap()))
    };
    let w_trap = trap(&|s| s.w_dot.abs());
    let q_trap = trap(&|s| s.q_dot.abs());
    let r_trap = if w_trap + q_trap > 0.0 { Some(w_trap / (w_trap + q_trap)) } else { None };
    let rel_gap = match (r, r_trap) {
        (Some(a), Some(b)) if a > 0.0 => Some((a - b).abs() / a),
        _ => None,
    };

    let (w_signed, q_signed) = signed_prefix_sums(samples, h);

    Ok(QualityReport {
        t0,
        t1,
        r_series,
        r,
        r_weighted,
        w_abs,
        q_abs,
        w_signed,
        q_signed,
        t_star: None,
        crosscheck: QuadratureCrosscheck { r_rectangle: r, r_trapezoid: r_trap, rel_gap },
    })
}

fn signed_prefix_sums(samples: &[crate::lembas::FluxSample], h: f64) -> (Vec<f64>, Vec<f64>) {
    let mut w = Vec::with_capacity(samples.len());
    let mut q = Vec::with_capacity(samples.len());
    let (mut aw, mut aq) = (0.0, 0.0);
    w.push(0.0);
    q.push(0.0);
    for s in &samples[..samples.len() - 1] {
        aw += s.w_dot * h;
        aq += s.q_dot * h;
        w.push(aw);
        q.push(aq);
    }
    (w, q)
}

/// Cumulative signed W(t, t0) and Q(t, t0) along the window.
pub fn signed_integrals(series: &FluxSeries, t0: f64, t1: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    let (k0, k1) = window_indices(series, t0, t1)?;
    Ok(signed_prefix_sums(&series.samples()[k0..=k1], series.grid().step()))
}

/// First downward crossing of `threshold`, located by linear interpolation
/// between the bracketing samples; absent if the series never crosses.
pub fn breakdown_time(times: &[f64], purity: &[f64], threshold: f64) -> Option<f64> {
    assert_eq!(times.len(), purity.len(), "mismatched series lengths");
    if purity.is_empty() {
        return None;
    }
    if purity[0] <= threshold {
        return Some(times[0]);
    }
    for k in 1..purity.len() {
        if purity[k] <= threshold {
            let (p0, p1) = (purity[k - 1], purity[k]);
            let (t0, t1) = (times[k - 1], times[k]);
            let frac = (p0 - threshold) / (p0 - p1);
            return Some(t0 + frac * (t1 - t0));
        }
    }
    None
}

/// Exact-vs-RWA purity comparison on a shared grid and cutoff.
#[derive(Clone, Debug)]
pub struct RwaDeviation {
    pub times: Vec<f64>,
    pub purity_exact: Vec<f64>,
    pub purity_rwa: Vec<f64>,
    /// |P_exact(t) − P_rwa(t)| per sample (log only at presentation time).
    pub deviation: Vec<f64>,
}

impl RwaDeviation {
    pub fn max_abs_deviation(&self) -> f64 {
        self.deviation.iter().cloned().fold(0.0, f64::max)
    }

    pub fn max_rel_deviation(&self) -> f64 {
        self.deviation
            .iter()
            .zip(&self.purity_exact)
            .map(|(d, p)| d / p)
            .fold(0.0, f64::max)
    }
}

/// Oscillator-purity deviation between the exact xz dynamics and the
/// rotating-wave dynamics at the same parameters. Requires resonance.
pub fn rwa_deviation(params: &SystemParams, grid: &TimeGrid, cutoff: usize) -> Result<RwaDeviation> {
    let exact =
        propagation::model_trajectory(params, ModelKind::XzSom, cutoff, grid, StorePolicy::default())?;
    let rwa =
        propagation::model_trajectory(params, ModelKind::JcmRwa, cutoff, grid, StorePolicy::default())?;
    let deviation = exact
        .purity_osc()
        .iter()
        .zip(rwa.purity_osc())
        .map(|(a, b)| (a - b).abs())
        .collect();
    Ok(RwaDeviation {
        times: grid.times(),
        purity_exact: exact.purity_osc().to_vec(),
        purity_rwa: rwa.purity_osc().to_vec(),
        deviation,
    })
}
