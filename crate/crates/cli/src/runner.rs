//! Scenario execution: resolve the cutoff, run the exact dynamics once,
//! attach the rotating-wave companion where needed, and emit the requested
//! CSV outputs plus a manifest sufficient to reproduce the run bit for bit.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use spinosc_core::lembas::{FluxEngine, FluxSeries};
use spinosc_core::measures;
use spinosc_core::models;
use spinosc_core::oracles;
use spinosc_core::propagation::{self, StorePolicy, TimeGrid, Trajectory};

use crate::config::{CutoffConfig, OutputKind, ScenarioConfig};
use crate::error::RunError;
use crate::table::{emit_csv, write_atomic, Cell};

/// Everything needed to reproduce a run byte for byte, plus the headline
/// derived quantities.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub notes: Option<String>,
    pub resolved: ResolvedSection,
    pub taint: TaintSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quality: Option<QualitySection>,
    pub columns: Vec<ColumnLegend>,
    /// Byte-for-byte echo of the scenario, with presets expanded.
    pub config: ScenarioConfig,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ResolvedSection {
    pub cutoff: usize,
    pub grid_samples: usize,
    pub occupation_threshold: f64,
    pub g: f64,
    pub xi: f64,
    pub gamma: f64,
    pub min_purity_bound: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TaintSection {
    pub tainted: bool,
    pub max_top_two_population: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct QualitySection {
    pub t0: f64,
    pub t1: f64,
    pub w_abs: f64,
    pub q_abs: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_trapezoid: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quadrature_rel_gap: Option<f64>,
    /// Breakdown time of the rotating-wave purity against the σ_z bound.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_star: Option<f64>,
    /// Same crossing on the exact purity series, for comparison.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_star_exact: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ColumnLegend {
    pub file: String,
    pub columns: String,
}

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub dir: PathBuf,
    pub files: Vec<String>,
    pub manifest: RunManifest,
}

struct MainScan {
    purity_spin: Vec<f64>,
    purity_osc: Vec<f64>,
    fluxes: Option<FluxSeries>,
    max_top_two: f64,
}

fn main_scan(
    config: &ScenarioConfig,
    grid: &TimeGrid,
    cutoff: usize,
    need_flux: bool,
) -> Result<MainScan, RunError> {
    let params = config.system_params();
    let kind = config.model_kind();
    let threshold = config.occupation_threshold();

    let h_total = models::build_hamiltonian(&params, kind, cutoff)?;
    let branches = models::initial_branches(&params, cutoff)?;
    let engine = if need_flux {
        let h12 = models::interaction_hamiltonian(&params, kind, cutoff)?;
        let h_local = models::spin_hamiltonian(&params);
        Some(FluxEngine::new(&h_total, &h12, &h_local)?)
    } else {
        None
    };

    let n = grid.n_samples();
    let mut purity_spin = Vec::with_capacity(n);
    let mut purity_osc = Vec::with_capacity(n);
    let mut samples = Vec::with_capacity(if need_flux { n } else { 0 });
    let mut taint: Option<(f64, f64)> = None;
    let mut max_top_two = 0.0_f64;

    propagation::scan_semi_mixed(branches, &h_total, grid, |_, t, ens| {
        let pop = ens.top_two_population();
        max_top_two = max_top_two.max(pop);
        if taint.is_none() && pop > threshold {
            taint = Some((t, pop));
        }
        purity_spin.push(ens.reduced_spin().purity());
        purity_osc.push(ens.reduced_osc().purity());
        if let Some(engine) = &engine {
            samples.push(engine.sample(t, ens)?);
        }
        Ok(())
    })?;

    if let Some((t, population)) = taint {
        return Err(RunError::Tainted { t, population, threshold });
    }

    let fluxes = engine.map(|_| FluxSeries::new(*grid, samples, None, threshold));
    Ok(MainScan { purity_spin, purity_osc, fluxes, max_top_two })
}

fn rwa_trajectory(
    config: &ScenarioConfig,
    grid: &TimeGrid,
    cutoff: usize,
) -> Result<Trajectory, RunError> {
    let params = config.system_params();
    let traj = propagation::model_trajectory(
        &params,
        spinosc_core::models::ModelKind::JcmRwa,
        cutoff,
        grid,
        StorePolicy::default(),
    )?;
    if let Some(t) = traj.first_tainted_time() {
        return Err(RunError::Tainted {
            t,
            population: traj.max_top_two(),
            threshold: traj.occupation_threshold(),
        });
    }
    Ok(traj)
}

struct OracleRow {
    check: &'static str,
    observed: f64,
    reference: f64,
    tolerance: f64,
    pass: bool,
}

fn oracle_rows(
    config: &ScenarioConfig,
    grid: &TimeGrid,
    cutoff: usize,
    scan: &MainScan,
    quality: Option<&measures::QualityReport>,
) -> Result<Vec<OracleRow>, RunError> {
    let params = config.system_params();
    let mut rows = Vec::new();

    match config.model {
        crate::config::ModelChoice::ZSom => {
            let mut worst = 0.0_f64;
            for (k, t) in grid.times().iter().enumerate() {
                let analytic = oracles::analytic_purity(&params, *t)?;
                worst = worst.max((analytic - scan.purity_osc[k]).abs());
            }
            rows.push(OracleRow {
                check: "analytic_purity_max_abs_dev",
                observed: worst,
                reference: 0.0,
                tolerance: 1e-8,
                pass: worst <= 1e-8,
            });
            let min_purity = scan.purity_osc.iter().cloned().fold(f64::INFINITY, f64::min);
            let bound = measures::min_purity_bound(params.xi());
            rows.push(OracleRow {
                check: "purity_min_not_below_bound",
                observed: min_purity,
                reference: bound,
                tolerance: 1e-8,
                pass: min_purity >= bound - 1e-8,
            });
        }
        crate::config::ModelChoice::JcmRwa => {
            // closed-form propagator against diagonalization with the free
            // part stripped; compared on the initial branches with their
            // oscillator support cut 5 levels below the truncation boundary,
            // where the closed form stops being unitary
            let t1 = grid.t1();
            let g = params.jcm_coupling();
            let h = models::build_hamiltonian(&params, config.model_kind(), cutoff)?;
            let h0 = models::free_hamiltonian(&params, cutoff)?;
            let u_num = propagation::eigen_propagator(&h, t1)?;
            let strip = propagation::eigen_propagator(&h0, -t1)?;
            let u_int = strip.matrix() * u_num.matrix();
            let u_closed = propagation::jcm_closed_form_propagator(g, cutoff, t1)?;
            let interior = cutoff.saturating_sub(5).max(2);
            let mut worst = 0.0_f64;
            for (_, psi) in models::initial_branches(&params, interior)? {
                let mut padded =
                    nalgebra::DVector::<num_complex::Complex64>::zeros(2 * cutoff);
                for s in 0..2 {
                    for k in 0..interior {
                        padded[s * cutoff + k] = psi.vector()[s * interior + k];
                    }
                }
                let a = &u_int * &padded;
                let b = u_closed.matrix() * &padded;
                worst = worst.max((a - b).norm());
            }
            rows.push(OracleRow {
                check: "jcm_closed_form_propagator_dev",
                observed: worst,
                reference: 0.0,
                tolerance: 1e-8,
                pass: worst <= 1e-8,
            });
        }
        crate::config::ModelChoice::XzSom => {}
    }

    if let Some(series) = &scan.fluxes {
        let worst = series
            .samples()
            .iter()
            .map(|s| (s.u_dot - (s.w_dot + s.q_dot)).abs())
            .fold(0.0, f64::max);
        rows.push(OracleRow {
            check: "energy_balance_max_abs",
            observed: worst,
            reference: 0.0,
            tolerance: 1e-9,
            pass: worst <= 1e-9,
        });
    }
    if let Some(q) = quality {
        if let (Some(a), Some(b)) = (q.r, q.r_weighted) {
            let dev = (a - b).abs();
            rows.push(OracleRow {
                check: "r_route_agreement",
                observed: dev,
                reference: 0.0,
                tolerance: 1e-12,
                pass: dev <= 1e-12,
            });
        }
    }
    Ok(rows)
}

/// Execute one scenario into `<out_base>/<name>/`.
pub fn run_scenario(config: &ScenarioConfig, out_base: &Path) -> Result<RunOutcome, RunError> {
    config.validate()?;
    let grid = config.time_grid()?;
    let params = config.system_params();
    let kind = config.model_kind();
    let threshold = config.occupation_threshold();
    let outputs = config.output_set();

    let cutoff = match config.cutoff {
        CutoffConfig::Fixed(n) => {
            // fail early if the coherent tail does not fit
            models::initial_branches(&params, n)?;
            n
        }
        CutoffConfig::Auto(_) => models::choose_cutoff(&params, kind, grid.t1(), threshold)?,
    };

    let need_flux = outputs.contains(&OutputKind::Fluxes)
        || outputs.contains(&OutputKind::Quality)
        || outputs.contains(&OutputKind::SignedWq);
    let need_rwa =
        outputs.contains(&OutputKind::RwaDeviation) || outputs.contains(&OutputKind::Quality);

    let scan = main_scan(config, &grid, cutoff, need_flux)?;

    let rwa = if need_rwa {
        if config.model == crate::config::ModelChoice::JcmRwa {
            None // the run itself is the rotating-wave dynamics
        } else {
            Some(rwa_trajectory(config, &grid, cutoff)?)
        }
    } else {
        None
    };
    let rwa_purity: Option<&[f64]> = if need_rwa {
        Some(rwa.as_ref().map(|t| t.purity_osc()).unwrap_or(&scan.purity_osc))
    } else {
        None
    };

    let bound = measures::min_purity_bound(params.xi());
    let quality = if outputs.contains(&OutputKind::Quality) {
        let series = scan.fluxes.as_ref().expect("flux series computed for quality");
        let report = measures::integral_quality(series, grid.t0(), grid.t1())
            .map_err(RunError::from)?;
        let times = grid.times();
        let t_star =
            rwa_purity.and_then(|p| measures::breakdown_time(&times, p, bound));
        Some(report.with_t_star(t_star))
    } else {
        None
    };
    let t_star_exact = outputs
        .contains(&OutputKind::Quality)
        .then(|| measures::breakdown_time(&grid.times(), &scan.purity_osc, bound))
        .flatten();

    let oracle = if outputs.contains(&OutputKind::OracleChecks) {
        Some(oracle_rows(config, &grid, cutoff, &scan, quality.as_ref())?)
    } else {
        None
    };

    // emit files
    let dir = out_base.join(&config.name);
    std::fs::create_dir_all(&dir)?;
    let mut files = Vec::new();
    let mut legends = Vec::new();

    for output in &outputs {
        let path = dir.join(output.file_name());
        match output {
            OutputKind::Purity => {
                let rows: Vec<Vec<Cell>> = grid
                    .times()
                    .iter()
                    .enumerate()
                    .map(|(k, t)| {
                        vec![
                            Cell::Float(*t),
                            Cell::Float(scan.purity_spin[k]),
                            Cell::Float(scan.purity_osc[k]),
                        ]
                    })
                    .collect();
                emit_csv(&path, &["t", "purity_spin", "purity_osc"], &rows)?;
                legends.push(ColumnLegend {
                    file: output.file_name().into(),
                    columns: "t: sample time; purity_spin/purity_osc: tr(rho^2) of the reduced spin/oscillator state".into(),
                });
            }
            OutputKind::Fluxes => {
                let series = scan.fluxes.as_ref().expect("flux series computed");
                let rows: Vec<Vec<Cell>> = series
                    .samples()
                    .iter()
                    .map(|s| {
                        vec![
                            Cell::Float(s.t),
                            Cell::Float(s.w_dot),
                            Cell::Float(s.q_dot),
                            Cell::Float(s.u_dot),
                            Cell::OptFloat(measures::instantaneous_ratio(s.w_dot, s.q_dot)),
                        ]
                    })
                    .collect();
                emit_csv(&path, &["t", "w_dot", "q_dot", "u_dot", "r"], &rows)?;
                legends.push(ColumnLegend {
                    file: output.file_name().into(),
                    columns: "t; w_dot/q_dot: work and heat flux into the spin; u_dot: d/dt tr(H1' rho1); r: |w_dot|/(|w_dot|+|q_dot|), empty where both vanish".into(),
                });
            }
            OutputKind::Quality => {
                let q = quality.as_ref().expect("quality report computed");
                let row = vec![
                    Cell::Float(q.t0),
                    Cell::Float(q.t1),
                    Cell::Float(q.w_abs),
                    Cell::Float(q.q_abs),
                    Cell::OptFloat(q.r),
                    Cell::Float(*q.w_signed.last().unwrap_or(&0.0)),
                    Cell::Float(*q.q_signed.last().unwrap_or(&0.0)),
                    Cell::OptFloat(q.t_star),
                ];
                emit_csv(
                    &path,
                    &["t0", "t1", "w_abs", "q_abs", "r", "w_signed_final", "q_signed_final", "t_star"],
                    &[row],
                )?;
                legends.push(ColumnLegend {
                    file: output.file_name().into(),
                    columns: "single row: window, integrated |W|/|Q|, R = w_abs/(w_abs+q_abs), final signed integrals, rwa breakdown time".into(),
                });
            }
            OutputKind::SignedWq => {
                let series = scan.fluxes.as_ref().expect("flux series computed");
                let (w_signed, q_signed) =
                    measures::signed_integrals(series, grid.t0(), grid.t1())?;
                let rows: Vec<Vec<Cell>> = grid
                    .times()
                    .iter()
                    .enumerate()
                    .map(|(k, t)| {
                        vec![
                            Cell::Float(*t),
                            Cell::Float(w_signed[k]),
                            Cell::Float(q_signed[k]),
                        ]
                    })
                    .collect();
                emit_csv(&path, &["t", "w_signed", "q_signed"], &rows)?;
                legends.push(ColumnLegend {
                    file: output.file_name().into(),
                    columns: "t; w_signed/q_signed: cumulative signed work/heat integrals from t0".into(),
                });
            }
            OutputKind::RwaDeviation => {
                let rwa_p = rwa_purity.expect("rwa series computed");
                let rows: Vec<Vec<Cell>> = grid
                    .times()
                    .iter()
                    .enumerate()
                    .map(|(k, t)| {
                        vec![
                            Cell::Float(*t),
                            Cell::Float(scan.purity_osc[k]),
                            Cell::Float(rwa_p[k]),
                            Cell::Float((scan.purity_osc[k] - rwa_p[k]).abs()),
                        ]
                    })
                    .collect();
                emit_csv(&path, &["t", "purity_exact", "purity_rwa", "abs_deviation"], &rows)?;
                legends.push(ColumnLegend {
                    file: output.file_name().into(),
                    columns: "t; oscillator purity of the exact and rotating-wave dynamics and their absolute deviation (take log10 when plotting)".into(),
                });
            }
            OutputKind::OracleChecks => {
                let rows: Vec<Vec<Cell>> = oracle
                    .as_ref()
                    .expect("oracle rows computed")
                    .iter()
                    .map(|r| {
                        vec![
                            Cell::Text(r.check.into()),
                            Cell::Float(r.observed),
                            Cell::Float(r.reference),
                            Cell::Float(r.tolerance),
                            Cell::Bool(r.pass),
                        ]
                    })
                    .collect();
                emit_csv(&path, &["check", "observed", "reference", "tolerance", "pass"], &rows)?;
                legends.push(ColumnLegend {
                    file: output.file_name().into(),
                    columns: "closed-form crosschecks; pass means observed within tolerance of reference (one-sided for *_not_below_* rows)".into(),
                });
            }
        }
        files.push(output.file_name().to_string());
    }

    let derived = params.derived();
    let manifest = RunManifest {
        tool: "spinosc".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        name: config.name.clone(),
        notes: config.notes.clone(),
        resolved: ResolvedSection {
            cutoff,
            grid_samples: grid.n_samples(),
            occupation_threshold: threshold,
            g: derived.g,
            xi: derived.xi,
            gamma: derived.gamma,
            min_purity_bound: bound,
        },
        taint: TaintSection { tainted: false, max_top_two_population: scan.max_top_two },
        quality: quality.as_ref().map(|q| QualitySection {
            t0: q.t0,
            t1: q.t1,
            w_abs: q.w_abs,
            q_abs: q.q_abs,
            r: q.r,
            r_trapezoid: q.crosscheck.r_trapezoid,
            quadrature_rel_gap: q.crosscheck.rel_gap,
            t_star: q.t_star,
            t_star_exact,
        }),
        columns: legends,
        config: config.clone(),
    };

    let manifest_text =
        toml::to_string(&manifest).map_err(|e| RunError::Validation(format!("manifest: {e}")))?;
    write_atomic(&dir.join("manifest.toml"), manifest_text.as_bytes())?;
    files.push("manifest.toml".to_string());

    Ok(RunOutcome { dir, files, manifest })
}

/// Load a manifest back (comparison and tests).
pub fn read_manifest(dir: &Path) -> Result<RunManifest, RunError> {
    let text = std::fs::read_to_string(dir.join("manifest.toml"))?;
    toml::from_str(&text).map_err(|e| RunError::Validation(format!("manifest: {e}")))
}
