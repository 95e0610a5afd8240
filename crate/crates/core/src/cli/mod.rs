//! Batch front end: configuration, task dispatch and output files.

mod config;
mod output;

pub use config::{
    parse_config, DdeSettings, OutputSettings, RunConfig, TableFormat, Task, DEFAULT_OMEGA_21,
    DEFAULT_OMEGA_31,
};
pub use output::{
    json, resolve_out_dir, spectrum_csv, trajectory_csv, trajectory_header, write_atomic,
    OUT_DIR_ENV, SPECTRUM_HEADER,
};

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::analysis::{self, AnalysisError, DetuningGrid, Regime, WindowReport};
use crate::dde::{self, DdeError};
use crate::model::{
    self, AtomSpec, CouplingA, CouplingB, DriveSpec, ModelError, ProbeSpec, SystemParams,
};
use crate::oracle::{self, OracleError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CliError {
    #[error("parse error at line {line}, column {col}: {message}")]
    Parse { line: usize, col: usize, message: String },
    #[error("invalid configuration: {0}")]
    Validation(String),
    #[error("numerical degeneracy: {0}")]
    Degenerate(String),
    #[error("not converged: {0}")]
    NotConverged(String),
    #[error("i/o: {0}")]
    Io(String),
    #[error("{0}")]
    Failed(String),
}

impl CliError {
    /// 2 configuration, 3 numerical degeneracy, 4 non-convergence, 1 other.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Parse { .. } | CliError::Validation(_) => 2,
            CliError::Degenerate(_) => 3,
            CliError::NotConverged(_) => 4,
            CliError::Io(_) | CliError::Failed(_) => 1,
        }
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::DegenerateDenominator { .. } => CliError::Degenerate(e.to_string()),
            ModelError::Invalid(msg) => CliError::Validation(msg),
        }
    }
}

impl From<AnalysisError> for CliError {
    fn from(e: AnalysisError) -> Self {
        match &e {
            AnalysisError::Model { source, .. } => match source {
                ModelError::DegenerateDenominator { .. } => CliError::Degenerate(e.to_string()),
                ModelError::Invalid(_) => CliError::Validation(e.to_string()),
            },
            AnalysisError::InvalidGrid(_) => CliError::Validation(e.to_string()),
            AnalysisError::NoWindowFound(_) => CliError::Failed(e.to_string()),
        }
    }
}

impl From<OracleError> for CliError {
    fn from(e: OracleError) -> Self {
        CliError::Degenerate(e.to_string())
    }
}

impl From<DdeError> for CliError {
    fn from(e: DdeError) -> Self {
        match e {
            DdeError::NotConverged { .. } => CliError::NotConverged(e.to_string()),
            DdeError::NonFiniteState { .. } => CliError::Degenerate(e.to_string()),
            DdeError::StepSizeTooLarge { .. } | DdeError::InvalidConfig(_) => {
                CliError::Validation(e.to_string())
            }
            DdeError::MissingHistory { .. } => CliError::Failed(e.to_string()),
        }
    }
}

/// A task with its command-line options.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Request {
    Spectrum,
    Resonances { scan_points: usize },
    DfPoints,
    Window { threshold: f64 },
    Eliminate,
    Dde,
    OracleCheck { seed: u64, draws: usize },
    Fig3,
}

impl Request {
    /// The request for a task named in a configuration file, with default options.
    pub fn from_task(task: Task) -> Self {
        match task {
            Task::Spectrum => Request::Spectrum,
            Task::Resonances => Request::Resonances { scan_points: analysis::DEFAULT_SCAN_POINTS },
            Task::DfPoints => Request::DfPoints,
            Task::Window => Request::Window { threshold: analysis::ATS_THRESHOLD },
            Task::Eliminate => Request::Eliminate,
            Task::Dde => Request::Dde,
            Task::OracleCheck => Request::OracleCheck { seed: 42, draws: 200 },
            Task::Fig3 => Request::Fig3,
        }
    }
}

/// Runs one task and returns the files written.
pub fn run(request: Request, config: &RunConfig, out_dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let stem = &config.output.stem;
    let path = |suffix: &str| out_dir.join(format!("{stem}_{suffix}"));
    match request {
        Request::Spectrum => {
            let spectrum = analysis::sweep_spectrum(&config.params, &config.grid)?;
            let (file, text) = match config.output.format {
                TableFormat::Csv => (path("spectrum.csv"), spectrum_csv(&spectrum)),
                TableFormat::Json => (path("spectrum.json"), json(&spectrum)),
            };
            write_atomic(&file, &text)?;
            Ok(vec![file])
        }
        Request::Resonances { scan_points } => {
            let report = resonance_report(config, scan_points);
            let file = path("resonances.json");
            write_atomic(&file, &json(&report))?;
            Ok(vec![file])
        }
        Request::DfPoints => {
            let report = df_report(config)?;
            let file = path("df_points.json");
            write_atomic(&file, &json(&report))?;
            Ok(vec![file])
        }
        Request::Window { threshold } => {
            let spectrum = analysis::sweep_spectrum(&config.params, &config.grid)?;
            let window = analysis::transparency_window(&spectrum)?;
            let report = WindowFile {
                window,
                regime: analysis::regime_label(&config.params, threshold),
                ats_threshold: threshold,
            };
            let file = path("window.json");
            write_atomic(&file, &json(&report))?;
            Ok(vec![file])
        }
        Request::Eliminate => {
            let b = &config.params.coupling_b;
            let (lo, hi) = config.tau_tilde_range;
            let report = EliminationFile {
                m_points: b.m_points,
                omega_beta: b.omega_beta,
                tau_tilde_min: lo,
                tau_tilde_max: hi,
                tau_tilde: analysis::elimination_scan(b, lo, hi),
            };
            let file = path("eliminate.json");
            write_atomic(&file, &json(&report))?;
            Ok(vec![file])
        }
        Request::Dde => {
            let (report, trajectory) = dde_report(config)?;
            let traj_file = path("trajectory.csv");
            write_atomic(&traj_file, &trajectory_csv(&trajectory))?;
            let file = path("dde.json");
            write_atomic(&file, &json(&report))?;
            Ok(vec![traj_file, file])
        }
        Request::OracleCheck { seed, draws } => {
            let report = oracle_check(seed, draws);
            let file = path("oracle_check.json");
            write_atomic(&file, &json(&report))?;
            Ok(vec![file])
        }
        Request::Fig3 => fig3(out_dir, stem),
    }
}

#[derive(Debug, Clone, Serialize)]
struct WindowFile {
    window: WindowReport,
    regime: Regime,
    ats_threshold: f64,
}

#[derive(Debug, Clone, Serialize)]
struct EliminationFile {
    m_points: usize,
    omega_beta: f64,
    tau_tilde_min: f64,
    tau_tilde_max: f64,
    tau_tilde: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
struct Resonance {
    delta_31: f64,
    lamb_shift: f64,
    decay_eff: f64,
}

#[derive(Debug, Clone, Serialize)]
struct ResonanceFile {
    delta_min: f64,
    delta_max: f64,
    scan_points: usize,
    resonances: Vec<Resonance>,
}

fn resonance_report(config: &RunConfig, scan_points: usize) -> ResonanceFile {
    let a = &config.params.coupling_a;
    let (lo, hi) = (config.grid.min, config.grid.max);
    let resonances = analysis::single_photon_resonances(&config.params, lo, hi, scan_points)
        .into_iter()
        .map(|d| Resonance {
            delta_31: d,
            lamb_shift: model::lamb_shift_a(a, d),
            decay_eff: model::decay_a(a, d),
        })
        .collect();
    ResonanceFile { delta_min: lo, delta_max: hi, scan_points, resonances }
}

#[derive(Debug, Clone, Serialize)]
struct DfPoint {
    delta_31: f64,
    lamb_shift: f64,
    decay_eff: f64,
    transmittance: f64,
}

#[derive(Debug, Clone, Serialize)]
struct DfFile {
    delta_min: f64,
    delta_max: f64,
    whole_axis: bool,
    points: Vec<DfPoint>,
}

fn df_report(config: &RunConfig) -> Result<DfFile, CliError> {
    let (lo, hi) = (config.grid.min, config.grid.max);
    let df = analysis::decoherence_free_points(&config.params, lo, hi);
    let points = df
        .points
        .iter()
        .map(|&d| {
            let p = model::spectrum_point(&config.params, d)?;
            Ok(DfPoint {
                delta_31: d,
                lamb_shift: p.lamb_shift,
                decay_eff: p.decay_eff,
                transmittance: p.transmittance,
            })
        })
        .collect::<Result<Vec<_>, ModelError>>()?;
    Ok(DfFile { delta_min: lo, delta_max: hi, whole_axis: df.whole_axis, points })
}

#[derive(Debug, Clone, Serialize)]
struct DdeFile {
    delta_31: f64,
    omega_p: f64,
    dt: f64,
    t_final: f64,
    demod_window: f64,
    rho31: Complex64,
    previous_window: Complex64,
    drift: f64,
    analytic: Option<Complex64>,
    max_trace_error: f64,
    max_hermiticity_error: f64,
    final_populations: [f64; 3],
}

fn dde_report(config: &RunConfig) -> Result<(DdeFile, dde::Trajectory), CliError> {
    let probe = ProbeSpec { delta_31: config.delta_31, omega_p: config.omega_p };
    let dde_config = config.dde.config_for(probe.delta_31);
    let run = dde::run_steady_state(&config.params, &probe, &dde_config)?;
    let fin = run.trajectory.final_state();
    let report = DdeFile {
        delta_31: probe.delta_31,
        omega_p: probe.omega_p,
        dt: dde_config.dt,
        t_final: dde_config.t_final,
        demod_window: run.demodulated.window,
        rho31: run.demodulated.rho31,
        previous_window: run.demodulated.previous,
        drift: run.demodulated.drift,
        analytic: model::steady_rho31_analytic(&config.params, probe.delta_31, probe.omega_p)
            .ok(),
        max_trace_error: run.trajectory.max_trace_error,
        max_hermiticity_error: run.trajectory.max_hermiticity_error,
        final_populations: [fin.population(1), fin.population(2), fin.population(3)],
    };
    Ok((report, run.trajectory))
}

/// One randomised comparison between the closed form and the oracle.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleDraw {
    pub params: SystemParams,
    pub delta_31: f64,
    pub lossless: bool,
    pub dev_t: f64,
    pub dev_e3: f64,
    /// |outgoing flux − 1|, only for lossless draws.
    pub flux_error: Option<f64>,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleReport {
    pub seed: u64,
    pub draws: usize,
    pub lossless_draws: usize,
    pub failures: Vec<String>,
    pub max_dev_t: f64,
    pub max_dev_e3: f64,
    pub max_flux_error: f64,
    pub max_residual: f64,
    pub worst: Option<OracleDraw>,
}

fn relative_dev(a: Complex64, b: Complex64) -> f64 {
    let scale = a.norm().max(b.norm());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).norm() / scale
    }
}

/// Draws a random parameter set: N ∈ 1..=4, M ∈ 0..=3, τ, τ̃ ∈ [0, 10],
/// |Ω_c| ∈ [0, 2], lossy when `lossy` is set.
pub fn random_params<R: Rng>(rng: &mut R, lossy: bool) -> SystemParams {
    let omega_21 = rng.gen_range(1.0..100.0);
    let mut atom = AtomSpec::lossless(omega_21, omega_21 + rng.gen_range(1.0..100.0));
    if lossy {
        atom.gamma_2 = rng.gen_range(0.0..1.0);
        atom.gamma_3 = rng.gen_range(0.0..1.0);
    }
    let n = rng.gen_range(1..=4);
    let m = rng.gen_range(0..=3);
    let coupling_a = CouplingA::new(n, rng.gen_range(0.0..10.0), 1.0, &atom);
    let gamma_21 = if m > 0 { rng.gen_range(0.0..2.0) } else { 0.0 };
    let coupling_b = CouplingB::new(m, rng.gen_range(0.0..10.0), gamma_21, &atom);
    let drive = DriveSpec {
        omega_c: Complex64::from_polar(rng.gen_range(0.0..2.0), rng.gen_range(0.0..2.0 * PI)),
        delta_32: rng.gen_range(-1.0..1.0),
    };
    let mut params =
        SystemParams::new(atom, coupling_a, coupling_b, drive).expect("random draw is valid");
    params.v_g_tilde = rng.gen_range(0.5..2.0);
    params
}

/// Compares closed-form t_N and e₃ against the oracle on `draws` random
/// parameter sets, alternating lossless and lossy atoms. Same seed, same
/// report.
pub fn oracle_check(seed: u64, draws: usize) -> OracleReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = OracleReport {
        seed,
        draws,
        lossless_draws: 0,
        failures: Vec::new(),
        max_dev_t: 0.0,
        max_dev_e3: 0.0,
        max_flux_error: 0.0,
        max_residual: 0.0,
        worst: None,
    };
    let mut worst_dev = -1.0;
    for k in 0..draws {
        let lossless = k % 2 == 0;
        let params = random_params(&mut rng, !lossless);
        let delta_31 = rng.gen_range(-3.0..3.0);
        let closed = model::transmission(&params, delta_31)
            .and_then(|t| Ok((t, model::excitation_e3(&params, delta_31)?)));
        let solved = oracle::solve_amplitudes(&params, delta_31);
        let (t, e3, sol) = match (closed, solved) {
            (Ok((t, e3)), Ok(sol)) => (t, e3, sol),
            (Err(e), _) => {
                report.failures.push(format!("draw {k}: {e}"));
                continue;
            }
            (_, Err(e)) => {
                report.failures.push(format!("draw {k}: {e}"));
                continue;
            }
        };
        let draw = OracleDraw {
            params,
            delta_31,
            lossless,
            dev_t: relative_dev(t, sol.transmission()),
            dev_e3: relative_dev(e3, sol.e3),
            flux_error: lossless.then(|| (sol.outgoing_flux(&params) - 1.0).abs()),
            residual: sol.residual,
        };
        if lossless {
            report.lossless_draws += 1;
        }
        report.max_dev_t = report.max_dev_t.max(draw.dev_t);
        report.max_dev_e3 = report.max_dev_e3.max(draw.dev_e3);
        report.max_flux_error = report.max_flux_error.max(draw.flux_error.unwrap_or(0.0));
        report.max_residual = report.max_residual.max(draw.residual);
        let dev = draw.dev_t.max(draw.dev_e3);
        if dev > worst_dev {
            worst_dev = dev;
            report.worst = Some(draw);
        }
    }
    report
}

/// One curve of the built-in figure presets.
#[derive(Debug, Clone, Serialize)]
pub struct Fig3Curve {
    pub panel: char,
    pub label: String,
    pub params: SystemParams,
    pub grid: DetuningGrid,
}

/// The transmission spectra presets: N = 2, Ω_c = 0.1, lossless,
/// Δ₃₂ = 0; small-atom (N = 1) reference curves in panels b–d.
pub fn fig3_presets() -> Vec<Fig3Curve> {
    let wide = DetuningGrid { min: -2.0, max: 2.0, count: 8001 };
    let narrow = DetuningGrid { min: -0.05, max: 0.05, count: 2001 };
    let giant = |tau: f64, phi: f64| SystemParams::lossless_probe(2, tau, phi, 0.1);
    let small = SystemParams::lossless_probe(1, 0.0, 0.0, 0.1);
    let curve = |panel, label: &str, params, grid| Fig3Curve {
        panel,
        label: label.to_string(),
        params,
        grid,
    };
    vec![
        curve('a', "phi_200pi", giant(0.05, 200.0 * PI), wide),
        curve('a', "phi_200.5pi", giant(0.05, 200.5 * PI), wide),
        curve('a', "phi_201pi", giant(0.05, 201.0 * PI), wide),
        curve('b', "giant", giant(0.05, 200.0 * PI), narrow),
        curve('b', "small", small, narrow),
        curve('c', "giant", giant(3.0, 200.0 * PI), wide),
        curve('c', "small", small, wide),
        curve('d', "giant", giant(10.0, 200.0 * PI), wide),
        curve('d', "small", small, wide),
    ]
}

#[derive(Debug, Clone, Serialize)]
struct Fig3Entry {
    file: String,
    #[serde(flatten)]
    curve: Fig3Curve,
}

fn fig3(out_dir: &Path, stem: &str) -> Result<Vec<PathBuf>, CliError> {
    let mut files = Vec::new();
    let mut manifest = Vec::new();
    for curve in fig3_presets() {
        let spectrum = analysis::sweep_spectrum(&curve.params, &curve.grid)?;
        let name = format!("{stem}_fig3{}_{}.csv", curve.panel, curve.label);
        let file = out_dir.join(&name);
        write_atomic(&file, &spectrum_csv(&spectrum))?;
        files.push(file);
        manifest.push(Fig3Entry { file: name, curve });
    }
    let file = out_dir.join(format!("{stem}_fig3.json"));
    write_atomic(&file, &json(&manifest))?;
    files.push(file);
    Ok(files)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_by_category() {
        assert_eq!(CliError::Parse { line: 1, col: 1, message: String::new() }.exit_code(), 2);
        assert_eq!(CliError::Validation(String::new()).exit_code(), 2);
        let degenerate = ModelError::DegenerateDenominator { delta_31: 0.0, magnitude: 0.0 };
        assert_eq!(CliError::from(degenerate).exit_code(), 3);
        assert_eq!(CliError::from(DdeError::NotConverged { drift: 1.0, tol: 0.1 }).exit_code(), 4);
        assert_eq!(CliError::from(DdeError::StepSizeTooLarge { dt: 1.0, bound: 0.1 }).exit_code(), 2);
    }

    #[test]
    fn oracle_check_is_reproducible() {
        let a = oracle_check(7, 20);
        let b = oracle_check(7, 20);
        assert_eq!(json(&a), json(&b));
        assert_ne!(json(&a), json(&oracle_check(8, 20)));
        assert_eq!(a.lossless_draws, 10);
        assert!(a.failures.is_empty());
        assert!(a.max_dev_t < 1e-9 && a.max_dev_e3 < 1e-9);
    }

    #[test]
    fn presets_cover_four_panels() {
        let presets = fig3_presets();
        let panels: Vec<char> = presets.iter().map(|c| c.panel).collect();
        for p in ['a', 'b', 'c', 'd'] {
            assert!(panels.contains(&p));
        }
        for c in presets.iter().filter(|c| c.params.coupling_a.n_points == 2) {
            assert_eq!(c.params.drive.omega_c, Complex64::new(0.1, 0.0));
            assert_eq!(c.params.drive.delta_32, 0.0);
            assert_eq!((c.params.atom.gamma_2, c.params.atom.gamma_3), (0.0, 0.0));
        }
        let taus: Vec<f64> = presets.iter().map(|c| c.params.coupling_a.tau).collect();
        for t in [0.05, 3.0, 10.0] {
            assert!(taus.contains(&t));
        }
    }
}
