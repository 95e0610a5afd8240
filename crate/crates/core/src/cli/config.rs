//! Run configuration: a TOML document with sections `atom`, `coupling_a`,
//! `coupling_b`, `drive`, `probe`, `dde`, `output` and an optional `units`.
//!
//! Every section and key is optional. Physical quantities are in units of
//! the single-point rate Γ₃₁ (frequencies) and 1/Γ₃₁ (times); a `[units]
//! scale = s` entry multiplies every frequency by `s` and divides every
//! time by `s` on input. Serialisation always writes internal values with
//! the derived defaults (φ, ω_β) spelled out, so it is a fixed point of
//! parse ∘ serialise.

use std::f64::consts::PI;
use std::path::PathBuf;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::CliError;
use crate::analysis::DetuningGrid;
use crate::dde::{DdeConfig, DensityMatrix3};
use crate::model::{
    AtomSpec, CouplingA, CouplingB, DriveSpec, SystemParams, DEFAULT_DEGENERACY_EPS,
};

pub const DEFAULT_OMEGA_21: f64 = 2000.0 * PI;
pub const DEFAULT_OMEGA_31: f64 = 4000.0 * PI;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    Spectrum,
    Resonances,
    DfPoints,
    Window,
    Eliminate,
    Dde,
    OracleCheck,
    Fig3,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TableFormat {
    Csv,
    Json,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RawConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    task: Option<Task>,
    #[serde(skip_serializing)]
    units: RawUnits,
    atom: RawAtom,
    coupling_a: RawCouplingA,
    coupling_b: RawCouplingB,
    drive: RawDrive,
    probe: RawProbe,
    dde: RawDde,
    output: RawOutput,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RawUnits {
    scale: f64,
}

impl Default for RawUnits {
    fn default() -> Self {
        RawUnits { scale: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RawAtom {
    omega_21: f64,
    omega_31: f64,
    gamma_2: f64,
    gamma_3: f64,
    gamma_2_phi: f64,
    gamma_3_phi: f64,
    gamma_31: f64,
    gamma_32: f64,
}

impl Default for RawAtom {
    fn default() -> Self {
        RawAtom {
            omega_21: DEFAULT_OMEGA_21,
            omega_31: DEFAULT_OMEGA_31,
            gamma_2: 0.0,
            gamma_3: 0.0,
            gamma_2_phi: 0.0,
            gamma_3_phi: 0.0,
            gamma_31: 0.0,
            gamma_32: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RawCouplingA {
    n_points: i64,
    tau: f64,
    gamma_31: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    phi: Option<f64>,
    v_g: f64,
}

impl Default for RawCouplingA {
    fn default() -> Self {
        RawCouplingA { n_points: 1, tau: 0.0, gamma_31: 1.0, phi: None, v_g: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RawCouplingB {
    m_points: i64,
    tau_tilde: f64,
    gamma_21: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    omega_beta: Option<f64>,
    gamma_32: f64,
    v_g: f64,
    tau_tilde_min: f64,
    tau_tilde_max: f64,
}

impl Default for RawCouplingB {
    fn default() -> Self {
        RawCouplingB {
            m_points: 0,
            tau_tilde: 0.0,
            gamma_21: 0.0,
            omega_beta: None,
            gamma_32: 0.0,
            v_g: 1.0,
            tau_tilde_min: 0.0,
            tau_tilde_max: 10.0,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RawDrive {
    omega_c: f64,
    omega_c_im: f64,
    delta_32: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RawProbe {
    omega_p: f64,
    delta_31: f64,
    delta_min: f64,
    delta_max: f64,
    points: i64,
    degeneracy_eps: f64,
}

impl Default for RawProbe {
    fn default() -> Self {
        RawProbe {
            omega_p: 0.01,
            delta_31: 0.1,
            delta_min: -2.0,
            delta_max: 2.0,
            points: 4001,
            degeneracy_eps: DEFAULT_DEGENERACY_EPS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RawDde {
    dt: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    t_final: Option<f64>,
    settle: f64,
    demod_window: f64,
    demod_tol: f64,
    demod_floor: f64,
    record_stride: i64,
    initial_level: i64,
    history_level: i64,
}

impl Default for RawDde {
    fn default() -> Self {
        RawDde {
            dt: 0.0025,
            t_final: None,
            settle: 1500.0,
            demod_window: 400.0,
            demod_tol: 1e-3,
            demod_floor: 1e-9,
            record_stride: 100,
            initial_level: 1,
            history_level: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RawOutput {
    #[serde(skip_serializing_if = "Option::is_none")]
    dir: Option<PathBuf>,
    stem: String,
    format: TableFormat,
}

impl Default for RawOutput {
    fn default() -> Self {
        RawOutput { dir: None, stem: "giant_eit".into(), format: TableFormat::Csv }
    }
}

/// Settings for `dde` runs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DdeSettings {
    pub dt: f64,
    /// Fixed horizon; when absent it is `settle` plus two demodulation windows.
    pub t_final: Option<f64>,
    pub settle: f64,
    pub demod_window: f64,
    pub demod_tol: f64,
    pub demod_floor: f64,
    pub record_stride: usize,
    pub initial_level: usize,
    pub history_level: usize,
}

impl DdeSettings {
    pub fn config_for(&self, delta_31: f64) -> DdeConfig {
        let t_final = self.t_final.unwrap_or_else(|| {
            crate::dde::steady_state_horizon(delta_31, self.settle, self.demod_window, self.dt)
        });
        DdeConfig {
            dt: self.dt,
            t_final,
            initial: DensityMatrix3::pure(self.initial_level),
            history: DensityMatrix3::pure(self.history_level),
            demod_window: self.demod_window,
            demod_tol: self.demod_tol,
            demod_floor: self.demod_floor,
            record_stride: self.record_stride,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputSettings {
    pub dir: Option<PathBuf>,
    pub stem: String,
    pub format: TableFormat,
}

/// Validated run configuration in internal units.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub task: Option<Task>,
    pub params: SystemParams,
    pub omega_p: f64,
    /// Probe detuning for single-point tasks (`dde`).
    pub delta_31: f64,
    pub grid: DetuningGrid,
    /// τ̃ range scanned by `eliminate`.
    pub tau_tilde_range: (f64, f64),
    pub dde: DdeSettings,
    pub output: OutputSettings,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig::from_raw(RawConfig::default()).expect("defaults are valid")
    }
}

fn validation(msg: impl Into<String>) -> CliError {
    CliError::Validation(msg.into())
}

fn positive_count(value: i64, name: &str, min: i64) -> Result<usize, CliError> {
    if value < min {
        return Err(validation(format!("{name} must be >= {min}")));
    }
    Ok(value as usize)
}

fn level(value: i64, name: &str) -> Result<usize, CliError> {
    if !(1..=3).contains(&value) {
        return Err(validation(format!("{name} must be 1, 2 or 3")));
    }
    Ok(value as usize)
}

impl RunConfig {
    fn from_raw(raw: RawConfig) -> Result<Self, CliError> {
        let s = raw.units.scale;
        if !(s > 0.0 && s.is_finite()) {
            return Err(validation("units.scale must be finite and > 0"));
        }
        let f = |x: f64| x * s;
        let t = |x: f64| x / s;

        let a = &raw.atom;
        let atom = AtomSpec {
            omega_21: f(a.omega_21),
            omega_31: f(a.omega_31),
            gamma_2: f(a.gamma_2),
            gamma_3: f(a.gamma_3),
            gamma_2_phi: f(a.gamma_2_phi),
            gamma_3_phi: f(a.gamma_3_phi),
            gamma_31: f(a.gamma_31),
            gamma_32: f(a.gamma_32),
        };

        let ca = &raw.coupling_a;
        let n_points = positive_count(ca.n_points, "n_points", 1)?;
        let mut coupling_a = CouplingA::new(n_points, t(ca.tau), f(ca.gamma_31), &atom);
        if let Some(phi) = ca.phi {
            coupling_a = coupling_a.with_phi(phi);
        }

        let cb = &raw.coupling_b;
        let m_points = positive_count(cb.m_points, "m_points", 0)?;
        let mut coupling_b = CouplingB::new(m_points, t(cb.tau_tilde), f(cb.gamma_21), &atom);
        coupling_b.gamma_32_rate = f(cb.gamma_32);
        if let Some(w) = cb.omega_beta {
            coupling_b.omega_beta = f(w);
        }
        let tau_tilde_range = (t(cb.tau_tilde_min), t(cb.tau_tilde_max));
        if !(tau_tilde_range.0 >= 0.0 && tau_tilde_range.1 > tau_tilde_range.0) {
            return Err(validation("0 <= tau_tilde_min < tau_tilde_max must hold"));
        }

        let drive = DriveSpec {
            omega_c: Complex64::new(f(raw.drive.omega_c), f(raw.drive.omega_c_im)),
            delta_32: f(raw.drive.delta_32),
        };

        let params = SystemParams {
            atom,
            coupling_a,
            coupling_b,
            drive,
            v_g: ca.v_g,
            v_g_tilde: cb.v_g,
            degeneracy_eps: raw.probe.degeneracy_eps,
        };
        params.validate().map_err(|e| match e {
            crate::model::ModelError::Invalid(msg) => validation(msg),
            other => validation(other.to_string()),
        })?;

        let pr = &raw.probe;
        if !(pr.omega_p.is_finite() && pr.delta_31.is_finite()) {
            return Err(validation("omega_p and delta_31 must be finite"));
        }
        let points = positive_count(pr.points, "points", 2)?;
        let grid = DetuningGrid::new(f(pr.delta_min), f(pr.delta_max), points)
            .map_err(|_| validation("delta_min < delta_max must hold"))?;

        let d = &raw.dde;
        if !(d.dt > 0.0 && d.dt.is_finite()) {
            return Err(validation("dt must be finite and > 0"));
        }
        if let Some(tf) = d.t_final {
            if !(tf > 0.0 && tf.is_finite()) {
                return Err(validation("t_final must be finite and > 0"));
            }
        }
        if !(d.settle >= 0.0 && d.demod_window > 0.0) {
            return Err(validation("settle must be >= 0 and demod_window > 0"));
        }
        if !(d.demod_tol > 0.0 && d.demod_floor >= 0.0) {
            return Err(validation("demod_tol must be > 0 and demod_floor >= 0"));
        }
        let dde = DdeSettings {
            dt: t(d.dt),
            t_final: d.t_final.map(t),
            settle: t(d.settle),
            demod_window: t(d.demod_window),
            demod_tol: d.demod_tol,
            demod_floor: d.demod_floor,
            record_stride: positive_count(d.record_stride, "record_stride", 1)?,
            initial_level: level(d.initial_level, "initial_level")?,
            history_level: level(d.history_level, "history_level")?,
        };

        if raw.output.stem.is_empty() || raw.output.stem.contains(['/', '\\']) {
            return Err(validation("output.stem must be a non-empty file name"));
        }

        Ok(RunConfig {
            task: raw.task,
            params,
            omega_p: f(pr.omega_p),
            delta_31: f(pr.delta_31),
            grid,
            tau_tilde_range,
            dde,
            output: OutputSettings {
                dir: raw.output.dir,
                stem: raw.output.stem,
                format: raw.output.format,
            },
        })
    }

    fn to_raw(&self) -> RawConfig {
        let p = &self.params;
        RawConfig {
            task: self.task,
            units: RawUnits::default(),
            atom: RawAtom {
                omega_21: p.atom.omega_21,
                omega_31: p.atom.omega_31,
                gamma_2: p.atom.gamma_2,
                gamma_3: p.atom.gamma_3,
                gamma_2_phi: p.atom.gamma_2_phi,
                gamma_3_phi: p.atom.gamma_3_phi,
                gamma_31: p.atom.gamma_31,
                gamma_32: p.atom.gamma_32,
            },
            coupling_a: RawCouplingA {
                n_points: p.coupling_a.n_points as i64,
                tau: p.coupling_a.tau,
                gamma_31: p.coupling_a.gamma_31_rate,
                phi: Some(p.coupling_a.phi),
                v_g: p.v_g,
            },
            coupling_b: RawCouplingB {
                m_points: p.coupling_b.m_points as i64,
                tau_tilde: p.coupling_b.tau_tilde,
                gamma_21: p.coupling_b.gamma_21_rate,
                omega_beta: Some(p.coupling_b.omega_beta),
                gamma_32: p.coupling_b.gamma_32_rate,
                v_g: p.v_g_tilde,
                tau_tilde_min: self.tau_tilde_range.0,
                tau_tilde_max: self.tau_tilde_range.1,
            },
            drive: RawDrive {
                omega_c: p.drive.omega_c.re,
                omega_c_im: p.drive.omega_c.im,
                delta_32: p.drive.delta_32,
            },
            probe: RawProbe {
                omega_p: self.omega_p,
                delta_31: self.delta_31,
                delta_min: self.grid.min,
                delta_max: self.grid.max,
                points: self.grid.count as i64,
                degeneracy_eps: p.degeneracy_eps,
            },
            dde: RawDde {
                dt: self.dde.dt,
                t_final: self.dde.t_final,
                settle: self.dde.settle,
                demod_window: self.dde.demod_window,
                demod_tol: self.dde.demod_tol,
                demod_floor: self.dde.demod_floor,
                record_stride: self.dde.record_stride as i64,
                initial_level: self.dde.initial_level as i64,
                history_level: self.dde.history_level as i64,
            },
            output: RawOutput {
                dir: self.output.dir.clone(),
                stem: self.output.stem.clone(),
                format: self.output.format,
            },
        }
    }

    /// TOML text with every value spelled out in internal units.
    pub fn to_toml(&self) -> String {
        toml::to_string(&self.to_raw()).expect("configuration is representable as TOML")
    }
}

/// 1-based line and column of a byte offset.
fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let col = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, col)
}

/// Parses and validates a configuration document.
pub fn parse_config(text: &str) -> Result<RunConfig, CliError> {
    if text.trim().is_empty() {
        return Err(CliError::Parse { line: 1, col: 1, message: "empty configuration".into() });
    }
    let raw: RawConfig = toml::from_str(text).map_err(|e| {
        let (line, col) = e.span().map_or((1, 1), |span| line_col(text, span.start));
        CliError::Parse { line, col, message: e.message().to_string() }
    })?;
    RunConfig::from_raw(raw)
}
