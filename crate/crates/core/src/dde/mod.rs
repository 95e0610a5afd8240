//! Time-delayed master equation for the atomic density matrix.
//!
//! The local generator holds the coupling Hamiltonian V(t) and the Markovian
//! dissipators. Each pair of coupling points a distance `n` apart adds a
//! term acting on ρ(t − nτ) (or ρ(t − mτ̃) for the reservoir), with a
//! sinusoidal rate that can be negative. Integration is fixed-step RK4 by
//! the method of steps; the steady-state coherence is then read off by
//! demodulating ρ₃₁(t) at the probe detuning.

mod demod;
mod density;
mod equation;
mod integrate;

pub use demod::{demodulate, tone_amplitude, window_length, Demodulated};
pub use density::{DensityMatrix3, Mat3};
pub use equation::{Channel, ConstantHistory, DelayedTerm, History, MasterEquation, NoHistory};
pub use integrate::{integrate, integrate_equation, DdeConfig, Trajectory, STEPS_PER_DELAY};

use num_complex::Complex64;
use thiserror::Error;

use crate::model::{ProbeSpec, SystemParams};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DdeError {
    #[error("no stored state for t = {t} - lag {lag}")]
    MissingHistory { t: f64, lag: f64 },
    #[error("step {dt} exceeds the bound {bound} (shortest delay / 20)")]
    StepSizeTooLarge { dt: f64, bound: f64 },
    #[error("state became non-finite at t = {t}")]
    NonFiniteState { t: f64 },
    #[error("steady state not reached: window drift {drift:e} > {tol:e}")]
    NotConverged { drift: f64, tol: f64 },
    #[error("invalid integrator configuration: {0}")]
    InvalidConfig(String),
}

/// A finished steady-state run at one probe detuning.
#[derive(Debug, Clone)]
pub struct DdeRun {
    pub config: DdeConfig,
    pub probe: ProbeSpec,
    pub trajectory: Trajectory,
    pub demodulated: Demodulated,
}

impl DdeRun {
    pub fn rho31(&self) -> Complex64 {
        self.demodulated.rho31
    }
}

/// Integrates and demodulates. `config.t_final` must cover two windows
/// after the transient; [`steady_state_horizon`] gives a suitable value.
pub fn run_steady_state(
    params: &SystemParams,
    probe: &ProbeSpec,
    config: &DdeConfig,
) -> Result<DdeRun, DdeError> {
    let trajectory = integrate(params, probe, config)?;
    let demodulated = demodulate(
        &trajectory,
        probe.delta_31,
        config.demod_window,
        config.demod_tol,
        config.demod_floor,
    )?;
    Ok(DdeRun { config: *config, probe: *probe, trajectory, demodulated })
}

/// `settle` plus two demodulation windows, rounded up to a whole step.
pub fn steady_state_horizon(delta_31: f64, settle: f64, min_window: f64, dt: f64) -> f64 {
    let t = settle + 2.0 * window_length(delta_31, min_window);
    (t / dt).ceil() * dt
}
