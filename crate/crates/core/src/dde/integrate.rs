use std::collections::VecDeque;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::density::{hermiticity_error, DensityMatrix3, Mat3};
use super::equation::{History, MasterEquation};
use super::DdeError;
use crate::model::{ProbeSpec, SystemParams};

/// Smallest allowed ratio between a nonzero delay and the step size.
pub const STEPS_PER_DELAY: f64 = 20.0;

/// Integrator settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DdeConfig {
    pub dt: f64,
    pub t_final: f64,
    /// State at t = 0.
    pub initial: DensityMatrix3,
    /// State assumed for every t < 0.
    pub history: DensityMatrix3,
    /// Minimum duration of the demodulation window; rounded up to whole
    /// probe periods.
    pub demod_window: f64,
    /// Allowed relative drift between the last two windows.
    pub demod_tol: f64,
    /// Coherence magnitude below which drift is measured absolutely.
    pub demod_floor: f64,
    /// Store every `record_stride`-th step in the trajectory.
    pub record_stride: usize,
}

impl Default for DdeConfig {
    fn default() -> Self {
        DdeConfig {
            dt: 0.01,
            t_final: 100.0,
            initial: DensityMatrix3::ground(),
            history: DensityMatrix3::ground(),
            demod_window: 100.0,
            demod_tol: 1e-3,
            demod_floor: 1e-9,
            record_stride: 1,
        }
    }
}

impl DdeConfig {
    fn validate(&self, eq: &MasterEquation) -> Result<(), DdeError> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(DdeError::InvalidConfig("dt must be finite and > 0".into()));
        }
        if !(self.t_final >= 0.0 && self.t_final.is_finite()) {
            return Err(DdeError::InvalidConfig("t_final must be finite and >= 0".into()));
        }
        if self.record_stride == 0 {
            return Err(DdeError::InvalidConfig("record_stride must be >= 1".into()));
        }
        if !(self.demod_window > 0.0 && self.demod_tol > 0.0 && self.demod_floor >= 0.0) {
            return Err(DdeError::InvalidConfig(
                "demodulation window and tolerance must be > 0".into(),
            ));
        }
        if let Some(lag) = eq.min_positive_lag() {
            let bound = lag / STEPS_PER_DELAY;
            if self.dt > bound * (1.0 + 1e-12) {
                return Err(DdeError::StepSizeTooLarge { dt: self.dt, bound });
            }
        }
        Ok(())
    }
}

/// Stored solution: states and their derivatives at the recorded times,
/// so the trajectory can be evaluated anywhere by cubic Hermite
/// interpolation.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<DensityMatrix3>,
    pub derivatives: Vec<Mat3>,
    /// Largest |tr ρ − 1| over every integration step.
    pub max_trace_error: f64,
    /// Largest entrywise |ρ − ρ†| over every integration step.
    pub max_hermiticity_error: f64,
}

impl Trajectory {
    pub fn final_state(&self) -> &DensityMatrix3 {
        self.states.last().expect("trajectory holds at least the initial state")
    }

    /// ρ(t) for t within the recorded span.
    pub fn interpolate(&self, t: f64) -> Option<DensityMatrix3> {
        let (first, last) = (*self.times.first()?, *self.times.last()?);
        if t < first || t > last {
            return None;
        }
        let k = self.times.partition_point(|&s| s <= t);
        if k == self.times.len() {
            return Some(self.states[k - 1]);
        }
        let (t0, t1) = (self.times[k - 1], self.times[k]);
        Some(DensityMatrix3(hermite(
            &self.states[k - 1].0,
            &self.derivatives[k - 1],
            &self.states[k].0,
            &self.derivatives[k],
            t1 - t0,
            (t - t0) / (t1 - t0),
        )))
    }

    /// ⟨3|ρ(t)|1⟩ at every recorded time.
    pub fn rho31(&self) -> Vec<Complex64> {
        self.states.iter().map(|s| s.element(3, 1)).collect()
    }
}

/// Cubic Hermite interpolation on one interval of width `h` at fraction `s`.
fn hermite(y0: &Mat3, d0: &Mat3, y1: &Mat3, d1: &Mat3, h: f64, s: f64) -> Mat3 {
    let s2 = s * s;
    let s3 = s2 * s;
    let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
    let h10 = s3 - 2.0 * s2 + s;
    let h01 = -2.0 * s3 + 3.0 * s2;
    let h11 = s3 - s2;
    y0 * Complex64::new(h00, 0.0)
        + d0 * Complex64::new(h10 * h, 0.0)
        + y1 * Complex64::new(h01, 0.0)
        + d1 * Complex64::new(h11 * h, 0.0)
}

/// Ring buffer of the most recent uniformly spaced nodes (state and
/// derivative), long enough to serve the longest lag.
struct HistoryBuffer {
    dt: f64,
    before_start: Mat3,
    nodes: VecDeque<(Mat3, Mat3)>,
    /// Step index of `nodes[0]`.
    first: usize,
}

impl HistoryBuffer {
    fn push(&mut self, state: Mat3, derivative: Mat3, keep: usize) {
        self.nodes.push_back((state, derivative));
        while self.nodes.len() > keep {
            self.nodes.pop_front();
            self.first += 1;
        }
    }
}

impl History for HistoryBuffer {
    fn state_at(&self, t: f64) -> Option<Mat3> {
        let mut s = t / self.dt;
        let nearest = s.round();
        if (s - nearest).abs() < 1e-9 {
            s = nearest;
        }
        if s < 0.0 {
            return Some(self.before_start);
        }
        let j = s.floor() as usize;
        let last = self.first + self.nodes.len().checked_sub(1)?;
        if j < self.first || j > last {
            return None;
        }
        let (y0, d0) = &self.nodes[j - self.first];
        let frac = s - j as f64;
        if frac == 0.0 {
            return Some(*y0);
        }
        if j == last {
            return None;
        }
        let (y1, d1) = &self.nodes[j + 1 - self.first];
        Some(hermite(y0, d0, y1, d1, self.dt, frac))
    }
}

/// Integrates the delayed master equation from t = 0 to `config.t_final`
/// with classical RK4 at fixed step; delayed states come from the cubic
/// Hermite interpolant of the stored steps.
pub fn integrate(
    params: &SystemParams,
    probe: &ProbeSpec,
    config: &DdeConfig,
) -> Result<Trajectory, DdeError> {
    let eq = MasterEquation::new(params, probe);
    integrate_equation(&eq, config)
}

pub fn integrate_equation(eq: &MasterEquation, config: &DdeConfig) -> Result<Trajectory, DdeError> {
    config.validate(eq)?;
    let dt = config.dt;
    let steps = (config.t_final / dt).round() as usize;
    let keep = (eq.max_lag() / dt).ceil() as usize + 3;
    let stride = config.record_stride;

    let mut buffer = HistoryBuffer {
        dt,
        before_start: config.history.0,
        nodes: VecDeque::with_capacity(keep + 1),
        first: 0,
    };
    let capacity = steps / stride + 2;
    let mut traj = Trajectory {
        times: Vec::with_capacity(capacity),
        states: Vec::with_capacity(capacity),
        derivatives: Vec::with_capacity(capacity),
        max_trace_error: 0.0,
        max_hermiticity_error: 0.0,
    };

    let n_terms = eq.delayed.len();
    let mut lag_start = vec![Mat3::zeros(); n_terms];
    let mut lag_mid = vec![Mat3::zeros(); n_terms];
    let mut lag_end = vec![Mat3::zeros(); n_terms];
    let mut lag_stage = vec![Mat3::zeros(); n_terms];

    let lookup = |buffer: &HistoryBuffer, out: &mut [Mat3], t: f64, current: &Mat3| {
        for (slot, term) in out.iter_mut().zip(&eq.delayed) {
            *slot = if term.lag == 0.0 {
                *current
            } else {
                buffer
                    .state_at(t - term.lag)
                    .ok_or(DdeError::MissingHistory { t, lag: term.lag })?
            };
        }
        Ok::<(), DdeError>(())
    };
    // Zero-lag terms must see the stage state rather than the step start.
    let refresh_zero_lags = |out: &mut [Mat3], stage: &Mat3| {
        for (slot, term) in out.iter_mut().zip(&eq.delayed) {
            if term.lag == 0.0 {
                *slot = *stage;
            }
        }
    };

    let half = Complex64::new(0.5 * dt, 0.0);
    let full = Complex64::new(dt, 0.0);
    let sixth = Complex64::new(dt / 6.0, 0.0);
    let two = Complex64::new(2.0, 0.0);

    let mut y = config.initial.0;
    for k in 0..=steps {
        let t = k as f64 * dt;
        if !y.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
            return Err(DdeError::NonFiniteState { t });
        }
        traj.max_trace_error = traj.max_trace_error.max((y.trace() - 1.0).norm());
        traj.max_hermiticity_error = traj.max_hermiticity_error.max(hermiticity_error(&y));

        lookup(&buffer, &mut lag_start, t, &y)?;
        let k1 = eq.derivative(t, &y, &lag_start);
        buffer.push(y, k1, keep);
        if k % stride == 0 || k == steps {
            traj.times.push(t);
            traj.states.push(DensityMatrix3(y));
            traj.derivatives.push(k1);
        }
        if k == steps {
            break;
        }

        lookup(&buffer, &mut lag_mid, t + 0.5 * dt, &y)?;
        let y2 = y + k1 * half;
        lag_stage.copy_from_slice(&lag_mid);
        refresh_zero_lags(&mut lag_stage, &y2);
        let k2 = eq.derivative(t + 0.5 * dt, &y2, &lag_stage);

        let y3 = y + k2 * half;
        refresh_zero_lags(&mut lag_stage, &y3);
        let k3 = eq.derivative(t + 0.5 * dt, &y3, &lag_stage);

        let y4 = y + k3 * full;
        lookup(&buffer, &mut lag_end, t + dt, &y4)?;
        let k4 = eq.derivative(t + dt, &y4, &lag_end);

        y += (k1 + k2 * two + k3 * two + k4) * sixth;
    }
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{AtomSpec, CouplingA, CouplingB, DriveSpec};

    fn undriven(n: usize, tau: f64) -> SystemParams {
        let atom = AtomSpec::lossless(1.0, 2.0);
        let a = CouplingA::new(n, tau, 1.0, &atom);
        SystemParams::new(atom, a, CouplingB::absent(&atom), DriveSpec::resonant(0.0)).unwrap()
    }

    #[test]
    fn excited_state_decays_exponentially() {
        // Delayed terms act on ρ(t − τ); with τ = 2 they are idle before t = 2.
        for &(n, tau) in &[(1usize, 0.5), (2, 2.0)] {
            let p = undriven(n, tau);
            let cfg = DdeConfig {
                dt: 0.005,
                t_final: 1.0,
                initial: DensityMatrix3::pure(3),
                ..Default::default()
            };
            let probe = ProbeSpec { delta_31: 0.0, omega_p: 0.0 };
            let traj = integrate(&p, &probe, &cfg).unwrap();
            let expected = (-(n as f64)).exp();
            assert!((traj.final_state().population(3) - expected).abs() < 1e-6);
        }
    }

    #[test]
    fn rabi_oscillation_on_control_transition() {
        let atom = AtomSpec::lossless(1.0, 2.0);
        let mut a = CouplingA::new(1, 0.0, 1.0, &atom);
        a.gamma_31_rate = 0.0;
        let omega = 0.7;
        let p = SystemParams::new(atom, a, CouplingB::absent(&atom), DriveSpec::resonant(omega))
            .unwrap();
        let cfg = DdeConfig {
            dt: 0.01,
            t_final: 5.0,
            initial: DensityMatrix3::pure(2),
            ..Default::default()
        };
        let traj = integrate(&p, &ProbeSpec { delta_31: 0.0, omega_p: 0.0 }, &cfg).unwrap();
        for (t, s) in traj.times.iter().zip(&traj.states) {
            assert!((s.population(3) - (omega * t).sin().powi(2)).abs() < 1e-6);
        }
    }

    #[test]
    fn step_bound_is_enforced() {
        let p = undriven(2, 0.1);
        let cfg = DdeConfig { dt: 0.01, ..Default::default() };
        let probe = ProbeSpec { delta_31: 0.0, omega_p: 0.01 };
        assert!(matches!(integrate(&p, &probe, &cfg), Err(DdeError::StepSizeTooLarge { .. })));
        let cfg = DdeConfig { dt: 0.005, t_final: 0.1, ..Default::default() };
        assert!(integrate(&p, &probe, &cfg).is_ok());
    }

    #[test]
    fn non_finite_state_is_reported() {
        let p = undriven(1, 0.0);
        let mut bad = DensityMatrix3::ground();
        bad.0[(0, 0)] = Complex64::new(f64::NAN, 0.0);
        let cfg = DdeConfig { initial: bad, t_final: 0.1, ..Default::default() };
        let probe = ProbeSpec { delta_31: 0.0, omega_p: 0.0 };
        assert!(matches!(integrate(&p, &probe, &cfg), Err(DdeError::NonFiniteState { .. })));
    }

    #[test]
    fn hermite_reproduces_cubics() {
        // y = a + b s + c s² + d s³ on [0, h]
        let h = 0.3;
        let f = |t: f64| 1.0 - 2.0 * t + 0.5 * t * t + 3.0 * t * t * t;
        let df = |t: f64| -2.0 + t + 9.0 * t * t;
        let c = |x: f64| Mat3::from_element(Complex64::new(x, 0.0));
        for &s in &[0.0, 0.25, 0.5, 0.9, 1.0] {
            let got = hermite(&c(f(0.0)), &c(df(0.0)), &c(f(h)), &c(df(h)), h, s);
            assert!((got[(0, 0)].re - f(s * h)).abs() < 1e-14);
        }
    }

    #[test]
    fn trajectory_interpolates_between_records() {
        let p = undriven(1, 0.0);
        let cfg = DdeConfig {
            dt: 0.001,
            t_final: 1.0,
            initial: DensityMatrix3::pure(3),
            record_stride: 10,
            ..Default::default()
        };
        let traj = integrate(&p, &ProbeSpec { delta_31: 0.0, omega_p: 0.0 }, &cfg).unwrap();
        let mid = traj.interpolate(0.555).unwrap();
        assert!((mid.population(3) - (-0.555f64).exp()).abs() < 1e-9);
        assert!(traj.interpolate(1.5).is_none());
    }
}
