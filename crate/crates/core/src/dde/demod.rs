use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::integrate::Trajectory;
use super::DdeError;

/// Samples per window never drop below this.
const MIN_SAMPLES: usize = 512;
/// Samples per probe period.
const SAMPLES_PER_PERIOD: usize = 64;
/// Shortest window, in probe periods.
pub const MIN_PERIODS: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Demodulated {
    /// Amplitude of the e^{−iΔ₃₁t} component of ρ₃₁ over the last window.
    pub rho31: Complex64,
    /// Same over the window before it.
    pub previous: Complex64,
    /// |rho31 − previous| / max(|rho31|, |previous|, floor).
    pub drift: f64,
    /// Window actually used (whole number of probe periods).
    pub window: f64,
}

/// Rounds `min_window` up to a whole number of probe periods, and to at
/// least [`MIN_PERIODS`] of them.
pub fn window_length(delta_31: f64, min_window: f64) -> f64 {
    if delta_31 == 0.0 {
        return min_window;
    }
    let period = 2.0 * PI / delta_31.abs();
    (min_window / period).ceil().max(MIN_PERIODS) * period
}

/// Mean of `signal(t)·e^{iΔt}` over `[start, start + window)` using uniform
/// samples. For a window of whole periods this is the periodic trapezoid
/// rule, which is exact for the pure tone and rejects every other harmonic
/// of the window.
pub fn tone_amplitude<F>(signal: F, delta_31: f64, start: f64, window: f64) -> Option<Complex64>
where
    F: Fn(f64) -> Option<Complex64>,
{
    let periods = if delta_31 == 0.0 { 1.0 } else { window * delta_31.abs() / (2.0 * PI) };
    let samples = MIN_SAMPLES.max((periods.ceil() as usize) * SAMPLES_PER_PERIOD);
    let h = window / samples as f64;
    let mut acc = Complex64::new(0.0, 0.0);
    for k in 0..samples {
        let t = start + k as f64 * h;
        acc += signal(t)? * Complex64::from_polar(1.0, delta_31 * t);
    }
    Some(acc / samples as f64)
}

/// Extracts the steady-state ρ̃₃₁ from the end of a trajectory and checks
/// that the two most recent windows agree to `tol`.
pub fn demodulate(
    trajectory: &Trajectory,
    delta_31: f64,
    min_window: f64,
    tol: f64,
    floor: f64,
) -> Result<Demodulated, DdeError> {
    let window = window_length(delta_31, min_window);
    let end = *trajectory.times.last().ok_or_else(|| {
        DdeError::InvalidConfig("empty trajectory".into())
    })?;
    let start = trajectory.times[0];
    if end - 2.0 * window < start - 1e-9 * window {
        return Err(DdeError::InvalidConfig(format!(
            "trajectory span {} is shorter than two demodulation windows of {window}",
            end - start
        )));
    }
    let signal = |t: f64| trajectory.interpolate(t.min(end)).map(|s| s.element(3, 1));
    let last = tone_amplitude(signal, delta_31, end - window, window)
        .ok_or_else(|| DdeError::InvalidConfig("window outside trajectory".into()))?;
    let previous = tone_amplitude(signal, delta_31, (end - 2.0 * window).max(start), window)
        .ok_or_else(|| DdeError::InvalidConfig("window outside trajectory".into()))?;
    let scale = last.norm().max(previous.norm()).max(floor);
    let drift = if scale == 0.0 { 0.0 } else { (last - previous).norm() / scale };
    if drift > tol {
        return Err(DdeError::NotConverged { drift, tol });
    }
    Ok(Demodulated { rho31: last, previous, drift, window })
}
