//! Spectrum sweeps and the quantities read off them: transparency windows,
//! single-photon resonances, decoherence-free points, reservoir elimination.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{self, CouplingB, ModelError, SpectrumPoint, SystemParams};

/// Default number of pre-scan points for root bracketing.
pub const DEFAULT_SCAN_POINTS: usize = 10_000;
/// Relative zero threshold for the decay rate at decoherence-free points.
pub const DECAY_ZERO_TOL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("grid point {index}: {source}")]
    Model { index: usize, source: ModelError },
    #[error("no transparency window: {0}")]
    NoWindowFound(String),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
}

/// Uniform detuning grid, endpoints included.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetuningGrid {
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

impl DetuningGrid {
    pub fn new(min: f64, max: f64, count: usize) -> Result<Self, AnalysisError> {
        let grid = DetuningGrid { min, max, count };
        grid.validate()?;
        Ok(grid)
    }

    pub fn validate(&self) -> Result<(), AnalysisError> {
        if !(self.min.is_finite() && self.max.is_finite() && self.max > self.min) {
            return Err(AnalysisError::InvalidGrid("need finite min < max".into()));
        }
        if self.count < 2 {
            return Err(AnalysisError::InvalidGrid("need at least two points".into()));
        }
        Ok(())
    }

    pub fn spacing(&self) -> f64 {
        (self.max - self.min) / (self.count - 1) as f64
    }

    pub fn point(&self, k: usize) -> f64 {
        if k + 1 == self.count {
            self.max
        } else {
            self.min + k as f64 * self.spacing()
        }
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.count).map(|k| self.point(k)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub params: SystemParams,
    pub points: Vec<SpectrumPoint>,
}

impl Spectrum {
    pub fn detunings(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.delta_31).collect()
    }

    pub fn transmittance(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.transmittance).collect()
    }
}

/// Evaluates the closed-form spectrum on every grid point. Points are
/// independent, so they are computed in parallel; the output order is the
/// grid order.
pub fn sweep_spectrum(params: &SystemParams, grid: &DetuningGrid) -> Result<Spectrum, AnalysisError> {
    grid.validate()?;
    let points = (0..grid.count)
        .into_par_iter()
        .map(|k| {
            model::spectrum_point(params, grid.point(k))
                .map_err(|source| AnalysisError::Model { index: k, source })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Spectrum { params: *params, points })
}

/// Where Δ_F = 0.
pub fn two_photon_resonance(params: &SystemParams) -> f64 {
    params.drive.delta_32 + model::shift_b(&params.coupling_b)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowReport {
    /// Grid detuning of the transparency maximum.
    pub center: f64,
    /// Full width between the half-height crossings on either side.
    pub full_width: f64,
    /// Half of `full_width`; the Lorentzian width parameter of the window.
    pub half_width: f64,
    /// |Ω_c|² / Γ₃₁^(N) at the window center.
    pub predicted: f64,
    /// Grid points strictly inside the half-height crossings.
    pub points_inside: usize,
}

/// Measures the EIT window around the two-photon resonance. The half-height
/// level on each side is taken between the window maximum and the local
/// transmission minimum flanking it on that side.
pub fn transparency_window(spectrum: &Spectrum) -> Result<WindowReport, AnalysisError> {
    let params = &spectrum.params;
    let omega_c_sq = params.drive.omega_c.norm_sqr();
    if omega_c_sq == 0.0 {
        return Err(AnalysisError::NoWindowFound("control field is off".into()));
    }
    let x = spectrum.detunings();
    let t = spectrum.transmittance();
    let n = x.len();
    if n < 3 {
        return Err(AnalysisError::NoWindowFound("spectrum too short".into()));
    }
    let target = two_photon_resonance(params);
    if target < x[0] || target > x[n - 1] {
        return Err(AnalysisError::NoWindowFound("two-photon resonance outside the grid".into()));
    }
    let mut c = x.partition_point(|&d| d < target).min(n - 1);
    if c > 0 && (x[c - 1] - target).abs() < (x[c] - target).abs() {
        c -= 1;
    }
    while c > 0 && t[c - 1] > t[c] {
        c -= 1;
    }
    while c + 1 < n && t[c + 1] > t[c] {
        c += 1;
    }

    let mut lo = c;
    while lo > 0 && t[lo - 1] <= t[lo] {
        lo -= 1;
    }
    let mut hi = c;
    while hi + 1 < n && t[hi + 1] <= t[hi] {
        hi += 1;
    }
    if lo == 0 || hi == n - 1 || lo == c || hi == c {
        return Err(AnalysisError::NoWindowFound("flanking minima not resolved by the grid".into()));
    }

    let crossing = |from: usize, to: usize, level: f64| -> f64 {
        // Walk from the peak towards the minimum and interpolate linearly.
        let step: isize = if to > from { 1 } else { -1 };
        let mut k = from;
        loop {
            let next = (k as isize + step) as usize;
            if t[next] < level {
                let f = (t[k] - level) / (t[k] - t[next]);
                return x[k] + f * (x[next] - x[k]);
            }
            k = next;
        }
    };
    let left = crossing(c, lo, 0.5 * (t[c] + t[lo]));
    let right = crossing(c, hi, 0.5 * (t[c] + t[hi]));
    let points_inside = x.iter().filter(|&&d| d > left && d < right).count();
    if points_inside < 3 {
        return Err(AnalysisError::NoWindowFound("window narrower than the grid".into()));
    }
    let full_width = right - left;
    Ok(WindowReport {
        center: x[c],
        full_width,
        half_width: full_width / 2.0,
        predicted: omega_c_sq / model::decay_a(&params.coupling_a, x[c]),
        points_inside,
    })
}

/// Intervals of the grid where T < `level`, as (first, last) detunings.
pub fn absorption_intervals(spectrum: &Spectrum, level: f64) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    let mut open: Option<f64> = None;
    let mut prev = f64::NAN;
    for p in &spectrum.points {
        match (p.transmittance < level, open) {
            (true, None) => open = Some(p.delta_31),
            (false, Some(start)) => {
                out.push((start, prev));
                open = None;
            }
            _ => {}
        }
        prev = p.delta_31;
    }
    if let Some(start) = open {
        out.push((start, prev));
    }
    out
}

/// Number of absorption features: intervals with T < `level`, where two
/// intervals separated only by the EIT window (a gap containing the
/// two-photon resonance) count as one feature.
pub fn count_absorption_features(spectrum: &Spectrum, level: f64) -> usize {
    let intervals = absorption_intervals(spectrum, level);
    let target = two_photon_resonance(&spectrum.params);
    let eit_gaps = if spectrum.params.drive.omega_c.norm_sqr() > 0.0 {
        intervals.windows(2).filter(|w| w[0].1 < target && target < w[1].0).count()
    } else {
        0
    };
    intervals.len() - eit_gaps
}

/// Bisection on a bracketing interval until it is below `1e-13·max(1,|x|)`.
fn bisect<F: Fn(f64) -> f64>(f: &F, mut lo: f64, mut hi: f64) -> f64 {
    let mut f_lo = f(lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= 1e-13 * mid.abs().max(1.0) {
            return mid;
        }
        let f_mid = f(mid);
        if f_mid == 0.0 {
            return mid;
        }
        if (f_mid < 0.0) == (f_lo < 0.0) {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Roots of Δ_S(Δ₃₁) = Δ₃₁ − Δ_L^(N)(Δ₃₁) in `[min, max]`, found by a
/// uniform sign-change scan followed by bisection. Tangential roots that
/// do not change sign are not reported.
pub fn single_photon_resonances(
    params: &SystemParams,
    min: f64,
    max: f64,
    scan_points: usize,
) -> Vec<f64> {
    let f = |d: f64| d - model::lamb_shift_a(&params.coupling_a, d);
    let scan = scan_points.max(2);
    let h = (max - min) / (scan - 1) as f64;
    let mut roots: Vec<f64> = Vec::new();
    let mut prev_x = min;
    let mut prev_f = f(min);
    if prev_f == 0.0 {
        roots.push(min);
    }
    for k in 1..scan {
        let x = if k + 1 == scan { max } else { min + k as f64 * h };
        let fx = f(x);
        if fx == 0.0 {
            roots.push(x);
        } else if prev_f != 0.0 && (fx < 0.0) != (prev_f < 0.0) {
            roots.push(bisect(&f, prev_x, x));
        }
        prev_x = x;
        prev_f = fx;
    }
    roots.sort_by(|a, b| a.total_cmp(b));
    roots.dedup_by(|a, b| (*a - *b).abs() < h);
    roots
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecoherenceFree {
    pub points: Vec<f64>,
    /// Set when Γ₃₁^(N) vanishes for every detuning (zero delay at a
    /// decoherence-free phase, or no coupling at all).
    pub whole_axis: bool,
}

/// Zeros of the phase sum Σ_{k<N} e^{ikx}: x = 2πj/N with j not a multiple of N.
fn phase_sum_zeros(points: usize, x_lo: f64, x_hi: f64) -> Vec<f64> {
    if points < 2 {
        return Vec::new();
    }
    let n = points as f64;
    let (lo, hi) = if x_lo <= x_hi { (x_lo, x_hi) } else { (x_hi, x_lo) };
    let j_lo = (lo * n / (2.0 * PI)).ceil() as i64;
    let j_hi = (hi * n / (2.0 * PI)).floor() as i64;
    (j_lo..=j_hi)
        .filter(|j| j.rem_euclid(points as i64) != 0)
        .map(|j| 2.0 * PI * j as f64 / n)
        .collect()
}

/// Detunings in `[min, max]` where Γ₃₁^(N) = 0. For N = 2 the Lamb shift also
/// vanishes there; for larger N it generally does not.
pub fn decoherence_free_points(params: &SystemParams, min: f64, max: f64) -> DecoherenceFree {
    let a = &params.coupling_a;
    let rate = a.gamma_31_rate;
    if rate == 0.0 {
        return DecoherenceFree { points: Vec::new(), whole_axis: true };
    }
    if a.tau == 0.0 {
        let whole_axis = model::decay_a(a, 0.0) < DECAY_ZERO_TOL * rate;
        return DecoherenceFree { points: Vec::new(), whole_axis };
    }
    let points = phase_sum_zeros(a.n_points, a.phase_step(min), a.phase_step(max))
        .into_iter()
        .map(|x| (x - a.phi) / a.tau)
        .filter(|&d| d >= min && d <= max && model::decay_a(a, d) < DECAY_ZERO_TOL * rate)
        .collect();
    DecoherenceFree { points, whole_axis: false }
}

/// Reservoir delays τ̃ in `[min, max]` at which Γ₂₁^(M) = 0 for the given
/// point count and ω_β (the other fields of `coupling` are ignored).
pub fn elimination_scan(coupling: &CouplingB, min: f64, max: f64) -> Vec<f64> {
    let w = coupling.omega_beta;
    if w == 0.0 {
        return Vec::new();
    }
    let mut out: Vec<f64> = phase_sum_zeros(coupling.m_points, w * min, w * max)
        .into_iter()
        .map(|x| x / w)
        .filter(|&t| t >= min && t <= max)
        .collect();
    out.sort_by(|a, b| a.total_cmp(b));
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Regime {
    Eit,
    Ats,
}

/// Default ratio |Ω_c| / Γ₃₁^(N) above which the response is labelled ATS.
pub const ATS_THRESHOLD: f64 = 0.5;

/// Heuristic EIT/ATS label: ATS when |Ω_c| exceeds `threshold · Γ₃₁^(N)` at
/// the two-photon resonance. Ties go to EIT.
pub fn regime_label(params: &SystemParams, threshold: f64) -> Regime {
    let width = model::decay_a(&params.coupling_a, two_photon_resonance(params));
    if params.drive.omega_c.norm() > threshold * width {
        Regime::Ats
    } else {
        Regime::Eit
    }
}
