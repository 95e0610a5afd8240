//! Domain types and closed-form quantities for a three-level atom coupled at
//! several points to a probe waveguide (A) and a reservoir waveguide (B).
//!
//! Units: every frequency and rate is expressed in units of the single-point
//! probe-waveguide rate Γ₃₁ (which is 1 by default) and times in 1/Γ₃₁.
//! Group velocities default to 1.
//!
//! Two interference sums drive everything here. For the probe waveguide with
//! phase step `x = Δ₃₁τ + φ` the complex self-energy
//!
//! ```text
//! S_A(x) = Γ₃₁ [ N/2 + Σ_{n=1}^{N-1} (N-n) e^{inx} ]
//! ```
//!
//! has real part Γ₃₁^(N) (the modified decay rate) and imaginary part
//! Δ_L^(N) (the Lamb shift). The real part equals `(Γ₃₁/2)|Σ_{k<N} e^{ikx}|²`,
//! so it is never negative. Waveguide B is the same with `x = ω_β τ̃`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Default degeneracy threshold for the transmission denominator, in units
/// of Γ₃₁² (or Γ₃₁ for the undriven, first-order denominator).
pub const DEFAULT_DEGENERACY_EPS: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("degenerate denominator |D| = {magnitude:e} at delta_31 = {delta_31}")]
    DegenerateDenominator { delta_31: f64, magnitude: f64 },
    #[error("invalid parameters: {0}")]
    Invalid(String),
}

/// Bare atom: level frequencies and non-waveguide losses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AtomSpec {
    pub omega_21: f64,
    pub omega_31: f64,
    /// Non-waveguide damping of |2⟩ entering the scattering amplitudes.
    pub gamma_2: f64,
    /// Non-waveguide damping of |3⟩ entering the scattering amplitudes.
    pub gamma_3: f64,
    /// Pure dephasing of |2⟩ (master equation only).
    pub gamma_2_phi: f64,
    /// Pure dephasing of |3⟩ (master equation only).
    pub gamma_3_phi: f64,
    /// Unguided |3⟩ → |1⟩ decay (master equation only).
    pub gamma_31: f64,
    /// Unguided |3⟩ → |2⟩ decay (master equation only).
    pub gamma_32: f64,
}

impl AtomSpec {
    /// A lossless atom with the given transition frequencies.
    pub fn lossless(omega_21: f64, omega_31: f64) -> Self {
        AtomSpec {
            omega_21,
            omega_31,
            gamma_2: 0.0,
            gamma_3: 0.0,
            gamma_2_phi: 0.0,
            gamma_3_phi: 0.0,
            gamma_31: 0.0,
            gamma_32: 0.0,
        }
    }

    pub fn omega_32(&self) -> f64 {
        self.omega_31 - self.omega_21
    }

    fn validate(&self) -> Result<(), ModelError> {
        if !(self.omega_21 > 0.0 && self.omega_31 > self.omega_21) {
            return invalid("omega_31 > omega_21 > 0 must hold");
        }
        let rates = [
            ("gamma_2", self.gamma_2),
            ("gamma_3", self.gamma_3),
            ("gamma_2_phi", self.gamma_2_phi),
            ("gamma_3_phi", self.gamma_3_phi),
            ("gamma_31", self.gamma_31),
            ("gamma_32", self.gamma_32),
        ];
        for (name, rate) in rates {
            if !(rate >= 0.0 && rate.is_finite()) {
                return invalid(format!("{name} must be a finite rate >= 0"));
            }
        }
        Ok(())
    }
}

/// Coupling geometry of the probe waveguide A.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CouplingA {
    /// Number of coupling points N.
    pub n_points: usize,
    /// Travel time between neighbouring points, τ = d/v_g.
    pub tau: f64,
    /// Single-point rate Γ₃₁ = 2 g̃₃₁² / v_g.
    pub gamma_31_rate: f64,
    /// Static phase φ, normally ω₃₁τ.
    pub phi: f64,
}

impl CouplingA {
    /// Coupling with the phase tied to the atom, φ = ω₃₁τ.
    pub fn new(n_points: usize, tau: f64, gamma_31_rate: f64, atom: &AtomSpec) -> Self {
        CouplingA { n_points, tau, gamma_31_rate, phi: atom.omega_31 * tau }
    }

    pub fn with_phi(mut self, phi: f64) -> Self {
        self.phi = phi;
        self
    }

    /// Phase accumulated between neighbouring points at detuning Δ₃₁.
    pub fn phase_step(&self, delta_31: f64) -> f64 {
        delta_31 * self.tau + self.phi
    }

    /// Complex self-energy S_A; `Re` is Γ₃₁^(N), `Im` is Δ_L^(N).
    pub fn self_energy(&self, delta_31: f64) -> Complex64 {
        self_energy(self.n_points, self.gamma_31_rate, self.phase_step(delta_31))
    }

    /// Σ_{k=0}^{N-1} e^{ikx}: the coherent sum of the per-point phases.
    pub fn phase_sum(&self, delta_31: f64) -> Complex64 {
        phase_sum(self.n_points, self.phase_step(delta_31))
    }

    fn validate(&self) -> Result<(), ModelError> {
        if self.n_points < 1 {
            return invalid("n_points must be >= 1");
        }
        if !(self.tau >= 0.0 && self.tau.is_finite()) {
            return invalid("tau must be finite and >= 0");
        }
        if !(self.gamma_31_rate >= 0.0 && self.gamma_31_rate.is_finite()) {
            return invalid("gamma_31_rate must be finite and >= 0");
        }
        if !self.phi.is_finite() {
            return invalid("phi must be finite");
        }
        Ok(())
    }
}

/// Coupling geometry of the reservoir waveguide B. `m_points == 0` removes
/// the waveguide.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CouplingB {
    pub m_points: usize,
    pub tau_tilde: f64,
    /// Single-point rate Γ₂₁ = 2 g̃₂₁² / ṽ_g.
    pub gamma_21_rate: f64,
    /// Frequency at which the reservoir phase ω_β τ̃ is evaluated.
    pub omega_beta: f64,
    /// Guided |3⟩ → |2⟩ rate per point. No waveguide couples this leg in
    /// the model, so it is normally zero; it only feeds the master equation.
    pub gamma_32_rate: f64,
}

impl CouplingB {
    pub fn absent(atom: &AtomSpec) -> Self {
        CouplingB {
            m_points: 0,
            tau_tilde: 0.0,
            gamma_21_rate: 0.0,
            omega_beta: atom.omega_21,
            gamma_32_rate: 0.0,
        }
    }

    /// Coupling with ω_β = ω₂₁.
    pub fn new(m_points: usize, tau_tilde: f64, gamma_21_rate: f64, atom: &AtomSpec) -> Self {
        CouplingB {
            m_points,
            tau_tilde,
            gamma_21_rate,
            omega_beta: atom.omega_21,
            gamma_32_rate: 0.0,
        }
    }

    pub fn phase_step(&self) -> f64 {
        self.omega_beta * self.tau_tilde
    }

    /// Complex self-energy S_B; `Re` is Γ₂₁^(M), `Im` is Δ_r^(M).
    pub fn self_energy(&self) -> Complex64 {
        self_energy(self.m_points, self.gamma_21_rate, self.phase_step())
    }

    fn validate(&self) -> Result<(), ModelError> {
        if !(self.tau_tilde >= 0.0 && self.tau_tilde.is_finite()) {
            return invalid("tau_tilde must be finite and >= 0");
        }
        if !(self.gamma_21_rate >= 0.0 && self.gamma_21_rate.is_finite()) {
            return invalid("gamma_21_rate must be finite and >= 0");
        }
        if !(self.gamma_32_rate >= 0.0 && self.gamma_32_rate.is_finite()) {
            return invalid("gamma_32_rate must be finite and >= 0");
        }
        if !self.omega_beta.is_finite() {
            return invalid("omega_beta must be finite");
        }
        Ok(())
    }
}

/// Classical control field on the |2⟩ ↔ |3⟩ transition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriveSpec {
    /// Rabi amplitude Ω_c.
    pub omega_c: Complex64,
    /// Δ₃₂ = ν_c − (ω₃₁ − ω₂₁).
    pub delta_32: f64,
}

impl DriveSpec {
    pub fn resonant(omega_c: f64) -> Self {
        DriveSpec { omega_c: Complex64::new(omega_c, 0.0), delta_32: 0.0 }
    }
}

/// Weak classical probe used by the master equation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeSpec {
    pub delta_31: f64,
    pub omega_p: f64,
}

/// Full physical configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    pub atom: AtomSpec,
    pub coupling_a: CouplingA,
    pub coupling_b: CouplingB,
    pub drive: DriveSpec,
    /// Group velocity in waveguide A.
    pub v_g: f64,
    /// Group velocity in waveguide B.
    pub v_g_tilde: f64,
    pub degeneracy_eps: f64,
}

impl SystemParams {
    /// Builds and validates a parameter set with unit group velocities.
    pub fn new(
        atom: AtomSpec,
        coupling_a: CouplingA,
        coupling_b: CouplingB,
        drive: DriveSpec,
    ) -> Result<Self, ModelError> {
        let params = SystemParams {
            atom,
            coupling_a,
            coupling_b,
            drive,
            v_g: 1.0,
            v_g_tilde: 1.0,
            degeneracy_eps: DEFAULT_DEGENERACY_EPS,
        };
        params.validate()?;
        Ok(params)
    }

    /// Lossless setup used throughout the spectra: N points, delay τ, phase
    /// φ, drive Ω_c, Γ₃₁ = 1, Δ₃₂ = 0 and no reservoir waveguide.
    pub fn lossless_probe(n_points: usize, tau: f64, phi: f64, omega_c: f64) -> Self {
        let atom = AtomSpec::lossless(1.0e3, 2.0e3);
        let coupling_a = CouplingA::new(n_points, tau, 1.0, &atom).with_phi(phi);
        SystemParams::new(atom, coupling_a, CouplingB::absent(&atom), DriveSpec::resonant(omega_c))
            .expect("preset parameters are valid")
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        self.atom.validate()?;
        self.coupling_a.validate()?;
        self.coupling_b.validate()?;
        if !(self.drive.omega_c.norm().is_finite() && self.drive.delta_32.is_finite()) {
            return invalid("drive parameters must be finite");
        }
        if !(self.v_g > 0.0 && self.v_g_tilde > 0.0) {
            return invalid("group velocities must be > 0");
        }
        if self.degeneracy_eps.is_nan() || self.degeneracy_eps < 0.0 {
            return invalid("degeneracy_eps must be >= 0");
        }
        Ok(())
    }

    /// Per-point coupling strength g̃₃₁ = sqrt(Γ₃₁ v_g / 2).
    pub fn g_31(&self) -> f64 {
        (self.coupling_a.gamma_31_rate * self.v_g / 2.0).sqrt()
    }

    /// Per-point coupling strength g̃₂₁ = sqrt(Γ₂₁ ṽ_g / 2).
    pub fn g_21(&self) -> f64 {
        (self.coupling_b.gamma_21_rate * self.v_g_tilde / 2.0).sqrt()
    }

    /// Two-photon detuning including the reservoir shift, Δ_F.
    pub fn delta_f(&self, delta_31: f64) -> f64 {
        delta_31 - self.drive.delta_32 - shift_b(&self.coupling_b)
    }

    /// Damping of the |2⟩ coherence, γ = γ₂/2 + Γ₂₁^(M).
    pub fn gamma_composite(&self) -> f64 {
        self.atom.gamma_2 / 2.0 + decay_b(&self.coupling_b)
    }
}

fn invalid<T>(msg: impl Into<String>) -> Result<T, ModelError> {
    Err(ModelError::Invalid(msg.into()))
}

fn self_energy(points: usize, rate: f64, x: f64) -> Complex64 {
    let n = points as f64;
    let mut s = Complex64::new(rate * n / 2.0, 0.0);
    for k in 1..points {
        let weight = rate * (points - k) as f64;
        let kx = k as f64 * x;
        s += Complex64::new(weight * kx.cos(), weight * kx.sin());
    }
    s
}

fn phase_sum(points: usize, x: f64) -> Complex64 {
    (0..points).map(|k| Complex64::from_polar(1.0, k as f64 * x)).sum()
}

/// Frequency-dependent Lamb shift Δ_L^(N) = Γ₃₁ Σ (N−n) sin(n(Δ₃₁τ+φ)).
pub fn lamb_shift_a(coupling: &CouplingA, delta_31: f64) -> f64 {
    coupling.self_energy(delta_31).im
}

/// Modified decay rate Γ₃₁^(N) = Γ₃₁ [N/2 + Σ (N−n) cos(n(Δ₃₁τ+φ))].
pub fn decay_a(coupling: &CouplingA, delta_31: f64) -> f64 {
    coupling.self_energy(delta_31).re
}

/// Reservoir-induced shift Δ_r^(M) of level |2⟩.
pub fn shift_b(coupling: &CouplingB) -> f64 {
    coupling.self_energy().im
}

/// Reservoir-induced decay Γ₂₁^(M) of level |2⟩.
pub fn decay_b(coupling: &CouplingB) -> f64 {
    coupling.self_energy().re
}

/// Shared numerator/denominator of the scattering amplitudes at one detuning.
struct Response {
    /// (Δ_F + iγ), or 1 when the drive is off and the factor cancels.
    dark: Complex64,
    numerator: Complex64,
    denominator: Complex64,
    decay: f64,
}

fn response(params: &SystemParams, delta_31: f64) -> Result<Response, ModelError> {
    let s_a = params.coupling_a.self_energy(delta_31);
    let decay = s_a.re;
    let delta_s = delta_31 - s_a.im;
    let single = Complex64::new(delta_s, params.atom.gamma_3 / 2.0);
    let omega_c_sq = params.drive.omega_c.norm_sqr();
    let gamma31_rate = params.coupling_a.gamma_31_rate;

    // Without the drive the factor (Δ_F + iγ) divides out of every amplitude.
    let (dark, numerator, scale) = if omega_c_sq == 0.0 {
        (Complex64::new(1.0, 0.0), single, gamma31_rate)
    } else {
        let dark = Complex64::new(params.delta_f(delta_31), params.gamma_composite());
        (dark, dark * single - omega_c_sq, gamma31_rate * gamma31_rate)
    };
    let denominator = numerator + I * decay * dark;
    if decay != 0.0 && denominator.norm() < params.degeneracy_eps * scale {
        return Err(ModelError::DegenerateDenominator {
            delta_31,
            magnitude: denominator.norm(),
        });
    }
    Ok(Response { dark, numerator, denominator, decay })
}

/// Probe transmission amplitude t_N at detuning Δ₃₁.
pub fn transmission(params: &SystemParams, delta_31: f64) -> Result<Complex64, ModelError> {
    let r = response(params, delta_31)?;
    if r.decay == 0.0 {
        // Numerator and denominator coincide: the atom is decoupled from A.
        return Ok(Complex64::new(1.0, 0.0));
    }
    Ok(r.numerator / r.denominator)
}

/// Amplitude `coupling · (Δ_F+iγ) · Σ_k e^{ikx} / D` shared by e₃ and ρ̃₃₁.
fn driven_amplitude(
    params: &SystemParams,
    delta_31: f64,
    coupling: f64,
) -> Result<Complex64, ModelError> {
    if coupling == 0.0 || params.coupling_a.gamma_31_rate == 0.0 {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let r = response(params, delta_31)?;
    if r.denominator.norm() == 0.0 {
        return Err(ModelError::DegenerateDenominator { delta_31, magnitude: 0.0 });
    }
    Ok(r.dark * coupling * params.coupling_a.phase_sum(delta_31) / r.denominator)
}

/// Atomic excitation amplitude e₃ of the scattering eigenstate.
pub fn excitation_e3(params: &SystemParams, delta_31: f64) -> Result<Complex64, ModelError> {
    driven_amplitude(params, delta_31, params.g_31())
}

/// Steady-state coherence ρ̃₃₁ under a weak classical probe Ω_p:
/// e₃ with g̃₃₁ → Ω_p, times 1/(2π).
pub fn steady_rho31_analytic(
    params: &SystemParams,
    delta_31: f64,
    omega_p: f64,
) -> Result<Complex64, ModelError> {
    Ok(driven_amplitude(params, delta_31, omega_p)? / (2.0 * std::f64::consts::PI))
}

/// One row of a transmission spectrum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrumPoint {
    pub delta_31: f64,
    pub t_complex: Complex64,
    pub transmittance: f64,
    pub lamb_shift: f64,
    pub decay_eff: f64,
    pub shift_b: f64,
    pub decay_b: f64,
}

pub fn spectrum_point(params: &SystemParams, delta_31: f64) -> Result<SpectrumPoint, ModelError> {
    let t = transmission(params, delta_31)?;
    let s_a = params.coupling_a.self_energy(delta_31);
    let s_b = params.coupling_b.self_energy();
    Ok(SpectrumPoint {
        delta_31,
        t_complex: t,
        transmittance: t.norm_sqr(),
        lamb_shift: s_a.im,
        decay_eff: s_a.re,
        shift_b: s_b.im,
        decay_b: s_b.re,
    })
}
