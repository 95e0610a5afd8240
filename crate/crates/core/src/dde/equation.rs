use num_complex::Complex64;

use super::density::{DensityMatrix3, Mat3};
use super::DdeError;
use crate::model::{ProbeSpec, SystemParams};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

// Basis indices.
const L1: usize = 0;
const L2: usize = 1;
const L3: usize = 2;

/// Which waveguide a delayed term comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Channel {
    /// Probe waveguide: acts through |3⟩⟨3| and the |1⟩⟨3| jump.
    A,
    /// Reservoir waveguide: acts through |2⟩⟨2| and the |1⟩⟨2| jump.
    B,
}

/// `−i·shift·[P, ρ(t − lag)] + 2·rate·D[J] ρ(t − lag)` with `P` and `J`
/// fixed by the channel. `rate` may be negative.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DelayedTerm {
    pub lag: f64,
    pub channel: Channel,
    pub shift: f64,
    pub rate: f64,
}

/// Lookup of past states for the delayed terms.
pub trait History {
    fn state_at(&self, t: f64) -> Option<Mat3>;
}

/// A history that is the same state at every past time.
#[derive(Debug, Clone, Copy)]
pub struct ConstantHistory(pub DensityMatrix3);

impl History for ConstantHistory {
    fn state_at(&self, _t: f64) -> Option<Mat3> {
        Some(self.0 .0)
    }
}

/// No stored past at all.
#[derive(Debug, Clone, Copy)]
pub struct NoHistory;

impl History for NoHistory {
    fn state_at(&self, _t: f64) -> Option<Mat3> {
        None
    }
}

/// Right-hand side of the delayed master equation in the frame where the
/// probe and control fields appear with explicit time dependence.
#[derive(Debug, Clone, PartialEq)]
pub struct MasterEquation {
    pub delta_31: f64,
    /// Ω_p Σ_n e^{iθ_n} with θ_n = (n−1)(Δ₃₁τ + φ).
    pub probe_amp: Complex64,
    pub omega_c: Complex64,
    pub delta_32: f64,
    /// Coefficient of D[|1⟩⟨3|]: γ₃₁ + NΓ₃₁.
    pub decay_31: f64,
    /// Coefficient of D[|2⟩⟨3|]: γ₃₂ + MΓ₃₂.
    pub decay_32: f64,
    /// Coefficient of D[|1⟩⟨2|]: MΓ₂₁.
    pub decay_21: f64,
    pub dephase_2: f64,
    pub dephase_3: f64,
    pub delayed: Vec<DelayedTerm>,
}

impl MasterEquation {
    pub fn new(params: &SystemParams, probe: &ProbeSpec) -> Self {
        let a = &params.coupling_a;
        let b = &params.coupling_b;
        let atom = &params.atom;
        let (n, m) = (a.n_points, b.m_points);

        let mut delayed = Vec::new();
        for k in 1..n {
            let weight = a.gamma_31_rate * (n - k) as f64;
            let kphi = k as f64 * a.phi;
            delayed.push(DelayedTerm {
                lag: k as f64 * a.tau,
                channel: Channel::A,
                shift: weight * kphi.sin(),
                rate: weight * kphi.cos(),
            });
        }
        for k in 1..m {
            let weight = b.gamma_21_rate * (m - k) as f64;
            let kx = k as f64 * b.phase_step();
            delayed.push(DelayedTerm {
                lag: k as f64 * b.tau_tilde,
                channel: Channel::B,
                shift: weight * kx.sin(),
                rate: weight * kx.cos(),
            });
        }
        delayed.retain(|term| term.shift != 0.0 || term.rate != 0.0);

        MasterEquation {
            delta_31: probe.delta_31,
            probe_amp: probe.omega_p * a.phase_sum(probe.delta_31),
            omega_c: params.drive.omega_c,
            delta_32: params.drive.delta_32,
            decay_31: atom.gamma_31 + n as f64 * a.gamma_31_rate,
            decay_32: atom.gamma_32 + m as f64 * b.gamma_32_rate,
            decay_21: m as f64 * b.gamma_21_rate,
            dephase_2: atom.gamma_2_phi,
            dephase_3: atom.gamma_3_phi,
            delayed,
        }
    }

    /// Longest lag among the delayed terms.
    pub fn max_lag(&self) -> f64 {
        self.delayed.iter().fold(0.0, |m, d| m.max(d.lag))
    }

    /// Shortest nonzero lag, if any.
    pub fn min_positive_lag(&self) -> Option<f64> {
        self.delayed
            .iter()
            .map(|d| d.lag)
            .filter(|&lag| lag > 0.0)
            .min_by(|a, b| a.total_cmp(b))
    }

    /// Coupling Hamiltonian V(t).
    pub fn hamiltonian(&self, t: f64) -> Mat3 {
        let v31 = self.probe_amp * Complex64::from_polar(1.0, -self.delta_31 * t);
        let v32 = self.omega_c * Complex64::from_polar(1.0, -self.delta_32 * t);
        let mut h = Mat3::zeros();
        h[(L3, L1)] = v31;
        h[(L1, L3)] = v31.conj();
        h[(L3, L2)] = v32;
        h[(L2, L3)] = v32.conj();
        h
    }

    /// dρ/dt given the current state and one lagged state per delayed term
    /// (in the order of `self.delayed`).
    pub(crate) fn derivative(&self, t: f64, rho: &Mat3, lagged: &[Mat3]) -> Mat3 {
        debug_assert_eq!(lagged.len(), self.delayed.len());
        let h = self.hamiltonian(t);
        let mut out = (h * rho - rho * h) * (-I);

        jump(&mut out, rho, L1, L3, self.decay_31);
        jump(&mut out, rho, L2, L3, self.decay_32);
        jump(&mut out, rho, L1, L2, self.decay_21);
        jump(&mut out, rho, L2, L2, self.dephase_2);
        jump(&mut out, rho, L3, L3, self.dephase_3);

        for (term, past) in self.delayed.iter().zip(lagged) {
            let (level, lower) = match term.channel {
                Channel::A => (L3, L1),
                Channel::B => (L2, L1),
            };
            projector_commutator(&mut out, past, level, -I * term.shift);
            jump(&mut out, past, lower, level, 2.0 * term.rate);
        }
        out
    }

    /// dρ/dt with lagged states taken from `history` (zero lags use `rho_now`).
    pub fn rhs(
        &self,
        t: f64,
        rho_now: &DensityMatrix3,
        history: &dyn History,
    ) -> Result<DensityMatrix3, DdeError> {
        let lagged = self
            .delayed
            .iter()
            .map(|term| {
                if term.lag == 0.0 {
                    Ok(rho_now.0)
                } else {
                    history
                        .state_at(t - term.lag)
                        .ok_or(DdeError::MissingHistory { t, lag: term.lag })
                }
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(DensityMatrix3(self.derivative(t, &rho_now.0, &lagged)))
    }
}

/// out += c · D[|lower⟩⟨upper|] ρ, with D[J]ρ = JρJ† − ½{J†J, ρ}.
/// `lower == upper` gives pure dephasing of that level.
#[inline]
fn jump(out: &mut Mat3, rho: &Mat3, lower: usize, upper: usize, c: f64) {
    if c == 0.0 {
        return;
    }
    out[(lower, lower)] += rho[(upper, upper)] * c;
    let half = 0.5 * c;
    for k in 0..3 {
        out[(upper, k)] -= rho[(upper, k)] * half;
        out[(k, upper)] -= rho[(k, upper)] * half;
    }
}

/// out += c · [|level⟩⟨level|, ρ].
#[inline]
fn projector_commutator(out: &mut Mat3, rho: &Mat3, level: usize, c: Complex64) {
    if c == Complex64::new(0.0, 0.0) {
        return;
    }
    for k in 0..3 {
        out[(level, k)] += c * rho[(level, k)];
        out[(k, level)] -= c * rho[(k, level)];
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{AtomSpec, CouplingA, CouplingB, DriveSpec};
    use std::f64::consts::PI;

    fn random_hermitian(seed: u64) -> Mat3 {
        // Small deterministic LCG; no statistical quality needed.
        let mut state = seed.wrapping_mul(6364136223846793005).wrapping_add(1);
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        let mut m = Mat3::zeros();
        for i in 0..3 {
            m[(i, i)] = Complex64::new(next(), 0.0);
            for j in i + 1..3 {
                let z = Complex64::new(next(), next());
                m[(i, j)] = z;
                m[(j, i)] = z.conj();
            }
        }
        m
    }

    fn busy_equation() -> MasterEquation {
        let mut atom = AtomSpec::lossless(1.3, 4.1);
        atom.gamma_2_phi = 0.07;
        atom.gamma_3_phi = 0.05;
        atom.gamma_31 = 0.02;
        atom.gamma_32 = 0.03;
        let a = CouplingA::new(3, 0.7, 1.0, &atom);
        let mut b = CouplingB::new(3, 0.4, 0.6, &atom);
        b.gamma_32_rate = 0.1;
        let drive = DriveSpec { omega_c: Complex64::new(0.3, -0.2), delta_32: 0.15 };
        let p = SystemParams::new(atom, a, b, drive).unwrap();
        MasterEquation::new(&p, &ProbeSpec { delta_31: 0.4, omega_p: 0.05 })
    }

    #[test]
    fn idle_atom_does_not_move() {
        let atom = AtomSpec::lossless(1.0, 2.0);
        let mut a = CouplingA::new(2, 1.0, 0.0, &atom);
        a.gamma_31_rate = 0.0;
        let p = SystemParams::new(atom, a, CouplingB::absent(&atom), DriveSpec::resonant(0.0))
            .unwrap();
        let eq = MasterEquation::new(&p, &ProbeSpec { delta_31: 0.3, omega_p: 0.0 });
        let rho = DensityMatrix3(random_hermitian(3));
        let d = eq.rhs(1.0, &rho, &NoHistory).unwrap();
        assert!(d.0.iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn output_is_hermitian_and_traceless() {
        let eq = busy_equation();
        assert_eq!(eq.delayed.len(), 4);
        for seed in 0..20 {
            let rho = random_hermitian(seed);
            let lagged: Vec<Mat3> =
                (0..eq.delayed.len()).map(|k| random_hermitian(100 + seed * 7 + k as u64)).collect();
            let d = eq.derivative(0.37 * seed as f64, &rho, &lagged);
            assert!(d.trace().norm() < 1e-15);
            assert!(hermiticity(&d) < 1e-15);
        }
    }

    fn hermiticity(m: &Mat3) -> f64 {
        super::super::density::hermiticity_error(m)
    }

    #[test]
    fn delayed_rate_turns_negative() {
        // N = 2 and ω₃₁τ = π: Γ'₃₁ = Γ₃₁ cos(π) = −Γ₃₁.
        let atom = AtomSpec::lossless(1.0, PI);
        let a = CouplingA::new(2, 1.0, 1.0, &atom);
        let p = SystemParams::new(atom, a, CouplingB::absent(&atom), DriveSpec::resonant(0.0))
            .unwrap();
        let eq = MasterEquation::new(&p, &ProbeSpec { delta_31: 0.0, omega_p: 0.0 });
        assert_eq!(eq.delayed.len(), 1);
        assert!((eq.delayed[0].rate + 1.0).abs() < 1e-15);
        assert!(eq.delayed[0].rate < 0.0);
    }

    #[test]
    fn missing_history_is_reported() {
        let eq = busy_equation();
        let rho = DensityMatrix3::ground();
        assert!(matches!(
            eq.rhs(1.0, &rho, &NoHistory),
            Err(DdeError::MissingHistory { .. })
        ));
        assert!(eq.rhs(1.0, &rho, &ConstantHistory(rho)).is_ok());
    }

    #[test]
    fn local_coherence_damping_matches_half_rate() {
        // Single point: ρ₃₁ decays at Γ₃₁/2, the small-atom Γ^(1).
        let atom = AtomSpec::lossless(1.0, 2.0);
        let a = CouplingA::new(1, 0.0, 1.0, &atom);
        let p = SystemParams::new(atom, a, CouplingB::absent(&atom), DriveSpec::resonant(0.0))
            .unwrap();
        let eq = MasterEquation::new(&p, &ProbeSpec { delta_31: 0.0, omega_p: 0.0 });
        let mut rho = Mat3::zeros();
        rho[(L3, L1)] = Complex64::new(1.0, 0.0);
        let d = eq.derivative(0.0, &rho, &[]);
        assert!((d[(L3, L1)] + 0.5).norm() < 1e-15);
    }
}
