//! Brute-force single-photon scattering solver.
//!
//! Every coupling point is treated as a δ potential. Integrating the
//! first-order mode equations across point `n` of waveguide A gives one jump
//! condition per propagation direction; the two atomic amplitudes add one row
//! each. The field at a coupling point is the mean of its one-sided limits.
//! Solving the resulting `(2N + 2M + 2)`-dimensional complex system gives all
//! interval amplitudes without any of the interference sums used in
//! [`crate::model`], which makes it an independent check of those formulas.
//!
//! Unknown layout: `t₁..t_N, r₁..r_N, t̃₁..t̃_M, r̃₁..r̃_M, e₂, e₃`. The incident
//! wave enters through `t₀ = 1`; waveguide B has no incident photon
//! (`t̃₀ = 0`), and `r_{N+1} = r̃_{M+1} = 0`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::SystemParams;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };
const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// Relative pivot magnitude below which the system is declared singular.
pub const PIVOT_THRESHOLD: f64 = 1e-14;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("singular scattering system at delta_31 = {delta_31} (pivot {pivot:e})")]
    SingularSystem { delta_31: f64, pivot: f64 },
}

/// Dense square complex system `matrix · x = rhs`, row-major.
#[derive(Debug, Clone)]
pub struct LinearSystem {
    pub dim: usize,
    pub matrix: Vec<Complex64>,
    pub rhs: Vec<Complex64>,
}

impl LinearSystem {
    fn zeros(dim: usize) -> Self {
        LinearSystem { dim, matrix: vec![ZERO; dim * dim], rhs: vec![ZERO; dim] }
    }

    fn add(&mut self, row: usize, col: usize, value: Complex64) {
        self.matrix[row * self.dim + col] += value;
    }

    pub fn entry(&self, row: usize, col: usize) -> Complex64 {
        self.matrix[row * self.dim + col]
    }

    /// Relative residual ‖Ax − b‖ / (‖A‖‖x‖ + ‖b‖) in max norms.
    pub fn relative_residual(&self, x: &[Complex64]) -> f64 {
        let n = self.dim;
        let mut worst = 0.0f64;
        let mut a_norm = 0.0f64;
        for i in 0..n {
            let row = &self.matrix[i * n..(i + 1) * n];
            let ax: Complex64 = row.iter().zip(x).map(|(a, xi)| a * xi).sum();
            worst = worst.max((ax - self.rhs[i]).norm());
            a_norm = a_norm.max(row.iter().map(|a| a.norm()).sum());
        }
        let x_norm = x.iter().fold(0.0f64, |m, v| m.max(v.norm()));
        let b_norm = self.rhs.iter().fold(0.0f64, |m, v| m.max(v.norm()));
        let scale = a_norm * x_norm + b_norm;
        if scale == 0.0 {
            worst
        } else {
            worst / scale
        }
    }

    /// Gaussian elimination with partial pivoting. Returns the solution or
    /// the offending pivot magnitude (relative to the largest entry).
    pub fn solve(&self) -> Result<Vec<Complex64>, f64> {
        let n = self.dim;
        let mut a = self.matrix.clone();
        let mut b = self.rhs.clone();
        let scale = a.iter().fold(0.0f64, |m, v| m.max(v.norm()));
        if scale == 0.0 {
            return Err(0.0);
        }
        for col in 0..n {
            let (pivot_row, pivot_mag) = (col..n)
                .map(|r| (r, a[r * n + col].norm()))
                .fold((col, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
            if pivot_mag < PIVOT_THRESHOLD * scale {
                return Err(pivot_mag / scale);
            }
            if pivot_row != col {
                for k in 0..n {
                    a.swap(col * n + k, pivot_row * n + k);
                }
                b.swap(col, pivot_row);
            }
            let pivot = a[col * n + col];
            for r in col + 1..n {
                let factor = a[r * n + col] / pivot;
                if factor == ZERO {
                    continue;
                }
                for k in col..n {
                    let upper = a[col * n + k];
                    a[r * n + k] -= factor * upper;
                }
                let upper_b = b[col];
                b[r] -= factor * upper_b;
            }
        }
        let mut x = vec![ZERO; n];
        for row in (0..n).rev() {
            let tail: Complex64 = (row + 1..n).map(|k| a[row * n + k] * x[k]).sum();
            x[row] = (b[row] - tail) / a[row * n + row];
        }
        Ok(x)
    }
}

/// Index bookkeeping for the unknown vector.
#[derive(Debug, Clone, Copy)]
struct Layout {
    n: usize,
    m: usize,
}

impl Layout {
    fn dim(&self) -> usize {
        2 * self.n + 2 * self.m + 2
    }
    fn t(&self, n: usize) -> usize {
        n - 1
    }
    fn r(&self, n: usize) -> usize {
        self.n + n - 1
    }
    fn t_tilde(&self, m: usize) -> usize {
        2 * self.n + m - 1
    }
    fn r_tilde(&self, m: usize) -> usize {
        2 * self.n + self.m + m - 1
    }
    fn e2(&self) -> usize {
        2 * self.n + 2 * self.m
    }
    fn e3(&self) -> usize {
        2 * self.n + 2 * self.m + 1
    }
}

/// One waveguide's contribution to the system: jump rows for every point and
/// the mean-field sum entering its atom row.
struct ChannelRows {
    points: usize,
    /// Phase step between neighbouring points.
    step: f64,
    velocity: f64,
    coupling: f64,
    /// Incident amplitude in front of the first point.
    incident: Complex64,
    /// First row index used by this channel.
    row0: usize,
    t_index: fn(&Layout, usize) -> usize,
    r_index: fn(&Layout, usize) -> usize,
    atom_index: usize,
    atom_row: usize,
}

impl ChannelRows {
    fn write(&self, layout: &Layout, sys: &mut LinearSystem) {
        let (v, g) = (self.velocity, self.coupling);
        for p in 1..=self.points {
            let theta = (p - 1) as f64 * self.step;
            let fwd = Complex64::from_polar(1.0, theta);
            let bwd = fwd.conj();
            let row_r = self.row0 + p - 1;
            let row_l = self.row0 + self.points + p - 1;

            // −i v (t_p − t_{p−1}) e^{iθ} + g e = 0
            sys.add(row_r, (self.t_index)(layout, p), -I * v * fwd);
            if p == 1 {
                sys.rhs[row_r] -= I * v * fwd * self.incident;
            } else {
                sys.add(row_r, (self.t_index)(layout, p - 1), I * v * fwd);
            }
            sys.add(row_r, self.atom_index, Complex64::new(g, 0.0));

            // i v (r_{p+1} − r_p) e^{−iθ} + g e = 0
            sys.add(row_l, (self.r_index)(layout, p), -I * v * bwd);
            if p < self.points {
                sys.add(row_l, (self.r_index)(layout, p + 1), I * v * bwd);
            }
            sys.add(row_l, self.atom_index, Complex64::new(g, 0.0));

            // Atom row: − g · ½[e^{iθ}(t_{p−1} + t_p) + e^{−iθ}(r_p + r_{p+1})]
            let half = -0.5 * g;
            sys.add(self.atom_row, (self.t_index)(layout, p), half * fwd);
            if p == 1 {
                sys.rhs[self.atom_row] -= half * fwd * self.incident;
            } else {
                sys.add(self.atom_row, (self.t_index)(layout, p - 1), half * fwd);
            }
            sys.add(self.atom_row, (self.r_index)(layout, p), half * bwd);
            if p < self.points {
                sys.add(self.atom_row, (self.r_index)(layout, p + 1), half * bwd);
            }
        }
    }
}

/// Builds the boundary-condition system at probe detuning Δ₃₁.
///
/// With the drive off, |2⟩ is unreachable from the incident photon; its row
/// is replaced by `e₂ = 0` so that reservoir bound states cannot make the
/// system singular.
pub fn assemble_system(params: &SystemParams, delta_31: f64) -> LinearSystem {
    let layout = Layout { n: params.coupling_a.n_points, m: params.coupling_b.m_points };
    let mut sys = LinearSystem::zeros(layout.dim());

    ChannelRows {
        points: layout.n,
        step: params.coupling_a.phase_step(delta_31),
        velocity: params.v_g,
        coupling: params.g_31(),
        incident: Complex64::new(1.0, 0.0),
        row0: 0,
        t_index: Layout::t,
        r_index: Layout::r,
        atom_index: layout.e3(),
        atom_row: layout.e3(),
    }
    .write(&layout, &mut sys);

    ChannelRows {
        points: layout.m,
        step: params.coupling_b.phase_step(),
        velocity: params.v_g_tilde,
        coupling: params.g_21(),
        incident: ZERO,
        row0: 2 * layout.n,
        t_index: Layout::t_tilde,
        r_index: Layout::r_tilde,
        atom_index: layout.e2(),
        atom_row: layout.e2(),
    }
    .write(&layout, &mut sys);

    let omega_c = params.drive.omega_c;
    let (e2, e3) = (layout.e2(), layout.e3());
    // (Δ₃₁ + iγ₃/2) e₃ − Ω_c e₂ − g Σ ⟨field⟩ = 0
    sys.add(e3, e3, Complex64::new(delta_31, params.atom.gamma_3 / 2.0));
    sys.add(e3, e2, -omega_c);
    if omega_c.norm_sqr() == 0.0 {
        for k in 0..layout.dim() {
            sys.matrix[e2 * layout.dim() + k] = ZERO;
        }
        sys.rhs[e2] = ZERO;
        sys.add(e2, e2, Complex64::new(1.0, 0.0));
    } else {
        // (Δ₃₁ − Δ₃₂ + iγ₂/2) e₂ − Ω_c* e₃ − g̃₂₁ Σ ⟨field⟩ = 0
        sys.add(
            e2,
            e2,
            Complex64::new(delta_31 - params.drive.delta_32, params.atom.gamma_2 / 2.0),
        );
        sys.add(e2, e3, -omega_c.conj());
    }
    sys
}

/// Every interval amplitude of the scattering eigenstate at one detuning.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScatteringSolution {
    pub delta_31: f64,
    /// Right-moving amplitudes t₁..t_N (t₀ = 1 is implicit).
    pub t: Vec<Complex64>,
    /// Left-moving amplitudes r₁..r_N.
    pub r: Vec<Complex64>,
    pub t_tilde: Vec<Complex64>,
    pub r_tilde: Vec<Complex64>,
    pub e2: Complex64,
    pub e3: Complex64,
    /// Relative residual of the solved system.
    pub residual: f64,
}

impl ScatteringSolution {
    /// Transmitted amplitude t_N.
    pub fn transmission(&self) -> Complex64 {
        *self.t.last().expect("at least one coupling point")
    }

    /// Reflected amplitude r₁.
    pub fn reflection(&self) -> Complex64 {
        self.r[0]
    }

    /// Outgoing photon flux normalised by the incident flux v_g:
    /// (v_g(|t_N|² + |r₁|²) + ṽ_g(|t̃_M|² + |r̃₁|²)) / v_g.
    pub fn outgoing_flux(&self, params: &SystemParams) -> f64 {
        let a = self.transmission().norm_sqr() + self.reflection().norm_sqr();
        let b = match (self.t_tilde.last(), self.r_tilde.first()) {
            (Some(t), Some(r)) => t.norm_sqr() + r.norm_sqr(),
            _ => 0.0,
        };
        a + params.v_g_tilde / params.v_g * b
    }
}

/// Solves the scattering problem at one detuning.
pub fn solve_amplitudes(
    params: &SystemParams,
    delta_31: f64,
) -> Result<ScatteringSolution, OracleError> {
    let sys = assemble_system(params, delta_31);
    let x = sys
        .solve()
        .map_err(|pivot| OracleError::SingularSystem { delta_31, pivot })?;
    let layout = Layout { n: params.coupling_a.n_points, m: params.coupling_b.m_points };
    let (n, m) = (layout.n, layout.m);
    Ok(ScatteringSolution {
        delta_31,
        t: x[layout.t(1)..layout.t(1) + n].to_vec(),
        r: x[layout.r(1)..layout.r(1) + n].to_vec(),
        t_tilde: x[2 * n..2 * n + m].to_vec(),
        r_tilde: x[2 * n + m..2 * n + 2 * m].to_vec(),
        e2: x[layout.e2()],
        e3: x[layout.e3()],
        residual: sys.relative_residual(&x),
    })
}

/// Sampled plane-wave amplitudes in one waveguide.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaveguideProfile {
    /// Coupling point positions, the first one at the origin.
    pub points: Vec<f64>,
    pub positions: Vec<f64>,
    pub right_amp: Vec<Complex64>,
    pub left_amp: Vec<Complex64>,
}

impl WaveguideProfile {
    fn sample(
        spacing: f64,
        step: f64,
        incident: Complex64,
        t: &[Complex64],
        r: &[Complex64],
        samples: usize,
    ) -> Self {
        let count = t.len();
        let points: Vec<f64> = (0..count).map(|k| k as f64 * spacing).collect();
        let span = points.last().copied().unwrap_or(0.0);
        let pad = if spacing > 0.0 { spacing } else { 1.0 };
        let (lo, hi) = (-pad, span + pad);
        let wavevector = if spacing > 0.0 { step / spacing } else { 0.0 };
        let samples = samples.max(2);

        let mut profile = WaveguideProfile {
            points: points.clone(),
            positions: Vec::with_capacity(samples),
            right_amp: Vec::with_capacity(samples),
            left_amp: Vec::with_capacity(samples),
        };
        for k in 0..samples {
            let x = lo + (hi - lo) * k as f64 / (samples - 1) as f64;
            // Interval index: number of coupling points strictly left of x.
            let j = points.iter().filter(|&&p| p < x).count();
            let right = if j == 0 { incident } else { t[j - 1] };
            let left = if j < count { r[j] } else { Complex64::new(0.0, 0.0) };
            profile.positions.push(x);
            profile.right_amp.push(right * Complex64::from_polar(1.0, wavevector * x));
            profile.left_amp.push(left * Complex64::from_polar(1.0, -wavevector * x));
        }
        profile
    }

    /// Total field φ_R + φ_L at every sample.
    pub fn total(&self) -> Vec<Complex64> {
        self.right_amp.iter().zip(&self.left_amp).map(|(a, b)| a + b).collect()
    }
}

/// Field profiles of both waveguides.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldProfile {
    pub a: WaveguideProfile,
    pub b: WaveguideProfile,
}

/// Samples the piecewise plane-wave fields implied by a solution. Point
/// spacing is `v·τ`, so with a zero delay all points collapse onto the
/// origin.
pub fn field_profile(
    solution: &ScatteringSolution,
    params: &SystemParams,
    sample_count: usize,
) -> FieldProfile {
    let a = WaveguideProfile::sample(
        params.v_g * params.coupling_a.tau,
        params.coupling_a.phase_step(solution.delta_31),
        Complex64::new(1.0, 0.0),
        &solution.t,
        &solution.r,
        sample_count,
    );
    let b = WaveguideProfile::sample(
        params.v_g_tilde * params.coupling_b.tau_tilde,
        params.coupling_b.phase_step(),
        ZERO,
        &solution.t_tilde,
        &solution.r_tilde,
        sample_count,
    );
    FieldProfile { a, b }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{self, AtomSpec, CouplingA, CouplingB, DriveSpec};

    #[test]
    fn dense_solver_matches_known_system() {
        let mut sys = LinearSystem::zeros(2);
        // [[0, 1], [2, i]] x = [1, 3]  (needs a row swap)
        sys.add(0, 1, Complex64::new(1.0, 0.0));
        sys.add(1, 0, Complex64::new(2.0, 0.0));
        sys.add(1, 1, I);
        sys.rhs = vec![Complex64::new(1.0, 0.0), Complex64::new(3.0, 0.0)];
        let x = sys.solve().unwrap();
        assert!((x[1] - 1.0).norm() < 1e-15);
        assert!((x[0] - (3.0 - I) / 2.0).norm() < 1e-15);
        assert!(sys.relative_residual(&x) < 1e-16);
    }

    #[test]
    fn singular_system_is_rejected() {
        let mut sys = LinearSystem::zeros(2);
        sys.add(0, 0, Complex64::new(1.0, 0.0));
        sys.add(0, 1, Complex64::new(2.0, 0.0));
        sys.add(1, 0, Complex64::new(2.0, 0.0));
        sys.add(1, 1, Complex64::new(4.0, 0.0));
        assert!(sys.solve().is_err());
    }

    #[test]
    fn small_atom_from_four_unknowns() {
        let p = SystemParams::lossless_probe(1, 0.0, 0.0, 0.0);
        for &d in &[-1.0, -0.1, 0.3, 2.0] {
            let sys = assemble_system(&p, d);
            assert_eq!(sys.dim, 4);
            let sol = solve_amplitudes(&p, d).unwrap();
            let expected = Complex64::new(d, 0.0) / Complex64::new(d, 0.5);
            assert!((sol.transmission() - expected).norm() < 1e-14);
        }
    }

    #[test]
    fn resonant_mirror() {
        let p = SystemParams::lossless_probe(1, 0.0, 0.0, 0.0);
        let sol = solve_amplitudes(&p, 0.0).unwrap();
        assert!(sol.transmission().norm() < 1e-15);
        assert!((sol.reflection().norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn two_point_atom_matches_closed_form() {
        let p = SystemParams::lossless_probe(2, 1.3, 0.7, 0.0);
        for &d in &[-0.8, 0.05, 0.6] {
            let sol = solve_amplitudes(&p, d).unwrap();
            let t = model::transmission(&p, d).unwrap();
            assert!((sol.transmission() - t).norm() < 1e-13);
        }
    }

    #[test]
    fn uncoupled_waveguides_propagate_freely() {
        let atom = AtomSpec::lossless(1.0, 3.0);
        let a = CouplingA::new(3, 0.4, 0.0, &atom);
        let b = CouplingB::new(2, 0.3, 0.0, &atom);
        let p = SystemParams::new(atom, a, b, DriveSpec::resonant(0.2)).unwrap();
        let sol = solve_amplitudes(&p, 0.37).unwrap();
        for t in &sol.t {
            assert!((t - 1.0).norm() < 1e-15);
        }
        for amp in sol.r.iter().chain(&sol.t_tilde).chain(&sol.r_tilde) {
            assert!(amp.norm() < 1e-15);
        }
        assert!(sol.e2.norm() < 1e-15 && sol.e3.norm() < 1e-15);
    }

    #[test]
    fn dimension_counts_constraints() {
        let atom = AtomSpec::lossless(1.0, 3.0);
        let a = CouplingA::new(4, 0.4, 1.0, &atom);
        let b = CouplingB::new(3, 0.3, 0.5, &atom);
        let p = SystemParams::new(atom, a, b, DriveSpec::resonant(0.2)).unwrap();
        assert_eq!(assemble_system(&p, 0.1).dim, 2 * 4 + 2 * 3 + 2);
    }

    #[test]
    fn field_profile_free_and_standing_wave() {
        let atom = AtomSpec::lossless(1.0, 3.0);
        let a = CouplingA::new(2, 1.0, 0.0, &atom);
        let p = SystemParams::new(atom, a, CouplingB::absent(&atom), DriveSpec::resonant(0.0))
            .unwrap();
        let prof = field_profile(&solve_amplitudes(&p, 0.2).unwrap(), &p, 101);
        for (r, l) in prof.a.right_amp.iter().zip(&prof.a.left_amp) {
            assert!((r.norm() - 1.0).abs() < 1e-14);
            assert!(l.norm() < 1e-15);
        }

        let p = SystemParams::lossless_probe(2, 1.0, 0.3, 0.0);
        let sol = solve_amplitudes(&p, 0.0).unwrap();
        let prof = field_profile(&sol, &p, 201);
        let (x1, x2) = (prof.a.points[0], prof.a.points[1]);
        for (k, &x) in prof.a.positions.iter().enumerate() {
            if x > x1 && x < x2 {
                assert!(prof.a.right_amp[k].norm() > 1e-3);
                assert!(prof.a.left_amp[k].norm() > 1e-3);
                // Plane waves: modulus constant inside the interval.
                assert!((prof.a.right_amp[k].norm() - sol.t[0].norm()).abs() < 1e-14);
            }
            if x > x2 {
                assert_eq!(prof.a.left_amp[k], Complex64::new(0.0, 0.0));
            }
        }
    }
}
