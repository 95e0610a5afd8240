use std::f64::consts::PI;

use num_complex::Complex64;
use proptest::prelude::*;

use giant_eit::model::{self, AtomSpec, CouplingA, CouplingB, DriveSpec, SystemParams};
use giant_eit::oracle;

fn params() -> impl Strategy<Value = SystemParams> {
    (
        (1usize..=5, 0.0f64..10.0, 0.0f64..2.0 * PI, 0.2f64..3.0),
        (0usize..=3, 0.0f64..10.0, 0.0f64..2.0, 1.0f64..60.0),
        (0.0f64..2.0, 0.0f64..2.0 * PI, -1.0f64..1.0),
        (0.0f64..1.0, 0.0f64..1.0, any::<bool>(), 0.5f64..2.0),
    )
        .prop_map(|((n, tau, phi, g31), (m, tt, g21, w21), (oc, arg, d32), (g2, g3, lossy, vt))| {
            let mut atom = AtomSpec::lossless(w21, 2.5 * w21);
            if lossy {
                atom.gamma_2 = g2;
                atom.gamma_3 = g3;
            }
            let a = CouplingA::new(n, tau, g31, &atom).with_phi(phi);
            let b = CouplingB::new(m, tt, if m > 0 { g21 } else { 0.0 }, &atom);
            let drive = DriveSpec { omega_c: Complex64::from_polar(oc, arg), delta_32: d32 };
            let mut p = SystemParams::new(atom, a, b, drive).unwrap();
            p.v_g = 1.3;
            p.v_g_tilde = vt;
            p
        })
}

fn rel(a: Complex64, b: Complex64) -> f64 {
    (a - b).norm() / a.norm().max(b.norm()).max(f64::MIN_POSITIVE)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(400))]

    #[test]
    fn closed_form_matches_boundary_conditions(p in params(), delta in -4.0f64..4.0) {
        let sol = oracle::solve_amplitudes(&p, delta).unwrap();
        let t = model::transmission(&p, delta).unwrap();
        let e3 = model::excitation_e3(&p, delta).unwrap();
        prop_assert!(rel(t, sol.transmission()) < 1e-9, "t {} vs {}", t, sol.transmission());
        prop_assert!(rel(e3, sol.e3) < 1e-9, "e3 {} vs {}", e3, sol.e3);
        prop_assert!(sol.residual < 1e-12);
    }

    #[test]
    fn lossless_flux_is_conserved(p in params(), delta in -4.0f64..4.0) {
        prop_assume!(p.atom.gamma_2 == 0.0 && p.atom.gamma_3 == 0.0);
        let sol = oracle::solve_amplitudes(&p, delta).unwrap();
        prop_assert!((sol.outgoing_flux(&p) - 1.0).abs() < 1e-10);
    }

    #[test]
    fn lossy_flux_is_dissipated(p in params(), delta in -4.0f64..4.0) {
        prop_assume!(p.atom.gamma_3 > 1e-3);
        let sol = oracle::solve_amplitudes(&p, delta).unwrap();
        prop_assert!(sol.outgoing_flux(&p) <= 1.0 + 1e-12);
    }
}

/// Between the outer coupling points of a two-point atom at a
/// decoherence-free detuning the atom is dark and the field passes
/// unchanged.
#[test]
fn decoherence_free_point_is_transparent_in_the_oracle() {
    let p = SystemParams::lossless_probe(2, 10.0, 200.0 * PI, 0.1);
    let delta = PI / 10.0;
    let sol = oracle::solve_amplitudes(&p, delta).unwrap();
    assert!(sol.e3.norm() < 1e-12);
    assert!(sol.reflection().norm() < 1e-12);
    assert!((sol.transmission().norm() - 1.0).abs() < 1e-12);
}
