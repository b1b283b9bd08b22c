use kpo_core::analytic::nominal_loss_rates;
use kpo_core::fock::{annihilation, displacement, number, parity, parity_of};
use kpo_core::model::{build_hamiltonian, coupling_matrices, eigensystem_at, DriveKind, KpoModel};
use kpo_core::spectrum::{
    coefficients, previous_sideband, solve_sideband, solve_sideband_with, Measurement, ProbeSpec,
    SolveOptions,
};
use kpo_core::steady::{apply_generator, steady_state, LossSpec, SteadyOptions};
use kpo_core::{CMatrix, C64};
use proptest::prelude::*;

fn kind() -> impl Strategy<Value = DriveKind> {
    prop_oneof![Just(DriveKind::TwoPhoton), Just(DriveKind::FourPhoton)]
}

fn random_hermitian(n: usize, seed: &[f64]) -> CMatrix<f64> {
    let mut m = CMatrix::zeros(n, n);
    let mut k = 0;
    for i in 0..n {
        for j in i..n {
            let re = seed[k % seed.len()];
            let im = if i == j { 0.0 } else { seed[(k + 7) % seed.len()] };
            m[(i, j)] = C64::new(re, im);
            m[(j, i)] = C64::new(re, -im);
            k += 1;
        }
    }
    m
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn number_operator_is_diagonal(dim in 1usize..60) {
        let n = number::<f64>(dim).unwrap();
        for i in 0..dim {
            for j in 0..dim {
                let expect = if i == j { i as f64 } else { 0.0 };
                prop_assert_eq!(n.element(i, j), C64::new(expect, 0.0));
            }
        }
        if dim >= 2 {
            let a = annihilation::<f64>(dim).unwrap();
            let ada = a.adjoint().compose(&a);
            prop_assert!((ada.matrix() - n.matrix()).norm() < 1e-12);
        }
    }

    #[test]
    fn displacement_inverse(re in -2.0f64..2.0, im in -2.0f64..2.0) {
        let alpha = C64::new(re, im);
        let d = displacement(alpha, 48).unwrap();
        let dm = displacement(-alpha, 48).unwrap();
        let prod = d.compose(&dm);
        let err = (prod.matrix() - CMatrix::<f64>::identity(48, 48)).norm();
        prop_assert!(err < 1e-8, "{}", err);
    }

    #[test]
    fn hamiltonian_commutes_with_parity(
        kind in kind(), delta in -30.0f64..30.0, kerr in 1.0f64..20.0, pump in 0.0f64..3.0,
    ) {
        let m = KpoModel::new(kind, delta, kerr, pump, 24).unwrap();
        let h = build_hamiltonian(&m).unwrap();
        let p = parity::<f64>(24).unwrap();
        let comm = h.matrix() * p.matrix() - p.matrix() * h.matrix();
        prop_assert!(comm.norm() <= 1e-12 * h.matrix().norm());
    }

    #[test]
    fn eigensystem_invariants(
        kind in kind(), delta in -20.0f64..20.0, kerr in 5.0f64..20.0, pump in 0.0f64..2.0,
    ) {
        let m = KpoModel::new(kind, delta, kerr, pump, 24).unwrap();
        let eig = eigensystem_at(&m).unwrap();
        let h = build_hamiltonian(&m).unwrap();
        let v = eig.vectors();
        let gram = v.adjoint() * v;
        prop_assert!((gram - CMatrix::<f64>::identity(24, 24)).norm() < 1e-10);
        for l in 0..24 {
            let col = v.column(l);
            let r = h.matrix() * col - col * C64::new(eig.energy(l), 0.0);
            prop_assert!(r.norm() <= 1e-9 * h.matrix().norm());
        }
        let c = coupling_matrices(&eig, 14).unwrap();
        for i in 0..14 {
            for j in 0..14 {
                if parity_of(i) == parity_of(j) {
                    prop_assert!(c.x()[(i, j)].norm() <= 1e-10);
                } else {
                    prop_assert!(c.y()[(i, j)].norm() <= 1e-10);
                }
                prop_assert!((c.y()[(i, j)] - c.y()[(j, i)].conj()).norm() <= 1e-12);
            }
        }
    }

    #[test]
    fn generator_preserves_trace(
        pump in 0.0f64..40.0, seed in prop::collection::vec(-1.0f64..1.0, 16),
    ) {
        // with every level retained X†X = Y exactly, so 𝓛 is trace-free
        let m = KpoModel::new(DriveKind::TwoPhoton, 0.0, 17.0, pump, 20).unwrap();
        let eig = eigensystem_at(&m).unwrap();
        let c = coupling_matrices(&eig, 20).unwrap();
        let sigma = random_hermitian(20, &seed);
        let l = apply_generator(&c, 1.45, &sigma);
        prop_assert!(l.trace().norm() <= 1e-10, "{}", l.trace());
    }

    #[test]
    fn steady_state_invariants(
        kind in kind(), pump in 0.0f64..2.0, kex in 0.1f64..2.0, kint in 0.0f64..1.0,
    ) {
        let m = KpoModel::new(kind, 5.0, 10.0, pump, 24).unwrap();
        let eig = eigensystem_at(&m).unwrap();
        let loss = LossSpec::new(kex, kint).unwrap();
        let s = steady_state(&eig, &loss, 24, &SteadyOptions::default()).unwrap();
        prop_assert!((s.trace() - C64::new(1.0, 0.0)).norm() <= 1e-10);
        prop_assert!(s.hermiticity_error() <= 1e-10);
        prop_assert!(s.residual() <= 1e-10);
        prop_assert!(s.min_eigenvalue() >= -1e-8);
        prop_assert!(s.parity_leakage() <= 1e-10);
    }

    #[test]
    fn spectrum_invariants(pump in 20.0f64..100.0, offset in -20.0f64..20.0) {
        let m = KpoModel::new(DriveKind::TwoPhoton, 0.0, 17.0, pump, 40).unwrap();
        let eig = eigensystem_at(&m).unwrap();
        let loss = LossSpec::new(1.0, 0.45).unwrap();
        let c = coupling_matrices(&eig, 12).unwrap();
        let s = steady_state(&eig, &loss, 12, &SteadyOptions::default()).unwrap();
        let w = c.transition_frequency(0, 3) + offset;

        let r = solve_sideband(&c, &s, &loss, &ProbeSpec::transmission(w)).unwrap();
        prop_assert!(r.residual() <= 1e-10);
        let t = coefficients(&r, &c, &loss, Measurement::Transmission);
        prop_assert!((t.transmission.unwrap() - C64::new(1.0, 0.0) - t.gamma).norm() <= 1e-12);

        let reduced = SolveOptions { zero_offdiag: true, suppress_interference: true, ..Default::default() };
        let a = solve_sideband_with(&c, &s, &loss, &ProbeSpec::reflection(w), &reduced).unwrap();
        let b = previous_sideband(&c, &s, &loss, &ProbeSpec::reflection(w)).unwrap();
        for i in 0..12 {
            for j in 0..12 {
                if parity_of(i) != parity_of(j) {
                    prop_assert!((a.element(i, j) - b.element(i, j)).norm() <= 1e-10);
                }
            }
        }

        let no_ex = LossSpec::new(0.0, 1.45).unwrap();
        let s0 = steady_state(&eig, &no_ex, 12, &SteadyOptions::default()).unwrap();
        let r0 = solve_sideband(&c, &s0, &no_ex, &ProbeSpec::reflection(w)).unwrap();
        prop_assert_eq!(coefficients(&r0, &c, &no_ex, Measurement::Reflection).gamma, C64::new(1.0, 0.0));
    }

    #[test]
    fn nominal_rate_identity(pump in 0.0f64..100.0, m in 0usize..12, n in 0usize..12) {
        prop_assume!(m != n);
        let model = KpoModel::new(DriveKind::TwoPhoton, 0.0, 17.0, pump, 40).unwrap();
        let eig = eigensystem_at(&model).unwrap();
        let loss = LossSpec::new(1.0, 0.45).unwrap();
        let c = coupling_matrices(&eig, 12).unwrap();
        let s = steady_state(&eig, &loss, 12, &SteadyOptions::default()).unwrap();
        let r = nominal_loss_rates(&c, &s, &loss, m, n).unwrap();
        let total = loss.kappa_tot() * (c.y()[(m, m)].re + c.y()[(n, n)].re);
        prop_assert!((r.kappa_ex + r.kappa_int - total).abs() <= 1e-12 * total.abs().max(1.0));
    }
}

#[test]
fn far_detuned_probe_is_fully_reflected() {
    let m = KpoModel::<f64>::new(DriveKind::TwoPhoton, 0.0, 17.0, 100.0, 40).unwrap();
    let eig = eigensystem_at(&m).unwrap();
    let loss = LossSpec::new(1.0, 0.45).unwrap();
    let c = coupling_matrices(&eig, 14).unwrap();
    let s = steady_state(&eig, &loss, 14, &SteadyOptions::default()).unwrap();
    let far = 1e3 * loss.kappa_tot();
    for w in [c.energies()[0] - c.energies()[13] - far, far + c.frequency_spread()] {
        for meas in [Measurement::Reflection, Measurement::Transmission] {
            let r = solve_sideband(&c, &s, &loss, &ProbeSpec { omega_in_tilde: w, measurement: meas }).unwrap();
            let k = coefficients(&r, &c, &loss, meas);
            assert!((k.magnitude() - 1.0).abs() < 5e-3);
        }
    }
}
