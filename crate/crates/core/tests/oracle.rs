use kpo_core::model::{coupling_matrices, eigensystem_at, DriveKind, KpoModel};
use kpo_core::oracle::{oracle_response, DriveSpec, Integrator};
use kpo_core::spectrum::{coefficients, solve_sideband, Measurement, ProbeSpec};
use kpo_core::steady::{steady_state_from_couplings, LossSpec, SteadyOptions};
use kpo_core::{CMatrix, Couplings, C64};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

fn max_abs(m: &CMatrix<f64>) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn system(pump: f64, kerr: f64, dim: usize, n_keep: usize) -> (Couplings, LossSpec<f64>) {
    let m = KpoModel::<f64>::new(DriveKind::TwoPhoton, 0.0, kerr, pump, dim).unwrap();
    let c = coupling_matrices(&eigensystem_at(&m).unwrap(), n_keep).unwrap();
    (c, LossSpec::new(1.0, 0.45).unwrap())
}

/// Deterministic pseudo-random density matrix `AA†/tr(AA†)`.
fn mixed_state(n: usize, seed: u64) -> CMatrix<f64> {
    let mut rng = StdRng::seed_from_u64(seed);
    let a = CMatrix::from_fn(n, n, |_, _| C64::new(rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5)));
    let rho = &a * a.adjoint();
    let tr = rho.trace();
    rho / tr
}

#[test]
fn random_state_relaxes_to_steady_state() {
    // the slowest Liouvillian decay rate here is 0.39 κ, enough for 1e-4 by 30/κ
    let (c, loss) = system(2.0, 17.0, 10, 10);
    let s = steady_state_from_couplings(&c, &loss, &SteadyOptions::default()).unwrap();
    let integ = Integrator::free(&c, &loss).unwrap();
    let steps = (30.0 / loss.kappa_tot() / integ.step_size()).ceil() as usize;
    for seed in [3, 29] {
        let rho0 = mixed_state(10, seed);
        let end = integ.run(&rho0, steps, |_, _, _| {}).unwrap();
        let d = max_abs(&(end - s.rho()));
        assert!(d < 1e-4, "seed {seed}: {d}");
    }
}

#[test]
fn driven_response_matches_sideband_solution() {
    let (c, loss) = system(20.0, 17.0, 24, 6);
    let s = steady_state_from_couplings(&c, &loss, &SteadyOptions::default()).unwrap();
    let line = c.transition_frequency(0, 3);
    for offset in [-1.0, 0.0, 0.7] {
        let w = line + offset;
        let drive = DriveSpec { periods: 60, ..DriveSpec::new(w, 1e-3) };
        let out = oracle_response(&c, s.rho(), &loss, &drive).unwrap();
        let lin = solve_sideband(&c, &s, &loss, &ProbeSpec::reflection(w)).unwrap();
        let scale = max_abs(lin.r());
        assert!(max_abs(&(&out.r - lin.r())) < 1e-2 * scale, "offset {offset}");

        let g_oracle = 1.0 - C64::i() * loss.kappa_ex * (c.x().transpose().component_mul(&out.r)).sum();
        let g_lin = coefficients(&lin, &c, &loss, Measurement::Reflection).gamma;
        assert!((g_oracle - g_lin).norm() < 1e-2, "offset {offset}");
    }
}

#[test]
fn response_is_linear_in_probe_amplitude() {
    let (c, loss) = system(20.0, 17.0, 24, 6);
    let s = steady_state_from_couplings(&c, &loss, &SteadyOptions::default()).unwrap();
    let w = c.transition_frequency(0, 3) + 0.3;
    let full = DriveSpec { periods: 40, ..DriveSpec::new(w, 2e-3) };
    let half = DriveSpec { amplitude_ratio: 1e-3, ..full.clone() };
    let a = oracle_response(&c, s.rho(), &loss, &full).unwrap();
    let b = oracle_response(&c, s.rho(), &loss, &half).unwrap();
    let rel = max_abs(&(&a.r - &b.r)) / max_abs(&b.r);
    assert!(rel < full.amplitude_ratio.powi(2), "{rel}");
    assert!(max_abs(&(&b.r_plus - b.r.adjoint())) < 1e-12);
    assert!(b.second_harmonic < 1e-2 * max_abs(&b.r));
}
