//! Time-domain master-equation integrator and Fourier extraction.
//!
//! With a probe of amplitude `Ω` at detuning `ω̃` the generator is
//! `dρ/dt = Gρ + (Gρ)† + κ X ρ X†`, where
//! `G(t) = −i(diag ω + Ω(e^{iω̃t} X + e^{−iω̃t} X†)) − (κ/2) Y`.
//! Both probe terms are kept. Integration is classical fixed-step RK4.
//!
//! Fourier convention: `ρ(t) = Σ_ν ρ[ν] e^{iνt}`, so the sideband
//! `ρ[−ω̃]` is the coefficient of `e^{−iω̃t}` and is extracted as the window
//! average of `ρ(t) e^{+iω̃t}`. With this convention a resonantly probed
//! empty resonator gives `ρ_10[−ω̃]/Ω = −2i/κ`.

use std::f64::consts::PI;

use nalgebra::{Complex, DMatrix};

use crate::error::{KpoError, Result};
use crate::model::CouplingMatrices;
use crate::scalar::{cr, dagger, lit, max_abs, to_f64, CMatrix, Real};
use crate::steady::LossSpec;

/// Step bound `h ≤ STEP_FACTOR / max(κ, ω spread, Ω)`.
pub const STEP_FACTOR: f64 = 0.02;

/// Largest accepted `|tr ρ(t) − tr ρ(0)|`.
pub const TRACE_DRIFT_TOL: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq)]
pub struct DriveSpec<T: Real> {
    /// Probe detuning `ω̃` (/2π, MHz), non-zero.
    pub omega_tilde: T,
    /// `Ω/κ`.
    pub amplitude_ratio: T,
    /// Discarded transient, in units of `1/κ`.
    pub transient: T,
    /// Extraction window, in probe periods.
    pub periods: usize,
}

impl<T: Real> DriveSpec<T> {
    /// Defaults: transient `15/κ`, window of 200 probe periods.
    pub fn new(omega_tilde: T, amplitude_ratio: T) -> Self {
        Self { omega_tilde, amplitude_ratio, transient: lit(15.0), periods: 200 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.amplitude_ratio > T::zero()) {
            return Err(KpoError::InvalidParameter("amplitude ratio must be positive".into()));
        }
        if !(self.transient >= lit(10.0)) {
            return Err(KpoError::Windowing(format!(
                "transient of {} / kappa is shorter than 10 / kappa",
                to_f64(self.transient)
            )));
        }
        if self.periods == 0 {
            return Err(KpoError::Windowing("window must span at least one period".into()));
        }
        if self.omega_tilde == T::zero() || !to_f64(self.omega_tilde).is_finite() {
            return Err(KpoError::Windowing("probe detuning must be finite and non-zero".into()));
        }
        Ok(())
    }
}

/// Largest admissible RK4 step for the given subspace, loss and probe
/// amplitude `Ω` (absolute, /2π MHz).
pub fn max_step<T: Real>(c: &CouplingMatrices<T>, kappa: T, omega: T) -> T {
    let rate = kappa.max(c.frequency_spread()).max(omega.abs());
    lit::<T>(STEP_FACTOR) / rate
}

/// Fixed-step RK4 integrator for one subspace, loss and probe.
#[derive(Clone, Debug)]
pub struct Integrator<T: Real> {
    base: CMatrix<T>,
    drive_fwd: CMatrix<T>,
    drive_bwd: CMatrix<T>,
    x: CMatrix<T>,
    xd: CMatrix<T>,
    kappa: T,
    omega_tilde: T,
    step: T,
}

impl<T: Real> Integrator<T> {
    /// `omega` is the absolute probe amplitude `Ω`; zero means no probe.
    pub fn new(
        c: &CouplingMatrices<T>,
        loss: &LossSpec<T>,
        omega_tilde: T,
        omega: T,
        step: T,
    ) -> Result<Self> {
        let kappa = loss.require_positive()?;
        let bound = max_step(c, kappa, omega);
        if !(step > T::zero()) || step > bound * lit(1.0 + 1e-12) {
            return Err(KpoError::StepTooLarge { step: to_f64(step), max: to_f64(bound) });
        }
        let n = c.n_levels();
        let w = c.energies();
        let minus_i = Complex::new(T::zero(), -T::one());
        let half = cr(kappa * lit(0.5));
        let mut base = c.y() * (-half);
        for k in 0..n {
            base[(k, k)] += minus_i * cr(w[k]);
        }
        let x = c.x().clone();
        let xd = dagger(&x);
        Ok(Self {
            base,
            drive_fwd: &x * (minus_i * cr(omega)),
            drive_bwd: &xd * (minus_i * cr(omega)),
            x,
            xd,
            kappa,
            omega_tilde,
            step,
        })
    }

    /// Probe-free integrator with the largest admissible step.
    pub fn free(c: &CouplingMatrices<T>, loss: &LossSpec<T>) -> Result<Self> {
        let kappa = loss.require_positive()?;
        Self::new(c, loss, T::zero(), T::zero(), max_step(c, kappa, T::zero()))
    }

    pub fn step_size(&self) -> T {
        self.step
    }

    /// `dρ/dt` at time `t`. Uses `ρ = ρ†`; the result is exactly Hermitian.
    pub fn rhs(&self, t: T, rho: &CMatrix<T>) -> CMatrix<T> {
        let mut ws = Workspace::new(rho.nrows());
        let mut out = CMatrix::zeros(rho.nrows(), rho.ncols());
        self.rhs_into(t, rho, &mut out, &mut ws);
        out
    }

    fn rhs_into(&self, t: T, rho: &CMatrix<T>, out: &mut CMatrix<T>, ws: &mut Workspace<T>) {
        let phase = self.omega_tilde * t;
        let e = Complex::new(phase.cos(), phase.sin());
        let ec = e.conj();
        for ((g, &b), (&f, &r)) in ws
            .g
            .iter_mut()
            .zip(self.base.iter())
            .zip(self.drive_fwd.iter().zip(self.drive_bwd.iter()))
        {
            *g = b + f * e + r * ec;
        }
        let one = cr(T::one());
        matmul_into(&mut ws.gr, &ws.g, rho, one);
        matmul_into(&mut ws.xr, &self.x, rho, one);
        matmul_into(out, &ws.xr, &self.xd, cr(self.kappa));
        // Assemble so that the result is Hermitian bit for bit; otherwise
        // roundoff seeds an anti-Hermitian part this form does not damp.
        let n = rho.nrows();
        let half = lit::<T>(0.5);
        for j in 0..n {
            for i in 0..=j {
                let jump = (out[(i, j)] + out[(j, i)].conj()) * half;
                let v = ws.gr[(i, j)] + ws.gr[(j, i)].conj() + jump;
                out[(i, j)] = v;
                out[(j, i)] = v.conj();
            }
        }
    }

    pub fn advance(&self, t: T, rho: &CMatrix<T>) -> CMatrix<T> {
        let mut ws = Workspace::new(rho.nrows());
        let mut next = rho.clone();
        self.advance_into(t, rho, &mut next, &mut ws);
        next
    }

    fn advance_into(&self, t: T, rho: &CMatrix<T>, next: &mut CMatrix<T>, ws: &mut Workspace<T>) {
        let h = self.step;
        let h2 = h * lit(0.5);
        let mut k = std::mem::take(&mut ws.k);
        let mut stage = std::mem::take(&mut ws.stage);
        let mut acc = std::mem::take(&mut ws.acc);
        let w = [h2, h2, h];
        let b = [lit::<T>(1.0), lit(2.0), lit(2.0), lit(1.0)];
        stage.copy_from(rho);
        acc.fill(cr(T::zero()));
        for s in 0..4 {
            let ts = if s == 0 { t } else { t + w[s - 1] };
            self.rhs_into(ts, &stage, &mut k, ws);
            add_scaled(&mut acc, cr(b[s]), &k);
            if s < 3 {
                stage.copy_from(rho);
                add_scaled(&mut stage, cr(w[s]), &k);
            }
        }
        next.copy_from(rho);
        add_scaled(next, cr(h / lit(6.0)), &acc);
        ws.k = k;
        ws.stage = stage;
        ws.acc = acc;
    }

    /// Runs `steps` steps from `t = 0`. The observer sees every state,
    /// including the initial one, as `(index, t, ρ)`. Returns the final
    /// state after checking trace drift.
    pub fn run<F>(&self, rho0: &CMatrix<T>, steps: usize, mut observer: F) -> Result<CMatrix<T>>
    where
        F: FnMut(usize, T, &CMatrix<T>),
    {
        let tr0 = rho0.trace();
        let mut rho = rho0.clone();
        let mut next = rho0.clone();
        let mut ws = Workspace::new(rho0.nrows());
        for j in 0..steps {
            let t = self.step * lit(j as f64);
            observer(j, t, &rho);
            self.advance_into(t, &rho, &mut next, &mut ws);
            std::mem::swap(&mut rho, &mut next);
        }
        observer(steps, self.step * lit(steps as f64), &rho);
        let drift = (rho.trace() - tr0).norm_sqr().sqrt();
        if !(drift <= lit(TRACE_DRIFT_TOL)) {
            return Err(KpoError::TraceDrift { drift: to_f64(drift) });
        }
        Ok(rho)
    }
}

/// `out = s·a·b` for square matrices, column-major axpy order.
fn matmul_into<T: Real>(out: &mut CMatrix<T>, a: &CMatrix<T>, b: &CMatrix<T>, s: Complex<T>) {
    let n = a.nrows();
    let av = a.as_slice();
    let bv = b.as_slice();
    let ov = out.as_mut_slice();
    for j in 0..n {
        let col = &mut ov[j * n..(j + 1) * n];
        col.iter_mut().for_each(|z| *z = Complex::new(T::zero(), T::zero()));
        for k in 0..n {
            let f = bv[j * n + k] * s;
            let acol = &av[k * n..(k + 1) * n];
            for (o, &x) in col.iter_mut().zip(acol) {
                *o += x * f;
            }
        }
    }
}

/// `y += a·x`.
fn add_scaled<T: Real>(y: &mut CMatrix<T>, a: Complex<T>, x: &CMatrix<T>) {
    for (yi, &xi) in y.iter_mut().zip(x.iter()) {
        *yi += xi * a;
    }
}

/// Scratch buffers reused across RK4 stages.
#[derive(Debug)]
struct Workspace<T: Real> {
    g: CMatrix<T>,
    gr: CMatrix<T>,
    xr: CMatrix<T>,
    k: CMatrix<T>,
    stage: CMatrix<T>,
    acc: CMatrix<T>,
}

impl<T: Real> Workspace<T> {
    fn new(n: usize) -> Self {
        let z = || CMatrix::zeros(n, n);
        Self { g: z(), gr: z(), xr: z(), k: z(), stage: z(), acc: z() }
    }
}

/// Sampled trajectory `ρ(t_j)` with uniform spacing.
#[derive(Clone, Debug)]
pub struct Trajectory<T: Real> {
    pub times: Vec<T>,
    pub states: Vec<CMatrix<T>>,
}

/// Integrates for `duration` and keeps every `sample_every`-th state.
pub fn evolve<T: Real>(
    integrator: &Integrator<T>,
    rho0: &CMatrix<T>,
    duration: T,
    sample_every: usize,
) -> Result<Trajectory<T>> {
    let steps = to_f64(duration / integrator.step_size()).round().max(0.0) as usize;
    let every = sample_every.max(1);
    let mut traj = Trajectory { times: Vec::new(), states: Vec::new() };
    integrator.run(rho0, steps, |j, t, rho| {
        if j % every == 0 {
            traj.times.push(t);
            traj.states.push(rho.clone());
        }
    })?;
    Ok(traj)
}

/// `ρ[−ω̃]/Ω` from samples with `t ≥ t_start`. The samples must be uniform
/// and the window `[t_start, t_last)` an integer number of probe periods.
pub fn extract_fourier<T: Real>(
    traj: &Trajectory<T>,
    omega_tilde: T,
    omega: T,
    t_start: T,
) -> Result<CMatrix<T>> {
    let first = traj
        .times
        .iter()
        .position(|&t| t >= t_start)
        .ok_or_else(|| KpoError::Windowing("window starts after the trajectory ends".into()))?;
    let last = traj.times.len() - 1;
    if last <= first {
        return Err(KpoError::Windowing("window holds fewer than two samples".into()));
    }
    let span = to_f64(traj.times[last] - traj.times[first]);
    if omega_tilde != T::zero() {
        let periods = span * to_f64(omega_tilde).abs() / (2.0 * PI);
        if (periods - periods.round()).abs() > 1e-6 * periods.max(1.0) || periods.round() < 1.0 {
            return Err(KpoError::Windowing(format!(
                "window spans {periods:.6} probe periods, not an integer"
            )));
        }
    }
    let (n, m) = traj.states[first].shape();
    let mut acc = CMatrix::zeros(n, m);
    for j in first..last {
        let phase = omega_tilde * traj.times[j];
        acc += &traj.states[j] * Complex::new(phase.cos(), phase.sin());
    }
    let count = lit::<T>((last - first) as f64);
    Ok(acc / cr(count * omega))
}

/// Oracle output for one probe detuning.
#[derive(Clone, Debug)]
pub struct OracleResponse<T: Real> {
    /// `ρ[−ω̃]/Ω`.
    pub r: CMatrix<T>,
    /// `ρ[+ω̃]/Ω`; equals `r†` for a Hermitian trajectory.
    pub r_plus: CMatrix<T>,
    /// `max |ρ[−2ω̃]|/Ω`, the second-order leakage left by the window.
    pub second_harmonic: T,
    pub step: T,
    /// RK4 steps actually taken.
    pub steps: usize,
}

/// How [`oracle_response_with`] advances whole probe periods.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stepping {
    /// Step the state through every period.
    Direct,
    /// Build the one-period RK4 map once from `N²` Hermitian basis states
    /// and apply it per period. Same discretization, fewer steps when the
    /// run spans more than `N²` periods.
    PeriodMap,
    /// Whichever takes fewer RK4 steps.
    Auto,
}

/// Drives from `rho0` (normally the steady state), discards a transient of
/// whole probe periods and projects the window onto `e^{±iω̃t}` and
/// `e^{2iω̃t}`.
pub fn oracle_response<T: Real>(
    c: &CouplingMatrices<T>,
    rho0: &CMatrix<T>,
    loss: &LossSpec<T>,
    drive: &DriveSpec<T>,
) -> Result<OracleResponse<T>> {
    oracle_response_with(c, rho0, loss, drive, Stepping::Auto)
}

struct Accumulators<T: Real> {
    minus: CMatrix<T>,
    plus: CMatrix<T>,
    second: CMatrix<T>,
}

impl<T: Real> Accumulators<T> {
    fn new(n: usize) -> Self {
        Self { minus: CMatrix::zeros(n, n), plus: CMatrix::zeros(n, n), second: CMatrix::zeros(n, n) }
    }

    fn add(&mut self, wt: T, t: T, rho: &CMatrix<T>) {
        let phase = wt * t;
        let e = Complex::new(phase.cos(), phase.sin());
        add_scaled(&mut self.minus, e, rho);
        add_scaled(&mut self.plus, e.conj(), rho);
        add_scaled(&mut self.second, e * e, rho);
    }
}

pub fn oracle_response_with<T: Real>(
    c: &CouplingMatrices<T>,
    rho0: &CMatrix<T>,
    loss: &LossSpec<T>,
    drive: &DriveSpec<T>,
    stepping: Stepping,
) -> Result<OracleResponse<T>> {
    drive.validate()?;
    let kappa = loss.require_positive()?;
    let omega = drive.amplitude_ratio * kappa;
    let wt = drive.omega_tilde;
    let period = lit::<T>(2.0 * PI) / wt.abs();
    let h_max = max_step(c, kappa, omega).min(max_step(c, wt.abs(), omega));
    let per_period = to_f64(period / h_max).ceil().max(1.0) as usize;
    let h = period / lit(per_period as f64);
    let integ = Integrator::new(c, loss, wt, omega, h)?;
    let transient_periods = to_f64(drive.transient / kappa / period).ceil() as usize;
    let total_periods = transient_periods + drive.periods;
    let n = rho0.nrows();

    let direct_steps = total_periods * per_period;
    let map_steps = (n * n + 1) * per_period;
    let use_map = match stepping {
        Stepping::Direct => false,
        Stepping::PeriodMap => true,
        Stepping::Auto => map_steps < direct_steps,
    };

    let mut acc = Accumulators::new(n);
    let steps = if use_map {
        let map = period_map(&integ, n, per_period)?;
        let mut v = hermitian_coords(rho0);
        let start_trace = rho0.trace();
        for _ in 0..transient_periods {
            v = &map * v;
        }
        let mut sum = nalgebra::DVector::<T>::zeros(n * n);
        for _ in 0..drive.periods {
            sum += &v;
            v = &map * v;
        }
        let drift = cabs_c(from_hermitian_coords(&v, n).trace() - start_trace);
        if !(drift <= lit(TRACE_DRIFT_TOL)) {
            return Err(KpoError::TraceDrift { drift: to_f64(drift) });
        }
        // Every window period starts at phase zero, so the period sums
        // collapse onto one pass from the summed start states.
        let seed = from_hermitian_coords(&sum, n);
        run_unchecked(&integ, &seed, per_period, |j, t, rho| {
            if j < per_period {
                acc.add(wt, t, rho);
            }
        });
        map_steps
    } else {
        let first = transient_periods * per_period;
        integ.run(rho0, direct_steps, |j, t, rho| {
            if j >= first && j < direct_steps {
                acc.add(wt, t, rho);
            }
        })?;
        direct_steps
    };

    let norm = cr(lit::<T>((drive.periods * per_period) as f64) * omega);
    Ok(OracleResponse {
        r: acc.minus / norm,
        r_plus: acc.plus / norm,
        second_harmonic: max_abs(&(acc.second / norm)),
        step: h,
        steps,
    })
}

fn cabs_c<T: Real>(z: Complex<T>) -> T {
    z.norm_sqr().sqrt()
}

fn run_unchecked<T: Real, F>(integ: &Integrator<T>, rho0: &CMatrix<T>, steps: usize, mut observer: F) -> CMatrix<T>
where
    F: FnMut(usize, T, &CMatrix<T>),
{
    let mut rho = rho0.clone();
    let mut next = rho0.clone();
    let mut ws = Workspace::new(rho0.nrows());
    for j in 0..steps {
        let t = integ.step * lit(j as f64);
        observer(j, t, &rho);
        integ.advance_into(t, &rho, &mut next, &mut ws);
        std::mem::swap(&mut rho, &mut next);
    }
    observer(steps, integ.step * lit(steps as f64), &rho);
    rho
}

/// Real coordinates of a Hermitian matrix: `ρ_ii`, then `Re ρ_ij`, `Im ρ_ij`
/// for `i < j`.
fn hermitian_coords<T: Real>(rho: &CMatrix<T>) -> nalgebra::DVector<T> {
    let n = rho.nrows();
    let mut v = nalgebra::DVector::zeros(n * n);
    let mut q = 0;
    for i in 0..n {
        v[q] = rho[(i, i)].re;
        q += 1;
    }
    for i in 0..n {
        for j in i + 1..n {
            v[q] = rho[(i, j)].re;
            v[q + 1] = rho[(i, j)].im;
            q += 2;
        }
    }
    v
}

fn from_hermitian_coords<T: Real>(v: &nalgebra::DVector<T>, n: usize) -> CMatrix<T> {
    let mut rho = CMatrix::zeros(n, n);
    let mut q = 0;
    for i in 0..n {
        rho[(i, i)] = cr(v[q]);
        q += 1;
    }
    for i in 0..n {
        for j in i + 1..n {
            let z = Complex::new(v[q], v[q + 1]);
            rho[(i, j)] = z;
            rho[(j, i)] = z.conj();
            q += 2;
        }
    }
    rho
}

/// One-period RK4 map on Hermitian coordinates (the dynamics is real-linear
/// on Hermitian matrices).
fn period_map<T: Real>(integ: &Integrator<T>, n: usize, per_period: usize) -> Result<DMatrix<T>> {
    let dim = n * n;
    let mut map = DMatrix::zeros(dim, dim);
    for q in 0..dim {
        let mut e = nalgebra::DVector::zeros(dim);
        e[q] = T::one();
        let basis = from_hermitian_coords(&e, n);
        let out = run_unchecked(integ, &basis, per_period, |_, _, _| {});
        map.set_column(q, &hermitian_coords(&out));
    }
    Ok(map)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{coupling_matrices, eigensystem_at, DriveKind, Eigensystem, KpoModel};
    use crate::steady::{steady_state_from_couplings, SteadyOptions};

    fn vacuum_system(n: usize) -> CouplingMatrices<f64> {
        let m = KpoModel::<f64>::new(DriveKind::TwoPhoton, 0.0, 17.0, 0.0, 12).unwrap();
        coupling_matrices(&Eigensystem::fock(&m).unwrap(), n).unwrap()
    }

    #[test]
    fn step_bound_is_enforced() {
        let c = vacuum_system(4);
        let loss = LossSpec::new(1.0, 0.45).unwrap();
        let bound = max_step(&c, 1.45, 0.0);
        assert!(matches!(
            Integrator::new(&c, &loss, 0.0, 0.0, bound * 1.5),
            Err(KpoError::StepTooLarge { .. })
        ));
        assert!(Integrator::new(&c, &loss, 0.0, 0.0, bound).is_ok());
    }

    #[test]
    fn single_photon_decay() {
        let c = vacuum_system(4);
        let loss = LossSpec::new(1.0, 0.45).unwrap();
        let integ = Integrator::free(&c, &loss).unwrap();
        let mut rho = CMatrix::zeros(4, 4);
        rho[(1, 1)] = cr(1.0);
        let traj = evolve(&integ, &rho, 2.0, 50).unwrap();
        for (t, s) in traj.times.iter().zip(&traj.states) {
            assert!((s[(1, 1)].re - (-1.45 * t).exp()).abs() < 1e-6);
        }
    }

    #[test]
    fn steady_state_is_a_fixed_point() {
        let m = KpoModel::<f64>::new(DriveKind::TwoPhoton, 0.0, 17.0, 20.0, 24).unwrap();
        let c = coupling_matrices(&eigensystem_at(&m).unwrap(), 12).unwrap();
        let loss = LossSpec::new(1.0, 0.45).unwrap();
        let s = steady_state_from_couplings(&c, &loss, &SteadyOptions::default()).unwrap();
        let integ = Integrator::free(&c, &loss).unwrap();
        let steps = (10.0 / 1.45 / integ.step_size()).ceil() as usize;
        let mut worst = 0.0f64;
        integ
            .run(s.rho(), steps, |_, _, rho| worst = worst.max(max_abs(&(rho - s.rho()))))
            .unwrap();
        assert!(worst < 1e-8, "{worst} residual {}", s.residual());
    }

    #[test]
    fn projection_identity() {
        let w = 3.0;
        let period = 2.0 * PI / w;
        let n = 400;
        let c0 = Complex::new(0.3, -0.7);
        let times: Vec<f64> = (0..=n * 5).map(|j| j as f64 * period / n as f64).collect();
        let states = times
            .iter()
            .map(|&t| {
                let mut m = CMatrix::zeros(2, 2);
                m[(1, 0)] = c0 * Complex::new(0.0, -w * t).exp();
                m[(0, 0)] = cr(1.0);
                m
            })
            .collect();
        let traj = Trajectory { times, states };
        let r = extract_fourier(&traj, w, 0.5, 0.0).unwrap();
        assert!((r[(1, 0)] - c0 / 0.5).norm() < 1e-12);
        assert!(r[(0, 0)].norm() < 1e-12);
        assert!(matches!(extract_fourier(&traj, 2.9, 0.5, 0.0), Err(KpoError::Windowing(_))));
    }

    #[test]
    fn resonant_empty_resonator_calibration() {
        let c = vacuum_system(4);
        let loss = LossSpec::new(1.0, 0.45).unwrap();
        let mut rho0 = CMatrix::zeros(4, 4);
        rho0[(0, 0)] = cr(1.0);
        // at p = 0, Δ = 0 the 0→1 transition sits at ω̃ = 0; probe half a
        // linewidth off it so the window is finite
        let wt = 0.5;
        let drive = DriveSpec { periods: 4, ..DriveSpec::new(wt, 1e-2) };
        let out = oracle_response(&c, &rho0, &loss, &drive).unwrap();
        let expect = Complex::new(0.0, 1.0) / Complex::new(-1.45 / 2.0, wt);
        assert!((out.r[(1, 0)] - expect).norm() / expect.norm() < 1e-2);
        assert!((out.r_plus - out.r.adjoint()).norm() < 1e-12);
    }

    #[test]
    fn period_map_matches_direct_stepping() {
        let m = KpoModel::<f64>::new(DriveKind::TwoPhoton, 0.0, 17.0, 20.0, 24).unwrap();
        let c = coupling_matrices(&eigensystem_at(&m).unwrap(), 6).unwrap();
        let loss = LossSpec::new(1.0, 0.45).unwrap();
        let rho0 = steady_state_from_couplings(&c, &loss, &SteadyOptions::default()).unwrap().rho().clone();
        let w = c.transition_frequency(0, 3);
        let drive = DriveSpec { periods: 40, ..DriveSpec::new(w + 0.3, 1e-2) };
        let a = oracle_response_with(&c, &rho0, &loss, &drive, Stepping::Direct).unwrap();
        let b = oracle_response_with(&c, &rho0, &loss, &drive, Stepping::PeriodMap).unwrap();
        let scale = max_abs(&a.r);
        assert!(max_abs(&(a.r - b.r)) <= 1e-9 * scale.max(1.0));
        assert!(b.steps < a.steps);
    }
}
