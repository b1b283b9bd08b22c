//! Closed forms for two interfering transitions `|0̃⟩→|3̃⟩` and `|1̃⟩→|2̃⟩`
//! (or any parity-alternating quadruple), their large-pump limits and the
//! nominal loss rates of a line.

use nalgebra::Complex;

use crate::error::{KpoError, Result};
use crate::fock::{annihilation, displacement, number, parity_of};
use crate::model::CouplingMatrices;
use crate::scalar::{cabs, ci, cr, dagger, lit, to_f64, CMatrix, Real};
use crate::spectrum::{Coefficients, ProbeSpec};
use crate::steady::{LossSpec, SteadyState};

/// Levels of two interfering transitions `l0 → l3` and `l1 → l2`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct TransitionQuad {
    pub l0: usize,
    pub l1: usize,
    pub l2: usize,
    pub l3: usize,
}

impl Default for TransitionQuad {
    fn default() -> Self {
        Self { l0: 0, l1: 1, l2: 2, l3: 3 }
    }
}

impl TransitionQuad {
    pub fn new(l0: usize, l1: usize, l2: usize, l3: usize) -> Self {
        Self { l0, l1, l2, l3 }
    }

    fn check(&self, n_levels: usize) -> Result<()> {
        let all = [self.l0, self.l1, self.l2, self.l3];
        if let Some(&l) = all.iter().find(|&&l| l >= n_levels) {
            return Err(KpoError::Subspace { requested: l + 1, available: n_levels });
        }
        let alternating = parity_of(self.l0) != parity_of(self.l1)
            && parity_of(self.l0) != parity_of(self.l3)
            && parity_of(self.l1) != parity_of(self.l2);
        if !alternating {
            return Err(KpoError::InvalidParameter(format!(
                "levels {all:?} are not parity-alternating"
            )));
        }
        Ok(())
    }

    /// `(ω_l3 − ω_l0 + ω_l2 − ω_l1)/2`, midway between the two lines.
    pub fn center<T: Real>(&self, c: &CouplingMatrices<T>) -> T {
        (c.transition_frequency(self.l0, self.l3) + c.transition_frequency(self.l1, self.l2)) * lit(0.5)
    }
}

/// Entries of the reduced two-transition system.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TwoByTwo<T: Real> {
    pub a11: Complex<T>,
    pub a12: Complex<T>,
    pub a21: Complex<T>,
    pub a22: Complex<T>,
    pub b1: Complex<T>,
    pub b2: Complex<T>,
}

impl<T: Real> TwoByTwo<T> {
    pub fn build(
        c: &CouplingMatrices<T>,
        steady: &SteadyState<T>,
        loss: &LossSpec<T>,
        omega_in_tilde: T,
        quad: TransitionQuad,
    ) -> Result<Self> {
        quad.check(c.n_levels())?;
        let kappa = loss.require_positive()?;
        let (q0, q1, q2, q3) = (quad.l0, quad.l1, quad.l2, quad.l3);
        let x = c.x();
        let y = c.y();
        let rho = steady.rho();
        let half = kappa * lit(0.5);
        let d30 = omega_in_tilde - c.transition_frequency(q0, q3);
        let d21 = omega_in_tilde - c.transition_frequency(q1, q2);
        let a11 = Complex::new(-half * (y[(q0, q0)].re + y[(q3, q3)].re), d30);
        let a22 = Complex::new(-half * (y[(q1, q1)].re + y[(q2, q2)].re), d21);
        let a12 = cr(kappa) * x[(q3, q2)] * x[(q0, q1)].conj();
        let a21 = cr(kappa) * x[(q2, q3)] * x[(q1, q0)].conj();
        let source = |n: usize, m: usize| {
            let mut s = cr(T::zero());
            for k in 0..c.n_levels() {
                s += x[(k, n)].conj() * rho[(k, m)] - x[(m, k)].conj() * rho[(n, k)];
            }
            ci(T::one()) * s
        };
        Ok(Self { a11, a12, a21, a22, b1: source(q3, q0), b2: source(q2, q1) })
    }

    pub fn determinant(&self) -> Complex<T> {
        self.a11 * self.a22 - self.a12 * self.a21
    }

    /// `(r_30, r_21)`.
    pub fn solve(&self, omega_in_tilde: T) -> Result<(Complex<T>, Complex<T>)> {
        let det = self.determinant();
        if cabs(det) == T::zero() {
            return Err(KpoError::SingularTwoByTwo { omega: to_f64(omega_in_tilde) });
        }
        Ok((
            (self.a22 * self.b1 - self.a12 * self.b2) / det,
            (self.a11 * self.b2 - self.a21 * self.b1) / det,
        ))
    }
}

/// `Γ` (and `T`) from the closed-form two-transition solution.
pub fn analytic_two_by_two<T: Real>(
    c: &CouplingMatrices<T>,
    steady: &SteadyState<T>,
    loss: &LossSpec<T>,
    probe: &ProbeSpec<T>,
    quad: TransitionQuad,
) -> Result<Coefficients<T>> {
    analytic_two_by_two_with(c, steady, loss, probe, quad, false)
}

/// As [`analytic_two_by_two`]; `suppress_cross` forces `a12 = a21 = 0`.
pub fn analytic_two_by_two_with<T: Real>(
    c: &CouplingMatrices<T>,
    steady: &SteadyState<T>,
    loss: &LossSpec<T>,
    probe: &ProbeSpec<T>,
    quad: TransitionQuad,
    suppress_cross: bool,
) -> Result<Coefficients<T>> {
    let mut sys = TwoByTwo::build(c, steady, loss, probe.omega_in_tilde, quad)?;
    if suppress_cross {
        sys.a12 = cr(T::zero());
        sys.a21 = cr(T::zero());
    }
    let (r30, r21) = sys.solve(probe.omega_in_tilde)?;
    let x = c.x();
    let sum = x[(quad.l0, quad.l3)] * r30 + x[(quad.l1, quad.l2)] * r21;
    Ok(Coefficients::from_sum(sum, loss.kappa_ex, probe.measurement))
}

/// Large-pump limit `Γ = 1 + κ_ex/(iΔ̃ − κ/2)`, or `Γ = κ_ex/(2(iΔ̃ − κ/2))`
/// for transmission, with `Δ̃` measured from [`TransitionQuad::center`].
pub fn analytic_large_pump<T: Real>(
    c: &CouplingMatrices<T>,
    loss: &LossSpec<T>,
    probe: &ProbeSpec<T>,
    quad: TransitionQuad,
) -> Result<Coefficients<T>> {
    quad.check(c.n_levels())?;
    let kappa = loss.require_positive()?;
    let detuning = probe.omega_in_tilde - quad.center(c);
    Ok(single_pole(detuning, kappa, loss.kappa_ex, probe))
}

/// Degenerate large-pump result with the cross terms dropped:
/// `Γ′ = 1 + κ_ex/(iΔ̃ − κ(2α² + 1)/2)` with `α² = p/K`.
pub fn gamma_prime<T: Real>(
    c: &CouplingMatrices<T>,
    loss: &LossSpec<T>,
    probe: &ProbeSpec<T>,
    quad: TransitionQuad,
    alpha_squared: T,
) -> Result<Coefficients<T>> {
    quad.check(c.n_levels())?;
    let kappa = loss.require_positive()?;
    let detuning = probe.omega_in_tilde - quad.center(c);
    let width = kappa * (lit::<T>(2.0) * alpha_squared + T::one());
    Ok(single_pole(detuning, width, loss.kappa_ex, probe))
}

/// A linear resonator line `S = i/(iΔ − width/2)`.
fn single_pole<T: Real>(detuning: T, width: T, kappa_ex: T, probe: &ProbeSpec<T>) -> Coefficients<T> {
    let sum = ci(T::one()) / Complex::new(-width * lit(0.5), detuning);
    Coefficients::from_sum(sum, kappa_ex, probe.measurement)
}

/// Effective `(κ̃_ex, κ̃_int)` of a line, plus its pole shift from the bare
/// transition frequency.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NominalRates<T: Real> {
    pub kappa_ex: T,
    pub kappa_int: T,
    pub shift: T,
}

impl<T: Real> NominalRates<T> {
    pub fn kappa_tot(&self) -> T {
        self.kappa_ex + self.kappa_int
    }
}

/// Single transition `m → n`: `κ̃_ex = κ_ex|X_mn|²(ρ_mm − ρ_nn)`,
/// `κ̃_int = κ(Y_mm + Y_nn) − κ̃_ex`.
pub fn nominal_loss_rates<T: Real>(
    c: &CouplingMatrices<T>,
    steady: &SteadyState<T>,
    loss: &LossSpec<T>,
    m: usize,
    n: usize,
) -> Result<NominalRates<T>> {
    let size = c.n_levels();
    if m >= size || n >= size {
        return Err(KpoError::Subspace { requested: m.max(n) + 1, available: size });
    }
    let x = c.x()[(m, n)];
    let weight = x.norm_sqr() * (steady.population(m) - steady.population(n));
    let ysum = c.y()[(m, m)].re + c.y()[(n, n)].re;
    // κ̃_int = κ(Y_mm + Y_nn) − κ̃_ex, grouped so the linear-resonator case
    // returns κ_int without cancellation
    Ok(NominalRates {
        kappa_ex: loss.kappa_ex * weight,
        kappa_int: loss.kappa_int * ysum + loss.kappa_ex * (ysum - weight),
        shift: T::zero(),
    })
}

/// Two interfering transitions matched to one resonator pole.
///
/// With `u = (X_03, X_12)`, `v = (X*_03(ρ_00 − ρ_33), X*_12(ρ_11 − ρ_22))`
/// and `K` the `Δ`-free part of the 2×2 matrix, the line is read off as
/// `κ̃_ex = κ_ex uᵀv` and `λ = uᵀKv / uᵀv`, `κ̃_tot = −2 Re λ`. For a single
/// transition this reduces to [`nominal_loss_rates`].
pub fn nominal_loss_rates_quad<T: Real>(
    c: &CouplingMatrices<T>,
    steady: &SteadyState<T>,
    loss: &LossSpec<T>,
    quad: TransitionQuad,
) -> Result<NominalRates<T>> {
    let sys = TwoByTwo::build(c, steady, loss, T::zero(), quad)?;
    let x = c.x();
    let u1 = x[(quad.l0, quad.l3)];
    let u2 = x[(quad.l1, quad.l2)];
    let v1 = u1.conj() * cr(steady.population(quad.l0) - steady.population(quad.l3));
    let v2 = u2.conj() * cr(steady.population(quad.l1) - steady.population(quad.l2));
    let k11 = cr(sys.a11.re);
    let k22 = cr(sys.a22.re);
    let uv = u1 * v1 + u2 * v2;
    if cabs(uv) == T::zero() {
        return Err(KpoError::InvalidParameter("quadruple carries no population difference".into()));
    }
    let ukv = u1 * (k11 * v1 + sys.a12 * v2) + u2 * (sys.a21 * v1 + k22 * v2);
    let lambda = ukv / uv;
    let kappa_ex = loss.kappa_ex * uv.re;
    let total = -lit::<T>(2.0) * lambda.re;
    Ok(NominalRates { kappa_ex, kappa_int: total - kappa_ex, shift: lambda.im })
}

/// Idealised large-pump basis built from displaced Fock states:
/// `|0̃⟩, |1̃⟩ ∝ D(α)|0⟩ ± D(−α)|0⟩` and `|2̃⟩, |3̃⟩ ∝ D(α)|1⟩ ∓ D(−α)|1⟩`,
/// with the supplied eigenfrequencies.
pub fn cat_basis<T: Real>(alpha: T, dim: usize, energies: [T; 4]) -> Result<CouplingMatrices<T>> {
    let plus = displacement(cr(alpha), dim)?;
    let minus = displacement(cr(-alpha), dim)?;
    let col = |d: &crate::fock::FockOperator<T>, n: usize| d.matrix().column(n).into_owned();
    let g_p = col(&plus, 0);
    let g_m = col(&minus, 0);
    let e_p = col(&plus, 1);
    let e_m = col(&minus, 1);
    let states = [&g_p + &g_m, &g_p - &g_m, &e_p - &e_m, &e_p + &e_m];
    let mut v = CMatrix::zeros(dim, 4);
    for (k, s) in states.iter().enumerate() {
        let norm = s.norm();
        v.set_column(k, &(s / cr(norm)));
    }
    let a = annihilation::<T>(dim)?;
    let nop = number::<T>(dim)?;
    let vd = dagger(&v);
    let x = &vd * a.matrix() * &v;
    let y = &vd * nop.matrix() * &v;
    CouplingMatrices::from_parts(energies.to_vec(), x, y)
}
