//! Sideband response `r_nm = ρ_nm[−ω̃]/Ω` and the reflection/transmission
//! coefficients built from it.
//!
//! Modified theory: for every parity-off-diagonal pair `(n, m)`
//!
//! ```text
//! iΔ_nm r_nm + κ Σ X_nl X*_mk r_lk − (κ/2) Σ (Y_nk r_km + Y_km r_nk)
//!     = i Σ_k (X*_kn ρ_km − X*_mk ρ_nk),          Δ_nm = ω̃ − ω_n + ω_m,
//! ```
//!
//! solved as one dense system. Pairs of equal parity are never driven and
//! are left at zero.
//!
//! Previous theory: every pair on its own, with `ρ[0]` reduced to its
//! diagonal, `r_nm = i X*_mn (ρ_mm − ρ_nn) / (iΔ_nm − (κ/2)(Y_mm + Y_nn))`.
//!
//! Coefficients: reflection `Γ = 1 − iκ_ex Σ X_mn r_nm`; transmission
//! `Γ = −i(κ_ex/2) Σ X_mn r_nm` and `T = 1 + Γ`.

use std::fmt;
use std::str::FromStr;

use nalgebra::{Complex, DVector};
use rayon::prelude::*;

use crate::analytic::{analytic_large_pump, analytic_two_by_two, TransitionQuad};
use crate::error::{KpoError, Result};
use crate::fock::parity_of;
use crate::model::{CouplingMatrices, KpoModel};
use crate::scalar::{cabs, ci, cr, lit, to_f64, CMatrix, Real};
use crate::steady::{LossSpec, SteadyState};

/// Condition number above which a sideband system is reported singular.
pub const CONDITION_LIMIT: f64 = 1e12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Measurement {
    Reflection,
    Transmission,
}

impl Measurement {
    pub fn name(self) -> &'static str {
        match self {
            Measurement::Reflection => "reflection",
            Measurement::Transmission => "transmission",
        }
    }
}

impl fmt::Display for Measurement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Measurement {
    type Err = KpoError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "reflection" => Ok(Measurement::Reflection),
            "transmission" => Ok(Measurement::Transmission),
            other => Err(KpoError::InvalidParameter(format!("unknown measurement `{other}`"))),
        }
    }
}

/// A probe at `ω̃_in`, the offset from the rotating-frame frequency (/2π, MHz).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProbeSpec<T: Real> {
    pub omega_in_tilde: T,
    pub measurement: Measurement,
}

impl<T: Real> ProbeSpec<T> {
    pub fn reflection(omega_in_tilde: T) -> Self {
        Self { omega_in_tilde, measurement: Measurement::Reflection }
    }

    pub fn transmission(omega_in_tilde: T) -> Self {
        Self { omega_in_tilde, measurement: Measurement::Transmission }
    }
}

/// `Γ`, plus `T = 1 + Γ` for transmission.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Coefficients<T: Real> {
    pub gamma: Complex<T>,
    pub transmission: Option<Complex<T>>,
}

impl<T: Real> Coefficients<T> {
    /// Builds the coefficients from `S = Σ X_mn r_nm`.
    pub fn from_sum(sum: Complex<T>, kappa_ex: T, measurement: Measurement) -> Self {
        match measurement {
            Measurement::Reflection => Self {
                gamma: cr(T::one()) - ci(kappa_ex) * sum,
                transmission: None,
            },
            Measurement::Transmission => {
                let gamma = ci(-kappa_ex * lit(0.5)) * sum;
                Self { gamma, transmission: Some(cr(T::one()) + gamma) }
            }
        }
    }

    /// `|Γ|` for reflection, `|T|` for transmission.
    pub fn magnitude(&self) -> T {
        cabs(self.transmission.unwrap_or(self.gamma))
    }
}

/// `ρ_nm[−ω̃]/Ω` over the retained labels.
#[derive(Clone, Debug)]
pub struct SidebandResponse<T: Real> {
    r: CMatrix<T>,
    omega_in_tilde: T,
    residual: T,
    condition: Option<T>,
}

impl<T: Real> SidebandResponse<T> {
    pub fn r(&self) -> &CMatrix<T> {
        &self.r
    }

    pub fn element(&self, n: usize, m: usize) -> Complex<T> {
        self.r[(n, m)]
    }

    pub fn omega_in_tilde(&self) -> T {
        self.omega_in_tilde
    }

    /// `max |A r − b|` of the defining system; zero for closed forms.
    pub fn residual(&self) -> T {
        self.residual
    }

    /// 1-norm condition number of the system, if one was solved.
    pub fn condition(&self) -> Option<T> {
        self.condition
    }

    /// `Σ X_mn r_nm`.
    pub fn coupling_sum(&self, c: &CouplingMatrices<T>) -> Complex<T> {
        let x = c.x();
        let n = self.r.nrows();
        let mut s = cr(T::zero());
        for i in 0..n {
            for j in 0..n {
                s += x[(j, i)] * self.r[(i, j)];
            }
        }
        s
    }
}

/// Switches that reduce the modified theory toward the previous one.
#[derive(Clone, Debug, PartialEq)]
pub struct SolveOptions {
    /// Replace `ρ[0]` by its diagonal in the source term.
    pub zero_offdiag: bool,
    /// Drop every coupling between different pairs in the system matrix.
    pub suppress_interference: bool,
    pub condition_limit: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self { zero_offdiag: false, suppress_interference: false, condition_limit: CONDITION_LIMIT }
    }
}

/// `ω̃`-independent part of the sideband system over a fixed pair list.
#[derive(Clone, Debug)]
pub struct SidebandSystem<T: Real> {
    pairs: Vec<(usize, usize)>,
    base: CMatrix<T>,
    source: DVector<Complex<T>>,
    n_levels: usize,
    energies: Vec<T>,
    condition_limit: f64,
}

/// All pairs `(n, m)` with `parity(n) ≠ parity(m)`, row-major.
pub fn driven_pairs(n_levels: usize) -> Vec<(usize, usize)> {
    (0..n_levels)
        .flat_map(|i| (0..n_levels).map(move |j| (i, j)))
        .filter(|&(i, j)| parity_of(i) != parity_of(j))
        .collect()
}

impl<T: Real> SidebandSystem<T> {
    pub fn new(
        c: &CouplingMatrices<T>,
        steady: &SteadyState<T>,
        loss: &LossSpec<T>,
        opts: &SolveOptions,
    ) -> Result<Self> {
        Self::on_pairs(c, steady, loss, opts, driven_pairs(c.n_levels()))
    }

    /// System restricted to the listed pairs; every other `r_lk` is held
    /// at zero.
    pub fn on_pairs(
        c: &CouplingMatrices<T>,
        steady: &SteadyState<T>,
        loss: &LossSpec<T>,
        opts: &SolveOptions,
        pairs: Vec<(usize, usize)>,
    ) -> Result<Self> {
        let n = c.n_levels();
        if steady.n_levels() != n {
            return Err(KpoError::Subspace { requested: steady.n_levels(), available: n });
        }
        if let Some(&(i, j)) = pairs.iter().find(|&&(i, j)| i >= n || j >= n || i == j) {
            return Err(KpoError::InvalidParameter(format!("invalid sideband pair ({i}, {j})")));
        }
        let kappa = loss.require_positive()?;
        let x = c.x();
        let y = c.y();
        let k = cr(kappa);
        let half = cr(kappa * lit(0.5));
        let size = pairs.len();
        let base = CMatrix::from_fn(size, size, |row, col| {
            let (nn, m) = pairs[row];
            let (l, q) = pairs[col];
            if opts.suppress_interference && row != col {
                return cr(T::zero());
            }
            let mut v = k * x[(nn, l)] * x[(m, q)].conj();
            if q == m {
                v -= half * y[(nn, l)];
            }
            if l == nn {
                v -= half * y[(q, m)];
            }
            v
        });
        let rho = if opts.zero_offdiag {
            steady.with_zeroed_offdiag().rho().clone()
        } else {
            steady.rho().clone()
        };
        let source = DVector::from_fn(size, |row, _| {
            let (nn, m) = pairs[row];
            let mut s = cr(T::zero());
            for kk in 0..n {
                s += x[(kk, nn)].conj() * rho[(kk, m)] - x[(m, kk)].conj() * rho[(nn, kk)];
            }
            ci(T::one()) * s
        });
        Ok(Self {
            pairs,
            base,
            source,
            n_levels: n,
            energies: c.energies().to_vec(),
            condition_limit: opts.condition_limit,
        })
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    /// Full system matrix at `ω̃`.
    pub fn matrix(&self, omega_in_tilde: T) -> CMatrix<T> {
        let mut a = self.base.clone();
        for (row, &(n, m)) in self.pairs.iter().enumerate() {
            a[(row, row)] += ci(omega_in_tilde - self.energies[n] + self.energies[m]);
        }
        a
    }

    pub fn source(&self) -> &DVector<Complex<T>> {
        &self.source
    }

    pub fn solve(&self, omega_in_tilde: T) -> Result<SidebandResponse<T>> {
        let a = self.matrix(omega_in_tilde);
        let lu = a.clone().lu();
        let inv = lu.try_inverse().ok_or(KpoError::NearSingular {
            omega: to_f64(omega_in_tilde),
            condition: f64::INFINITY,
        })?;
        let condition = one_norm(&a) * one_norm(&inv);
        if !(to_f64(condition) <= self.condition_limit) {
            return Err(KpoError::NearSingular {
                omega: to_f64(omega_in_tilde),
                condition: to_f64(condition),
            });
        }
        let sol = &inv * &self.source;
        let residual = (&a * &sol - &self.source).iter().fold(T::zero(), |m, z| m.max(cabs(*z)));
        let mut r = CMatrix::zeros(self.n_levels, self.n_levels);
        for (row, &(n, m)) in self.pairs.iter().enumerate() {
            r[(n, m)] = sol[row];
        }
        Ok(SidebandResponse { r, omega_in_tilde, residual, condition: Some(condition) })
    }
}

fn one_norm<T: Real>(m: &CMatrix<T>) -> T {
    m.column_iter()
        .map(|c| c.iter().fold(T::zero(), |s, z| s + cabs(*z)))
        .fold(T::zero(), |a, b| a.max(b))
}

/// Modified-theory sideband response at one probe frequency.
pub fn solve_sideband<T: Real>(
    c: &CouplingMatrices<T>,
    steady: &SteadyState<T>,
    loss: &LossSpec<T>,
    probe: &ProbeSpec<T>,
) -> Result<SidebandResponse<T>> {
    solve_sideband_with(c, steady, loss, probe, &SolveOptions::default())
}

pub fn solve_sideband_with<T: Real>(
    c: &CouplingMatrices<T>,
    steady: &SteadyState<T>,
    loss: &LossSpec<T>,
    probe: &ProbeSpec<T>,
    opts: &SolveOptions,
) -> Result<SidebandResponse<T>> {
    SidebandSystem::new(c, steady, loss, opts)?.solve(probe.omega_in_tilde)
}

/// Modified theory restricted to the listed pairs.
pub fn solve_sideband_on_pairs<T: Real>(
    c: &CouplingMatrices<T>,
    steady: &SteadyState<T>,
    loss: &LossSpec<T>,
    probe: &ProbeSpec<T>,
    pairs: Vec<(usize, usize)>,
) -> Result<SidebandResponse<T>> {
    SidebandSystem::on_pairs(c, steady, loss, &SolveOptions::default(), pairs)?.solve(probe.omega_in_tilde)
}

/// Previous-theory closed form, every transition independent.
pub fn previous_sideband<T: Real>(
    c: &CouplingMatrices<T>,
    steady: &SteadyState<T>,
    loss: &LossSpec<T>,
    probe: &ProbeSpec<T>,
) -> Result<SidebandResponse<T>> {
    let kappa = loss.require_positive()?;
    let n = c.n_levels();
    if steady.n_levels() != n {
        return Err(KpoError::Subspace { requested: steady.n_levels(), available: n });
    }
    let x = c.x();
    let y = c.y();
    let w = c.energies();
    let half = kappa * lit(0.5);
    let mut r = CMatrix::zeros(n, n);
    for nn in 0..n {
        for m in 0..n {
            if nn == m {
                continue;
            }
            let delta = probe.omega_in_tilde - w[nn] + w[m];
            let num = ci(T::one()) * x[(m, nn)].conj() * cr(steady.population(m) - steady.population(nn));
            let den = Complex::new(-half * (y[(m, m)].re + y[(nn, nn)].re), delta);
            r[(nn, m)] = num / den;
        }
    }
    Ok(SidebandResponse { r, omega_in_tilde: probe.omega_in_tilde, residual: T::zero(), condition: None })
}

/// `Γ` (and `T`) from a sideband response.
pub fn coefficients<T: Real>(
    response: &SidebandResponse<T>,
    c: &CouplingMatrices<T>,
    loss: &LossSpec<T>,
    measurement: Measurement,
) -> Coefficients<T> {
    Coefficients::from_sum(response.coupling_sum(c), loss.kappa_ex, measurement)
}

/// Reflection `Γ = 1 − iκ_ex Σ X_mn r_nm`.
pub fn gamma_reflection<T: Real>(
    response: &SidebandResponse<T>,
    c: &CouplingMatrices<T>,
    loss: &LossSpec<T>,
) -> Complex<T> {
    coefficients(response, c, loss, Measurement::Reflection).gamma
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Modified,
    Previous,
    ModifiedZeroedOffdiag,
    Analytic2x2,
    AnalyticLargePump,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::Modified,
        Method::Previous,
        Method::ModifiedZeroedOffdiag,
        Method::Analytic2x2,
        Method::AnalyticLargePump,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Modified => "modified",
            Method::Previous => "previous",
            Method::ModifiedZeroedOffdiag => "modified-zeroed-offdiag",
            Method::Analytic2x2 => "analytic-2x2",
            Method::AnalyticLargePump => "analytic-large-pump",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = KpoError;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .iter()
            .copied()
            .find(|m| m.name() == s)
            .ok_or_else(|| KpoError::InvalidParameter(format!("unknown method `{s}`")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpectrumPoint<T: Real> {
    pub omega_in_tilde: T,
    pub gamma: Complex<T>,
    pub transmission: Option<Complex<T>>,
}

impl<T: Real> SpectrumPoint<T> {
    pub fn magnitude(&self) -> T {
        cabs(self.transmission.unwrap_or(self.gamma))
    }
}

/// One trace: a method evaluated over a probe grid.
#[derive(Clone, Debug)]
pub struct SpectrumTrace<T: Real> {
    pub method: Method,
    pub measurement: Measurement,
    pub points: Vec<SpectrumPoint<T>>,
    pub loss: LossSpec<T>,
    pub n_keep: usize,
    pub model: Option<KpoModel<T>>,
}

impl<T: Real> SpectrumTrace<T> {
    /// `|Γ|` (reflection) or `|T|` (transmission) per point.
    pub fn magnitudes(&self) -> Vec<T> {
        self.points.iter().map(|p| p.magnitude()).collect()
    }

    /// Point with the smallest magnitude.
    pub fn minimum(&self) -> Option<&SpectrumPoint<T>> {
        self.points
            .iter()
            .min_by(|a, b| a.magnitude().partial_cmp(&b.magnitude()).unwrap_or(std::cmp::Ordering::Equal))
    }

    /// Largest `|T − 1 − Γ|`; zero for reflection traces.
    pub fn transmission_identity_error(&self) -> T {
        self.points.iter().fold(T::zero(), |m, p| match p.transmission {
            Some(t) => m.max(cabs(t - cr(T::one()) - p.gamma)),
            None => m,
        })
    }
}

/// Shared read-only inputs for evaluating traces; precomputes both
/// sideband systems once.
#[derive(Clone, Debug)]
pub struct SpectrumContext<T: Real> {
    couplings: CouplingMatrices<T>,
    steady: SteadyState<T>,
    loss: LossSpec<T>,
    measurement: Measurement,
    quad: TransitionQuad,
    model: Option<KpoModel<T>>,
    full: SidebandSystem<T>,
    zeroed: SidebandSystem<T>,
}

impl<T: Real> SpectrumContext<T> {
    pub fn new(
        couplings: CouplingMatrices<T>,
        steady: SteadyState<T>,
        loss: LossSpec<T>,
        measurement: Measurement,
    ) -> Result<Self> {
        let full = SidebandSystem::new(&couplings, &steady, &loss, &SolveOptions::default())?;
        let zeroed = SidebandSystem::new(
            &couplings,
            &steady,
            &loss,
            &SolveOptions { zero_offdiag: true, ..Default::default() },
        )?;
        Ok(Self {
            couplings,
            steady,
            loss,
            measurement,
            quad: TransitionQuad::default(),
            model: None,
            full,
            zeroed,
        })
    }

    /// Levels used by the analytic methods.
    pub fn with_quad(mut self, quad: TransitionQuad) -> Self {
        self.quad = quad;
        self
    }

    /// Model recorded in produced traces.
    pub fn with_model(mut self, model: KpoModel<T>) -> Self {
        self.model = Some(model);
        self
    }

    pub fn couplings(&self) -> &CouplingMatrices<T> {
        &self.couplings
    }

    pub fn steady(&self) -> &SteadyState<T> {
        &self.steady
    }

    pub fn loss(&self) -> &LossSpec<T> {
        &self.loss
    }

    pub fn measurement(&self) -> Measurement {
        self.measurement
    }

    pub fn quad(&self) -> TransitionQuad {
        self.quad
    }

    /// Sideband response for the matrix-valued methods.
    pub fn response(&self, method: Method, omega_in_tilde: T) -> Result<SidebandResponse<T>> {
        match method {
            Method::Modified => self.full.solve(omega_in_tilde),
            Method::ModifiedZeroedOffdiag => self.zeroed.solve(omega_in_tilde),
            Method::Previous => previous_sideband(
                &self.couplings,
                &self.steady,
                &self.loss,
                &ProbeSpec { omega_in_tilde, measurement: self.measurement },
            ),
            other => Err(KpoError::InvalidParameter(format!(
                "method `{other}` has no sideband matrix"
            ))),
        }
    }

    pub fn point(&self, method: Method, omega_in_tilde: T) -> Result<SpectrumPoint<T>> {
        let probe = ProbeSpec { omega_in_tilde, measurement: self.measurement };
        let coeffs = match method {
            Method::Analytic2x2 => {
                analytic_two_by_two(&self.couplings, &self.steady, &self.loss, &probe, self.quad)?
            }
            Method::AnalyticLargePump => {
                analytic_large_pump(&self.couplings, &self.loss, &probe, self.quad)?
            }
            _ => {
                let r = self.response(method, omega_in_tilde)?;
                coefficients(&r, &self.couplings, &self.loss, self.measurement)
            }
        };
        Ok(SpectrumPoint { omega_in_tilde, gamma: coeffs.gamma, transmission: coeffs.transmission })
    }

    /// Evaluates `method` over `omegas` as a parallel map; output order
    /// follows the input.
    pub fn trace(&self, method: Method, omegas: &[T]) -> Result<SpectrumTrace<T>> {
        let points = omegas
            .par_iter()
            .map(|&w| self.point(method, w))
            .collect::<Result<Vec<_>>>()?;
        Ok(SpectrumTrace {
            method,
            measurement: self.measurement,
            points,
            loss: self.loss,
            n_keep: self.couplings.n_levels(),
            model: self.model.clone(),
        })
    }
}
