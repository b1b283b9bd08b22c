//! Probe-free stationary state in the adiabatic eigenbasis.
//!
//! The generator acting on `ρ` is
//! `𝓛[ρ] = −i[diag ω, ρ] + κ X ρ X† − (κ/2)(Y ρ + ρ Y)`
//! with `κ = κ_ex + κ_int`. Vectorization is row-major: `ρ_nm ↦ n·N + m`.
//!
//! Both `H` and `a` respect photon-number parity, so `𝓛` maps the
//! parity-block-diagonal sector (pairs with equal parity) onto itself. The
//! null vector is extracted inside that sector. In the full space the cat
//! doublet carries a second, slowly decaying coherence whose singular value
//! sits far below any sensible uniqueness gate, while inside the sector the
//! gap is of order `κ`.

use nalgebra::linalg::{SymmetricEigen, SVD};
use nalgebra::Complex;

use crate::error::{KpoError, Result};
use crate::fock::{annihilation, number, parity_of};
use crate::model::{build_hamiltonian, coupling_matrices, CouplingMatrices, Eigensystem, KpoModel};
use crate::scalar::{cabs, ci, cr, dagger, frobenius, lit, max_abs, to_f64, CMatrix, Real};

/// Loss rates, each `/2π` in MHz.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossSpec<T: Real> {
    pub kappa_ex: T,
    pub kappa_int: T,
}

impl<T: Real> LossSpec<T> {
    pub fn new(kappa_ex: T, kappa_int: T) -> Result<Self> {
        for (name, v) in [("kappa_ex", kappa_ex), ("kappa_int", kappa_int)] {
            if !(v >= T::zero()) || !to_f64(v).is_finite() {
                return Err(KpoError::InvalidParameter(format!(
                    "{name} must be finite and non-negative, got {}",
                    to_f64(v)
                )));
            }
        }
        Ok(Self { kappa_ex, kappa_int })
    }

    pub fn kappa_tot(&self) -> T {
        self.kappa_ex + self.kappa_int
    }

    pub(crate) fn require_positive(&self) -> Result<T> {
        let k = self.kappa_tot();
        if k > T::zero() {
            Ok(k)
        } else {
            Err(KpoError::InvalidParameter("kappa_tot must be positive".into()))
        }
    }
}

/// How a [`SteadyState`] was obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SteadyPath {
    /// Unique null vector of the Liouvillian.
    NullSpace,
    /// Uniqueness gate failed; long-time propagation from the vacuum.
    Propagated,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SteadyOptions {
    /// Second-smallest singular value must exceed `uniqueness · κ`.
    pub uniqueness: f64,
    /// Largest accepted `‖𝓛[ρ]‖_F`, absolute.
    pub residual_tol: f64,
    /// Solve inside the parity-block-diagonal sector.
    pub sector_restricted: bool,
    /// Propagate from the vacuum when the uniqueness gate fails instead of
    /// reporting a degenerate steady state.
    pub fallback: bool,
    /// Propagation horizon for the fallback, in units of `1/κ`.
    pub fallback_horizon: f64,
}

impl Default for SteadyOptions {
    fn default() -> Self {
        Self {
            uniqueness: 1e-6,
            residual_tol: 1e-8,
            sector_restricted: true,
            fallback: true,
            fallback_horizon: 400.0,
        }
    }
}

/// Zero-frequency density matrix `ρ[0]` over the retained labels.
#[derive(Clone, Debug)]
pub struct SteadyState<T: Real> {
    rho: CMatrix<T>,
    residual: T,
    gap: Option<T>,
    path: SteadyPath,
}

impl<T: Real> SteadyState<T> {
    pub fn rho(&self) -> &CMatrix<T> {
        &self.rho
    }

    pub fn element(&self, n: usize, m: usize) -> Complex<T> {
        self.rho[(n, m)]
    }

    pub fn population(&self, n: usize) -> T {
        self.rho[(n, n)].re
    }

    pub fn n_levels(&self) -> usize {
        self.rho.nrows()
    }

    /// `‖𝓛[ρ]‖_F`.
    pub fn residual(&self) -> T {
        self.residual
    }

    /// Second-smallest singular value of the Liouvillian, when the null
    /// space path ran.
    pub fn gap(&self) -> Option<T> {
        self.gap
    }

    pub fn path(&self) -> SteadyPath {
        self.path
    }

    pub fn trace(&self) -> Complex<T> {
        self.rho.trace()
    }

    /// `‖ρ − ρ†‖_F`.
    pub fn hermiticity_error(&self) -> T {
        frobenius(&(&self.rho - dagger(&self.rho)))
    }

    pub fn min_eigenvalue(&self) -> T {
        let herm = (&self.rho + dagger(&self.rho)) * cr(lit::<T>(0.5));
        SymmetricEigen::new(herm).eigenvalues.iter().fold(T::max_value().unwrap(), |m, &v| m.min(v))
    }

    /// Largest `|ρ_nm|` with `parity(n) ≠ parity(m)`.
    pub fn parity_leakage(&self) -> T {
        let n = self.n_levels();
        let mut worst = T::zero();
        for i in 0..n {
            for j in 0..n {
                if parity_of(i) != parity_of(j) {
                    worst = worst.max(cabs(self.rho[(i, j)]));
                }
            }
        }
        worst
    }

    /// Copy with every off-diagonal entry set to zero.
    pub fn with_zeroed_offdiag(&self) -> Self {
        let n = self.n_levels();
        let rho = CMatrix::from_fn(n, n, |i, j| if i == j { self.rho[(i, j)] } else { cr(T::zero()) });
        Self { rho, ..self.clone() }
    }

    /// Wraps an explicit density matrix, e.g. for reduced or idealised
    /// problems. The residual is recomputed against `couplings`.
    pub fn from_matrix(rho: CMatrix<T>, couplings: &CouplingMatrices<T>, loss: &LossSpec<T>) -> Result<Self> {
        if rho.shape() != (couplings.n_levels(), couplings.n_levels()) {
            return Err(KpoError::Subspace { requested: rho.nrows(), available: couplings.n_levels() });
        }
        let kappa = loss.require_positive()?;
        let residual = frobenius(&apply_generator(couplings, kappa, &rho));
        Ok(Self { rho, residual, gap: None, path: SteadyPath::NullSpace })
    }
}

/// `𝓛[ρ]` evaluated with matrix products.
pub fn apply_generator<T: Real>(c: &CouplingMatrices<T>, kappa: T, rho: &CMatrix<T>) -> CMatrix<T> {
    let n = c.n_levels();
    let w = c.energies();
    let half = cr(kappa * lit(0.5));
    let unitary = CMatrix::from_fn(n, n, |i, j| ci(w[j] - w[i]) * rho[(i, j)]);
    let x = c.x();
    let y = c.y();
    unitary + (x * rho * dagger(x)) * cr(kappa) - (y * rho + rho * y) * half
}

/// Full `N² × N²` Liouvillian in row-major vectorization.
pub fn liouvillian<T: Real>(c: &CouplingMatrices<T>, kappa: T) -> CMatrix<T> {
    let n = c.n_levels();
    let idx: Vec<(usize, usize)> = (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).collect();
    liouvillian_on(c, kappa, &idx)
}

/// Liouvillian restricted to the listed `(n, m)` pairs, rows and columns in
/// list order.
pub(crate) fn liouvillian_on<T: Real>(
    c: &CouplingMatrices<T>,
    kappa: T,
    pairs: &[(usize, usize)],
) -> CMatrix<T> {
    let w = c.energies();
    let x = c.x();
    let y = c.y();
    let k = cr(kappa);
    let half = cr(kappa * lit(0.5));
    let dim = pairs.len();
    CMatrix::from_fn(dim, dim, |row, col| {
        let (n, m) = pairs[row];
        let (l, q) = pairs[col];
        let mut v = k * x[(n, l)] * x[(m, q)].conj();
        if q == m {
            v -= half * y[(n, l)];
        }
        if l == n {
            v -= half * y[(q, m)];
        }
        if l == n && q == m {
            v += ci(w[m] - w[n]);
        }
        v
    })
}

fn sector_pairs(n: usize) -> Vec<(usize, usize)> {
    (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .filter(|&(i, j)| parity_of(i) == parity_of(j))
        .collect()
}

fn all_pairs(n: usize) -> Vec<(usize, usize)> {
    (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).collect()
}

/// Steady state over the first `n_keep` labels of `eig`.
pub fn steady_state<T: Real>(
    eig: &Eigensystem<T>,
    loss: &LossSpec<T>,
    n_keep: usize,
    opts: &SteadyOptions,
) -> Result<SteadyState<T>> {
    let c = coupling_matrices(eig, n_keep)?;
    steady_state_from_couplings(&c, loss, opts)
}

pub fn steady_state_from_couplings<T: Real>(
    c: &CouplingMatrices<T>,
    loss: &LossSpec<T>,
    opts: &SteadyOptions,
) -> Result<SteadyState<T>> {
    let kappa = loss.require_positive()?;
    let n = c.n_levels();
    let pairs = if opts.sector_restricted { sector_pairs(n) } else { all_pairs(n) };
    let l = liouvillian_on(c, kappa, &pairs);
    let svd = SVD::new(l, false, true);
    let v_t = svd.v_t.as_ref().expect("right singular vectors requested");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[a].partial_cmp(&svd.singular_values[b]).unwrap());
    let gap = svd.singular_values[order[1]];

    if gap <= lit::<T>(opts.uniqueness) * kappa {
        if !opts.fallback {
            let dimension = order
                .iter()
                .take_while(|&&i| svd.singular_values[i] <= lit::<T>(opts.uniqueness) * kappa)
                .count();
            return Err(KpoError::DegenerateSteadyState { dimension });
        }
        return propagate_from_vacuum(c, kappa, &pairs, opts);
    }

    let null = v_t.row(order[0]);
    let mut rho = CMatrix::zeros(n, n);
    for (k, &(i, j)) in pairs.iter().enumerate() {
        rho[(i, j)] = null[k].conj();
    }
    let rho = normalize(rho);
    finish(c, kappa, rho, Some(gap), SteadyPath::NullSpace, opts)
}

fn normalize<T: Real>(rho: CMatrix<T>) -> CMatrix<T> {
    let tr = rho.trace();
    let rho = rho / tr;
    (&rho + dagger(&rho)) * cr(lit::<T>(0.5))
}

fn finish<T: Real>(
    c: &CouplingMatrices<T>,
    kappa: T,
    rho: CMatrix<T>,
    gap: Option<T>,
    path: SteadyPath,
    opts: &SteadyOptions,
) -> Result<SteadyState<T>> {
    let residual = frobenius(&apply_generator(c, kappa, &rho));
    if !(residual <= lit(opts.residual_tol)) {
        return Err(KpoError::SteadyStateConvergence { residual: to_f64(residual) });
    }
    Ok(SteadyState { rho, residual, gap, path })
}

/// Fallback: repeatedly applies the exact one-lifetime propagator
/// `exp(𝓛/κ)` to the vacuum `|0̃⟩⟨0̃|` until the state stops changing.
fn propagate_from_vacuum<T: Real>(
    c: &CouplingMatrices<T>,
    kappa: T,
    pairs: &[(usize, usize)],
    opts: &SteadyOptions,
) -> Result<SteadyState<T>> {
    let n = c.n_levels();
    let l = liouvillian_on(c, kappa, pairs);
    let tau = T::one() / kappa;
    let prop = (l * cr(tau)).exp();
    let mut v = nalgebra::DVector::<Complex<T>>::zeros(pairs.len());
    let start = pairs.iter().position(|&p| p == (0, 0)).expect("vacuum pair retained");
    v[start] = cr(T::one());
    let steps = opts.fallback_horizon.ceil().max(1.0) as usize;
    let mut last_change = T::max_value().unwrap();
    for _ in 0..steps {
        let next = &prop * &v;
        last_change = (&next - &v).norm();
        v = next;
        if last_change <= lit(1e-14) {
            break;
        }
    }
    let mut rho = CMatrix::zeros(n, n);
    for (k, &(i, j)) in pairs.iter().enumerate() {
        rho[(i, j)] = v[k];
    }
    let rho = normalize(rho);
    let residual = frobenius(&apply_generator(c, kappa, &rho));
    if !(residual <= lit(opts.residual_tol)) {
        return Err(KpoError::SteadyStateConvergence { residual: to_f64(residual.max(last_change)) });
    }
    Ok(SteadyState { rho, residual, gap: None, path: SteadyPath::Propagated })
}

/// Steady state of the untruncated Fock-space generator, `dim² / 2` sector
/// unknowns. Returned in the Fock basis.
pub fn steady_state_fock<T: Real>(model: &KpoModel<T>, loss: &LossSpec<T>) -> Result<CMatrix<T>> {
    let kappa = loss.require_positive()?;
    let h = build_hamiltonian(model)?;
    let dim = model.dim;
    let a = annihilation::<T>(dim)?.into_matrix();
    let nop = number::<T>(dim)?.into_matrix();
    let pairs = sector_pairs(dim);
    let hm = h.matrix();
    let k = cr(kappa);
    let half = cr(kappa * lit(0.5));
    let size = pairs.len();
    // dρ = −i(Hρ − ρH) + κ aρa† − κ/2 (Nρ + ρN)
    let l = CMatrix::from_fn(size, size, |row, col| {
        let (n, m) = pairs[row];
        let (p, q) = pairs[col];
        let mut v = k * a[(n, p)] * a[(m, q)].conj();
        if q == m {
            v += ci(-T::one()) * hm[(n, p)] - half * nop[(n, p)];
        }
        if p == n {
            v += ci(T::one()) * hm[(q, m)] - half * nop[(q, m)];
        }
        v
    });
    let svd = SVD::new(l, false, true);
    let v_t = svd.v_t.as_ref().expect("right singular vectors requested");
    let imin = svd
        .singular_values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .map(|(i, _)| i)
        .unwrap();
    let mut rho = CMatrix::zeros(dim, dim);
    for (idx, &(i, j)) in pairs.iter().enumerate() {
        rho[(i, j)] = v_t[(imin, idx)].conj();
    }
    Ok(normalize(rho))
}

/// Largest elementwise change of `ρ[0]` over the first `n_keep` labels when
/// the subspace grows by `extra` levels. `None` when `eig` does not hold
/// enough levels.
pub fn truncation_diagnostic<T: Real>(
    eig: &Eigensystem<T>,
    loss: &LossSpec<T>,
    n_keep: usize,
    extra: usize,
    opts: &SteadyOptions,
) -> Result<Option<T>> {
    if n_keep + extra > eig.n_levels() {
        return Ok(None);
    }
    let base = steady_state(eig, loss, n_keep, opts)?;
    let wide = steady_state(eig, loss, n_keep + extra, opts)?;
    let sub = wide.rho.view((0, 0), (n_keep, n_keep)).into_owned();
    Ok(Some(max_abs(&(sub - base.rho))))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{eigensystem_at, DriveKind};

    fn loss() -> LossSpec<f64> {
        LossSpec::new(1.0, 0.45).unwrap()
    }

    #[test]
    fn loss_validation() {
        assert!(LossSpec::new(-1.0, 0.0).is_err());
        assert!(LossSpec::new(0.0, f64::NAN).is_err());
        let z = LossSpec::new(0.0, 0.0).unwrap();
        assert!(z.require_positive().is_err());
        assert_eq!(loss().kappa_tot(), 1.45);
    }

    #[test]
    fn vacuum_at_zero_pump() {
        let m = KpoModel::<f64>::new(DriveKind::TwoPhoton, 3.0, 17.0, 0.0, 12).unwrap();
        let eig = Eigensystem::fock(&m).unwrap();
        let s = steady_state(&eig, &loss(), 8, &SteadyOptions::default()).unwrap();
        assert!((s.population(0) - 1.0).abs() < 1e-12);
        assert!(s.residual() < 1e-12);
        assert_eq!(s.path(), SteadyPath::NullSpace);
    }

    #[test]
    fn matrix_and_kron_generators_agree() {
        let m = KpoModel::<f64>::new(DriveKind::TwoPhoton, 0.0, 17.0, 40.0, 30).unwrap();
        let eig = eigensystem_at(&m).unwrap();
        let c = coupling_matrices(&eig, 6).unwrap();
        let rho = CMatrix::from_fn(6, 6, |i, j| Complex::new((i + 2 * j) as f64 * 0.1, i as f64 - j as f64));
        let direct = apply_generator(&c, 1.45, &rho);
        let l = liouvillian(&c, 1.45);
        let v = nalgebra::DVector::from_iterator(36, (0..6).flat_map(|i| (0..6).map(move |j| (i, j))).map(|(i, j)| rho[(i, j)]));
        let lv = l * v;
        for i in 0..6 {
            for j in 0..6 {
                assert!((lv[i * 6 + j] - direct[(i, j)]).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn large_pump_cat_mixture() {
        let m = KpoModel::<f64>::new(DriveKind::TwoPhoton, 0.0, 17.0, 100.0, 40).unwrap();
        let eig = eigensystem_at(&m).unwrap();
        let s = steady_state(&eig, &loss(), 14, &SteadyOptions::default()).unwrap();
        assert!((s.population(0) - 0.5).abs() < 0.02);
        assert!((s.population(1) - 0.5).abs() < 0.02);
        assert!((s.trace().re - 1.0).abs() < 1e-10);
        assert!(s.hermiticity_error() < 1e-10);
        assert!(s.residual() < 1e-10);
        assert!(s.min_eigenvalue() > -1e-8);
        assert_eq!(s.parity_leakage(), 0.0);
    }

    #[test]
    fn full_space_gate_detects_cat_coherence() {
        let m = KpoModel::<f64>::new(DriveKind::TwoPhoton, 0.0, 17.0, 100.0, 40).unwrap();
        let eig = eigensystem_at(&m).unwrap();
        let opts = SteadyOptions { sector_restricted: false, fallback: false, ..Default::default() };
        assert!(matches!(
            steady_state(&eig, &loss(), 14, &opts),
            Err(KpoError::DegenerateSteadyState { .. })
        ));
    }

    #[test]
    fn fallback_matches_null_space() {
        let m = KpoModel::<f64>::new(DriveKind::TwoPhoton, 0.0, 17.0, 30.0, 30).unwrap();
        let eig = eigensystem_at(&m).unwrap();
        let c = coupling_matrices(&eig, 10).unwrap();
        let k = loss().kappa_tot();
        let opts = SteadyOptions::default();
        let direct = steady_state_from_couplings(&c, &loss(), &opts).unwrap();
        let prop = propagate_from_vacuum(&c, k, &sector_pairs(10), &opts).unwrap();
        assert_eq!(prop.path(), SteadyPath::Propagated);
        assert!(max_abs(&(prop.rho() - direct.rho())) < 1e-8);
    }

    #[test]
    fn fock_basis_solution_rotates_onto_eigenbasis_solution() {
        let m = KpoModel::<f64>::new(DriveKind::TwoPhoton, 0.0, 17.0, 40.0, 20).unwrap();
        let eig = eigensystem_at(&m).unwrap();
        let s = steady_state(&eig, &loss(), 20, &SteadyOptions::default()).unwrap();
        let fock = steady_state_fock(&m, &loss()).unwrap();
        let rotated = eig.to_eigenbasis(&fock, 20).unwrap();
        assert!(max_abs(&(rotated - s.rho())) < 1e-8);
    }

    #[test]
    fn truncation_diagnostic_is_small_for_cat_states() {
        let m = KpoModel::<f64>::new(DriveKind::TwoPhoton, 0.0, 17.0, 100.0, 40).unwrap();
        let eig = eigensystem_at(&m).unwrap();
        let d = truncation_diagnostic(&eig, &loss(), 14, 4, &SteadyOptions::default()).unwrap().unwrap();
        assert!(d < 1e-6, "{d}");
        assert!(truncation_diagnostic(&eig, &loss(), 38, 4, &SteadyOptions::default()).unwrap().is_none());
    }
}
