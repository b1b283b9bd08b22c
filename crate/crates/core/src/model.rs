//! Rotating-frame KPO Hamiltonians, adiabatically labelled eigensystems and
//! the coupling matrices `X_mn = ⟨φ_m|a|φ_n⟩`, `Y_mn = ⟨φ_m|a†a|φ_n⟩`.
//!
//! The Hamiltonian conserves photon-number parity, so it is diagonalized one
//! parity block at a time. Every eigenvector therefore has exactly definite
//! parity, even when states of opposite parity are degenerate (the cat-state
//! doublets at large pump).
//!
//! Adiabatic labels `|ñ⟩` are assigned by continuation from `p = 0`, where
//! `|ñ⟩ = |n⟩`: between consecutive pump values each previous eigenvector is
//! matched to the new eigenvector of the same parity with the largest
//! squared overlap. A match is accepted only if that overlap (summed over any
//! previous-point degeneracy cluster) is at least one half; otherwise the
//! step is halved, up to [`TrackingOptions::max_refinements`] times.

use std::fmt;
use std::str::FromStr;

use nalgebra::linalg::SymmetricEigen;
use nalgebra::{Complex, DMatrix};

use crate::error::{KpoError, Result};
use crate::fock::{annihilation, number, parity_of, HermitianMatrix};
use crate::scalar::{cabs, cr, dagger, lit, to_f64, CMatrix, Real};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum DriveKind {
    /// `(p/2)(a² + a†²)` pump, rotating frame at `ω_p/2`.
    TwoPhoton,
    /// `(p/2)(a⁴ + a†⁴)` pump, rotating frame at `ω_p/4`.
    FourPhoton,
}

impl DriveKind {
    /// Number of photons exchanged with the pump.
    pub fn order(self) -> usize {
        match self {
            DriveKind::TwoPhoton => 2,
            DriveKind::FourPhoton => 4,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            DriveKind::TwoPhoton => "two-photon",
            DriveKind::FourPhoton => "four-photon",
        }
    }
}

impl fmt::Display for DriveKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DriveKind {
    type Err = KpoError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "two-photon" | "two_photon" | "2" => Ok(DriveKind::TwoPhoton),
            "four-photon" | "four_photon" | "4" => Ok(DriveKind::FourPhoton),
            other => Err(KpoError::InvalidParameter(format!("unknown drive kind `{other}`"))),
        }
    }
}

/// Smallest Fock truncation accepted by [`KpoModel`].
pub const MIN_DIM: usize = 6;

/// Parameters of a KPO in its rotating frame.
#[derive(Clone, Debug, PartialEq)]
pub struct KpoModel<T: Real> {
    pub kind: DriveKind,
    /// Detuning Δ/2π in MHz.
    pub delta: T,
    /// Kerr nonlinearity K/2π in MHz, strictly positive.
    pub kerr: T,
    /// Pump amplitude p/2π in MHz, non-negative.
    pub pump: T,
    /// Fock truncation.
    pub dim: usize,
}

impl<T: Real> KpoModel<T> {
    pub fn new(kind: DriveKind, delta: T, kerr: T, pump: T, dim: usize) -> Result<Self> {
        let model = Self { kind, delta, kerr, pump, dim };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.kerr > T::zero()) {
            return Err(KpoError::InvalidParameter(format!(
                "Kerr coefficient must be positive, got {}",
                to_f64(self.kerr)
            )));
        }
        if !(self.pump >= T::zero()) {
            return Err(KpoError::InvalidParameter(format!(
                "pump amplitude must be non-negative, got {}",
                to_f64(self.pump)
            )));
        }
        if !to_f64(self.delta).is_finite() {
            return Err(KpoError::InvalidParameter("detuning must be finite".into()));
        }
        if self.dim < MIN_DIM {
            return Err(KpoError::InvalidDimension { dim: self.dim, min: MIN_DIM });
        }
        let required = self.required_dim();
        if (self.dim as f64) <= required {
            return Err(KpoError::TruncationTooSmall { dim: self.dim, required });
        }
        Ok(())
    }

    /// Lower bound the truncation must exceed. For the two-photon drive this
    /// is `2α² + 5α + 4` with `α² = p/K`, enough to hold the cat states.
    pub fn required_dim(&self) -> f64 {
        match self.kind {
            DriveKind::TwoPhoton => {
                let r = to_f64(self.pump) / to_f64(self.kerr);
                2.0 * r + 5.0 * r.sqrt() + 4.0
            }
            DriveKind::FourPhoton => (MIN_DIM - 1) as f64,
        }
    }

    pub fn with_pump(&self, pump: T) -> Result<Self> {
        Self::new(self.kind, self.delta, self.kerr, pump, self.dim)
    }

    /// Bare energy `Δn − K n(n−1)/2` of Fock state `n` (the `p = 0` spectrum).
    pub fn fock_energy(&self, n: usize) -> T {
        let n = lit::<T>(n as f64);
        self.delta * n - self.kerr * n * (n - T::one()) / lit(2.0)
    }

    /// `α² = p/K`, the coherent amplitude of the two-photon cat states.
    pub fn alpha_squared(&self) -> T {
        self.pump / self.kerr
    }
}

/// `𝓗/ħ = Δ a†a − (K/2) a†²a² + (p/2)(a^k + a†^k)` with `k` the pump order.
pub fn build_hamiltonian<T: Real>(model: &KpoModel<T>) -> Result<HermitianMatrix<T>> {
    model.validate()?;
    let dim = model.dim;
    let k = model.kind.order();
    let half = lit::<T>(0.5);
    let mut h = CMatrix::zeros(dim, dim);
    for n in 0..dim {
        h[(n, n)] = cr(model.fock_energy(n));
    }
    for n in 0..dim.saturating_sub(k) {
        // ⟨n|a^k|n+k⟩ = √((n+1)(n+2)…(n+k))
        let amp = (1..=k).fold(T::one(), |acc, j| acc * lit((n + j) as f64)).sqrt();
        let v = cr(half * model.pump * amp);
        h[(n, n + k)] = v;
        h[(n + k, n)] = v;
    }
    HermitianMatrix::new(h)
}

/// Eigenvalues and eigenvectors at one pump value, ordered by adiabatic label.
#[derive(Clone, Debug)]
pub struct Eigensystem<T: Real> {
    pump: T,
    energies: Vec<T>,
    vectors: CMatrix<T>,
    labels: Vec<usize>,
}

impl<T: Real> Eigensystem<T> {
    pub fn pump(&self) -> T {
        self.pump
    }

    pub fn n_levels(&self) -> usize {
        self.energies.len()
    }

    pub fn dim(&self) -> usize {
        self.vectors.nrows()
    }

    /// Eigenfrequencies ω_ñ, indexed by label.
    pub fn energies(&self) -> &[T] {
        &self.energies
    }

    pub fn energy(&self, label: usize) -> T {
        self.energies[label]
    }

    /// Fock-basis eigenvectors, column `ñ` holds `|ñ⟩`.
    pub fn vectors(&self) -> &CMatrix<T> {
        &self.vectors
    }

    /// Parity of `|ñ⟩`, always `(−1)^ñ`.
    pub fn parity(&self, label: usize) -> i8 {
        parity_of(label)
    }

    pub fn parities(&self) -> Vec<i8> {
        (0..self.n_levels()).map(parity_of).collect()
    }

    /// Permutation from adiabatic label to the column index of the plain
    /// ascending-energy eigendecomposition.
    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    /// `V_k† ρ V_k` for a Fock-basis operator, restricted to the first
    /// `n_keep` labels.
    pub fn to_eigenbasis(&self, fock: &CMatrix<T>, n_keep: usize) -> Result<CMatrix<T>> {
        let v = self.retained(n_keep)?;
        Ok(dagger(&v) * fock * v)
    }

    fn retained(&self, n_keep: usize) -> Result<CMatrix<T>> {
        if n_keep > self.n_levels() {
            return Err(KpoError::Subspace { requested: n_keep, available: self.n_levels() });
        }
        Ok(self.vectors.columns(0, n_keep).into_owned())
    }

    /// The unperturbed system at `p = 0`: Fock states with labels `ñ = n`.
    pub fn fock(model: &KpoModel<T>) -> Result<Self> {
        let model = model.with_pump(T::zero())?;
        let energies: Vec<T> = (0..model.dim).map(|n| model.fock_energy(n)).collect();
        let labels = ascending_ranks(&energies);
        Ok(Self {
            pump: T::zero(),
            energies,
            vectors: CMatrix::identity(model.dim, model.dim),
            labels,
        })
    }
}

/// Rank of every entry in ascending order, ties broken by index.
fn ascending_ranks<T: Real>(values: &[T]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| {
        values[i].partial_cmp(&values[j]).unwrap_or(std::cmp::Ordering::Equal).then(i.cmp(&j))
    });
    let mut rank = vec![0; values.len()];
    for (r, &i) in order.iter().enumerate() {
        rank[i] = r;
    }
    rank
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrackingOptions {
    /// Acceptance gate on the best squared overlap.
    pub min_overlap: f64,
    /// Maximum number of step halvings between two grid points.
    pub max_refinements: u32,
    /// Only labels below this bound are subject to the overlap gate; the
    /// highest states sit at the truncation edge and carry no physics.
    /// `None` gates every label.
    pub gated_levels: Option<usize>,
    /// Previous-point levels within `tol · (1 + max|ω|)` of each other are
    /// treated as one degenerate cluster by the gate.
    pub degeneracy_tol: f64,
    /// Number of equal pump steps used to ramp from `p = 0` to a requested
    /// pump by [`eigensystem_at`] and [`eigensystems_at`].
    pub ramp_steps: usize,
}

impl Default for TrackingOptions {
    fn default() -> Self {
        Self {
            min_overlap: 0.5,
            max_refinements: 10,
            gated_levels: Some(24),
            degeneracy_tol: 1e-9,
            ramp_steps: 64,
        }
    }
}

/// Diagonalizes `model` along an ascending pump grid starting at zero and
/// returns one labelled eigensystem per grid point.
pub fn diagonalize_tracked<T: Real>(
    model: &KpoModel<T>,
    pump_grid: &[T],
) -> Result<Vec<Eigensystem<T>>> {
    diagonalize_tracked_with(model, pump_grid, &TrackingOptions::default())
}

pub fn diagonalize_tracked_with<T: Real>(
    model: &KpoModel<T>,
    pump_grid: &[T],
    opts: &TrackingOptions,
) -> Result<Vec<Eigensystem<T>>> {
    let Some(&first) = pump_grid.first() else {
        return Err(KpoError::InvalidParameter("empty pump grid".into()));
    };
    if first != T::zero() {
        return Err(KpoError::InvalidParameter("pump grid must start at zero".into()));
    }
    if pump_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(KpoError::InvalidParameter("pump grid must be strictly ascending".into()));
    }
    // Validate the largest pump up front so truncation errors name it.
    model.with_pump(pump_grid[pump_grid.len() - 1])?;

    let mut out = Vec::with_capacity(pump_grid.len());
    let mut current = Eigensystem::fock(model)?;
    out.push(current.clone());
    for &p in &pump_grid[1..] {
        current = advance(model, &current, p, 0, opts)?;
        out.push(current.clone());
    }
    Ok(out)
}

/// Tracked eigensystem at `model.pump`, ramping from zero in
/// `opts.ramp_steps` equal steps.
pub fn eigensystem_at<T: Real>(model: &KpoModel<T>) -> Result<Eigensystem<T>> {
    let mut v = eigensystems_at(model, &[model.pump], &TrackingOptions::default())?;
    Ok(v.remove(0))
}

/// Tracked eigensystems at arbitrary non-negative pump values (any order).
/// A shared ramp from zero is inserted so that no step exceeds
/// `max(p) / ramp_steps`.
pub fn eigensystems_at<T: Real>(
    model: &KpoModel<T>,
    pumps: &[T],
    opts: &TrackingOptions,
) -> Result<Vec<Eigensystem<T>>> {
    if pumps.is_empty() {
        return Ok(Vec::new());
    }
    if pumps.iter().any(|p| !(*p >= T::zero())) {
        return Err(KpoError::InvalidParameter("pump values must be non-negative".into()));
    }
    let mut sorted: Vec<T> = pumps.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    sorted.dedup();
    let p_max = sorted[sorted.len() - 1];
    let max_step = p_max / lit((opts.ramp_steps.max(1)) as f64);

    let mut grid = vec![T::zero()];
    for &p in &sorted {
        let last = grid[grid.len() - 1];
        if p <= last {
            continue;
        }
        let gap = p - last;
        let n = if max_step > T::zero() {
            to_f64(gap / max_step).ceil().max(1.0) as usize
        } else {
            1
        };
        for j in 1..n {
            grid.push(last + gap * lit(j as f64 / n as f64));
        }
        grid.push(p);
    }
    let systems = diagonalize_tracked_with(model, &grid, opts)?;
    pumps
        .iter()
        .map(|p| {
            let idx = grid.iter().position(|g| g == p).expect("pump present in grid");
            Ok(systems[idx].clone())
        })
        .collect()
}

fn advance<T: Real>(
    model: &KpoModel<T>,
    prev: &Eigensystem<T>,
    pump: T,
    depth: u32,
    opts: &TrackingOptions,
) -> Result<Eigensystem<T>> {
    match step(model, prev, pump, opts)? {
        Ok(sys) => Ok(sys),
        Err((label, overlap)) => {
            if depth >= opts.max_refinements {
                return Err(KpoError::TrackingFailure { pump: to_f64(pump), label, overlap });
            }
            let mid = (prev.pump + pump) / lit(2.0);
            let half = advance(model, prev, mid, depth + 1, opts)?;
            advance(model, &half, pump, depth + 1, opts)
        }
    }
}

/// Inner result: `Err((label, overlap))` signals a gate failure that may be
/// cured by refinement; outer errors are not recoverable.
#[allow(clippy::type_complexity)]
fn step<T: Real>(
    model: &KpoModel<T>,
    prev: &Eigensystem<T>,
    pump: T,
    opts: &TrackingOptions,
) -> Result<std::result::Result<Eigensystem<T>, (usize, f64)>> {
    let h = build_hamiltonian(&model.with_pump(pump)?)?;
    let dim = model.dim;
    let mut energies = vec![T::zero(); dim];
    let mut vectors = CMatrix::zeros(dim, dim);
    let scale = prev.energies.iter().fold(T::one(), |m, e| m.max(e.abs()) );
    let deg_tol = lit::<T>(opts.degeneracy_tol) * (T::one() + scale);
    let gated = opts.gated_levels.unwrap_or(dim).min(dim);

    for sector in 0..2usize {
        let idx: Vec<usize> = (sector..dim).step_by(2).collect();
        let (vals, vecs) = sector_eigen(h.matrix(), &idx);
        let m = idx.len();
        // labels of this parity coincide with the Fock indices `idx`
        let mut overlap = DMatrix::<T>::zeros(m, m);
        let mut inner = CMatrix::<T>::zeros(m, m);
        for (i, &label) in idx.iter().enumerate() {
            for j in 0..m {
                let mut acc = Complex::new(T::zero(), T::zero());
                for (r, &fock) in idx.iter().enumerate() {
                    acc += prev.vectors[(fock, label)].conj() * vecs[(r, j)];
                }
                inner[(i, j)] = acc;
                overlap[(i, j)] = acc.norm_sqr();
            }
        }
        let assignment = greedy_match(&overlap);

        for (i, &label) in idx.iter().enumerate() {
            let j = assignment[i];
            if label < gated {
                let e_prev = prev.energies[label];
                let cluster_overlap = idx
                    .iter()
                    .enumerate()
                    .filter(|(_, &l)| (prev.energies[l] - e_prev).abs() <= deg_tol)
                    .fold(T::zero(), |acc, (i2, _)| acc + overlap[(i2, j)]);
                if cluster_overlap < lit(opts.min_overlap) {
                    return Ok(Err((label, to_f64(cluster_overlap))));
                }
            }
            // continuity of phase: ⟨prev|new⟩ real and positive
            let z = inner[(i, j)];
            let phase = if cabs(z) > lit(1e-6) {
                z.conj() / cabs(z)
            } else {
                largest_component_phase(&vecs, j)
            };
            energies[label] = vals[j];
            for (r, &fock) in idx.iter().enumerate() {
                vectors[(fock, label)] = vecs[(r, j)] * phase;
            }
        }
    }
    let labels = ascending_ranks(&energies);
    Ok(Ok(Eigensystem { pump, energies, vectors, labels }))
}

fn largest_component_phase<T: Real>(vecs: &CMatrix<T>, col: usize) -> Complex<T> {
    let mut best = Complex::new(T::one(), T::zero());
    let mut best_abs = T::zero();
    for z in vecs.column(col).iter() {
        if cabs(*z) > best_abs {
            best_abs = cabs(*z);
            best = *z;
        }
    }
    if best_abs > T::zero() {
        best.conj() / best_abs
    } else {
        Complex::new(T::one(), T::zero())
    }
}

/// Greedy maximum-overlap assignment: repeatedly takes the largest remaining
/// entry. Returns `row → column`.
fn greedy_match<T: Real>(overlap: &DMatrix<T>) -> Vec<usize> {
    let n = overlap.nrows();
    let mut entries: Vec<(usize, usize)> =
        (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).collect();
    entries.sort_by(|a, b| {
        overlap[*b]
            .partial_cmp(&overlap[*a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(b))
    });
    let mut row_done = vec![false; n];
    let mut col_done = vec![false; n];
    let mut out = vec![usize::MAX; n];
    let mut left = n;
    for (i, j) in entries {
        if left == 0 {
            break;
        }
        if !row_done[i] && !col_done[j] {
            out[i] = j;
            row_done[i] = true;
            col_done[j] = true;
            left -= 1;
        }
    }
    out
}

/// Eigen-decomposition of the principal block `idx × idx`. Eigenvectors are
/// returned in block coordinates, ascending eigenvalues.
fn sector_eigen<T: Real>(h: &CMatrix<T>, idx: &[usize]) -> (Vec<T>, CMatrix<T>) {
    let m = idx.len();
    let block = CMatrix::from_fn(m, m, |i, j| h[(idx[i], idx[j])]);
    let eig = SymmetricEigen::new(block);
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].partial_cmp(&eig.eigenvalues[b]).unwrap());
    let vals = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vecs = CMatrix::from_fn(m, m, |r, c| eig.eigenvectors[(r, order[c])]);
    (vals, vecs)
}

/// Retained subspace: eigenfrequencies and the `X`, `Y` coupling matrices
/// over the first `n_keep` adiabatic labels.
#[derive(Clone, Debug)]
pub struct CouplingMatrices<T: Real> {
    energies: Vec<T>,
    x: CMatrix<T>,
    y: CMatrix<T>,
}

impl<T: Real> CouplingMatrices<T> {
    /// Assembles a subspace from explicit matrices, e.g. an idealised cat
    /// basis. Labels are taken to carry parity `(−1)^ñ`.
    pub fn from_parts(energies: Vec<T>, x: CMatrix<T>, y: CMatrix<T>) -> Result<Self> {
        let n = energies.len();
        if n < 2 {
            return Err(KpoError::InvalidDimension { dim: n, min: 2 });
        }
        if x.shape() != (n, n) || y.shape() != (n, n) {
            return Err(KpoError::InvalidParameter(format!(
                "coupling matrices must be {n}x{n}, got {:?} and {:?}",
                x.shape(),
                y.shape()
            )));
        }
        Ok(Self { energies, x, y })
    }

    pub fn n_levels(&self) -> usize {
        self.energies.len()
    }

    pub fn energies(&self) -> &[T] {
        &self.energies
    }

    pub fn x(&self) -> &CMatrix<T> {
        &self.x
    }

    pub fn y(&self) -> &CMatrix<T> {
        &self.y
    }

    pub fn parity(&self, label: usize) -> i8 {
        parity_of(label)
    }

    /// `ω_to − ω_from`, the probe frequency resonant with `|from⟩ → |to⟩`.
    pub fn transition_frequency(&self, from: usize, to: usize) -> T {
        self.energies[to] - self.energies[from]
    }

    /// Largest eigenfrequency difference within the subspace.
    pub fn frequency_spread(&self) -> T {
        let (lo, hi) = self
            .energies
            .iter()
            .fold((self.energies[0], self.energies[0]), |(lo, hi), &e| (lo.min(e), hi.max(e)));
        hi - lo
    }

    /// The first `n` levels of this subspace.
    pub fn truncated(&self, n: usize) -> Result<Self> {
        if n > self.n_levels() || n < 2 {
            return Err(KpoError::Subspace { requested: n, available: self.n_levels() });
        }
        Ok(Self {
            energies: self.energies[..n].to_vec(),
            x: self.x.view((0, 0), (n, n)).into_owned(),
            y: self.y.view((0, 0), (n, n)).into_owned(),
        })
    }
}

/// `X` and `Y` over the first `n_keep` adiabatic labels. `Y` is computed from
/// `a†a` directly, not as `X†X`, so it carries the matrix elements to the
/// discarded levels too.
pub fn coupling_matrices<T: Real>(
    eig: &Eigensystem<T>,
    n_keep: usize,
) -> Result<CouplingMatrices<T>> {
    if n_keep < 2 {
        return Err(KpoError::Subspace { requested: n_keep, available: eig.n_levels() });
    }
    let v = eig.retained(n_keep)?;
    let a = annihilation::<T>(eig.dim())?;
    let n = number::<T>(eig.dim())?;
    let vd = dagger(&v);
    let x = &vd * a.matrix() * &v;
    let y = &vd * n.matrix() * &v;
    Ok(CouplingMatrices { energies: eig.energies[..n_keep].to_vec(), x, y })
}
