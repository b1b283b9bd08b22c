//! Truncated Fock-space operator algebra.
//!
//! Operators are dense `dim × dim` complex matrices in the number basis
//! `|0⟩, …, |dim−1⟩`. Truncation drops the `|dim−1⟩ → |dim⟩` coupling, so
//! `[a, a†]` is the identity everywhere except the bottom-right entry.

use nalgebra::Complex;

use crate::error::{KpoError, Result};
use crate::scalar::{cr, dagger, frobenius, lit, tol, to_f64, CMatrix, Real};

/// Guard factor in the displacement truncation check `|α|² + 5|α| < dim`.
pub const TRUNCATION_GUARD_FACTOR: f64 = 5.0;

/// Relative anti-Hermitian norm accepted by [`HermitianMatrix::new`].
pub const HERMITICITY_TOL: f64 = 1e-12;

/// A dense operator on the truncated Fock space.
#[derive(Clone, Debug, PartialEq)]
pub struct FockOperator<T: Real> {
    matrix: CMatrix<T>,
}

impl<T: Real> FockOperator<T> {
    pub fn from_matrix(matrix: CMatrix<T>) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() || matrix.nrows() == 0 {
            return Err(KpoError::InvalidDimension { dim: matrix.nrows(), min: 1 });
        }
        Ok(Self { matrix })
    }

    pub fn identity(dim: usize) -> Self {
        Self { matrix: CMatrix::identity(dim, dim) }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &CMatrix<T> {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix<T> {
        self.matrix
    }

    pub fn adjoint(&self) -> Self {
        Self { matrix: dagger(&self.matrix) }
    }

    pub fn compose(&self, rhs: &Self) -> Self {
        Self { matrix: &self.matrix * &rhs.matrix }
    }

    /// `self^k` by repeated multiplication.
    pub fn power(&self, k: u32) -> Self {
        let mut out = Self::identity(self.dim());
        for _ in 0..k {
            out = out.compose(self);
        }
        out
    }

    /// Matrix element `⟨row|O|col⟩`.
    pub fn element(&self, row: usize, col: usize) -> Complex<T> {
        self.matrix[(row, col)]
    }
}

/// Truncated annihilation operator, `⟨n−1|a|n⟩ = √n`.
pub fn annihilation<T: Real>(dim: usize) -> Result<FockOperator<T>> {
    if dim < 2 {
        return Err(KpoError::InvalidDimension { dim, min: 2 });
    }
    let mut m = CMatrix::zeros(dim, dim);
    for n in 1..dim {
        m[(n - 1, n)] = cr(lit::<T>(n as f64).sqrt());
    }
    Ok(FockOperator { matrix: m })
}

/// Number operator `a†a = diag(0, 1, …, dim−1)`.
pub fn number<T: Real>(dim: usize) -> Result<FockOperator<T>> {
    if dim < 1 {
        return Err(KpoError::InvalidDimension { dim, min: 1 });
    }
    let mut m = CMatrix::zeros(dim, dim);
    for n in 0..dim {
        m[(n, n)] = cr(lit(n as f64));
    }
    Ok(FockOperator { matrix: m })
}

/// Photon-number parity `(−1)^{a†a}`.
pub fn parity<T: Real>(dim: usize) -> Result<FockOperator<T>> {
    if dim < 1 {
        return Err(KpoError::InvalidDimension { dim, min: 1 });
    }
    let mut m = CMatrix::zeros(dim, dim);
    for n in 0..dim {
        m[(n, n)] = cr(if n % 2 == 0 { T::one() } else { -T::one() });
    }
    Ok(FockOperator { matrix: m })
}

/// Parity eigenvalue `(−1)^n` of Fock state (or adiabatic label) `n`.
#[inline]
pub fn parity_of(n: usize) -> i8 {
    if n % 2 == 0 {
        1
    } else {
        -1
    }
}

/// Displacement operator `D(α) = exp(α a† − α* a)`.
///
/// Computed as a matrix exponential of the truncated generator, so the result
/// is exactly unitary only up to truncation error; the guard
/// `|α|² + 5|α| < dim` keeps that error negligible for the low columns.
pub fn displacement<T: Real>(alpha: Complex<T>, dim: usize) -> Result<FockOperator<T>> {
    displacement_with_guard(alpha, dim, TRUNCATION_GUARD_FACTOR)
}

pub fn displacement_with_guard<T: Real>(
    alpha: Complex<T>,
    dim: usize,
    guard: f64,
) -> Result<FockOperator<T>> {
    let a = annihilation::<T>(dim)?;
    let modulus = to_f64(crate::scalar::cabs(alpha));
    let required = modulus * modulus + guard * modulus;
    if required >= dim as f64 {
        return Err(KpoError::TruncationTooSmall { dim, required });
    }
    let generator = dagger(a.matrix()) * alpha - a.matrix() * alpha.conj();
    Ok(FockOperator { matrix: generator.exp() })
}

/// A matrix checked to equal its conjugate transpose.
#[derive(Clone, Debug, PartialEq)]
pub struct HermitianMatrix<T: Real> {
    matrix: CMatrix<T>,
}

impl<T: Real> HermitianMatrix<T> {
    /// Rejects matrices whose anti-Hermitian part exceeds
    /// [`HERMITICITY_TOL`] relative to the matrix norm.
    pub fn new(matrix: CMatrix<T>) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() || matrix.nrows() == 0 {
            return Err(KpoError::InvalidDimension { dim: matrix.nrows(), min: 1 });
        }
        let deviation = hermitian_deviation(&matrix);
        if deviation > tol::<T>(HERMITICITY_TOL) {
            return Err(KpoError::NotHermitian { deviation: to_f64(deviation) });
        }
        Ok(Self { matrix })
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &CMatrix<T> {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix<T> {
        self.matrix
    }
}

/// `‖A − A†‖ / (2‖A‖)`, zero for the zero matrix.
pub fn hermitian_deviation<T: Real>(m: &CMatrix<T>) -> T {
    let norm = frobenius(m);
    if norm == T::zero() {
        return T::zero();
    }
    frobenius(&(m - dagger(m))) / (norm * lit(2.0))
}
