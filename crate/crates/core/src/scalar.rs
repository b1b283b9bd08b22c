use nalgebra::{Complex, DMatrix, RealField};
use num_traits::{FromPrimitive, ToPrimitive};

/// Real scalar the numerics are written against.
///
/// `f64` is the production instantiation. `f32` compiles and runs, but the
/// documented tolerances (1e-10 and tighter) are only meaningful in double
/// precision.
pub trait Real: RealField + Copy + FromPrimitive + ToPrimitive + Send + Sync {}

impl<T> Real for T where T: RealField + Copy + FromPrimitive + ToPrimitive + Send + Sync {}

/// Dense complex matrix.
pub type CMatrix<T> = DMatrix<Complex<T>>;

#[inline]
pub(crate) fn lit<T: Real>(x: f64) -> T {
    T::from_f64(x).expect("f64 literal representable in scalar type")
}

#[inline]
pub(crate) fn to_f64<T: Real>(x: T) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

#[inline]
pub(crate) fn cr<T: Real>(re: T) -> Complex<T> {
    Complex::new(re, T::zero())
}

#[inline]
pub(crate) fn ci<T: Real>(im: T) -> Complex<T> {
    Complex::new(T::zero(), im)
}

/// Tolerance floor that stays meaningful in low precision: `max(tol, 64 eps)`.
#[inline]
pub(crate) fn tol<T: Real>(tol: f64) -> T {
    let floor = T::default_epsilon() * lit(64.0);
    let t = lit::<T>(tol);
    if t > floor {
        t
    } else {
        floor
    }
}

/// Frobenius norm of a complex matrix.
pub(crate) fn frobenius<T: Real>(m: &CMatrix<T>) -> T {
    m.iter().fold(T::zero(), |acc, z| acc + z.norm_sqr()).sqrt()
}

/// Largest absolute entry.
pub(crate) fn max_abs<T: Real>(m: &CMatrix<T>) -> T {
    m.iter().fold(T::zero(), |acc, z| {
        let a = cabs(*z);
        if a > acc {
            a
        } else {
            acc
        }
    })
}

/// Conjugate transpose.
pub(crate) fn dagger<T: Real>(m: &CMatrix<T>) -> CMatrix<T> {
    m.adjoint()
}

/// `|z|` for a generic real scalar.
pub(crate) fn cabs<T: Real>(z: Complex<T>) -> T {
    z.norm_sqr().sqrt()
}
