//! Reflection and transmission spectra of two-photon and four-photon Kerr
//! parametric oscillators (KPOs) under a weak probe.
//!
//! The crate is organised bottom-up:
//!
//! * [`fock`]: truncated Fock-space operators.
//! * [`model`]: rotating-frame KPO Hamiltonians, adiabatically tracked
//!   eigensystems and the `X`/`Y` coupling matrices in the eigenbasis.
//! * [`steady`]: the probe-free Lindblad steady state in the eigenbasis.
//! * [`spectrum`]: the frequency-domain sideband solver and the
//!   reflection/transmission coefficients, including the legacy
//!   single-transition formula.
//! * [`analytic`]: closed-form two-transition interference formulas, the
//!   large-pump limit and nominal loss rates.
//! * [`diagnostics`]: structural interference and off-diagonal-influence
//!   conditions.
//! * [`oracle`]: brute-force time integration of the probe-driven master
//!   equation used to verify the frequency-domain solver.
//!
//! All numerics are generic over the real scalar type (see [`Real`]); the
//! aliases at the crate root fix it to `f64`, which is what the tolerances
//! quoted throughout the documentation assume.
//!
//! Units: every frequency and rate is an angular frequency expressed as its
//! value divided by 2π, in MHz. Time is measured in the matching unit
//! 1/(2π·MHz), so `exp(-kappa * t)` is a decay with the stored `kappa`.

pub mod analytic;
pub mod diagnostics;
pub mod error;
pub mod fock;
pub mod model;
pub mod oracle;
pub mod scalar;
pub mod spectrum;
pub mod steady;

pub use error::{KpoError, Result};
pub use scalar::{CMatrix, Real};

pub use analytic::{NominalRates, TransitionQuad};
pub use diagnostics::{InterferenceReport, InterferenceThresholds, ProbeWindow};
pub use fock::{FockOperator, HermitianMatrix};
pub use model::{CouplingMatrices, DriveKind, Eigensystem, KpoModel, TrackingOptions};
pub use oracle::{DriveSpec, OracleResponse, Trajectory};
pub use spectrum::{
    Coefficients, Measurement, Method, ProbeSpec, SidebandResponse, SpectrumContext,
    SpectrumPoint, SpectrumTrace,
};
pub use steady::{LossSpec, SteadyOptions, SteadyPath, SteadyState};

/// Complex scalar used by the `f64` aliases.
pub type C64 = nalgebra::Complex<f64>;

pub type Model = KpoModel<f64>;
pub type Eigen = Eigensystem<f64>;
pub type Couplings = CouplingMatrices<f64>;
pub type Loss = LossSpec<f64>;
pub type Steady = SteadyState<f64>;
pub type Response = SidebandResponse<f64>;
pub type Trace = SpectrumTrace<f64>;
pub type Context = SpectrumContext<f64>;
pub type Drive = DriveSpec<f64>;
