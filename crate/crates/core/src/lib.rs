//! Frequency-domain modelling of linear networks of discrete states coupled
//! to an input continuum, a monitored output continuum and optional lossy
//! side channels.
//!
//! - [`netcore`]: network description, validation and builders.
//! - [`scatter`]: exact multiport scattering matrices by dense solve.
//! - [`closedform`]: analytic reflection/transmission formulas.
//! - [`metrics`]: phase, group delay, bandwidth, dispersion, peak structure,
//!   pulse propagation and detector click probabilities.
//! - [`design`]: closed-form and numerical parameter design.
//!
//! All rates and frequencies share one angular-frequency unit.

pub mod closedform;
pub mod design;
pub mod metrics;
pub mod netcore;
mod numeric;
pub mod scatter;

pub use num_complex::Complex64;

pub use closedform::{ClosedFormError, WallisEulerCoeffs};
pub use design::{DesignError, DesignProblem, FreeParam, Param, Target, TuneReport};
pub use metrics::{MetricsError, MetricsReport, PhaseProfile, TransmissionSource, Wavepacket};
pub use netcore::{
    build_parallel, build_series, lower_hybrid, validate, HybridSpec, ManifoldCoupling, NetError, NetworkSpec,
    Port, SweepGrid, UnbalancedProfile, ValidatedNetwork, Warning,
};
pub use scatter::{ComplexMatrix, ScatterError, ScatteringResponse};
