//! Propagation of two-mode Gaussian states through finite-bandwidth
//! non-Markovian environments.
//!
//! The pipeline is: a rectangular [`spectral::SpectralDensity`] feeds the
//! time-dependent [`coefficients`]; a [`coefficients::Channel`] turns them
//! into damping, diffusion and secular terms; [`dynamics`] applies those
//! to a twin-beam covariance matrix; [`entanglement`] extracts the
//! symplectic eigenvalue κ, the negativity and sudden-death times.
//! [`oracle`] holds independent cross-checks, and [`scenario`] plus
//! [`commands`] drive the `fbnoise` command-line tool.

pub mod coefficients;
pub mod commands;
pub mod dynamics;
pub mod entanglement;
pub mod error;
pub mod oracle;
pub mod quadrature;
pub mod scenario;
pub mod spectral;

pub use coefficients::{Channel, CoefficientTrace, EnvironmentParams, Method, SecularCoefficients};
pub use dynamics::{make_twb, ChannelSnapshot, Mode, TwbSpec, TwoModeGaussianState};
pub use entanglement::{KappaCurve, KappaSource, SymplecticInvariants};
pub use error::{Error, Result};
pub use spectral::{SpectralDensity, Temperature};
