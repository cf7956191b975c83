//! Numerical laboratory for the truncated quintic nonlinear Schrödinger flow
//! on the torus `T = R / 2πZ`.
//!
//! The crate is organised bottom-up:
//!
//! * [`spectral`]: truncated Fourier fields, projectors, norms and the quintic
//!   nonlinearity.
//! * [`resonance`]: exact integer combinatorics of six- and four-wave
//!   resonances, symbols, lower bounds and lattice counting.
//! * [`sampler`]: Gaussian random Fourier series with a counter-based RNG.
//! * [`dynamics`]: interaction-picture RK4 integration of the truncated flow.
//! * [`functionals`]: the sextic energy functionals, modified energy and its
//!   time derivative, dyadic blocks and pairing splits.
//! * [`transport`]: Monte-Carlo checks of the density formulas for the
//!   transported Gaussian and weighted Gaussian measures.
//! * [`estimates`]: ratio probes for the deterministic multilinear estimates.
//! * [`report`] / [`cli`]: persistence and the batch front door.

pub mod cli;
pub mod dynamics;
pub mod error;
pub mod estimates;
pub mod functionals;
pub mod report;
pub mod resonance;
pub mod sampler;
pub mod spectral;
pub mod stats;
pub mod summation;
pub mod transport;

pub use error::{LabError, Result};
pub use num_complex::Complex64;
pub use spectral::{SobolevParams, TorusField};
