//! Modularity of weighted signed networks and its random-matrix null laws.
//!
//! The crate is organised around the pipeline used to test a network for
//! community structure:
//!
//! - [`ensembles`]: seeded samplers for the GOE null, its universality
//!   relatives and the spiked alternative.
//! - [`spectral`]: symmetric eigendecomposition, the sign-vector modularity
//!   `Q` and its `A_n + B_n` split.
//! - [`distributions`]: the normal limit, the Tracy–Widom table, the
//!   finite-`n` convolution law and the Gumbel coherence law.
//! - [`hypothesis`]: the four tests and the recursive community split.
//! - [`harness`]: Monte Carlo calibration, power and correlation studies.
//! - [`netio`]: CSV ingestion and correlation-network normalisation.

pub mod distributions;
pub mod ensembles;
mod error;
pub mod harness;
pub mod hypothesis;
mod matrix;
pub mod netio;
mod seed;
pub mod spectral;

pub use error::{Error, Result};
pub use matrix::SymmetricMatrix;
pub use seed::Seed;
