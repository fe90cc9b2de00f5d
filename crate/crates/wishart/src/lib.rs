//! Spectral statistics of correlated real Wishart ensembles W = C^{1/2}X/√n.
//!
//! * [`spectrum`] — empirical spectra, correlation matrices, time-series input.
//! * [`saddle`] — macroscopic density and support from the saddle-point equation.
//! * [`outliers`] — isolated eigenvalues separated from the bulk.
//! * [`montecarlo`] — direct sampling of the ensemble.
//! * [`gapcdf`] — exact largest-eigenvalue distribution via a Pfaffian.
//! * [`localstats`] — unfolding, spacings and edge statistics.

pub mod error;
pub mod gapcdf;
pub mod localstats;
pub mod montecarlo;
pub mod outliers;
pub mod par;
pub mod quad;
pub mod saddle;
pub mod spectrum;

pub use error::{Error, Result};
pub use spectrum::{AspectRatio, CorrelationMatrix, EmpiricalSpectrum};
