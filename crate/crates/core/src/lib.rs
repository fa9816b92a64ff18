//! Statistics of daily log returns and of the spectra of their Hankel
//! trajectory matrices.
//!
//! The crate is organised as a pipeline:
//!
//! - [`ingest`]: price histories from CSV, plus deterministic synthetic fixtures.
//! - [`returns`]: log returns and lag autocorrelations of returns and of their magnitudes.
//! - [`empirical`]: quantiles, histograms, Gaussian KDE and Q-Q curves.
//! - [`hankel`]: trajectory matrices, FFT matrix-vector products and symmetric eigensolvers.
//! - [`rmt`]: the i.i.d. Gaussian Hankel ensemble, spacing statistics and Wigner surmises.
//! - [`cache`]: content-addressed storage for expensive spectra.

pub mod cache;
pub mod empirical;
pub mod hankel;
pub mod ingest;
pub mod returns;
pub mod rmt;
pub mod special;

pub use empirical::{DensityCurve, DensityKind, EmpiricalDistribution, QQCurve};
pub use hankel::{EigenMethod, HankelMatrix, Scaling, Spectrum};
pub use ingest::{FixtureKind, PriceSeries};
pub use returns::{AutocorrelationReport, ReturnSeries, Transform};
pub use rmt::{EnsembleSpec, SpacingSample, Surmise};
