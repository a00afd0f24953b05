//! Type I multivariate Pólya-Aeppli (MPA) and weighted multivariate
//! Pólya-Aeppli (WMPA) count distributions.
//!
//! The crate provides:
//!
//! - numerically stable associated Laguerre polynomial evaluation
//!   ([`laguerre`]), the building block of every PMF here;
//! - PMFs, moments, and dispersion diagnostics for both models
//!   ([`distributions`]);
//! - exact samplers for the compound constructions ([`sampling`]);
//! - method-of-moments and maximum-likelihood estimation ([`estimation`]);
//! - log-likelihoods, information criteria, expected-frequency tables, and
//!   empirical dispersion ([`model_selection`]);
//! - CSV ingestion plus two bundled benchmark datasets ([`data_io`]);
//! - a brute-force oracle recomputing the PMFs straight from the compound
//!   definitions ([`oracle`]);
//! - a seeded replication harness for estimator bias/MSE studies
//!   ([`simstudy`]).

pub mod data_io;
pub mod distributions;
pub mod estimation;
pub mod laguerre;
pub mod model_selection;
pub mod oracle;
pub mod sampling;
pub mod simstudy;

pub use distributions::{CountVector, Model, Params};
pub use estimation::{FitData, FitResult};
pub use model_selection::ContingencyTable;
