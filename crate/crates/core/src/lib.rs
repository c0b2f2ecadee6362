//! Numerical KAM workbench: Fourier-Taylor arithmetic, Arnold's quadratic iteration at a
//! single Diophantine frequency, the explicit constants of the KAM theorem, and the
//! measure bounds for the set of persistent tori.

pub mod analytic;
pub mod engine;
pub mod error;
pub mod geometry;
pub mod index;
pub mod ledger;
pub mod measure;

pub use analytic::{FourierTaylorFunction, FrequencyVector};
pub use error::{KamError, Result};
