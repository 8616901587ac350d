//! Inference on the extent of instability of nearly unstable AR(p)
//! processes, whose dominant root satisfies `ρ_n = 1 − c·n^{−α}`.
//!
//! The crate simulates such processes, estimates α from a hierarchical
//! least-squares fit, tests `H₀: α = α₀` against `H₁: α > α₀` with a
//! χ²₁-calibrated statistic, selects the smallest non-rejected value on a
//! grid, and runs Monte Carlo power studies of the whole procedure.

pub mod analysis;
pub mod distrib;
pub mod error;
pub mod estimate;
pub mod montecarlo;
pub mod process;
pub mod report;
pub mod rng;
pub(crate) mod serde_float;
pub mod spectra;
pub mod urtest;

pub use error::{Error, Result};
pub use estimate::{Interval, fit_hierarchical, fit_raw};
pub use process::{ArPath, ModelConfig, NoiseSpec, SecondaryRoots};
pub use spectra::{ArCoefficients, OrderedSpectrum, RootSign};
pub use urtest::{AlphaMax, Grid, SelectionReport, SignMode, TestReport};
