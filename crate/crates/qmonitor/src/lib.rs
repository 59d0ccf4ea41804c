//! Numerical toolkit for continuously monitored open quantum systems.
//!
//! The library models measurement through effect (Kraus) operators and the
//! POVM elements they generate, evolves density operators under Lindblad and
//! monitoring master equations (forward and backward in time), unravels
//! monitored dynamics into quantum-jump trajectories, and provides a set of
//! causality diagnostics: collapse-time invariance scans, forward/reversed
//! bias audits, and retrodictive energy-gain profiles.

pub mod causality;
pub mod cli;
pub mod error;
pub mod evolution;
pub mod linalg;
pub mod models;
pub mod operators;
pub mod rng;
pub mod selfcheck;
pub mod trajectories;

pub use error::QmError;

/// Dense complex matrix used for every operator in the library.
pub type CMat = nalgebra::DMatrix<num_complex::Complex64>;
pub type C64 = num_complex::Complex64;
