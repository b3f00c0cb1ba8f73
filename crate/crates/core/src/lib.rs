//! Magnetic Agmon metrics, Feynman–Kac–Itô heat kernels and Peierls spectra
//! for two-dimensional magnetic Schrödinger operators `H(A) = ½(−i∇ − A)²`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod fields;
pub mod geometry;
pub mod heatkernel;
pub mod quadrature;
pub mod stochastic;
pub mod agmon;
pub mod spectral;
pub mod verify;

pub use error::{Error, Result};
pub mod runner;
