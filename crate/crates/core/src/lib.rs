//! Empirical-likelihood specification tests for parametric diffusion models.

pub mod bandwidth;
pub mod bessel;
pub mod bootstrap;
pub mod commands;
pub mod el;
pub mod error;
pub mod io;
pub mod kernel;
pub mod model;
pub mod numerics;
pub mod region;
pub mod study;
