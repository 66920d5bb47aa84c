//! Periodic obstructions, Lyapunov data, holonomies and numerical solutions
//! of the cohomological equation `A(x) = C(fx)·C(x)⁻¹` for matrix cocycles
//! over hyperbolic toral automorphisms and subshifts of finite type.

pub mod base;
pub mod cli;
pub mod config;
pub mod cocycle;
pub mod error;
pub mod fit;
pub mod holonomy;
pub mod operator;
pub mod periodic;
pub mod report;
pub mod synth;
pub mod transfer;

pub use error::{Error, Result};
