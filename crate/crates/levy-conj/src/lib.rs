//! Numerical toolkit for infinitely divisible laws given by Lévy–Khintchine
//! triplets: the inversion `μ ↦ μ′`, stochastic integral mappings `Λ_h` and
//! their conjugates, and membership tests for the associated classes.

pub mod error;
pub mod charfn;
pub mod classes;
pub mod cli;
pub mod expr;
pub mod inversion;
pub mod io;
pub mod kernel;
pub mod mapping;
pub mod measure;
pub mod par;
pub mod quad;
pub mod simulate;
pub mod special;

pub use error::{LevyError, Result};
