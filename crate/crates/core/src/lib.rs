//! Quantitative rectifiability on point clouds: separated nets, dyadic cubes,
//! content-based β-numbers, multiscale sums, Reifenberg parametrizations and Ω-numbers.

pub mod beta;
pub mod choquet;
pub mod content;
pub mod cubes;
pub mod datasets;
pub mod dorronsoro;
pub mod error;
pub mod experiment;
pub mod geometry;
pub mod io;
pub mod multiscale;
pub mod nets;
pub mod planefit;
pub mod reifenberg;
pub mod stopping;
pub mod tolerance;

pub use error::{Result, TstError};
