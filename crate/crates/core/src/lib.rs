//! Quantum action of 1-D and 2-D anharmonic oscillators at finite temperature.
//!
//! The pipeline: exact Euclidean amplitudes from a grid Schrödinger oracle
//! ([`oracle`]), extremal Euclidean paths and their action ([`trajectory`]),
//! a least-squares fit of a classical-form action to the amplitudes
//! ([`fit`]), the zero-temperature closed forms ([`analytic`]) and Poincaré
//! sections of the classical and fitted actions ([`chaos`]).

pub mod analytic;
pub mod chaos;
pub mod config;
pub mod error;
pub mod fit;
pub mod grid;
pub mod io;
pub mod oracle;
pub mod potential;
pub mod trajectory;
pub mod tridiag;

pub use error::{Error, Result};
pub use grid::Grid;
pub use potential::{ActionSpec, Potential, Potential1D, Potential2D, TimeExtent};
