//! Gridless recovery of multidimensional frequencies (angles of arrival)
//! from arbitrary 3D antenna arrays embedded in a virtual uniform lattice.
//!
//! The crate is organized bottom-up:
//!
//! - [`geometry`]: lattices, steering vectors, selection-type sensing
//!   matrices, embedded uniform sub-arrays and resolvable regions;
//! - [`mlt`]: multilevel Toeplitz matrices and the projections used by the
//!   solvers;
//! - [`vandermonde`]: Vandermonde decomposition of PSD multilevel Toeplitz
//!   matrices, which turns a solver output into frequencies and powers;
//! - [`solvers`]: the rank heuristic and the two atomic-norm programs;
//! - [`evalkit`]: scene sampling, error metrics, Cramér–Rao references and
//!   seeded Monte Carlo experiments;
//! - [`cli`]: file formats and subcommands behind the `gridless` binary.

pub mod cli;
pub mod evalkit;
pub mod geometry;
pub mod mlt;
pub mod solvers;
pub mod vandermonde;
