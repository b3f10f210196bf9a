//! Overland flood simulation on raster terrain.
//!
//! The crate builds a hydraulic surface model from a terrain raster and
//! classified vector features ([`dsm`]), then integrates the 2D shallow-water
//! equations on it with a well-balanced finite-volume scheme ([`solver`]).
//! [`simulation`] drives whole scenarios with spin-up, hydrograph forcing and
//! output maps; [`validation`] holds analytical benchmarks.

pub mod boundary;
pub mod cli;
pub mod dsm;
pub mod error;
pub mod kernels;
pub mod partition;
pub mod raster;
pub mod simulation;
pub mod solver;
pub mod state;
pub mod validation;

pub use error::{Error, NumericalError, Result};
pub use raster::RasterGrid;
pub use simulation::{run, Scenario};
pub use solver::{Solver, SolverOptions};
pub use state::{PhysicalParams, State};
