//! Spectral estimates for Schrödinger operators on compact metric graphs.

pub mod acceptance;
pub mod bounds;
pub mod cli;
pub mod fem;
pub mod io;
pub mod mesh;
pub mod metric_graph;
pub mod parallel;
pub mod potential;
pub mod random;
pub mod secular;
pub mod solver;
pub mod sweep;
pub mod trial;

use thiserror::Error;

/// Any failure surfaced by the command-line front end.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Io(#[from] io::IoError),
    #[error(transparent)]
    Solver(#[from] solver::SolverError),
    #[error(transparent)]
    Secular(#[from] secular::SecularError),
    #[error(transparent)]
    Bounds(#[from] bounds::BoundsError),
    #[error(transparent)]
    Trial(#[from] trial::TrialError),
    #[error("{0}")]
    Usage(String),
}
