use std::path::Path;

use thiserror::Error;

use crate::extract::ExtractError;
use crate::gmp::GmpError;
use crate::moments::MomentError;
use crate::parse::ParseError;
use crate::poly::PolyError;
use crate::relaxation::RelaxError;
use crate::sdp::{SdpError, SdpStatus};
use crate::spectra::SpectraError;

/// Any failure surfaced by the library's file-level entry points.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error at {0}")]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Poly(#[from] PolyError),
    #[error(transparent)]
    Moment(#[from] MomentError),
    #[error(transparent)]
    Sdp(#[from] SdpError),
    #[error(transparent)]
    Relax(#[from] RelaxError),
    #[error(transparent)]
    Gmp(#[from] GmpError),
    #[error(transparent)]
    Extract(#[from] ExtractError),
    #[error(transparent)]
    Spectra(#[from] SpectraError),
    /// an option that does not apply to the given problem
    #[error("{0}")]
    Usage(String),
}

impl Error {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        Error::Io {
            path: path.display().to_string(),
            source,
        }
    }

    /// The solver status when the failure is a non-optimal solve rather
    /// than bad input.
    pub fn solver_status(&self) -> Option<SdpStatus> {
        match self {
            Error::Relax(RelaxError::Solver(s))
            | Error::Gmp(GmpError::Relax(RelaxError::Solver(s))) => Some(*s),
            _ => None,
        }
    }
}
