//! Moment relaxations of polynomial and measure optimization problems.
//!
//! Problems are written as polynomial data ([`poly`]), lifted to truncated
//! moment sequences ([`moments`]), assembled into conic programs
//! ([`relaxation`], [`gmp`]) and solved by the interior-point solver in
//! [`sdp`]. [`extract`] reads minimizers back off the moment matrices.

pub mod casestudies;
pub mod extract;
pub mod moments;
pub mod parse;
pub mod poly;
pub mod problem;
pub mod relaxation;
pub mod report;
pub mod sdp;
pub mod spectra;
pub mod textfile;

pub mod gmp;

mod error;

pub use error::Error;
