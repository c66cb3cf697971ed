//! File formats, synthetic data, held-out prediction and the command-line
//! front end for generalized CP decomposition. The numerical core lives in
//! [`gcp_core`], re-exported here as [`core`].

pub mod cli;
pub mod error;
pub mod gradcheck;
pub mod holdout;
pub mod io;
pub mod synth;

pub use error::{Error, Result};
pub use gcp_core as core;
