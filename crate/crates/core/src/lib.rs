//! Rabi oscillations of a two-level atom in an intense XUV field and the
//! resulting Autler–Townes structure in photoelectron spectra.
//!
//! All quantities are in atomic units unless a name says otherwise.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod deconv;
pub mod error;
pub mod focal;
pub mod ionization;
pub mod model;
pub mod oracle;
pub mod rabi;
pub mod scans;
pub mod units;

pub use error::{Error, Result};

/// Library version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
