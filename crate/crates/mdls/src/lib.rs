//! Multiple-double least squares: tiled QR factorization and back
//! substitution in double-double, quad-double, and octo-double arithmetic,
//! with per-stage flop accounting and a kernel-launch execution model.

pub mod backsub;
pub mod cli;
pub mod element;
pub mod error;
pub mod exec;
pub mod flop;
pub mod layout;
pub mod md;
pub mod oracle;
pub mod qr;
pub mod solver;

pub use error::{Error, Result};
