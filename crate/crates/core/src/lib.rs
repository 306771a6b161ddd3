//! Additive approximation schemes for fitting points in `R^k` to a
//! dissimilarity matrix (plain and weighted) and for entrywise `ℓ_p`
//! rank-one approximation, built on Sherali-Adams relaxations with
//! conditioning-based rounding.

pub mod cli;
pub mod emv;
pub mod error;
pub mod grid;
pub mod instance;
pub mod io;
pub mod lp;
pub mod lra;
pub mod oracle;
pub mod pseudodist;
pub mod rounding;
pub mod wemv;

pub use error::{Error, Result};
