//! Learning constructions whose training runtime falls as the sample budget
//! grows, and a harness that measures that runtime-versus-samples curve.

pub mod banditron;
pub mod crypto;
pub mod dnf;
pub mod error;
pub mod gf2;
pub mod harness;
pub mod kernel;
pub mod learners;
pub mod owp;
pub mod par;
pub mod preferences;
pub mod sparse_pca;
pub mod stats;

pub use error::{Error, Result};
