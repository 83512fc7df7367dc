//! Multi-chunk automated program repair.
//!
//! The pipeline extracts the buggy chunks of a bug from its fix, builds a
//! buggy block for a patch generator, filters and ranks the candidate
//! fragments of every chunk, combines them into whole patches and validates
//! each patch by building and testing the patched project.

pub mod config;
pub mod blocker;
pub mod campaign;
pub mod diffchunk;
pub mod error;
pub mod genbridge;
pub mod model;
pub mod optimizer;
pub mod syntax;
pub mod validator;
mod util;

pub use config::{validate_config, CampaignConfig};
pub use error::{Error, Result};
pub use model::*;
pub use syntax::{MiniJava, SubjectLanguage};
