//! Ontology-aware complex query answering with fuzzy-set concept
//! semantics and translational entity embeddings.
//!
//! The crate loads TBox/ABox data ([`kb`]), parses and answers logical
//! queries symbolically ([`query`]), scores them with learned
//! representations ([`model`]) trained by [`train`], and reports filtered
//! ranking metrics ([`eval`]).

pub mod config;
pub mod error;
pub mod eval;
pub mod fuzzy;
pub mod kb;
pub mod model;
pub mod query;
pub mod synth;
pub mod train;

pub use error::{Error, Result};
