//! Matched filters for noisy subgraph detection via graph matching.

pub mod assign;
pub mod error;
pub mod experiment;
pub mod faq;
pub mod filter;
pub mod graph;
pub mod io;
pub mod models;
pub mod oracle;
pub mod padding;
pub mod sparse;

pub use error::{Error, Result};
