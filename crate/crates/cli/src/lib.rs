//! Command-line driver and local HTTP service for the cusp-atlas toolkit.
//!
//! Both front ends render artifacts through [`ops`], so a CLI artifact and the
//! body of the matching endpoint are the same bytes.

pub mod cache;
pub mod cli;
pub mod config;
pub mod ops;
pub mod plot;
pub mod repro;
pub mod service;

use std::fmt;

/// Why an operation did not produce its artifact.
#[derive(Debug, Clone, PartialEq)]
pub enum Failure {
    /// Malformed input: bad flags, unreadable or invalid files, bad parameters.
    Usage(String),
    /// The computation ran and reported a domain error.
    Domain(cusp_atlas::Error),
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Usage(m) => write!(f, "{m}"),
            Failure::Domain(e) => write!(f, "{e}"),
        }
    }
}

impl From<cusp_atlas::Error> for Failure {
    fn from(e: cusp_atlas::Error) -> Self {
        Failure::Domain(e)
    }
}

impl Failure {
    /// JSON diagnostic body, newline-terminated like every artifact.
    pub fn diagnostic(&self) -> Vec<u8> {
        #[derive(serde::Serialize)]
        struct Usage<'a> {
            schema: &'static str,
            error: &'static str,
            message: &'a str,
        }
        let mut out = match self {
            Failure::Domain(e) => cusp_atlas::export::to_json_bytes(&e.diagnostic()),
            Failure::Usage(m) => cusp_atlas::export::to_json_bytes(&Usage { schema: cusp_atlas::export::SCHEMA, error: "USAGE", message: m }),
        }
        .expect("diagnostics serialize");
        out.push(b'\n');
        out
    }
}

pub type OpResult<T> = std::result::Result<T, Failure>;
