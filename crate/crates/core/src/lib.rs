//! Trajectory privacy toolkit: a social-link inference attack over mobility
//! profiles, on-device sanitization operations, coreset compression, a
//! serverless deployment simulator and a budget-aware allocation optimizer.

// Negated float comparisons double as NaN rejection in validators.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod coreset;
pub mod error;
pub mod experiment;
pub mod geo;
pub mod http;
pub mod ingest;
pub mod model;
pub mod optimizer;
pub mod privacy;
pub mod profiles;
pub mod serverless;
pub mod social;
pub mod synth;

pub use error::{Error, Result};
