// SPDX-License-Identifier: MIT OR Apache-2.0

//! Semantically decoupled latent steering at desk scale.

pub mod bundle;
pub mod corpus;
pub mod error;
pub mod evaluation;
pub mod forge;
pub mod linalg;
pub mod metrics;
pub mod model;
pub mod pipeline;
pub mod report;
pub mod steer;

pub use error::{Error, Result};
