//! Fractional mean curvature flow of entire Lipschitz graphs.

pub mod curvature;
pub mod experiments;
pub mod error;
pub mod flow;
pub mod gridfield;
pub mod kernel;
pub mod quad;
pub mod selfsimilar;

pub use error::{Error, Result};
