//! Rigid body localization: pose, relative pose and motion estimation of
//! multi-sensor bodies from ranges, angles and range-rates.

pub mod completion;
pub mod error;
pub mod estimators;
pub mod geometry;
pub mod harness;
pub mod measurement;
pub mod placement;
pub mod rng;
pub mod stats;

pub use error::{RblError, Result};
