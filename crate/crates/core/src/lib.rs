//! Vascular navigation toolkit: boundary-aware path planning over vessel
//! masks, a 2D guidewire kinematics simulator, an episodic navigation
//! environment with explicit observations and a path-following reward,
//! baseline controllers, evaluation metrics, and a JSON-lines service.

// Negated comparisons reject NaN parameters along with out-of-range ones.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod actuation;
pub mod agents;
pub mod cli;
pub mod env;
pub mod error;
pub mod geom;
pub mod metrics;
pub mod phantom;
pub mod planner;
pub mod raster;
pub mod service;
pub mod simulator;

pub use error::{Error, Result};
pub use geom::{Pixel, Point};
