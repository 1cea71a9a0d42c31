pub mod capacity;
pub mod convex;
pub mod error;
pub mod extraction;
pub mod harness;
pub mod model;
pub mod orchestrator;
pub mod sca;

pub use error::{Block, Error, Result};
