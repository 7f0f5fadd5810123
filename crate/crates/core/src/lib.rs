pub mod error;
pub mod assembly;
pub mod blocktree;
pub mod clustering;
pub mod compression;
pub mod dh2core;
pub mod experiment;
pub mod directions;
pub mod geometry;
pub mod linalg;

pub use error::{Error, Result};
