pub mod assembly;
pub mod block;
pub mod error;
pub mod harness;
pub mod krylov;
pub mod mesh;
pub mod multigrid;
pub mod report;
pub mod smoothers;
pub mod spectrum;
pub mod sparse;
pub mod verify;

pub use error::{Error, Result};
