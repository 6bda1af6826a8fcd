pub mod constraints;
pub mod envsim;
pub mod error;
pub mod exec;
pub mod groundset;
pub mod harness;
pub mod linalg;
pub mod oracle;
pub mod solver;
pub mod stgp;

pub use error::{Error, Result};
