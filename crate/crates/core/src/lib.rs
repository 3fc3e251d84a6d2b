pub mod continuous;
pub mod discretize;
pub mod error;
pub mod experiment;
pub mod gadget;
pub mod numerics;
pub mod oracle;
pub mod recovery;
pub mod segment;
pub mod verify;

pub use error::{Error, Result};
