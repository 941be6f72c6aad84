//! Moment/SOS relaxations for fractional semi-infinite polynomial programs.

pub mod error;
pub mod certify;
pub mod extract;
pub mod fixtures;
pub mod moment;
pub mod multiobj;
pub mod poly;
pub mod program;
pub mod relax;

pub use error::{FsippError, Result};
