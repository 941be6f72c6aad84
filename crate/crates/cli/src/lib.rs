//! Batch front end for the FSIPP toolkit.

pub mod commands;
pub mod problem;
pub mod report;
pub mod schema;
