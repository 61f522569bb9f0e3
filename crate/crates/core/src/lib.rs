//! Analytics engine for temporal event data from randomized trials.

pub mod agglomeration;
pub mod clustering;
pub mod data;
pub mod error;
pub mod explain;
pub mod graph;
pub mod linalg;
pub mod optim;
pub mod pipeline;
pub mod stats;

pub use error::{Error, Result};
