pub mod cli;
pub mod dqn;
pub mod error;
pub mod estimation;
pub mod interferometer;
pub mod io;
pub mod lattice;
pub mod neural_net;
pub mod tasks;

pub use error::{Error, Result};
