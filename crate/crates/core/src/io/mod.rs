//! Configuration files, protocol and checkpoint persistence, CSV exports.

pub mod checkpoint;
pub mod config;
pub mod protocol;
pub mod tables;

pub use checkpoint::Checkpoint;
pub use config::{load_config, parse_config, RunConfig};
pub use protocol::{ProtocolFile, TaskKind};
