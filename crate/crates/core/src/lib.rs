pub mod channel;
pub mod cli;
pub mod error;
pub mod exec;
pub mod link;
pub mod montecarlo;
pub mod optimize;
pub mod quad;
pub mod scalar;
pub mod specfun;
pub mod table;

pub use error::{Error, Result};
pub use exec::Execution;
