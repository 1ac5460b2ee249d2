//! Library side of the `anicurate` command: configuration, artifact I/O,
//! the worker and provider pools, and one function per pipeline stage.

pub mod config;
pub mod conformance;
pub mod error;
pub mod io;
pub mod pool;
pub mod stages;
