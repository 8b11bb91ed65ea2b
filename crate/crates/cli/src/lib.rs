//! Library surface of the lab CLI: configuration, fitting, io and the
//! command implementations, re-exported for the acceptance suite.

pub mod commands;
pub mod config;
pub mod fitting;
pub mod io;
