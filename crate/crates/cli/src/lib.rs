//! Configuration, artifact writers and figures behind the `boltzdg` binary.

pub mod config;
pub mod output;
pub mod plot;
