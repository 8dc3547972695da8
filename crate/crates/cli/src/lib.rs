//! Configuration layer of the command-line runner, exposed as a library
//! so integration tests can exercise parsing and canonicalization
//! directly.

pub mod config;
