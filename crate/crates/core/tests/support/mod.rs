//! Shared by the core tests and the runtime crate's acceptance suite.
#![allow(dead_code)]

pub mod gen;
pub mod oracle;
