//! File formats, deployment directories and experiment drivers behind the
//! `blob` command-line tool.

pub mod commands;
pub mod deployment;
pub mod error;
pub mod figures;
pub mod format;
pub mod profile;
