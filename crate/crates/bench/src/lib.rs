//! Scenario registry, verification records, report emission and the
//! command line front end for combworks.

pub mod cli;
pub mod config;
pub mod error;
pub mod report;
pub mod scenarios;
pub mod verify;
