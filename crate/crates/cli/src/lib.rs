//! Command-line front end for eisfam: configuration, JSON reports and the
//! acceptance suite.

pub mod acceptance;
pub mod commands;
pub mod config;
pub mod report;
