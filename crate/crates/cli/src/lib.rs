//! Command-line front end for `noisebound`: JSON configs in, JSON or text
//! reports and CSV tables out.

pub mod commands;
pub mod config;
pub mod report;
