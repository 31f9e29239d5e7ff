//! Test-stand toolkit: a small process language for describing stimulus and
//! checks on binary signals, an expander that turns suites into concrete test
//! instances, a tick-exact simulator for device models, and reporting.

pub mod config;
pub mod dsl;
pub mod dut;
pub mod engine;
pub mod expand;
pub mod level;
pub mod report;
pub mod runner;
pub mod validate;
pub mod waveform;

pub use level::{Edge, Level, Tick};
