//! File formats, the scenario runner and the `bridgesim` command line on top
//! of `bridgesim-core`.

pub mod config;
pub mod documents;
pub mod protocol;
pub mod runner;
pub mod tables;
