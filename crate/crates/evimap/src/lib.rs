//! File formats, parallel drivers and the command-line front end for
//! `evimap-core`.

pub mod cli;
pub mod io;
pub mod output;
pub mod pipeline;

pub use io::{fixture, load_dataset, parse_dataset, LoadError};
