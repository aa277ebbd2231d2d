//! Standard-library side of the simulator: corpus and trace files, run
//! configuration, the HTTP oracle client, parallel ensembles, reports and
//! the command line.

pub mod cli;
pub mod corpus_io;
pub mod ensemble;
pub mod remote;
pub mod report;
pub mod settings;
pub mod trace_io;

pub use agora_core as core;
