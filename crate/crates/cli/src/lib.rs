//! File formats and command line for the `record-edge-core` numerics.
//!
//! [`ingest`] reads race results (CSV, or the fixed-width national-records
//! table) and turns them into margins below a threshold; [`cli`] wires the
//! pipeline into the `record-edge` binary and writes plot-ready CSV/JSON.

pub mod cli;
pub mod ingest;
pub mod report;
