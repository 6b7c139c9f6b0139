//! Companion crate carrying IO, file formats, and the command-line driver
//! for the degenerate-energy laboratory. All numerics live in
//! `degenlab-core`; this crate only parses configs, orchestrates stages,
//! and serializes artifacts.

pub mod checkpoint;
pub mod config;
pub mod csvout;
pub mod manifest;
pub mod pipeline;
