//! Simulation and verification toolkit for growing-group admission rules
//! and fixed-size committees.

// `!(x >= 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod adversaries;
pub mod committee;
pub mod config;
pub mod engine;
pub mod error;
pub mod experiment;
pub mod group;
pub mod oracles;
pub mod rational;
pub mod rng;
pub mod rules;
pub mod stats;
pub mod verify;

pub use error::{Error, Result};
