//! Microgrid co-simulation with interchangeable battery storage models.
//!
//! The engine steps actors (solar, data-center load, constants), sums their
//! power into a grid delta, lets controllers adjust the energy-management
//! policy, and hands the delta to a [`Storage`](storage::Storage). Four
//! storage models are provided: a lossless bucket, the linear CLC model, an
//! equivalent-circuit cell, and a series-parallel pack of such cells.

pub mod bench;
pub mod config;
pub mod engine;
pub mod error;
pub mod experiment;
pub mod microgrid;
pub mod models;
pub mod output;
pub mod par;
pub mod storage;
pub mod trace;
pub mod units;

pub use error::{Error, Result};
