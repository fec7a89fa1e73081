//! Benchmark harness for monthly food-price forecasting.

pub mod adapter;
pub mod backtest;
pub mod catalog;
pub mod complexity;
pub mod curation;
pub mod ensemble;
pub mod error;
pub mod groups;
pub mod llm;
pub mod models;
pub mod series;
pub mod synthetic;

pub use error::{Error, Result};
