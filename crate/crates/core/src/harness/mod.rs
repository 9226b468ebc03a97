//! Scenario configuration, trial execution, metrics, batches and the live
//! session service.

pub mod batch;
pub mod config;
pub mod live;
pub mod metrics;
pub mod scenarios;
pub mod trial;
