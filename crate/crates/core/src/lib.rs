//! Two-stage federated battery prognosis with replacement-policy evaluation.
//!
//! Each battery is a client holding its own cycle features. An autoencoder
//! is trained with FedAvg and frozen, clients compress their features
//! locally, then a RUL regressor is trained the same way. Predictions drive
//! a threshold-based replacement policy that is scored against an age-based
//! periodic policy by long-run average cost rate.

pub mod cli;
pub mod data;
pub mod error;
pub mod experiments;
pub mod federation;
pub mod nn;
pub mod policy;

pub use error::{Error, Result};
