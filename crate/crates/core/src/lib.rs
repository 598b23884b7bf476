//! Forecasting trending entity names from query logs and boosting their
//! recognition likelihood inside a class-based n-gram language model.

pub mod error;
pub mod experiment;
pub mod features;
pub mod lm;
pub mod classifiers;
pub mod querylog;
pub mod ranking;
pub mod recognizer;
pub mod text;

pub use error::{Error, Result};
