//! Neural surrogate modelling of a multivariate sensor and a rank-intersection
//! sweep over its settings space.
//!
//! The pipeline runs in four stages:
//!
//! * [`sensor`] generates a factorial dataset from a seeded analytic sensor model.
//! * [`dataset`] log-transforms, normalizes, one-hot encodes and splits the rows.
//! * [`nn`] and [`training`] fit a leaky-ReLU feed-forward regressor with
//!   hand-written backpropagation.
//! * [`curves`] and [`sweep`] predict a Signal/SNR curve for every interpolated
//!   settings combination, score it on four criteria and pick the candidate that
//!   enters every criterion's top-K list first.
//!
//! Data-parallel loops go through [`par`]; with the default `parallel` feature
//! they run on rayon, otherwise sequentially. Results are identical either way.

pub mod curves;
pub mod dataset;
pub mod error;
pub mod nn;
pub mod par;
pub mod sensor;
pub mod sweep;
pub mod training;

pub use error::{Error, Result};
pub use sensor::SettingsCombination;
