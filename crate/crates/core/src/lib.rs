//! Core algorithms for detecting out-of-service ATMs by fusing a noisy status
//! channel with transaction-gap evidence.
//!
//! The crate is `no_std` and only needs `alloc`. Everything that touches the
//! filesystem, the command line, or threads lives in the `atmfusion` crate.
//!
//! Pipeline, in module order:
//!
//! - [`simnet`] generates a synthetic ATM network (outages, transactions and a
//!   noisy status channel).
//! - [`journal`] turns component error/recovery journals into ground truth.
//! - [`txstat`] fits inter-arrival distributions, ranks them by the
//!   Kolmogorov-Smirnov statistic and runs the 99% transaction-gap detector.
//! - [`features`] assembles labeled instances in `[0,1]^6`.
//! - [`balance`] oversamples the minority class with SMOTE.
//! - [`learners`] holds the base classifiers.
//! - [`fusion`] combines them (DCS-LA, KNORA-E, stacking).
//! - [`eval`] computes confusion matrices, macro metrics and reliability KPIs.
#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod balance;
pub mod calendar;
pub mod error;
pub mod eval;
pub mod features;
pub mod fusion;
pub mod journal;
pub mod learners;
mod linalg;
pub mod math;
pub mod rng;
pub mod simnet;
pub mod txstat;

pub use error::{Error, Result};

/// Class label for an in-service ATM.
pub const UP: u8 = 1;
/// Class label for an out-of-service ATM.
pub const DOWN: u8 = 0;
