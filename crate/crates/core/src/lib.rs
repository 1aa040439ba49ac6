//! Distributed expectation-propagation detection for large antenna arrays.
//!
//! The crate is `no_std` and needs only `alloc`. File formats, threading and
//! the command line live in the companion `epdetect-sim` crate.

#![no_std]
// NaN must fall into the rejecting branch of every range check
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod analysis;
pub mod detector;
pub mod error;
pub mod exec;
pub mod harness;
pub mod linalg;
pub mod model;
pub mod partition;
pub mod rng;

pub use error::{Error, Result};
