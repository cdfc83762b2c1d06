//! Domain model and pure decision logic for the university inventory service.
//!
//! This crate has no I/O and builds without `std`; storage, sessions, the
//! HTTP gateway and the command line live in the `uuis` crate.

#![no_std]

extern crate alloc;

pub mod authz;
pub mod catalog;
pub mod cocomo;
pub mod model;
pub mod search;
pub mod status;
pub mod validate;
pub mod workflow;

pub use model::*;
