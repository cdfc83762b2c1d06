//! University inventory service: storage, sessions, the inventory
//! operations, search, reporting, the HTTP gateway and the command line.

pub mod api;
pub mod assignments;
pub mod audit;
pub mod clock;
pub mod config;
pub mod error;
pub mod estimate;
pub mod help;
pub mod http;
pub mod importer;
pub mod integrity;
pub mod inventory;
pub mod outbox;
pub mod reporting;
pub mod requests;
pub mod roles;
pub mod search;
pub mod seed;
pub mod service;
pub mod sessions;
pub mod storage;

pub use error::{Error, Result};
pub use service::{Actor, Service};
