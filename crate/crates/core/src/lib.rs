pub mod auth;
pub mod blob;
pub mod config;
pub mod domain;
pub mod error;
pub mod fixture;
pub mod model;
pub mod report;
pub mod service;
pub mod store;
pub mod time;

pub use error::{CoreError, CoreResult};
pub use service::Citadel;
