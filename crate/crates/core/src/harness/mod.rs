pub mod config;
pub mod experiment;
pub mod inspect;
pub mod metrics;
pub mod source;
pub mod sweep;
