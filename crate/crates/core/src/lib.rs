pub mod arch;
pub mod assess;
pub mod clones;
pub mod config;
pub mod driver;
pub mod engine;
pub mod glob;
pub mod history;
pub mod metrics;
pub mod report;
pub mod scope;
