//! Scenario files, random instance generation and the identity checker.

pub mod checks;
pub mod format;
pub mod random;

pub use checks::{run_checks, CheckRecord, CheckReport};
pub use format::{load_scenario, Object, Scenario};
