//! Deterministic simulator, adversary harness and audits for `ztac-core`.

pub mod adversary;
pub mod audit;
pub mod bench;
pub mod bus;
pub mod report;
pub mod runner;
pub mod scenario;

pub use adversary::AdversaryScript;
pub use bus::AttackMode;
pub use report::{tally_counts, RunReport};
pub use runner::{run_scenario, Runner};
pub use scenario::{ConfigError, ScenarioConfig};
