//! Energy-aware load balancing over power-managed servers.
//!
//! A cluster of identical servers receives Poisson arrivals. For every
//! request a policy expression is evaluated once per server and the request
//! goes to the highest-scoring server. Servers that stay idle for a timeout
//! suspend and fall asleep; waking one up costs a fixed delay. A run reports
//! the average latency and the average power, and a sweep runs a whole
//! design space of `(q, TO, nd)` points.
//!
//! ```
//! use greenlb::{engine, parse_policy, SimConfig};
//!
//! let policy = parse_policy("-queueSize - dspace(\"q\") * (1 - stateOn)").unwrap();
//! let mut cfg = SimConfig::new(policy);
//! cfg.params.insert("q".into(), 5.0);
//! cfg.seed = 7;
//! let result = engine::run(&cfg).unwrap();
//! assert!(result.avg_latency_s.unwrap() >= 1.0);
//! assert!((14.0..=200.0).contains(&result.avg_power_per_server_w));
//! ```
//!
//! The guide under `book/` walks through each part; its code samples are
//! compiled and run as doc-tests of this crate.

pub mod cluster;
pub mod config;
pub mod design;
pub mod engine;
pub mod error;
pub mod metrics;
pub mod policy;
pub mod report;
pub mod rng;
pub mod validation;

pub use cluster::{PowerModel, PowerState, Request, Segment, Server};
pub use design::{enumerate_designs, run_sweep, Design, DesignSpace};
pub use engine::{simulate, simulate_assigned, SimConfig, SimOptions, Simulation, StopCriterion};
pub use error::{Error, Result};
pub use metrics::RunResult;
pub use policy::{evaluate, parse_policy, select_server, NdResolution, PolicyExpr, ServerSnapshot};
pub use validation::{delta, md1_mean_latency, replay_oracle};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/policies.md")]
    mod policies {}
    #[doc = include_str!("../../../book/src/power-states.md")]
    mod power_states {}
    #[doc = include_str!("../../../book/src/simulation.md")]
    mod simulation {}
    #[doc = include_str!("../../../book/src/metrics.md")]
    mod metrics {}
    #[doc = include_str!("../../../book/src/design-space.md")]
    mod design_space {}
    #[doc = include_str!("../../../book/src/validation.md")]
    mod validation {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
