//! Configuration files.
//!
//! A run or sweep is described by one TOML document:
//!
//! ```toml
//! schema_version = 1
//!
//! [scenario]
//! arrival_rate = 1.0        # required, requests per second
//! service_time = 1.0        # seconds, deterministic
//! num_servers = 4
//! max_requests = 1500       # exactly one of max_requests / max_time
//! warmup = 500.0
//! seed = 42
//! batches = 20
//! initial_state = "sleep"   # or "on"
//!
//! [power]
//! on = 200.0
//! suspend = 200.0
//! sleep = 14.0
//! wakeup = 200.0
//! time_suspend = 10.0
//! time_wakeup = 10.0
//! timeout = 10.0            # `inf` keeps servers on
//!
//! [policy]
//! text = '-queueSize - dspace("q") * (1 - stateOn)'   # or file = "p.policy"
//! nd = "random"             # or "fixed_order"
//! params = { q = 5 }
//!
//! [study]
//! q = [1, 2, 3, 5, 7, 10, 15, 20, 30, 40, 50, 75, 100]
//! timeout = [1, 2, 3, 4, 5, 7.5, 10, 15, 30]
//! nd = ["random", "fixed_order"]
//! replications = 10
//! ```
//!
//! Unknown keys are rejected and missing required keys are reported by name.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::cluster::{PowerModel, PowerState};
use crate::design::{DesignSpace, DEFAULT_Q, DEFAULT_TIMEOUTS};
use crate::engine::{FiniteTime, InitialState, SimConfig, StopCriterion};
use crate::error::{Error, Result};
use crate::policy::{parse_policy, DesignParams, NdResolution};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub schema_version: u32,
    pub scenario: ScenarioSection,
    #[serde(default)]
    pub power: PowerSection,
    pub policy: PolicySection,
    pub study: Option<StudySection>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSection {
    pub arrival_rate: f64,
    #[serde(default = "one")]
    pub service_time: f64,
    #[serde(default = "four")]
    pub num_servers: usize,
    pub max_requests: Option<usize>,
    pub max_time: Option<f64>,
    #[serde(default = "default_warmup")]
    pub warmup: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_batches")]
    pub batches: usize,
    #[serde(default = "default_initial")]
    pub initial_state: InitialState,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PowerSection {
    pub on: f64,
    pub suspend: f64,
    pub sleep: f64,
    pub wakeup: f64,
    pub time_suspend: f64,
    pub time_wakeup: f64,
    pub timeout: f64,
}

impl Default for PowerSection {
    fn default() -> Self {
        PowerModel::default().into()
    }
}

impl From<PowerModel> for PowerSection {
    fn from(m: PowerModel) -> Self {
        PowerSection {
            on: m.p_on,
            suspend: m.p_suspend,
            sleep: m.p_sleep,
            wakeup: m.p_wakeup,
            time_suspend: m.t_suspend,
            time_wakeup: m.t_wakeup,
            timeout: m.timeout,
        }
    }
}

impl From<&PowerSection> for PowerModel {
    fn from(p: &PowerSection) -> Self {
        PowerModel {
            p_on: p.on,
            p_suspend: p.suspend,
            p_sleep: p.sleep,
            p_wakeup: p.wakeup,
            t_suspend: p.time_suspend,
            t_wakeup: p.time_wakeup,
            timeout: p.timeout,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicySection {
    pub text: Option<String>,
    pub file: Option<PathBuf>,
    #[serde(default = "default_nd")]
    pub nd: NdResolution,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudySection {
    #[serde(default = "default_q")]
    pub q: Vec<u32>,
    #[serde(default = "default_timeouts")]
    pub timeout: Vec<f64>,
    #[serde(default = "both_nd")]
    pub nd: Vec<NdResolution>,
    #[serde(default = "ten")]
    pub replications: usize,
}

fn one() -> f64 {
    1.0
}
fn four() -> usize {
    4
}
fn ten() -> usize {
    10
}
fn default_warmup() -> f64 {
    500.0
}
fn default_batches() -> usize {
    20
}
fn default_initial() -> InitialState {
    InitialState::Sleep
}
fn default_nd() -> NdResolution {
    NdResolution::RandomFraction
}
fn default_q() -> Vec<u32> {
    DEFAULT_Q.to_vec()
}
fn default_timeouts() -> Vec<f64> {
    DEFAULT_TIMEOUTS.to_vec()
}
fn both_nd() -> Vec<NdResolution> {
    vec![NdResolution::RandomFraction, NdResolution::FixedOrder]
}

fn toml_error(e: toml::de::Error) -> Error {
    let msg = e.message().to_string();
    match e.span() {
        Some(span) => Error::Config(format!("{msg} (at byte {})", span.start)),
        None => Error::Config(msg),
    }
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: ConfigFile = toml::from_str(text).map_err(toml_error)?;
        if cfg.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                cfg.schema_version
            )));
        }
        Ok(cfg)
    }

    /// Reads a config file; a relative `policy.file` resolves against the
    /// config's directory.
    pub fn load(path: &Path) -> Result<(Self, PathBuf)> {
        let text = std::fs::read_to_string(path)?;
        let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok((Self::parse(&text)?, dir))
    }

    pub fn policy_text(&self, base_dir: &Path) -> Result<String> {
        match (&self.policy.text, &self.policy.file) {
            (Some(t), None) => Ok(t.clone()),
            (None, Some(f)) => Ok(std::fs::read_to_string(base_dir.join(f))?),
            (Some(_), Some(_)) => Err(Error::Config(
                "policy.text and policy.file are mutually exclusive".into(),
            )),
            (None, None) => Err(Error::Config(
                "missing field `policy.text` or `policy.file`".into(),
            )),
        }
    }

    pub fn to_sim_config(&self, base_dir: &Path) -> Result<SimConfig> {
        let s = &self.scenario;
        let stop = match (s.max_requests, s.max_time) {
            (Some(n), None) => StopCriterion::MaxRequests(n),
            (None, Some(t)) => StopCriterion::MaxTime(FiniteTime(t)),
            (Some(_), Some(_)) => {
                return Err(Error::Config(
                    "scenario.max_requests and scenario.max_time are mutually exclusive".into(),
                ))
            }
            (None, None) => {
                return Err(Error::Config(
                    "missing field `scenario.max_requests` or `scenario.max_time`".into(),
                ))
            }
        };
        let policy = parse_policy(&self.policy_text(base_dir)?)?;
        let cfg = SimConfig {
            num_servers: s.num_servers,
            arrival_rate: s.arrival_rate,
            service_time: s.service_time,
            power: (&self.power).into(),
            policy,
            nd: self.policy.nd,
            params: self.policy.params.clone(),
            stop,
            warmup: s.warmup,
            batches: s.batches,
            initial_state: s.initial_state,
            seed: s.seed,
        };
        Ok(cfg)
    }

    pub fn design_space(&self) -> Result<DesignSpace> {
        let st = self
            .study
            .as_ref()
            .ok_or_else(|| Error::Config("missing section `study`".into()))?;
        Ok(DesignSpace {
            q: st.q.clone(),
            timeout: st.timeout.clone(),
            nd: st.nd.clone(),
            replications: st.replications,
        })
    }
}

/// Snapshot file for evaluating a policy by hand.
///
/// ```toml
/// [power]               # optional, same keys as in a config file
/// timeout = 10.0
///
/// [params]              # values for dspace("..")
/// q = 5
///
/// [[server]]            # one table per server, ids follow file order
/// queue_size = 2
/// state = "on"          # on | suspend | sleep | wakeup
/// ```
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SnapshotFile {
    #[serde(default)]
    pub power: PowerSection,
    #[serde(default)]
    pub params: DesignParams,
    pub server: Vec<SnapshotServer>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SnapshotServer {
    pub queue_size: usize,
    pub state: PowerState,
}

impl SnapshotFile {
    pub fn parse(text: &str) -> Result<Self> {
        let snap: SnapshotFile = toml::from_str(text).map_err(toml_error)?;
        if snap.server.is_empty() {
            return Err(Error::Config("snapshot lists no servers".into()));
        }
        Ok(snap)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
schema_version = 1
[scenario]
arrival_rate = 1.0
max_requests = 100
[policy]
text = "-queueSize"
"#;

    #[test]
    fn minimal_config_uses_defaults() {
        let f = ConfigFile::parse(MINIMAL).unwrap();
        let c = f.to_sim_config(Path::new(".")).unwrap();
        assert_eq!(c.num_servers, 4);
        assert_eq!(c.power, PowerModel::default());
        assert_eq!(c.stop, StopCriterion::MaxRequests(100));
        assert_eq!(c.warmup, 500.0);
        assert_eq!(c.nd, NdResolution::RandomFraction);
        assert_eq!(c.initial_state, InitialState::Sleep);
    }

    #[test]
    fn missing_key_is_named() {
        let text = MINIMAL.replace("arrival_rate = 1.0\n", "");
        let err = ConfigFile::parse(&text).unwrap_err().to_string();
        assert!(err.contains("arrival_rate"), "{err}");
        let text = MINIMAL.replace("max_requests = 100\n", "");
        let err = ConfigFile::parse(&text)
            .unwrap()
            .to_sim_config(Path::new("."))
            .unwrap_err()
            .to_string();
        assert!(err.contains("max_requests"), "{err}");
    }

    #[test]
    fn unknown_key_is_rejected() {
        let text = MINIMAL.replace("max_requests = 100", "max_requests = 100\nlambda = 2");
        let err = ConfigFile::parse(&text).unwrap_err().to_string();
        assert!(err.contains("lambda"), "{err}");
    }

    #[test]
    fn schema_version_checked() {
        let text = MINIMAL.replace("schema_version = 1", "schema_version = 2");
        assert!(ConfigFile::parse(&text).is_err());
    }

    #[test]
    fn infinite_timeout_and_study() {
        let text = format!(
            "{MINIMAL}\n[power]\ntimeout = inf\n[study]\nq = [1, 5]\nnd = [\"fixed_order\"]\n"
        );
        let f = ConfigFile::parse(&text).unwrap();
        assert!(f
            .to_sim_config(Path::new("."))
            .unwrap()
            .power
            .timeout
            .is_infinite());
        let space = f.design_space().unwrap();
        assert_eq!(space.q, vec![1, 5]);
        assert_eq!(space.timeout.len(), 9);
        assert_eq!(space.nd, vec![NdResolution::FixedOrder]);
        assert_eq!(space.replications, 10);
    }

    #[test]
    fn snapshot_file() {
        let s = SnapshotFile::parse(
            "[params]\nq = 5\n[[server]]\nqueue_size = 0\nstate = \"sleep\"\n[[server]]\nqueue_size = 3\nstate = \"on\"\n",
        )
        .unwrap();
        assert_eq!(s.server.len(), 2);
        assert_eq!(s.server[1].state, PowerState::On);
        assert_eq!(s.params["q"], 5.0);
        assert!(SnapshotFile::parse("server = []").is_err());
    }
}
