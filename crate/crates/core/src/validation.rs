//! Cross-checks for the simulator.
//!
//! * [`delta`]: symmetric ratio distance used to compare two result sets.
//! * [`replay_oracle`]: recomputes latencies and power from a fixed
//!   arrival/assignment trace by walking each server's arrivals in order,
//!   with no event queue.
//! * [`md1_mean_latency`]: closed-form mean sojourn time of an M/D/1 queue.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::cluster::{PowerModel, PowerState, Segment};
use crate::engine::InitialState;
use crate::error::{Error, Result};
use crate::report::ResultRow;

/// `max(a/b, b/a) - 1`. Symmetric and scale-invariant, but not a metric:
/// the triangle inequality fails.
pub fn delta(a: f64, b: f64) -> Result<f64> {
    for v in [a, b] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::NonPositive(v));
        }
    }
    Ok((a / b).max(b / a) - 1.0)
}

/// Mean sojourn time of an M/D/1 queue (Pollaczek-Khinchine).
pub fn md1_mean_latency(lambda: f64, service_time: f64) -> Result<f64> {
    if !(lambda >= 0.0 && service_time > 0.0) {
        return Err(Error::NonPositive(lambda.min(service_time)));
    }
    let rho = lambda * service_time;
    if rho >= 1.0 {
        return Err(Error::Unstable { rho });
    }
    Ok(service_time + rho * service_time / (2.0 * (1.0 - rho)))
}

/// Parameters the replay needs; a subset of the simulation config.
#[derive(Debug, Clone, Copy)]
pub struct ReplaySetup {
    pub num_servers: usize,
    pub service_time: f64,
    pub power: PowerModel,
    pub initial_state: InitialState,
}

#[derive(Debug, Clone)]
pub struct ReplayOutput {
    pub latencies: Vec<f64>,
    pub completions: Vec<f64>,
    pub timelines: Vec<Vec<Segment>>,
    /// Last completion, or 0 for an empty trace.
    pub last_completion: f64,
}

impl ReplayOutput {
    /// Total energy (J) of all servers over `[from, to]`.
    pub fn energy(&self, power: &PowerModel, from: f64, to: f64) -> f64 {
        let mut total = 0.0;
        for tl in &self.timelines {
            for seg in tl {
                let lo = if seg.start > from { seg.start } else { from };
                let hi = if seg.end < to { seg.end } else { to };
                if hi > lo {
                    total += (hi - lo) * power.power(seg.state);
                }
            }
        }
        total
    }
}

struct Walker {
    segments: Vec<Segment>,
    state: PowerState,
    since: f64,
}

impl Walker {
    fn go(&mut self, state: PowerState, at: f64) {
        if at > self.since {
            self.segments.push(Segment {
                start: self.since,
                end: at,
                state: self.state,
            });
        }
        self.state = state;
        self.since = at;
    }
}

/// Replays `arrivals[i]` on server `assignments[i]`.
///
/// Timelines are closed at `horizon`, or at the last completion when
/// `horizon` is `None`. Transitions at or after the closing time are not
/// applied.
pub fn replay_oracle(
    arrivals: &[f64],
    assignments: &[usize],
    setup: &ReplaySetup,
    horizon: Option<f64>,
) -> Result<ReplayOutput> {
    if arrivals.len() != assignments.len() {
        return Err(Error::InconsistentTrace(format!(
            "{} arrivals but {} assignments",
            arrivals.len(),
            assignments.len()
        )));
    }
    if let Some(&bad) = assignments.iter().find(|&&s| s >= setup.num_servers) {
        return Err(Error::InconsistentTrace(format!("unknown server {bad}")));
    }
    if arrivals.windows(2).any(|w| w[1] <= w[0]) || arrivals.first().is_some_and(|&t| t < 0.0) {
        return Err(Error::InconsistentTrace(
            "arrival times must be non-negative and strictly increasing".into(),
        ));
    }

    let p = &setup.power;
    let s = setup.service_time;
    let mut completions = vec![0.0; arrivals.len()];
    let mut walkers = Vec::with_capacity(setup.num_servers);
    let mut free_at = Vec::with_capacity(setup.num_servers);

    for server in 0..setup.num_servers {
        let mut w = Walker {
            segments: Vec::new(),
            state: match setup.initial_state {
                InitialState::Sleep => PowerState::Sleep,
                InitialState::On => PowerState::On,
            },
            since: 0.0,
        };
        // `busy_until` is the completion of the previous request; `None`
        // means the server has not served anything yet.
        let mut busy_until: Option<f64> = None;
        for (i, &a) in arrivals.iter().enumerate() {
            if assignments[i] != server {
                continue;
            }
            let start = match busy_until {
                Some(b) if a < b => b,
                _ => {
                    let idle_from = match (busy_until, setup.initial_state) {
                        (Some(b), _) => Some(b),
                        (None, InitialState::On) => Some(0.0),
                        (None, InitialState::Sleep) => None,
                    };
                    match idle_from {
                        None => {
                            w.go(PowerState::Wakeup, a);
                            let up = a + p.t_wakeup;
                            w.go(PowerState::On, up);
                            up
                        }
                        Some(t0) => {
                            let timeout_at = t0 + p.timeout;
                            if a < timeout_at {
                                a
                            } else {
                                let suspended = timeout_at + p.t_suspend;
                                w.go(PowerState::Suspend, timeout_at);
                                let up = if a < suspended {
                                    w.go(PowerState::Wakeup, suspended);
                                    suspended + p.t_wakeup
                                } else {
                                    w.go(PowerState::Sleep, suspended);
                                    w.go(PowerState::Wakeup, a);
                                    a + p.t_wakeup
                                };
                                w.go(PowerState::On, up);
                                up
                            }
                        }
                    }
                }
            };
            let done = start + s;
            completions[i] = done;
            busy_until = Some(done);
        }
        walkers.push(w);
        free_at.push(busy_until);
    }

    let last_completion = completions.iter().copied().fold(0.0, f64::max);
    let close = horizon.unwrap_or(last_completion);
    let timelines = walkers
        .into_iter()
        .zip(free_at)
        .map(|(mut w, busy_until)| {
            // Idle tail after the last completion (or from t = 0 if the
            // server started on and never served).
            let idle_from = match (busy_until, setup.initial_state) {
                (Some(b), _) => Some(b),
                (None, InitialState::On) => Some(0.0),
                (None, InitialState::Sleep) => None,
            };
            if let Some(t0) = idle_from {
                let timeout_at = t0 + p.timeout;
                if timeout_at < close {
                    w.go(PowerState::Suspend, timeout_at);
                    let suspended = timeout_at + p.t_suspend;
                    if suspended < close {
                        w.go(PowerState::Sleep, suspended);
                    }
                }
            }
            w.go(w.state, close);
            w.segments
        })
        .collect();

    Ok(ReplayOutput {
        latencies: arrivals
            .iter()
            .zip(&completions)
            .map(|(a, c)| c - a)
            .collect(),
        completions,
        timelines,
        last_completion,
    })
}

pub const DELTA_THRESHOLDS: [f64; 5] = [0.06, 0.11, 0.13, 0.2, 0.3];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignDelta {
    pub q: Option<f64>,
    pub to: Option<f64>,
    pub nd: String,
    pub al_a: f64,
    pub al_b: f64,
    pub ap_a: f64,
    pub ap_b: f64,
    pub delta_latency: f64,
    pub delta_power: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdShare {
    pub threshold: f64,
    pub latency: f64,
    pub power: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub designs: Vec<DesignDelta>,
    pub thresholds: Vec<ThresholdShare>,
    /// Designs present in only one of the two inputs.
    pub unmatched: usize,
}

type DesignKey = (Option<u64>, Option<u64>, String);
/// `(q, TO, mean AL, mean AP)`.
type DesignMean = (Option<f64>, Option<f64>, f64, f64);

fn key_of(row: &ResultRow) -> DesignKey {
    (
        row.q.map(f64::to_bits),
        row.to.map(f64::to_bits),
        row.nd.clone(),
    )
}

/// Mean (AL, AP total) per design over successful rows.
fn design_means(rows: &[ResultRow]) -> BTreeMap<DesignKey, DesignMean> {
    let mut acc: BTreeMap<DesignKey, (DesignMean, usize)> = BTreeMap::new();
    for r in rows.iter().filter(|r| r.status == "ok") {
        let Some(al) = r.al else { continue };
        let Some(ap) = r.ap_total else { continue };
        let (sums, n) = acc.entry(key_of(r)).or_insert(((r.q, r.to, 0.0, 0.0), 0));
        sums.2 += al;
        sums.3 += ap;
        *n += 1;
    }
    acc.into_iter()
        .map(|(k, ((q, to, al, ap), n))| (k, (q, to, al / n as f64, ap / n as f64)))
        .collect()
}

/// Compares two result tables design by design, averaging replications.
pub fn compare(a: &[ResultRow], b: &[ResultRow]) -> Result<ComparisonReport> {
    let (ma, mb) = (design_means(a), design_means(b));
    let mut designs = Vec::new();
    for (key, &(q, to, al_a, ap_a)) in &ma {
        let Some(&(_, _, al_b, ap_b)) = mb.get(key) else {
            continue;
        };
        designs.push(DesignDelta {
            q,
            to,
            nd: key.2.clone(),
            al_a,
            al_b,
            ap_a,
            ap_b,
            delta_latency: delta(al_a, al_b)?,
            delta_power: delta(ap_a, ap_b)?,
        });
    }
    let matched = designs.len();
    let unmatched = ma.len() + mb.len() - 2 * matched;
    let share = |f: &dyn Fn(&DesignDelta) -> bool| {
        if matched == 0 {
            0.0
        } else {
            designs.iter().filter(|d| f(d)).count() as f64 / matched as f64
        }
    };
    let thresholds = DELTA_THRESHOLDS
        .iter()
        .map(|&t| ThresholdShare {
            threshold: t,
            latency: share(&|d| d.delta_latency < t),
            power: share(&|d| d.delta_power < t),
        })
        .collect();
    Ok(ComparisonReport {
        designs,
        thresholds,
        unmatched,
    })
}

impl ComparisonReport {
    /// Fixed-width text table for terminals.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "{:>6} {:>6} {:>12} {:>10} {:>10} {:>9} {:>10} {:>10} {:>9}\n",
            "q", "TO", "nd", "AL_a", "AL_b", "dAL", "AP_a", "AP_b", "dAP"
        ));
        let opt = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |x| format!("{x}"));
        for d in &self.designs {
            out.push_str(&format!(
                "{:>6} {:>6} {:>12} {:>10.4} {:>10.4} {:>9.4} {:>10.3} {:>10.3} {:>9.4}\n",
                opt(d.q),
                opt(d.to),
                d.nd,
                d.al_a,
                d.al_b,
                d.delta_latency,
                d.ap_a,
                d.ap_b,
                d.delta_power
            ));
        }
        out.push_str(&format!(
            "\n{} designs compared, {} unmatched\n",
            self.designs.len(),
            self.unmatched
        ));
        out.push_str("threshold  share(dAL<t)  share(dAP<t)\n");
        for t in &self.thresholds {
            out.push_str(&format!(
                "{:>9} {:>13.3} {:>13.3}\n",
                t.threshold, t.latency, t.power
            ));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup(timeout: f64) -> ReplaySetup {
        ReplaySetup {
            num_servers: 2,
            service_time: 1.0,
            power: PowerModel {
                timeout,
                ..PowerModel::default()
            },
            initial_state: InitialState::Sleep,
        }
    }

    #[test]
    fn delta_examples() {
        assert_eq!(delta(3.5, 3.5).unwrap(), 0.0);
        assert_eq!(delta(1.0, 2.0).unwrap(), 1.0);
        assert_eq!(delta(2.0, 1.0).unwrap(), 1.0);
        assert_eq!(delta(3.0, 12.0).unwrap(), delta(1.0, 4.0).unwrap());
        assert!(matches!(delta(0.0, 1.0), Err(Error::NonPositive(_))));
        assert!(matches!(delta(1.0, -2.0), Err(Error::NonPositive(_))));
    }

    #[test]
    fn md1_examples() {
        // 1 + 0.5 / (2 * 0.5)
        assert_eq!(md1_mean_latency(0.5, 1.0).unwrap(), 1.5);
        assert!((md1_mean_latency(0.25, 1.0).unwrap() - 7.0 / 6.0).abs() < 1e-12);
        assert!((md1_mean_latency(0.8, 1.0).unwrap() - 3.0).abs() < 1e-12);
        assert_eq!(md1_mean_latency(0.0, 1.0).unwrap(), 1.0);
        assert!(matches!(
            md1_mean_latency(1.0, 1.0),
            Err(Error::Unstable { .. })
        ));
    }

    #[test]
    fn empty_trace_sleeps_throughout() {
        let st = setup(10.0);
        let out = replay_oracle(&[], &[], &st, Some(50.0)).unwrap();
        assert!(out.latencies.is_empty());
        assert_eq!(out.energy(&st.power, 0.0, 50.0), 2.0 * 14.0 * 50.0);
    }

    #[test]
    fn suspend_then_wake_trace() {
        // Served 0 -> done 11; idle until 11 + 9 = 20, suspend to 30;
        // arrival at 24 wakes at 30, on at 40, done 41.
        let st = setup(9.0);
        let out = replay_oracle(&[0.0, 24.0], &[0, 0], &st, None).unwrap();
        assert_eq!(out.completions, vec![11.0, 41.0]);
        let states: Vec<_> = out.timelines[0]
            .iter()
            .map(|g| (g.start, g.end, g.state))
            .collect();
        assert_eq!(
            states,
            vec![
                (0.0, 10.0, PowerState::Wakeup),
                (10.0, 20.0, PowerState::On),
                (20.0, 30.0, PowerState::Suspend),
                (30.0, 40.0, PowerState::Wakeup),
                (40.0, 41.0, PowerState::On),
            ]
        );
        assert_eq!(
            out.timelines[1],
            vec![Segment {
                start: 0.0,
                end: 41.0,
                state: PowerState::Sleep
            }]
        );
    }

    #[test]
    fn rejects_inconsistent_traces() {
        let st = setup(1.0);
        assert!(replay_oracle(&[1.0], &[], &st, None).is_err());
        assert!(replay_oracle(&[1.0], &[5], &st, None).is_err());
        assert!(replay_oracle(&[2.0, 1.0], &[0, 0], &st, None).is_err());
    }
}
