//! Average latency, average power and batch-means confidence intervals.
//!
//! Both quantities are long-run limits; every estimate here is over the
//! finite window `[warmup, horizon]` of one run, with a 95% Student-t
//! half-width from batch means attached.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::cluster::{PowerModel, PowerState, Request, Segment};
use crate::engine::{SimConfig, Simulation};
use crate::error::{Error, Result};

/// Mean latency over requests that arrived at or after `warmup`.
pub fn compute_al(requests: &[Request], warmup: f64) -> Result<f64> {
    let lat = post_warmup_latencies(requests, warmup);
    if lat.is_empty() {
        return Err(Error::EmptySample);
    }
    Ok(lat.iter().sum::<f64>() / lat.len() as f64)
}

/// Latencies of completed post-warm-up requests, in arrival order.
pub fn post_warmup_latencies(requests: &[Request], warmup: f64) -> Vec<f64> {
    requests
        .iter()
        .filter(|r| r.arrival_time >= warmup)
        .filter_map(Request::latency)
        .collect()
}

/// Energy (J) spent by one server over `[from, to]`.
pub fn integrate_energy(timeline: &[Segment], power: &PowerModel, from: f64, to: f64) -> f64 {
    timeline
        .iter()
        .map(|seg| overlap(seg, from, to) * power.power(seg.state))
        .sum()
}

fn overlap(seg: &Segment, from: f64, to: f64) -> f64 {
    (seg.end.min(to) - seg.start.max(from)).max(0.0)
}

/// Share of `[from, to]` spent in each state, indexed by [`PowerState::index`].
pub fn state_fractions(timeline: &[Segment], from: f64, to: f64) -> Result<[f64; 4]> {
    let width = window(from, to)?;
    let mut out = [0.0; 4];
    for seg in timeline {
        out[seg.state.index()] += overlap(seg, from, to);
    }
    Ok(out.map(|t| t / width))
}

fn window(from: f64, to: f64) -> Result<f64> {
    let w = to - from;
    if w > 0.0 && w.is_finite() {
        Ok(w)
    } else {
        Err(Error::ZeroWindow { from, to })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AveragePower {
    pub per_server: f64,
    pub total: f64,
}

/// Time-averaged power over `[warmup, horizon]`, summed over servers
/// (`total`) and divided by the server count (`per_server`).
pub fn compute_ap(
    timelines: &[Vec<Segment>],
    power: &PowerModel,
    warmup: f64,
    horizon: f64,
) -> Result<AveragePower> {
    let width = window(warmup, horizon)?;
    if timelines.is_empty() {
        return Err(Error::EmptySample);
    }
    let energy: f64 = timelines
        .iter()
        .map(|tl| integrate_energy(tl, power, warmup, horizon))
        .sum();
    let total = energy / width;
    Ok(AveragePower {
        per_server: total / timelines.len() as f64,
        total,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BatchMeans {
    pub mean: f64,
    pub half_width: f64,
    pub batches: usize,
}

/// Splits `samples` into `num_batches` equal consecutive batches (a
/// remainder at the end is dropped) and returns the grand mean with a 95%
/// Student-t half-width of the batch means.
pub fn batch_means(samples: &[f64], num_batches: usize) -> Result<BatchMeans> {
    if num_batches < 2 {
        return Err(Error::InsufficientData {
            needed: 2,
            got: num_batches,
        });
    }
    if samples.len() < num_batches {
        return Err(Error::InsufficientData {
            needed: num_batches,
            got: samples.len(),
        });
    }
    let size = samples.len() / num_batches;
    let means: Vec<f64> = samples
        .chunks_exact(size)
        .take(num_batches)
        .map(|c| c.iter().sum::<f64>() / size as f64)
        .collect();
    Ok(summarize_batches(&means))
}

fn summarize_batches(means: &[f64]) -> BatchMeans {
    let b = means.len() as f64;
    let mean = means.iter().sum::<f64>() / b;
    let var = means.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / (b - 1.0);
    let t = StudentsT::new(0.0, 1.0, b - 1.0)
        .expect("degrees of freedom are positive")
        .inverse_cdf(0.975);
    BatchMeans {
        mean,
        half_width: t * (var / b).sqrt(),
        batches: means.len(),
    }
}

/// Batch means over equal-length time slices of `[warmup, horizon]`.
pub fn power_batch_means(
    timelines: &[Vec<Segment>],
    power: &PowerModel,
    warmup: f64,
    horizon: f64,
    num_batches: usize,
) -> Result<BatchMeans> {
    let width = window(warmup, horizon)?;
    if num_batches < 2 {
        return Err(Error::InsufficientData {
            needed: 2,
            got: num_batches,
        });
    }
    let slice = width / num_batches as f64;
    let n = timelines.len() as f64;
    let means: Vec<f64> = (0..num_batches)
        .map(|k| {
            let from = warmup + slice * k as f64;
            let to = if k + 1 == num_batches {
                horizon
            } else {
                warmup + slice * (k + 1) as f64
            };
            let e: f64 = timelines
                .iter()
                .map(|tl| integrate_energy(tl, power, from, to))
                .sum();
            e / (to - from) / n
        })
        .collect();
    Ok(summarize_batches(&means))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StateFractions {
    pub on: f64,
    pub suspend: f64,
    pub sleep: f64,
    pub wakeup: f64,
}

impl From<[f64; 4]> for StateFractions {
    fn from(a: [f64; 4]) -> Self {
        StateFractions {
            on: a[PowerState::On.index()],
            suspend: a[PowerState::Suspend.index()],
            sleep: a[PowerState::Sleep.index()],
            wakeup: a[PowerState::Wakeup.index()],
        }
    }
}

impl StateFractions {
    pub fn get(&self, state: PowerState) -> f64 {
        match state {
            PowerState::On => self.on,
            PowerState::Suspend => self.suspend,
            PowerState::Sleep => self.sleep,
            PowerState::Wakeup => self.wakeup,
        }
    }

    pub fn sum(&self) -> f64 {
        self.on + self.suspend + self.sleep + self.wakeup
    }
}

/// Summary of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    /// `None` when no request arrived after warm-up.
    pub avg_latency_s: Option<f64>,
    pub latency_ci_halfwidth: Option<f64>,
    pub avg_power_per_server_w: f64,
    pub total_power_w: f64,
    pub power_ci_halfwidth: Option<f64>,
    pub state_fractions: Vec<StateFractions>,
    pub assignments: Vec<usize>,
    pub requests_completed: usize,
    pub virtual_time_simulated: f64,
    pub window_start: f64,
    /// Always `"finite-window"`: the long-run limits are estimated over
    /// `[window_start, virtual_time_simulated]`.
    pub estimate: String,
}

impl RunResult {
    /// Cluster-wide mean of the per-server state fractions.
    pub fn mean_fractions(&self) -> StateFractions {
        let n = self.state_fractions.len().max(1) as f64;
        let mut acc = [0.0; 4];
        for f in &self.state_fractions {
            for st in PowerState::ALL {
                acc[st.index()] += f.get(st);
            }
        }
        acc.map(|v| v / n).into()
    }
}

/// Computes AL, AP and their confidence intervals for a finished run.
pub fn summarize(cfg: &SimConfig, sim: &Simulation) -> Result<RunResult> {
    let warmup = cfg.warmup;
    let ap = compute_ap(&sim.timelines, &cfg.power, warmup, sim.horizon)?;
    let latencies = post_warmup_latencies(&sim.requests, warmup);
    let avg_latency_s = if latencies.is_empty() {
        None
    } else {
        Some(latencies.iter().sum::<f64>() / latencies.len() as f64)
    };
    let latency_ci_halfwidth = batch_means(&latencies, cfg.batches)
        .ok()
        .map(|b| b.half_width);
    let power_ci_halfwidth =
        power_batch_means(&sim.timelines, &cfg.power, warmup, sim.horizon, cfg.batches)
            .ok()
            .map(|b| b.half_width);
    let state_fractions = sim
        .timelines
        .iter()
        .map(|tl| state_fractions(tl, warmup, sim.horizon).map(StateFractions::from))
        .collect::<Result<Vec<_>>>()?;
    let mut assignments = vec![0; cfg.num_servers];
    for r in &sim.requests {
        assignments[r.assigned_server] += 1;
    }
    Ok(RunResult {
        avg_latency_s,
        latency_ci_halfwidth,
        avg_power_per_server_w: ap.per_server,
        total_power_w: ap.total,
        power_ci_halfwidth,
        state_fractions,
        assignments,
        requests_completed: sim
            .requests
            .iter()
            .filter(|r| r.completion.is_some())
            .count(),
        virtual_time_simulated: sim.horizon,
        window_start: warmup,
        estimate: "finite-window".into(),
    })
}
