//! Cartesian design space over `(q, TO, nd)` and the sweep runner.
//!
//! Designs are enumerated with `q` outermost, then `TO`, then `nd`. The
//! seed of a run depends only on the master seed and the replication
//! index, so every design in one replication sees the same arrival stream
//! and a design's result does not depend on where it sits in the space.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::engine::{run, SimConfig};
use crate::error::{Error, Result};
use crate::metrics::RunResult;
use crate::policy::NdResolution;
use crate::report::{ResultRow, RowKey};
use crate::rng::mix_seed;

pub const DEFAULT_Q: [u32; 13] = [1, 2, 3, 5, 7, 10, 15, 20, 30, 40, 50, 75, 100];
pub const DEFAULT_TIMEOUTS: [f64; 9] = [1.0, 2.0, 3.0, 4.0, 5.0, 7.5, 10.0, 15.0, 30.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignSpace {
    pub q: Vec<u32>,
    pub timeout: Vec<f64>,
    pub nd: Vec<NdResolution>,
    pub replications: usize,
}

impl Default for DesignSpace {
    fn default() -> Self {
        DesignSpace {
            q: DEFAULT_Q.to_vec(),
            timeout: DEFAULT_TIMEOUTS.to_vec(),
            nd: vec![NdResolution::RandomFraction, NdResolution::FixedOrder],
            replications: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Design {
    pub q: u32,
    pub timeout: f64,
    pub nd: NdResolution,
    pub replication_seeds: Vec<u64>,
}

impl Design {
    /// `base` with this design's coordinates bound: `q` to `dspace("q")`,
    /// `TO` to the power model timeout.
    pub fn configure(&self, base: &SimConfig, seed: u64) -> SimConfig {
        let mut cfg = base.clone();
        cfg.params.insert("q".into(), f64::from(self.q));
        cfg.power.timeout = self.timeout;
        cfg.nd = self.nd;
        cfg.seed = seed;
        cfg
    }
}

pub fn replication_seed(master: u64, replication: usize) -> u64 {
    mix_seed(&[master, replication as u64])
}

/// Full Cartesian product of the space.
pub fn enumerate_designs(space: &DesignSpace, master_seed: u64) -> Result<Vec<Design>> {
    if space.q.is_empty() {
        return Err(Error::EmptyDimension("q"));
    }
    if space.timeout.is_empty() {
        return Err(Error::EmptyDimension("timeout"));
    }
    if space.nd.is_empty() {
        return Err(Error::EmptyDimension("nd"));
    }
    if space.replications == 0 {
        return Err(Error::EmptyDimension("replications"));
    }
    if let Some(bad) = space.timeout.iter().find(|t| t.is_nan() || **t <= 0.0) {
        return Err(Error::Config(format!(
            "timeout values must be positive, got {bad}"
        )));
    }
    let seeds: Vec<u64> = (0..space.replications)
        .map(|r| replication_seed(master_seed, r))
        .collect();
    let mut out = Vec::with_capacity(space.q.len() * space.timeout.len() * space.nd.len());
    for &q in &space.q {
        for &timeout in &space.timeout {
            for &nd in &space.nd {
                out.push(Design {
                    q,
                    timeout,
                    nd,
                    replication_seeds: seeds.clone(),
                });
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct SweepRow {
    pub design_index: usize,
    pub design: Design,
    pub replication: usize,
    pub seed: u64,
    pub outcome: std::result::Result<RunResult, String>,
}

impl SweepRow {
    pub fn to_result_row(&self) -> ResultRow {
        let key = RowKey {
            q: Some(f64::from(self.design.q)),
            to: Some(self.design.timeout),
            nd: self.design.nd.name().to_string(),
            replication: self.replication,
            seed: self.seed,
        };
        match &self.outcome {
            Ok(r) => ResultRow::ok(key, r),
            Err(e) => ResultRow::failed(key, e),
        }
    }
}

/// Runs every design and replication. Rows come back in enumeration order
/// (design, then replication) whatever `jobs` is; a failing run yields an
/// error row instead of aborting the sweep.
pub fn run_sweep(space: &DesignSpace, base: &SimConfig, jobs: usize) -> Result<Vec<SweepRow>> {
    let designs = enumerate_designs(space, base.seed)?;
    let tasks: Vec<(usize, usize)> = (0..designs.len())
        .flat_map(|d| (0..space.replications).map(move |r| (d, r)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    log::info!(
        "sweeping {} designs x {} replications",
        designs.len(),
        space.replications
    );
    let rows = pool.install(|| {
        tasks
            .par_iter()
            .map(|&(d, r)| {
                let design = &designs[d];
                let seed = design.replication_seeds[r];
                let outcome = run(&design.configure(base, seed)).map_err(|e| e.to_string());
                if let Err(e) = &outcome {
                    log::warn!("design {d} replication {r} failed: {e}");
                }
                SweepRow {
                    design_index: d,
                    design: design.clone(),
                    replication: r,
                    seed,
                    outcome,
                }
            })
            .collect()
    });
    Ok(rows)
}
