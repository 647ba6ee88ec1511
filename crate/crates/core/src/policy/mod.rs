//! The policy language: parsing, per-server evaluation and server selection.
//!
//! A policy is an arithmetic expression evaluated once per server; the
//! request goes to the server with the highest value. Ties between
//! integer-valued scores are broken by adding a fraction in `[0, 1)`, see
//! [`NdResolution`].

mod ast;
mod eval;
mod parse;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use ast::PolicyExpr;
pub use eval::{check_params, evaluate, DesignParams, ServerSnapshot};
pub use parse::parse_policy;

use crate::error::{Error, Result};
use crate::rng::UniformSource;

/// How equal policy scores are separated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NdResolution {
    /// Add a fresh uniform draw per server.
    #[serde(rename = "random")]
    RandomFraction,
    /// Add `id / num_servers`.
    FixedOrder,
}

impl NdResolution {
    pub fn name(self) -> &'static str {
        match self {
            NdResolution::RandomFraction => "random",
            NdResolution::FixedOrder => "fixed_order",
        }
    }
}

impl fmt::Display for NdResolution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for NdResolution {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random" => Ok(NdResolution::RandomFraction),
            "fixed_order" => Ok(NdResolution::FixedOrder),
            other => Err(Error::Config(format!(
                "unknown nd resolution `{other}` (expected random or fixed_order)"
            ))),
        }
    }
}

/// Per-server scores from one selection, before and after tie resolution.
#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub server: usize,
    pub base: Vec<f64>,
    pub resolved: Vec<f64>,
}

/// Scores every server and returns the argmax.
///
/// Servers are visited in ascending id order. For each one the policy is
/// evaluated (consuming its `random` leaves), then, under
/// [`NdResolution::RandomFraction`], one more draw is added. Exact ties
/// that survive resolution go to the lowest id.
pub fn select_server(
    expr: &PolicyExpr,
    snaps: &[ServerSnapshot<'_>],
    nd: NdResolution,
    rng: &mut dyn UniformSource,
) -> Result<Selection> {
    if snaps.is_empty() {
        return Err(Error::Logic("select_server called with no servers".into()));
    }
    let mut base = Vec::with_capacity(snaps.len());
    let mut resolved = Vec::with_capacity(snaps.len());
    let mut best = 0;
    for (i, snap) in snaps.iter().enumerate() {
        if snap.id != i {
            return Err(Error::Logic(format!("snapshot {i} carries id {}", snap.id)));
        }
        let v = evaluate(expr, snap, rng)?;
        let fraction = match nd {
            NdResolution::RandomFraction => rng.uniform(),
            NdResolution::FixedOrder => snap.id as f64 / snap.num_servers as f64,
        };
        let r = v + fraction;
        if r.is_nan() {
            return Err(Error::NotANumber { server: i });
        }
        if r > resolved.get(best).copied().unwrap_or(f64::NEG_INFINITY) || i == 0 {
            best = i;
        }
        base.push(v);
        resolved.push(r);
    }
    Ok(Selection {
        server: best,
        base,
        resolved,
    })
}
