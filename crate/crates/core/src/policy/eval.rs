use std::collections::BTreeMap;

use super::ast::PolicyExpr;
use crate::cluster::{PowerModel, PowerState};
use crate::error::{Error, Result};
use crate::rng::UniformSource;

/// Values bound to `dspace("..")` names.
pub type DesignParams = BTreeMap<String, f64>;

/// What a policy can observe about one server at the moment of selection.
#[derive(Debug, Clone, Copy)]
pub struct ServerSnapshot<'a> {
    pub id: usize,
    pub num_servers: usize,
    /// Queued plus in-service requests.
    pub queue_size: usize,
    pub power_state: PowerState,
    pub power: &'a PowerModel,
    pub params: &'a DesignParams,
}

fn indicator(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

/// Evaluates `expr` for one server. `Random` leaves draw from `rng` in
/// left-to-right order.
pub fn evaluate(
    expr: &PolicyExpr,
    snap: &ServerSnapshot<'_>,
    rng: &mut dyn UniformSource,
) -> Result<f64> {
    use PolicyExpr::*;
    Ok(match expr {
        Id => snap.id as f64,
        NumServers => snap.num_servers as f64,
        QueueSize => snap.queue_size as f64,
        StateOn => indicator(snap.power_state == PowerState::On),
        StateSleep => indicator(snap.power_state == PowerState::Sleep),
        StateSuspend => indicator(snap.power_state == PowerState::Suspend),
        StateWakeup => indicator(snap.power_state == PowerState::Wakeup),
        PowerOn => snap.power.p_on,
        PowerSleep => snap.power.p_sleep,
        PowerSuspend => snap.power.p_suspend,
        PowerWakeup => snap.power.p_wakeup,
        TimeWakeup => snap.power.t_wakeup,
        TimeSuspend => snap.power.t_suspend,
        TimeOutTime => snap.power.timeout,
        IntLit(v) => *v as f64,
        Random => rng.uniform(),
        DSpace(name) => *snap
            .params
            .get(name)
            .ok_or_else(|| Error::UndefinedParam(name.clone()))?,
        Neg(e) => -evaluate(e, snap, rng)?,
        Add(l, r) => evaluate(l, snap, rng)? + evaluate(r, snap, rng)?,
        Sub(l, r) => evaluate(l, snap, rng)? - evaluate(r, snap, rng)?,
        Mul(l, r) => evaluate(l, snap, rng)? * evaluate(r, snap, rng)?,
        Div(l, r) => {
            let (a, b) = (evaluate(l, snap, rng)?, evaluate(r, snap, rng)?);
            if b == 0.0 {
                return Err(Error::DivisionByZero);
            }
            a / b
        }
        Mod(l, r) => {
            let (a, b) = (evaluate(l, snap, rng)?, evaluate(r, snap, rng)?);
            if b == 0.0 {
                return Err(Error::ModByZero);
            }
            // Floating remainder, sign of the dividend.
            a % b
        }
    })
}

/// Checks that every `dspace` name in `expr` is bound in `params`.
pub fn check_params(expr: &PolicyExpr, params: &DesignParams) -> Result<()> {
    match expr
        .dspace_names()
        .into_iter()
        .find(|n| !params.contains_key(*n))
    {
        Some(missing) => Err(Error::UndefinedParam(missing.to_string())),
        None => Ok(()),
    }
}
