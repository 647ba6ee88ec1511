//! Per-server dynamic state and the power-state transition rules.
//!
//! A server moves through four states:
//!
//! ```text
//!            idle for TO           t_suspend, no arrival
//!   On ─────────────────▶ Suspend ───────────────────────▶ Sleep
//!   ▲                        │ arrival while suspending       │ arrival
//!   │                        ▼ (after t_suspend)              │
//!   └─────────────────── Wakeup ◀─────────────────────────────┘
//!        after t_wakeup
//! ```
//!
//! Every operation returns at most one [`Timer`] that the caller must
//! schedule; the server itself never looks at a clock.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PowerState {
    On,
    Suspend,
    Sleep,
    Wakeup,
}

impl PowerState {
    pub const ALL: [PowerState; 4] = [
        PowerState::On,
        PowerState::Suspend,
        PowerState::Sleep,
        PowerState::Wakeup,
    ];

    pub fn index(self) -> usize {
        match self {
            PowerState::On => 0,
            PowerState::Suspend => 1,
            PowerState::Sleep => 2,
            PowerState::Wakeup => 3,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            PowerState::On => "on",
            PowerState::Suspend => "suspend",
            PowerState::Sleep => "sleep",
            PowerState::Wakeup => "wakeup",
        }
    }
}

impl fmt::Display for PowerState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PowerState {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PowerState::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown power state `{s}`")))
    }
}

/// State powers (W), transition times and idle timeout (s).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerModel {
    pub p_on: f64,
    pub p_suspend: f64,
    pub p_sleep: f64,
    pub p_wakeup: f64,
    pub t_suspend: f64,
    pub t_wakeup: f64,
    /// Idle time in `On` before suspending. `f64::INFINITY` keeps servers on.
    pub timeout: f64,
}

impl Default for PowerModel {
    fn default() -> Self {
        PowerModel {
            p_on: 200.0,
            p_suspend: 200.0,
            p_sleep: 14.0,
            p_wakeup: 200.0,
            t_suspend: 10.0,
            t_wakeup: 10.0,
            timeout: 10.0,
        }
    }
}

impl PowerModel {
    pub fn power(&self, state: PowerState) -> f64 {
        match state {
            PowerState::On => self.p_on,
            PowerState::Suspend => self.p_suspend,
            PowerState::Sleep => self.p_sleep,
            PowerState::Wakeup => self.p_wakeup,
        }
    }

    pub fn max_power(&self) -> f64 {
        self.p_on
            .max(self.p_suspend)
            .max(self.p_wakeup)
            .max(self.p_sleep)
    }

    pub fn min_power(&self) -> f64 {
        self.p_on
            .min(self.p_suspend)
            .min(self.p_wakeup)
            .min(self.p_sleep)
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("p_on", self.p_on),
            ("p_suspend", self.p_suspend),
            ("p_sleep", self.p_sleep),
            ("p_wakeup", self.p_wakeup),
            ("t_suspend", self.t_suspend),
            ("t_wakeup", self.t_wakeup),
            ("timeout", self.timeout),
        ];
        for (name, v) in fields {
            if v.is_nan() || v < 0.0 {
                return Err(Error::Config(format!(
                    "power.{name} must be non-negative, got {v}"
                )));
            }
            if v.is_infinite() && name != "timeout" {
                return Err(Error::Config(format!("power.{name} must be finite")));
            }
        }
        Ok(())
    }
}

/// Index of a request in the run's arrival order.
pub type RequestId = usize;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Request {
    pub arrival_time: f64,
    pub assigned_server: usize,
    pub service_start: Option<f64>,
    pub completion: Option<f64>,
}

impl Request {
    pub fn new(arrival_time: f64, assigned_server: usize) -> Self {
        Request {
            arrival_time,
            assigned_server,
            service_start: None,
            completion: None,
        }
    }

    pub fn latency(&self) -> Option<f64> {
        self.completion.map(|c| c - self.arrival_time)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimerKind {
    ServiceComplete,
    /// Carries the generation it was armed with; a newer generation
    /// means the timeout was cancelled.
    Timeout(u64),
    SuspendDone,
    WakeupDone,
}

/// A future transition the caller must schedule for this server.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Timer {
    pub at: f64,
    pub kind: TimerKind,
}

/// Side effects of one server transition.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Effects {
    pub timer: Option<Timer>,
    pub started: Option<RequestId>,
    pub completed: Option<RequestId>,
}

/// A closed interval of constant power state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub start: f64,
    pub end: f64,
    pub state: PowerState,
}

#[derive(Debug, Clone)]
pub struct Server {
    pub id: usize,
    power_state: PowerState,
    queue: VecDeque<RequestId>,
    in_service: Option<RequestId>,
    pending_arrival_during_suspend: bool,
    state_entered_at: f64,
    idle_since: Option<f64>,
    timeout_generation: u64,
    timeline: Vec<Segment>,
    assigned: usize,
    completed: usize,
}

impl Server {
    /// A server in `Sleep` with an empty queue at `t = 0`.
    pub fn new(id: usize) -> Self {
        Server {
            id,
            power_state: PowerState::Sleep,
            queue: VecDeque::new(),
            in_service: None,
            pending_arrival_during_suspend: false,
            state_entered_at: 0.0,
            idle_since: None,
            timeout_generation: 0,
            timeline: Vec::new(),
            assigned: 0,
            completed: 0,
        }
    }

    /// A server that is `On` and idle at `t = 0`. The returned timer is
    /// its initial timeout, if the timeout is finite.
    pub fn new_on(id: usize, model: &PowerModel) -> (Self, Option<Timer>) {
        let mut s = Server::new(id);
        s.power_state = PowerState::On;
        s.idle_since = Some(0.0);
        let timer = s.arm_timeout(0.0, model);
        (s, timer)
    }

    pub fn power_state(&self) -> PowerState {
        self.power_state
    }

    /// Queued plus in-service requests.
    pub fn queue_size(&self) -> usize {
        self.queue.len() + usize::from(self.in_service.is_some())
    }

    pub fn waiting(&self) -> usize {
        self.queue.len()
    }

    pub fn in_service(&self) -> Option<RequestId> {
        self.in_service
    }

    pub fn pending_arrival_during_suspend(&self) -> bool {
        self.pending_arrival_during_suspend
    }

    pub fn idle_since(&self) -> Option<f64> {
        self.idle_since
    }

    pub fn state_entered_at(&self) -> f64 {
        self.state_entered_at
    }

    pub fn assigned(&self) -> usize {
        self.assigned
    }

    pub fn completed(&self) -> usize {
        self.completed
    }

    /// Closed segments so far; the current state is open from
    /// [`Server::state_entered_at`].
    pub fn timeline(&self) -> &[Segment] {
        &self.timeline
    }

    /// Closes the open segment at `end` and returns the full timeline.
    pub fn finish_timeline(&self, end: f64) -> Vec<Segment> {
        let mut out = self.timeline.clone();
        if end > self.state_entered_at {
            out.push(Segment {
                start: self.state_entered_at,
                end,
                state: self.power_state,
            });
        }
        out
    }

    pub fn power_of(&self, model: &PowerModel) -> f64 {
        model.power(self.power_state)
    }

    fn enter(&mut self, state: PowerState, now: f64) {
        if now > self.state_entered_at {
            self.timeline.push(Segment {
                start: self.state_entered_at,
                end: now,
                state: self.power_state,
            });
        }
        self.power_state = state;
        self.state_entered_at = now;
    }

    fn arm_timeout(&mut self, now: f64, model: &PowerModel) -> Option<Timer> {
        self.timeout_generation += 1;
        model.timeout.is_finite().then_some(Timer {
            at: now + model.timeout,
            kind: TimerKind::Timeout(self.timeout_generation),
        })
    }

    fn start_next(&mut self, now: f64, service_time: f64) -> Effects {
        match self.queue.pop_front() {
            Some(req) => {
                self.in_service = Some(req);
                self.idle_since = None;
                Effects {
                    timer: Some(Timer {
                        at: now + service_time,
                        kind: TimerKind::ServiceComplete,
                    }),
                    started: Some(req),
                    completed: None,
                }
            }
            None => Effects::default(),
        }
    }

    fn logic(&self, what: &str) -> Error {
        Error::Logic(format!(
            "server {}: {what} while {} (queue {})",
            self.id,
            self.power_state,
            self.queue_size()
        ))
    }

    pub fn on_request_assigned(
        &mut self,
        req: RequestId,
        now: f64,
        model: &PowerModel,
        service_time: f64,
    ) -> Effects {
        self.queue.push_back(req);
        self.assigned += 1;
        match self.power_state {
            PowerState::On if self.in_service.is_none() => {
                // Any armed timeout is now stale.
                self.timeout_generation += 1;
                self.start_next(now, service_time)
            }
            PowerState::On | PowerState::Wakeup => Effects::default(),
            PowerState::Sleep => {
                self.enter(PowerState::Wakeup, now);
                Effects {
                    timer: Some(Timer {
                        at: now + model.t_wakeup,
                        kind: TimerKind::WakeupDone,
                    }),
                    ..Effects::default()
                }
            }
            PowerState::Suspend => {
                self.pending_arrival_during_suspend = true;
                Effects::default()
            }
        }
    }

    pub fn on_service_complete(
        &mut self,
        now: f64,
        model: &PowerModel,
        service_time: f64,
    ) -> Result<Effects> {
        let done = self
            .in_service
            .take()
            .ok_or_else(|| self.logic("service completion"))?;
        self.completed += 1;
        let mut effects = self.start_next(now, service_time);
        if effects.started.is_none() {
            self.idle_since = Some(now);
            effects.timer = self.arm_timeout(now, model);
        }
        effects.completed = Some(done);
        Ok(effects)
    }

    /// Returns `Ok(None)` for a stale (cancelled) timeout.
    pub fn on_timeout(
        &mut self,
        generation: u64,
        now: f64,
        model: &PowerModel,
    ) -> Result<Option<Effects>> {
        if generation != self.timeout_generation {
            return Ok(None);
        }
        if self.power_state != PowerState::On || self.queue_size() != 0 {
            return Err(self.logic("timeout"));
        }
        self.idle_since = None;
        self.enter(PowerState::Suspend, now);
        Ok(Some(Effects {
            timer: Some(Timer {
                at: now + model.t_suspend,
                kind: TimerKind::SuspendDone,
            }),
            ..Effects::default()
        }))
    }

    pub fn on_suspend_done(&mut self, now: f64, model: &PowerModel) -> Result<Effects> {
        if self.power_state != PowerState::Suspend {
            return Err(self.logic("suspend-done"));
        }
        if self.pending_arrival_during_suspend {
            self.pending_arrival_during_suspend = false;
            self.enter(PowerState::Wakeup, now);
            Ok(Effects {
                timer: Some(Timer {
                    at: now + model.t_wakeup,
                    kind: TimerKind::WakeupDone,
                }),
                ..Effects::default()
            })
        } else {
            self.enter(PowerState::Sleep, now);
            Ok(Effects::default())
        }
    }

    pub fn on_wakeup_done(
        &mut self,
        now: f64,
        model: &PowerModel,
        service_time: f64,
    ) -> Result<Effects> {
        if self.power_state != PowerState::Wakeup {
            return Err(self.logic("wakeup-done"));
        }
        self.enter(PowerState::On, now);
        let mut effects = self.start_next(now, service_time);
        if effects.started.is_none() {
            self.idle_since = Some(now);
            effects.timer = self.arm_timeout(now, model);
        }
        Ok(effects)
    }
}
