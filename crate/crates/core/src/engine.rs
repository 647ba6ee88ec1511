//! Deterministic discrete-event loop.
//!
//! Events are ordered by `(time, rank, sequence)`. The rank fixes the order
//! of simultaneous events so that server state settles before a new
//! arrival observes it:
//!
//! `ServiceComplete < SuspendDone < WakeupDone < Timeout < Arrival`

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::cluster::{Effects, PowerModel, PowerState, Request, Segment, Server, TimerKind};
use crate::error::{Error, Result};
use crate::metrics::{summarize, RunResult};
use crate::policy::{
    check_params, select_server, DesignParams, NdResolution, PolicyExpr, ServerSnapshot,
};
use crate::rng::{arrival_stream, policy_stream, SimRng, UniformSource};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopCriterion {
    /// Inject this many arrivals, then drain.
    MaxRequests(usize),
    /// Inject arrivals up to this virtual time, then drain; power is
    /// integrated up to this time.
    MaxTime(FiniteTime),
}

/// Wrapper so that `StopCriterion` can derive `Eq`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FiniteTime(pub f64);

impl Eq for FiniteTime {}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitialState {
    Sleep,
    On,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub num_servers: usize,
    /// Poisson arrival rate per second.
    pub arrival_rate: f64,
    /// Deterministic service time in seconds.
    pub service_time: f64,
    pub power: PowerModel,
    pub policy: PolicyExpr,
    pub nd: NdResolution,
    pub params: DesignParams,
    pub stop: StopCriterion,
    pub warmup: f64,
    pub batches: usize,
    pub initial_state: InitialState,
    pub seed: u64,
}

impl SimConfig {
    /// Four sleeping servers, unit arrival rate and service time, default
    /// power model, 1500 requests, 500 s warm-up, 20 batches.
    pub fn new(policy: PolicyExpr) -> Self {
        SimConfig {
            num_servers: 4,
            arrival_rate: 1.0,
            service_time: 1.0,
            power: PowerModel::default(),
            policy,
            nd: NdResolution::RandomFraction,
            params: DesignParams::new(),
            stop: StopCriterion::MaxRequests(1500),
            warmup: 500.0,
            batches: 20,
            initial_state: InitialState::Sleep,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.num_servers == 0 {
            return bad("num_servers must be positive".into());
        }
        if !(self.arrival_rate >= 0.0 && self.arrival_rate.is_finite()) {
            return bad(format!(
                "arrival_rate must be non-negative, got {}",
                self.arrival_rate
            ));
        }
        if self.arrival_rate == 0.0 && matches!(self.stop, StopCriterion::MaxRequests(_)) {
            return bad(
                "arrival_rate 0 needs max_time, max_requests would never be reached".into(),
            );
        }
        if !(self.service_time > 0.0 && self.service_time.is_finite()) {
            return bad(format!(
                "service_time must be positive, got {}",
                self.service_time
            ));
        }
        if !(self.warmup >= 0.0 && self.warmup.is_finite()) {
            return bad(format!("warmup must be non-negative, got {}", self.warmup));
        }
        match self.stop {
            StopCriterion::MaxRequests(0) => return bad("max_requests must be positive".into()),
            StopCriterion::MaxTime(FiniteTime(t)) if !(t > 0.0 && t.is_finite()) => {
                return bad(format!("max_time must be positive, got {t}"))
            }
            _ => {}
        }
        if self.batches < 2 {
            return bad("batches must be at least 2".into());
        }
        self.power.validate()?;
        check_params(&self.policy, &self.params)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    ServiceComplete(usize),
    SuspendDone(usize),
    WakeupDone(usize),
    Timeout(usize, u64),
    Arrival,
}

impl EventKind {
    fn rank(self) -> u8 {
        match self {
            EventKind::ServiceComplete(_) => 0,
            EventKind::SuspendDone(_) => 1,
            EventKind::WakeupDone(_) => 2,
            EventKind::Timeout(..) => 3,
            EventKind::Arrival => 4,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Event {
    pub time: f64,
    pub sequence: u64,
    pub kind: EventKind,
}

impl Event {
    fn key(&self) -> (f64, u8, u64) {
        (self.time, self.kind.rank(), self.sequence)
    }
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Event {}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Event {
    // Reversed: BinaryHeap is a max-heap.
    fn cmp(&self, other: &Self) -> Ordering {
        let (a, b) = (self.key(), other.key());
        b.0.total_cmp(&a.0).then(b.1.cmp(&a.1)).then(b.2.cmp(&a.2))
    }
}

/// Future event list with a monotone sequence counter.
#[derive(Debug, Default)]
pub struct EventQueue {
    heap: BinaryHeap<Event>,
    next_sequence: u64,
}

impl EventQueue {
    pub fn push(&mut self, time: f64, kind: EventKind) {
        let sequence = self.next_sequence;
        self.next_sequence += 1;
        self.heap.push(Event {
            time,
            sequence,
            kind,
        });
    }

    pub fn pop(&mut self) -> Option<Event> {
        self.heap.pop()
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }
}

/// Exponential inter-arrival time by inversion. A draw of exactly 0 is
/// redrawn so that arrival times stay strictly increasing.
pub fn generate_interarrival(rng: &mut dyn UniformSource, rate: f64) -> f64 {
    loop {
        let u = rng.uniform();
        if u > 0.0 {
            return -(-u).ln_1p() / rate;
        }
    }
}

/// One row of the optional per-run trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub time: f64,
    pub server: usize,
    pub event: String,
    pub power_state: PowerState,
    pub queue_size: usize,
}

/// Raw output of a run, before metrics are computed.
#[derive(Debug, Clone)]
pub struct Simulation {
    pub requests: Vec<Request>,
    /// Per-server state timelines, gapless from 0 to at least `horizon`.
    pub timelines: Vec<Vec<Segment>>,
    /// End of the power-measurement window.
    pub horizon: f64,
    pub trace: Vec<TraceRow>,
    pub events_processed: u64,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SimOptions {
    pub trace: bool,
}

enum Arrivals {
    Poisson {
        rng: Box<SimRng>,
        rate: f64,
        next: f64,
    },
    Listed {
        times: Vec<f64>,
        next: usize,
    },
}

impl Arrivals {
    fn next_time(&mut self) -> Option<f64> {
        match self {
            Arrivals::Poisson { rng, rate, next } => {
                *next += generate_interarrival(rng.as_mut(), *rate);
                Some(*next)
            }
            Arrivals::Listed { times, next } => {
                let t = times.get(*next).copied();
                *next += 1;
                t
            }
        }
    }
}

enum Dispatch<'a> {
    Policy {
        expr: &'a PolicyExpr,
        nd: NdResolution,
        rng: Box<SimRng>,
    },
    Fixed(&'a [usize]),
}

struct Engine<'a> {
    cfg: &'a SimConfig,
    servers: Vec<Server>,
    queue: EventQueue,
    requests: Vec<Request>,
    trace: Option<Vec<TraceRow>>,
    clock: f64,
    events_processed: u64,
}

impl Engine<'_> {
    fn record(&mut self, time: f64, server: usize, event: &str) {
        if let Some(trace) = self.trace.as_mut() {
            let s = &self.servers[server];
            trace.push(TraceRow {
                time,
                server,
                event: event.to_string(),
                power_state: s.power_state(),
                queue_size: s.queue_size(),
            });
        }
    }

    fn apply(&mut self, server: usize, now: f64, effects: Effects) {
        if let Some(req) = effects.completed {
            self.requests[req].completion = Some(now);
            self.record(now, server, "service_complete");
        }
        if let Some(req) = effects.started {
            self.requests[req].service_start = Some(now);
            self.record(now, server, "service_start");
        }
        if let Some(timer) = effects.timer {
            let kind = match timer.kind {
                TimerKind::ServiceComplete => EventKind::ServiceComplete(server),
                TimerKind::Timeout(g) => EventKind::Timeout(server, g),
                TimerKind::SuspendDone => EventKind::SuspendDone(server),
                TimerKind::WakeupDone => EventKind::WakeupDone(server),
            };
            self.queue.push(timer.at, kind);
        }
    }

    fn choose(&self, dispatch: &mut Dispatch<'_>, index: usize) -> Result<usize> {
        match dispatch {
            Dispatch::Fixed(assignments) => {
                let server = *assignments.get(index).ok_or_else(|| {
                    Error::InconsistentTrace(format!("no assignment for request {index}"))
                })?;
                if server >= self.servers.len() {
                    return Err(Error::InconsistentTrace(format!(
                        "request {index} assigned to unknown server {server}"
                    )));
                }
                Ok(server)
            }
            Dispatch::Policy { expr, nd, rng } => {
                let snaps: Vec<ServerSnapshot<'_>> = self
                    .servers
                    .iter()
                    .map(|s| ServerSnapshot {
                        id: s.id,
                        num_servers: self.servers.len(),
                        queue_size: s.queue_size(),
                        power_state: s.power_state(),
                        power: &self.cfg.power,
                        params: &self.cfg.params,
                    })
                    .collect();
                select_server(expr, &snaps, *nd, rng.as_mut())
                    .map(|sel| sel.server)
                    .map_err(|e| Error::PolicyAborted {
                        request_index: index,
                        source: Box::new(e),
                    })
            }
        }
    }

    fn run(mut self, mut arrivals: Arrivals, mut dispatch: Dispatch<'_>) -> Result<Simulation> {
        let cfg = self.cfg;
        let (max_requests, time_limit) = match cfg.stop {
            StopCriterion::MaxRequests(n) => (n, f64::INFINITY),
            StopCriterion::MaxTime(FiniteTime(t)) => (usize::MAX, t),
        };
        let mut arrivals_open = true;
        match arrivals.next_time() {
            Some(t) if t <= time_limit => self.queue.push(t, EventKind::Arrival),
            _ => arrivals_open = false,
        }
        // Under a time limit, idle timers keep firing up to the limit so
        // the power window sees the suspend/sleep transitions.
        let settle_until = match cfg.stop {
            StopCriterion::MaxRequests(_) => f64::NEG_INFINITY,
            StopCriterion::MaxTime(FiniteTime(t)) => t,
        };
        let mut outstanding = 0usize;
        let (power, service) = (&cfg.power, cfg.service_time);

        while let Some(ev) = self.queue.pop() {
            if !arrivals_open && outstanding == 0 && ev.time > settle_until {
                break;
            }
            if ev.time < self.clock {
                return Err(Error::Logic(format!(
                    "event at {} precedes clock {}",
                    ev.time, self.clock
                )));
            }
            self.clock = ev.time;
            self.events_processed += 1;
            let now = ev.time;
            match ev.kind {
                EventKind::Arrival => {
                    let index = self.requests.len();
                    let server = self.choose(&mut dispatch, index)?;
                    self.requests.push(Request::new(now, server));
                    outstanding += 1;
                    let effects =
                        self.servers[server].on_request_assigned(index, now, power, service);
                    self.record(now, server, "arrival");
                    self.apply(server, now, effects);
                    if self.requests.len() >= max_requests {
                        arrivals_open = false;
                    } else {
                        match arrivals.next_time() {
                            Some(t) if t <= time_limit => self.queue.push(t, EventKind::Arrival),
                            _ => arrivals_open = false,
                        }
                    }
                }
                EventKind::ServiceComplete(s) => {
                    let effects = self.servers[s].on_service_complete(now, power, service)?;
                    outstanding -= 1;
                    self.apply(s, now, effects);
                }
                EventKind::Timeout(s, generation) => {
                    if let Some(effects) = self.servers[s].on_timeout(generation, now, power)? {
                        self.record(now, s, "timeout");
                        self.apply(s, now, effects);
                    }
                }
                EventKind::SuspendDone(s) => {
                    let effects = self.servers[s].on_suspend_done(now, power)?;
                    self.record(now, s, "suspend_done");
                    self.apply(s, now, effects);
                }
                EventKind::WakeupDone(s) => {
                    let effects = self.servers[s].on_wakeup_done(now, power, service)?;
                    self.record(now, s, "wakeup_done");
                    self.apply(s, now, effects);
                }
            }
        }

        if outstanding != 0 {
            return Err(Error::Logic(format!(
                "{outstanding} requests never completed"
            )));
        }
        let horizon = match cfg.stop {
            StopCriterion::MaxRequests(_) => self
                .requests
                .iter()
                .filter_map(|r| r.completion)
                .fold(0.0, f64::max),
            StopCriterion::MaxTime(FiniteTime(t)) => t,
        };
        let close = horizon.max(self.clock);
        Ok(Simulation {
            timelines: self
                .servers
                .iter()
                .map(|s| s.finish_timeline(close))
                .collect(),
            requests: self.requests,
            horizon,
            trace: self.trace.unwrap_or_default(),
            events_processed: self.events_processed,
        })
    }
}

fn build_engine(cfg: &SimConfig, opts: SimOptions) -> Engine<'_> {
    let mut queue = EventQueue::default();
    let servers = (0..cfg.num_servers)
        .map(|id| match cfg.initial_state {
            InitialState::Sleep => Server::new(id),
            InitialState::On => {
                let (s, timer) = Server::new_on(id, &cfg.power);
                if let Some(t) = timer {
                    if let TimerKind::Timeout(g) = t.kind {
                        queue.push(t.at, EventKind::Timeout(id, g));
                    }
                }
                s
            }
        })
        .collect();
    Engine {
        cfg,
        servers,
        queue,
        requests: Vec::new(),
        trace: opts.trace.then(Vec::new),
        clock: 0.0,
        events_processed: 0,
    }
}

/// Runs the configured Poisson workload through the policy.
pub fn simulate(cfg: &SimConfig, opts: SimOptions) -> Result<Simulation> {
    cfg.validate()?;
    let arrivals = Arrivals::Poisson {
        rng: Box::new(arrival_stream(cfg.seed)),
        rate: cfg.arrival_rate,
        next: 0.0,
    };
    let dispatch = Dispatch::Policy {
        expr: &cfg.policy,
        nd: cfg.nd,
        rng: Box::new(policy_stream(cfg.seed)),
    };
    build_engine(cfg, opts).run(arrivals, dispatch)
}

/// Replays explicit arrival times with fixed server assignments; the
/// configured policy and arrival rate are ignored.
pub fn simulate_assigned(
    cfg: &SimConfig,
    arrivals: &[f64],
    assignments: &[usize],
    opts: SimOptions,
) -> Result<Simulation> {
    cfg.validate()?;
    if arrivals.len() != assignments.len() {
        return Err(Error::InconsistentTrace(format!(
            "{} arrivals but {} assignments",
            arrivals.len(),
            assignments.len()
        )));
    }
    if arrivals.windows(2).any(|w| w[1] <= w[0]) || arrivals.first().is_some_and(|&t| t < 0.0) {
        return Err(Error::InconsistentTrace(
            "arrival times must be non-negative and strictly increasing".into(),
        ));
    }
    let mut cfg = cfg.clone();
    cfg.stop = StopCriterion::MaxRequests(arrivals.len().max(1));
    let engine = build_engine(&cfg, opts);
    let arrivals = Arrivals::Listed {
        times: arrivals.to_vec(),
        next: 0,
    };
    // `engine` borrows the local clone; finish before it drops.
    engine.run(arrivals, Dispatch::Fixed(assignments))
}

/// Simulates and summarises one run.
pub fn run(cfg: &SimConfig) -> Result<RunResult> {
    let sim = simulate(cfg, SimOptions::default())?;
    summarize(cfg, &sim)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::parse_policy;
    use crate::rng::ScriptedUniforms;

    fn cfg(policy: &str) -> SimConfig {
        let mut c = SimConfig::new(parse_policy(policy).unwrap());
        c.warmup = 0.0;
        c
    }

    #[test]
    fn interarrival_inverse_cdf() {
        let u = 1.0 - (-1.0f64).exp();
        let mut s = ScriptedUniforms::new(vec![u]);
        assert!((generate_interarrival(&mut s, 1.0) - 1.0).abs() < 1e-12);
        let mut s = ScriptedUniforms::new(vec![0.0, 0.0, u]);
        let x = generate_interarrival(&mut s, 2.0);
        assert!(x > 0.0 && (x - 0.5).abs() < 1e-12);
    }

    #[test]
    fn interarrival_mean() {
        let mut rng = arrival_stream(11);
        let n = 1_000_000;
        let mean = (0..n)
            .map(|_| generate_interarrival(&mut rng, 1.0))
            .sum::<f64>()
            / n as f64;
        assert!((mean - 1.0).abs() < 0.01, "{mean}");
    }

    #[test]
    fn event_order_breaks_ties_by_kind_then_sequence() {
        let mut q = EventQueue::default();
        q.push(1.0, EventKind::Arrival);
        q.push(1.0, EventKind::Timeout(0, 1));
        q.push(1.0, EventKind::WakeupDone(0));
        q.push(1.0, EventKind::SuspendDone(1));
        q.push(1.0, EventKind::ServiceComplete(2));
        q.push(0.5, EventKind::Arrival);
        q.push(1.0, EventKind::ServiceComplete(1));
        let order: Vec<_> = std::iter::from_fn(|| q.pop()).map(|e| e.kind).collect();
        assert_eq!(
            order,
            vec![
                EventKind::Arrival,
                EventKind::ServiceComplete(2),
                EventKind::ServiceComplete(1),
                EventKind::SuspendDone(1),
                EventKind::WakeupDone(0),
                EventKind::Timeout(0, 1),
                EventKind::Arrival,
            ]
        );
    }

    #[test]
    fn single_request_on_sleeping_cluster() {
        let c = cfg("-queueSize");
        let sim = simulate_assigned(&c, &[2.0], &[1], SimOptions::default()).unwrap();
        assert_eq!(sim.requests[0].latency(), Some(11.0));
        assert_eq!(sim.horizon, 13.0);
    }

    #[test]
    fn constant_preference_routes_everything_to_server_zero() {
        let mut c = cfg("0 - id");
        c.arrival_rate = 5.0;
        c.stop = StopCriterion::MaxRequests(300);
        let sim = simulate(&c, SimOptions::default()).unwrap();
        assert!(sim.requests.iter().all(|r| r.assigned_server == 0));
    }

    #[test]
    fn time_stop_drains_and_integrates_to_limit() {
        let mut c = cfg("-queueSize");
        c.stop = StopCriterion::MaxTime(FiniteTime(200.0));
        let sim = simulate(&c, SimOptions::default()).unwrap();
        assert_eq!(sim.horizon, 200.0);
        assert!(sim.requests.iter().all(|r| r.arrival_time <= 200.0));
        assert!(sim.requests.iter().all(|r| r.completion.is_some()));
        for tl in &sim.timelines {
            assert_eq!(tl[0].start, 0.0);
            assert!(tl.windows(2).all(|w| w[0].end == w[1].start));
            assert!(tl.last().unwrap().end >= 200.0);
        }
    }

    #[test]
    fn idle_timers_fire_before_the_time_limit() {
        let mut c = cfg("0");
        c.stop = StopCriterion::MaxTime(FiniteTime(1000.0));
        c.arrival_rate = 0.0;
        c.initial_state = InitialState::On;
        let sim = simulate(&c, SimOptions::default()).unwrap();
        assert!(sim.requests.is_empty());
        let states: Vec<_> = sim.timelines[0]
            .iter()
            .map(|s| (s.start, s.state))
            .collect();
        assert_eq!(
            states,
            vec![
                (0.0, PowerState::On),
                (10.0, PowerState::Suspend),
                (20.0, PowerState::Sleep)
            ]
        );
    }

    #[test]
    fn policy_errors_name_the_request() {
        let mut c = cfg("1 / queueSize");
        c.nd = NdResolution::FixedOrder;
        match simulate(&c, SimOptions::default()) {
            Err(Error::PolicyAborted { request_index, .. }) => assert_eq!(request_index, 0),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn undefined_param_is_a_config_error_before_running() {
        let c = cfg("dspace(\"q\")");
        assert!(matches!(
            simulate(&c, SimOptions::default()),
            Err(Error::UndefinedParam(_))
        ));
    }

    #[test]
    fn zero_rate_needs_a_time_limit() {
        let mut c = cfg("0");
        c.arrival_rate = 0.0;
        assert!(matches!(c.validate(), Err(Error::Config(_))));
        c.stop = StopCriterion::MaxTime(FiniteTime(100.0));
        c.warmup = 10.0;
        let r = run(&c).unwrap();
        assert_eq!(r.avg_latency_s, None);
        assert_eq!(r.avg_power_per_server_w, 14.0);
    }

    #[test]
    fn same_seed_same_trace() {
        let mut c = cfg("-queueSize - 3*(1-stateOn)");
        c.stop = StopCriterion::MaxRequests(400);
        c.seed = 99;
        let opts = SimOptions { trace: true };
        let a = simulate(&c, opts).unwrap();
        let b = simulate(&c, opts).unwrap();
        assert_eq!(a.trace, b.trace);
        assert_eq!(a.requests, b.requests);
    }

    #[test]
    fn nd_mode_does_not_move_arrivals() {
        let mut c = cfg("-queueSize");
        c.stop = StopCriterion::MaxRequests(200);
        let a = simulate(&c, SimOptions::default()).unwrap();
        c.nd = NdResolution::FixedOrder;
        let b = simulate(&c, SimOptions::default()).unwrap();
        let times = |s: &Simulation| {
            s.requests
                .iter()
                .map(|r| r.arrival_time)
                .collect::<Vec<_>>()
        };
        assert_eq!(times(&a), times(&b));
    }
}
