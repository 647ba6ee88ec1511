use greenlb::engine::{
    simulate, simulate_assigned, InitialState, SimConfig, SimOptions, Simulation,
};
use greenlb::metrics::{compute_al, compute_ap, summarize};
use greenlb::{parse_policy, PowerModel, PowerState};

fn config(policy: &str, q: f64, timeout: f64, seed: u64) -> SimConfig {
    let mut cfg = SimConfig::new(parse_policy(policy).unwrap());
    cfg.params.insert("q".into(), q);
    cfg.power.timeout = timeout;
    cfg.seed = seed;
    cfg
}

const EQ11: &str = "-queueSize - dspace(\"q\") * (1 - stateOn)";

/// Twelve arrivals split over four sleeping servers, traced by hand with
/// s = 1, wake-up 10 s and TO = 10 s.
#[test]
fn hand_traced_twelve_requests() {
    let arrivals = [
        0.87, 0.91, 1.46, 2.03, 3.54, 4.68, 5.42, 5.52, 5.66, 7.26, 9.61, 10.34,
    ];
    let servers = [3, 0, 3, 2, 0, 2, 0, 3, 2, 2, 1, 0];
    let mut cfg = config("0", 0.0, 10.0, 0);
    cfg.warmup = 0.0;
    let sim = simulate_assigned(&cfg, &arrivals, &servers, SimOptions::default()).unwrap();

    let expected = [
        11.0, 11.0, 11.41, 11.0, 9.37, 9.35, 8.49, 8.35, 9.37, 8.77, 11.0, 4.57,
    ];
    for (i, (r, want)) in sim.requests.iter().zip(expected).enumerate() {
        let got = r.latency().unwrap();
        assert!((got - want).abs() < 1e-9, "request {i}: {got} vs {want}");
    }
    assert!((sim.horizon - 20.61).abs() < 1e-9);

    // sleep 14 W x 13.42 s, wake-up 200 W x 40 s, on 200 W x 29.02 s
    let energy = 14.0 * 13.42 + 200.0 * 40.0 + 200.0 * 29.02;
    let ap = compute_ap(&sim.timelines, &cfg.power, 0.0, sim.horizon).unwrap();
    assert!(
        (ap.total * sim.horizon - energy).abs() < 1e-6,
        "{}",
        ap.total * sim.horizon
    );
}

fn check_timeline(sim: &Simulation, power: &PowerModel, initial: PowerState) {
    for (server, tl) in sim.timelines.iter().enumerate() {
        assert_eq!(tl.first().unwrap().start, 0.0);
        assert_eq!(tl.first().unwrap().state, initial);
        assert!(tl.last().unwrap().end >= sim.horizon);
        for w in tl.windows(2) {
            assert_eq!(w[0].end, w[1].start, "gap on server {server}");
            assert_ne!(w[0].state, w[1].state);
            match w[1].state {
                PowerState::Sleep => {
                    assert_eq!(w[0].state, PowerState::Suspend);
                    assert!((w[0].end - w[0].start - power.t_suspend).abs() < 1e-9);
                }
                PowerState::Wakeup => {
                    assert!(matches!(
                        w[0].state,
                        PowerState::Sleep | PowerState::Suspend
                    ));
                }
                PowerState::Suspend => assert_eq!(w[0].state, PowerState::On),
                PowerState::On => {
                    assert!(matches!(
                        w[0].state,
                        PowerState::Wakeup | PowerState::Suspend
                    ));
                }
            }
            if w[0].state == PowerState::Wakeup {
                assert!((w[0].end - w[0].start - power.t_wakeup).abs() < 1e-9);
            }
        }
    }
}

#[test]
fn timelines_follow_the_state_machine() {
    for seed in 0..40 {
        let timeout = [1.0, 2.0, 7.5, 30.0][seed as usize % 4];
        let mut cfg = config(EQ11, [1.0, 5.0, 100.0][seed as usize % 3], timeout, seed);
        cfg.stop = greenlb::StopCriterion::MaxRequests(400);
        cfg.warmup = 50.0;
        let sim = simulate(&cfg, SimOptions::default()).unwrap();
        check_timeline(&sim, &cfg.power, PowerState::Sleep);
    }
}

#[test]
fn requests_are_conserved_and_served_fifo() {
    for seed in 0..40 {
        let mut cfg = config(EQ11, 5.0, 3.0, seed);
        cfg.arrival_rate = 3.0;
        cfg.stop = greenlb::StopCriterion::MaxRequests(500);
        let sim = simulate(&cfg, SimOptions::default()).unwrap();
        assert_eq!(sim.requests.len(), 500);
        for server in 0..cfg.num_servers {
            let mine: Vec<_> = sim
                .requests
                .iter()
                .filter(|r| r.assigned_server == server)
                .collect();
            for w in mine.windows(2) {
                let (a, b) = (w[0], w[1]);
                assert!(a.arrival_time < b.arrival_time);
                assert!(a.completion.unwrap() + cfg.service_time <= b.completion.unwrap() + 1e-9);
                assert!(b.service_start.unwrap() >= a.completion.unwrap());
            }
            for r in &mine {
                assert!(r.service_start.unwrap() >= r.arrival_time);
                assert_eq!(
                    r.completion.unwrap(),
                    r.service_start.unwrap() + cfg.service_time
                );
            }
        }
    }
}

#[test]
fn latency_recomputed_from_trace_matches() {
    let mut cfg = config(EQ11, 5.0, 10.0, 21);
    cfg.stop = greenlb::StopCriterion::MaxRequests(800);
    cfg.warmup = 100.0;
    let sim = simulate(&cfg, SimOptions { trace: true }).unwrap();
    let arrivals: Vec<(f64, usize)> = sim
        .trace
        .iter()
        .filter(|t| t.event == "arrival")
        .map(|t| (t.time, t.server))
        .collect();
    let mut done: Vec<Vec<f64>> = vec![Vec::new(); cfg.num_servers];
    for t in sim.trace.iter().filter(|t| t.event == "service_complete") {
        done[t.server].push(t.time);
    }
    let mut next = vec![0; cfg.num_servers];
    let mut latencies = Vec::new();
    for (at, server) in arrivals {
        let c = done[server][next[server]];
        next[server] += 1;
        if at >= cfg.warmup {
            latencies.push(c - at);
        }
    }
    let from_trace = latencies.iter().sum::<f64>() / latencies.len() as f64;
    let al = compute_al(&sim.requests, cfg.warmup).unwrap();
    assert!((from_trace - al).abs() < 1e-9);
}

#[test]
fn power_equals_state_fractions_times_power() {
    for seed in 0..10 {
        let cfg = config(EQ11, 10.0, 4.0, seed);
        let sim = simulate(&cfg, SimOptions::default()).unwrap();
        let r = summarize(&cfg, &sim).unwrap();
        let mut total = 0.0;
        for f in &r.state_fractions {
            assert!((f.sum() - 1.0).abs() < 1e-9);
            total += PowerState::ALL
                .iter()
                .map(|&s| f.get(s) * cfg.power.power(s))
                .sum::<f64>();
        }
        assert!(
            (total - r.total_power_w).abs() < 1e-9,
            "{total} vs {}",
            r.total_power_w
        );
        assert!((r.avg_power_per_server_w * cfg.num_servers as f64 - r.total_power_w).abs() < 1e-9);
    }
}

#[test]
fn near_idle_cluster_sleeps() {
    let mut cfg = config(EQ11, 5.0, 1.0, 3);
    cfg.arrival_rate = 0.0001;
    cfg.stop = greenlb::StopCriterion::MaxTime(greenlb::engine::FiniteTime(20_000.0));
    cfg.warmup = 100.0;
    let r = greenlb::engine::run(&cfg).unwrap();
    assert!(
        (r.avg_power_per_server_w - 14.0).abs() < 0.5,
        "{}",
        r.avg_power_per_server_w
    );
}

#[test]
fn always_on_start_stays_on_without_timeout() {
    let mut cfg = config("-queueSize", 0.0, f64::INFINITY, 5);
    cfg.initial_state = InitialState::On;
    cfg.stop = greenlb::StopCriterion::MaxRequests(300);
    let sim = simulate(&cfg, SimOptions::default()).unwrap();
    check_timeline(&sim, &cfg.power, PowerState::On);
    assert!(sim.timelines.iter().all(|tl| tl.len() == 1));
    assert!(sim
        .requests
        .iter()
        .all(|r| (r.latency().unwrap() - 1.0).abs() < 1e-9 || r.latency().unwrap() > 1.0));
}
