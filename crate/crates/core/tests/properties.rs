use greenlb::policy::{
    evaluate, parse_policy, select_server, DesignParams, NdResolution, PolicyExpr, ServerSnapshot,
};
use greenlb::rng::{policy_stream, ScriptedUniforms};
use greenlb::validation::delta;
use greenlb::{PowerModel, PowerState};
use proptest::prelude::*;

fn leaf() -> impl Strategy<Value = PolicyExpr> {
    prop_oneof![
        Just(PolicyExpr::Id),
        Just(PolicyExpr::NumServers),
        Just(PolicyExpr::QueueSize),
        Just(PolicyExpr::StateOn),
        Just(PolicyExpr::StateSleep),
        Just(PolicyExpr::StateSuspend),
        Just(PolicyExpr::StateWakeup),
        Just(PolicyExpr::PowerOn),
        Just(PolicyExpr::PowerSleep),
        Just(PolicyExpr::PowerSuspend),
        Just(PolicyExpr::PowerWakeup),
        Just(PolicyExpr::TimeWakeup),
        Just(PolicyExpr::TimeSuspend),
        Just(PolicyExpr::TimeOutTime),
        Just(PolicyExpr::Random),
        (0u64..1000).prop_map(PolicyExpr::IntLit),
        "[a-z][a-z0-9_]{0,5}".prop_map(PolicyExpr::DSpace),
    ]
}

fn expr() -> impl Strategy<Value = PolicyExpr> {
    leaf().prop_recursive(5, 48, 2, |inner| {
        let b = |e: PolicyExpr| Box::new(e);
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(move |(l, r)| PolicyExpr::Add(b(l), b(r))),
            (inner.clone(), inner.clone()).prop_map(move |(l, r)| PolicyExpr::Sub(b(l), b(r))),
            (inner.clone(), inner.clone()).prop_map(move |(l, r)| PolicyExpr::Mul(b(l), b(r))),
            (inner.clone(), inner.clone()).prop_map(move |(l, r)| PolicyExpr::Div(b(l), b(r))),
            (inner.clone(), inner.clone()).prop_map(move |(l, r)| PolicyExpr::Mod(b(l), b(r))),
            inner.prop_map(move |e| PolicyExpr::Neg(b(e))),
        ]
    })
}

fn state() -> impl Strategy<Value = PowerState> {
    prop_oneof![
        Just(PowerState::On),
        Just(PowerState::Suspend),
        Just(PowerState::Sleep),
        Just(PowerState::Wakeup),
    ]
}

fn snapshots<'a>(
    cells: &[(usize, PowerState)],
    power: &'a PowerModel,
    params: &'a DesignParams,
) -> Vec<ServerSnapshot<'a>> {
    cells
        .iter()
        .enumerate()
        .map(|(id, &(queue_size, power_state))| ServerSnapshot {
            id,
            num_servers: cells.len(),
            queue_size,
            power_state,
            power,
            params,
        })
        .collect()
}

proptest! {
    #[test]
    fn printing_then_parsing_is_identity(e in expr()) {
        let text = e.to_string();
        let back = parse_policy(&text).map_err(|err| TestCaseError::fail(format!("{text}: {err}")))?;
        prop_assert_eq!(back, e);
    }

    #[test]
    fn selection_is_an_argmax(
        cells in prop::collection::vec((0usize..6, state()), 1..10),
        seed in any::<u64>(),
        q in 0u32..50,
    ) {
        let power = PowerModel::default();
        let params: DesignParams = [("q".to_string(), f64::from(q))].into();
        let policy = parse_policy("-queueSize - dspace(\"q\") * (1 - stateOn)").unwrap();
        let snaps = snapshots(&cells, &power, &params);
        for nd in [NdResolution::RandomFraction, NdResolution::FixedOrder] {
            let sel = select_server(&policy, &snaps, nd, &mut policy_stream(seed)).unwrap();
            let max = sel.base.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            prop_assert_eq!(sel.base[sel.server], max);
            let rmax = sel.resolved.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            prop_assert_eq!(sel.resolved[sel.server], rmax);
            if nd == NdResolution::FixedOrder {
                let highest = sel.base.iter().rposition(|&v| v == max).unwrap();
                prop_assert_eq!(sel.server, highest);
            }
        }
    }

    #[test]
    fn evaluation_is_pure(
        cells in prop::collection::vec((0usize..6, state()), 1..6),
        e in expr(),
        draws in prop::collection::vec(0.0f64..1.0, 1..8),
    ) {
        let power = PowerModel::default();
        let params: DesignParams =
            e.dspace_names().into_iter().map(|n| (n.to_string(), 3.0)).collect();
        let snaps = snapshots(&cells, &power, &params);
        let before = format!("{snaps:?}");
        for s in &snaps {
            let a = evaluate(&e, s, &mut ScriptedUniforms::new(draws.clone()));
            let b = evaluate(&e, s, &mut ScriptedUniforms::new(draws.clone()));
            match (a, b) {
                (Ok(x), Ok(y)) => prop_assert!(x.to_bits() == y.to_bits() || (x.is_nan() && y.is_nan())),
                (Err(x), Err(y)) => prop_assert_eq!(x.to_string(), y.to_string()),
                _ => prop_assert!(false, "evaluation is not deterministic"),
            }
        }
        prop_assert_eq!(before, format!("{snaps:?}"));
    }

    #[test]
    fn delta_axioms(a in 1e-3f64..1e6, b in 1e-3f64..1e6, k in prop::sample::select(vec![0.5, 2.0, 4.0, 0.25, 8.0])) {
        prop_assert_eq!(delta(a, a).unwrap(), 0.0);
        prop_assert_eq!(delta(a, b).unwrap(), delta(b, a).unwrap());
        prop_assert_eq!(delta(k * a, k * b).unwrap(), delta(a, b).unwrap());
    }
}

#[test]
fn delta_is_not_a_metric() {
    let (d12, d24, d14) = (
        delta(1.0, 2.0).unwrap(),
        delta(2.0, 4.0).unwrap(),
        delta(1.0, 4.0).unwrap(),
    );
    assert_eq!((d12, d24, d14), (1.0, 1.0, 3.0));
    assert!(d14 > d12 + d24);
}

#[test]
fn delta_rejects_non_positive() {
    assert!(delta(0.0, 1.0).is_err());
    assert!(delta(1.0, -2.0).is_err());
}
