use rttroute::scenario::{builtin_scenarios, parse_scenario};
use rttroute::sim::{run, Simulator};
use rttroute::trace::{DropReason, NullSink, TraceRecord};
use rttroute::NodeId;

#[test]
fn builtins_conserve_packets() {
    for (name, mut sc) in builtin_scenarios() {
        sc.config.horizon_s = sc.config.horizon_s.min(1200.0);
        let summary = run(&sc, 3, &mut NullSink).unwrap();
        assert_eq!(summary.malformed_packets, 0, "{name}");
        for f in &summary.flows {
            assert!(f.is_conserved(), "{name}: {f:?}");
            assert!(f.delivered > 0, "{name}: {f:?}");
        }
    }
}

#[test]
fn line_topology_routes_through_middle() {
    let sc = parse_scenario(
        "[config]\nhorizon_s = 120\n[node A]\n[node B]\n[node C]\n\
         [link A B]\ndelay_ms = 10\n[link B C]\ndelay_ms = 20\n",
    )
    .unwrap();
    let mut sim = Simulator::new(&sc, 0).unwrap();
    sim.run_until(120.0, &mut NullSink);
    let a = sim.node("A").unwrap();
    assert_eq!(a.next_hop(&NodeId::new("C")), Some(&NodeId::new("B")));
    let c = sim.node("C").unwrap();
    assert_eq!(c.next_hop(&NodeId::new("A")), Some(&NodeId::new("B")));
    assert_eq!(c.next_hop(&NodeId::new("B")), Some(&NodeId::new("B")));
}

#[test]
fn partition_retracts_routes_and_drops_data() {
    let sc = parse_scenario(
        "[config]\nhorizon_s = 200\n[node A]\n[node B]\n[node C]\n\
         [link A B]\ndelay_ms = 10\n[link B C]\ndelay_ms = 10\n\
         [flow A C]\nrate = 10000\nstart_s = 30\n\
         [event 100]\ndown = B C\n",
    )
    .unwrap();
    let mut trace = Vec::new();
    let mut sim = Simulator::new(&sc, 2).unwrap();
    sim.run_until(99.0, &mut trace);
    assert!(sim.node("A").unwrap().next_hop(&NodeId::new("C")).is_some());
    sim.run_until(200.0, &mut trace);
    assert!(sim.node("A").unwrap().next_hop(&NodeId::new("C")).is_none());
    let summary = sim.finish();
    let f = &summary.flows[0];
    assert!(f.is_conserved(), "{f:?}");
    assert!(f.dropped_no_route > 0 || f.dropped_link_down > 0, "{f:?}");

    let reasons: Vec<DropReason> = trace
        .iter()
        .filter_map(|r| match r {
            TraceRecord::Drop { reason, .. } => Some(*reason),
            _ => None,
        })
        .collect();
    assert!(reasons.contains(&DropReason::LinkDown));
}

#[test]
fn link_restoration_brings_routes_back() {
    let sc = parse_scenario(
        "[config]\nhorizon_s = 300\n[node A]\n[node B]\n\
         [link A B]\ndelay_ms = 10\n\
         [event 60]\ndown = A B\n[event 120]\nup = A B\n",
    )
    .unwrap();
    let mut sim = Simulator::new(&sc, 0).unwrap();
    sim.run_until(100.0, &mut NullSink);
    assert!(sim.node("A").unwrap().next_hop(&NodeId::new("B")).is_none());
    assert!(sim.node("A").unwrap().neighbours().is_empty());
    sim.run_until(150.0, &mut NullSink);
    assert_eq!(
        sim.node("A").unwrap().next_hop(&NodeId::new("B")),
        Some(&NodeId::new("B"))
    );
}

#[test]
fn sample_rows_are_time_ordered() {
    let sc = rttroute::scenario::builtin_scenario("fourcity").unwrap();
    let mut trace = Vec::new();
    run(&sc, 0, &mut trace).unwrap();
    assert!(trace.windows(2).all(|w| w[0].time_us() <= w[1].time_us()));
    let routes = trace
        .iter()
        .filter(|r| matches!(r, TraceRecord::Route { .. }))
        .count();
    // 4 nodes x 3 destinations, once per second, after the first second or so
    assert!(routes > 12 * 1100, "{routes}");
}
