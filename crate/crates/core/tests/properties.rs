use proptest::prelude::*;

use rttroute::protocol::{select_route, HysteresisConfig};
use rttroute::scenario::{builtin_scenarios, parse_scenario};
use rttroute::{
    mills_rtt, rtt_to_cost, saturating_metric_add, Cost, CostConfig, NodeId, RouteEntry, RttSample,
    Timestamp, TimestampExchange,
};

fn cost_config() -> impl Strategy<Value = CostConfig> {
    (1.0..100.0f64, 1.0..1000.0f64, 1u16..1000, 1u16..5000).prop_map(
        |(min_rtt, span, min_cost, rise)| {
            CostConfig::new(min_rtt, min_rtt + span, min_cost, min_cost + rise).unwrap()
        },
    )
}

fn route(hop: &str, ma: u16, ms: f64) -> RouteEntry {
    RouteEntry {
        destination: NodeId::new("D"),
        next_hop: NodeId::new(hop),
        received_metric: Cost(0),
        advertised_metric: Cost(ma),
        smoothed_metric: ms,
        last_smooth_update: 0.0,
        selected: false,
    }
}

proptest! {
    #[test]
    fn cost_is_monotone_and_bounded(cfg in cost_config(), a in 0.0..5000.0f64, b in 0.0..5000.0f64) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let (cl, ch) = (rtt_to_cost(lo, &cfg), rtt_to_cost(hi, &cfg));
        prop_assert!(cl <= ch);
        prop_assert!(cfg.min_cost() <= cl && ch <= cfg.max_cost());
        prop_assert!(ch.is_finite());
    }

    #[test]
    fn metric_add_saturates(a in any::<u16>(), b in any::<u16>()) {
        let s = saturating_metric_add(Cost(a), Cost(b));
        if a == 0xFFFF || b == 0xFFFF {
            prop_assert_eq!(s, Cost::INFINITY);
        } else {
            prop_assert_eq!(s.0 as u32, (a as u32 + b as u32).min(0xFFFE));
        }
    }

    #[test]
    fn mills_sample_is_non_negative(t1 in 0u64..1 << 50, u1 in 0u64..1 << 50, l in 0u64..1 << 30, r in 0u64..1 << 30) {
        let x = TimestampExchange {
            t1: Timestamp(t1),
            u1: Timestamp(u1),
            u2: Timestamp(u1 + r),
            t2: Timestamp(t1 + l),
        };
        let s: RttSample = mills_rtt(&x).unwrap();
        prop_assert!(s.rtt >= 0.0);
        prop_assert_eq!(s.clamped, l < r);
        if l >= r {
            prop_assert_eq!(s.rtt, (l - r) as f64 / 1000.0);
        }
    }

    #[test]
    fn smoothed_metric_stays_between_old_and_target(ms in 0.0..65535.0f64, ma in 0u16..0xFFFE, dt in 0.0..1000.0f64) {
        let h = HysteresisConfig::default();
        let mut r = route("B", ma, ms);
        r.update_smoothed_metric(dt, &h);
        let (lo, hi) = if ms <= ma as f64 { (ms, ma as f64) } else { (ma as f64, ms) };
        prop_assert!(r.smoothed_metric >= lo - 1e-9 && r.smoothed_metric <= hi + 1e-9);
    }

    #[test]
    fn selection_never_picks_retracted(routes in prop::collection::vec((0u16..=0xFFFF, 0.0..70000.0f64), 1..6), cur in 0usize..6) {
        let entries: Vec<RouteEntry> = routes
            .iter()
            .enumerate()
            .map(|(i, (ma, ms))| route(&format!("N{i}"), *ma, *ms))
            .collect();
        let refs: Vec<&RouteEntry> = entries.iter().collect();
        let current = entries.get(cur);
        match select_route(current, &refs) {
            Some(r) => prop_assert!(!r.is_retracted()),
            None => prop_assert!(entries.iter().all(|e| e.is_retracted())),
        }
    }

    #[test]
    fn selection_is_order_independent(routes in prop::collection::vec((0u16..0xFFFE, 0.0..70000.0f64), 1..6)) {
        let entries: Vec<RouteEntry> = routes
            .iter()
            .enumerate()
            .map(|(i, (ma, ms))| route(&format!("N{i}"), *ma, *ms))
            .collect();
        let fwd: Vec<&RouteEntry> = entries.iter().collect();
        let rev: Vec<&RouteEntry> = entries.iter().rev().collect();
        let a = select_route(Some(&entries[0]), &fwd).map(|r| r.next_hop.clone());
        let b = select_route(Some(&entries[0]), &rev).map(|r| r.next_hop.clone());
        prop_assert_eq!(a, b);
    }
}

#[test]
fn builtin_scenarios_round_trip_through_text() {
    for (name, sc) in builtin_scenarios() {
        let again = parse_scenario(&sc.to_text()).unwrap_or_else(|e| panic!("{name}: {e}"));
        assert_eq!(again, sc, "{name}");
    }
}
