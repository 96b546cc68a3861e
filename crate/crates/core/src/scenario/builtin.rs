use super::{parse_scenario, Scenario};

const SOURCES: &[(&str, &str)] = &[
    ("fourcity", include_str!("../../scenarios/fourcity.scn")),
    ("diamond", include_str!("../../scenarios/diamond.scn")),
    (
        "diamond-unbounded",
        include_str!("../../scenarios/diamond-unbounded.scn"),
    ),
    (
        "diamond-far",
        include_str!("../../scenarios/diamond-far.scn"),
    ),
];

pub fn builtin_names() -> impl Iterator<Item = &'static str> {
    SOURCES.iter().map(|(name, _)| *name)
}

/// Scenario file text of a builtin.
pub fn builtin_source(name: &str) -> Option<&'static str> {
    SOURCES.iter().find(|(n, _)| *n == name).map(|(_, s)| *s)
}

pub fn builtin_scenario(name: &str) -> Option<Scenario> {
    builtin_source(name).map(|text| parse_scenario(text).expect("builtin scenario parses"))
}

pub fn builtin_scenarios() -> Vec<(&'static str, Scenario)> {
    SOURCES
        .iter()
        .map(|(name, text)| {
            (
                *name,
                parse_scenario(text).expect("builtin scenario parses"),
            )
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::NodeId;
    use crate::scenario::Rate;

    #[test]
    fn all_builtins_parse() {
        let all = builtin_scenarios();
        assert_eq!(all.len(), 4);
        for (name, sc) in all {
            assert!(sc.validate().is_ok(), "{name}");
        }
    }

    #[test]
    fn diamond_shape() {
        let sc = builtin_scenario("diamond").unwrap();
        assert_eq!(sc.nodes.len(), 4);
        assert_eq!(sc.links.len(), 4);
        let congested: Vec<String> = sc
            .links
            .iter()
            .filter(|l| matches!(l.rate, Rate::BytesPerSecond(_)))
            .map(|l| l.name())
            .collect();
        assert_eq!(congested, ["A-B", "A-C"]);
        let flow = &sc.flows[0];
        assert_eq!(
            (flow.source.as_str(), flow.destination.as_str()),
            ("A", "D")
        );
        let Rate::BytesPerSecond(r) = sc.links[0].rate else {
            unreachable!()
        };
        assert!(flow.rate_bytes_per_s > r);
    }

    #[test]
    fn far_variant_congests_near_destination() {
        let sc = builtin_scenario("diamond-far").unwrap();
        let congested: Vec<String> = sc
            .links
            .iter()
            .filter(|l| matches!(l.rate, Rate::BytesPerSecond(_)))
            .map(|l| l.name())
            .collect();
        assert_eq!(congested, ["B-D", "C-D"]);
    }

    #[test]
    fn unbounded_keeps_slope() {
        let bounded = builtin_scenario("diamond").unwrap().config.cost;
        let unbounded = builtin_scenario("diamond-unbounded").unwrap().config.cost;
        assert!((bounded.slope() - unbounded.slope()).abs() < 1e-12);
        assert!(unbounded.max_rtt() > 10.0 * bounded.max_rtt());
    }

    #[test]
    fn fourcity_matches_experiment() {
        let sc = builtin_scenario("fourcity").unwrap();
        let c = sc.config.cost;
        assert_eq!((c.min_rtt(), c.max_rtt()), (10.0, 200.0));
        assert_eq!((c.min_cost().0, c.max_cost().0), (96, 246));
        assert!(sc.node(&NodeId::new("Tokyo")).is_some());
        assert_eq!(sc.events[0].time_s, 13.0 * 60.0);
        assert_eq!(sc.events[1].time_s, 14.0 * 60.0);
    }

    #[test]
    fn text_round_trip() {
        for (name, sc) in builtin_scenarios() {
            let again = parse_scenario(&sc.to_text()).unwrap();
            assert_eq!(sc, again, "{name}");
        }
    }
}
