//! Post-processing of traces: route switches, oscillation period, dominant
//! ingress.

use std::collections::BTreeMap;

use crate::trace::TraceRecord;

/// Selected next hop of `node` towards `dest` at each ROUTE row, in trace
/// order.
pub fn route_series(records: &[TraceRecord], node: &str, dest: &str) -> Vec<(f64, String)> {
    records
        .iter()
        .filter_map(|r| match r {
            TraceRecord::Route {
                node: n,
                destination,
                next_hop,
                ..
            } if n == node && destination == dest => Some((r.time_s(), next_hop.clone())),
            _ => None,
        })
        .collect()
}

/// Times at which the selected next hop changed, with the new next hop.
pub fn route_switches(records: &[TraceRecord], node: &str, dest: &str) -> Vec<(f64, String)> {
    let mut out = Vec::new();
    let mut prev: Option<String> = None;
    for (t, hop) in route_series(records, node, dest) {
        if prev.as_ref().is_some_and(|p| *p != hop) {
            out.push((t, hop.clone()));
        }
        prev = Some(hop);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Oscillation {
    pub switch_times: Vec<f64>,
    /// Gaps between consecutive switches.
    pub intervals: Vec<f64>,
    /// Time taken to return to a next hop after leaving it.
    pub periods: Vec<f64>,
    pub mean_period_s: Option<f64>,
    pub min_period_s: Option<f64>,
}

/// Route oscillation statistics for `node` towards `dest`.
///
/// The first observation and every switch are anchors. A period is the time
/// from an anchor selecting next hop `h` to the next anchor that selects `h`
/// again. With fewer than two switches there is no period.
pub fn oscillation_period(records: &[TraceRecord], node: &str, dest: &str) -> Oscillation {
    let series = route_series(records, node, dest);
    let Some(first) = series.first() else {
        return Oscillation::default();
    };
    let switches = route_switches(records, node, dest);
    let mut anchors = vec![first.clone()];
    anchors.extend(switches.iter().cloned());

    let intervals: Vec<f64> = switches.windows(2).map(|w| w[1].0 - w[0].0).collect();
    let mut periods = Vec::new();
    let mut last_seen: BTreeMap<&str, f64> = BTreeMap::new();
    if switches.len() >= 2 {
        for (t, hop) in &anchors {
            if let Some(prev) = last_seen.insert(hop.as_str(), *t) {
                periods.push(t - prev);
            }
        }
    }
    let mean = (!periods.is_empty()).then(|| periods.iter().sum::<f64>() / periods.len() as f64);
    let min = periods.iter().copied().reduce(f64::min);
    Oscillation {
        switch_times: switches.iter().map(|s| s.0).collect(),
        intervals,
        periods,
        mean_period_s: mean,
        min_period_s: min,
    }
}

/// For each sample time, the ingress neighbour through which `node` received
/// the most data bytes. Ties go to the lexicographically smaller name.
pub fn dominant_ingress(records: &[TraceRecord], node: &str) -> Vec<(f64, String)> {
    let mut per_time: BTreeMap<u64, BTreeMap<&str, u64>> = BTreeMap::new();
    for r in records {
        if let TraceRecord::Throughput {
            time_us,
            node: n,
            ingress,
            bytes,
        } = r
        {
            if n == node && *bytes > 0 {
                *per_time
                    .entry(*time_us)
                    .or_default()
                    .entry(ingress)
                    .or_default() += bytes;
            }
        }
    }
    per_time
        .into_iter()
        .filter_map(|(t, m)| {
            let best = m.iter().map(|(k, v)| (*v, std::cmp::Reverse(*k))).max()?;
            Some((t as f64 / 1e6, best.1 .0.to_string()))
        })
        .collect()
}

/// Collapses consecutive duplicates of the dominant-ingress series, keeping
/// the time each value was first seen.
pub fn ingress_sequence(records: &[TraceRecord], node: &str) -> Vec<(f64, String)> {
    let mut out: Vec<(f64, String)> = Vec::new();
    for (t, hop) in dominant_ingress(records, node) {
        if out.last().is_none_or(|l| l.1 != hop) {
            out.push((t, hop));
        }
    }
    out
}
