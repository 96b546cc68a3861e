//! Deterministic discrete-event simulation of an overlay network running the
//! routing protocol.
//!
//! Nodes are [`Node`] state machines with skewed local clocks. Links are
//! rate-limited drop-tail FIFOs with propagation delay; protocol and data
//! packets share the queues. A run is a pure function of the scenario and
//! the seed.

mod clock;
mod event;
mod link;

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::protocol::{Node, NodeEvent, NodeId, NodeOutput, Packet};
use crate::scenario::{LinkAction, Rate, Scenario, ValidationError};
use crate::trace::{DropReason, TraceRecord, TraceSink};

pub use clock::NodeClock;
pub use event::{EventQueue, SimEvent};
pub use link::{LinkState, Transmit};

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Invalid(#[from] ValidationError),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DataPacket {
    pub flow: usize,
    pub destination: usize,
    pub ttl: u8,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Payload {
    Protocol(Packet),
    Data(DataPacket),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimPacket {
    pub bytes: u32,
    pub payload: Payload,
}

#[derive(Debug, Clone)]
pub enum Action {
    NodeTick(usize),
    Deliver {
        link: usize,
        dir: usize,
        generation: u64,
        packet: SimPacket,
    },
    LinkChange {
        link: usize,
        up: bool,
    },
    FlowEmit(usize),
    TraceSample,
}

/// Per-flow packet accounting. At the end of a run
/// `emitted == delivered + dropped_* + in_flight`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FlowStats {
    pub emitted: u64,
    pub delivered: u64,
    pub dropped_queue: u64,
    pub dropped_link_down: u64,
    pub dropped_no_route: u64,
    pub dropped_ttl: u64,
    pub in_flight: u64,
}

impl FlowStats {
    pub fn dropped(&self) -> u64 {
        self.dropped_queue + self.dropped_link_down + self.dropped_no_route + self.dropped_ttl
    }

    pub fn is_conserved(&self) -> bool {
        self.emitted == self.delivered + self.dropped() + self.in_flight
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SimSummary {
    pub flows: Vec<FlowStats>,
    pub protocol_packets_sent: u64,
    pub protocol_packets_dropped: u64,
    /// Transmitted packets carrying an IHU without a Hello.
    pub malformed_packets: u64,
    pub events_processed: u64,
}

pub struct Simulator {
    horizon: f64,
    sample_period: f64,
    samples_taken: u64,
    ttl: u8,
    ids: Vec<NodeId>,
    index: BTreeMap<NodeId, usize>,
    nodes: Vec<Node>,
    clocks: Vec<NodeClock>,
    rngs: Vec<ChaCha8Rng>,
    links: Vec<LinkState>,
    link_names: Vec<String>,
    adjacency: BTreeMap<(usize, usize), usize>,
    flows: Vec<(usize, usize, u32, f64, f64, Option<f64>)>,
    flow_emitted_seq: Vec<u64>,
    stats: SimSummary,
    queue: EventQueue<Action>,
    throughput: BTreeMap<(usize, usize), u64>,
    drops: BTreeMap<(String, DropReason), u64>,
}

impl Simulator {
    pub fn new(scenario: &Scenario, seed: u64) -> Result<Self, SimError> {
        scenario.validate()?;
        let ids: Vec<NodeId> = scenario.nodes.iter().map(|n| n.id.clone()).collect();
        let index: BTreeMap<NodeId, usize> = ids
            .iter()
            .enumerate()
            .map(|(i, id)| (id.clone(), i))
            .collect();

        let mut links = Vec::new();
        let mut link_names = Vec::new();
        let mut adjacency = BTreeMap::new();
        for (li, l) in scenario.links.iter().enumerate() {
            let a = index[&l.a];
            let b = index[&l.b];
            let rate = match l.rate {
                Rate::Unlimited => None,
                Rate::BytesPerSecond(r) => Some(r),
            };
            links.push(LinkState::new(
                a,
                b,
                l.delay_ms / 1000.0,
                rate,
                l.queue_capacity,
            ));
            link_names.push(l.name());
            adjacency.insert((a, b), li);
            adjacency.insert((b, a), li);
        }

        let nodes: Vec<Node> = scenario
            .nodes
            .iter()
            .enumerate()
            .map(|(i, spec)| {
                let ifaces = adjacency
                    .keys()
                    .filter(|(from, _)| *from == i)
                    .map(|(_, to)| ids[*to].clone())
                    .collect();
                Node::new(spec.id.clone(), scenario.node_config(spec), ifaces)
            })
            .collect();
        let clocks = scenario
            .nodes
            .iter()
            .map(|n| NodeClock::from_ppm(n.skew_ppm, n.epoch_offset_s))
            .collect();
        let rngs = (0..nodes.len())
            .map(|i| {
                let mut r = ChaCha8Rng::seed_from_u64(seed);
                r.set_stream(i as u64);
                r
            })
            .collect();

        let flows: Vec<_> = scenario
            .flows
            .iter()
            .map(|f| {
                (
                    index[&f.source],
                    index[&f.destination],
                    f.packet_size,
                    f.rate_bytes_per_s,
                    f.start_s,
                    f.stop_s,
                )
            })
            .collect();

        let mut sim = Simulator {
            horizon: scenario.config.horizon_s,
            sample_period: scenario.config.sample_period_s,
            samples_taken: 0,
            ttl: scenario.config.ttl,
            ids,
            index,
            nodes,
            clocks,
            rngs,
            links,
            link_names,
            adjacency,
            flow_emitted_seq: vec![0; flows.len()],
            stats: SimSummary {
                flows: vec![FlowStats::default(); flows.len()],
                ..SimSummary::default()
            },
            flows,
            queue: EventQueue::default(),
            throughput: BTreeMap::new(),
            drops: BTreeMap::new(),
        };

        for i in 0..sim.nodes.len() {
            let first = sim.nodes[i].start(0.0, &mut sim.rngs[i]);
            sim.queue.schedule(first, Action::NodeTick(i));
        }
        for e in &scenario.events {
            let a = sim.index[&e.a];
            let b = sim.index[&e.b];
            let link = sim.adjacency[&(a, b)];
            sim.queue.schedule(
                e.time_s,
                Action::LinkChange {
                    link,
                    up: e.action == LinkAction::Up,
                },
            );
        }
        for (fi, f) in sim.flows.iter().enumerate() {
            sim.queue.schedule(f.4, Action::FlowEmit(fi));
        }
        sim.queue.schedule(sim.sample_period, Action::TraceSample);
        Ok(sim)
    }

    pub fn now(&self) -> f64 {
        self.queue.now()
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node(&self, id: &str) -> Option<&Node> {
        self.index.get(&NodeId::new(id)).map(|&i| &self.nodes[i])
    }

    pub fn summary(&self) -> &SimSummary {
        &self.stats
    }

    /// Processes every event scheduled at or before `until` (capped at the
    /// horizon).
    pub fn run_until(&mut self, until: f64, sink: &mut dyn TraceSink) {
        let until = until.min(self.horizon);
        while self.queue.peek_time().is_some_and(|t| t <= until) {
            let ev = self.queue.pop().expect("peeked");
            self.stats.events_processed += 1;
            self.dispatch(ev.fire_time, ev.action, sink);
        }
    }

    /// Runs to the horizon and settles the accounting of packets still in
    /// transit.
    pub fn run(mut self, sink: &mut dyn TraceSink) -> SimSummary {
        self.run_until(self.horizon, sink);
        self.finish()
    }

    pub fn finish(mut self) -> SimSummary {
        for ev in self.queue.iter() {
            if let Action::Deliver {
                link,
                generation,
                packet:
                    SimPacket {
                        payload: Payload::Data(d),
                        ..
                    },
                ..
            } = &ev.action
            {
                let stats = &mut self.stats.flows[d.flow];
                if self.links[*link].generation != *generation {
                    stats.dropped_link_down += 1;
                } else {
                    stats.in_flight += 1;
                }
            }
        }
        self.stats
    }

    fn dispatch(&mut self, now: f64, action: Action, sink: &mut dyn TraceSink) {
        match action {
            Action::NodeTick(i) => {
                let local = self.clocks[i].local_time(now);
                let out = self.nodes[i].periodic_tick(now, local, &mut self.rngs[i]);
                self.apply_output(i, out, now, sink);
                let next = self.nodes[i].next_wakeup();
                self.queue.schedule(next, Action::NodeTick(i));
            }
            Action::Deliver {
                link,
                dir,
                generation,
                packet,
            } => self.deliver(link, dir, generation, packet, now, sink),
            Action::LinkChange { link, up } => {
                if up {
                    self.links[link].set_up();
                } else {
                    self.links[link].set_down(now);
                }
            }
            Action::FlowEmit(fi) => self.emit_flow(fi, now),
            Action::TraceSample => {
                self.sample(now, sink);
                self.samples_taken += 1;
                let next = (self.samples_taken + 1) as f64 * self.sample_period;
                if next <= self.horizon {
                    self.queue.schedule(next, Action::TraceSample);
                }
            }
        }
    }

    fn apply_output(&mut self, node: usize, out: NodeOutput, now: f64, sink: &mut dyn TraceSink) {
        for ev in out.events {
            if let NodeEvent::RttSample {
                neighbour,
                sample,
                smoothed_ms,
                link_cost,
            } = ev
            {
                sink.record(TraceRecord::Rtt {
                    time_us: to_us(now),
                    node: self.ids[node].to_string(),
                    neighbour: neighbour.to_string(),
                    sample_ms_micro: (sample.rtt * 1000.0).round() as u64,
                    smoothed_ms_micro: (smoothed_ms * 1000.0).round() as u64,
                    link_cost: link_cost.0,
                });
            }
        }
        for o in out.packets {
            let Some(&peer) = self.index.get(&o.interface) else {
                continue;
            };
            if !o.packet.is_well_formed() {
                self.stats.malformed_packets += 1;
            }
            self.stats.protocol_packets_sent += 1;
            let packet = SimPacket {
                bytes: o.packet.size_bytes(),
                payload: Payload::Protocol(o.packet),
            };
            self.transmit(node, peer, packet, now);
        }
    }

    /// Hands a packet to the link `from -> to`. Returns whether it was
    /// accepted.
    fn transmit(&mut self, from: usize, to: usize, packet: SimPacket, now: f64) -> bool {
        let Some(&li) = self.adjacency.get(&(from, to)) else {
            return false;
        };
        let link = &mut self.links[li];
        let dir = link.direction_from(from).expect("endpoint");
        let reason = match link.transmit(dir, packet.bytes, now) {
            Transmit::Scheduled { deliver_at } => {
                let generation = link.generation;
                self.queue.schedule(
                    deliver_at,
                    Action::Deliver {
                        link: li,
                        dir,
                        generation,
                        packet,
                    },
                );
                return true;
            }
            Transmit::QueueFull => DropReason::QueueFull,
            Transmit::LinkDown => DropReason::LinkDown,
        };
        self.count_drop(self.link_names[li].clone(), reason, &packet);
        false
    }

    fn count_drop(&mut self, place: String, reason: DropReason, packet: &SimPacket) {
        *self.drops.entry((place, reason)).or_default() += 1;
        match &packet.payload {
            Payload::Data(d) => {
                let s = &mut self.stats.flows[d.flow];
                match reason {
                    DropReason::QueueFull => s.dropped_queue += 1,
                    DropReason::LinkDown => s.dropped_link_down += 1,
                    DropReason::NoRoute => s.dropped_no_route += 1,
                    DropReason::Ttl => s.dropped_ttl += 1,
                }
            }
            Payload::Protocol(_) => self.stats.protocol_packets_dropped += 1,
        }
    }

    fn deliver(
        &mut self,
        li: usize,
        dir: usize,
        generation: u64,
        packet: SimPacket,
        now: f64,
        sink: &mut dyn TraceSink,
    ) {
        let link = &self.links[li];
        if !link.up || link.generation != generation {
            self.count_drop(self.link_names[li].clone(), DropReason::LinkDown, &packet);
            return;
        }
        let to = link.receiver(dir);
        let from = link.sender(dir);
        match packet.payload {
            Payload::Protocol(p) => {
                let local = self.clocks[to].local_time(now);
                let iface = self.ids[from].clone();
                let out = self.nodes[to].on_packet(&iface, &p, local, now);
                self.apply_output(to, out, now, sink);
            }
            Payload::Data(d) => self.forward(to, d, packet.bytes, Some(from), now),
        }
    }

    /// Delivers locally or sends the packet towards the selected next hop.
    fn forward(
        &mut self,
        at: usize,
        mut data: DataPacket,
        bytes: u32,
        ingress: Option<usize>,
        now: f64,
    ) {
        if data.destination == at {
            self.stats.flows[data.flow].delivered += 1;
            if let Some(from) = ingress {
                *self.throughput.entry((at, from)).or_default() += bytes as u64;
            }
            return;
        }
        let packet = |d: DataPacket| SimPacket {
            bytes,
            payload: Payload::Data(d),
        };
        if data.ttl == 0 {
            let place = self.ids[at].to_string();
            self.count_drop(place, DropReason::Ttl, &packet(data));
            return;
        }
        let dest_id = &self.ids[data.destination];
        let next = self.nodes[at]
            .next_hop(dest_id)
            .and_then(|hop| self.index.get(hop).copied());
        let Some(next) = next else {
            let place = self.ids[at].to_string();
            self.count_drop(place, DropReason::NoRoute, &packet(data));
            return;
        };
        data.ttl -= 1;
        self.transmit(at, next, packet(data), now);
    }

    fn emit_flow(&mut self, fi: usize, now: f64) {
        let (src, dst, size, rate, start, stop) = self.flows[fi];
        if stop.is_some_and(|s| now >= s) {
            return;
        }
        self.stats.flows[fi].emitted += 1;
        let data = DataPacket {
            flow: fi,
            destination: dst,
            ttl: self.ttl,
        };
        self.forward(src, data, size, None, now);
        self.flow_emitted_seq[fi] += 1;
        let next = start + self.flow_emitted_seq[fi] as f64 * (size as f64 / rate);
        if next <= self.horizon && stop.is_none_or(|s| next < s) {
            self.queue.schedule(next, Action::FlowEmit(fi));
        }
    }

    fn sample(&mut self, now: f64, sink: &mut dyn TraceSink) {
        let time_us = to_us(now);
        for (i, node) in self.nodes.iter().enumerate() {
            let h = node.config().hysteresis;
            for r in node.selected_routes() {
                sink.record(TraceRecord::Route {
                    time_us,
                    node: self.ids[i].to_string(),
                    destination: r.destination.to_string(),
                    next_hop: r.next_hop.to_string(),
                    m_advertised: r.advertised_metric.0,
                    m_smoothed_milli: (r.smoothed_at(now, &h) * 1000.0).round() as u64,
                });
            }
        }
        for ((node, from), bytes) in std::mem::take(&mut self.throughput) {
            sink.record(TraceRecord::Throughput {
                time_us,
                node: self.ids[node].to_string(),
                ingress: self.ids[from].to_string(),
                bytes,
            });
        }
        for ((link, reason), count) in std::mem::take(&mut self.drops) {
            sink.record(TraceRecord::Drop {
                time_us,
                link,
                reason,
                count,
            });
        }
    }
}

fn to_us(t: f64) -> u64 {
    (t * 1e6).round() as u64
}

/// Validates `scenario` and runs it to its horizon.
pub fn run(
    scenario: &Scenario,
    seed: u64,
    sink: &mut dyn TraceSink,
) -> Result<SimSummary, SimError> {
    Ok(Simulator::new(scenario, seed)?.run(sink))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{parse_scenario, FlowSpec, LinkSpec, NodeSpec};
    use crate::trace::to_csv;

    fn two_nodes(delay_ms: f64) -> Scenario {
        let mut sc = Scenario {
            nodes: vec![NodeSpec::new("A"), NodeSpec::new("B")],
            links: vec![LinkSpec::new("A", "B", delay_ms)],
            ..Scenario::default()
        };
        sc.config.horizon_s = 120.0;
        sc
    }

    #[test]
    fn empty_scenario_has_no_rows() {
        let mut sc = Scenario::default();
        sc.config.horizon_s = 10.0;
        let mut trace = Vec::new();
        let summary = run(&sc, 0, &mut trace).unwrap();
        assert!(trace.is_empty());
        assert_eq!(summary.events_processed, 10);
    }

    #[test]
    fn two_nodes_measure_propagation() {
        let sc = two_nodes(135.0);
        let mut sim = Simulator::new(&sc, 3).unwrap();
        let mut trace = Vec::new();
        sim.run_until(60.0, &mut trace);
        for n in sim.nodes() {
            let peer = n.neighbours().values().next().unwrap();
            let rtt = peer.estimator.smoothed().unwrap();
            assert!((rtt - 270.0).abs() < 0.01, "{rtt}");
        }
    }

    #[test]
    fn same_seed_same_trace() {
        let sc = two_nodes(20.0);
        let mut t1 = Vec::new();
        let mut t2 = Vec::new();
        run(&sc, 11, &mut t1).unwrap();
        run(&sc, 11, &mut t2).unwrap();
        assert_eq!(to_csv(&t1), to_csv(&t2));
        let mut t3 = Vec::new();
        run(&sc, 12, &mut t3).unwrap();
        assert_ne!(to_csv(&t1), to_csv(&t3));
    }

    #[test]
    fn flow_is_conserved_and_delivered() {
        let mut sc = two_nodes(10.0);
        sc.flows.push(FlowSpec {
            source: NodeId::new("A"),
            destination: NodeId::new("B"),
            rate_bytes_per_s: 10_000.0,
            packet_size: 1000,
            start_s: 20.0,
            stop_s: None,
        });
        let summary = run(&sc, 1, &mut Vec::new()).unwrap();
        let f = &summary.flows[0];
        assert!(f.is_conserved(), "{f:?}");
        assert!(f.delivered > 900, "{f:?}");
        assert_eq!(summary.malformed_packets, 0);
    }

    #[test]
    fn bottleneck_builds_queueing_delay() {
        // 20 kB/s offered into 10 kB/s, 20 x 1000 B queue: about 2 s of
        // queueing shows up in the RTT measured across the link.
        let sc = parse_scenario(
            "[config]\nhorizon_s = 200\n[node A]\n[node B]\n[link A B]\ndelay_ms = 10\nrate = 10000\nqueue = 20\n[flow A B]\nrate = 20000\nstart_s = 30\n",
        )
        .unwrap();
        let mut trace = Vec::new();
        let summary = run(&sc, 5, &mut trace).unwrap();
        assert!(summary.flows[0].dropped_queue > 0);
        assert!(summary.flows[0].is_conserved());
        let late_samples: Vec<u64> = trace
            .iter()
            .filter_map(|r| match r {
                TraceRecord::Rtt {
                    time_us,
                    node,
                    sample_ms_micro,
                    ..
                } if *time_us > 60_000_000 && node == "A" => Some(*sample_ms_micro),
                _ => None,
            })
            .collect();
        assert!(!late_samples.is_empty());
        // A probe only gets into the full queue right after a departure, so
        // it waits behind 18 to 19 data packets of 100 ms each.
        for s in late_samples {
            let ms = s as f64 / 1000.0;
            assert!((1820.0..=2030.0).contains(&ms), "{ms}");
        }
    }
}
