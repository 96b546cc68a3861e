use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;

use crate::metric::{Cost, CostConfig, RttSample, Timestamp, DEFAULT_ALPHA};

use super::message::{Hello, Message, NodeId, Packet, Update};
use super::neighbour::{IhuOutcome, NeighbourState};
use super::route::{select_route, HysteresisConfig, RouteEntry};

/// Message scheduling intervals, in seconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProtocolTimers {
    pub hello_interval: f64,
    pub ihu_interval: f64,
    pub update_interval: f64,
}

impl Default for ProtocolTimers {
    fn default() -> Self {
        ProtocolTimers {
            hello_interval: 4.0,
            ihu_interval: 12.0,
            update_interval: 16.0,
        }
    }
}

impl ProtocolTimers {
    /// Silence after which a neighbour is dropped.
    pub fn hold_time(&self) -> f64 {
        3.5 * self.hello_interval
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.hello_interval > 0.0) {
            return Err("hello_interval must be positive".into());
        }
        if !(self.ihu_interval >= self.hello_interval) {
            return Err("ihu_interval must be at least hello_interval".into());
        }
        if !(self.update_interval > 0.0) {
            return Err("update_interval must be positive".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NodeConfig {
    pub timers: ProtocolTimers,
    pub cost: CostConfig<f64>,
    pub alpha: f64,
    pub hysteresis: HysteresisConfig<f64>,
    /// Change in a selected metric that triggers an immediate update.
    pub update_threshold: u16,
    /// Period of neighbour expiry and route re-evaluation.
    pub housekeeping_interval: f64,
}

impl Default for NodeConfig {
    fn default() -> Self {
        NodeConfig {
            timers: ProtocolTimers::default(),
            cost: CostConfig::default(),
            alpha: DEFAULT_ALPHA,
            hysteresis: HysteresisConfig::default(),
            update_threshold: 8,
            housekeeping_interval: 1.0,
        }
    }
}

/// All known routes to one destination and the current choice.
#[derive(Debug, Clone, Default)]
pub struct DestinationRoutes {
    pub entries: BTreeMap<NodeId, RouteEntry<f64>>,
    pub selected: Option<NodeId>,
    last_advertised: Option<Cost>,
}

impl DestinationRoutes {
    pub fn selected_entry(&self) -> Option<&RouteEntry<f64>> {
        self.selected.as_ref().and_then(|h| self.entries.get(h))
    }
}

/// A packet to hand to the link towards `interface`.
#[derive(Debug, Clone, PartialEq)]
pub struct Outgoing {
    pub interface: NodeId,
    pub packet: Packet,
}

#[derive(Debug, Clone, PartialEq)]
pub enum NodeEvent {
    RttSample {
        neighbour: NodeId,
        sample: RttSample<f64>,
        smoothed_ms: f64,
        link_cost: Cost,
    },
    NeighbourExpired {
        neighbour: NodeId,
    },
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct NodeOutput {
    pub packets: Vec<Outgoing>,
    pub events: Vec<NodeEvent>,
}

/// A distance-vector routing node driven by `(event, time)` inputs.
///
/// Interfaces are broadcast domains; in the simulator each one is a
/// point-to-point link named after the peer at its far end. Loop avoidance
/// is split horizon with poisoned reverse per interface.
#[derive(Debug, Clone)]
pub struct Node {
    id: NodeId,
    cfg: NodeConfig,
    interfaces: Vec<NodeId>,
    neighbours: BTreeMap<NodeId, NeighbourState>,
    routes: BTreeMap<NodeId, DestinationRoutes>,
    round_nominal: f64,
    next_round: f64,
    next_ihu_due: f64,
    next_update_due: f64,
    next_housekeeping: f64,
    full_update_to: BTreeSet<NodeId>,
    triggered: BTreeSet<NodeId>,
    started: bool,
}

impl Node {
    pub fn new(id: NodeId, cfg: NodeConfig, mut interfaces: Vec<NodeId>) -> Self {
        interfaces.sort();
        interfaces.dedup();
        Node {
            id,
            cfg,
            interfaces,
            neighbours: BTreeMap::new(),
            routes: BTreeMap::new(),
            round_nominal: 0.0,
            next_round: 0.0,
            next_ihu_due: 0.0,
            next_update_due: 0.0,
            next_housekeeping: 0.0,
            full_update_to: BTreeSet::new(),
            triggered: BTreeSet::new(),
            started: false,
        }
    }

    pub fn id(&self) -> &NodeId {
        &self.id
    }

    pub fn config(&self) -> &NodeConfig {
        &self.cfg
    }

    pub fn interfaces(&self) -> &[NodeId] {
        &self.interfaces
    }

    pub fn neighbours(&self) -> &BTreeMap<NodeId, NeighbourState> {
        &self.neighbours
    }

    pub fn routes(&self) -> &BTreeMap<NodeId, DestinationRoutes> {
        &self.routes
    }

    /// Schedules the first round; returns the first wakeup time.
    pub fn start<R: Rng>(&mut self, now: f64, rng: &mut R) -> f64 {
        let h = self.cfg.timers.hello_interval;
        self.round_nominal = now;
        self.next_round = now + rng.gen_range(0.0..h);
        self.next_ihu_due = now;
        self.next_update_due = now;
        self.next_housekeeping = now + self.cfg.housekeeping_interval;
        self.started = true;
        self.next_wakeup()
    }

    pub fn next_wakeup(&self) -> f64 {
        self.next_round.min(self.next_housekeeping)
    }

    /// Time of the next jittered Hello round.
    pub fn next_round(&self) -> f64 {
        self.next_round
    }

    pub fn next_hop(&self, destination: &NodeId) -> Option<&NodeId> {
        let dest = self.routes.get(destination)?;
        let entry = dest.selected_entry()?;
        (!entry.is_retracted()).then_some(&entry.next_hop)
    }

    pub fn selected_routes(&self) -> impl Iterator<Item = &RouteEntry<f64>> {
        self.routes
            .values()
            .filter_map(|d| d.selected_entry())
            .filter(|r| !r.is_retracted())
    }

    /// Runs whatever timers are due at `now`: neighbour expiry and metric
    /// smoothing every housekeeping interval, and the jittered message round
    /// (Hello always, IHU and full Update when due, aggregated per link).
    pub fn periodic_tick<R: Rng>(&mut self, now: f64, local: Timestamp, rng: &mut R) -> NodeOutput {
        let mut out = NodeOutput::default();
        if !self.started {
            self.start(now, rng);
        }
        if now >= self.next_housekeeping {
            self.housekeeping(now, &mut out);
            while self.next_housekeeping <= now {
                self.next_housekeeping += self.cfg.housekeeping_interval;
            }
        }
        if now >= self.next_round {
            self.emit_round(now, local, &mut out);
            let h = self.cfg.timers.hello_interval;
            self.round_nominal += h;
            while self.round_nominal + h <= now {
                self.round_nominal += h;
            }
            self.next_round = (self.round_nominal + rng.gen_range(0.0..h)).max(now);
        }
        self.flush_triggered(&mut out);
        out
    }

    /// Handles a packet received on `interface` at local time `rx`.
    pub fn on_packet(
        &mut self,
        interface: &NodeId,
        packet: &Packet,
        rx: Timestamp,
        now: f64,
    ) -> NodeOutput {
        let mut out = NodeOutput::default();
        if packet.sender == self.id {
            return out;
        }
        let sender = packet.sender.clone();
        for msg in &packet.messages {
            match msg {
                Message::Hello(hello) => self.handle_hello(interface, hello, rx, now),
                Message::Ihu(ihu) if ihu.target == self.id => {
                    let Some(n) = self.neighbours.get_mut(&sender) else {
                        continue;
                    };
                    let before = n.link_cost;
                    if let IhuOutcome::Sampled {
                        sample,
                        smoothed,
                        link_cost,
                    } = n.on_ihu_received(ihu, rx, &self.cfg.cost, now)
                    {
                        out.events.push(NodeEvent::RttSample {
                            neighbour: sender.clone(),
                            sample,
                            smoothed_ms: smoothed,
                            link_cost,
                        });
                        if link_cost != before {
                            self.link_cost_changed(&sender, now);
                        }
                    }
                }
                Message::Ihu(_) => {
                    if let Some(n) = self.neighbours.get_mut(&sender) {
                        n.last_heard = n.last_heard.max(now);
                    }
                }
                Message::Update(upd) => self.handle_update(&sender, upd, now),
            }
        }
        self.flush_triggered(&mut out);
        out
    }

    fn handle_hello(&mut self, interface: &NodeId, hello: &Hello, rx: Timestamp, now: f64) {
        let cfg = &self.cfg;
        let full_update_to = &mut self.full_update_to;
        let n = self
            .neighbours
            .entry(hello.sender.clone())
            .or_insert_with(|| {
                full_update_to.insert(interface.clone());
                let mut n = NeighbourState::new(hello.sender.clone(), cfg.alpha, &cfg.cost, now);
                n.interface = interface.clone();
                n
            });
        n.interface = interface.clone();
        n.on_hello_received(hello, rx, now);
    }

    /// Ingests a route advertisement from a confirmed neighbour.
    pub fn handle_update(&mut self, from: &NodeId, upd: &Update, now: f64) {
        if upd.destination == self.id {
            return;
        }
        let Some(n) = self.neighbours.get_mut(from) else {
            return;
        };
        n.last_heard = n.last_heard.max(now);
        if !n.confirmed {
            return;
        }
        let link_cost = n.link_cost;
        let h = self.cfg.hysteresis;
        let dest = self.routes.entry(upd.destination.clone()).or_default();
        match dest.entries.get_mut(from) {
            Some(entry) => {
                entry.set_metric(upd.advertised_metric, link_cost, now, &h);
            }
            None if upd.advertised_metric.is_finite() => {
                let entry = RouteEntry::new(
                    upd.destination.clone(),
                    from.clone(),
                    upd.advertised_metric,
                    link_cost,
                    now,
                );
                dest.entries.insert(from.clone(), entry);
            }
            None => return,
        }
        self.reselect(&upd.destination.clone(), now);
    }

    fn link_cost_changed(&mut self, neighbour: &NodeId, now: f64) {
        let Some(link_cost) = self.neighbours.get(neighbour).map(|n| n.link_cost) else {
            return;
        };
        let h = self.cfg.hysteresis;
        let mut affected = Vec::new();
        for (dest_id, dest) in self.routes.iter_mut() {
            if let Some(entry) = dest.entries.get_mut(neighbour) {
                let received = entry.received_metric;
                entry.set_metric(received, link_cost, now, &h);
                affected.push(dest_id.clone());
            }
        }
        for d in affected {
            self.reselect(&d, now);
        }
    }

    fn housekeeping(&mut self, now: f64, out: &mut NodeOutput) {
        let hold = self.cfg.timers.hold_time();
        let expired: Vec<NodeId> = self
            .neighbours
            .values()
            .filter(|n| n.is_expired(now, hold))
            .map(|n| n.neighbour.clone())
            .collect();
        for n in &expired {
            self.neighbours.remove(n);
            for dest in self.routes.values_mut() {
                dest.entries.remove(n);
            }
            out.events.push(NodeEvent::NeighbourExpired {
                neighbour: n.clone(),
            });
        }
        let dests: Vec<NodeId> = self.routes.keys().cloned().collect();
        for d in dests {
            self.reselect(&d, now);
        }
    }

    /// Brings smoothed metrics up to `now` and applies the selection rule.
    fn reselect(&mut self, destination: &NodeId, now: f64) {
        let h = self.cfg.hysteresis;
        let threshold = self.cfg.update_threshold;
        let Some(dest) = self.routes.get_mut(destination) else {
            return;
        };
        for entry in dest.entries.values_mut() {
            entry.update_smoothed_metric(now, &h);
        }
        let previous = dest.selected.clone();
        let current = previous.as_ref().and_then(|hop| dest.entries.get(hop));
        let candidates: Vec<&RouteEntry<f64>> = dest.entries.values().collect();
        let choice = select_route(current, &candidates).map(|r| r.next_hop.clone());
        for (hop, entry) in dest.entries.iter_mut() {
            entry.selected = Some(hop) == choice.as_ref();
        }
        dest.selected = choice;
        let metric = dest
            .selected_entry()
            .map(|r| r.advertised_metric)
            .unwrap_or(Cost::INFINITY);
        let hop_changed = dest.selected != previous;
        let metric_moved = match dest.last_advertised {
            None => metric.is_finite(),
            Some(last) if last.is_infinite() || metric.is_infinite() => last != metric,
            Some(last) => last.0.abs_diff(metric.0) >= threshold,
        };
        if hop_changed || metric_moved {
            self.triggered.insert(destination.clone());
        }
    }

    fn advertised_metric_for(&self, destination: &NodeId, interface: &NodeId) -> Cost {
        let Some(dest) = self.routes.get(destination) else {
            return Cost::INFINITY;
        };
        match dest.selected_entry() {
            Some(r) if self.interface_of(&r.next_hop) == Some(interface) => Cost::INFINITY,
            Some(r) => r.advertised_metric,
            None => Cost::INFINITY,
        }
    }

    /// Interface through which `neighbour` is reached.
    pub fn interface_of(&self, neighbour: &NodeId) -> Option<&NodeId> {
        self.neighbours.get(neighbour).map(|n| &n.interface)
    }

    fn update_msg(&self, destination: &NodeId, interface: &NodeId) -> Message {
        let metric = if destination == &self.id {
            Cost::ZERO
        } else {
            self.advertised_metric_for(destination, interface)
        };
        Message::Update(Update {
            sender: self.id.clone(),
            destination: destination.clone(),
            advertised_metric: metric,
        })
    }

    fn full_table(&self, interface: &NodeId) -> Vec<Message> {
        let mut msgs = vec![self.update_msg(&self.id, interface)];
        msgs.extend(self.routes.keys().map(|d| self.update_msg(d, interface)));
        msgs
    }

    fn mark_advertised(&mut self, destinations: impl IntoIterator<Item = NodeId>) {
        for d in destinations {
            if let Some(dest) = self.routes.get_mut(&d) {
                dest.last_advertised = Some(
                    dest.selected_entry()
                        .map(|r| r.advertised_metric)
                        .unwrap_or(Cost::INFINITY),
                );
            }
        }
    }

    fn emit_round(&mut self, now: f64, local: Timestamp, out: &mut NodeOutput) {
        let ihu_due = now >= self.next_ihu_due;
        if ihu_due {
            self.next_ihu_due += self.cfg.timers.ihu_interval;
            if self.next_ihu_due <= now {
                self.next_ihu_due = now + self.cfg.timers.ihu_interval;
            }
        }
        let update_due = now >= self.next_update_due;
        if update_due {
            self.next_update_due += self.cfg.timers.update_interval;
            if self.next_update_due <= now {
                self.next_update_due = now + self.cfg.timers.update_interval;
            }
        }
        let hello = Message::Hello(Hello {
            sender: self.id.clone(),
            tx_timestamp: local,
        });
        let mut full_sent = false;
        for iface in self.interfaces.clone() {
            let mut packet = Packet::new(self.id.clone());
            packet.messages.push(hello.clone());
            for n in self
                .neighbours
                .values_mut()
                .filter(|n| n.interface == iface)
            {
                if ihu_due || n.ihu_pending {
                    if let Some(ihu) = n.build_ihu(&self.id, local) {
                        packet.messages.push(Message::Ihu(ihu));
                        n.ihu_pending = false;
                    }
                }
            }
            if update_due || self.full_update_to.remove(&iface) {
                packet.messages.extend(self.full_table(&iface));
                full_sent = true;
            }
            out.packets.push(Outgoing {
                interface: iface,
                packet,
            });
        }
        if update_due {
            self.full_update_to.clear();
            self.triggered.clear();
        }
        if full_sent {
            let all: Vec<NodeId> = self.routes.keys().cloned().collect();
            if update_due {
                self.mark_advertised(all);
            }
        }
    }

    fn flush_triggered(&mut self, out: &mut NodeOutput) {
        if self.triggered.is_empty() {
            return;
        }
        let dests: Vec<NodeId> = std::mem::take(&mut self.triggered).into_iter().collect();
        for iface in &self.interfaces {
            let mut packet = Packet::new(self.id.clone());
            for d in &dests {
                packet.messages.push(self.update_msg(d, iface));
            }
            out.packets.push(Outgoing {
                interface: iface.clone(),
                packet,
            });
        }
        self.mark_advertised(dests);
    }
}
