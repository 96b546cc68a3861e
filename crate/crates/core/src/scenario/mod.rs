//! Scenario description: topology, traffic, scripted link events and the
//! protocol configuration shared by every node.

mod builtin;
mod parse;

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

use crate::metric::{CostConfig, DEFAULT_ALPHA};
use crate::protocol::{HysteresisConfig, NodeConfig, NodeId, ProtocolTimers};

pub use builtin::{builtin_names, builtin_scenario, builtin_scenarios, builtin_source};
pub use parse::{parse_scenario, ParseError};

#[derive(Debug, Clone, PartialEq)]
pub struct NodeSpec {
    pub id: NodeId,
    pub skew_ppm: f64,
    pub epoch_offset_s: f64,
    pub hello_interval_s: Option<f64>,
    pub ihu_interval_s: Option<f64>,
    pub update_interval_s: Option<f64>,
}

impl NodeSpec {
    pub fn new(id: impl AsRef<str>) -> Self {
        NodeSpec {
            id: NodeId::new(id),
            skew_ppm: 0.0,
            epoch_offset_s: 0.0,
            hello_interval_s: None,
            ihu_interval_s: None,
            update_interval_s: None,
        }
    }
}

/// Serialization rate of a link direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Rate {
    Unlimited,
    BytesPerSecond(f64),
}

impl fmt::Display for Rate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Rate::Unlimited => f.write_str("unlimited"),
            Rate::BytesPerSecond(r) => write!(f, "{r}"),
        }
    }
}

pub const DEFAULT_QUEUE_CAPACITY: usize = 100;
pub const DEFAULT_DATA_PACKET_BYTES: u32 = 1000;
pub const DEFAULT_TTL: u8 = 16;

#[derive(Debug, Clone, PartialEq)]
pub struct LinkSpec {
    pub a: NodeId,
    pub b: NodeId,
    /// One-way propagation delay.
    pub delay_ms: f64,
    pub rate: Rate,
    pub queue_capacity: usize,
}

impl LinkSpec {
    pub fn new(a: impl AsRef<str>, b: impl AsRef<str>, delay_ms: f64) -> Self {
        LinkSpec {
            a: NodeId::new(a),
            b: NodeId::new(b),
            delay_ms,
            rate: Rate::Unlimited,
            queue_capacity: DEFAULT_QUEUE_CAPACITY,
        }
    }

    pub fn name(&self) -> String {
        format!("{}-{}", self.a, self.b)
    }

    pub fn connects(&self, x: &NodeId, y: &NodeId) -> bool {
        (&self.a == x && &self.b == y) || (&self.a == y && &self.b == x)
    }
}

/// Constant-bit-rate data flow.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowSpec {
    pub source: NodeId,
    pub destination: NodeId,
    pub rate_bytes_per_s: f64,
    pub packet_size: u32,
    pub start_s: f64,
    pub stop_s: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LinkAction {
    Up,
    Down,
}

impl fmt::Display for LinkAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LinkAction::Up => "up",
            LinkAction::Down => "down",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EventSpec {
    pub time_s: f64,
    pub action: LinkAction,
    pub a: NodeId,
    pub b: NodeId,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub horizon_s: f64,
    pub sample_period_s: f64,
    pub cost: CostConfig<f64>,
    pub alpha: f64,
    pub hysteresis: HysteresisConfig<f64>,
    pub timers: ProtocolTimers,
    pub update_threshold: u16,
    pub ttl: u8,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            horizon_s: 600.0,
            sample_period_s: 1.0,
            cost: CostConfig::default(),
            alpha: DEFAULT_ALPHA,
            hysteresis: HysteresisConfig::default(),
            timers: ProtocolTimers::default(),
            update_threshold: 8,
            ttl: DEFAULT_TTL,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Scenario {
    pub nodes: Vec<NodeSpec>,
    pub links: Vec<LinkSpec>,
    pub flows: Vec<FlowSpec>,
    pub events: Vec<EventSpec>,
    pub config: ScenarioConfig,
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("invalid scenario: {}", .problems.join("; "))]
pub struct ValidationError {
    pub problems: Vec<String>,
}

impl Scenario {
    pub fn node(&self, id: &NodeId) -> Option<&NodeSpec> {
        self.nodes.iter().find(|n| &n.id == id)
    }

    /// Protocol configuration for one node, with its timer overrides.
    pub fn node_config(&self, node: &NodeSpec) -> NodeConfig {
        let c = &self.config;
        let mut timers = c.timers;
        if let Some(v) = node.hello_interval_s {
            timers.hello_interval = v;
        }
        if let Some(v) = node.ihu_interval_s {
            timers.ihu_interval = v;
        }
        if let Some(v) = node.update_interval_s {
            timers.update_interval = v;
        }
        NodeConfig {
            timers,
            cost: c.cost,
            alpha: c.alpha,
            hysteresis: c.hysteresis,
            update_threshold: c.update_threshold,
            ..NodeConfig::default()
        }
    }

    /// Checks cross references and value ranges, reporting every problem.
    pub fn validate(&self) -> Result<(), ValidationError> {
        let mut problems = Vec::new();
        let mut ids = BTreeSet::new();
        for n in &self.nodes {
            if n.id.as_str().is_empty() {
                problems.push("node id must not be empty".to_string());
            }
            if !ids.insert(n.id.clone()) {
                problems.push(format!("duplicate node {}", n.id));
            }
            if !n.skew_ppm.is_finite() || n.skew_ppm <= -1e6 {
                problems.push(format!("node {}: skew_ppm out of range", n.id));
            }
            if !n.epoch_offset_s.is_finite() || n.epoch_offset_s < 0.0 {
                problems.push(format!("node {}: epoch_offset_s must be >= 0", n.id));
            }
            if let Err(e) = self.node_config(n).timers.validate() {
                problems.push(format!("node {}: {e}", n.id));
            }
        }
        let known = |id: &NodeId, what: &str, problems: &mut Vec<String>| {
            if !ids.contains(id) {
                problems.push(format!("{what} references undeclared node {id}"));
            }
        };
        let mut pairs = BTreeSet::new();
        for l in &self.links {
            let what = format!("link {}", l.name());
            known(&l.a, &what, &mut problems);
            known(&l.b, &what, &mut problems);
            if l.a == l.b {
                problems.push(format!("{what}: endpoints must differ"));
            }
            let key = if l.a <= l.b {
                (l.a.clone(), l.b.clone())
            } else {
                (l.b.clone(), l.a.clone())
            };
            if !pairs.insert(key) {
                problems.push(format!("{what}: duplicate link"));
            }
            if !(l.delay_ms >= 0.0) || !l.delay_ms.is_finite() {
                problems.push(format!("{what}: delay_ms must be >= 0"));
            }
            if let Rate::BytesPerSecond(r) = l.rate {
                if !(r > 0.0) || !r.is_finite() {
                    problems.push(format!("{what}: rate must be positive"));
                }
            }
            if l.queue_capacity == 0 {
                problems.push(format!("{what}: queue must hold at least one packet"));
            }
        }
        for f in &self.flows {
            let what = format!("flow {}-{}", f.source, f.destination);
            known(&f.source, &what, &mut problems);
            known(&f.destination, &what, &mut problems);
            if f.source == f.destination {
                problems.push(format!("{what}: source equals destination"));
            }
            if !(f.rate_bytes_per_s > 0.0) || !f.rate_bytes_per_s.is_finite() {
                problems.push(format!("{what}: rate must be positive"));
            }
            if f.packet_size == 0 {
                problems.push(format!("{what}: packet_size must be positive"));
            }
            if !(f.start_s >= 0.0) {
                problems.push(format!("{what}: start_s must be >= 0"));
            }
            if let Some(stop) = f.stop_s {
                if !(stop >= f.start_s) {
                    problems.push(format!("{what}: stop_s precedes start_s"));
                }
            }
        }
        for e in &self.events {
            let what = format!("event at {}", e.time_s);
            known(&e.a, &what, &mut problems);
            known(&e.b, &what, &mut problems);
            if !self.links.iter().any(|l| l.connects(&e.a, &e.b)) {
                problems.push(format!("{what}: no link between {} and {}", e.a, e.b));
            }
            if !(e.time_s >= 0.0) || e.time_s >= self.config.horizon_s {
                problems.push(format!("{what}: time must lie in [0, horizon)"));
            }
        }
        let c = &self.config;
        if !(c.horizon_s > 0.0) || !c.horizon_s.is_finite() {
            problems.push("config: horizon_s must be positive".into());
        }
        if !(c.sample_period_s > 0.0) {
            problems.push("config: sample_period_s must be positive".into());
        }
        if !(c.alpha > 0.0 && c.alpha < 1.0) {
            problems.push("config: alpha must lie in (0, 1)".into());
        }
        if let Err(e) = c.timers.validate() {
            problems.push(format!("config: {e}"));
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(ValidationError { problems })
        }
    }

    /// Renders the scenario in the sectioned text format accepted by
    /// [`parse_scenario`].
    pub fn to_text(&self) -> String {
        use std::fmt::Write;
        let c = &self.config;
        let d = ScenarioConfig::default();
        let mut s = String::new();
        let _ = writeln!(s, "[config]");
        let _ = writeln!(s, "horizon_s = {}", c.horizon_s);
        let _ = writeln!(s, "sample_period_s = {}", c.sample_period_s);
        let _ = writeln!(s, "min_rtt_ms = {}", c.cost.min_rtt());
        let _ = writeln!(s, "max_rtt_ms = {}", c.cost.max_rtt());
        let _ = writeln!(s, "min_cost = {}", c.cost.min_cost());
        let _ = writeln!(s, "max_cost = {}", c.cost.max_cost());
        let _ = writeln!(s, "alpha = {}", c.alpha);
        let _ = writeln!(s, "time_constant_s = {}", c.hysteresis.time_constant());
        let _ = writeln!(s, "hello_interval_s = {}", c.timers.hello_interval);
        let _ = writeln!(s, "ihu_interval_s = {}", c.timers.ihu_interval);
        let _ = writeln!(s, "update_interval_s = {}", c.timers.update_interval);
        if c.update_threshold != d.update_threshold {
            let _ = writeln!(s, "update_threshold = {}", c.update_threshold);
        }
        if c.ttl != d.ttl {
            let _ = writeln!(s, "ttl = {}", c.ttl);
        }
        for n in &self.nodes {
            let _ = writeln!(s, "\n[node {}]", n.id);
            if n.skew_ppm != 0.0 {
                let _ = writeln!(s, "skew_ppm = {}", n.skew_ppm);
            }
            if n.epoch_offset_s != 0.0 {
                let _ = writeln!(s, "epoch_offset_s = {}", n.epoch_offset_s);
            }
            if let Some(v) = n.hello_interval_s {
                let _ = writeln!(s, "hello_interval_s = {v}");
            }
            if let Some(v) = n.ihu_interval_s {
                let _ = writeln!(s, "ihu_interval_s = {v}");
            }
            if let Some(v) = n.update_interval_s {
                let _ = writeln!(s, "update_interval_s = {v}");
            }
        }
        for l in &self.links {
            let _ = writeln!(s, "\n[link {} {}]", l.a, l.b);
            let _ = writeln!(s, "delay_ms = {}", l.delay_ms);
            let _ = writeln!(s, "rate = {}", l.rate);
            let _ = writeln!(s, "queue = {}", l.queue_capacity);
        }
        for f in &self.flows {
            let _ = writeln!(s, "\n[flow {} {}]", f.source, f.destination);
            let _ = writeln!(s, "rate = {}", f.rate_bytes_per_s);
            let _ = writeln!(s, "packet_size = {}", f.packet_size);
            let _ = writeln!(s, "start_s = {}", f.start_s);
            if let Some(stop) = f.stop_s {
                let _ = writeln!(s, "stop_s = {stop}");
            }
        }
        for e in &self.events {
            let _ = writeln!(s, "\n[event {}]", e.time_s);
            let _ = writeln!(s, "{} = {} {}", e.action, e.a, e.b);
        }
        s
    }
}
