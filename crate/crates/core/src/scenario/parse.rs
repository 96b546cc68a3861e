//! Parser for the sectioned `key = value` scenario format.
//!
//! ```text
//! # comment
//! [config]
//! horizon_s = 600
//!
//! [node A]
//! skew_ppm = 10
//!
//! [link A B]
//! delay_ms = 5
//! rate = unlimited      # or bytes per second
//! queue = 100
//!
//! [flow A B]
//! rate = 50000
//! packet_size = 1000
//! start_s = 30
//!
//! [event 120]
//! down = A B
//! ```

use std::str::FromStr;

use thiserror::Error;

use super::{
    EventSpec, FlowSpec, LinkAction, LinkSpec, NodeSpec, Rate, Scenario, ValidationError,
    DEFAULT_DATA_PACKET_BYTES,
};
use crate::metric::CostConfig;
use crate::protocol::{HysteresisConfig, NodeId};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: field `{field}`: {message}")]
    Field {
        line: usize,
        field: String,
        message: String,
    },
    #[error(transparent)]
    Invalid(#[from] ValidationError),
}

enum Section {
    None,
    Config,
    Node(usize),
    Link(usize),
    Flow(usize),
    Event(f64, usize),
}

fn field_err(line: usize, field: &str, message: impl Into<String>) -> ParseError {
    ParseError::Field {
        line,
        field: field.to_string(),
        message: message.into(),
    }
}

fn num<T: FromStr>(line: usize, field: &str, value: &str) -> Result<T, ParseError> {
    value
        .parse::<T>()
        .map_err(|_| field_err(line, field, format!("cannot parse `{value}`")))
}

fn positive(line: usize, field: &str, value: &str) -> Result<f64, ParseError> {
    let v: f64 = num(line, field, value)?;
    if !(v > 0.0) || !v.is_finite() {
        return Err(field_err(
            line,
            field,
            format!("must be positive, got `{value}`"),
        ));
    }
    Ok(v)
}

fn non_negative(line: usize, field: &str, value: &str) -> Result<f64, ParseError> {
    let v: f64 = num(line, field, value)?;
    if !(v >= 0.0) || !v.is_finite() {
        return Err(field_err(
            line,
            field,
            format!("must be >= 0, got `{value}`"),
        ));
    }
    Ok(v)
}

fn one_id(line: usize, header: &str, rest: &[&str]) -> Result<NodeId, ParseError> {
    match rest {
        [id] => Ok(NodeId::new(id)),
        _ => Err(ParseError::Syntax {
            line,
            message: format!("[{header}] takes exactly one node id"),
        }),
    }
}

fn two_ids(line: usize, header: &str, rest: &[&str]) -> Result<(NodeId, NodeId), ParseError> {
    match rest {
        [a, b] => Ok((NodeId::new(a), NodeId::new(b))),
        _ => Err(ParseError::Syntax {
            line,
            message: format!("[{header}] takes exactly two node ids"),
        }),
    }
}

#[derive(Default)]
struct CostKeys {
    min_rtt: Option<(f64, usize)>,
    max_rtt: Option<(f64, usize)>,
    min_cost: Option<(u16, usize)>,
    max_cost: Option<(u16, usize)>,
}

/// Parses and validates a scenario. Unspecified values take their defaults.
pub fn parse_scenario(text: &str) -> Result<Scenario, ParseError> {
    let mut sc = Scenario::default();
    let mut cost = CostKeys::default();
    let mut section = Section::None;
    // header line of every section that references nodes, for error reports
    let mut refs: Vec<(usize, Vec<NodeId>)> = Vec::new();
    let mut flow_lines: Vec<usize> = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(inner) = content.strip_prefix('[') {
            let inner = inner.strip_suffix(']').ok_or_else(|| ParseError::Syntax {
                line,
                message: "unterminated section header".into(),
            })?;
            let words: Vec<&str> = inner.split_whitespace().collect();
            let Some((&kind, rest)) = words.split_first() else {
                return Err(ParseError::Syntax {
                    line,
                    message: "empty section header".into(),
                });
            };
            section = match kind {
                "config" if rest.is_empty() => Section::Config,
                "node" => {
                    sc.nodes
                        .push(NodeSpec::new(one_id(line, kind, rest)?.as_str()));
                    Section::Node(sc.nodes.len() - 1)
                }
                "link" => {
                    let (a, b) = two_ids(line, kind, rest)?;
                    refs.push((line, vec![a.clone(), b.clone()]));
                    sc.links.push(LinkSpec {
                        a,
                        b,
                        ..LinkSpec::new("", "", 0.0)
                    });
                    Section::Link(sc.links.len() - 1)
                }
                "flow" => {
                    let (source, destination) = two_ids(line, kind, rest)?;
                    refs.push((line, vec![source.clone(), destination.clone()]));
                    flow_lines.push(line);
                    sc.flows.push(FlowSpec {
                        source,
                        destination,
                        rate_bytes_per_s: 0.0,
                        packet_size: DEFAULT_DATA_PACKET_BYTES,
                        start_s: 0.0,
                        stop_s: None,
                    });
                    Section::Flow(sc.flows.len() - 1)
                }
                "event" => {
                    let [t] = rest else {
                        return Err(ParseError::Syntax {
                            line,
                            message: "[event] takes exactly one time in seconds".into(),
                        });
                    };
                    Section::Event(non_negative(line, "event time", t)?, line)
                }
                _ => {
                    return Err(ParseError::Syntax {
                        line,
                        message: format!("unknown section [{inner}]"),
                    })
                }
            };
            continue;
        }

        let (key, value) = content.split_once('=').ok_or_else(|| ParseError::Syntax {
            line,
            message: format!("expected `key = value`, got `{content}`"),
        })?;
        let key = key.trim();
        let value = value.trim();
        let unknown = || field_err(line, key, "unknown key in this section");

        match &section {
            Section::None => {
                return Err(ParseError::Syntax {
                    line,
                    message: "key outside of any section".into(),
                })
            }
            Section::Config => {
                let c = &mut sc.config;
                match key {
                    "horizon_s" => c.horizon_s = positive(line, key, value)?,
                    "sample_period_s" => c.sample_period_s = positive(line, key, value)?,
                    "min_rtt_ms" => cost.min_rtt = Some((positive(line, key, value)?, line)),
                    "max_rtt_ms" => cost.max_rtt = Some((positive(line, key, value)?, line)),
                    "min_cost" => cost.min_cost = Some((num(line, key, value)?, line)),
                    "max_cost" => cost.max_cost = Some((num(line, key, value)?, line)),
                    "alpha" => {
                        let a: f64 = num(line, key, value)?;
                        if !(a > 0.0 && a < 1.0) {
                            return Err(field_err(line, key, "must lie in (0, 1)"));
                        }
                        c.alpha = a;
                    }
                    "time_constant_s" => {
                        c.hysteresis = HysteresisConfig::new(positive(line, key, value)?)
                            .ok_or_else(|| field_err(line, key, "must be positive"))?;
                    }
                    "hello_interval_s" => c.timers.hello_interval = positive(line, key, value)?,
                    "ihu_interval_s" => c.timers.ihu_interval = positive(line, key, value)?,
                    "update_interval_s" => c.timers.update_interval = positive(line, key, value)?,
                    "update_threshold" => c.update_threshold = num(line, key, value)?,
                    "ttl" => c.ttl = num(line, key, value)?,
                    _ => return Err(unknown()),
                }
            }
            Section::Node(i) => {
                let n = &mut sc.nodes[*i];
                match key {
                    "skew_ppm" => n.skew_ppm = num(line, key, value)?,
                    "epoch_offset_s" => n.epoch_offset_s = non_negative(line, key, value)?,
                    "hello_interval_s" => n.hello_interval_s = Some(positive(line, key, value)?),
                    "ihu_interval_s" => n.ihu_interval_s = Some(positive(line, key, value)?),
                    "update_interval_s" => n.update_interval_s = Some(positive(line, key, value)?),
                    _ => return Err(unknown()),
                }
            }
            Section::Link(i) => {
                let l = &mut sc.links[*i];
                match key {
                    "delay_ms" => l.delay_ms = non_negative(line, key, value)?,
                    "rate" => {
                        l.rate = if value == "unlimited" {
                            Rate::Unlimited
                        } else {
                            Rate::BytesPerSecond(positive(line, key, value)?)
                        }
                    }
                    "queue" => {
                        let q: usize = num(line, key, value)?;
                        if q == 0 {
                            return Err(field_err(line, key, "must be positive"));
                        }
                        l.queue_capacity = q;
                    }
                    _ => return Err(unknown()),
                }
            }
            Section::Flow(i) => {
                let f = &mut sc.flows[*i];
                match key {
                    "rate" => f.rate_bytes_per_s = positive(line, key, value)?,
                    "packet_size" => {
                        let p: u32 = num(line, key, value)?;
                        if p == 0 {
                            return Err(field_err(line, key, "must be positive"));
                        }
                        f.packet_size = p;
                    }
                    "start_s" => f.start_s = non_negative(line, key, value)?,
                    "stop_s" => f.stop_s = Some(non_negative(line, key, value)?),
                    _ => return Err(unknown()),
                }
            }
            Section::Event(time_s, header) => {
                let action = match key {
                    "down" => LinkAction::Down,
                    "up" => LinkAction::Up,
                    _ => return Err(unknown()),
                };
                let words: Vec<&str> = value.split_whitespace().collect();
                let (a, b) = two_ids(line, key, &words)?;
                refs.push((*header, vec![a.clone(), b.clone()]));
                sc.events.push(EventSpec {
                    time_s: *time_s,
                    action,
                    a,
                    b,
                });
            }
        }
    }

    for (f, line) in sc.flows.iter().zip(&flow_lines) {
        if f.rate_bytes_per_s <= 0.0 {
            return Err(field_err(*line, "rate", "flow needs a positive rate"));
        }
    }

    for (line, ids) in &refs {
        for id in ids {
            if sc.node(id).is_none() {
                return Err(field_err(*line, "node", format!("undeclared node {id}")));
            }
        }
    }

    let d = CostConfig::<f64>::default();
    let min_rtt = cost.min_rtt.map_or(d.min_rtt(), |v| v.0);
    let max_rtt = cost.max_rtt.map_or(d.max_rtt(), |v| v.0);
    let min_cost = cost.min_cost.map_or(d.min_cost().0, |v| v.0);
    let max_cost = cost.max_cost.map_or(d.max_cost().0, |v| v.0);
    sc.config.cost = CostConfig::new(min_rtt, max_rtt, min_cost, max_cost).map_err(|e| {
        let line = [
            cost.min_rtt.map(|v| v.1),
            cost.max_rtt.map(|v| v.1),
            cost.min_cost.map(|v| v.1),
            cost.max_cost.map(|v| v.1),
        ]
        .into_iter()
        .flatten()
        .max()
        .unwrap_or(0);
        field_err(line, "cost curve", e.to_string())
    })?;

    sc.validate()?;
    Ok(sc)
}
