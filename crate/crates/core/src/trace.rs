//! Trace records and their CSV form.
//!
//! One header line, one row per record, `kind` first. Every kind uses the
//! columns that apply to it and leaves the others empty. Times are printed as
//! fixed-point seconds with six decimals; all other numbers are integers.

use std::fmt;
use std::io::{self, Write};

use thiserror::Error;

pub const CSV_HEADER: &str = "kind,time_s,node,peer,next_hop,m_advertised,m_smoothed_milli,\
sample_ms_micro,smoothed_ms_micro,link_cost,bytes_in_interval,link,reason,count";

const COLUMNS: usize = 14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum DropReason {
    QueueFull,
    LinkDown,
    NoRoute,
    Ttl,
}

impl DropReason {
    pub fn as_str(self) -> &'static str {
        match self {
            DropReason::QueueFull => "queue",
            DropReason::LinkDown => "link_down",
            DropReason::NoRoute => "no_route",
            DropReason::Ttl => "ttl",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "queue" => DropReason::QueueFull,
            "link_down" => DropReason::LinkDown,
            "no_route" => DropReason::NoRoute,
            "ttl" => DropReason::Ttl,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TraceRecord {
    /// Selected route of `node` towards `destination`.
    Route {
        time_us: u64,
        node: String,
        destination: String,
        next_hop: String,
        m_advertised: u16,
        m_smoothed_milli: u64,
    },
    /// One RTT sample and the estimate after applying it, in microseconds.
    Rtt {
        time_us: u64,
        node: String,
        neighbour: String,
        sample_ms_micro: u64,
        smoothed_ms_micro: u64,
        link_cost: u16,
    },
    /// Data bytes delivered at `node` through `ingress` during the last
    /// sample period.
    Throughput {
        time_us: u64,
        node: String,
        ingress: String,
        bytes: u64,
    },
    /// Packets lost during the last sample period. For `NoRoute` and `Ttl`,
    /// `link` names the node that dropped them.
    Drop {
        time_us: u64,
        link: String,
        reason: DropReason,
        count: u64,
    },
}

impl TraceRecord {
    pub fn time_us(&self) -> u64 {
        match self {
            TraceRecord::Route { time_us, .. }
            | TraceRecord::Rtt { time_us, .. }
            | TraceRecord::Throughput { time_us, .. }
            | TraceRecord::Drop { time_us, .. } => *time_us,
        }
    }

    pub fn time_s(&self) -> f64 {
        self.time_us() as f64 / 1e6
    }

    pub fn kind(&self) -> &'static str {
        match self {
            TraceRecord::Route { .. } => "ROUTE",
            TraceRecord::Rtt { .. } => "RTT",
            TraceRecord::Throughput { .. } => "THROUGHPUT",
            TraceRecord::Drop { .. } => "DROP",
        }
    }

    fn columns(&self) -> [String; COLUMNS] {
        let mut c: [String; COLUMNS] = Default::default();
        c[0] = self.kind().to_string();
        c[1] = format_time(self.time_us());
        match self {
            TraceRecord::Route {
                node,
                destination,
                next_hop,
                m_advertised,
                m_smoothed_milli,
                ..
            } => {
                c[2] = node.clone();
                c[3] = destination.clone();
                c[4] = next_hop.clone();
                c[5] = m_advertised.to_string();
                c[6] = m_smoothed_milli.to_string();
            }
            TraceRecord::Rtt {
                node,
                neighbour,
                sample_ms_micro,
                smoothed_ms_micro,
                link_cost,
                ..
            } => {
                c[2] = node.clone();
                c[3] = neighbour.clone();
                c[7] = sample_ms_micro.to_string();
                c[8] = smoothed_ms_micro.to_string();
                c[9] = link_cost.to_string();
            }
            TraceRecord::Throughput {
                node,
                ingress,
                bytes,
                ..
            } => {
                c[2] = node.clone();
                c[3] = ingress.clone();
                c[10] = bytes.to_string();
            }
            TraceRecord::Drop {
                link,
                reason,
                count,
                ..
            } => {
                c[11] = link.clone();
                c[12] = reason.as_str().to_string();
                c[13] = count.to_string();
            }
        }
        c
    }
}

/// One CSV row without the line terminator.
impl fmt::Display for TraceRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut w = csv_writer(Vec::new());
        w.write_record(self.columns()).map_err(|_| fmt::Error)?;
        let bytes = w.into_inner().map_err(|_| fmt::Error)?;
        f.write_str(
            std::str::from_utf8(&bytes)
                .map_err(|_| fmt::Error)?
                .trim_end_matches('\n'),
        )
    }
}

/// `1234567` microseconds renders as `1.234567`.
pub fn format_time(us: u64) -> String {
    format!("{}.{:06}", us / 1_000_000, us % 1_000_000)
}

fn parse_time(s: &str) -> Option<u64> {
    let (secs, frac) = s.split_once('.').unwrap_or((s, "0"));
    if frac.len() > 6 || frac.is_empty() {
        return None;
    }
    let secs: u64 = secs.parse().ok()?;
    let frac_us: u64 = format!("{frac:0<6}").parse().ok()?;
    Some(secs * 1_000_000 + frac_us)
}

/// Destination for records produced by a simulation run.
pub trait TraceSink {
    fn record(&mut self, record: TraceRecord);
}

impl TraceSink for Vec<TraceRecord> {
    fn record(&mut self, record: TraceRecord) {
        self.push(record);
    }
}

/// Discards everything.
#[derive(Debug, Default, Clone, Copy)]
pub struct NullSink;

impl TraceSink for NullSink {
    fn record(&mut self, _record: TraceRecord) {}
}

/// Streams records as CSV. The first I/O error is kept and reported by
/// [`CsvTraceWriter::finish`].
pub struct CsvTraceWriter<W: Write> {
    out: csv::Writer<W>,
    error: Option<csv::Error>,
}

fn csv_writer<W: Write>(out: W) -> csv::Writer<W> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out)
}

impl<W: Write> CsvTraceWriter<W> {
    pub fn new(out: W) -> Self {
        let mut out = csv_writer(out);
        let error = out.write_record(CSV_HEADER.split(',')).err();
        CsvTraceWriter { out, error }
    }

    pub fn finish(mut self) -> io::Result<W> {
        if let Some(e) = self.error.take() {
            return Err(e.into());
        }
        self.out.into_inner().map_err(|e| e.into_error())
    }
}

impl<W: Write> TraceSink for CsvTraceWriter<W> {
    fn record(&mut self, record: TraceRecord) {
        if self.error.is_none() {
            if let Err(e) = self.out.write_record(record.columns()) {
                self.error = Some(e);
            }
        }
    }
}

/// Renders a whole trace, header included.
pub fn to_csv(records: &[TraceRecord]) -> String {
    let mut w = CsvTraceWriter::new(Vec::with_capacity(64 * (records.len() + 1)));
    for r in records {
        w.record(r.clone());
    }
    let bytes = w.finish().expect("writing to memory");
    String::from_utf8(bytes).expect("trace is UTF-8")
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("trace line {line}: {message}")]
pub struct TraceParseError {
    pub line: usize,
    pub message: String,
}

pub fn parse_csv(text: &str) -> Result<Vec<TraceRecord>, TraceParseError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(text.as_bytes());
    let mut rows = reader.records();
    let header_ok = matches!(rows.next(), Some(Ok(h)) if h.iter().eq(CSV_HEADER.split(',')));
    if !header_ok {
        return Err(TraceParseError {
            line: 1,
            message: "missing or unexpected header".into(),
        });
    }
    let mut out = Vec::new();
    for row in rows {
        let row = row.map_err(|e| TraceParseError {
            line: e.position().map_or(0, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        let line = row.position().map_or(0, |p| p.line() as usize);
        out.push(parse_row(&row, line)?);
    }
    Ok(out)
}

fn parse_row(c: &csv::StringRecord, line: usize) -> Result<TraceRecord, TraceParseError> {
    let err = |message: &str| TraceParseError {
        line,
        message: message.to_string(),
    };
    if c.len() != COLUMNS {
        return Err(err("wrong number of columns"));
    }
    let time_us = parse_time(&c[1]).ok_or_else(|| err("bad time"))?;
    let int = |i: usize| -> Result<u64, TraceParseError> {
        c[i].parse().map_err(|_| err("bad integer field"))
    };
    let small = |i: usize| -> Result<u16, TraceParseError> {
        c[i].parse().map_err(|_| err("bad metric field"))
    };
    Ok(match &c[0] {
        "ROUTE" => TraceRecord::Route {
            time_us,
            node: c[2].into(),
            destination: c[3].into(),
            next_hop: c[4].into(),
            m_advertised: small(5)?,
            m_smoothed_milli: int(6)?,
        },
        "RTT" => TraceRecord::Rtt {
            time_us,
            node: c[2].into(),
            neighbour: c[3].into(),
            sample_ms_micro: int(7)?,
            smoothed_ms_micro: int(8)?,
            link_cost: small(9)?,
        },
        "THROUGHPUT" => TraceRecord::Throughput {
            time_us,
            node: c[2].into(),
            ingress: c[3].into(),
            bytes: int(10)?,
        },
        "DROP" => TraceRecord::Drop {
            time_us,
            link: c[11].into(),
            reason: DropReason::parse(&c[12]).ok_or_else(|| err("bad drop reason"))?,
            count: int(13)?,
        },
        _ => return Err(err("unknown record kind")),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn row_layout() {
        let r = TraceRecord::Route {
            time_us: 12_500_000,
            node: "A".into(),
            destination: "D".into(),
            next_hop: "B".into(),
            m_advertised: 192,
            m_smoothed_milli: 191_500,
        };
        assert_eq!(r.to_string(), "ROUTE,12.500000,A,D,B,192,191500,,,,,,,");
        let d = TraceRecord::Drop {
            time_us: 3,
            link: "A-B".into(),
            reason: DropReason::QueueFull,
            count: 7,
        };
        assert_eq!(d.to_string(), "DROP,0.000003,,,,,,,,,,A-B,queue,7");
        assert_eq!(CSV_HEADER.split(',').count(), COLUMNS);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(parse_csv("nope\n").is_err());
        let bad = format!("{CSV_HEADER}\nROUTE,1.0,A\n");
        assert_eq!(parse_csv(&bad).unwrap_err().line, 2);
    }

    fn name() -> impl Strategy<Value = String> {
        "[A-Za-z][A-Za-z0-9,\"]{0,8}"
    }

    fn record() -> impl Strategy<Value = TraceRecord> {
        prop_oneof![
            (
                any::<u32>(),
                name(),
                name(),
                name(),
                any::<u16>(),
                any::<u32>()
            )
                .prop_map(|(t, n, d, h, m, s)| TraceRecord::Route {
                    time_us: t as u64,
                    node: n,
                    destination: d,
                    next_hop: h,
                    m_advertised: m,
                    m_smoothed_milli: s as u64
                }),
            (
                any::<u32>(),
                name(),
                name(),
                any::<u32>(),
                any::<u32>(),
                any::<u16>()
            )
                .prop_map(|(t, n, p, a, b, c)| TraceRecord::Rtt {
                    time_us: t as u64,
                    node: n,
                    neighbour: p,
                    sample_ms_micro: a as u64,
                    smoothed_ms_micro: b as u64,
                    link_cost: c
                }),
            (any::<u32>(), name(), name(), any::<u32>()).prop_map(|(t, n, p, b)| {
                TraceRecord::Throughput {
                    time_us: t as u64,
                    node: n,
                    ingress: p,
                    bytes: b as u64,
                }
            }),
            (any::<u32>(), name(), 0..4usize, any::<u32>()).prop_map(|(t, l, r, c)| {
                TraceRecord::Drop {
                    time_us: t as u64,
                    link: l,
                    reason: [
                        DropReason::QueueFull,
                        DropReason::LinkDown,
                        DropReason::NoRoute,
                        DropReason::Ttl,
                    ][r],
                    count: c as u64,
                }
            }),
        ]
    }

    proptest! {
        #[test]
        fn csv_round_trip(records in prop::collection::vec(record(), 0..20)) {
            let text = to_csv(&records);
            prop_assert_eq!(parse_csv(&text).unwrap(), records);
        }
    }
}
