use std::fmt;
use std::sync::Arc;

use crate::metric::{Cost, Timestamp};

/// Opaque node identifier; cheap to clone.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(Arc<str>);

impl NodeId {
    pub fn new(id: impl AsRef<str>) -> Self {
        NodeId(Arc::from(id.as_ref()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Debug for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", &*self.0)
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for NodeId {
    fn from(s: &str) -> Self {
        NodeId::new(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Hello {
    pub sender: NodeId,
    pub tx_timestamp: Timestamp,
}

/// "I Heard You": confirms reverse reachability and echoes the timestamps
/// needed to finish an RTT measurement at `target`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Ihu {
    pub sender: NodeId,
    pub target: NodeId,
    pub echoed_t1: Timestamp,
    pub rx_u1: Timestamp,
    pub tx_u2: Timestamp,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Update {
    pub sender: NodeId,
    pub destination: NodeId,
    pub advertised_metric: Cost,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Message {
    Hello(Hello),
    Ihu(Ihu),
    Update(Update),
}

impl fmt::Display for Message {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Message::Hello(h) => write!(f, "HELLO({},{})", h.sender, h.tx_timestamp),
            Message::Ihu(i) => write!(
                f,
                "IHU({},{},{},{},{})",
                i.sender, i.target, i.echoed_t1, i.rx_u1, i.tx_u2
            ),
            Message::Update(u) => write!(
                f,
                "UPDATE({},{},{})",
                u.sender, u.destination, u.advertised_metric
            ),
        }
    }
}

/// Bytes charged for an empty protocol packet.
pub const PACKET_OVERHEAD_BYTES: u32 = 64;
/// Bytes charged per aggregated message.
pub const MESSAGE_BYTES: u32 = 16;

/// A set of messages aggregated into one transmission.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Packet {
    pub sender: NodeId,
    pub messages: Vec<Message>,
}

impl Packet {
    pub fn new(sender: NodeId) -> Self {
        Packet {
            sender,
            messages: Vec::new(),
        }
    }

    pub fn size_bytes(&self) -> u32 {
        PACKET_OVERHEAD_BYTES + MESSAGE_BYTES * self.messages.len() as u32
    }

    pub fn is_empty(&self) -> bool {
        self.messages.is_empty()
    }

    /// Every packet carrying an IHU must also carry a Hello from the same
    /// sender, so the receiver can run the timestamp computation.
    pub fn is_well_formed(&self) -> bool {
        let has_ihu = self.messages.iter().any(|m| matches!(m, Message::Ihu(_)));
        if !has_ihu {
            return true;
        }
        self.messages
            .iter()
            .any(|m| matches!(m, Message::Hello(h) if h.sender == self.sender))
    }
}

impl fmt::Display for Packet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, m) in self.messages.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{m}")?;
        }
        Ok(())
    }
}
