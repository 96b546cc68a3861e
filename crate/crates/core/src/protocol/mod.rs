//! Distance-vector routing node with RTT-derived link costs and
//! hysteresis-based route selection.

mod message;
mod neighbour;
mod node;
mod route;

pub use message::{
    Hello, Ihu, Message, NodeId, Packet, Update, MESSAGE_BYTES, PACKET_OVERHEAD_BYTES,
};
pub use neighbour::{IhuOutcome, NeighbourState};
pub use node::{
    DestinationRoutes, Node, NodeConfig, NodeEvent, NodeOutput, Outgoing, ProtocolTimers,
};
pub use route::{select_route, HysteresisConfig, RouteEntry};
