//! Delay-based routing for overlay networks.
//!
//! * [`metric`]: asynchronous RTT measurement, smoothing and the saturating
//!   RTT to cost curve.
//! * [`protocol`]: a small distance-vector node that derives link costs from
//!   RTT and selects routes with hysteresis.
//! * [`sim`]: a deterministic discrete-event network simulator.
//! * [`scenario`], [`trace`], [`analysis`]: scenario files, CSV traces and
//!   post-run analysis used by the command-line runner.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod cli;
pub mod metric;
pub mod num;
pub mod protocol;
pub mod scenario;
pub mod sim;
pub mod trace;

pub use metric::{
    mills_rtt, rtt_to_cost, saturating_metric_add, Cost, MetricError, Timestamp, TimestampExchange,
};
pub use num::Scalar;
pub use protocol::NodeId;

pub type RttSample = metric::RttSample<f64>;
pub type RttEstimator = metric::RttEstimator<f64>;
pub type CostConfig = metric::CostConfig<f64>;
pub type HysteresisConfig = protocol::HysteresisConfig<f64>;
pub type RouteEntry = protocol::RouteEntry<f64>;

pub type RttSampleF32 = metric::RttSample<f32>;
pub type RttEstimatorF32 = metric::RttEstimator<f32>;
pub type CostConfigF32 = metric::CostConfig<f32>;
pub type HysteresisConfigF32 = protocol::HysteresisConfig<f32>;
