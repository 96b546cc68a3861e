//! RTT measurement, smoothing and the RTT to cost mapping.
//!
//! Everything here is a pure value computation. The scalar type used for
//! milliseconds is generic; the crate root exposes `f64` aliases.

use std::fmt;

use thiserror::Error;

use crate::num::Scalar;

/// Smoothing factor applied to the previous RTT estimate.
pub const DEFAULT_ALPHA: f64 = 0.836;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricError {
    #[error("malformed timestamp exchange: {0}")]
    RejectedSample(&'static str),
    #[error("invalid cost configuration: {0}")]
    InvalidCostConfig(String),
    #[error("smoothing factor {0} outside (0, 1)")]
    InvalidAlpha(f64),
}

/// Microseconds since an arbitrary per-node epoch.
///
/// Only differences of readings from the same clock are meaningful.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Timestamp(pub u64);

impl Timestamp {
    pub const fn from_micros(us: u64) -> Self {
        Timestamp(us)
    }

    pub const fn as_micros(self) -> u64 {
        self.0
    }

    /// Signed difference `self - earlier` in microseconds.
    pub fn micros_since(self, earlier: Timestamp) -> i64 {
        self.0 as i64 - earlier.0 as i64
    }
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// The four timestamps of one asynchronous round trip.
///
/// `t1`/`t2` are read from the origin's clock, `u1`/`u2` from the peer's.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TimestampExchange {
    pub t1: Timestamp,
    pub u1: Timestamp,
    pub u2: Timestamp,
    pub t2: Timestamp,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RttSample<F> {
    /// Milliseconds, never negative.
    pub rtt: F,
    /// Set when the raw difference was negative and clamped to zero.
    pub clamped: bool,
}

impl<F: Scalar> RttSample<F> {
    pub fn new(rtt: F) -> Self {
        RttSample {
            rtt: rtt.max(F::zero()),
            clamped: false,
        }
    }
}

/// Computes `(t2 - t1) - (u2 - u1)` in milliseconds.
///
/// Each bracket is a difference on a single clock, so the clocks need not
/// agree on absolute time.
pub fn mills_rtt<F: Scalar>(x: &TimestampExchange) -> Result<RttSample<F>, MetricError> {
    if x.t2 < x.t1 {
        return Err(MetricError::RejectedSample("t2 precedes t1"));
    }
    if x.u2 < x.u1 {
        return Err(MetricError::RejectedSample("u2 precedes u1"));
    }
    let local = (x.t2.0 - x.t1.0) as i128;
    let remote = (x.u2.0 - x.u1.0) as i128;
    let raw_us = local - remote;
    if raw_us < 0 {
        return Ok(RttSample {
            rtt: F::zero(),
            clamped: true,
        });
    }
    let ms = F::lit(raw_us as f64) / F::lit(1000.0);
    Ok(RttSample {
        rtt: ms,
        clamped: false,
    })
}

/// Exponentially smoothed RTT for one neighbour.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RttEstimator<F> {
    smoothed: Option<F>,
    alpha: F,
}

impl<F: Scalar> Default for RttEstimator<F> {
    fn default() -> Self {
        RttEstimator {
            smoothed: None,
            alpha: F::lit(DEFAULT_ALPHA),
        }
    }
}

impl<F: Scalar> RttEstimator<F> {
    pub fn new(alpha: F) -> Result<Self, MetricError> {
        if !(alpha > F::zero() && alpha < F::one()) {
            return Err(MetricError::InvalidAlpha(alpha.to_f64_lossy()));
        }
        Ok(RttEstimator {
            smoothed: None,
            alpha,
        })
    }

    pub fn alpha(&self) -> F {
        self.alpha
    }

    pub fn smoothed(&self) -> Option<F> {
        self.smoothed
    }

    /// Folds a sample in: `rtt := alpha * rtt + (1 - alpha) * sample`.
    /// The first sample initializes the estimate directly.
    pub fn apply_sample(&mut self, sample: RttSample<F>) -> F {
        let next = match self.smoothed {
            None => sample.rtt,
            Some(old) => self.alpha * old + (F::one() - self.alpha) * sample.rtt,
        };
        self.smoothed = Some(next);
        next
    }
}

/// A 16-bit routing metric. `Cost::INFINITY` marks an unreachable route.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Cost(pub u16);

impl Cost {
    pub const ZERO: Cost = Cost(0);
    pub const INFINITY: Cost = Cost(0xFFFF);
    /// Largest finite metric.
    pub const MAX_FINITE: Cost = Cost(0xFFFE);

    pub const fn value(self) -> u16 {
        self.0
    }

    pub const fn is_infinite(self) -> bool {
        self.0 == 0xFFFF
    }

    pub const fn is_finite(self) -> bool {
        !self.is_infinite()
    }
}

impl fmt::Display for Cost {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Adds a link cost to an advertised metric. Infinity absorbs, finite sums
/// saturate at `Cost::MAX_FINITE`.
pub fn saturating_metric_add(cost: Cost, advertised: Cost) -> Cost {
    if cost.is_infinite() || advertised.is_infinite() {
        return Cost::INFINITY;
    }
    let sum = cost.0 as u32 + advertised.0 as u32;
    Cost(sum.min(Cost::MAX_FINITE.0 as u32) as u16)
}

/// Parameters of the piecewise affine RTT to cost curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostConfig<F> {
    min_rtt: F,
    max_rtt: F,
    min_cost: u16,
    max_cost: u16,
}

impl<F: Scalar> Default for CostConfig<F> {
    fn default() -> Self {
        CostConfig {
            min_rtt: F::lit(10.0),
            max_rtt: F::lit(120.0),
            min_cost: 96,
            max_cost: 246,
        }
    }
}

impl<F: Scalar> CostConfig<F> {
    pub fn new(min_rtt: F, max_rtt: F, min_cost: u16, max_cost: u16) -> Result<Self, MetricError> {
        if !(min_rtt > F::zero()) {
            return Err(MetricError::InvalidCostConfig(format!(
                "min_rtt must be positive, got {min_rtt}"
            )));
        }
        if !(max_rtt > min_rtt) || !max_rtt.is_finite() {
            return Err(MetricError::InvalidCostConfig(format!(
                "max_rtt ({max_rtt}) must exceed min_rtt ({min_rtt})"
            )));
        }
        if min_cost == 0 {
            return Err(MetricError::InvalidCostConfig(
                "min_cost must be positive".into(),
            ));
        }
        if min_cost > max_cost {
            return Err(MetricError::InvalidCostConfig(format!(
                "min_cost ({min_cost}) exceeds max_cost ({max_cost})"
            )));
        }
        if max_cost == Cost::INFINITY.0 {
            return Err(MetricError::InvalidCostConfig(
                "max_cost must be below the infinite metric 0xFFFF".into(),
            ));
        }
        Ok(CostConfig {
            min_rtt,
            max_rtt,
            min_cost,
            max_cost,
        })
    }

    pub fn min_rtt(&self) -> F {
        self.min_rtt
    }

    pub fn max_rtt(&self) -> F {
        self.max_rtt
    }

    pub fn min_cost(&self) -> Cost {
        Cost(self.min_cost)
    }

    pub fn max_cost(&self) -> Cost {
        Cost(self.max_cost)
    }

    /// Metric units per millisecond on the affine segment.
    pub fn slope(&self) -> F {
        F::lit((self.max_cost - self.min_cost) as f64) / (self.max_rtt - self.min_rtt)
    }
}

/// Maps a smoothed RTT (ms) to a link cost.
///
/// Flat at `min_cost` up to `min_rtt`, flat at `max_cost` from `max_rtt`,
/// affine in between with fractions rounded half-up.
pub fn rtt_to_cost<F: Scalar>(rtt: F, cfg: &CostConfig<F>) -> Cost {
    if !(rtt > cfg.min_rtt) {
        return cfg.min_cost();
    }
    if rtt >= cfg.max_rtt {
        return cfg.max_cost();
    }
    let exact = F::lit(cfg.min_cost as f64) + (rtt - cfg.min_rtt) * cfg.slope();
    let rounded = (exact + F::lit(0.5)).floor();
    let clamped = rounded
        .max(F::lit(cfg.min_cost as f64))
        .min(F::lit(cfg.max_cost as f64));
    Cost(clamped.to_f64_lossy() as u16)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ts(us: u64) -> Timestamp {
        Timestamp(us)
    }

    fn exchange(t1: u64, u1: u64, u2: u64, t2: u64) -> TimestampExchange {
        TimestampExchange {
            t1: ts(t1),
            u1: ts(u1),
            u2: ts(u2),
            t2: ts(t2),
        }
    }

    fn experiment_cfg() -> CostConfig<f64> {
        CostConfig::new(10.0, 200.0, 96, 246).unwrap()
    }

    #[test]
    fn mills_basic() {
        let s: RttSample<f64> =
            mills_rtt(&exchange(10_000_000, 20_050_000, 20_150_000, 10_210_000)).unwrap();
        assert_eq!(s.rtt, 110.0);
        assert!(!s.clamped);

        let s: RttSample<f64> = mills_rtt(&exchange(0, 5_000_000, 5_000_000, 0)).unwrap();
        assert_eq!(s.rtt, 0.0);
        assert!(!s.clamped);
    }

    #[test]
    fn mills_negative_is_clamped() {
        // raw = (50_000 - 0) - (100_000 - 0) = -50_000 us
        let s: RttSample<f64> = mills_rtt(&exchange(0, 0, 100_000, 50_000)).unwrap();
        assert_eq!(s.rtt, 0.0);
        assert!(s.clamped);
    }

    #[test]
    fn mills_rejects_malformed() {
        assert!(mills_rtt::<f64>(&exchange(100, 0, 10, 50)).is_err());
        assert!(mills_rtt::<f64>(&exchange(0, 10, 5, 50)).is_err());
    }

    #[test]
    fn estimator_rules() {
        let mut e = RttEstimator::<f64>::default();
        assert_eq!(e.smoothed(), None);
        assert_eq!(e.apply_sample(RttSample::new(270.0)), 270.0);

        let mut e = RttEstimator::<f64>::default();
        e.apply_sample(RttSample::new(285.0));
        assert_eq!(e.apply_sample(RttSample::new(285.0)), 285.0);

        let mut e = RttEstimator::<f64>::default();
        e.apply_sample(RttSample::new(100.0));
        let v = e.apply_sample(RttSample::new(200.0));
        assert!((v - (0.836 * 100.0 + 0.164 * 200.0)).abs() < 1e-12);
        assert!((v - 116.4).abs() < 1e-9);
    }

    #[test]
    fn estimator_rejects_bad_alpha() {
        assert!(RttEstimator::<f64>::new(0.0).is_err());
        assert!(RttEstimator::<f64>::new(1.0).is_err());
        assert!(RttEstimator::<f64>::new(0.5).is_ok());
    }

    #[test]
    fn cost_curve_points() {
        let cfg = experiment_cfg();
        assert_eq!(rtt_to_cost(10.0, &cfg), Cost(96));
        assert_eq!(rtt_to_cost(0.0, &cfg), Cost(96));
        assert_eq!(rtt_to_cost(300.0, &cfg), Cost(246));
        assert_eq!(rtt_to_cost(200.0, &cfg), Cost(246));
        // 96 + 95 * 150 / 190 = 171.0
        assert_eq!(rtt_to_cost(105.0, &cfg), Cost(171));
        // 96 + 100 * 150 / 190 = 174.947... rounds to 175
        assert_eq!(rtt_to_cost(110.0, &cfg), Cost(175));
    }

    #[test]
    fn cost_rounds_half_up() {
        // slope 1 unit/ms: 96 + 0.5 -> 97
        let cfg = CostConfig::new(10.0, 160.0, 96, 246).unwrap();
        assert_eq!(rtt_to_cost(10.5, &cfg), Cost(97));
        assert_eq!(rtt_to_cost(10.49, &cfg), Cost(96));
    }

    #[test]
    fn cost_config_validation() {
        assert!(CostConfig::<f64>::new(0.0, 10.0, 96, 246).is_err());
        assert!(CostConfig::<f64>::new(20.0, 10.0, 96, 246).is_err());
        assert!(CostConfig::<f64>::new(10.0, 120.0, 0, 246).is_err());
        assert!(CostConfig::<f64>::new(10.0, 120.0, 300, 246).is_err());
        assert!(CostConfig::<f64>::new(10.0, 120.0, 96, 0xFFFF).is_err());
        assert!(CostConfig::<f64>::new(10.0, 120.0, 96, 96).is_ok());
        let d = CostConfig::<f64>::default();
        assert_eq!((d.min_rtt(), d.max_rtt()), (10.0, 120.0));
        assert_eq!((d.min_cost(), d.max_cost()), (Cost(96), Cost(246)));
    }

    #[test]
    fn metric_addition() {
        assert_eq!(saturating_metric_add(Cost(96), Cost(96)), Cost(192));
        assert_eq!(
            saturating_metric_add(Cost(246), Cost::INFINITY),
            Cost::INFINITY
        );
        assert_eq!(
            saturating_metric_add(Cost::INFINITY, Cost(0)),
            Cost::INFINITY
        );
        // 0x9000 + 0x9000 = 0x12000 > 0xFFFE
        assert_eq!(
            saturating_metric_add(Cost(0x9000), Cost(0x9000)),
            Cost(0xFFFE)
        );
    }

    #[test]
    fn works_with_f32() {
        let cfg = CostConfig::<f32>::new(10.0, 200.0, 96, 246).unwrap();
        assert_eq!(rtt_to_cost(105.0f32, &cfg), Cost(171));
        let s: RttSample<f32> =
            mills_rtt(&exchange(10_000_000, 20_050_000, 20_150_000, 10_210_000)).unwrap();
        assert_eq!(s.rtt, 110.0f32);
    }
}
