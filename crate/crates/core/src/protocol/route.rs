use crate::metric::{saturating_metric_add, Cost};
use crate::num::Scalar;

use super::message::NodeId;

/// Smoothing of route metrics used for selection hysteresis.
///
/// The smoothed metric approaches the advertised one with base-2 time
/// constant `time_constant`: `beta(d) = 2^(-d / time_constant)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HysteresisConfig<F> {
    time_constant: F,
}

impl<F: Scalar> Default for HysteresisConfig<F> {
    fn default() -> Self {
        HysteresisConfig {
            time_constant: F::lit(4.0),
        }
    }
}

impl<F: Scalar> HysteresisConfig<F> {
    pub fn new(time_constant: F) -> Option<Self> {
        (time_constant > F::zero() && time_constant.is_finite())
            .then_some(HysteresisConfig { time_constant })
    }

    pub fn time_constant(&self) -> F {
        self.time_constant
    }

    pub fn beta(&self, delta: F) -> F {
        F::lit(2.0).powf(-delta / self.time_constant)
    }
}

/// One route to `destination` through `next_hop`.
#[derive(Debug, Clone, PartialEq)]
pub struct RouteEntry<F> {
    pub destination: NodeId,
    pub next_hop: NodeId,
    /// Metric as advertised by the neighbour, before adding our link cost.
    pub received_metric: Cost,
    /// Total metric (link cost + received), the route's M_a.
    pub advertised_metric: Cost,
    /// Smoothed total metric, M_s.
    pub smoothed_metric: F,
    pub last_smooth_update: F,
    pub selected: bool,
}

impl<F: Scalar> RouteEntry<F> {
    /// New routes start with the smoothed metric equal to the advertised one.
    pub fn new(
        destination: NodeId,
        next_hop: NodeId,
        received_metric: Cost,
        link_cost: Cost,
        now: F,
    ) -> Self {
        let total = saturating_metric_add(link_cost, received_metric);
        RouteEntry {
            destination,
            next_hop,
            received_metric,
            advertised_metric: total,
            smoothed_metric: F::lit(total.0 as f64),
            last_smooth_update: now,
            selected: false,
        }
    }

    pub fn is_retracted(&self) -> bool {
        self.advertised_metric.is_infinite()
    }

    /// `M_s := beta(d) * M_s + (1 - beta(d)) * M_a` with `d` the time since
    /// the previous update. Retracted routes keep their smoothed value.
    pub fn update_smoothed_metric(&mut self, now: F, h: &HysteresisConfig<F>) {
        let delta = (now - self.last_smooth_update).max(F::zero());
        if !self.is_retracted() {
            let beta = h.beta(delta);
            let target = F::lit(self.advertised_metric.0 as f64);
            self.smoothed_metric = beta * self.smoothed_metric + (F::one() - beta) * target;
        }
        self.last_smooth_update = now;
    }

    /// Smoothed metric as it would read at `now`, without updating state.
    pub fn smoothed_at(&self, now: F, h: &HysteresisConfig<F>) -> F {
        if self.is_retracted() {
            return self.smoothed_metric;
        }
        let beta = h.beta((now - self.last_smooth_update).max(F::zero()));
        beta * self.smoothed_metric + (F::one() - beta) * F::lit(self.advertised_metric.0 as f64)
    }

    /// Installs a new received metric and/or link cost. The smoothed value
    /// is brought up to `now` under the old advertised metric first; a route
    /// coming back from retraction is re-initialized like a new one.
    pub fn set_metric(
        &mut self,
        received_metric: Cost,
        link_cost: Cost,
        now: F,
        h: &HysteresisConfig<F>,
    ) -> bool {
        self.update_smoothed_metric(now, h);
        let was_retracted = self.is_retracted();
        let total = saturating_metric_add(link_cost, received_metric);
        self.received_metric = received_metric;
        let changed = total != self.advertised_metric;
        self.advertised_metric = total;
        if was_retracted && total.is_finite() {
            self.smoothed_metric = F::lit(total.0 as f64);
        }
        changed
    }
}

/// Picks the route to use among `candidates`, given the `current` choice.
///
/// Candidates must have their smoothed metrics brought up to date. Retracted
/// routes are never chosen. Without a usable current route the lowest
/// advertised metric wins outright; otherwise a candidate must beat the
/// current route on both the advertised and the smoothed metric. Ties are
/// broken by the smallest next-hop id.
pub fn select_route<'a, F: Scalar>(
    current: Option<&RouteEntry<F>>,
    candidates: &[&'a RouteEntry<F>],
) -> Option<&'a RouteEntry<F>> {
    let usable = candidates.iter().copied().filter(|r| !r.is_retracted());
    let best = |it: &mut dyn Iterator<Item = &'a RouteEntry<F>>| {
        it.min_by(|a, b| {
            a.advertised_metric
                .cmp(&b.advertised_metric)
                .then_with(|| a.next_hop.cmp(&b.next_hop))
        })
    };
    let current = match current {
        Some(c) if !c.is_retracted() => c,
        _ => return best(&mut usable.into_iter()),
    };
    let mut qualifying = usable.filter(|r| {
        r.next_hop != current.next_hop
            && r.advertised_metric < current.advertised_metric
            && r.smoothed_metric < current.smoothed_metric
    });
    match best(&mut qualifying) {
        Some(r) => Some(r),
        None => candidates
            .iter()
            .copied()
            .find(|r| r.next_hop == current.next_hop)
            .or_else(|| best(&mut candidates.iter().copied().filter(|r| !r.is_retracted()))),
    }
}
