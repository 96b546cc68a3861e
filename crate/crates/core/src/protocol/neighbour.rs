use crate::metric::{
    mills_rtt, rtt_to_cost, Cost, CostConfig, MetricError, RttEstimator, RttSample, Timestamp,
    TimestampExchange,
};

use super::message::{Hello, Ihu, NodeId};

/// What a node knows about one adjacent peer.
#[derive(Debug, Clone)]
pub struct NeighbourState {
    pub neighbour: NodeId,
    /// Interface the neighbour is heard on.
    pub interface: NodeId,
    /// Latest `(their tx, our rx)` Hello timestamps, echoed in our next IHU.
    pub last_hello: Option<(Timestamp, Timestamp)>,
    pub estimator: RttEstimator<f64>,
    pub link_cost: Cost,
    /// Global time (s) anything was last received from this peer.
    pub last_heard: f64,
    /// Set once the peer has echoed one of our Hellos back to us.
    pub confirmed: bool,
    /// An IHU should go out on the next round even if none is scheduled.
    pub ihu_pending: bool,
    pub last_sample: Option<RttSample<f64>>,
    pub clamped_samples: u64,
    pub rejected_samples: u64,
}

/// Result of processing an IHU addressed to us.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum IhuOutcome {
    Sampled {
        sample: RttSample<f64>,
        smoothed: f64,
        link_cost: Cost,
    },
    Rejected,
}

impl NeighbourState {
    /// Until the first RTT sample the link is charged `max_cost`.
    pub fn new(neighbour: NodeId, alpha: f64, cfg: &CostConfig<f64>, now: f64) -> Self {
        NeighbourState {
            interface: neighbour.clone(),
            neighbour,
            last_hello: None,
            estimator: RttEstimator::new(alpha).unwrap_or_default(),
            link_cost: cfg.max_cost(),
            last_heard: now,
            confirmed: false,
            ihu_pending: true,
            last_sample: None,
            clamped_samples: 0,
            rejected_samples: 0,
        }
    }

    pub fn on_hello_received(&mut self, hello: &Hello, rx_time: Timestamp, now: f64) {
        debug_assert_eq!(hello.sender, self.neighbour);
        self.last_hello = Some((hello.tx_timestamp, rx_time));
        self.last_heard = self.last_heard.max(now);
    }

    /// Builds the echo for this neighbour, stamped `now` on our clock.
    /// Returns `None` until a Hello has been heard from the peer.
    pub fn build_ihu(&self, sender: &NodeId, now: Timestamp) -> Option<Ihu> {
        let (t1, u1) = self.last_hello?;
        Some(Ihu {
            sender: sender.clone(),
            target: self.neighbour.clone(),
            echoed_t1: t1,
            rx_u1: u1,
            tx_u2: now,
        })
    }

    /// Completes the exchange with `t2 = rx_time`, smooths the sample and
    /// recomputes the link cost. Reverse reachability is refreshed even when
    /// the sample is discarded.
    pub fn on_ihu_received(
        &mut self,
        ihu: &Ihu,
        rx_time: Timestamp,
        cfg: &CostConfig<f64>,
        now: f64,
    ) -> IhuOutcome {
        self.confirmed = true;
        self.last_heard = self.last_heard.max(now);
        let exchange = TimestampExchange {
            t1: ihu.echoed_t1,
            u1: ihu.rx_u1,
            u2: ihu.tx_u2,
            t2: rx_time,
        };
        let sample = match mills_rtt::<f64>(&exchange) {
            Ok(s) => s,
            Err(MetricError::RejectedSample(_)) | Err(_) => {
                self.rejected_samples += 1;
                return IhuOutcome::Rejected;
            }
        };
        if sample.clamped {
            self.clamped_samples += 1;
        }
        let smoothed = self.estimator.apply_sample(sample);
        self.link_cost = rtt_to_cost(smoothed, cfg);
        self.last_sample = Some(sample);
        IhuOutcome::Sampled {
            sample,
            smoothed,
            link_cost: self.link_cost,
        }
    }

    pub fn is_expired(&self, now: f64, hold_time: f64) -> bool {
        now - self.last_heard > hold_time
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> CostConfig<f64> {
        CostConfig::new(10.0, 200.0, 96, 246).unwrap()
    }

    fn hello(ts: u64) -> Hello {
        Hello {
            sender: NodeId::new("B"),
            tx_timestamp: Timestamp(ts),
        }
    }

    fn ihu(t1: u64, u1: u64, u2: u64) -> Ihu {
        Ihu {
            sender: NodeId::new("B"),
            target: NodeId::new("A"),
            echoed_t1: Timestamp(t1),
            rx_u1: Timestamp(u1),
            tx_u2: Timestamp(u2),
        }
    }

    fn fresh() -> NeighbourState {
        NeighbourState::new(NodeId::new("B"), 0.836, &cfg(), 0.0)
    }

    #[test]
    fn hello_pair_is_stored_and_replaced() {
        let mut n = fresh();
        n.on_hello_received(&hello(500), Timestamp(900), 1.0);
        assert_eq!(n.last_hello, Some((Timestamp(500), Timestamp(900))));
        assert_eq!(n.last_heard, 1.0);
        n.on_hello_received(&hello(4500), Timestamp(4900), 5.0);
        assert_eq!(n.last_hello, Some((Timestamp(4500), Timestamp(4900))));
    }

    #[test]
    fn ihu_copies_stored_pair() {
        let mut n = fresh();
        let me = NodeId::new("A");
        assert!(n.build_ihu(&me, Timestamp(2000)).is_none());
        n.on_hello_received(&hello(500), Timestamp(900), 1.0);
        let i = n.build_ihu(&me, Timestamp(2000)).unwrap();
        assert_eq!(
            (i.echoed_t1, i.rx_u1, i.tx_u2),
            (Timestamp(500), Timestamp(900), Timestamp(2000))
        );
        assert_eq!(i.target, NodeId::new("B"));
    }

    #[test]
    fn pessimistic_until_measured() {
        let n = fresh();
        assert_eq!(n.link_cost, Cost(246));
        assert!(!n.confirmed);
    }

    #[test]
    fn ihu_yields_cost() {
        let mut n = fresh();
        // 110 ms: (10_210_000 - 10_000_000) - (20_150_000 - 20_050_000)
        let out = n.on_ihu_received(
            &ihu(10_000_000, 20_050_000, 20_150_000),
            Timestamp(10_210_000),
            &cfg(),
            3.0,
        );
        match out {
            IhuOutcome::Sampled {
                smoothed,
                link_cost,
                ..
            } => {
                assert_eq!(smoothed, 110.0);
                assert_eq!(link_cost, Cost(175));
            }
            IhuOutcome::Rejected => panic!("unexpected rejection"),
        }
        assert!(n.confirmed);
    }

    #[test]
    fn short_rtt_costs_min() {
        let mut n = fresh();
        n.on_ihu_received(&ihu(0, 1_000, 2_000), Timestamp(6_000), &cfg(), 1.0);
        assert_eq!(n.link_cost, Cost(96));
    }

    #[test]
    fn fixed_point_stays_saturated() {
        let mut n = fresh();
        for k in 0..3u64 {
            let base = k * 10_000_000;
            n.on_ihu_received(
                &ihu(base, 0, 0),
                Timestamp(base + 270_000),
                &cfg(),
                k as f64,
            );
            assert_eq!(n.estimator.smoothed(), Some(270.0));
            assert_eq!(n.link_cost, Cost(246));
        }
    }

    #[test]
    fn malformed_exchange_still_confirms() {
        let mut n = fresh();
        let out = n.on_ihu_received(&ihu(100, 500, 400), Timestamp(1000), &cfg(), 2.0);
        assert_eq!(out, IhuOutcome::Rejected);
        assert!(n.confirmed);
        assert_eq!(n.rejected_samples, 1);
        assert_eq!(n.estimator.smoothed(), None);
        assert_eq!(n.last_heard, 2.0);
    }

    #[test]
    fn expiry() {
        let n = fresh();
        assert!(!n.is_expired(14.0, 14.0));
        assert!(n.is_expired(14.5, 14.0));
    }
}
