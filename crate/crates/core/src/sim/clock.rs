use crate::metric::Timestamp;

/// A node's local clock: `local(t) = epoch_offset + (1 + skew) * t`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct NodeClock {
    /// Rate offset, e.g. `10e-6` for a clock running 10 ppm fast.
    pub skew: f64,
    pub epoch_offset_s: f64,
}

impl NodeClock {
    pub fn new(skew: f64, epoch_offset_s: f64) -> Self {
        NodeClock {
            skew,
            epoch_offset_s,
        }
    }

    pub fn from_ppm(skew_ppm: f64, epoch_offset_s: f64) -> Self {
        NodeClock::new(skew_ppm * 1e-6, epoch_offset_s)
    }

    /// Reads the clock at global time `t` (seconds), in whole microseconds.
    ///
    /// The offset is added as an exact integer so that shifting a clock never
    /// changes a same-clock difference.
    pub fn local_time(&self, t: f64) -> Timestamp {
        let offset_us = (self.epoch_offset_s * 1e6).round() as u64;
        let elapsed_us = ((1.0 + self.skew) * t * 1e6).round().max(0.0) as u64;
        Timestamp(offset_us + elapsed_us)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_clock() {
        assert_eq!(NodeClock::default().local_time(1.5), Timestamp(1_500_000));
    }

    #[test]
    fn skewed_clock() {
        // 12 s * 10e-6 = 120 us ahead
        let c = NodeClock::from_ppm(10.0, 0.0);
        assert_eq!(c.local_time(12.0), Timestamp(12_000_120));
    }

    #[test]
    fn offset_shifts_everything() {
        let a = NodeClock::default();
        let b = NodeClock::new(0.0, 1000.0);
        for t in [0.0, 0.1234567, 3.0, 999.999999] {
            assert_eq!(b.local_time(t).0 - a.local_time(t).0, 1_000_000_000);
        }
    }

    #[test]
    fn monotone() {
        let c = NodeClock::from_ppm(-25.0, 3.0);
        let mut prev = c.local_time(0.0);
        for i in 1..10_000 {
            let now = c.local_time(i as f64 * 0.0137);
            assert!(now >= prev);
            prev = now;
        }
    }
}
