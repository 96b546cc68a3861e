use std::collections::VecDeque;

/// Outcome of handing a packet to a link.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Transmit {
    Scheduled { deliver_at: f64 },
    QueueFull,
    LinkDown,
}

#[derive(Debug, Clone, Default)]
struct Direction {
    /// Service completion times of packets still queued or in service.
    backlog: VecDeque<f64>,
    busy_until: f64,
}

/// A bidirectional link with one drop-tail FIFO per direction.
///
/// Direction 0 carries `a -> b`, direction 1 `b -> a`.
#[derive(Debug, Clone)]
pub struct LinkState {
    pub a: usize,
    pub b: usize,
    pub propagation_delay_s: f64,
    /// Bytes per second; `None` serializes instantly.
    pub rate: Option<f64>,
    pub queue_capacity: usize,
    pub up: bool,
    /// Bumped on every failure so that packets already in flight are lost.
    pub generation: u64,
    dirs: [Direction; 2],
}

impl LinkState {
    pub fn new(
        a: usize,
        b: usize,
        propagation_delay_s: f64,
        rate: Option<f64>,
        queue_capacity: usize,
    ) -> Self {
        LinkState {
            a,
            b,
            propagation_delay_s,
            rate,
            queue_capacity,
            up: true,
            generation: 0,
            dirs: Default::default(),
        }
    }

    /// Direction index for traffic leaving `from`, if it is an endpoint.
    pub fn direction_from(&self, from: usize) -> Option<usize> {
        if from == self.a {
            Some(0)
        } else if from == self.b {
            Some(1)
        } else {
            None
        }
    }

    pub fn receiver(&self, dir: usize) -> usize {
        if dir == 0 {
            self.b
        } else {
            self.a
        }
    }

    pub fn sender(&self, dir: usize) -> usize {
        if dir == 0 {
            self.a
        } else {
            self.b
        }
    }

    /// Packets queued or in service in `dir` at time `now`.
    pub fn queue_len(&mut self, dir: usize, now: f64) -> usize {
        let d = &mut self.dirs[dir];
        while d.backlog.front().is_some_and(|&done| done <= now) {
            d.backlog.pop_front();
        }
        d.backlog.len()
    }

    /// Enqueues `size` bytes in `dir`. Service starts when the direction is
    /// idle; delivery follows service plus propagation.
    pub fn transmit(&mut self, dir: usize, size: u32, now: f64) -> Transmit {
        if !self.up {
            return Transmit::LinkDown;
        }
        if self.queue_len(dir, now) >= self.queue_capacity {
            return Transmit::QueueFull;
        }
        let service = self.rate.map_or(0.0, |r| size as f64 / r);
        let d = &mut self.dirs[dir];
        let start = now.max(d.busy_until);
        let done = start + service;
        d.busy_until = done;
        d.backlog.push_back(done);
        Transmit::Scheduled {
            deliver_at: done + self.propagation_delay_s,
        }
    }

    pub fn set_down(&mut self, now: f64) {
        self.up = false;
        self.generation += 1;
        for d in &mut self.dirs {
            d.backlog.clear();
            d.busy_until = now;
        }
    }

    pub fn set_up(&mut self) {
        self.up = true;
    }
}
