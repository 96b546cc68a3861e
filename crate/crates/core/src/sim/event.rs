use std::cmp::Ordering;
use std::collections::BinaryHeap;

/// A scheduled action, ordered by `(fire_time, sequence)`.
#[derive(Debug, Clone)]
pub struct SimEvent<A> {
    pub fire_time: f64,
    pub sequence: u64,
    pub action: A,
}

impl<A> PartialEq for SimEvent<A> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl<A> Eq for SimEvent<A> {}

impl<A> PartialOrd for SimEvent<A> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<A> Ord for SimEvent<A> {
    // reversed: BinaryHeap is a max-heap
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .fire_time
            .total_cmp(&self.fire_time)
            .then_with(|| other.sequence.cmp(&self.sequence))
    }
}

/// Min-queue of events with FIFO order among equal times.
#[derive(Debug)]
pub struct EventQueue<A> {
    heap: BinaryHeap<SimEvent<A>>,
    next_sequence: u64,
    now: f64,
}

impl<A> Default for EventQueue<A> {
    fn default() -> Self {
        EventQueue {
            heap: BinaryHeap::new(),
            next_sequence: 0,
            now: 0.0,
        }
    }
}

impl<A> EventQueue<A> {
    pub fn now(&self) -> f64 {
        self.now
    }

    /// Schedules `action`; times in the past are moved to the present.
    pub fn schedule(&mut self, at: f64, action: A) {
        let fire_time = if at < self.now { self.now } else { at };
        let sequence = self.next_sequence;
        self.next_sequence += 1;
        self.heap.push(SimEvent {
            fire_time,
            sequence,
            action,
        });
    }

    pub fn peek_time(&self) -> Option<f64> {
        self.heap.peek().map(|e| e.fire_time)
    }

    pub fn pop(&mut self) -> Option<SimEvent<A>> {
        let e = self.heap.pop()?;
        self.now = e.fire_time;
        Some(e)
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &SimEvent<A>> {
        self.heap.iter()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn time_then_sequence_order() {
        let mut q = EventQueue::default();
        q.schedule(2.0, "c");
        q.schedule(1.0, "a");
        q.schedule(1.0, "b");
        q.schedule(0.5, "first");
        let order: Vec<_> = std::iter::from_fn(|| q.pop().map(|e| e.action)).collect();
        assert_eq!(order, ["first", "a", "b", "c"]);
    }

    #[test]
    fn never_in_the_past() {
        let mut q = EventQueue::default();
        q.schedule(5.0, 1);
        q.pop();
        q.schedule(3.0, 2);
        assert_eq!(q.pop().unwrap().fire_time, 5.0);
    }
}
