use std::cmp::Reverse;
use std::collections::BinaryHeap;

use crate::model::{EventPayload, SimEvent, SimTime};

/// Min-ordered event queue. Events at equal times pop in scheduling order.
#[derive(Debug, Default)]
pub struct EventQueue {
    heap: BinaryHeap<Reverse<SimEvent>>,
    next_seq: u64,
    now: SimTime,
}

impl EventQueue {
    pub fn new() -> Self {
        Self::default()
    }

    /// Time of the most recently popped event.
    pub fn now(&self) -> SimTime {
        self.now
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }

    /// # Panics
    /// If `time` is earlier than [`EventQueue::now`].
    pub fn schedule(&mut self, time: SimTime, payload: EventPayload) -> u64 {
        assert!(
            time >= self.now,
            "event scheduled at {time} before current time {}",
            self.now
        );
        let seq = self.next_seq;
        self.next_seq += 1;
        self.heap.push(Reverse(SimEvent { time, seq, payload }));
        seq
    }

    pub fn schedule_in(&mut self, delay_us: u64, payload: EventPayload) -> u64 {
        self.schedule(self.now.plus(delay_us), payload)
    }

    pub fn peek_time(&self) -> Option<SimTime> {
        self.heap.peek().map(|Reverse(e)| e.time)
    }

    pub fn pop(&mut self) -> Option<SimEvent> {
        let Reverse(e) = self.heap.pop()?;
        self.now = e.time;
        Some(e)
    }
}
