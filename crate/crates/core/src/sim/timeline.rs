use super::trace::{Backend, Event, EventKind, Phase, Trace};
use crate::Nanos;

/// A message in flight: the send event and the time it becomes available.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Message {
    pub event: usize,
    pub arrival: Nanos,
}

/// Virtual clocks for a set of workers, recording every interval as an
/// [`Event`]. Each worker executes its operations in program order; waiting
/// on messages and barriers shows up as `recv` and `barrier` events.
#[derive(Debug, Clone)]
pub struct Timeline {
    clocks: Vec<Nanos>,
    last: Vec<Option<usize>>,
    events: Vec<Event>,
    latency: Nanos,
    phase: Phase,
}

impl Timeline {
    pub fn new(workers: usize, latency: Nanos) -> Self {
        Self {
            clocks: vec![0; workers],
            last: vec![None; workers],
            events: Vec::new(),
            latency,
            phase: Phase::Local1,
        }
    }

    pub fn workers(&self) -> usize {
        self.clocks.len()
    }

    pub fn set_phase(&mut self, phase: Phase) {
        self.phase = phase;
    }

    pub fn clock(&self, worker: usize) -> Nanos {
        self.clocks[worker]
    }

    fn push(
        &mut self,
        worker: usize,
        kind: EventKind,
        end: Nanos,
        src: Option<usize>,
        dst: Option<usize>,
        deps: Vec<usize>,
    ) -> usize {
        let start = self.clocks[worker];
        debug_assert!(end >= start);
        self.clocks[worker] = end;
        self.last[worker] = Some(self.events.len());
        self.events.push(Event {
            worker,
            kind,
            start,
            end,
            phase: self.phase,
            src,
            dst,
            deps,
        });
        self.events.len() - 1
    }

    /// Runs one operator application of duration `cost` on `worker`.
    pub fn combine(&mut self, worker: usize, cost: Nanos, src: Option<usize>, dst: Option<usize>) -> usize {
        let end = self.clocks[worker] + cost;
        self.push(worker, EventKind::Combine, end, src, dst, Vec::new())
    }

    /// Runs one preprocessing step on element `index`.
    pub fn map(&mut self, worker: usize, cost: Nanos, index: usize) -> usize {
        let end = self.clocks[worker] + cost;
        self.push(worker, EventKind::Map, end, Some(index), None, Vec::new())
    }

    /// Message to another rank; arrives after the configured latency.
    pub fn send(&mut self, from: usize, to: usize) -> Message {
        self.post(from, to, self.latency)
    }

    /// Hand-off through shared memory inside a rank; no latency.
    pub fn share(&mut self, from: usize, to: usize) -> Message {
        self.post(from, to, 0)
    }

    fn post(&mut self, from: usize, to: usize, latency: Nanos) -> Message {
        let at = self.clocks[from];
        let event = self.push(from, EventKind::Send, at, Some(from), Some(to), Vec::new());
        Message {
            event,
            arrival: at + latency,
        }
    }

    pub fn recv(&mut self, worker: usize, msg: Message) -> usize {
        let end = self.clocks[worker].max(msg.arrival);
        let from = self.events[msg.event].worker;
        self.push(worker, EventKind::Recv, end, Some(from), Some(worker), vec![msg.event])
    }

    /// Holds every participant until the last one arrives.
    pub fn barrier(&mut self, workers: impl IntoIterator<Item = usize>) {
        let workers: Vec<usize> = workers.into_iter().collect();
        let Some(release) = workers.iter().map(|&w| self.clocks[w]).max() else {
            return;
        };
        let deps: Vec<usize> = workers.iter().filter_map(|&w| self.last[w]).collect();
        let mut join = None;
        for &w in &workers {
            let deps = match join {
                None => deps.clone(),
                Some(j) => vec![j],
            };
            let id = self.push(w, EventKind::Barrier, release, None, None, deps);
            join.get_or_insert(id);
        }
    }

    pub fn barrier_all(&mut self) {
        self.barrier(0..self.clocks.len());
    }

    pub fn into_trace(self, backend: Backend, mean_cost: u64) -> Trace {
        Trace {
            backend,
            workers: self.clocks.len(),
            events: self.events,
            mean_cost,
        }
    }
}
