use std::fmt::{self, Write as _};
use std::io;

use serde::Serialize;

use super::analysis::{critical_path, work_account, WorkBreakdown};
use crate::Nanos;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Phase {
    /// Per-element preparation steps preceding the scan.
    Preprocess,
    /// First local phase: segment scan or reduction.
    Local1,
    /// Scan over the lane totals inside a rank.
    LaneScan,
    Global,
    /// Second local phase: map or rescan.
    Local2,
}

impl Phase {
    pub const ALL: [Phase; 5] = [
        Phase::Preprocess,
        Phase::Local1,
        Phase::LaneScan,
        Phase::Global,
        Phase::Local2,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Phase::Preprocess => "preprocess",
            Phase::Local1 => "local1",
            Phase::LaneScan => "lane-scan",
            Phase::Global => "global",
            Phase::Local2 => "local2",
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum EventKind {
    /// A preprocessing step on one element.
    Map,
    /// One operator application.
    Combine,
    Send,
    Recv,
    Barrier,
    Idle,
}

impl EventKind {
    pub fn name(self) -> &'static str {
        match self {
            EventKind::Map => "map",
            EventKind::Combine => "combine",
            EventKind::Send => "send",
            EventKind::Recv => "recv",
            EventKind::Barrier => "barrier",
            EventKind::Idle => "idle",
        }
    }

    /// Whether the event is an operator application for depth purposes.
    pub fn is_application(self) -> bool {
        matches!(self, EventKind::Map | EventKind::Combine)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Backend {
    Sim,
    Exec,
}

impl Backend {
    pub fn name(self) -> &'static str {
        match self {
            Backend::Sim => "sim",
            Backend::Exec => "exec",
        }
    }
}

/// One interval on one worker's timeline.
///
/// `src`/`dst` meaning by kind: `combine` folds element or slot `src` into
/// slot `dst` (`dst` empty while reducing); `map` prepares element `src`;
/// `send`/`recv` carry the sending and receiving worker ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Event {
    pub worker: usize,
    pub kind: EventKind,
    pub start: Nanos,
    pub end: Nanos,
    pub phase: Phase,
    pub src: Option<usize>,
    pub dst: Option<usize>,
    /// Indices of earlier events this one waits for, besides the previous
    /// event of the same worker.
    pub deps: Vec<usize>,
}

impl Event {
    pub fn duration(&self) -> Nanos {
        self.end - self.start
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trace {
    pub backend: Backend,
    pub workers: usize,
    pub events: Vec<Event>,
    /// Mean duration of one application under the cost model, for the energy
    /// proxy.
    pub mean_cost: u64,
}

pub const CSV_HEADER: &str = "worker,kind,start_ns,end_ns,phase,src,dst";

impl Trace {
    pub fn makespan(&self) -> Nanos {
        self.events.iter().map(|e| e.end).max().unwrap_or(0)
    }

    pub fn total_combines(&self) -> u64 {
        self.events.iter().filter(|e| e.kind == EventKind::Combine).count() as u64
    }

    pub fn events_in(&self, phase: Phase) -> impl Iterator<Item = &Event> {
        self.events.iter().filter(move |e| e.phase == phase)
    }

    /// Time from the first event of `phase` starting to the last one ending.
    pub fn phase_span(&self, phase: Phase) -> Nanos {
        let mut start = Nanos::MAX;
        let mut end = 0;
        for e in self.events_in(phase) {
            start = start.min(e.start);
            end = end.max(e.end);
        }
        end.saturating_sub(start)
    }

    /// Latest end of an application event in `phase`.
    pub fn phase_finish(&self, phase: Phase) -> Nanos {
        self.events_in(phase)
            .filter(|e| e.kind.is_application())
            .map(|e| e.end)
            .max()
            .unwrap_or(0)
    }

    /// Sum of all application durations.
    pub fn busy_time(&self) -> Nanos {
        self.events
            .iter()
            .filter(|e| e.kind.is_application())
            .map(Event::duration)
            .sum()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(32 * (self.events.len() + 1));
        out.push_str(CSV_HEADER);
        out.push('\n');
        let opt = |v: Option<usize>| v.map(|v| v.to_string()).unwrap_or_default();
        for e in &self.events {
            writeln!(
                out,
                "{},{},{},{},{},{},{}",
                e.worker,
                e.kind.name(),
                e.start,
                e.end,
                e.phase.name(),
                opt(e.src),
                opt(e.dst)
            )
            .expect("writing to a String");
        }
        out
    }

    pub fn write_csv<W: io::Write>(&self, mut w: W) -> io::Result<()> {
        w.write_all(self.to_csv().as_bytes())
    }

    pub fn summary(&self) -> TraceSummary {
        let work = work_account(self);
        TraceSummary {
            backend: self.backend,
            workers: self.workers,
            makespan_ns: self.makespan(),
            work: work.total,
            depth: critical_path(self),
            busy_ns: self.busy_time(),
            energy_proxy_ns: work.total.saturating_add(work.preprocess) * self.mean_cost,
            phases: work,
        }
    }

    pub fn summary_json(&self) -> String {
        serde_json::to_string_pretty(&self.summary()).expect("summary serializes")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TraceSummary {
    pub backend: Backend,
    pub workers: usize,
    pub makespan_ns: Nanos,
    pub work: u64,
    pub depth: u64,
    pub busy_ns: Nanos,
    /// Applications × mean application cost.
    pub energy_proxy_ns: u64,
    pub phases: WorkBreakdown,
}
