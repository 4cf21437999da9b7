//! Session snapshots, built on the run loop's thread and fanned out to
//! feed subscribers.

use std::collections::VecDeque;
use std::sync::{Arc, Mutex};

use lazyseq_core::highlight::HighlightSet;
use lazyseq_core::stream::{ExecutionMode, Machine, Observer, OutputEvent};
use serde::Serialize;
use tokio::sync::broadcast;

/// How many of the latest events a snapshot carries.
pub const RECENT_EVENTS: usize = 64;

/// Nesting depth at which the rendered term is cut off with `...`.
pub const RENDER_DEPTH: usize = 24;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Snapshot {
    /// Increases by one with every published snapshot.
    pub seq: u64,
    pub program_version: u64,
    pub machine_status: &'static str,
    pub error: Option<String>,
    pub mode: &'static str,
    pub pause_ms: Option<u64>,
    pub elapsed_ms: u64,
    pub element_count: u64,
    pub rendered_term: String,
    pub term_size: usize,
    pub latest_highlights: HighlightSet,
    pub recent_events: Vec<OutputEvent>,
}

/// The latest snapshot and the channel that carries every later one.
pub struct Feed {
    latest: Mutex<(Arc<Snapshot>, Arc<str>)>,
    sender: broadcast::Sender<Arc<str>>,
}

impl Feed {
    pub fn new(first: Snapshot) -> Feed {
        let json: Arc<str> = serde_json::to_string(&first).expect("snapshots serialize").into();
        let (sender, _) = broadcast::channel(256);
        Feed {
            latest: Mutex::new((Arc::new(first), json)),
            sender,
        }
    }

    pub fn latest(&self) -> Arc<Snapshot> {
        self.latest.lock().unwrap().0.clone()
    }

    /// The current snapshot as JSON and a receiver for every later one,
    /// with nothing lost in between.
    pub fn subscribe(&self) -> (Arc<str>, broadcast::Receiver<Arc<str>>) {
        let latest = self.latest.lock().unwrap();
        (latest.1.clone(), self.sender.subscribe())
    }

    fn publish(&self, snapshot: Snapshot) {
        let json: Arc<str> = serde_json::to_string(&snapshot).expect("snapshots serialize").into();
        let mut latest = self.latest.lock().unwrap();
        *latest = (Arc::new(snapshot), json.clone());
        // no subscribers is fine
        let _ = self.sender.send(json);
    }
}

pub fn snapshot_of(
    machine: &Machine,
    mode: ExecutionMode,
    seq: u64,
    highlights: &HighlightSet,
    recent: &VecDeque<OutputEvent>,
) -> Snapshot {
    Snapshot {
        seq,
        program_version: machine.rules().program_version(),
        machine_status: machine.status().name(),
        error: machine.status().error().map(ToString::to_string),
        mode: mode.name(),
        pause_ms: match mode {
            ExecutionMode::SlowMotion { pause_ms } => Some(pause_ms),
            _ => None,
        },
        elapsed_ms: machine.elapsed_ms(),
        element_count: machine.element_count(),
        rendered_term: machine.render(Some(RENDER_DEPTH)),
        term_size: machine.term_size(),
        latest_highlights: highlights.clone(),
        recent_events: recent.iter().copied().collect(),
    }
}

/// Publishes a snapshot after every element and every other change.
pub struct Publisher {
    feed: Arc<Feed>,
    seq: u64,
    highlights: HighlightSet,
    recent: VecDeque<OutputEvent>,
}

impl Publisher {
    pub fn new(feed: Arc<Feed>) -> Publisher {
        let seq = feed.latest().seq;
        Publisher {
            feed,
            seq,
            highlights: HighlightSet::default(),
            recent: VecDeque::with_capacity(RECENT_EVENTS),
        }
    }

    fn publish(&mut self, machine: &Machine, mode: ExecutionMode) {
        self.seq += 1;
        let snapshot = snapshot_of(machine, mode, self.seq, &self.highlights, &self.recent);
        self.feed.publish(snapshot);
    }
}

impl Observer for Publisher {
    fn element(&mut self, machine: &Machine, mode: ExecutionMode, event: &OutputEvent) {
        if self.recent.len() == RECENT_EVENTS {
            self.recent.pop_front();
        }
        self.recent.push_back(*event);
        self.publish(machine, mode);
    }

    fn highlights(&mut self, set: &HighlightSet) {
        self.highlights = set.clone();
    }

    fn changed(&mut self, machine: &Machine, mode: ExecutionMode) {
        self.publish(machine, mode);
    }
}
