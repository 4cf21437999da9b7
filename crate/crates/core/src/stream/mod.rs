//! Turning the program's list into timed MIDI output.

mod log;
mod machine;
mod midi;
mod player;

pub use log::{format_event, write_event_log, LogSink, NullSink, OutputEvent, Sink};
pub use machine::{Advance, Machine, Status};
pub use midi::{classify_element, MidiKind, MidiMessage, Payload};
pub use player::{Control, ExecutionMode, NoObserver, Observer, Outcome, Player, RunConfig};
