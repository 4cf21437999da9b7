use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use super::midi::{MidiKind, Payload};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct OutputEvent {
    /// Logical time in milliseconds since the session started. For a wait
    /// this is the time after the wait.
    pub at_ms: u64,
    pub payload: Payload,
}

/// One event log line, without the newline.
pub fn format_event(event: &OutputEvent) -> String {
    let t = event.at_ms;
    match event.payload {
        Payload::Wait(ms) => format!("{t} wait {ms}"),
        Payload::Emit(msg) => {
            let ch = msg.channel;
            match msg.kind {
                MidiKind::NoteOn { pitch, velocity } => format!("{t} on {ch} {pitch} {velocity}"),
                MidiKind::NoteOff { pitch, velocity } => format!("{t} off {ch} {pitch} {velocity}"),
                MidiKind::ProgramChange { program } => format!("{t} pgm {ch} {program}"),
                MidiKind::Controller { number, value } => format!("{t} ctrl {ch} {number} {value}"),
            }
        }
    }
}

pub fn write_event_log<'a>(
    events: impl IntoIterator<Item = &'a OutputEvent>,
    out: &mut impl Write,
) -> io::Result<()> {
    for event in events {
        writeln!(out, "{}", format_event(event))?;
    }
    Ok(())
}

/// Receives events from the run loop.
pub trait Sink {
    fn deliver(&mut self, event: &OutputEvent) -> io::Result<()>;
}

impl Sink for Vec<OutputEvent> {
    fn deliver(&mut self, event: &OutputEvent) -> io::Result<()> {
        self.push(*event);
        Ok(())
    }
}

/// Writes the event log, flushing after every line.
pub struct LogSink<W: Write> {
    out: W,
}

impl<W: Write> LogSink<W> {
    pub fn new(out: W) -> Self {
        LogSink { out }
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}

impl<W: Write> Sink for LogSink<W> {
    fn deliver(&mut self, event: &OutputEvent) -> io::Result<()> {
        writeln!(self.out, "{}", format_event(event))?;
        self.out.flush()
    }
}

/// Discards events.
pub struct NullSink;

impl Sink for NullSink {
    fn deliver(&mut self, _event: &OutputEvent) -> io::Result<()> {
        Ok(())
    }
}
