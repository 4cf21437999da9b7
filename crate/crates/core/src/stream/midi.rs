use serde::{Deserialize, Serialize};

use crate::engine::{EngineError, Term};
use crate::syntax::render_term;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "camelCase")]
pub enum MidiKind {
    NoteOn { pitch: u8, velocity: u8 },
    NoteOff { pitch: u8, velocity: u8 },
    ProgramChange { program: u8 },
    Controller { number: u8, value: u8 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MidiMessage {
    pub channel: u8,
    #[serde(flatten)]
    pub kind: MidiKind,
}

impl MidiMessage {
    /// The raw status and data bytes as sent on a MIDI wire.
    pub fn to_bytes(&self) -> Vec<u8> {
        let ch = self.channel & 0x0f;
        match self.kind {
            MidiKind::NoteOn { pitch, velocity } => vec![0x90 | ch, pitch, velocity],
            MidiKind::NoteOff { pitch, velocity } => vec![0x80 | ch, pitch, velocity],
            MidiKind::ProgramChange { program } => vec![0xc0 | ch, program],
            MidiKind::Controller { number, value } => vec![0xb0 | ch, number, value],
        }
    }
}

/// A list element after classification.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Payload {
    Wait(u64),
    Emit(MidiMessage),
}

/// Recognizes `Wait n` and `Event m`, where `m` is `On p v`, `Off p v`,
/// `PgmChange p` or `Controller n v`, optionally wrapped as `Channel c m`.
pub fn classify_element(term: &Term) -> Result<Payload, EngineError> {
    classify(term).ok_or_else(|| EngineError::MalformedElement(render_term(term, Some(8))))
}

fn classify(term: &Term) -> Option<Payload> {
    match term.as_constructor()? {
        ("Wait", [Term::Int(ms)]) => u64::try_from(*ms).ok().map(Payload::Wait),
        ("Event", [message]) => message_of(message, 0, true).map(Payload::Emit),
        _ => None,
    }
}

fn midi_value(term: &Term, max: i64) -> Option<u8> {
    match term {
        Term::Int(n) if (0..=max).contains(n) => Some(*n as u8),
        _ => None,
    }
}

fn message_of(term: &Term, channel: u8, may_wrap: bool) -> Option<MidiMessage> {
    let byte = |t: &Term| midi_value(t, 127);
    let kind = match term.as_constructor()? {
        ("Channel", [c, inner]) if may_wrap => {
            return message_of(inner, midi_value(c, 15)?, false);
        }
        ("On", [p, v]) => MidiKind::NoteOn {
            pitch: byte(p)?,
            velocity: byte(v)?,
        },
        ("Off", [p, v]) => MidiKind::NoteOff {
            pitch: byte(p)?,
            velocity: byte(v)?,
        },
        ("PgmChange", [p]) => MidiKind::ProgramChange { program: byte(p)? },
        ("Controller", [n, v]) => MidiKind::Controller {
            number: byte(n)?,
            value: byte(v)?,
        },
        _ => return None,
    };
    Some(MidiMessage { channel, kind })
}
