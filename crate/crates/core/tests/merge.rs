//! `=:=` against a timeline model of parallel composition.

use std::collections::VecDeque;
use std::sync::Arc;

use lazyseq_core::engine::{compile_expression, Budget, RuleSet};
use lazyseq_core::store::load_program;
use lazyseq_core::stream::{Advance, Machine, MidiKind, Payload};
use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestRng, TestRunner};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Item {
    Wait(u64),
    /// A note-on on the given channel; pitches identify the element.
    Note(u8, u8),
}

fn source(items: &[Item]) -> String {
    let parts: Vec<String> = items
        .iter()
        .map(|item| match *item {
            Item::Wait(ms) => format!("Wait {ms}"),
            Item::Note(0, pitch) => format!("Event (On {pitch} 64)"),
            Item::Note(ch, pitch) => format!("Event (Channel {ch} (On {pitch} 64))"),
        })
        .collect();
    format!("[{}]", parts.join(", "))
}

fn play(rules: &Arc<RuleSet>, text: &str) -> Vec<Item> {
    let term = compile_expression(text).unwrap();
    let mut machine = Machine::with_term(term, rules.clone(), Budget::default()).without_trace();
    let mut out = Vec::new();
    loop {
        match machine.advance().unwrap().0 {
            Advance::Finished => return out,
            Advance::Event(event) => out.push(match event.payload {
                Payload::Wait(ms) => Item::Wait(ms),
                Payload::Emit(msg) => match msg.kind {
                    MidiKind::NoteOn { pitch, .. } => Item::Note(msg.channel, pitch),
                    other => panic!("unexpected {other:?}"),
                },
            }),
        }
    }
}

/// Events at the same instant come left first; a wait lasts until the
/// nearer of the two next boundaries.
fn timeline_merge(left: &[Item], right: &[Item]) -> Vec<Item> {
    let mut queues = [VecDeque::from(left.to_vec()), VecDeque::from(right.to_vec())];
    let mut out = Vec::new();
    loop {
        for queue in &mut queues {
            while let Some(&Item::Note(..)) = queue.front() {
                out.push(queue.pop_front().unwrap());
            }
        }
        let step = queues
            .iter()
            .filter_map(|q| match q.front() {
                Some(&Item::Wait(ms)) => Some(ms),
                _ => None,
            })
            .min();
        let Some(step) = step else { return out };
        out.push(Item::Wait(step));
        for queue in &mut queues {
            if let Some(Item::Wait(ms)) = queue.front_mut() {
                *ms -= step;
                if *ms == 0 {
                    queue.pop_front();
                }
            }
        }
    }
}

fn wait_sum(items: &[Item]) -> u64 {
    items
        .iter()
        .map(|i| match i {
            Item::Wait(ms) => *ms,
            _ => 0,
        })
        .sum()
}

fn notes_on(items: &[Item], channel: u8) -> Vec<Item> {
    items
        .iter()
        .copied()
        .filter(|i| matches!(i, Item::Note(c, _) if *c == channel))
        .collect()
}

fn track(channel: u8) -> impl Strategy<Value = Vec<Item>> {
    prop::collection::vec(
        prop_oneof![
            (1u64..=50).prop_map(Item::Wait),
            (0u8..=127).prop_map(move |p| Item::Note(channel, p)),
        ],
        0..=12,
    )
}

#[test]
fn oracle_examples() {
    use Item::*;
    assert_eq!(
        timeline_merge(&[Wait(2), Note(0, 1), Wait(1)], &[Note(1, 2), Wait(2), Note(1, 3)]),
        [Note(1, 2), Wait(2), Note(0, 1), Note(1, 3), Wait(1)]
    );
    assert_eq!(timeline_merge(&[Wait(5)], &[Wait(3), Note(1, 9)]), [Wait(3), Note(1, 9), Wait(2)]);
}

#[test]
fn merge_matches_timeline_model() {
    let rules = load_program(&[]).unwrap().rules().clone();
    let config = Config {
        cases: 100,
        failure_persistence: None,
        ..Config::default()
    };
    let rng = TestRng::from_seed(RngAlgorithm::ChaCha, &[7; 32]);
    let mut runner = TestRunner::new_with_rng(config, rng);
    runner
        .run(&(track(0), track(1)), |(left, right)| {
            let text = format!("{} =:= {}", source(&left), source(&right));
            let merged = play(&rules, &text);
            prop_assert_eq!(&merged, &timeline_merge(&left, &right));
            prop_assert_eq!(wait_sum(&merged), wait_sum(&left).max(wait_sum(&right)));
            prop_assert_eq!(notes_on(&merged, 0), notes_on(&left, 0));
            prop_assert_eq!(notes_on(&merged, 1), notes_on(&right, 1));
            Ok(())
        })
        .unwrap();
}
