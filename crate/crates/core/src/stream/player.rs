//! The run loop: advances the machine, paces the output and obeys
//! control commands.

use std::sync::mpsc::{Receiver, RecvTimeoutError, TryRecvError};
use std::sync::Arc;
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::engine::{EngineError, RuleSet};
use crate::highlight::{HighlightSet, HighlightTracker};

use super::log::{OutputEvent, Sink};
use super::machine::{Advance, Machine, Status};
use super::midi::Payload;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "camelCase")]
pub enum ExecutionMode {
    /// Waits take as long as they say.
    Realtime,
    /// Waits are ignored; every element is followed by a fixed pause.
    #[serde(rename = "slow")]
    SlowMotion {
        #[serde(rename = "pauseMs")]
        pause_ms: u64,
    },
    /// One element per step command.
    #[serde(rename = "step")]
    SingleStep,
}

impl ExecutionMode {
    pub fn name(&self) -> &'static str {
        match self {
            ExecutionMode::Realtime => "realtime",
            ExecutionMode::SlowMotion { .. } => "slow",
            ExecutionMode::SingleStep => "step",
        }
    }
}

#[derive(Debug, Clone)]
pub enum Control {
    SetMode(ExecutionMode),
    Pause,
    Resume,
    Step,
    Restart,
    Stop,
    Swap(Arc<RuleSet>),
}

/// Callbacks from the run loop, all made on the loop's thread.
pub trait Observer {
    fn element(&mut self, _machine: &Machine, _mode: ExecutionMode, _event: &OutputEvent) {}
    fn highlights(&mut self, _set: &HighlightSet) {}
    /// Status, mode or rules changed without a new element.
    fn changed(&mut self, _machine: &Machine, _mode: ExecutionMode) {}
}

pub struct NoObserver;

impl Observer for NoObserver {}

#[derive(Debug, Clone, Copy, Default)]
pub struct RunConfig {
    /// Return once the machine has produced this many elements in total.
    pub max_elements: Option<u64>,
    /// Return on an engine error instead of waiting for a fix.
    pub exit_on_error: bool,
    /// Return when the list ends instead of waiting for a restart.
    pub exit_on_finish: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Outcome {
    Finished,
    ElementCap,
    Errored(EngineError),
    Stopped,
    /// Every sender of control commands is gone while the loop had to wait
    /// for one.
    Disconnected,
    SinkFailed(String),
}

pub struct Player<'a> {
    machine: Machine,
    mode: ExecutionMode,
    inbox: Receiver<Control>,
    sink: &'a mut dyn Sink,
    observer: &'a mut dyn Observer,
    config: RunConfig,
    highlights: HighlightTracker,
    pending_steps: u64,
    /// Wall-clock instant matching a logical time, for pacing waits.
    clock: Option<(Instant, u64)>,
}

enum Flow {
    Continue,
    Interrupt,
    Exit(Outcome),
}

impl<'a> Player<'a> {
    pub fn new(
        machine: Machine,
        mode: ExecutionMode,
        inbox: Receiver<Control>,
        sink: &'a mut dyn Sink,
        observer: &'a mut dyn Observer,
        config: RunConfig,
    ) -> Self {
        Player {
            machine,
            mode,
            inbox,
            sink,
            observer,
            config,
            highlights: HighlightTracker::new(),
            pending_steps: 0,
            clock: None,
        }
    }

    /// Runs until an exit condition. Returns the machine as it was left.
    pub fn run(mut self) -> (Machine, Outcome) {
        let outcome = self.run_loop();
        (self.machine, outcome)
    }

    fn run_loop(&mut self) -> Outcome {
        self.observer.changed(&self.machine, self.mode);
        loop {
            loop {
                match self.inbox.try_recv() {
                    Ok(control) => {
                        if let Flow::Exit(outcome) = self.apply(control) {
                            return outcome;
                        }
                    }
                    Err(TryRecvError::Empty | TryRecvError::Disconnected) => break,
                }
            }
            if let Some(max) = self.config.max_elements {
                if self.machine.element_count() >= max {
                    return Outcome::ElementCap;
                }
            }
            let idle = match self.machine.status() {
                Status::Running => self.mode == ExecutionMode::SingleStep && self.pending_steps == 0,
                Status::Finished if self.config.exit_on_finish => return Outcome::Finished,
                Status::Errored(e) if self.config.exit_on_error => return Outcome::Errored(e.clone()),
                _ => true,
            };
            if idle {
                match self.inbox.recv() {
                    Ok(control) => {
                        if let Flow::Exit(outcome) = self.apply(control) {
                            return outcome;
                        }
                    }
                    Err(_) => return Outcome::Disconnected,
                }
                continue;
            }
            if self.mode == ExecutionMode::SingleStep {
                self.pending_steps -= 1;
            }
            if let Flow::Exit(outcome) = self.advance() {
                return outcome;
            }
        }
    }

    fn advance(&mut self) -> Flow {
        let (advance, steps) = match self.machine.advance() {
            Ok(result) => result,
            Err(_) => {
                self.clock = None;
                self.observer.changed(&self.machine, self.mode);
                return Flow::Continue;
            }
        };
        self.highlights.record_steps(&steps);
        let event = match advance {
            Advance::Finished => {
                self.observer.changed(&self.machine, self.mode);
                return Flow::Continue;
            }
            Advance::Event(event) => event,
        };
        if let Err(err) = self.sink.deliver(&event) {
            return Flow::Exit(Outcome::SinkFailed(err.to_string()));
        }
        if let Payload::Wait(_) = event.payload {
            let set = self.highlights.flush_on_wait(self.machine.rules());
            self.observer.highlights(&set);
        }
        self.observer.element(&self.machine, self.mode, &event);
        match (self.mode, event.payload) {
            (ExecutionMode::Realtime, Payload::Wait(ms)) => {
                let (anchor, base) = *self
                    .clock
                    .get_or_insert_with(|| (Instant::now(), event.at_ms - ms));
                let target = anchor + Duration::from_millis(event.at_ms - base);
                self.sleep_until(target)
            }
            (ExecutionMode::SlowMotion { pause_ms }, _) if pause_ms > 0 => {
                self.sleep_until(Instant::now() + Duration::from_millis(pause_ms))
            }
            _ => Flow::Continue,
        }
    }

    /// Sleeps while still taking commands. Rule swaps do not cut the sleep
    /// short; anything that changes what should be playing does.
    fn sleep_until(&mut self, target: Instant) -> Flow {
        loop {
            let now = Instant::now();
            if now >= target {
                return Flow::Continue;
            }
            match self.inbox.recv_timeout(target - now) {
                Ok(control) => {
                    let swap = matches!(control, Control::Swap(_));
                    match self.apply(control) {
                        Flow::Exit(outcome) => return Flow::Exit(outcome),
                        _ if swap => {}
                        _ => return Flow::Interrupt,
                    }
                }
                Err(RecvTimeoutError::Timeout) => return Flow::Continue,
                Err(RecvTimeoutError::Disconnected) => {
                    thread::sleep(target.saturating_duration_since(Instant::now()));
                    return Flow::Continue;
                }
            }
        }
    }

    fn apply(&mut self, control: Control) -> Flow {
        match control {
            Control::SetMode(mode) => {
                self.mode = mode;
                self.pending_steps = 0;
                self.clock = None;
            }
            Control::Pause => {
                if self.machine.status() == &Status::Running {
                    self.machine.set_status(Status::Paused);
                }
                self.clock = None;
            }
            Control::Resume => {
                if matches!(self.machine.status(), Status::Paused | Status::Errored(_)) {
                    self.machine.set_status(Status::Running);
                }
                self.clock = None;
            }
            Control::Step => {
                if self.mode == ExecutionMode::SingleStep {
                    self.pending_steps += 1;
                }
                return Flow::Continue;
            }
            Control::Restart => {
                self.machine.restart();
                self.pending_steps = 0;
                self.clock = None;
            }
            Control::Stop => {
                if self.machine.status() == &Status::Running {
                    self.machine.set_status(Status::Paused);
                }
                self.observer.changed(&self.machine, self.mode);
                return Flow::Exit(Outcome::Stopped);
            }
            Control::Swap(rules) => self.machine.set_rules(rules),
        }
        self.observer.changed(&self.machine, self.mode);
        Flow::Continue
    }
}

#[cfg(test)]
mod tests {
    use std::sync::mpsc;

    use super::*;
    use crate::engine::Budget;
    use crate::store::load_program;

    fn machine(text: &str) -> Machine {
        let state = load_program(&[("Main".into(), format!("module Main where\n{text}"))]).unwrap();
        Machine::new(state.rules().clone(), Budget::default())
    }

    #[test]
    fn slow_motion_without_pause_runs_to_the_end() {
        let (_tx, rx) = mpsc::channel();
        let mut events = Vec::new();
        let config = RunConfig {
            exit_on_finish: true,
            ..RunConfig::default()
        };
        let m = machine("main = [Wait 10, Event (On 60 64), Wait 5] ;\n");
        let mode = ExecutionMode::SlowMotion { pause_ms: 0 };
        let (m, outcome) = Player::new(m, mode, rx, &mut events, &mut NoObserver, config).run();
        assert_eq!(outcome, Outcome::Finished);
        assert_eq!(events.len(), 3);
        assert_eq!(m.elapsed_ms(), 15);
    }

    #[test]
    fn realtime_honours_waits() {
        let (_tx, rx) = mpsc::channel();
        let mut events = Vec::new();
        let config = RunConfig {
            exit_on_finish: true,
            ..RunConfig::default()
        };
        let m = machine("main = [Wait 100, Event (On 60 64)] ;\n");
        let start = Instant::now();
        let (_, outcome) = Player::new(m, ExecutionMode::Realtime, rx, &mut events, &mut NoObserver, config).run();
        assert_eq!(outcome, Outcome::Finished);
        assert!(start.elapsed() >= Duration::from_millis(100));
        assert!(start.elapsed() < Duration::from_millis(130 + 500));
    }

    #[test]
    fn single_step_advances_once_per_command() {
        let (tx, rx) = mpsc::channel();
        for _ in 0..3 {
            tx.send(Control::Step).unwrap();
        }
        drop(tx);
        let mut events = Vec::new();
        let m = machine("main = Wait 1 : main ;\n");
        let (m, outcome) =
            Player::new(m, ExecutionMode::SingleStep, rx, &mut events, &mut NoObserver, RunConfig::default()).run();
        assert_eq!(outcome, Outcome::Disconnected);
        assert_eq!(m.element_count(), 3);
    }

    #[test]
    fn stop_keeps_the_term() {
        let (tx, rx) = mpsc::channel();
        tx.send(Control::Stop).unwrap();
        let mut events = Vec::new();
        let m = machine("main = Wait 1 : main ;\n");
        let (m, outcome) =
            Player::new(m, ExecutionMode::Realtime, rx, &mut events, &mut NoObserver, RunConfig::default()).run();
        assert_eq!(outcome, Outcome::Stopped);
        assert_eq!(m.status(), &Status::Paused);
        assert!(events.is_empty());
    }

    #[test]
    fn errors_wait_for_a_fix() {
        let (tx, rx) = mpsc::channel();
        let state = load_program(&[("Main".into(), "module Main where\nmain = [Wait 1, oops] ;\n".into())]).unwrap();
        let mut fixed = state.clone();
        fixed
            .swap_module("Main", "module Main where\nmain = [Wait 1, oops] ;\noops = Wait 2 ;\n")
            .unwrap();
        tx.send(Control::SetMode(ExecutionMode::SlowMotion { pause_ms: 0 })).unwrap();
        let handle = thread::spawn(move || {
            let mut events = Vec::new();
            let config = RunConfig {
                exit_on_finish: true,
                ..RunConfig::default()
            };
            let m = Machine::new(state.rules().clone(), Budget::default());
            let out = Player::new(m, ExecutionMode::SingleStep, rx, &mut events, &mut NoObserver, config).run();
            (out, events)
        });
        thread::sleep(Duration::from_millis(50));
        tx.send(Control::Swap(fixed.rules().clone())).unwrap();
        tx.send(Control::Resume).unwrap();
        let ((m, outcome), events) = handle.join().unwrap();
        assert_eq!(outcome, Outcome::Finished);
        assert_eq!(events.len(), 2);
        assert_eq!(m.elapsed_ms(), 3);
    }
}
