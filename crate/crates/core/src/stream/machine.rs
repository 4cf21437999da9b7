use std::sync::Arc;

use serde::{Serialize, Serializer};

use crate::engine::symbol::{CONS, NIL};
use crate::engine::{Budget, EngineError, Heap, Node, NodeId, Reducer, RuleSet, StepRecord, Term};
use crate::syntax::render_term;

use super::log::OutputEvent;
use super::midi::{classify_element, Payload};

#[derive(Debug, Clone, PartialEq)]
pub enum Status {
    Running,
    Paused,
    Errored(EngineError),
    Finished,
}

impl Status {
    pub fn name(&self) -> &'static str {
        match self {
            Status::Running => "running",
            Status::Paused => "paused",
            Status::Errored(_) => "errored",
            Status::Finished => "finished",
        }
    }

    pub fn error(&self) -> Option<&EngineError> {
        match self {
            Status::Errored(e) => Some(e),
            _ => None,
        }
    }
}

impl Serialize for Status {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Advance {
    Event(OutputEvent),
    Finished,
}

/// The interpreter state: the term still to be played and the rules it is
/// reduced with.
#[derive(Debug, Clone)]
pub struct Machine {
    heap: Heap,
    root: NodeId,
    rules: Arc<RuleSet>,
    budget: Budget,
    elapsed_ms: u64,
    element_count: u64,
    status: Status,
    next_step: u64,
    tracing: bool,
}

impl Machine {
    /// A machine about to play `main`.
    pub fn new(rules: Arc<RuleSet>, budget: Budget) -> Machine {
        Machine::with_term(Term::global("main"), rules, budget)
    }

    pub fn with_term(term: Term, rules: Arc<RuleSet>, budget: Budget) -> Machine {
        let mut heap = Heap::new();
        let root = heap.import(&term);
        Machine {
            heap,
            root,
            rules,
            budget,
            elapsed_ms: 0,
            element_count: 0,
            status: Status::Running,
            next_step: 0,
            tracing: true,
        }
    }

    /// Stops recording reduction steps, which saves memory on long
    /// computations nobody watches.
    pub fn without_trace(mut self) -> Machine {
        self.tracing = false;
        self
    }

    /// A copy of the term still to be played.
    pub fn term(&self) -> Term {
        self.heap.export(self.root)
    }

    /// Node count of the term still to be played.
    pub fn term_size(&self) -> usize {
        self.heap.size(self.root)
    }

    pub fn rules(&self) -> &Arc<RuleSet> {
        &self.rules
    }

    pub fn elapsed_ms(&self) -> u64 {
        self.elapsed_ms
    }

    pub fn element_count(&self) -> u64 {
        self.element_count
    }

    pub fn status(&self) -> &Status {
        &self.status
    }

    pub fn set_status(&mut self, status: Status) {
        self.status = status;
    }

    pub fn render(&self, max_depth: Option<usize>) -> String {
        let term = self.heap.export_limited(self.root, max_depth.unwrap_or(usize::MAX));
        render_term(&term, None)
    }

    /// Installs new rules. The term is left as it is; its identifiers pick
    /// up the new definitions when they are next reduced.
    pub fn set_rules(&mut self, rules: Arc<RuleSet>) {
        self.rules = rules;
    }

    /// Starts over from `main`. Time and element count keep running.
    pub fn restart(&mut self) {
        self.heap.free_tree(self.root);
        self.root = self.heap.import(&Term::global("main"));
        self.status = Status::Running;
    }

    /// Takes the next element off the front of the list. On error the term
    /// is restored to what it was before the attempt.
    pub fn advance(&mut self) -> Result<(Advance, Vec<StepRecord>), EngineError> {
        if self.status == Status::Finished {
            return Ok((Advance::Finished, Vec::new()));
        }
        let live = self.heap.live();
        self.heap.begin();
        let mut reducer = Reducer::new(&self.rules, self.budget).starting_at(self.next_step);
        if !self.tracing {
            reducer = reducer.untraced();
        }
        let result = step(&mut reducer, &mut self.heap, self.root);
        self.next_step = reducer.next_index();
        let steps = reducer.into_trace();
        match result {
            Ok(_) => self.heap.commit(),
            Err(_) => self.heap.rollback(live),
        }
        match result {
            Ok(None) => {
                self.status = Status::Finished;
                Ok((Advance::Finished, steps))
            }
            Ok(Some((payload, tail))) => {
                self.root = tail;
                if let Payload::Wait(ms) = payload {
                    self.elapsed_ms += ms;
                }
                self.element_count += 1;
                let event = OutputEvent {
                    at_ms: self.elapsed_ms,
                    payload,
                };
                Ok((Advance::Event(event), steps))
            }
            Err(err) => {
                self.status = Status::Errored(err.clone());
                Err(err)
            }
        }
    }
}

/// Reduces the list at `root` far enough to take off its first element.
/// Returns the element and the tail, which replaces the list.
fn step(
    reducer: &mut Reducer<'_>,
    heap: &mut Heap,
    root: NodeId,
) -> Result<Option<(Payload, NodeId)>, EngineError> {
    reducer.whnf(heap, root)?;
    let mut fields = Vec::with_capacity(2);
    let head = heap.spine(root, &mut fields);
    match (heap.get(head), fields.len()) {
        (Node::Con(NIL), 0) => return Ok(None),
        (Node::Con(CONS), 2) => {}
        _ => {
            let shown = render_term(&heap.export_limited(root, 6), None);
            return Err(EngineError::NotAList(shown));
        }
    }
    let (element, tail) = (fields[0], fields[1]);
    reducer.normal_form(heap, element)?;
    let payload = classify_element(&heap.export(element))?;
    let Node::App(inner, _) = heap.get(root) else {
        unreachable!("a cons cell is an application")
    };
    heap.free(root);
    heap.free(inner);
    heap.free(head);
    heap.free_tree(element);
    Ok(Some((payload, tail)))
}
