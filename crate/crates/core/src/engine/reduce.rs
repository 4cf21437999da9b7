//! Normal-order reduction of terms stored in a [`Heap`].
//!
//! The reducer rewrites nodes in place. Equations are tried top to bottom
//! and their patterns left to right; a constructor or literal pattern
//! forces only the argument it inspects, and only to weak head normal
//! form. Each rule firing, whether an equation, a primitive or a lambda,
//! costs one step of the budget and appends a [`StepRecord`].

use std::sync::Arc;

use thiserror::Error;

use crate::syntax::{render_term, SourceRange};

use super::builtin::{Builtin, BuiltinError, Value};
use super::heap::{Heap, Node, NodeId};
use super::rules::{Callee, Function, RuleSet};
use super::symbol::{LambdaId, LambdaInfo, OriginId, Pat, Sym};
use super::term::{Name, Origin, Term};

/// Steps allowed for one normalization request.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Budget {
    pub max_steps: u64,
}

impl Budget {
    pub const DEFAULT_STEPS: u64 = 100_000;

    pub fn new(max_steps: u64) -> Budget {
        assert!(max_steps > 0, "budget must allow at least one step");
        Budget { max_steps }
    }
}

impl Default for Budget {
    fn default() -> Self {
        Budget::new(Budget::DEFAULT_STEPS)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StepRecord {
    pub fired_rule: Name,
    /// Range of the reduced identifier occurrence; `None` for terms that
    /// did not come from program text, such as the initial `main`.
    pub redex_origin: Option<Arc<Origin>>,
    pub step_index: u64,
}

fn range_of(origin: OriginId) -> Option<SourceRange> {
    origin.get().map(|o| o.range.clone())
}

fn located(range: &Option<SourceRange>) -> String {
    range.as_ref().map(|r| format!(" at {r}")).unwrap_or_default()
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EngineError {
    #[error("UnboundIdentifier: `{name}` is not defined{}", located(.origin))]
    UnboundIdentifier {
        name: String,
        origin: Option<SourceRange>,
    },
    #[error("NoMatchingEquation: no equation of `{name}` matches `{redex}`{}", located(.origin))]
    NoMatchingEquation {
        name: String,
        redex: String,
        origin: Option<SourceRange>,
    },
    #[error("BudgetExhausted: reduction exceeded the budget of {limit} steps")]
    BudgetExhausted { limit: u64 },
    #[error("BuiltinError: {error} in `{redex}`{}", located(.origin))]
    Builtin {
        error: BuiltinError,
        redex: String,
        origin: Option<SourceRange>,
    },
    #[error("TypeError: {message} in `{redex}`{}", located(.origin))]
    Type {
        message: String,
        redex: String,
        origin: Option<SourceRange>,
    },
    #[error("DepthExceeded: term nesting exceeded {limit} levels")]
    DepthExceeded { limit: usize },
    #[error("NotAList: the program did not reduce to a list but to `{0}`")]
    NotAList(String),
    #[error("MalformedElement: `{0}` is neither a wait nor a MIDI event")]
    MalformedElement(String),
}

const ERROR_DEPTH: usize = 6;
const MAX_DEPTH: usize = 200_000;
const RED_ZONE: usize = 64 * 1024;
const STACK_CHUNK: usize = 4 * 1024 * 1024;

pub struct Reducer<'r> {
    rules: &'r RuleSet,
    limit: u64,
    used: u64,
    next_index: u64,
    trace: Option<Vec<StepRecord>>,
    depth: usize,
    /// Application nodes of the spines being reduced, outermost first.
    spine: Vec<NodeId>,
    /// Arguments of the redexes being matched.
    args: Vec<NodeId>,
    /// Values bound by the patterns being matched, in slot order.
    binds: Vec<NodeId>,
    remaining: Vec<u32>,
    lambdas: Vec<Option<Arc<LambdaInfo>>>,
    occurrences: Vec<(u32, NodeId)>,
}

/// Where a redex sits on the spine stack.
#[derive(Clone, Copy)]
struct Redex {
    root: NodeId,
    head: NodeId,
    /// Index in `spine` of the outermost application node.
    base: usize,
    applied: usize,
}

impl Redex {
    /// The node that is overwritten when `arity` arguments are consumed.
    fn target(&self, spine: &[NodeId], arity: usize) -> NodeId {
        if arity == 0 {
            self.head
        } else {
            spine[self.base + self.applied - arity]
        }
    }
}

impl<'r> Reducer<'r> {
    pub fn new(rules: &'r RuleSet, budget: Budget) -> Self {
        Reducer {
            rules,
            limit: budget.max_steps,
            used: 0,
            next_index: 0,
            trace: Some(Vec::new()),
            depth: 0,
            spine: Vec::new(),
            args: Vec::new(),
            binds: Vec::new(),
            remaining: Vec::new(),
            lambdas: Vec::new(),
            occurrences: Vec::new(),
        }
    }

    /// Numbers steps from `index` on.
    pub fn starting_at(mut self, index: u64) -> Self {
        self.next_index = index;
        self
    }

    /// Skips recording steps; for long computations nobody highlights.
    pub fn untraced(mut self) -> Self {
        self.trace = None;
        self
    }

    pub fn steps_used(&self) -> u64 {
        self.used
    }

    pub fn next_index(&self) -> u64 {
        self.next_index
    }

    pub fn into_trace(self) -> Vec<StepRecord> {
        self.trace.unwrap_or_default()
    }

    /// Reduces the term at `id` until its root is a constructor, literal,
    /// lambda or under-applied function.
    pub fn whnf(&mut self, heap: &mut Heap, id: NodeId) -> Result<(), EngineError> {
        self.nested(|this| {
            while this.rewrite(heap, id)? {}
            Ok(())
        })
    }

    /// Reduces to weak head normal form, then the fields of constructors
    /// recursively.
    pub fn normal_form(&mut self, heap: &mut Heap, id: NodeId) -> Result<(), EngineError> {
        self.nested(|this| {
            let mut current = id;
            loop {
                this.whnf(heap, current)?;
                let base = this.args.len();
                let head = heap.spine(current, &mut this.args);
                let count = this.args.len() - base;
                if !matches!(heap.get(head), Node::Con(_)) || count == 0 {
                    this.args.truncate(base);
                    return Ok(());
                }
                for i in 0..count - 1 {
                    let field = this.args[base + i];
                    this.normal_form(heap, field)?;
                }
                // the last field is usually the tail of a list
                current = this.args[base + count - 1];
                this.args.truncate(base);
            }
        })
    }

    fn nested(
        &mut self,
        f: impl FnOnce(&mut Self) -> Result<(), EngineError>,
    ) -> Result<(), EngineError> {
        if self.depth >= MAX_DEPTH {
            return Err(EngineError::DepthExceeded { limit: MAX_DEPTH });
        }
        self.depth += 1;
        let result = stacker::maybe_grow(RED_ZONE, STACK_CHUNK, || f(self));
        self.depth -= 1;
        if self.depth == 0 && result.is_err() {
            self.spine.clear();
            self.args.clear();
            self.binds.clear();
        }
        result
    }

    fn charge(&mut self, rule: impl FnOnce() -> Name, origin: OriginId) -> Result<(), EngineError> {
        if self.used >= self.limit {
            return Err(EngineError::BudgetExhausted { limit: self.limit });
        }
        self.used += 1;
        if let Some(trace) = &mut self.trace {
            trace.push(StepRecord {
                fired_rule: rule(),
                redex_origin: origin.get(),
                step_index: self.next_index,
            });
        }
        self.next_index += 1;
        Ok(())
    }

    /// Performs one rewrite at the root of `root`. Returns false when it is
    /// already in weak head normal form.
    fn rewrite(&mut self, heap: &mut Heap, root: NodeId) -> Result<bool, EngineError> {
        let base = self.spine.len();
        let mut head = root;
        while let Node::App(fun, _) = heap.get(head) {
            self.spine.push(head);
            head = fun;
        }
        let redex = Redex {
            root,
            head,
            base,
            applied: self.spine.len() - base,
        };
        let result = self.rewrite_redex(heap, redex);
        self.spine.truncate(base);
        result
    }

    fn rewrite_redex(&mut self, heap: &mut Heap, redex: Redex) -> Result<bool, EngineError> {
        let applied = redex.applied;
        match heap.get(redex.head) {
            Node::Con(_) => Ok(false),
            Node::Int(_) | Node::Text(_) if applied == 0 => Ok(false),
            Node::Int(_) | Node::Text(_) => Err(EngineError::Type {
                message: "a literal cannot be applied to arguments".into(),
                redex: redex_text(heap, redex.root),
                origin: None,
            }),
            Node::Var(sym) => Err(EngineError::UnboundIdentifier {
                name: sym.name().to_string(),
                origin: None,
            }),
            Node::Lambda { info, body } => {
                let info = self.lambda(info);
                if applied < info.params.len() {
                    return Ok(false);
                }
                self.fire_lambda(heap, redex, &info, body)?;
                Ok(true)
            }
            Node::Closure(info) => {
                let info = self.lambda(info);
                if applied < info.params.len() {
                    return Ok(false);
                }
                self.fire_closure(heap, redex, &info)?;
                Ok(true)
            }
            Node::Global { sym, module, origin } => match self.rules.resolve_sym(sym, module) {
                None => Err(EngineError::UnboundIdentifier {
                    name: sym.name().to_string(),
                    origin: range_of(origin),
                }),
                Some(Callee::Builtin(b)) if applied < b.arity() => Ok(false),
                Some(Callee::Builtin(b)) => {
                    self.fire_builtin(heap, redex, b, origin)?;
                    Ok(true)
                }
                Some(Callee::Function(f)) if applied < f.arity => Ok(false),
                Some(Callee::Function(f)) => {
                    self.fire_equations(heap, redex, f, origin)?;
                    Ok(true)
                }
            },
            Node::App(..) | Node::Free(_) => unreachable!("spine heads are leaves"),
        }
    }

    fn lambda(&mut self, id: LambdaId) -> Arc<LambdaInfo> {
        let index = id.0 as usize;
        if index >= self.lambdas.len() {
            self.lambdas.resize(index + 1, None);
        }
        self.lambdas[index].get_or_insert_with(|| id.get()).clone()
    }

    /// Pushes the first `count` arguments of the redex onto `args`.
    fn collect_args(&mut self, heap: &Heap, redex: Redex, count: usize) -> usize {
        let base = self.args.len();
        for i in 0..count {
            let app = self.spine[redex.base + redex.applied - 1 - i];
            let Node::App(_, arg) = heap.get(app) else {
                unreachable!("spine entries are applications")
            };
            self.args.push(arg);
        }
        base
    }

    /// Frees the spine nodes below the target and the head.
    fn free_spine(&self, heap: &mut Heap, redex: Redex, arity: usize) {
        if arity == 0 {
            return;
        }
        let end = redex.base + redex.applied;
        for &app in &self.spine[end - arity + 1..end] {
            heap.free(app);
        }
        heap.free(redex.head);
    }

    fn fire_equations(
        &mut self,
        heap: &mut Heap,
        redex: Redex,
        function: &'r Function,
        origin: OriginId,
    ) -> Result<(), EngineError> {
        let arity = function.arity;
        let args = self.collect_args(heap, redex, arity);
        for equation in &function.equations {
            let binds = self.binds.len();
            if !self.match_args(heap, &equation.compiled, args)? {
                self.binds.truncate(binds);
                continue;
            }
            self.charge(|| function.name.clone(), origin)?;
            let target = redex.target(&self.spine, arity);
            let uses = equation.rhs.uses();
            equation
                .rhs
                .instantiate_into(heap, target, &self.binds[binds..], &mut self.remaining);
            for (i, pat) in equation.compiled.iter().enumerate() {
                free_matched(heap, pat, self.args[args + i], uses);
            }
            self.free_spine(heap, redex, arity);
            self.binds.truncate(binds);
            self.args.truncate(args);
            return Ok(());
        }
        Err(EngineError::NoMatchingEquation {
            name: function.name.to_string(),
            redex: redex_text(heap, redex.root),
            origin: range_of(origin),
        })
    }

    fn fire_builtin(
        &mut self,
        heap: &mut Heap,
        redex: Redex,
        builtin: Builtin,
        origin: OriginId,
    ) -> Result<(), EngineError> {
        let arity = builtin.arity();
        let args = self.collect_args(heap, redex, arity);
        let mut operands = [0i64; 2];
        for i in 0..arity {
            let arg = self.args[args + i];
            self.whnf(heap, arg)?;
            match heap.get(arg) {
                Node::Int(n) => operands[i] = n,
                _ => {
                    return Err(EngineError::Type {
                        message: format!("`{builtin}` expects integer operands"),
                        redex: redex_text(heap, redex.root),
                        origin: range_of(origin),
                    })
                }
            }
        }
        let value = builtin
            .eval(&operands[..arity])
            .map_err(|error| EngineError::Builtin {
                error,
                redex: redex_text(heap, redex.root),
                origin: range_of(origin),
            })?;
        self.charge(|| Arc::from(builtin.name()), origin)?;
        let target = redex.target(&self.spine, arity);
        heap.set(
            target,
            match value {
                Value::Int(n) => Node::Int(n),
                Value::Con(sym) => Node::Con(sym),
            },
        );
        for i in 0..arity {
            heap.free(self.args[args + i]);
        }
        self.free_spine(heap, redex, arity);
        self.args.truncate(args);
        Ok(())
    }

    fn fire_lambda(
        &mut self,
        heap: &mut Heap,
        redex: Redex,
        info: &LambdaInfo,
        body: NodeId,
    ) -> Result<(), EngineError> {
        let arity = info.params.len();
        let args = self.collect_args(heap, redex, arity);
        let binds = self.binds.len();
        if !self.match_args(heap, &info.params, args)? {
            return Err(EngineError::NoMatchingEquation {
                name: "\\".into(),
                redex: redex_text(heap, redex.root),
                origin: range_of(info.origin),
            });
        }
        self.charge(|| Arc::from("\\"), info.origin)?;
        self.find_vars(heap, body, &info.vars);
        let mut uses = vec![0u32; info.vars.len()];
        for &(slot, _) in &self.occurrences {
            uses[slot as usize] += 1;
        }
        let mut remaining = uses.clone();
        for &(slot, at) in &self.occurrences {
            let value = self.binds[binds + slot as usize];
            remaining[slot as usize] -= 1;
            if remaining[slot as usize] == 0 {
                heap.move_into(at, value);
            } else {
                heap.copy_into(at, value);
            }
        }
        self.occurrences.clear();
        let target = redex.target(&self.spine, arity);
        heap.move_into(target, body);
        for (i, pat) in info.params.iter().enumerate() {
            free_matched(heap, pat, self.args[args + i], &uses);
        }
        // the head is the lambda node; its body has moved into the target
        self.free_spine(heap, redex, arity);
        self.binds.truncate(binds);
        self.args.truncate(args);
        Ok(())
    }

    fn fire_closure(&mut self, heap: &mut Heap, redex: Redex, info: &LambdaInfo) -> Result<(), EngineError> {
        let arity = info.params.len();
        let args = self.collect_args(heap, redex, arity);
        let binds = self.binds.len();
        if !self.match_args(heap, &info.params, args)? {
            return Err(EngineError::NoMatchingEquation {
                name: "\\".into(),
                redex: redex_text(heap, redex.root),
                origin: range_of(info.origin),
            });
        }
        self.charge(|| Arc::from("\\"), info.origin)?;
        let body = info.body.as_ref().expect("closures have a body");
        let target = redex.target(&self.spine, arity);
        body.instantiate_into(heap, target, &self.binds[binds..], &mut self.remaining);
        for (i, pat) in info.params.iter().enumerate() {
            free_matched(heap, pat, self.args[args + i], body.uses());
        }
        self.free_spine(heap, redex, arity);
        self.binds.truncate(binds);
        self.args.truncate(args);
        Ok(())
    }

    /// Records in `occurrences` every free occurrence of `vars` in the body
    /// at `id`, as slot number and node.
    fn find_vars(&mut self, heap: &Heap, id: NodeId, vars: &[Sym]) {
        enum Work {
            Visit(NodeId),
            Unshadow(usize),
        }
        let mut shadow: Vec<Sym> = Vec::new();
        let mut work = vec![Work::Visit(id)];
        while let Some(item) = work.pop() {
            let id = match item {
                Work::Visit(id) => id,
                Work::Unshadow(len) => {
                    shadow.truncate(len);
                    continue;
                }
            };
            match heap.get(id) {
                Node::Var(sym) if !shadow.contains(&sym) => {
                    if let Some(slot) = vars.iter().position(|v| *v == sym) {
                        self.occurrences.push((slot as u32, id));
                    }
                }
                Node::App(fun, arg) => {
                    work.push(Work::Visit(arg));
                    work.push(Work::Visit(fun));
                }
                Node::Lambda { info, body } => {
                    let inner = self.lambda(info);
                    let rebinds: Vec<Sym> = vars.iter().copied().filter(|v| inner.vars.contains(v)).collect();
                    if rebinds.is_empty() {
                        work.push(Work::Visit(body));
                    } else {
                        work.push(Work::Unshadow(shadow.len()));
                        shadow.extend(rebinds);
                        work.push(Work::Visit(body));
                    }
                }
                _ => {}
            }
        }
    }

    /// Matches the arguments at `args` against `patterns`, left to right,
    /// pushing bound values onto `binds`.
    fn match_args(&mut self, heap: &mut Heap, patterns: &[Pat], args: usize) -> Result<bool, EngineError> {
        for (i, pattern) in patterns.iter().enumerate() {
            let arg = self.args[args + i];
            if !self.matches(heap, pattern, arg)? {
                return Ok(false);
            }
        }
        Ok(true)
    }

    fn matches(&mut self, heap: &mut Heap, pattern: &Pat, id: NodeId) -> Result<bool, EngineError> {
        match pattern {
            Pat::Slot(_) => {
                self.binds.push(id);
                Ok(true)
            }
            Pat::Wild => Ok(true),
            Pat::Int(n) => {
                self.whnf(heap, id)?;
                Ok(heap.get(id) == Node::Int(*n))
            }
            Pat::Con(name, subs) => {
                self.whnf(heap, id)?;
                let base = self.args.len();
                let head = heap.spine(id, &mut self.args);
                let fits = heap.get(head) == Node::Con(*name) && self.args.len() - base == subs.len();
                let ok = fits && self.match_args(heap, subs, base)?;
                self.args.truncate(base);
                Ok(ok)
            }
        }
    }
}

fn redex_text(heap: &Heap, id: NodeId) -> String {
    render_term(&heap.export_limited(id, ERROR_DEPTH), None)
}

/// Frees what matching `pattern` took apart, except for values the
/// right-hand side uses.
fn free_matched(heap: &mut Heap, pattern: &Pat, id: NodeId, uses: &[u32]) {
    match pattern {
        Pat::Slot(s) => {
            if uses[*s as usize] == 0 {
                heap.free_tree(id);
            }
        }
        Pat::Wild => heap.free_tree(id),
        Pat::Int(_) => heap.free(id),
        Pat::Con(_, subs) => {
            let mut current = id;
            for sub in subs.iter().rev() {
                let Node::App(fun, arg) = heap.get(current) else {
                    unreachable!("matched constructor has its fields")
                };
                free_matched(heap, sub, arg, uses);
                heap.free(current);
                current = fun;
            }
            heap.free(current);
        }
    }
}

/// Reduces a copy of `term` to weak head normal form.
pub fn whnf(
    term: &Term,
    rules: &RuleSet,
    budget: Budget,
) -> Result<(Term, Vec<StepRecord>), EngineError> {
    let mut heap = Heap::new();
    let id = heap.import(term);
    let mut reducer = Reducer::new(rules, budget);
    reducer.whnf(&mut heap, id)?;
    Ok((heap.export(id), reducer.into_trace()))
}

/// Reduces a copy of `term` to normal form.
pub fn normal_form(
    term: &Term,
    rules: &RuleSet,
    budget: Budget,
) -> Result<(Term, Vec<StepRecord>), EngineError> {
    let mut heap = Heap::new();
    let id = heap.import(term);
    let mut reducer = Reducer::new(rules, budget);
    reducer.normal_form(&mut heap, id)?;
    Ok((heap.export(id), reducer.into_trace()))
}
