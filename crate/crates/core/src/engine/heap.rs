//! Arena storage for live terms.
//!
//! Every node is a fixed-size record; applications are binary. A node id
//! names one position in the arena and the reducer overwrites nodes in
//! place. Nothing is ever referenced twice, so a subtree can be freed as
//! soon as it is dropped from the term.

use std::sync::Arc;

use super::subst::Template;
use super::symbol::{self, LambdaId, OriginId, Sym};
use super::term::{Lambda, Term};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(pub(crate) u32);

impl NodeId {
    fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Node {
    App(NodeId, NodeId),
    Global { sym: Sym, module: Sym, origin: OriginId },
    Var(Sym),
    Con(Sym),
    Int(i64),
    Text(Sym),
    Lambda { info: LambdaId, body: NodeId },
    /// A lambda whose body is a template; see [`LambdaInfo::body`].
    ///
    /// [`LambdaInfo::body`]: super::symbol::LambdaInfo::body
    Closure(LambdaId),
    Free(Option<NodeId>),
}

const _: () = assert!(std::mem::size_of::<Node>() == 16);

/// Undo information for one speculative computation.
#[derive(Debug, Clone)]
struct Journal {
    watermark: u32,
    free: Option<NodeId>,
    writes: Vec<(NodeId, Node)>,
}

#[derive(Debug, Clone, Default)]
pub struct Heap {
    nodes: Vec<Node>,
    free: Option<NodeId>,
    live: usize,
    journal: Option<Journal>,
    work: Vec<(NodeId, NodeId)>,
}

impl Heap {
    pub fn new() -> Heap {
        Heap::default()
    }

    /// Number of nodes in use.
    pub fn live(&self) -> usize {
        self.live
    }

    #[inline]
    pub fn get(&self, id: NodeId) -> Node {
        self.nodes[id.index()]
    }

    #[inline]
    pub fn set(&mut self, id: NodeId, node: Node) {
        if let Some(journal) = &mut self.journal {
            if id.0 < journal.watermark {
                journal.writes.push((id, self.nodes[id.index()]));
            }
        }
        self.nodes[id.index()] = node;
    }

    #[inline]
    pub fn alloc(&mut self, node: Node) -> NodeId {
        self.live += 1;
        match self.free {
            Some(id) => {
                let Node::Free(next) = self.nodes[id.index()] else {
                    unreachable!("free list holds only free nodes")
                };
                self.free = next;
                self.set(id, node);
                id
            }
            None => {
                let id = NodeId(u32::try_from(self.nodes.len()).expect("heap exhausted"));
                self.nodes.push(node);
                id
            }
        }
    }

    /// Releases one node; its children are untouched.
    #[inline]
    pub fn free(&mut self, id: NodeId) {
        self.live -= 1;
        let next = self.free;
        self.set(id, Node::Free(next));
        self.free = Some(id);
    }

    /// Releases a whole subtree.
    pub fn free_tree(&mut self, id: NodeId) {
        let mut stack = vec![id];
        while let Some(id) = stack.pop() {
            match self.get(id) {
                Node::App(f, a) => {
                    stack.push(f);
                    stack.push(a);
                }
                Node::Lambda { body, .. } => stack.push(body),
                _ => {}
            }
            self.free(id);
        }
    }

    /// A fresh copy of the subtree at `id`.
    pub fn copy_tree(&mut self, id: NodeId) -> NodeId {
        let dest = self.alloc(Node::Free(None));
        self.copy_into(dest, id);
        dest
    }

    /// Overwrites `dest` with a copy of the subtree at `src`.
    pub fn copy_into(&mut self, dest: NodeId, src: NodeId) {
        let mut work = std::mem::take(&mut self.work);
        work.push((src, dest));
        while let Some((src, dest)) = work.pop() {
            let node = match self.get(src) {
                Node::App(f, a) => {
                    let (nf, na) = (self.alloc(Node::Free(None)), self.alloc(Node::Free(None)));
                    work.push((a, na));
                    work.push((f, nf));
                    Node::App(nf, na)
                }
                Node::Lambda { info, body } => {
                    let nb = self.alloc(Node::Free(None));
                    work.push((body, nb));
                    Node::Lambda { info, body: nb }
                }
                leaf => leaf,
            };
            self.set(dest, node);
        }
        self.work = work;
    }

    /// Moves the content of `src` into `dest` and releases `src`.
    pub fn move_into(&mut self, dest: NodeId, src: NodeId) {
        let node = self.get(src);
        self.set(dest, node);
        self.free(src);
    }

    /// Starts recording changes so that [`Heap::rollback`] can undo them.
    pub fn begin(&mut self) {
        self.journal = Some(Journal {
            watermark: self.nodes.len() as u32,
            free: self.free,
            writes: Vec::new(),
        });
    }

    /// Keeps every change made since [`Heap::begin`].
    pub fn commit(&mut self) {
        self.journal = None;
    }

    /// Restores the heap to its state at [`Heap::begin`].
    pub fn rollback(&mut self, live_before: usize) {
        let Some(journal) = self.journal.take() else {
            return;
        };
        for (id, node) in journal.writes.into_iter().rev() {
            self.nodes[id.index()] = node;
        }
        self.nodes.truncate(journal.watermark as usize);
        self.free = journal.free;
        self.live = live_before;
    }

    /// Head of the application spine at `id` and its arguments, left to
    /// right.
    pub fn spine(&self, mut id: NodeId, args: &mut Vec<NodeId>) -> NodeId {
        let start = args.len();
        while let Node::App(f, a) = self.get(id) {
            args.push(a);
            id = f;
        }
        args[start..].reverse();
        id
    }

    /// Node count, counting applications as binary.
    pub fn size(&self, id: NodeId) -> usize {
        let mut total = 0;
        let mut stack = vec![id];
        while let Some(id) = stack.pop() {
            total += 1;
            match self.get(id) {
                Node::App(f, a) => {
                    stack.push(f);
                    stack.push(a);
                }
                Node::Lambda { body, .. } => stack.push(body),
                Node::Closure(info) => total += info.get().body_size,
                _ => {}
            }
        }
        total
    }

    /// Copies a tree term into the heap.
    pub fn import(&mut self, term: &Term) -> NodeId {
        stacker::maybe_grow(64 * 1024, 4 * 1024 * 1024, || {
            let node = match term {
                Term::Apply { head, args } => {
                    let mut fun = self.import(head);
                    for arg in args {
                        let arg = self.import(arg);
                        fun = self.alloc(Node::App(fun, arg));
                    }
                    return fun;
                }
                Term::Global { name, origin } => Node::Global {
                    sym: symbol::intern(name),
                    module: origin
                        .as_ref()
                        .map_or(Sym::NONE, |o| symbol::intern(o.module())),
                    origin: origin
                        .as_ref()
                        .map_or(OriginId::NONE, |o| symbol::register_origin((**o).clone())),
                },
                Term::Var(name) => Node::Var(symbol::intern(name)),
                Term::Con(name) => Node::Con(symbol::intern(name)),
                Term::Int(n) => Node::Int(*n),
                Term::Text(s) => Node::Text(symbol::intern(s)),
                Term::Lambda(lambda) => {
                    let origin = lambda
                        .origin
                        .as_ref()
                        .map_or(OriginId::NONE, |o| symbol::register_origin((**o).clone()));
                    let vars = symbol::pattern_variables(&lambda.params);
                    if Template::is_closed_term(&lambda.body, &vars) {
                        let body = Template::from_term(&lambda.body, &vars);
                        Node::Closure(symbol::lambda_of(&lambda.params, origin, Some(body)))
                    } else {
                        let info = symbol::lambda_of(&lambda.params, origin, None);
                        let body = self.import(&lambda.body);
                        Node::Lambda { info, body }
                    }
                }
            };
            self.alloc(node)
        })
    }

    /// Copies the subtree at `id` out as a tree term.
    pub fn export(&self, id: NodeId) -> Term {
        self.export_limited(id, usize::MAX)
    }

    /// Like [`Heap::export`], but nodes nested deeper than `max_depth`
    /// become a `...` placeholder. Heads of applications count at the
    /// depth of the application, arguments and lambda bodies one deeper.
    pub fn export_limited(&self, id: NodeId, max_depth: usize) -> Term {
        self.export_at(id, 0, max_depth)
    }

    fn export_at(&self, id: NodeId, depth: usize, max_depth: usize) -> Term {
        if depth > max_depth {
            return Term::Global {
                name: Arc::from("..."),
                origin: None,
            };
        }
        stacker::maybe_grow(64 * 1024, 4 * 1024 * 1024, || match self.get(id) {
            Node::App(..) => {
                let mut args = Vec::new();
                let head = self.spine(id, &mut args);
                let head = self.export_at(head, depth, max_depth);
                let args = args
                    .into_iter()
                    .map(|a| self.export_at(a, depth + 1, max_depth))
                    .collect();
                Term::apply(head, args)
            }
            Node::Global { sym, origin, .. } => Term::Global {
                name: sym.name(),
                origin: origin.get(),
            },
            Node::Var(sym) => Term::Var(sym.name()),
            Node::Con(sym) => Term::Con(sym.name()),
            Node::Int(n) => Term::Int(n),
            Node::Text(sym) => Term::Text(sym.name()),
            Node::Lambda { info, body } => {
                let info = info.get();
                Term::Lambda(Box::new(Lambda {
                    params: info.patterns.clone(),
                    body: self.export_at(body, depth + 1, max_depth),
                    origin: info.origin.get(),
                }))
            }
            Node::Closure(info) => {
                let info = info.get();
                let names: Vec<_> = info.vars.iter().map(|v| v.name()).collect();
                let body = info.body.as_ref().expect("closures have a body").to_term(&names);
                Term::Lambda(Box::new(Lambda {
                    params: info.patterns.clone(),
                    body: if max_depth == usize::MAX {
                        body
                    } else {
                        let mut scratch = Heap::new();
                        let id = scratch.import(&body);
                        scratch.export_at(id, depth + 1, max_depth)
                    },
                    origin: info.origin.get(),
                }))
            }
            Node::Free(_) => unreachable!("live terms never reach freed nodes"),
        })
    }
}
