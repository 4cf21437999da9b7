//! Instantiating right-hand sides: every occurrence of a bound variable
//! receives its own copy of the argument term.

use crate::syntax::Expression;

use super::heap::{Heap, Node, NodeId};
use super::symbol::{self, LambdaId, OriginId, Sym};
use super::term::{Lambda, Name, Origin, Term};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum TNode {
    App(u32, u32),
    Leaf(Node),
    Slot(u32),
    Lambda { info: LambdaId, body: u32 },
}

/// A right-hand side compiled for fast instantiation. Pattern-bound
/// variables become numbered slots.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Template {
    nodes: Vec<TNode>,
    root: u32,
    /// Occurrence count of each slot.
    uses: Vec<u32>,
}

impl Template {
    /// Compiles `expr`. Identifiers named in `bound` become slots, numbered
    /// in that order; identifiers bound by a lambda inside `expr` become
    /// variables. Every other identifier is a global reference whose
    /// origin is its own source range, tagged with `version`.
    pub fn from_expression(expr: &Expression, bound: &[Name], version: u64) -> Template {
        let mut builder = Builder {
            nodes: Vec::new(),
            uses: vec![0; bound.len()],
            bound,
            lambda_scope: Vec::new(),
            version: Some(version),
        };
        let root = builder.build(expr);
        Template {
            nodes: builder.nodes,
            root,
            uses: builder.uses,
        }
    }

    /// Like [`Template::from_expression`] but without origins, so that
    /// names resolve in the global namespace.
    pub(crate) fn unanchored(expr: &Expression, bound: &[Name]) -> Template {
        let mut builder = Builder {
            nodes: Vec::new(),
            uses: vec![0; bound.len()],
            bound,
            lambda_scope: Vec::new(),
            version: None,
        };
        let root = builder.build(expr);
        Template {
            nodes: builder.nodes,
            root,
            uses: builder.uses,
        }
    }

    pub fn uses(&self) -> &[u32] {
        &self.uses
    }

    /// Node count of an instance, counting each slot as one node.
    pub fn size(&self) -> usize {
        self.nodes
            .iter()
            .map(|node| match node {
                TNode::Leaf(Node::Closure(info)) => 1 + info.get().body_size,
                _ => 1,
            })
            .sum()
    }

    /// Compiles a tree term. Variables named in `bound` become slots.
    pub fn from_term(term: &Term, bound: &[Name]) -> Template {
        let mut builder = Builder {
            nodes: Vec::new(),
            uses: vec![0; bound.len()],
            bound,
            lambda_scope: Vec::new(),
            version: None,
        };
        let root = builder.build_term(term);
        Template {
            nodes: builder.nodes,
            root,
            uses: builder.uses,
        }
    }

    /// Whether `term` mentions no variables other than `allowed`.
    pub fn is_closed_term(term: &Term, allowed: &[Name]) -> bool {
        fn walk(term: &Term, allowed: &mut Vec<Name>) -> bool {
            match term {
                Term::Var(name) => allowed.contains(name),
                Term::Apply { head, args } => walk(head, allowed) && args.iter().all(|a| walk(a, allowed)),
                Term::Lambda(lambda) => {
                    let depth = allowed.len();
                    allowed.extend(symbol::pattern_variables(&lambda.params));
                    let closed = walk(&lambda.body, allowed);
                    allowed.truncate(depth);
                    closed
                }
                _ => true,
            }
        }
        walk(term, &mut allowed.to_vec())
    }

    /// Writes an instance into `dest`. `slots` holds the bound values in
    /// slot order; the last occurrence of each takes the value itself and
    /// earlier ones take copies. Values of unused slots are left alone.
    pub(crate) fn instantiate_into(
        &self,
        heap: &mut Heap,
        dest: NodeId,
        slots: &[NodeId],
        remaining: &mut Vec<u32>,
    ) {
        remaining.clear();
        remaining.extend_from_slice(&self.uses);
        let mut fill = Fill {
            template: self,
            heap,
            slots,
            remaining,
            depth: 0,
        };
        match self.nodes[self.root as usize] {
            TNode::Slot(s) => {
                let value = slots[s as usize];
                fill.remaining[s as usize] -= 1;
                if fill.remaining[s as usize] == 0 {
                    fill.heap.move_into(dest, value);
                } else {
                    fill.heap.copy_into(dest, value);
                }
            }
            _ => {
                let node = fill.node(self.root);
                fill.heap.set(dest, node);
            }
        }
    }

    /// The template as a tree term, slots shown as variables named after
    /// `bound`.
    pub fn to_term(&self, bound: &[Name]) -> Term {
        self.term_at(self.root, bound)
    }

    fn term_at(&self, at: u32, bound: &[Name]) -> Term {
        match self.nodes[at as usize] {
            TNode::App(f, a) => Term::apply(self.term_at(f, bound), vec![self.term_at(a, bound)]),
            TNode::Slot(s) => Term::Var(bound[s as usize].clone()),
            TNode::Leaf(leaf) => {
                let mut heap = Heap::new();
                let id = heap.alloc(leaf);
                heap.export(id)
            }
            TNode::Lambda { info, body } => {
                let info = info.get();
                Term::Lambda(Box::new(Lambda {
                    params: info.patterns.clone(),
                    body: self.term_at(body, bound),
                    origin: info.origin.get(),
                }))
            }
        }
    }
}

struct Builder<'a> {
    nodes: Vec<TNode>,
    uses: Vec<u32>,
    bound: &'a [Name],
    lambda_scope: Vec<Name>,
    version: Option<u64>,
}

impl Builder<'_> {
    fn push(&mut self, node: TNode) -> u32 {
        self.nodes.push(node);
        self.nodes.len() as u32 - 1
    }

    fn origin(&self, range: &crate::syntax::SourceRange) -> (Sym, OriginId) {
        match self.version {
            Some(version) => (
                symbol::intern(&range.module),
                symbol::register_origin(Origin {
                    range: range.clone(),
                    version,
                }),
            ),
            None => (Sym::NONE, OriginId::NONE),
        }
    }

    fn build(&mut self, expr: &Expression) -> u32 {
        stacker::maybe_grow(64 * 1024, 4 * 1024 * 1024, || match expr {
            Expression::Ident { name, range } => {
                if self.lambda_scope.contains(name) {
                    return self.push(TNode::Leaf(Node::Var(symbol::intern(name))));
                }
                if let Some(slot) = self.bound.iter().position(|b| b == name) {
                    self.uses[slot] += 1;
                    return self.push(TNode::Slot(slot as u32));
                }
                let (module, origin) = self.origin(range);
                self.push(TNode::Leaf(Node::Global {
                    sym: symbol::intern(name),
                    module,
                    origin,
                }))
            }
            Expression::Int(n) => self.push(TNode::Leaf(Node::Int(*n))),
            Expression::Text(s) => self.push(TNode::Leaf(Node::Text(symbol::intern(s)))),
            Expression::Constructor { name, .. } => {
                self.push(TNode::Leaf(Node::Con(symbol::intern(name))))
            }
            Expression::Apply(fun, arg) => {
                let fun = self.build(fun);
                let arg = self.build(arg);
                self.push(TNode::App(fun, arg))
            }
            Expression::Lambda {
                params,
                body,
                range,
            } => {
                let (_, origin) = self.origin(range);
                let vars = symbol::pattern_variables(params);
                let outer: Vec<Name> = self
                    .bound
                    .iter()
                    .chain(&self.lambda_scope)
                    .filter(|name| !vars.contains(name))
                    .cloned()
                    .collect();
                if !mentions(body, &outer) {
                    let mut inner = Builder {
                        nodes: Vec::new(),
                        uses: vec![0; vars.len()],
                        bound: &vars,
                        lambda_scope: Vec::new(),
                        version: self.version,
                    };
                    let root = inner.build(body);
                    let template = Template {
                        nodes: inner.nodes,
                        root,
                        uses: inner.uses,
                    };
                    let info = symbol::lambda_of(params, origin, Some(template));
                    return self.push(TNode::Leaf(Node::Closure(info)));
                }
                let info = symbol::lambda_of(params, origin, None);
                let depth = self.lambda_scope.len();
                self.lambda_scope.extend(vars);
                let body = self.build(body);
                self.lambda_scope.truncate(depth);
                self.push(TNode::Lambda { info, body })
            }
        })
    }

    fn build_term(&mut self, term: &Term) -> u32 {
        stacker::maybe_grow(64 * 1024, 4 * 1024 * 1024, || match term {
            Term::Apply { head, args } => {
                let mut fun = self.build_term(head);
                for arg in args {
                    let arg = self.build_term(arg);
                    fun = self.push(TNode::App(fun, arg));
                }
                fun
            }
            Term::Var(name) if !self.lambda_scope.contains(name) => {
                match self.bound.iter().position(|b| b == name) {
                    Some(slot) => {
                        self.uses[slot] += 1;
                        self.push(TNode::Slot(slot as u32))
                    }
                    None => self.push(TNode::Leaf(Node::Var(symbol::intern(name)))),
                }
            }
            Term::Lambda(lambda) => {
                let origin = lambda
                    .origin
                    .as_ref()
                    .map_or(OriginId::NONE, |o| symbol::register_origin((**o).clone()));
                let vars = symbol::pattern_variables(&lambda.params);
                if Template::is_closed_term(&lambda.body, &vars) {
                    let body = Template::from_term(&lambda.body, &vars);
                    let info = symbol::lambda_of(&lambda.params, origin, Some(body));
                    return self.push(TNode::Leaf(Node::Closure(info)));
                }
                let info = symbol::lambda_of(&lambda.params, origin, None);
                let depth = self.lambda_scope.len();
                self.lambda_scope.extend(vars);
                let body = self.build_term(&lambda.body);
                self.lambda_scope.truncate(depth);
                self.push(TNode::Lambda { info, body })
            }
            leaf => {
                let mut heap = Heap::new();
                let id = heap.import(leaf);
                self.push(TNode::Leaf(heap.get(id)))
            }
        })
    }
}

/// Whether `expr` mentions one of `names` outside lambdas that rebind it.
fn mentions(expr: &Expression, names: &[Name]) -> bool {
    match expr {
        Expression::Ident { name, .. } => names.contains(name),
        Expression::Apply(fun, arg) => mentions(fun, names) || mentions(arg, names),
        Expression::Lambda { params, body, .. } => {
            let vars = symbol::pattern_variables(params);
            let kept: Vec<Name> = names.iter().filter(|n| !vars.contains(n)).cloned().collect();
            mentions(body, &kept)
        }
        _ => false,
    }
}

struct Fill<'a> {
    template: &'a Template,
    heap: &'a mut Heap,
    slots: &'a [NodeId],
    remaining: &'a mut Vec<u32>,
    depth: u32,
}

impl Fill<'_> {
    fn id(&mut self, at: u32) -> NodeId {
        if let TNode::Slot(s) = self.template.nodes[at as usize] {
            let value = self.slots[s as usize];
            self.remaining[s as usize] -= 1;
            return if self.remaining[s as usize] == 0 {
                value
            } else {
                self.heap.copy_tree(value)
            };
        }
        let node = self.node(at);
        self.heap.alloc(node)
    }

    fn node(&mut self, at: u32) -> Node {
        self.depth += 1;
        let node = if self.depth.is_multiple_of(128) {
            stacker::maybe_grow(64 * 1024, 4 * 1024 * 1024, || self.build(at))
        } else {
            self.build(at)
        };
        self.depth -= 1;
        node
    }

    fn build(&mut self, at: u32) -> Node {
        match self.template.nodes[at as usize] {
            TNode::App(f, a) => {
                let f = self.id(f);
                let a = self.id(a);
                Node::App(f, a)
            }
            TNode::Leaf(leaf) => leaf,
            TNode::Lambda { info, body } => Node::Lambda {
                info,
                body: self.id(body),
            },
            TNode::Slot(_) => unreachable!("slots are handled by the caller"),
        }
    }
}

/// Instantiates `rhs` with the given variable bindings. Identifiers not
/// bound here stay global references, resolved when they are reduced.
pub fn substitute(rhs: &Expression, bindings: Vec<(Name, Term)>) -> Term {
    let (names, values): (Vec<Name>, Vec<Term>) = bindings.into_iter().unzip();
    let template = Template::from_expression(rhs, &names, 0);
    let mut heap = Heap::new();
    let slots: Vec<NodeId> = values.iter().map(|v| heap.import(v)).collect();
    let dest = heap.alloc(Node::Int(0));
    template.instantiate_into(&mut heap, dest, &slots, &mut Vec::new());
    heap.export(dest)
}

/// An expression as a tree term without origins.
pub(crate) fn expression_term(expr: &Expression) -> Term {
    Template::unanchored(expr, &[]).to_term(&[])
}
