use std::sync::Arc;

use crate::syntax::{Pattern, SourceRange};

pub type Name = Arc<str>;

/// Where a term node came from: a range of program text and the version of
/// the module that text belonged to.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Origin {
    pub range: SourceRange,
    pub version: u64,
}

impl Origin {
    pub fn module(&self) -> &str {
        &self.range.module
    }
}

/// The interpreter's live state: a plain tree. Nothing in it is shared, so
/// reducing one copy of a subterm never affects another copy.
///
/// Application spines are kept flat: `head` is never itself an `Apply` and
/// `args` is never empty. Build applications through [`Term::apply`].
#[derive(Debug, Clone, PartialEq)]
pub enum Term {
    Apply { head: Box<Term>, args: Vec<Term> },
    /// A reference to a top-level function, resolved against the current
    /// rules each time it is reduced.
    Global { name: Name, origin: Option<Arc<Origin>> },
    /// A variable bound by an enclosing lambda. Closed terms contain these
    /// only underneath the lambda that binds them.
    Var(Name),
    Con(Name),
    Int(i64),
    Text(Arc<str>),
    Lambda(Box<Lambda>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Lambda {
    pub params: Vec<Pattern>,
    pub body: Term,
    pub origin: Option<Arc<Origin>>,
}

impl Term {
    pub fn global(name: &str) -> Term {
        Term::Global {
            name: Arc::from(name),
            origin: None,
        }
    }

    pub fn con(name: &str) -> Term {
        Term::Con(Arc::from(name))
    }

    pub fn nil() -> Term {
        Term::con("[]")
    }

    pub fn cons(head: Term, tail: Term) -> Term {
        Term::apply(Term::con(":"), vec![head, tail])
    }

    /// Builds a list from its elements.
    pub fn list(items: impl IntoIterator<Item = Term, IntoIter: DoubleEndedIterator>) -> Term {
        items
            .into_iter()
            .rev()
            .fold(Term::nil(), |tail, head| Term::cons(head, tail))
    }

    /// Applies `fun` to `args`, merging into an existing spine.
    pub fn apply(fun: Term, mut args: Vec<Term>) -> Term {
        if args.is_empty() {
            return fun;
        }
        match fun {
            Term::Apply { head, args: mut first } => {
                first.append(&mut args);
                Term::Apply { head, args: first }
            }
            other => Term::Apply {
                head: Box::new(other),
                args,
            },
        }
    }

    /// Head of the application spine and its arguments.
    pub fn spine(&self) -> (&Term, &[Term]) {
        match self {
            Term::Apply { head, args } => (head, args),
            other => (other, &[]),
        }
    }

    /// Constructor name and fields, if the root is a constructor.
    pub fn as_constructor(&self) -> Option<(&str, &[Term])> {
        match self.spine() {
            (Term::Con(name), args) => Some((name, args)),
            _ => None,
        }
    }

    pub fn is_nil(&self) -> bool {
        matches!(self, Term::Con(name) if &**name == "[]")
    }

    /// Number of nodes, counting applications as binary: `2 + 3` is five
    /// nodes.
    pub fn size(&self) -> usize {
        let mut total = 0;
        let mut stack = vec![self];
        while let Some(term) = stack.pop() {
            total += 1;
            match term {
                Term::Apply { head, args } => {
                    total += args.len() - 1;
                    stack.push(head);
                    stack.extend(args.iter());
                }
                Term::Lambda(lambda) => stack.push(&lambda.body),
                _ => {}
            }
        }
        total
    }

    /// Drops all origins, so names resolve in the global namespace.
    pub fn clear_origins(&mut self) {
        match self {
            Term::Apply { head, args } => {
                head.clear_origins();
                args.iter_mut().for_each(Term::clear_origins);
            }
            Term::Global { origin, .. } => *origin = None,
            Term::Lambda(lambda) => {
                lambda.origin = None;
                lambda.body.clear_origins();
            }
            _ => {}
        }
    }

    /// Equality ignoring origins.
    pub fn same_shape(&self, other: &Term) -> bool {
        match (self, other) {
            (Term::Apply { head: h1, args: a1 }, Term::Apply { head: h2, args: a2 }) => {
                h1.same_shape(h2)
                    && a1.len() == a2.len()
                    && a1.iter().zip(a2).all(|(x, y)| x.same_shape(y))
            }
            (Term::Global { name: a, .. }, Term::Global { name: b, .. }) => a == b,
            (Term::Lambda(l1), Term::Lambda(l2)) => {
                l1.params == l2.params && l1.body.same_shape(&l2.body)
            }
            (a, b) => a == b,
        }
    }
}

/// Node count of `term`.
pub fn term_size(term: &Term) -> usize {
    term.size()
}
