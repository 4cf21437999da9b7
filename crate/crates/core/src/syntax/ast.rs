//! Syntax tree produced by the parser.
//!
//! Infix operators and list literals are desugared during parsing, so an
//! [`Expression`] only ever contains identifiers, literals, constructors,
//! binary applications and lambdas.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

/// A span of module text. Lines and columns are 1-based and count
/// characters; `end_col` is exclusive.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SourceRange {
    pub module: Arc<str>,
    pub start_line: u32,
    pub start_col: u32,
    pub end_line: u32,
    pub end_col: u32,
}

impl SourceRange {
    pub fn new(module: Arc<str>, start: (u32, u32), end: (u32, u32)) -> Self {
        SourceRange {
            module,
            start_line: start.0,
            start_col: start.1,
            end_line: end.0,
            end_col: end.1,
        }
    }

    /// Smallest range covering both `self` and `other`.
    pub fn join(&self, other: &SourceRange) -> SourceRange {
        let start = (self.start_line, self.start_col).min((other.start_line, other.start_col));
        let end = (self.end_line, self.end_col).max((other.end_line, other.end_col));
        SourceRange::new(self.module.clone(), start, end)
    }

    /// Extracts the covered text from `source`.
    pub fn slice<'a>(&self, source: &'a str) -> Option<&'a str> {
        let start = char_offset(source, self.start_line, self.start_col)?;
        let end = char_offset(source, self.end_line, self.end_col)?;
        source.get(start..end)
    }
}

impl fmt::Display for SourceRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}:{}:{}-{}:{}",
            self.module, self.start_line, self.start_col, self.end_line, self.end_col
        )
    }
}

fn char_offset(source: &str, line: u32, col: u32) -> Option<usize> {
    let mut offset = 0;
    for (i, text) in source.split_inclusive('\n').enumerate() {
        if i as u32 + 1 == line {
            let within = text
                .char_indices()
                .map(|(b, _)| b)
                .chain(std::iter::once(text.len()))
                .nth(col as usize - 1)?;
            return Some(offset + within);
        }
        offset += text.len();
    }
    // position just past a text without trailing newline, or on an empty last line
    (line as usize == source.split_inclusive('\n').count() + 1 && col == 1).then_some(source.len())
}

/// A problem found while lexing, parsing or compiling a module.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub module: String,
    pub line: u32,
    pub col: u32,
    pub message: String,
}

impl Diagnostic {
    pub fn new(module: impl Into<String>, line: u32, col: u32, message: impl Into<String>) -> Self {
        Diagnostic {
            module: module.into(),
            line,
            col,
            message: message.into(),
        }
    }

    pub fn at(range: &SourceRange, message: impl Into<String>) -> Self {
        Diagnostic::new(&*range.module, range.start_line, range.start_col, message)
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}: {}", self.module, self.line, self.col, self.message)
    }
}

impl std::error::Error for Diagnostic {}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Pattern {
    Var(Arc<str>),
    Wildcard,
    Int(i64),
    Constructor(Arc<str>, Vec<Pattern>),
}

impl Pattern {
    /// Variables bound by this pattern, left to right.
    pub fn variables<'a>(&'a self, out: &mut Vec<&'a Arc<str>>) {
        match self {
            Pattern::Var(name) => out.push(name),
            Pattern::Constructor(_, subs) => subs.iter().for_each(|p| p.variables(out)),
            Pattern::Wildcard | Pattern::Int(_) => {}
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Expression {
    Ident { name: Arc<str>, range: SourceRange },
    Int(i64),
    Text(Arc<str>),
    Constructor { name: Arc<str>, range: SourceRange },
    Apply(Box<Expression>, Box<Expression>),
    Lambda {
        params: Vec<Pattern>,
        body: Box<Expression>,
        range: SourceRange,
    },
}

impl Expression {
    /// Structural equality ignoring source ranges.
    pub fn same_shape(&self, other: &Expression) -> bool {
        use Expression::*;
        match (self, other) {
            (Ident { name: a, .. }, Ident { name: b, .. }) => a == b,
            (Int(a), Int(b)) => a == b,
            (Text(a), Text(b)) => a == b,
            (Constructor { name: a, .. }, Constructor { name: b, .. }) => a == b,
            (Apply(f, x), Apply(g, y)) => f.same_shape(g) && x.same_shape(y),
            (
                Lambda { params: p, body: b, .. },
                Lambda { params: q, body: c, .. },
            ) => p == q && b.same_shape(c),
            _ => false,
        }
    }

    /// Visits every identifier node.
    pub fn for_each_ident(&self, f: &mut impl FnMut(&Arc<str>, &SourceRange)) {
        match self {
            Expression::Ident { name, range } => f(name, range),
            Expression::Apply(fun, arg) => {
                fun.for_each_ident(f);
                arg.for_each_ident(f);
            }
            Expression::Lambda { body, .. } => body.for_each_ident(f),
            Expression::Int(_) | Expression::Text(_) | Expression::Constructor { .. } => {}
        }
    }
}

/// One equation `name p1 .. pn = rhs ;`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Declaration {
    pub name: Arc<str>,
    pub patterns: Vec<Pattern>,
    pub rhs: Expression,
    pub range: SourceRange,
}

impl Declaration {
    pub fn arity(&self) -> usize {
        self.patterns.len()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModuleAst {
    pub name: String,
    /// `None` exports every top-level name.
    pub exports: Option<Vec<String>>,
    pub imports: Vec<String>,
    pub declarations: Vec<Declaration>,
    pub editable_from_line: Option<u32>,
}

impl ModuleAst {
    /// Declared names in order of first appearance.
    pub fn defined_names(&self) -> Vec<&str> {
        let mut seen = Vec::new();
        for decl in &self.declarations {
            if !seen.contains(&&*decl.name) {
                seen.push(&*decl.name);
            }
        }
        seen
    }
}
