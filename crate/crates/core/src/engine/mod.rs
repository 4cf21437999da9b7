//! Rewrite rules and the reducer that applies them.

mod builtin;
mod heap;
mod reduce;
mod rules;
mod subst;
pub mod symbol;
mod term;

pub use builtin::{apply_builtin, Builtin, BuiltinError};
pub use reduce::{normal_form, whnf, Budget, EngineError, Reducer, StepRecord};
pub use rules::{compile_rules, compile_versioned, origin_in, Callee, Equation, Function, RuleSet, PRELUDE};
pub use heap::{Heap, Node, NodeId};
pub use subst::{substitute, Template};
pub use term::{term_size, Lambda, Name, Origin, Term};

use crate::syntax::{parse_expression, Diagnostic};

/// Parses `text` into a term whose names resolve in the global namespace.
pub fn compile_expression(text: &str) -> Result<Term, Diagnostic> {
    let expr = parse_expression("<expr>", text)?;
    Ok(subst::expression_term(&expr))
}
