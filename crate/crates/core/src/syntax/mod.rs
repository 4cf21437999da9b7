//! Surface syntax: tokens, modules, expressions and the editable region
//! marker.

mod ast;
mod editable;
mod lexer;
mod parser;
mod render;

pub use ast::{Declaration, Diagnostic, Expression, ModuleAst, Pattern, SourceRange};
pub use editable::{join_editable, marker_line, split_editable, MARKER};
pub use lexer::{tokenize, Token, TokenKind, OPERATORS};
pub use parser::{fixity, parse_expression, parse_module, parse_rendered_term, Assoc};
pub use render::render_term;
