//! Interpreter for a small lazy functional language whose programs are
//! infinite lists of MIDI events and waits.
//!
//! A program is a set of modules holding rewrite rules. The machine keeps
//! a single term, starting at `main`, and repeatedly reduces it just far
//! enough to take the next list element off the front. Modules can be
//! replaced while the program runs; the term keeps going with the new
//! rules.

pub mod engine;
pub mod syntax;
pub mod highlight;
pub mod store;
pub mod stream;
