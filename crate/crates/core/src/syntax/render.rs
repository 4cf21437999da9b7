//! Pretty-printing terms back into source syntax.
//!
//! Operands of infix operators are parenthesized whenever they are
//! themselves infix applications, so `Wait 200 : (Event e : rest)` reads
//! the same way the term is nested. The output parses back into the same
//! tree with [`super::parse_rendered_term`].

use std::fmt::Write;

use crate::engine::{Term, Name};

use super::ast::Pattern;
use super::parser::fixity;

/// Renders `term`. Subterms nested deeper than `max_depth` print as `...`.
pub fn render_term(term: &Term, max_depth: Option<usize>) -> String {
    let mut out = String::new();
    Printer {
        out: &mut out,
        max_depth: max_depth.unwrap_or(usize::MAX),
    }
    .term(term, 0, Position::Top);
    out
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Position {
    Top,
    Operand,
    Argument,
}

struct Printer<'a> {
    out: &'a mut String,
    max_depth: usize,
}

fn operator_name(term: &Term) -> Option<&Name> {
    match term {
        Term::Global { name, .. } | Term::Con(name) if fixity(name).is_some() => Some(name),
        _ => None,
    }
}

fn is_word(op: &str) -> bool {
    op.chars().all(|c| c.is_alphabetic())
}

impl Printer<'_> {
    fn term(&mut self, term: &Term, depth: usize, pos: Position) {
        if depth > self.max_depth {
            self.out.push_str("...");
            return;
        }
        stacker::maybe_grow(32 * 1024, 1024 * 1024, || self.node(term, depth, pos));
    }

    fn node(&mut self, term: &Term, depth: usize, pos: Position) {
        match term {
            Term::Int(n) if *n < 0 => {
                let wrap = pos == Position::Argument;
                self.open(wrap);
                let _ = write!(self.out, "negate {}", n.unsigned_abs());
                self.close(wrap);
            }
            Term::Int(n) => {
                let _ = write!(self.out, "{n}");
            }
            Term::Text(s) => self.text(s),
            Term::Var(name) | Term::Con(name) | Term::Global { name, .. } => {
                if fixity(name).is_some() && !is_word(name) {
                    let _ = write!(self.out, "({name})");
                } else {
                    self.out.push_str(name);
                }
            }
            Term::Lambda(lambda) => {
                let wrap = pos != Position::Top;
                self.open(wrap);
                self.out.push('\\');
                for param in &lambda.params {
                    self.pattern(param, true);
                    self.out.push(' ');
                }
                self.out.push_str("-> ");
                self.term(&lambda.body, depth + 1, Position::Top);
                self.close(wrap);
            }
            Term::Apply { head, args } => match operator_name(head) {
                Some(op) if args.len() >= 2 => self.infix(op, args, depth, pos),
                _ => {
                    let wrap = pos == Position::Argument;
                    self.open(wrap);
                    self.term(head, depth, Position::Argument);
                    for arg in args {
                        self.out.push(' ');
                        self.term(arg, depth + 1, Position::Argument);
                    }
                    self.close(wrap);
                }
            },
        }
    }

    fn infix(&mut self, op: &str, args: &[Term], depth: usize, pos: Position) {
        let extra = &args[2..];
        let wrap = pos != Position::Top || !extra.is_empty();
        let outer = pos == Position::Argument && !extra.is_empty();
        self.open(outer);
        self.open(wrap);
        self.term(&args[0], depth + 1, Position::Operand);
        if is_word(op) {
            let _ = write!(self.out, " `{op}` ");
        } else {
            let _ = write!(self.out, " {op} ");
        }
        self.term(&args[1], depth + 1, Position::Operand);
        self.close(wrap);
        for arg in extra {
            self.out.push(' ');
            self.term(arg, depth + 1, Position::Argument);
        }
        self.close(outer);
    }

    fn pattern(&mut self, pattern: &Pattern, atomic: bool) {
        match pattern {
            Pattern::Var(name) => self.out.push_str(name),
            Pattern::Wildcard => self.out.push('_'),
            Pattern::Int(n) => {
                let _ = write!(self.out, "{n}");
            }
            Pattern::Constructor(name, subs) if subs.is_empty() => self.out.push_str(name),
            Pattern::Constructor(name, subs) => {
                self.open(atomic);
                if fixity(name).is_some() && subs.len() == 2 {
                    self.pattern(&subs[0], true);
                    let _ = write!(self.out, " {name} ");
                    self.pattern(&subs[1], true);
                } else {
                    self.out.push_str(name);
                    for sub in subs {
                        self.out.push(' ');
                        self.pattern(sub, true);
                    }
                }
                self.close(atomic);
            }
        }
    }

    fn text(&mut self, s: &str) {
        self.out.push('"');
        for c in s.chars() {
            match c {
                '\n' => self.out.push_str("\\n"),
                '\t' => self.out.push_str("\\t"),
                '"' => self.out.push_str("\\\""),
                '\\' => self.out.push_str("\\\\"),
                c => self.out.push(c),
            }
        }
        self.out.push('"');
    }

    fn open(&mut self, wrap: bool) {
        if wrap {
            self.out.push('(');
        }
    }

    fn close(&mut self, wrap: bool) {
        if wrap {
            self.out.push(')');
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn app(head: Term, args: Vec<Term>) -> Term {
        Term::apply(head, args)
    }

    #[test]
    fn unshared_argument_copy() {
        let sum = app(Term::global("+"), vec![Term::Int(2), Term::Int(3)]);
        let term = Term::cons(Term::Int(5), Term::cons(sum, Term::nil()));
        assert_eq!(render_term(&term, None), "5 : ((2 + 3) : [])");
    }

    #[test]
    fn melody_tail() {
        let g = Term::global("g");
        let vel = Term::global("normalVelocity");
        let off = app(Term::con("Event"), vec![app(Term::con("Off"), vec![g.clone(), vel])]);
        let note = app(Term::global("note"), vec![Term::global("hn"), g]);
        let rest = app(Term::global("++"), vec![note, Term::global("main")]);
        let term = Term::cons(
            app(Term::con("Wait"), vec![Term::Int(200)]),
            Term::cons(off, rest),
        );
        assert_eq!(
            render_term(&term, None),
            "Wait 200 : (Event (Off g normalVelocity) : (note hn g ++ main))"
        );
    }

    #[test]
    fn operators_sections_and_words() {
        let plus = app(Term::global("+"), vec![Term::Int(1)]);
        assert_eq!(render_term(&plus, None), "(+) 1");
        let div = app(Term::global("div"), vec![Term::Int(7), Term::Int(2)]);
        assert_eq!(render_term(&div, None), "7 `div` 2");
        let over = app(Term::global("++"), vec![Term::nil(), Term::nil(), Term::Int(1)]);
        assert_eq!(render_term(&over, None), "([] ++ []) 1");
        let arg = app(Term::global("f"), vec![over, Term::Int(-3)]);
        assert_eq!(render_term(&arg, None), "f (([] ++ []) 1) (negate 3)");
    }

    #[test]
    fn lambdas_and_truncation() {
        let term = crate::engine::compile_expression("\\(Wait a) _ -> a").unwrap();
        assert_eq!(render_term(&term, None), "\\(Wait a) _ -> a");
        let nested = app(Term::global("f"), vec![app(Term::global("g"), vec![Term::Int(1)])]);
        assert_eq!(render_term(&nested, Some(1)), "f (g ...)");
        assert_eq!(render_term(&Term::Text("a\"b".into()), None), "\"a\\\"b\"");
    }
}
