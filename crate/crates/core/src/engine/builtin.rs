use std::fmt;

use thiserror::Error;

use super::symbol::{Sym, FALSE, TRUE};
use super::term::Term;

/// Integer primitives available in every module.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Builtin {
    Add,
    Sub,
    Mul,
    Div,
    Mod,
    Lt,
    Le,
    Eq,
    Ne,
    Ge,
    Gt,
    Negate,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BuiltinError {
    #[error("division by zero in `{0}`")]
    DivisionByZero(Builtin),
    #[error("integer overflow in `{0}`")]
    Overflow(Builtin),
    #[error("`{op}` expects {expected} integer operand(s), got {got}")]
    Arity {
        op: Builtin,
        expected: usize,
        got: usize,
    },
}

impl Builtin {
    pub const ALL: [Builtin; 12] = [
        Builtin::Add,
        Builtin::Sub,
        Builtin::Mul,
        Builtin::Div,
        Builtin::Mod,
        Builtin::Lt,
        Builtin::Le,
        Builtin::Eq,
        Builtin::Ne,
        Builtin::Ge,
        Builtin::Gt,
        Builtin::Negate,
    ];

    pub fn from_name(name: &str) -> Option<Builtin> {
        Some(match name {
            "+" => Builtin::Add,
            "-" => Builtin::Sub,
            "*" => Builtin::Mul,
            "div" => Builtin::Div,
            "mod" => Builtin::Mod,
            "<" => Builtin::Lt,
            "<=" => Builtin::Le,
            "==" => Builtin::Eq,
            "/=" => Builtin::Ne,
            ">=" => Builtin::Ge,
            ">" => Builtin::Gt,
            "negate" => Builtin::Negate,
            _ => return None,
        })
    }

    /// Builtins are interned first, so their symbols are their indices.
    #[inline]
    pub(crate) fn from_sym(sym: Sym) -> Option<Builtin> {
        Builtin::ALL.get(sym.index()).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            Builtin::Add => "+",
            Builtin::Sub => "-",
            Builtin::Mul => "*",
            Builtin::Div => "div",
            Builtin::Mod => "mod",
            Builtin::Lt => "<",
            Builtin::Le => "<=",
            Builtin::Eq => "==",
            Builtin::Ne => "/=",
            Builtin::Ge => ">=",
            Builtin::Gt => ">",
            Builtin::Negate => "negate",
        }
    }

    pub fn arity(self) -> usize {
        match self {
            Builtin::Negate => 1,
            _ => 2,
        }
    }

    /// Applies the primitive to integer operands. Comparisons yield the
    /// constructors `True` and `False`; `div` and `mod` round towards
    /// negative infinity.
    pub fn apply(self, operands: &[i64]) -> Result<Term, BuiltinError> {
        Ok(match self.eval(operands)? {
            Value::Int(n) => Term::Int(n),
            Value::Con(sym) => Term::Con(sym.name()),
        })
    }

    pub(crate) fn eval(self, operands: &[i64]) -> Result<Value, BuiltinError> {
        if operands.len() != self.arity() {
            return Err(BuiltinError::Arity {
                op: self,
                expected: self.arity(),
                got: operands.len(),
            });
        }
        let overflow = || BuiltinError::Overflow(self);
        if self == Builtin::Negate {
            return operands[0].checked_neg().map(Value::Int).ok_or_else(overflow);
        }
        let (a, b) = (operands[0], operands[1]);
        let truth = |v: bool| Value::Con(if v { TRUE } else { FALSE });
        Ok(match self {
            Builtin::Add => Value::Int(a.checked_add(b).ok_or_else(overflow)?),
            Builtin::Sub => Value::Int(a.checked_sub(b).ok_or_else(overflow)?),
            Builtin::Mul => Value::Int(a.checked_mul(b).ok_or_else(overflow)?),
            Builtin::Div | Builtin::Mod => {
                if b == 0 {
                    return Err(BuiltinError::DivisionByZero(self));
                }
                let q = a.checked_div(b).ok_or_else(overflow)?;
                let r = a % b;
                let (q, r) = if r != 0 && ((r < 0) != (b < 0)) {
                    (q - 1, r + b)
                } else {
                    (q, r)
                };
                Value::Int(if self == Builtin::Div { q } else { r })
            }
            Builtin::Lt => truth(a < b),
            Builtin::Le => truth(a <= b),
            Builtin::Eq => truth(a == b),
            Builtin::Ne => truth(a != b),
            Builtin::Ge => truth(a >= b),
            Builtin::Gt => truth(a > b),
            Builtin::Negate => unreachable!(),
        })
    }
}

/// Result of a primitive: a number or a nullary constructor.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Value {
    Int(i64),
    Con(Sym),
}

impl fmt::Display for Builtin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Applies a binary primitive by name.
pub fn apply_builtin(op: &str, lhs: i64, rhs: i64) -> Result<Term, BuiltinError> {
    let builtin = Builtin::from_name(op).expect("unknown builtin");
    builtin.apply(&[lhs, rhs])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn examples() {
        assert_eq!(apply_builtin("<", 200, 100).unwrap(), Term::con("False"));
        assert_eq!(apply_builtin("+", 2, 3).unwrap(), Term::Int(5));
        assert_eq!(
            apply_builtin("div", 7, 0).unwrap_err(),
            BuiltinError::DivisionByZero(Builtin::Div)
        );
    }

    #[test]
    fn names_round_trip() {
        for b in Builtin::ALL {
            assert_eq!(Builtin::from_name(b.name()), Some(b));
            assert_eq!(Builtin::from_sym(crate::engine::symbol::intern(b.name())), Some(b));
        }
        assert_eq!(Builtin::from_name("foldr"), None);
    }

    #[test]
    fn floor_division() {
        let cases = [(7, 2, 3, 1), (-7, 2, -4, 1), (7, -2, -4, -1), (-7, -2, 3, -1)];
        for (a, b, q, r) in cases {
            assert_eq!(Builtin::Div.apply(&[a, b]).unwrap(), Term::Int(q), "{a} div {b}");
            assert_eq!(Builtin::Mod.apply(&[a, b]).unwrap(), Term::Int(r), "{a} mod {b}");
        }
    }

    #[test]
    fn negate_and_overflow() {
        assert_eq!(Builtin::Negate.apply(&[5]).unwrap(), Term::Int(-5));
        assert!(matches!(
            Builtin::Add.apply(&[i64::MAX, 1]),
            Err(BuiltinError::Overflow(_))
        ));
        assert!(matches!(
            Builtin::Negate.apply(&[1, 2]),
            Err(BuiltinError::Arity { .. })
        ));
    }
}
