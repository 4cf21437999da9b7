use std::sync::Arc;

use super::ast::{Diagnostic, SourceRange};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TokenKind {
    /// Lower-case or `_`-prefixed identifier.
    Ident(String),
    /// Upper-case identifier: constructor or module name.
    ConId(String),
    Int(i64),
    Text(String),
    /// Infix operator, including backtick-quoted `div` and `mod`.
    Op(String),
    Underscore,
    Equals,
    Semi,
    Comma,
    LParen,
    RParen,
    LBracket,
    RBracket,
    Backslash,
    Arrow,
    /// `...`, only meaningful when reading back a depth-truncated term.
    Ellipsis,
    Module,
    Where,
    Import,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub kind: TokenKind,
    pub range: SourceRange,
}

/// Operators with a fixed meaning; anything else is rejected by the lexer.
pub const OPERATORS: &[&str] = &[
    ":", "++", "=:=", "+", "-", "*", "<", "<=", "==", "/=", ">=", ">",
];

fn is_symbol(c: char) -> bool {
    "!#$%&*+./<=>?@^|-~:".contains(c)
}

fn is_ident_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_' || c == '\''
}

struct Cursor<'a> {
    chars: std::iter::Peekable<std::str::Chars<'a>>,
    line: u32,
    col: u32,
}

impl Cursor<'_> {
    fn peek(&mut self) -> Option<char> {
        self.chars.peek().copied()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.chars.next()?;
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn pos(&self) -> (u32, u32) {
        (self.line, self.col)
    }

    fn take_while(&mut self, mut pred: impl FnMut(char) -> bool) -> String {
        let mut out = String::new();
        while let Some(c) = self.peek() {
            if !pred(c) {
                break;
            }
            out.push(c);
            self.bump();
        }
        out
    }
}

/// Splits module text into tokens. Line comments are dropped; use
/// [`super::marker_line`] to locate the editable-region marker.
pub fn tokenize(module: &str, text: &str) -> Result<Vec<Token>, Diagnostic> {
    let module: Arc<str> = Arc::from(module);
    let mut cur = Cursor {
        chars: text.chars().peekable(),
        line: 1,
        col: 1,
    };
    let mut tokens = Vec::new();
    let error = |pos: (u32, u32), msg: String| Diagnostic::new(&*module, pos.0, pos.1, msg);

    while let Some(c) = cur.peek() {
        let start = cur.pos();
        let kind = if c.is_whitespace() {
            cur.bump();
            continue;
        } else if c.is_ascii_digit() {
            let digits = cur.take_while(|c| c.is_ascii_digit());
            match digits.parse::<i64>() {
                Ok(n) => TokenKind::Int(n),
                Err(_) => return Err(error(start, format!("integer literal {digits} is too large"))),
            }
        } else if c == '_' || c.is_lowercase() {
            let word = cur.take_while(is_ident_char);
            match word.as_str() {
                "_" => TokenKind::Underscore,
                "module" => TokenKind::Module,
                "where" => TokenKind::Where,
                "import" => TokenKind::Import,
                _ => TokenKind::Ident(word),
            }
        } else if c.is_uppercase() {
            TokenKind::ConId(cur.take_while(is_ident_char))
        } else if c == '"' {
            cur.bump();
            let mut text = String::new();
            loop {
                match cur.bump() {
                    None | Some('\n') => {
                        return Err(error(start, "unterminated text literal".into()))
                    }
                    Some('"') => break,
                    Some('\\') => match cur.bump() {
                        Some('n') => text.push('\n'),
                        Some('t') => text.push('\t'),
                        Some('"') => text.push('"'),
                        Some('\\') => text.push('\\'),
                        _ => return Err(error(start, "invalid escape in text literal".into())),
                    },
                    Some(other) => text.push(other),
                }
            }
            TokenKind::Text(text)
        } else if c == '`' {
            cur.bump();
            let word = cur.take_while(is_ident_char);
            if cur.bump() != Some('`') {
                return Err(error(start, "unterminated backtick operator".into()));
            }
            if word != "div" && word != "mod" {
                return Err(error(
                    start,
                    format!("`{word}` cannot be used infix; only `div` and `mod` can"),
                ));
            }
            // the range covers the name without its backticks
            tokens.push(Token {
                kind: TokenKind::Op(word),
                range: SourceRange::new(
                    module.clone(),
                    (start.0, start.1 + 1),
                    (cur.line, cur.col - 1),
                ),
            });
            continue;
        } else if is_symbol(c) {
            let sym = cur.take_while(is_symbol);
            if sym.starts_with("--") {
                cur.take_while(|c| c != '\n');
                continue;
            }
            match sym.as_str() {
                "=" => TokenKind::Equals,
                "->" => TokenKind::Arrow,
                "..." => TokenKind::Ellipsis,
                s if OPERATORS.contains(&s) => TokenKind::Op(sym),
                _ => return Err(error(start, format!("unknown operator `{sym}`"))),
            }
        } else {
            cur.bump();
            match c {
                ';' => TokenKind::Semi,
                ',' => TokenKind::Comma,
                '(' => TokenKind::LParen,
                ')' => TokenKind::RParen,
                '[' => TokenKind::LBracket,
                ']' => TokenKind::RBracket,
                '\\' => TokenKind::Backslash,
                other => return Err(error(start, format!("unexpected character `{other}`"))),
            }
        };
        tokens.push(Token {
            kind,
            range: SourceRange::new(module.clone(), start, cur.pos()),
        });
    }
    Ok(tokens)
}
