//! Recursive-descent parser with precedence climbing for the fixed operator
//! table.

use std::collections::HashSet;
use std::sync::Arc;

use super::ast::{Declaration, Diagnostic, Expression, ModuleAst, Pattern, SourceRange};
use super::editable::marker_line;
use super::lexer::{tokenize, Token, TokenKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Assoc {
    Left,
    Right,
    Non,
}

/// Precedence and associativity of a predefined infix operator.
pub fn fixity(op: &str) -> Option<(u8, Assoc)> {
    Some(match op {
        ":" | "++" | "=:=" => (5, Assoc::Right),
        "+" | "-" => (6, Assoc::Left),
        "*" | "div" | "mod" => (7, Assoc::Left),
        "<" | "<=" | "==" | "/=" | ">=" | ">" => (4, Assoc::Non),
        _ => return None,
    })
}

/// Expression-shaped syntax shared by left-hand sides, patterns and
/// right-hand sides before desugaring.
#[derive(Debug, Clone)]
enum Raw {
    Var(Arc<str>, SourceRange),
    Con(Arc<str>, SourceRange),
    Int(i64, SourceRange),
    Text(Arc<str>, SourceRange),
    Wildcard(SourceRange),
    Hole(SourceRange),
    OpRef(Arc<str>, SourceRange),
    App(Box<Raw>, Box<Raw>),
    Infix {
        op: Arc<str>,
        op_range: SourceRange,
        lhs: Box<Raw>,
        rhs: Box<Raw>,
    },
    List(Vec<Raw>, SourceRange),
    Lambda(Vec<Raw>, Box<Raw>, SourceRange),
}

impl Raw {
    fn range(&self) -> SourceRange {
        match self {
            Raw::Var(_, r)
            | Raw::Con(_, r)
            | Raw::Int(_, r)
            | Raw::Text(_, r)
            | Raw::Wildcard(r)
            | Raw::Hole(r)
            | Raw::OpRef(_, r)
            | Raw::List(_, r)
            | Raw::Lambda(_, _, r) => r.clone(),
            Raw::App(f, x) => f.range().join(&x.range()),
            Raw::Infix { lhs, rhs, .. } => lhs.range().join(&rhs.range()),
        }
    }

    /// Head and arguments of an application spine.
    fn spine(&self) -> (&Raw, Vec<&Raw>) {
        let mut args = Vec::new();
        let mut head = self;
        while let Raw::App(f, x) = head {
            args.push(&**x);
            head = f;
        }
        args.reverse();
        (head, args)
    }
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    allow_holes: bool,
    end: SourceRange,
}

type PResult<T> = Result<T, Diagnostic>;

impl Parser {
    fn new(module: &str, text: &str, allow_holes: bool) -> PResult<Parser> {
        let tokens = tokenize(module, text)?;
        let module: Arc<str> = Arc::from(module);
        let end = tokens.last().map_or_else(
            || SourceRange::new(module.clone(), (1, 1), (1, 1)),
            |t| {
                let r = &t.range;
                SourceRange::new(module.clone(), (r.end_line, r.end_col), (r.end_line, r.end_col))
            },
        );
        Ok(Parser {
            tokens,
            pos: 0,
            allow_holes,
            end,
        })
    }

    fn peek(&self) -> Option<&TokenKind> {
        self.tokens.get(self.pos).map(|t| &t.kind)
    }

    fn peek_at(&self, ahead: usize) -> Option<&TokenKind> {
        self.tokens.get(self.pos + ahead).map(|t| &t.kind)
    }

    fn here(&self) -> SourceRange {
        self.tokens
            .get(self.pos)
            .map_or_else(|| self.end.clone(), |t| t.range.clone())
    }

    fn next(&mut self) -> Option<Token> {
        let tok = self.tokens.get(self.pos).cloned();
        self.pos += 1;
        tok
    }

    fn at_end(&self) -> bool {
        self.pos >= self.tokens.len()
    }

    fn error<T>(&self, message: impl Into<String>) -> PResult<T> {
        Err(Diagnostic::at(&self.here(), message))
    }

    fn describe(&self) -> String {
        match self.peek() {
            None => "end of input".into(),
            Some(kind) => format!("`{}`", token_text(kind)),
        }
    }

    fn expect(&mut self, kind: TokenKind, what: &str) -> PResult<SourceRange> {
        if self.peek() == Some(&kind) {
            Ok(self.next().unwrap().range)
        } else {
            self.error(format!("expected {what}, found {}", self.describe()))
        }
    }

    fn con_id(&mut self, what: &str) -> PResult<String> {
        match self.peek() {
            Some(TokenKind::ConId(name)) => {
                let name = name.clone();
                self.pos += 1;
                Ok(name)
            }
            _ => self.error(format!("expected {what}, found {}", self.describe())),
        }
    }

    fn starts_atom(&self) -> bool {
        match self.peek() {
            Some(
                TokenKind::Ident(_)
                | TokenKind::ConId(_)
                | TokenKind::Int(_)
                | TokenKind::Text(_)
                | TokenKind::Underscore
                | TokenKind::LParen
                | TokenKind::LBracket,
            ) => true,
            Some(TokenKind::Ellipsis) => self.allow_holes,
            _ => false,
        }
    }

    fn infix(&mut self, min_prec: u8) -> PResult<Raw> {
        let mut lhs = self.operand()?;
        loop {
            let op = match self.peek() {
                Some(TokenKind::Op(op)) => op.clone(),
                _ => break,
            };
            let (prec, assoc) = fixity(&op).expect("lexer only yields known operators");
            if prec < min_prec {
                break;
            }
            let op_range = self.next().unwrap().range;
            let rhs = match assoc {
                Assoc::Right => self.infix(prec)?,
                Assoc::Left | Assoc::Non => self.infix(prec + 1)?,
            };
            lhs = Raw::Infix {
                op: Arc::from(op.as_str()),
                op_range,
                lhs: Box::new(lhs),
                rhs: Box::new(rhs),
            };
            if assoc == Assoc::Non {
                if let Some(TokenKind::Op(next)) = self.peek() {
                    if fixity(next).map(|f| f.0) == Some(prec) {
                        return self.error(format!(
                            "non-associative operator `{next}` cannot follow `{op}` without parentheses"
                        ));
                    }
                }
            }
        }
        Ok(lhs)
    }

    fn operand(&mut self) -> PResult<Raw> {
        if self.peek() == Some(&TokenKind::Backslash) {
            let start = self.next().unwrap().range;
            let mut params = Vec::new();
            while self.peek() != Some(&TokenKind::Arrow) {
                if !self.starts_atom() {
                    return self.error(format!(
                        "expected lambda parameter or `->`, found {}",
                        self.describe()
                    ));
                }
                params.push(self.atom()?);
            }
            if params.is_empty() {
                return self.error("lambda needs at least one parameter");
            }
            self.next();
            let body = self.infix(0)?;
            let range = start.join(&body.range());
            return Ok(Raw::Lambda(params, Box::new(body), range));
        }
        if !self.starts_atom() {
            return self.error(format!("expected expression, found {}", self.describe()));
        }
        let mut expr = self.atom()?;
        while self.starts_atom() {
            let arg = self.atom()?;
            expr = Raw::App(Box::new(expr), Box::new(arg));
        }
        Ok(expr)
    }

    fn atom(&mut self) -> PResult<Raw> {
        let tok = self.next().expect("caller checked starts_atom");
        let r = tok.range;
        Ok(match tok.kind {
            TokenKind::Ident(name) => Raw::Var(Arc::from(name.as_str()), r),
            TokenKind::ConId(name) => Raw::Con(Arc::from(name.as_str()), r),
            TokenKind::Int(n) => Raw::Int(n, r),
            TokenKind::Text(s) => Raw::Text(Arc::from(s.as_str()), r),
            TokenKind::Underscore => Raw::Wildcard(r),
            TokenKind::Ellipsis => Raw::Hole(r),
            TokenKind::LParen => {
                if let (Some(TokenKind::Op(op)), Some(TokenKind::RParen)) =
                    (self.peek(), self.peek_at(1))
                {
                    let op = Arc::from(op.as_str());
                    self.next();
                    let close = self.next().unwrap().range;
                    return Ok(Raw::OpRef(op, r.join(&close)));
                }
                if self.peek() == Some(&TokenKind::RParen) {
                    return self.error("empty parentheses");
                }
                let inner = self.infix(0)?;
                self.expect(TokenKind::RParen, "`)`")?;
                inner
            }
            TokenKind::LBracket => {
                let mut items = Vec::new();
                if self.peek() != Some(&TokenKind::RBracket) {
                    loop {
                        items.push(self.infix(0)?);
                        if self.peek() == Some(&TokenKind::Comma) {
                            self.next();
                        } else {
                            break;
                        }
                    }
                }
                let close = self.expect(TokenKind::RBracket, "`,` or `]`")?;
                Raw::List(items, r.join(&close))
            }
            _ => unreachable!("starts_atom admits only atom tokens"),
        })
    }

    fn header(&mut self, name: &str) -> PResult<(Option<Vec<String>>, Vec<String>)> {
        let mut exports = None;
        if self.peek() == Some(&TokenKind::Module) {
            self.next();
            let here = self.here();
            let declared = self.con_id("module name")?;
            if declared != name {
                return Err(Diagnostic::at(
                    &here,
                    format!("module is named `{declared}` but was loaded as `{name}`"),
                ));
            }
            if self.peek() == Some(&TokenKind::LParen) {
                self.next();
                let mut names = Vec::new();
                while self.peek() != Some(&TokenKind::RParen) {
                    match self.next().map(|t| t.kind) {
                        Some(TokenKind::Ident(n)) => names.push(n),
                        Some(TokenKind::LParen) => match self.next().map(|t| t.kind) {
                            Some(TokenKind::Op(op)) => {
                                names.push(op);
                                self.expect(TokenKind::RParen, "`)`")?;
                            }
                            _ => {
                                self.pos -= 1;
                                return self.error("expected operator in export list");
                            }
                        },
                        _ => {
                            self.pos -= 1;
                            return self.error(format!(
                                "expected exported name, found {}",
                                self.describe()
                            ));
                        }
                    }
                    if self.peek() == Some(&TokenKind::Comma) {
                        self.next();
                    } else if self.peek() != Some(&TokenKind::RParen) {
                        return self.error(format!("expected `,` or `)`, found {}", self.describe()));
                    }
                }
                self.next();
                exports = Some(names);
            }
            self.expect(TokenKind::Where, "`where`")?;
        }
        let mut imports = Vec::new();
        while self.peek() == Some(&TokenKind::Import) {
            self.next();
            imports.push(self.con_id("module name")?);
            self.expect(TokenKind::Semi, "`;`")?;
        }
        Ok((exports, imports))
    }

    fn declaration(&mut self) -> PResult<Declaration> {
        let start = self.here();
        let lhs = self.infix(0)?;
        self.expect(TokenKind::Equals, "`=`")?;
        let rhs = self.infix(0)?;
        let end = self.expect(TokenKind::Semi, "`;`")?;
        let (name, pattern_raws) = match &lhs {
            Raw::Infix { op, lhs: l, rhs: r, .. } if &**op != ":" => {
                (op.clone(), vec![&**l, &**r])
            }
            _ => match lhs.spine() {
                (Raw::Var(name, _), args) => (name.clone(), args),
                (Raw::OpRef(op, _), args) if &**op != ":" => (op.clone(), args),
                _ => {
                    return Err(Diagnostic::at(
                        &lhs.range(),
                        "left-hand side must be a function name applied to patterns",
                    ))
                }
            },
        };
        let patterns = pattern_raws
            .into_iter()
            .map(to_pattern)
            .collect::<PResult<Vec<_>>>()?;
        check_distinct(&patterns, &lhs.range())?;
        let rhs = self.to_expression(rhs)?;
        Ok(Declaration {
            name,
            patterns,
            rhs,
            range: start.join(&end),
        })
    }

    fn skip_past_semi(&mut self) {
        while let Some(kind) = self.peek() {
            let semi = *kind == TokenKind::Semi;
            self.pos += 1;
            if semi {
                break;
            }
        }
    }

    fn to_expression(&self, raw: Raw) -> PResult<Expression> {
        Ok(match raw {
            Raw::Var(name, range) => Expression::Ident { name, range },
            Raw::Con(name, range) => Expression::Constructor { name, range },
            Raw::Int(n, _) => Expression::Int(n),
            Raw::Text(s, _) => Expression::Text(s),
            Raw::Wildcard(r) => {
                return Err(Diagnostic::at(&r, "`_` may only appear in patterns"))
            }
            Raw::Hole(range) => Expression::Ident {
                name: Arc::from("..."),
                range,
            },
            Raw::OpRef(op, range) if &*op == ":" => Expression::Constructor { name: op, range },
            Raw::OpRef(op, range) => Expression::Ident { name: op, range },
            Raw::App(f, x) => Expression::Apply(
                Box::new(self.to_expression(*f)?),
                Box::new(self.to_expression(*x)?),
            ),
            Raw::Infix {
                op,
                op_range,
                lhs,
                rhs,
            } => {
                let fun = if &*op == ":" {
                    Expression::Constructor {
                        name: op,
                        range: op_range,
                    }
                } else {
                    Expression::Ident {
                        name: op,
                        range: op_range,
                    }
                };
                Expression::Apply(
                    Box::new(Expression::Apply(
                        Box::new(fun),
                        Box::new(self.to_expression(*lhs)?),
                    )),
                    Box::new(self.to_expression(*rhs)?),
                )
            }
            Raw::List(items, range) => {
                let mut list = Expression::Constructor {
                    name: Arc::from("[]"),
                    range: range.clone(),
                };
                for item in items.into_iter().rev() {
                    let cons = Expression::Constructor {
                        name: Arc::from(":"),
                        range: range.clone(),
                    };
                    list = Expression::Apply(
                        Box::new(Expression::Apply(
                            Box::new(cons),
                            Box::new(self.to_expression(item)?),
                        )),
                        Box::new(list),
                    );
                }
                list
            }
            Raw::Lambda(params, body, range) => {
                let params = params
                    .iter()
                    .map(to_pattern)
                    .collect::<PResult<Vec<_>>>()?;
                check_distinct(&params, &range)?;
                Expression::Lambda {
                    params,
                    body: Box::new(self.to_expression(*body)?),
                    range,
                }
            }
        })
    }
}

fn to_pattern(raw: &Raw) -> PResult<Pattern> {
    Ok(match raw {
        Raw::Var(name, _) => Pattern::Var(name.clone()),
        Raw::Wildcard(_) => Pattern::Wildcard,
        Raw::Int(n, _) => Pattern::Int(*n),
        Raw::Con(name, _) => Pattern::Constructor(name.clone(), Vec::new()),
        Raw::App(..) => match raw.spine() {
            (Raw::Con(name, _), args) => Pattern::Constructor(
                name.clone(),
                args.into_iter().map(to_pattern).collect::<PResult<_>>()?,
            ),
            _ => {
                return Err(Diagnostic::at(
                    &raw.range(),
                    "only constructors may be applied in patterns",
                ))
            }
        },
        Raw::Infix { op, lhs, rhs, .. } if &**op == ":" => {
            Pattern::Constructor(op.clone(), vec![to_pattern(lhs)?, to_pattern(rhs)?])
        }
        Raw::List(items, _) => {
            let mut list = Pattern::Constructor(Arc::from("[]"), Vec::new());
            for item in items.iter().rev() {
                list = Pattern::Constructor(Arc::from(":"), vec![to_pattern(item)?, list]);
            }
            list
        }
        Raw::Infix { op, op_range, .. } => {
            return Err(Diagnostic::at(
                op_range,
                format!("operator `{op}` cannot appear in a pattern"),
            ))
        }
        Raw::Text(_, r) => return Err(Diagnostic::at(r, "text literals cannot be matched")),
        Raw::Lambda(_, _, r) | Raw::Hole(r) | Raw::OpRef(_, r) => {
            return Err(Diagnostic::at(r, "invalid pattern"))
        }
    })
}

fn check_distinct(patterns: &[Pattern], range: &SourceRange) -> PResult<()> {
    let mut vars = Vec::new();
    patterns.iter().for_each(|p| p.variables(&mut vars));
    let mut seen = HashSet::new();
    for var in vars {
        if !seen.insert(var) {
            return Err(Diagnostic::at(
                range,
                format!("variable `{var}` is bound more than once"),
            ));
        }
    }
    Ok(())
}

fn token_text(kind: &TokenKind) -> String {
    match kind {
        TokenKind::Ident(s) | TokenKind::ConId(s) => s.clone(),
        TokenKind::Op(s) if s == "div" || s == "mod" => format!("`{s}`"),
        TokenKind::Op(s) => s.clone(),
        TokenKind::Int(n) => n.to_string(),
        TokenKind::Text(s) => format!("{s:?}"),
        TokenKind::Underscore => "_".into(),
        TokenKind::Equals => "=".into(),
        TokenKind::Semi => ";".into(),
        TokenKind::Comma => ",".into(),
        TokenKind::LParen => "(".into(),
        TokenKind::RParen => ")".into(),
        TokenKind::LBracket => "[".into(),
        TokenKind::RBracket => "]".into(),
        TokenKind::Backslash => "\\".into(),
        TokenKind::Arrow => "->".into(),
        TokenKind::Ellipsis => "...".into(),
        TokenKind::Module => "module".into(),
        TokenKind::Where => "where".into(),
        TokenKind::Import => "import".into(),
    }
}

/// Parses one module. All syntax errors found are reported; nothing is
/// returned unless the whole text is valid.
pub fn parse_module(name: &str, text: &str) -> Result<ModuleAst, Vec<Diagnostic>> {
    let mut parser = Parser::new(name, text, false).map_err(|d| vec![d])?;
    let (exports, imports) = parser.header(name).map_err(|d| vec![d])?;
    let mut declarations = Vec::new();
    let mut diagnostics = Vec::new();
    while !parser.at_end() {
        if parser.peek() == Some(&TokenKind::Import) {
            diagnostics.push(Diagnostic::at(
                &parser.here(),
                "imports must precede all declarations",
            ));
            parser.skip_past_semi();
            continue;
        }
        match parser.declaration() {
            Ok(decl) => declarations.push(decl),
            Err(d) => {
                diagnostics.push(d);
                parser.skip_past_semi();
            }
        }
    }
    if !diagnostics.is_empty() {
        return Err(diagnostics);
    }
    Ok(ModuleAst {
        name: name.to_string(),
        exports,
        imports,
        declarations,
        editable_from_line: marker_line(text).map(|line| line + 1),
    })
}

/// Parses a standalone expression.
pub fn parse_expression(module: &str, text: &str) -> Result<Expression, Diagnostic> {
    parse_expr_with(module, text, false)
}

/// Parses the output of [`super::render_term`], accepting `...` where the
/// rendering was truncated. Truncated nodes come back as identifiers named
/// `...`.
pub fn parse_rendered_term(text: &str) -> Result<Expression, Diagnostic> {
    parse_expr_with("<term>", text, true)
}

fn parse_expr_with(module: &str, text: &str, allow_holes: bool) -> Result<Expression, Diagnostic> {
    let mut parser = Parser::new(module, text, allow_holes)?;
    let raw = parser.infix(0)?;
    if !parser.at_end() {
        return parser.error(format!("unexpected {}", parser.describe()));
    }
    parser.to_expression(raw)
}
