//! Recursive-descent parser. Grammar, loosest binding first:
//!
//! ```text
//! sum     := product (('+' | '-') product)*
//! product := unary (('*' | '/') unary)*
//! unary   := '-' unary | power
//! power   := atom ('^' unary)?
//! atom    := number | ident | ident '(' args ')' | '(' sum ')'
//!          | 'INT' '(' sum ')' | 'EVAL' '(' int ',' '[' num ',' num ']' ')'
//! ```

use thiserror::Error;

use super::{BinOp, Expr, Func, Var};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseErrorKind {
    #[error("unexpected character `{0}`")]
    UnexpectedChar(char),
    #[error("malformed number `{0}`")]
    BadNumber(String),
    #[error("unexpected end of input")]
    UnexpectedEnd,
    #[error("expected {expected}, found `{found}`")]
    Unexpected { expected: &'static str, found: String },
    #[error("unbalanced parentheses")]
    Unbalanced,
    #[error("unknown identifier `{0}`")]
    UnknownIdentifier(String),
    #[error("`{func}` takes {expected} argument(s), got {found}")]
    Arity {
        func: String,
        expected: usize,
        found: usize,
    },
    #[error("component index {0} out of range")]
    BadComponent(usize),
}

/// Parse failure with the byte offset where it was detected.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("{kind} at position {position}")]
pub struct ParseError {
    pub kind: ParseErrorKind,
    pub position: usize,
}

/// Which identifiers and atoms an expression may use.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParseContext {
    /// Number of state components; `None` admits any `uK`.
    pub components: Option<usize>,
    pub allow_x: bool,
    pub allow_u: bool,
    pub allow_w: bool,
    /// Enables `INT(...)` / `EVAL(...)` and forbids bare state variables.
    pub functional: bool,
}

impl ParseContext {
    /// Position-only expressions (operator coefficients, boundary data).
    pub fn coefficient() -> Self {
        Self {
            components: Some(0),
            allow_x: true,
            allow_u: false,
            allow_w: false,
            functional: false,
        }
    }

    /// Numeric constants only.
    pub fn constant() -> Self {
        Self {
            allow_x: false,
            ..Self::coefficient()
        }
    }

    /// Nonlinearity `f(x, u, w)`.
    pub fn pointwise(n: usize) -> Self {
        Self {
            components: Some(n),
            allow_x: true,
            allow_u: true,
            allow_w: true,
            functional: false,
        }
    }

    /// Nonlinearity without a functional argument.
    pub fn pointwise_without_w(n: usize) -> Self {
        Self {
            allow_w: false,
            ..Self::pointwise(n)
        }
    }

    /// Integrand of an `INT(...)` atom.
    pub fn integrand(n: usize) -> Self {
        Self {
            allow_w: false,
            ..Self::pointwise(n)
        }
    }

    pub fn functional(n: usize) -> Self {
        Self {
            components: Some(n),
            allow_x: false,
            allow_u: false,
            allow_w: false,
            functional: true,
        }
    }

    /// Accepts `x1`, `x2`, any `uK` and `w`; no functional atoms.
    pub fn permissive() -> Self {
        Self {
            components: None,
            ..Self::pointwise(0)
        }
    }
}

/// Parses with [`ParseContext::permissive`].
pub fn parse_expression(text: &str) -> Result<Expr, ParseError> {
    parse_with(text, ParseContext::permissive())
}

pub fn parse_with(text: &str, ctx: ParseContext) -> Result<Expr, ParseError> {
    let tokens = lex(text)?;
    let mut p = Parser {
        tokens,
        pos: 0,
        ctx,
    };
    let e = p.sum()?;
    let t = p.peek();
    match t.tok {
        Tok::End => Ok(e),
        Tok::RParen => Err(ParseError {
            kind: ParseErrorKind::Unbalanced,
            position: t.pos,
        }),
        _ => Err(p.unexpected("operator or end of input")),
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    LBracket,
    RBracket,
    Comma,
    End,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Num(v) => v.to_string(),
            Tok::Ident(s) => s.clone(),
            Tok::Plus => "+".into(),
            Tok::Minus => "-".into(),
            Tok::Star => "*".into(),
            Tok::Slash => "/".into(),
            Tok::Caret => "^".into(),
            Tok::LParen => "(".into(),
            Tok::RParen => ")".into(),
            Tok::LBracket => "[".into(),
            Tok::RBracket => "]".into(),
            Tok::Comma => ",".into(),
            Tok::End => "end of input".into(),
        }
    }
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    pos: usize,
}

fn lex(text: &str) -> Result<Vec<Token>, ParseError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        let start = i;
        let single = match c {
            b' ' | b'\t' | b'\n' | b'\r' => {
                i += 1;
                continue;
            }
            b'+' => Some(Tok::Plus),
            b'-' => Some(Tok::Minus),
            b'*' => Some(Tok::Star),
            b'/' => Some(Tok::Slash),
            b'^' => Some(Tok::Caret),
            b'(' => Some(Tok::LParen),
            b')' => Some(Tok::RParen),
            b'[' => Some(Tok::LBracket),
            b']' => Some(Tok::RBracket),
            b',' => Some(Tok::Comma),
            _ => None,
        };
        if let Some(tok) = single {
            out.push(Token { tok, pos: start });
            i += 1;
            continue;
        }
        if c.is_ascii_digit() || c == b'.' {
            while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                i += 1;
            }
            if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                let mut j = i + 1;
                if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                    j += 1;
                }
                if j < bytes.len() && bytes[j].is_ascii_digit() {
                    i = j;
                    while i < bytes.len() && bytes[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let s = &text[start..i];
            let v: f64 = s.parse().map_err(|_| ParseError {
                kind: ParseErrorKind::BadNumber(s.to_string()),
                position: start,
            })?;
            out.push(Token {
                tok: Tok::Num(v),
                pos: start,
            });
            continue;
        }
        if c.is_ascii_alphabetic() || c == b'_' {
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push(Token {
                tok: Tok::Ident(text[start..i].to_string()),
                pos: start,
            });
            continue;
        }
        let ch = text[start..].chars().next().unwrap_or('?');
        return Err(ParseError {
            kind: ParseErrorKind::UnexpectedChar(ch),
            position: start,
        });
    }
    out.push(Token {
        tok: Tok::End,
        pos: text.len(),
    });
    Ok(out)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    ctx: ParseContext,
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.tokens[self.pos]
    }

    fn next(&mut self) -> Token {
        let t = self.tokens[self.pos].clone();
        if t.tok != Tok::End {
            self.pos += 1;
        }
        t
    }

    fn unexpected(&self, expected: &'static str) -> ParseError {
        let t = self.peek();
        let kind = if t.tok == Tok::End {
            ParseErrorKind::UnexpectedEnd
        } else {
            ParseErrorKind::Unexpected {
                expected,
                found: t.tok.describe(),
            }
        };
        ParseError {
            kind,
            position: t.pos,
        }
    }

    fn expect(&mut self, tok: Tok, expected: &'static str) -> Result<Token, ParseError> {
        if self.peek().tok == tok {
            Ok(self.next())
        } else {
            Err(self.unexpected(expected))
        }
    }

    fn close_paren(&mut self) -> Result<(), ParseError> {
        match self.peek().tok {
            Tok::RParen => {
                self.next();
                Ok(())
            }
            Tok::End => Err(ParseError {
                kind: ParseErrorKind::Unbalanced,
                position: self.peek().pos,
            }),
            _ => Err(self.unexpected("`)`")),
        }
    }

    fn sum(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.product()?;
        loop {
            let op = match self.peek().tok {
                Tok::Plus => BinOp::Add,
                Tok::Minus => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.next();
            let rhs = self.product()?;
            lhs = Expr::binary(op, lhs, rhs);
        }
    }

    fn product(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek().tok {
                Tok::Star => BinOp::Mul,
                Tok::Slash => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.next();
            let rhs = self.unary()?;
            lhs = Expr::binary(op, lhs, rhs);
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if self.peek().tok == Tok::Minus {
            self.next();
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.atom()?;
        if self.peek().tok == Tok::Caret {
            self.next();
            let exp = self.unary()?;
            return Ok(Expr::binary(BinOp::Pow, base, exp));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        let t = self.peek().clone();
        match t.tok {
            Tok::Num(v) => {
                self.next();
                Ok(Expr::Num(v))
            }
            Tok::LParen => {
                self.next();
                let e = self.sum()?;
                self.close_paren()?;
                Ok(e)
            }
            Tok::Ident(name) => {
                self.next();
                self.identifier(&name, t.pos)
            }
            Tok::RParen => Err(ParseError {
                kind: ParseErrorKind::Unbalanced,
                position: t.pos,
            }),
            _ => Err(self.unexpected("number, variable, function or `(`")),
        }
    }

    fn unknown(name: &str, pos: usize) -> ParseError {
        ParseError {
            kind: ParseErrorKind::UnknownIdentifier(name.to_string()),
            position: pos,
        }
    }

    fn identifier(&mut self, name: &str, pos: usize) -> Result<Expr, ParseError> {
        if let Some(func) = Func::from_name(name) {
            return self.call(func, pos);
        }
        match name {
            "pi" => return Ok(Expr::Num(std::f64::consts::PI)),
            "INT" if self.ctx.functional => {
                self.expect(Tok::LParen, "`(`")?;
                let saved = self.ctx;
                self.ctx = ParseContext::integrand(saved.components.unwrap_or(0));
                self.ctx.components = saved.components;
                let inner = self.sum();
                self.ctx = saved;
                let inner = inner?;
                self.close_paren()?;
                return Ok(Expr::Integral(Box::new(inner)));
            }
            "EVAL" if self.ctx.functional => return self.point_eval(),
            "x1" if self.ctx.allow_x => return Ok(Expr::Var(Var::X1)),
            "x2" if self.ctx.allow_x => return Ok(Expr::Var(Var::X2)),
            "w" if self.ctx.allow_w => return Ok(Expr::Var(Var::W)),
            _ => {}
        }
        if let Some(k) = name.strip_prefix('u').and_then(|d| d.parse::<usize>().ok()) {
            let in_range = k >= 1 && self.ctx.components.is_none_or(|n| k <= n);
            if self.ctx.allow_u && in_range && !name[1..].starts_with('0') {
                return Ok(Expr::Var(Var::U(k - 1)));
            }
        }
        Err(Self::unknown(name, pos))
    }

    fn call(&mut self, func: Func, pos: usize) -> Result<Expr, ParseError> {
        self.expect(Tok::LParen, "`(` after function name")?;
        let mut args = vec![self.sum()?];
        while self.peek().tok == Tok::Comma {
            self.next();
            args.push(self.sum()?);
        }
        self.close_paren()?;
        if args.len() != func.arity() {
            return Err(ParseError {
                kind: ParseErrorKind::Arity {
                    func: func.name().to_string(),
                    expected: func.arity(),
                    found: args.len(),
                },
                position: pos,
            });
        }
        Ok(Expr::Call(func, args))
    }

    fn signed_number(&mut self) -> Result<f64, ParseError> {
        let neg = if self.peek().tok == Tok::Minus {
            self.next();
            true
        } else {
            false
        };
        match self.peek().tok {
            Tok::Num(v) => {
                self.next();
                Ok(if neg { -v } else { v })
            }
            Tok::Ident(ref s) if s == "pi" => {
                self.next();
                let v = std::f64::consts::PI;
                Ok(if neg { -v } else { v })
            }
            _ => Err(self.unexpected("number")),
        }
    }

    fn point_eval(&mut self) -> Result<Expr, ParseError> {
        self.expect(Tok::LParen, "`(`")?;
        let t = self.peek().clone();
        let k = match t.tok {
            Tok::Num(v) if v.fract() == 0.0 && v >= 1.0 => {
                self.next();
                v as usize
            }
            Tok::Num(v) => {
                return Err(ParseError {
                    kind: ParseErrorKind::BadComponent(v.max(0.0) as usize),
                    position: t.pos,
                })
            }
            _ => return Err(self.unexpected("component index")),
        };
        if self.ctx.components.is_some_and(|n| k > n) {
            return Err(ParseError {
                kind: ParseErrorKind::BadComponent(k),
                position: t.pos,
            });
        }
        self.expect(Tok::Comma, "`,`")?;
        self.expect(Tok::LBracket, "`[`")?;
        let p1 = self.signed_number()?;
        self.expect(Tok::Comma, "`,`")?;
        let p2 = self.signed_number()?;
        self.expect(Tok::RBracket, "`]`")?;
        self.close_paren()?;
        Ok(Expr::PointEval {
            component: k - 1,
            point: [p1, p2],
        })
    }
}
