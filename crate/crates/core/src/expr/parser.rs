use std::fmt;

use super::ast::{BinaryOp, Constant, Expr, Func, Span, UnaryOp};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParseErrorKind {
    Lexical,
    Syntax,
    Arity,
}

impl ParseErrorKind {
    pub fn label(self) -> &'static str {
        match self {
            ParseErrorKind::Lexical => "lexical",
            ParseErrorKind::Syntax => "syntax",
            ParseErrorKind::Arity => "arity",
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{} error at {}: {}", .kind.label(), .span, .message)]
pub struct ParseError {
    pub kind: ParseErrorKind,
    pub message: String,
    pub span: Span,
}

impl ParseError {
    fn new(kind: ParseErrorKind, span: Span, message: impl Into<String>) -> Self {
        ParseError {
            kind,
            message: message.into(),
            span,
        }
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
    Lt,
    Le,
    Gt,
    Ge,
    EqEq,
    Ne,
    LParen,
    RParen,
    Comma,
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Num(v) => write!(f, "number {v}"),
            Tok::Ident(s) => write!(f, "'{s}'"),
            Tok::Plus => f.write_str("'+'"),
            Tok::Minus => f.write_str("'-'"),
            Tok::Star => f.write_str("'*'"),
            Tok::Slash => f.write_str("'/'"),
            Tok::Caret => f.write_str("'^'"),
            Tok::Lt => f.write_str("'<'"),
            Tok::Le => f.write_str("'<='"),
            Tok::Gt => f.write_str("'>'"),
            Tok::Ge => f.write_str("'>='"),
            Tok::EqEq => f.write_str("'=='"),
            Tok::Ne => f.write_str("'!='"),
            Tok::LParen => f.write_str("'('"),
            Tok::RParen => f.write_str("')'"),
            Tok::Comma => f.write_str("','"),
            Tok::Eof => f.write_str("end of input"),
        }
    }
}

fn is_ident_start(c: u8) -> bool {
    c.is_ascii_alphabetic()
}

fn is_ident_continue(c: u8) -> bool {
    c.is_ascii_alphanumeric() || c == b'_'
}

fn lex(src: &str) -> Result<Vec<(Tok, Span)>, ParseError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        let start = i;
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        if c.is_ascii_digit() || (c == b'.' && bytes.get(i + 1).is_some_and(u8::is_ascii_digit)) {
            while i < bytes.len() && bytes[i].is_ascii_digit() {
                i += 1;
            }
            if i < bytes.len() && bytes[i] == b'.' {
                i += 1;
                if !bytes.get(i).is_some_and(u8::is_ascii_digit) {
                    return Err(ParseError::new(
                        ParseErrorKind::Lexical,
                        Span::new(start, i),
                        "expected digits after decimal point",
                    ));
                }
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
            }
            // exponent only when digits follow, so `2e` stays number + identifier
            if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                let mut j = i + 1;
                if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                    j += 1;
                }
                if bytes.get(j).is_some_and(u8::is_ascii_digit) {
                    i = j;
                    while i < bytes.len() && bytes[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let text = &src[start..i];
            let v: f64 = text.parse().map_err(|_| {
                ParseError::new(
                    ParseErrorKind::Lexical,
                    Span::new(start, i),
                    format!("invalid number '{text}'"),
                )
            })?;
            if !v.is_finite() {
                return Err(ParseError::new(
                    ParseErrorKind::Lexical,
                    Span::new(start, i),
                    format!("number '{text}' is out of range"),
                ));
            }
            out.push((Tok::Num(v), Span::new(start, i)));
            continue;
        }
        if is_ident_start(c) {
            while i < bytes.len() && is_ident_continue(bytes[i]) {
                i += 1;
            }
            // qualified member such as `p.x` for drag sub-variables
            if i + 1 < bytes.len() && bytes[i] == b'.' && is_ident_start(bytes[i + 1]) {
                i += 1;
                while i < bytes.len() && is_ident_continue(bytes[i]) {
                    i += 1;
                }
            }
            out.push((Tok::Ident(src[start..i].to_string()), Span::new(start, i)));
            continue;
        }
        let two = bytes.get(i + 1).copied();
        let (tok, len) = match (c, two) {
            (b'<', Some(b'=')) => (Tok::Le, 2),
            (b'>', Some(b'=')) => (Tok::Ge, 2),
            (b'=', Some(b'=')) => (Tok::EqEq, 2),
            (b'!', Some(b'=')) => (Tok::Ne, 2),
            (b'<', _) => (Tok::Lt, 1),
            (b'>', _) => (Tok::Gt, 1),
            (b'+', _) => (Tok::Plus, 1),
            (b'-', _) => (Tok::Minus, 1),
            (b'*', _) => (Tok::Star, 1),
            (b'/', _) => (Tok::Slash, 1),
            (b'^', _) => (Tok::Caret, 1),
            (b'(', _) => (Tok::LParen, 1),
            (b')', _) => (Tok::RParen, 1),
            (b',', _) => (Tok::Comma, 1),
            _ => {
                let ch = src[i..].chars().next().unwrap_or('?');
                let msg = match ch {
                    '=' => "unexpected '='; use '==' for comparison".to_string(),
                    '!' => "unexpected '!'; use 'not' for negation".to_string(),
                    '&' | '|' => format!("unexpected '{ch}'; use 'and' / 'or'"),
                    _ => format!("unexpected character '{ch}'"),
                };
                return Err(ParseError::new(
                    ParseErrorKind::Lexical,
                    Span::new(i, i + ch.len_utf8()),
                    msg,
                ));
            }
        };
        i += len;
        out.push((tok, Span::new(start, i)));
    }
    out.push((Tok::Eof, Span::new(src.len(), src.len())));
    Ok(out)
}

struct Parser {
    toks: Vec<(Tok, Span)>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn span(&self) -> Span {
        self.toks[self.pos].1
    }

    fn bump(&mut self) -> (Tok, Span) {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn is_word(&self, w: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == w)
    }

    fn syntax(&self, msg: impl Into<String>) -> ParseError {
        ParseError::new(ParseErrorKind::Syntax, self.span(), msg)
    }

    fn parse_or(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.parse_and()?;
        while self.is_word("or") {
            self.bump();
            let rhs = self.parse_and()?;
            lhs = Expr::binary(BinaryOp::Or, lhs, rhs);
        }
        Ok(lhs)
    }

    fn parse_and(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.parse_cmp()?;
        while self.is_word("and") {
            self.bump();
            let rhs = self.parse_cmp()?;
            lhs = Expr::binary(BinaryOp::And, lhs, rhs);
        }
        Ok(lhs)
    }

    fn cmp_op(&self) -> Option<BinaryOp> {
        Some(match self.peek() {
            Tok::Lt => BinaryOp::Lt,
            Tok::Le => BinaryOp::Le,
            Tok::Gt => BinaryOp::Gt,
            Tok::Ge => BinaryOp::Ge,
            Tok::EqEq => BinaryOp::Eq,
            Tok::Ne => BinaryOp::Ne,
            _ => return None,
        })
    }

    fn parse_cmp(&mut self) -> Result<Expr, ParseError> {
        let lhs = self.parse_add()?;
        let Some(op) = self.cmp_op() else {
            return Ok(lhs);
        };
        self.bump();
        let rhs = self.parse_add()?;
        if self.cmp_op().is_some() {
            return Err(self.syntax("chained comparison; combine comparisons with 'and'"));
        }
        Ok(Expr::binary(op, lhs, rhs))
    }

    fn parse_add(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.parse_mul()?;
        loop {
            let op = match self.peek() {
                Tok::Plus => BinaryOp::Add,
                Tok::Minus => BinaryOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.parse_mul()?;
            lhs = Expr::binary(op, lhs, rhs);
        }
    }

    fn parse_mul(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.parse_unary()?;
        loop {
            let op = match self.peek() {
                Tok::Star => BinaryOp::Mul,
                Tok::Slash => BinaryOp::Div,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.parse_unary()?;
            lhs = Expr::binary(op, lhs, rhs);
        }
    }

    fn parse_unary(&mut self) -> Result<Expr, ParseError> {
        if matches!(self.peek(), Tok::Minus) {
            self.bump();
            return Ok(Expr::unary(UnaryOp::Neg, self.parse_unary()?));
        }
        if self.is_word("not") {
            self.bump();
            return Ok(Expr::unary(UnaryOp::Not, self.parse_unary()?));
        }
        self.parse_pow()
    }

    fn parse_pow(&mut self) -> Result<Expr, ParseError> {
        let base = self.parse_atom()?;
        if matches!(self.peek(), Tok::Caret) {
            self.bump();
            // right-associative; the exponent may carry its own sign
            let exp = self.parse_unary()?;
            return Ok(Expr::binary(BinaryOp::Pow, base, exp));
        }
        Ok(base)
    }

    fn parse_atom(&mut self) -> Result<Expr, ParseError> {
        let (tok, span) = self.bump();
        match tok {
            Tok::Num(v) => Ok(Expr::Num(v)),
            Tok::LParen => {
                let inner = self.parse_or()?;
                if !matches!(self.peek(), Tok::RParen) {
                    return Err(self.syntax(format!("expected ')' but found {}", self.peek())));
                }
                self.bump();
                Ok(inner)
            }
            Tok::Ident(name) => self.parse_ident(name, span),
            Tok::RParen => Err(ParseError::new(
                ParseErrorKind::Syntax,
                span,
                "unbalanced ')'",
            )),
            Tok::Eof => Err(ParseError::new(
                ParseErrorKind::Syntax,
                span,
                "unexpected end of input; operand expected",
            )),
            other => Err(ParseError::new(
                ParseErrorKind::Syntax,
                span,
                format!("dangling operator: expected operand but found {other}"),
            )),
        }
    }

    fn parse_ident(&mut self, name: String, span: Span) -> Result<Expr, ParseError> {
        match name.as_str() {
            "true" => return Ok(Expr::Bool(true)),
            "false" => return Ok(Expr::Bool(false)),
            "pi" => return Ok(Expr::Const(Constant::Pi)),
            "e" => return Ok(Expr::Const(Constant::E)),
            "and" | "or" | "not" => {
                return Err(ParseError::new(
                    ParseErrorKind::Syntax,
                    span,
                    format!("dangling operator: expected operand but found '{name}'"),
                ))
            }
            _ => {}
        }
        if let Some(func) = Func::from_name(&name) {
            if !matches!(self.peek(), Tok::LParen) {
                return Err(ParseError::new(
                    ParseErrorKind::Syntax,
                    span,
                    format!("function '{name}' must be called with parentheses"),
                ));
            }
            self.bump();
            let mut args = Vec::new();
            if !matches!(self.peek(), Tok::RParen) {
                loop {
                    args.push(self.parse_or()?);
                    if matches!(self.peek(), Tok::Comma) {
                        self.bump();
                        continue;
                    }
                    break;
                }
            }
            if !matches!(self.peek(), Tok::RParen) {
                return Err(self.syntax(format!("expected ')' but found {}", self.peek())));
            }
            let close = self.bump().1;
            if args.len() != func.arity() {
                return Err(ParseError::new(
                    ParseErrorKind::Arity,
                    Span::new(span.start, close.end),
                    format!(
                        "function '{name}' takes {} argument{} but {} given",
                        func.arity(),
                        if func.arity() == 1 { "" } else { "s" },
                        args.len()
                    ),
                ));
            }
            return Ok(Expr::Call { func, args });
        }
        if matches!(self.peek(), Tok::LParen) {
            return Err(ParseError::new(
                ParseErrorKind::Syntax,
                span,
                format!("unknown function '{name}'"),
            ));
        }
        Ok(Expr::Var { name, span })
    }
}

/// Parses one expression; the whole input must be consumed.
pub fn parse_expr(src: &str) -> Result<Expr, ParseError> {
    if src.trim().is_empty() {
        return Err(ParseError::new(
            ParseErrorKind::Syntax,
            Span::new(0, src.len()),
            "empty expression",
        ));
    }
    let toks = lex(src)?;
    let mut p = Parser { toks, pos: 0 };
    let e = p.parse_or()?;
    match p.peek() {
        Tok::Eof => Ok(e),
        Tok::RParen => Err(p.syntax("unbalanced ')'")),
        Tok::Num(_) | Tok::Ident(_) | Tok::LParen => Err(p.syntax(format!(
            "unexpected {} after expression; implicit multiplication is not supported, write '*'",
            p.peek()
        ))),
        other => Err(p.syntax(format!("unexpected {other}"))),
    }
}
