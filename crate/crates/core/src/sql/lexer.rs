use super::{Dialect, ParseError};

#[derive(Debug, Clone, PartialEq)]
pub enum TokenKind {
    /// Bare word: keyword or unquoted identifier, original spelling.
    Word(String),
    QuotedIdent(String),
    Number(String),
    Str(String),
    Sym(Sym),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sym {
    LParen,
    RParen,
    Comma,
    Dot,
    Semicolon,
    Star,
    Plus,
    Minus,
    Slash,
    Percent,
    Eq,
    NotEq,
    Lt,
    LtEq,
    Gt,
    GtEq,
    Concat,
}

impl Sym {
    pub fn text(self) -> &'static str {
        match self {
            Sym::LParen => "(",
            Sym::RParen => ")",
            Sym::Comma => ",",
            Sym::Dot => ".",
            Sym::Semicolon => ";",
            Sym::Star => "*",
            Sym::Plus => "+",
            Sym::Minus => "-",
            Sym::Slash => "/",
            Sym::Percent => "%",
            Sym::Eq => "=",
            Sym::NotEq => "<>",
            Sym::Lt => "<",
            Sym::LtEq => "<=",
            Sym::Gt => ">",
            Sym::GtEq => ">=",
            Sym::Concat => "||",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub kind: TokenKind,
    /// Byte offset of the first character in the source text.
    pub offset: usize,
}

impl Token {
    pub fn is_sym(&self, s: Sym) -> bool {
        self.kind == TokenKind::Sym(s)
    }

    pub fn describe(&self) -> String {
        match &self.kind {
            TokenKind::Word(w) => format!("'{w}'"),
            TokenKind::QuotedIdent(w) => format!("identifier \"{w}\""),
            TokenKind::Number(n) => format!("number {n}"),
            TokenKind::Str(_) => "string literal".to_string(),
            TokenKind::Sym(s) => format!("'{}'", s.text()),
        }
    }
}

pub fn tokenize(src: &str, dialect: Dialect) -> Result<Vec<Token>, ParseError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        if c == b'-' && bytes.get(i + 1) == Some(&b'-') {
            while i < bytes.len() && bytes[i] != b'\n' {
                i += 1;
            }
            continue;
        }
        if c == b'/' && bytes.get(i + 1) == Some(&b'*') {
            let start = i;
            i += 2;
            loop {
                if i + 1 >= bytes.len() {
                    return Err(ParseError::new(start, "unterminated block comment", "'*/'"));
                }
                if bytes[i] == b'*' && bytes[i + 1] == b'/' {
                    i += 2;
                    break;
                }
                i += 1;
            }
            continue;
        }
        let start = i;
        if c.is_ascii_alphabetic() || c == b'_' || c >= 0x80 {
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_' || bytes[i] == b'$' || bytes[i] >= 0x80) {
                i += 1;
            }
            out.push(Token { kind: TokenKind::Word(src[start..i].to_string()), offset: start });
            continue;
        }
        if c.is_ascii_digit() || (c == b'.' && bytes.get(i + 1).is_some_and(|b| b.is_ascii_digit())) {
            while i < bytes.len() && bytes[i].is_ascii_digit() {
                i += 1;
            }
            if i < bytes.len() && bytes[i] == b'.' && bytes.get(i + 1).is_none_or(|b| !b.is_ascii_alphabetic() || *b == b'e' || *b == b'E') {
                i += 1;
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
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
            out.push(Token { kind: TokenKind::Number(src[start..i].to_string()), offset: start });
            continue;
        }
        let quote_kind = match (c, dialect) {
            (b'\'', _) => Some(b'\''),
            (b'"', Dialect::Postgres) => Some(b'"'),
            (b'"', Dialect::Mysql) => Some(b'"'),
            (b'`', Dialect::Mysql) => Some(b'`'),
            _ => None,
        };
        if let Some(q) = quote_kind {
            i += 1;
            let mut value = String::new();
            let mut seg = i;
            loop {
                if i >= bytes.len() {
                    return Err(ParseError::new(start, "unterminated quoted literal", "closing quote"));
                }
                if bytes[i] == q {
                    if bytes.get(i + 1) == Some(&q) {
                        value.push_str(&src[seg..=i]);
                        i += 2;
                        seg = i;
                        continue;
                    }
                    value.push_str(&src[seg..i]);
                    i += 1;
                    break;
                }
                i += 1;
            }
            let is_string = q == b'\'' || (q == b'"' && dialect == Dialect::Mysql);
            let kind = if is_string { TokenKind::Str(value) } else { TokenKind::QuotedIdent(value) };
            out.push(Token { kind, offset: start });
            continue;
        }
        let next = bytes.get(i + 1).copied();
        let (sym, len) = match (c, next) {
            (b'<', Some(b'>')) => (Sym::NotEq, 2),
            (b'!', Some(b'=')) => (Sym::NotEq, 2),
            (b'<', Some(b'=')) => (Sym::LtEq, 2),
            (b'>', Some(b'=')) => (Sym::GtEq, 2),
            (b'|', Some(b'|')) => (Sym::Concat, 2),
            (b'<', _) => (Sym::Lt, 1),
            (b'>', _) => (Sym::Gt, 1),
            (b'=', _) => (Sym::Eq, 1),
            (b'(', _) => (Sym::LParen, 1),
            (b')', _) => (Sym::RParen, 1),
            (b',', _) => (Sym::Comma, 1),
            (b'.', _) => (Sym::Dot, 1),
            (b';', _) => (Sym::Semicolon, 1),
            (b'*', _) => (Sym::Star, 1),
            (b'+', _) => (Sym::Plus, 1),
            (b'-', _) => (Sym::Minus, 1),
            (b'/', _) => (Sym::Slash, 1),
            (b'%', _) => (Sym::Percent, 1),
            _ => {
                let ch = src[i..].chars().next().unwrap_or('?');
                return Err(ParseError::new(i, format!("unexpected character '{ch}'"), "a token"));
            }
        };
        out.push(Token { kind: TokenKind::Sym(sym), offset: start });
        i += len;
    }
    Ok(out)
}

/// Splits a script into statements on top-level semicolons. Quotes and
/// comments are respected; empty statements are dropped.
pub fn split_statements(script: &str) -> Vec<String> {
    let bytes = script.as_bytes();
    let mut out = Vec::new();
    let mut start = 0;
    let mut i = 0;
    while i < bytes.len() {
        match bytes[i] {
            b'\'' | b'"' | b'`' => {
                let q = bytes[i];
                i += 1;
                while i < bytes.len() {
                    if bytes[i] == q {
                        if bytes.get(i + 1) == Some(&q) {
                            i += 2;
                            continue;
                        }
                        break;
                    }
                    i += 1;
                }
            }
            b'-' if bytes.get(i + 1) == Some(&b'-') => {
                while i < bytes.len() && bytes[i] != b'\n' {
                    i += 1;
                }
            }
            b'/' if bytes.get(i + 1) == Some(&b'*') => {
                i += 2;
                while i + 1 < bytes.len() && !(bytes[i] == b'*' && bytes[i + 1] == b'/') {
                    i += 1;
                }
                i += 1;
            }
            b';' => {
                out.push(script[start..i].to_string());
                start = i + 1;
            }
            _ => {}
        }
        i += 1;
    }
    if start < script.len() {
        out.push(script[start..].to_string());
    }
    out.into_iter()
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty() && !is_only_comments(s))
        .collect()
}

fn is_only_comments(s: &str) -> bool {
    tokenize(s, Dialect::Postgres).map(|t| t.is_empty()).unwrap_or(false)
}
