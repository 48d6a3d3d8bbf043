//! Strict HTML tokenizer: tags, attributes, text, comments and raw-text
//! `script`/`style` bodies, with byte offsets.

#[derive(Debug, Clone, PartialEq)]
pub struct Attr {
    /// Lowercased attribute name.
    pub name: String,
    pub value: Option<String>,
    pub offset: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Token<'a> {
    Start {
        /// Lowercased tag name.
        name: String,
        attrs: Vec<Attr>,
        self_closing: bool,
        offset: usize,
    },
    End {
        name: String,
        offset: usize,
    },
    Text {
        text: &'a str,
        /// True for `script`/`style` bodies, which are never entity-decoded.
        raw: bool,
        offset: usize,
    },
    Comment {
        offset: usize,
    },
    Doctype {
        offset: usize,
    },
}

impl Token<'_> {
    pub fn offset(&self) -> usize {
        match self {
            Token::Start { offset, .. }
            | Token::End { offset, .. }
            | Token::Text { offset, .. }
            | Token::Comment { offset }
            | Token::Doctype { offset } => *offset,
        }
    }
}

impl Attr {
    pub fn get<'t>(attrs: &'t [Attr], name: &str) -> Option<&'t str> {
        attrs
            .iter()
            .find(|a| a.name == name)
            .and_then(|a| a.value.as_deref())
    }
}

/// A lexical problem at a byte offset.
#[derive(Debug, Clone, PartialEq)]
pub struct LexError {
    pub offset: usize,
    pub message: String,
}

pub const VOID_ELEMENTS: &[&str] = &[
    "area", "base", "br", "col", "embed", "hr", "img", "input", "link", "meta", "param", "source",
    "track", "wbr",
];

pub fn is_void(name: &str) -> bool {
    VOID_ELEMENTS.contains(&name)
}

fn is_name_start(b: u8) -> bool {
    b.is_ascii_alphabetic()
}

fn is_name_char(b: u8) -> bool {
    b.is_ascii_alphanumeric() || matches!(b, b'-' | b':' | b'_' | b'.')
}

fn is_attr_char(b: u8) -> bool {
    !b.is_ascii_whitespace() && !matches!(b, b'/' | b'>' | b'=' | b'"' | b'\'' | b'<')
}

/// Decodes the handful of named entities the validator cares about plus
/// numeric references. Unknown entities are left as written.
pub fn decode_entities(s: &str) -> String {
    if !s.contains('&') {
        return s.to_string();
    }
    let mut out = String::with_capacity(s.len());
    let mut rest = s;
    while let Some(amp) = rest.find('&') {
        out.push_str(&rest[..amp]);
        rest = &rest[amp..];
        let Some(semi) = rest[..rest.len().min(12)].find(';') else {
            out.push('&');
            rest = &rest[1..];
            continue;
        };
        let ent = &rest[1..semi];
        let decoded = match ent {
            "amp" => Some('&'),
            "lt" => Some('<'),
            "gt" => Some('>'),
            "quot" => Some('"'),
            "apos" => Some('\''),
            "nbsp" => Some('\u{a0}'),
            _ => {
                if let Some(hex) = ent.strip_prefix("#x").or_else(|| ent.strip_prefix("#X")) {
                    u32::from_str_radix(hex, 16).ok().and_then(char::from_u32)
                } else if let Some(dec) = ent.strip_prefix('#') {
                    dec.parse::<u32>().ok().and_then(char::from_u32)
                } else {
                    None
                }
            }
        };
        match decoded {
            Some(c) => {
                out.push(c);
                rest = &rest[semi + 1..];
            }
            None => {
                out.push('&');
                rest = &rest[1..];
            }
        }
    }
    out.push_str(rest);
    out
}

struct Lexer<'a> {
    src: &'a str,
    bytes: &'a [u8],
    pos: usize,
    tokens: Vec<Token<'a>>,
    errors: Vec<LexError>,
}

/// Tokenizes `src`. Lexical errors do not stop tokenization unless the
/// rest of the input cannot be interpreted.
pub fn tokenize(src: &str) -> (Vec<Token<'_>>, Vec<LexError>) {
    let mut lx = Lexer {
        src,
        bytes: src.as_bytes(),
        pos: 0,
        tokens: Vec::new(),
        errors: Vec::new(),
    };
    lx.run();
    (lx.tokens, lx.errors)
}

impl<'a> Lexer<'a> {
    fn err(&mut self, offset: usize, message: impl Into<String>) {
        self.errors.push(LexError {
            offset,
            message: message.into(),
        });
    }

    fn starts_with(&self, s: &str) -> bool {
        self.bytes[self.pos..].starts_with(s.as_bytes())
    }

    fn skip_ws(&mut self) {
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn name(&mut self) -> String {
        let start = self.pos;
        while self.pos < self.bytes.len() && is_name_char(self.bytes[self.pos]) {
            self.pos += 1;
        }
        self.src[start..self.pos].to_ascii_lowercase()
    }

    fn run(&mut self) {
        let mut text_start = 0;
        while self.pos < self.bytes.len() {
            if self.bytes[self.pos] != b'<' {
                self.pos += 1;
                continue;
            }
            let lt = self.pos;
            let next = self.bytes.get(lt + 1).copied();
            let is_markup = self.starts_with("<!")
                || (next == Some(b'/') && self.bytes.get(lt + 2).copied().is_some_and(is_name_start))
                || next.is_some_and(is_name_start);
            if !is_markup {
                self.err(lt, "unescaped '<' in text");
                self.pos += 1;
                continue;
            }
            self.flush_text(text_start, lt);
            if !self.markup() {
                return;
            }
            text_start = self.pos;
        }
        self.flush_text(text_start, self.bytes.len());
    }

    fn flush_text(&mut self, start: usize, end: usize) {
        if end > start {
            self.tokens.push(Token::Text {
                text: &self.src[start..end],
                raw: false,
                offset: start,
            });
        }
    }

    /// Consumes one markup construct at `self.pos`. Returns false when the
    /// input is unusable from here on.
    fn markup(&mut self) -> bool {
        let start = self.pos;
        if self.starts_with("<!--") {
            match self.src[start + 4..].find("-->") {
                Some(end) => {
                    self.pos = start + 4 + end + 3;
                    self.tokens.push(Token::Comment { offset: start });
                    true
                }
                None => {
                    self.err(start, "unterminated comment");
                    false
                }
            }
        } else if self.starts_with("<!") {
            let Some(end) = self.src[start..].find('>') else {
                self.err(start, "unterminated markup declaration");
                return false;
            };
            let body = &self.src[start + 2..start + end];
            if body.len() >= 7 && body[..7].eq_ignore_ascii_case("doctype") {
                self.tokens.push(Token::Doctype { offset: start });
            } else {
                self.err(start, "unsupported markup declaration");
            }
            self.pos = start + end + 1;
            true
        } else if self.starts_with("</") {
            self.pos += 2;
            let name = self.name();
            self.skip_ws();
            if self.bytes.get(self.pos) != Some(&b'>') {
                self.err(start, format!("malformed closing tag {name}"));
                match self.src[self.pos..].find('>') {
                    Some(i) => self.pos += i + 1,
                    None => return false,
                }
            } else {
                self.pos += 1;
            }
            self.tokens.push(Token::End {
                name,
                offset: start,
            });
            true
        } else {
            self.start_tag(start)
        }
    }

    fn start_tag(&mut self, start: usize) -> bool {
        self.pos += 1;
        let name = self.name();
        let mut attrs: Vec<Attr> = Vec::new();
        let self_closing;
        loop {
            self.skip_ws();
            if self.pos >= self.bytes.len() {
                self.err(start, format!("unterminated tag {name}"));
                return false;
            }
            if self.starts_with("/>") {
                self.pos += 2;
                self_closing = true;
                break;
            }
            if self.bytes[self.pos] == b'>' {
                self.pos += 1;
                self_closing = false;
                break;
            }
            let a_start = self.pos;
            while self.pos < self.bytes.len() && is_attr_char(self.bytes[self.pos]) {
                self.pos += 1;
            }
            if self.pos == a_start {
                self.err(a_start, format!("malformed attribute in tag {name}"));
                self.pos += 1;
                continue;
            }
            let a_name = self.src[a_start..self.pos].to_ascii_lowercase();
            self.skip_ws();
            let mut value = None;
            if self.bytes.get(self.pos) == Some(&b'=') {
                self.pos += 1;
                self.skip_ws();
                match self.bytes.get(self.pos).copied() {
                    Some(q @ (b'"' | b'\'')) => {
                        let v_start = self.pos + 1;
                        match self.src[v_start..].find(q as char) {
                            Some(len) => {
                                value = Some(decode_entities(&self.src[v_start..v_start + len]));
                                self.pos = v_start + len + 1;
                            }
                            None => {
                                self.err(self.pos, format!("unterminated attribute value for {a_name}"));
                                return false;
                            }
                        }
                    }
                    _ => {
                        let v_start = self.pos;
                        while self.pos < self.bytes.len()
                            && !self.bytes[self.pos].is_ascii_whitespace()
                            && self.bytes[self.pos] != b'>'
                        {
                            self.pos += 1;
                        }
                        if self.pos == v_start {
                            self.err(v_start, format!("missing value for attribute {a_name}"));
                        }
                        value = Some(decode_entities(&self.src[v_start..self.pos]));
                    }
                }
            }
            if attrs.iter().any(|a| a.name == a_name) {
                self.err(a_start, format!("duplicate attribute {a_name}"));
            } else {
                attrs.push(Attr {
                    name: a_name,
                    value,
                    offset: a_start,
                });
            }
        }
        let raw = !self_closing && matches!(name.as_str(), "script" | "style");
        self.tokens.push(Token::Start {
            name: name.clone(),
            attrs,
            self_closing,
            offset: start,
        });
        if raw {
            let close = format!("</{name}");
            let body_start = self.pos;
            let hay = self.src[body_start..].to_ascii_lowercase();
            match hay.find(&close) {
                Some(i) => {
                    if i > 0 {
                        self.tokens.push(Token::Text {
                            text: &self.src[body_start..body_start + i],
                            raw: true,
                            offset: body_start,
                        });
                    }
                    self.pos = body_start + i;
                }
                None => {
                    self.err(start, format!("unterminated <{name}> element"));
                    return false;
                }
            }
        }
        true
    }
}
