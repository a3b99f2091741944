use super::registry::{ApiRegistry, ArgKind};
use super::{DslError, LabelFunction, Origin, PredicateCall};

const HEADER: &str = "fn verify(trajectory):";
const INDENT: &str = "  ";
const KEYWORD: &str = "require";

struct Cursor {
    chars: Vec<char>,
    pos: usize,
    line: usize,
}

impl Cursor {
    fn new(src: &str, line: usize) -> Self {
        Cursor { chars: src.chars().collect(), pos: 0, line }
    }

    fn err(&self, message: impl Into<String>) -> DslError {
        DslError::Parse { line: self.line, column: self.pos + 1, message: message.into() }
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek();
        if c.is_some() {
            self.pos += 1;
        }
        c
    }

    fn skip_ws(&mut self) {
        while matches!(self.peek(), Some(' ' | '\t')) {
            self.pos += 1;
        }
    }

    fn expect(&mut self, want: char) -> Result<(), DslError> {
        match self.peek() {
            Some(c) if c == want => {
                self.pos += 1;
                Ok(())
            }
            Some(c) => Err(self.err(format!("expected '{want}', found '{c}'"))),
            None => Err(self.err(format!("expected '{want}', found end of line"))),
        }
    }

    fn ident(&mut self) -> Result<String, DslError> {
        let start = self.pos;
        while matches!(self.peek(), Some(c) if c.is_ascii_alphanumeric() || c == '_') {
            self.pos += 1;
        }
        if start == self.pos || self.chars[start].is_ascii_digit() {
            self.pos = start;
            return Err(self.err("expected identifier"));
        }
        Ok(self.chars[start..self.pos].iter().collect())
    }

    fn quoted(&mut self) -> Result<String, DslError> {
        self.expect('"')?;
        let mut out = String::new();
        loop {
            match self.bump() {
                None => return Err(self.err("unterminated string")),
                Some('"') => return Ok(out),
                Some('\\') => match self.bump() {
                    Some('"') => out.push('"'),
                    Some('\\') => out.push('\\'),
                    Some('n') => out.push('\n'),
                    Some(c) => {
                        self.pos -= 1;
                        return Err(self.err(format!("unknown escape '\\{c}'")));
                    }
                    None => return Err(self.err("unterminated escape")),
                },
                Some(c) => out.push(c),
            }
        }
    }
}

enum RawArg {
    Quoted(String),
    Bare(String),
}

fn parse_guard(line: &str, lineno: usize, registry: &ApiRegistry) -> Result<PredicateCall, DslError> {
    let mut cur = Cursor::new(line, lineno);
    for c in INDENT.chars() {
        if cur.peek() != Some(c) {
            return Err(cur.err("guard lines must be indented by exactly two spaces"));
        }
        cur.pos += 1;
    }
    if matches!(cur.peek(), Some(' ' | '\t')) {
        return Err(cur.err("guard lines must be indented by exactly two spaces"));
    }
    let kw_col = cur.pos;
    let kw = cur.ident()?;
    if kw != KEYWORD {
        cur.pos = kw_col;
        return Err(cur.err(format!("expected '{KEYWORD}', found '{kw}'")));
    }
    if !matches!(cur.peek(), Some(' ' | '\t')) {
        return Err(cur.err("expected whitespace after 'require'"));
    }
    cur.skip_ws();
    let api = cur.ident()?;
    cur.skip_ws();
    cur.expect('(')?;
    let mut raw = Vec::new();
    cur.skip_ws();
    if cur.peek() == Some(')') {
        cur.pos += 1;
    } else {
        loop {
            cur.skip_ws();
            let arg = match cur.peek() {
                Some('"') => RawArg::Quoted(cur.quoted()?),
                Some(_) => RawArg::Bare(cur.ident().map_err(|_| cur.err("expected quoted string or enum token"))?),
                None => return Err(cur.err("unexpected end of line")),
            };
            raw.push((cur.pos, arg));
            cur.skip_ws();
            match cur.bump() {
                Some(',') => continue,
                Some(')') => break,
                Some(c) => {
                    cur.pos -= 1;
                    return Err(cur.err(format!("expected ',' or ')', found '{c}'")));
                }
                None => return Err(cur.err("expected ')'")),
            }
        }
    }
    cur.skip_ws();
    if let Some(c) = cur.peek() {
        return Err(cur.err(format!("unexpected trailing '{c}'")));
    }

    let sig = registry.get(&api).ok_or_else(|| DslError::UnknownApi { line: lineno, api: api.clone() })?;
    if sig.arity() != raw.len() {
        return Err(DslError::ArityMismatch { line: lineno, api, expected: sig.arity(), found: raw.len() });
    }
    let mut args = Vec::with_capacity(raw.len());
    for ((end, arg), (pname, kind)) in raw.into_iter().zip(sig.params) {
        let value = match (arg, kind) {
            (RawArg::Quoted(s), _) => s,
            (RawArg::Bare(tok), ArgKind::Enum(_)) => tok,
            (RawArg::Bare(tok), ArgKind::Str) => {
                return Err(DslError::Parse {
                    line: lineno,
                    column: end + 1 - tok.chars().count(),
                    message: format!("argument '{pname}' must be a quoted string"),
                })
            }
        };
        if let ArgKind::Enum(allowed) = kind {
            if !allowed.contains(&value.as_str()) {
                return Err(DslError::Parse {
                    line: lineno,
                    column: end + 1,
                    message: format!("argument '{pname}' must be one of {allowed:?}, found '{value}'"),
                });
            }
        }
        args.push(value);
    }
    Ok(PredicateCall { api, args })
}

/// Parses `.lf` text into a label function checked against `registry`.
pub fn parse_label_function(text: &str, registry: &ApiRegistry) -> Result<LabelFunction, DslError> {
    let mut saw_header = false;
    let mut guards = Vec::new();
    for (i, line) in text.split('\n').enumerate() {
        let lineno = i + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        if !saw_header {
            if line.trim_end() != HEADER {
                return Err(DslError::Parse {
                    line: lineno,
                    column: 1,
                    message: format!("expected header '{HEADER}'"),
                });
            }
            saw_header = true;
            continue;
        }
        guards.push(parse_guard(line.trim_end_matches([' ', '\t']), lineno, registry)?);
    }
    if !saw_header {
        return Err(DslError::Parse { line: 1, column: 1, message: format!("expected header '{HEADER}'") });
    }
    LabelFunction::new(guards, Origin::Expert)
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            c => out.push(c),
        }
    }
    out
}

/// Canonical text: header, one guard per line, every argument quoted.
pub fn print_label_function(lf: &LabelFunction) -> String {
    let mut out = String::from(HEADER);
    out.push('\n');
    for g in &lf.guards {
        let args: Vec<String> = g.args.iter().map(|a| format!("\"{}\"", escape(a))).collect();
        out.push_str(&format!("{INDENT}{KEYWORD} {}({})\n", g.api, args.join(",")));
    }
    out
}
