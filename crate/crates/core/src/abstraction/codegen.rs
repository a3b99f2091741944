//! Maps model-written verification code onto the label-function DSL.
//!
//! The accepted shape is the guard sequence the synthesis prompt asks for:
//!
//! ```text
//! def verify_function(trajectory):
//!     if not validate_click_action(trajectory, 'Pro Expense'):
//!         return False
//!     return True
//! ```
//!
//! Each `if not <call>:` becomes one `require <call>`. Imports, comments,
//! code fences, `return` lines and a trailing `result = verify_function(..)`
//! call are skipped; anything else rejects the candidate. Nothing is executed.

use crate::dsl::{parse_label_function, ApiRegistry, DslError, LabelFunction};

fn perr(line: usize, message: impl Into<String>) -> DslError {
    DslError::Parse { line, column: 1, message: message.into() }
}

fn is_boilerplate(line: &str) -> bool {
    line.is_empty()
        || line.starts_with('#')
        || line.starts_with("```")
        || line.starts_with("from ")
        || line.starts_with("import ")
        || line.starts_with("def ")
        || line == "return False"
        || line == "return True"
        || (line.starts_with("result =") && line.contains("verify_function("))
}

/// A Python string literal (single or double quoted, basic escapes).
fn py_string(chars: &[char], pos: &mut usize, line: usize) -> Result<String, DslError> {
    let quote = chars[*pos];
    *pos += 1;
    let mut out = String::new();
    while let Some(&c) = chars.get(*pos) {
        *pos += 1;
        match c {
            c if c == quote => return Ok(out),
            '\\' => {
                let e = chars.get(*pos).copied().ok_or_else(|| perr(line, "unterminated escape"))?;
                *pos += 1;
                out.push(match e {
                    'n' => '\n',
                    't' => '\t',
                    other => other,
                });
            }
            c => out.push(c),
        }
    }
    Err(perr(line, "unterminated string literal"))
}

fn skip_ws(chars: &[char], pos: &mut usize) {
    while chars.get(*pos).is_some_and(|c| c.is_whitespace()) {
        *pos += 1;
    }
}

fn ident(chars: &[char], pos: &mut usize) -> String {
    let start = *pos;
    while chars.get(*pos).is_some_and(|c| c.is_ascii_alphanumeric() || *c == '_') {
        *pos += 1;
    }
    chars[start..*pos].iter().collect()
}

/// `(api, positional args, keyword args)` of one `if not api(trajectory, ...):` line.
type Call = (String, Vec<String>, Vec<(String, String)>);

fn parse_if_line(line: &str, lineno: usize) -> Result<Call, DslError> {
    let body = line
        .strip_prefix("if not ")
        .and_then(|s| s.trim_end().strip_suffix(':'))
        .ok_or_else(|| perr(lineno, format!("unsupported statement: {line}")))?;
    let chars: Vec<char> = body.trim().chars().collect();
    let mut pos = 0;
    let api = ident(&chars, &mut pos);
    if api.is_empty() {
        return Err(perr(lineno, "expected an API call"));
    }
    skip_ws(&chars, &mut pos);
    if chars.get(pos) != Some(&'(') {
        return Err(perr(lineno, "expected '('"));
    }
    pos += 1;
    let mut positional = Vec::new();
    let mut keyword = Vec::new();
    let mut first = true;
    loop {
        skip_ws(&chars, &mut pos);
        match chars.get(pos) {
            Some(')') => {
                pos += 1;
                break;
            }
            None => return Err(perr(lineno, "unclosed call")),
            _ => {}
        }
        match chars.get(pos) {
            Some('\'' | '"') => positional.push(py_string(&chars, &mut pos, lineno)?),
            Some(_) => {
                let name = ident(&chars, &mut pos);
                skip_ws(&chars, &mut pos);
                if chars.get(pos) == Some(&'=') {
                    pos += 1;
                    skip_ws(&chars, &mut pos);
                    if !matches!(chars.get(pos), Some('\'' | '"')) {
                        return Err(perr(lineno, format!("keyword '{name}' must be a string literal")));
                    }
                    keyword.push((name, py_string(&chars, &mut pos, lineno)?));
                } else if first && name == "trajectory" {
                    // the conventional first argument
                } else {
                    return Err(perr(lineno, format!("unsupported argument '{name}'")));
                }
            }
            None => unreachable!(),
        }
        first = false;
        skip_ws(&chars, &mut pos);
        match chars.get(pos) {
            Some(',') => pos += 1,
            Some(')') => {}
            _ => return Err(perr(lineno, "expected ',' or ')'")),
        }
    }
    skip_ws(&chars, &mut pos);
    if pos != chars.len() {
        return Err(perr(lineno, "only one API call per condition is allowed"));
    }
    Ok((api, positional, keyword))
}

fn dsl_quote(s: &str) -> String {
    let mut out = String::from("\"");
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

/// Translates generated guard-sequence code into DSL text.
pub fn code_to_dsl(code: &str, registry: &ApiRegistry) -> Result<String, DslError> {
    let mut out = String::from("fn verify(trajectory):\n");
    for (i, raw) in code.lines().enumerate() {
        let lineno = i + 1;
        let line = raw.trim();
        if is_boilerplate(line) {
            continue;
        }
        let (api, positional, keyword) = parse_if_line(line, lineno)?;
        let sig = registry.get(&api).ok_or_else(|| DslError::UnknownApi { line: lineno, api: api.clone() })?;
        let mut args: Vec<Option<String>> = positional.into_iter().map(Some).collect();
        args.resize(sig.arity().max(args.len()), None);
        for (name, value) in keyword {
            let idx = sig
                .params
                .iter()
                .position(|(p, _)| *p == name)
                .ok_or_else(|| perr(lineno, format!("{api} has no parameter '{name}'")))?;
            if args[idx].replace(value).is_some() {
                return Err(perr(lineno, format!("parameter '{name}' given twice")));
            }
        }
        if args.len() != sig.arity() || args.iter().any(Option::is_none) {
            let found = args.iter().flatten().count();
            return Err(DslError::ArityMismatch { line: lineno, api, expected: sig.arity(), found });
        }
        let quoted: Vec<String> = args.into_iter().flatten().map(|a| dsl_quote(&a)).collect();
        out.push_str(&format!("  require {api}({})\n", quoted.join(",")));
    }
    Ok(out)
}

/// Accepts either DSL text or generated guard-sequence code.
pub fn candidate_to_label_function(text: &str, registry: &ApiRegistry) -> Result<LabelFunction, DslError> {
    let stripped = strip_fences(text);
    let first = stripped.lines().map(str::trim).find(|l| !l.is_empty() && !l.starts_with('#')).unwrap_or_default();
    if first.starts_with("fn verify") {
        parse_label_function(&stripped, registry)
    } else {
        parse_label_function(&code_to_dsl(&stripped, registry)?, registry)
    }
}

fn strip_fences(text: &str) -> String {
    text.lines().filter(|l| !l.trim_start().starts_with("```")).collect::<Vec<_>>().join("\n")
}
