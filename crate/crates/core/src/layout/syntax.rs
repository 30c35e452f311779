//! Line-oriented surface syntax shared by the parser and the formatter.
//!
//! A line holds one statement: a keyword followed by whitespace-separated
//! arguments, each either positional or `key=value`. Values may be quoted
//! strings or bare tokens; parentheses group a token across spaces.
//! `#` starts a comment.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("{line}:{column}: {message}")]
    Syntax { line: usize, column: usize, message: String },
    #[error("{line}:{column}: unknown key `{key}` in `{statement}` statement")]
    UnknownKey {
        line: usize,
        column: usize,
        key: String,
        statement: String,
    },
    #[error("empty table: the document has no `table` statement")]
    EmptyTable,
}

impl ParseError {
    pub fn syntax(line: usize, column: usize, message: impl Into<String>) -> Self {
        ParseError::Syntax {
            line,
            column,
            message: message.into(),
        }
    }

    /// 1-based line of the error, if any.
    pub fn line(&self) -> Option<usize> {
        match self {
            ParseError::Syntax { line, .. } | ParseError::UnknownKey { line, .. } => Some(*line),
            ParseError::EmptyTable => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    /// Quoted string, unescaped.
    Str(String),
    /// Bare token: a word, number, expression or parenthesised group.
    Raw(String),
}

impl Value {
    pub fn text(&self) -> &str {
        match self {
            Value::Str(s) | Value::Raw(s) => s,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Arg {
    pub key: Option<String>,
    pub value: Value,
    pub column: usize,
}

/// One statement line.
#[derive(Debug, Clone, PartialEq)]
pub struct Command {
    pub keyword: String,
    pub args: Vec<Arg>,
    pub line: usize,
    pub column: usize,
    pub comment: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Line {
    Blank,
    Comment(String),
    Command(Command),
}

fn read_string(chars: &[(usize, char)], mut i: usize, line: usize) -> Result<(String, usize), ParseError> {
    let col = chars[i].0 + 1;
    i += 1;
    let mut s = String::new();
    while i < chars.len() {
        match chars[i].1 {
            '"' => return Ok((s, i + 1)),
            '\\' if i + 1 < chars.len() => {
                s.push(match chars[i + 1].1 {
                    'n' => '\n',
                    't' => '\t',
                    c => c,
                });
                i += 2;
            }
            c => {
                s.push(c);
                i += 1;
            }
        }
    }
    Err(ParseError::syntax(line, col, "unterminated string"))
}

/// Splits one source line into tokens and an optional trailing comment.
fn tokenize(text: &str, line: usize) -> Result<(Vec<(usize, String)>, Option<String>), ParseError> {
    let chars: Vec<(usize, char)> = text.chars().enumerate().collect();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i].1;
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        if c == '#' {
            let rest: String = chars[i + 1..].iter().map(|(_, c)| *c).collect();
            return Ok((tokens, Some(rest.trim_end().to_string())));
        }
        let start = i;
        let mut depth = 0i32;
        let mut tok = String::new();
        while i < chars.len() {
            let c = chars[i].1;
            if c.is_whitespace() && depth == 0 {
                break;
            }
            if c == '#' && depth == 0 {
                break;
            }
            if c == '"' {
                let (s, next) = read_string(&chars, i, line)?;
                tok.push('"');
                tok.push_str(&escape(&s));
                tok.push('"');
                i = next;
                continue;
            }
            if c == '(' {
                depth += 1;
            } else if c == ')' {
                depth -= 1;
                if depth < 0 {
                    return Err(ParseError::syntax(line, chars[i].0 + 1, "unbalanced `)`"));
                }
            }
            tok.push(c);
            i += 1;
        }
        if depth != 0 {
            return Err(ParseError::syntax(line, chars[start].0 + 1, "unbalanced `(`"));
        }
        tokens.push((chars[start].0 + 1, tok));
    }
    Ok((tokens, None))
}

fn escape(s: &str) -> String {
    let mut o = String::new();
    for c in s.chars() {
        match c {
            '"' => o.push_str("\\\""),
            '\\' => o.push_str("\\\\"),
            '\n' => o.push_str("\\n"),
            '\t' => o.push_str("\\t"),
            c => o.push(c),
        }
    }
    o
}

fn unquote(tok: &str, line: usize, col: usize) -> Result<Value, ParseError> {
    if tok.starts_with('"') {
        let chars: Vec<(usize, char)> = tok.chars().enumerate().collect();
        let (s, next) = read_string(&chars, 0, line)?;
        if next != chars.len() {
            return Err(ParseError::syntax(line, col, format!("unexpected text after string in `{tok}`")));
        }
        Ok(Value::Str(s))
    } else {
        Ok(Value::Raw(tok.to_string()))
    }
}

/// Position of the first `=` outside parentheses and quotes.
fn key_split(tok: &str) -> Option<usize> {
    let mut depth = 0;
    let mut quoted = false;
    let mut prev = '\0';
    for (i, c) in tok.char_indices() {
        match c {
            '"' if prev != '\\' => quoted = !quoted,
            '(' if !quoted => depth += 1,
            ')' if !quoted => depth -= 1,
            '=' if !quoted && depth == 0 => return Some(i),
            _ => {}
        }
        prev = c;
    }
    None
}

fn is_key(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '.')
}

/// Splits a document into lines of commands, comments and blanks.
pub fn lex(text: &str) -> Result<Vec<Line>, ParseError> {
    let mut out = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = n + 1;
        let (tokens, comment) = tokenize(raw, line)?;
        if tokens.is_empty() {
            out.push(match comment {
                Some(c) => Line::Comment(c),
                None => Line::Blank,
            });
            continue;
        }
        let (kcol, keyword) = tokens[0].clone();
        if !is_key(&keyword) {
            return Err(ParseError::syntax(line, kcol, format!("expected a statement keyword, found `{keyword}`")));
        }
        let mut args = Vec::new();
        for (col, tok) in &tokens[1..] {
            match key_split(tok) {
                Some(i) if i > 0 && is_key(&tok[..i]) => {
                    let v = &tok[i + 1..];
                    if v.is_empty() {
                        return Err(ParseError::syntax(line, *col, format!("missing value for `{}`", &tok[..i])));
                    }
                    args.push(Arg {
                        key: Some(tok[..i].to_string()),
                        value: unquote(v, line, col + i + 1)?,
                        column: *col,
                    });
                }
                Some(_) => return Err(ParseError::syntax(line, *col, format!("malformed argument `{tok}`"))),
                None => args.push(Arg {
                    key: None,
                    value: unquote(tok, line, *col)?,
                    column: *col,
                }),
            }
        }
        out.push(Line::Command(Command {
            keyword,
            args,
            line,
            column: kcol,
            comment,
        }));
    }
    Ok(out)
}

/// Canonical spelling of a bare token: no whitespace except one space
/// after each comma.
fn canonical_raw(s: &str) -> String {
    let mut o = String::new();
    for c in s.chars().filter(|c| !c.is_whitespace()) {
        o.push(c);
        if c == ',' {
            o.push(' ');
        }
    }
    o
}

fn format_value(v: &Value) -> String {
    match v {
        Value::Str(s) => format!("\"{}\"", escape(s)),
        Value::Raw(s) => canonical_raw(s),
    }
}

fn format_command(c: &Command) -> String {
    let mut s = c.keyword.clone();
    for a in &c.args {
        s.push(' ');
        if let Some(k) = &a.key {
            s.push_str(k);
            s.push('=');
        }
        s.push_str(&format_value(&a.value));
    }
    if let Some(cm) = &c.comment {
        s.push_str(" #");
        s.push_str(cm);
    }
    s
}

/// Canonical formatting: one space between arguments, two-space indent
/// inside template blocks, comments kept, runs of blank lines collapsed.
pub fn format_document(text: &str) -> Result<String, ParseError> {
    let lines = lex(text)?;
    let mut out = String::new();
    let mut depth = 0usize;
    let mut blank = true;
    for l in &lines {
        match l {
            Line::Blank => {
                if !blank {
                    out.push('\n');
                }
                blank = true;
                continue;
            }
            Line::Comment(c) => {
                out.push_str(&"  ".repeat(depth));
                out.push('#');
                out.push_str(c);
            }
            Line::Command(c) => {
                if c.keyword == "end" {
                    depth = depth.saturating_sub(1);
                }
                out.push_str(&"  ".repeat(depth));
                out.push_str(&format_command(c));
                if c.keyword == "template" {
                    depth += 1;
                }
            }
        }
        out.push('\n');
        blank = false;
    }
    while out.ends_with("\n\n") {
        out.pop();
    }
    Ok(out)
}
