//! Reading path lists from Onyx-exported `mxPath(...)` code and from the JSON
//! exchange document.
//!
//! The Onyx reader is a small lexer plus a recursive-descent parser over the
//! call-expression subset Onyx emits: keyword arguments, `c(...)` vectors,
//! strings, numbers and `TRUE/FALSE/T/F`. Everything outside `mxPath` calls
//! is skipped; model and data wrappers produce diagnostics instead of errors.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ram::{def_column, PathSpec, RamModel, ONE};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParsedPathSet {
    pub paths: Vec<PathSpec>,
    pub declared_manifests: Vec<String>,
    pub declared_latents: Vec<String>,
    pub diagnostics: Vec<Diagnostic>,
}

impl ParsedPathSet {
    /// Variables mentioned by the paths, in first-seen order, excluding `one` and definition proxies.
    pub fn mentioned_variables(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for p in self.paths.iter().filter(|p| !p.defn) {
            for v in [&p.from, &p.to] {
                if v != ONE && def_column(v).is_none() && !out.contains(v) {
                    out.push(v.clone());
                }
            }
        }
        out
    }

    /// Builds a single RAM model. Manifests come from `manifests`, else from the declared
    /// header; every other mentioned variable is a latent.
    pub fn to_model(&self, name: &str, manifests: Option<&[String]>) -> Result<RamModel> {
        let manifests: Vec<String> = match manifests {
            Some(m) => m.to_vec(),
            None if !self.declared_manifests.is_empty() => self.declared_manifests.clone(),
            None => {
                return Err(Error::Model(
                    "manifest variables are neither declared nor supplied".into(),
                ))
            }
        };
        let mut latents: Vec<String> = self
            .declared_latents
            .iter()
            .filter(|l| !manifests.contains(l))
            .cloned()
            .collect();
        for v in self.mentioned_variables() {
            if !manifests.contains(&v) && !latents.contains(&v) {
                latents.push(v);
            }
        }
        RamModel::from_paths(name, &manifests, &latents, &self.paths)
    }

    pub fn to_exchange(&self, name: &str) -> ExchangeDocument {
        ExchangeDocument {
            name: name.to_string(),
            manifests: self.declared_manifests.clone(),
            latents: self.declared_latents.clone(),
            defvars: self
                .paths
                .iter()
                .filter(|p| p.defn)
                .map(|p| p.from.clone())
                .collect(),
            paths: self.paths.iter().filter(|p| !p.defn).cloned().collect(),
        }
    }
}

/// The JSON model exchange document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExchangeDocument {
    pub name: String,
    pub manifests: Vec<String>,
    pub latents: Vec<String>,
    pub defvars: Vec<String>,
    pub paths: Vec<PathSpec>,
}

impl ExchangeDocument {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("exchange document serializes")
    }
}

pub fn parse_exchange(doc: &serde_json::Value) -> Result<ParsedPathSet> {
    let doc: ExchangeDocument =
        serde_json::from_value(doc.clone()).map_err(|e| Error::Schema(e.to_string()))?;
    exchange_to_set(doc)
}

pub fn parse_exchange_str(text: &str) -> Result<ParsedPathSet> {
    let doc: ExchangeDocument =
        serde_json::from_str(text).map_err(|e| Error::Schema(e.to_string()))?;
    exchange_to_set(doc)
}

fn exchange_to_set(doc: ExchangeDocument) -> Result<ParsedPathSet> {
    let mut paths: Vec<PathSpec> = Vec::new();
    for d in &doc.defvars {
        if !doc.paths.iter().any(|p| p.defn && &p.from == d) {
            paths.push(PathSpec::defn(d));
        }
    }
    for (i, p) in doc.paths.into_iter().enumerate() {
        if p.arrows != 1 && p.arrows != 2 {
            return Err(Error::Schema(format!(
                "paths[{i}].arrows = {} (expected 1 or 2)",
                p.arrows
            )));
        }
        if p.from.is_empty() || (!p.defn && p.to.is_empty()) {
            return Err(Error::Schema(format!("paths[{i}] has an empty endpoint")));
        }
        paths.push(p);
    }
    Ok(ParsedPathSet {
        paths,
        declared_manifests: doc.manifests,
        declared_latents: doc.latents,
        diagnostics: Vec::new(),
    })
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Str(String),
    Num(f64),
    LParen,
    RParen,
    Comma,
    Assign,
    Other(char),
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    line: usize,
}

/// Splits a line into code and comment, respecting quotes.
fn split_comment(line: &str) -> (&str, Option<&str>) {
    let mut quote: Option<char> = None;
    for (i, ch) in line.char_indices() {
        match quote {
            Some(q) if ch == q => quote = None,
            Some(_) => {}
            None if ch == '"' || ch == '\'' => quote = Some(ch),
            None if ch == '#' => return (&line[..i], Some(&line[i + 1..])),
            None => {}
        }
    }
    (line, None)
}

fn lex(code: &[(usize, String)]) -> Result<Vec<Token>> {
    let mut out = Vec::new();
    for (line, text) in code {
        let chars: Vec<char> = text.chars().collect();
        let mut i = 0;
        while i < chars.len() {
            let c = chars[i];
            let push = |tok: Tok, out: &mut Vec<Token>| out.push(Token { tok, line: *line });
            if c.is_whitespace() {
                i += 1;
            } else if c == '"' || c == '\'' {
                let start = i + 1;
                let mut j = start;
                while j < chars.len() && chars[j] != c {
                    j += 1;
                }
                if j >= chars.len() {
                    return Err(Error::Parse {
                        line: *line,
                        message: "unterminated string".into(),
                    });
                }
                push(Tok::Str(chars[start..j].iter().collect()), &mut out);
                i = j + 1;
            } else if c.is_ascii_digit()
                || (c == '.' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit()))
            {
                let start = i;
                while i < chars.len()
                    && (chars[i].is_ascii_digit()
                        || chars[i] == '.'
                        || chars[i] == 'e'
                        || chars[i] == 'E'
                        || ((chars[i] == '-' || chars[i] == '+')
                            && matches!(chars[i - 1], 'e' | 'E')))
                {
                    i += 1;
                }
                if i < chars.len() && chars[i] == 'L' {
                    i += 1;
                }
                let s: String = chars[start..i].iter().filter(|&&c| c != 'L').collect();
                let v = s.parse::<f64>().map_err(|_| Error::Parse {
                    line: *line,
                    message: format!("bad number `{s}`"),
                })?;
                push(Tok::Num(v), &mut out);
            } else if c.is_alphabetic() || c == '_' || c == '.' {
                let start = i;
                while i < chars.len()
                    && (chars[i].is_alphanumeric() || chars[i] == '_' || chars[i] == '.')
                {
                    i += 1;
                }
                push(Tok::Ident(chars[start..i].iter().collect()), &mut out);
            } else if c == '<' && chars.get(i + 1) == Some(&'-') {
                push(Tok::Assign, &mut out);
                i += 2;
            } else {
                let tok = match c {
                    '(' => Tok::LParen,
                    ')' => Tok::RParen,
                    ',' => Tok::Comma,
                    '=' => Tok::Assign,
                    other => Tok::Other(other),
                };
                push(tok, &mut out);
                i += 1;
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
enum Value {
    Str(String),
    Num(f64),
    Bool(bool),
    Na,
}

struct Parser<'a> {
    toks: &'a [Token],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.tok)
    }

    fn line(&self) -> usize {
        self.toks
            .get(self.pos)
            .or_else(|| self.toks.last())
            .map_or(0, |t| t.line)
    }

    fn err<T>(&self, message: impl Into<String>) -> Result<T> {
        Err(Error::Parse {
            line: self.line(),
            message: message.into(),
        })
    }

    fn expect(&mut self, tok: Tok) -> Result<()> {
        if self.peek() == Some(&tok) {
            self.pos += 1;
            Ok(())
        } else {
            self.err(format!("expected {tok:?}, found {:?}", self.peek()))
        }
    }

    fn scalar(&mut self) -> Result<Value> {
        let negative = if self.peek() == Some(&Tok::Other('-')) {
            self.pos += 1;
            true
        } else {
            false
        };
        let v = match self.peek().cloned() {
            Some(Tok::Str(s)) => Value::Str(s),
            Some(Tok::Num(n)) => Value::Num(if negative { -n } else { n }),
            Some(Tok::Ident(id)) => match id.as_str() {
                "TRUE" | "T" => Value::Bool(true),
                "FALSE" | "F" => Value::Bool(false),
                "NA" | "NA_character_" | "NA_real_" => Value::Na,
                "Inf" => Value::Num(if negative { f64::NEG_INFINITY } else { f64::INFINITY }),
                _ => return self.err(format!("unsupported value `{id}`")),
            },
            other => return self.err(format!("expected a value, found {other:?}")),
        };
        if negative && !matches!(v, Value::Num(_)) {
            return self.err("`-` applied to a non-number");
        }
        self.pos += 1;
        Ok(v)
    }

    /// A scalar or a `c(...)` vector.
    fn vector(&mut self) -> Result<Vec<Value>> {
        if let Some(Tok::Ident(id)) = self.peek() {
            if id == "c" && self.toks.get(self.pos + 1).map(|t| &t.tok) == Some(&Tok::LParen) {
                self.pos += 2;
                let mut out = Vec::new();
                if self.peek() == Some(&Tok::RParen) {
                    self.pos += 1;
                    return Ok(out);
                }
                loop {
                    out.push(self.scalar()?);
                    match self.peek() {
                        Some(Tok::Comma) => self.pos += 1,
                        Some(Tok::RParen) => {
                            self.pos += 1;
                            return Ok(out);
                        }
                        other => return self.err(format!("expected `,` or `)`, found {other:?}")),
                    }
                }
            }
        }
        Ok(vec![self.scalar()?])
    }

    fn mxpath(&mut self) -> Result<Vec<PathSpec>> {
        let start_line = self.line();
        self.expect(Tok::LParen)?;
        let mut from = None;
        let mut to = None;
        let mut free = None;
        let mut value = None;
        let mut arrows = None;
        let mut label = None;
        if self.peek() == Some(&Tok::RParen) {
            return self.err("mxPath() without arguments");
        }
        loop {
            let key = match self.peek().cloned() {
                Some(Tok::Ident(k)) => k,
                other => return self.err(format!("expected a keyword argument, found {other:?}")),
            };
            self.pos += 1;
            self.expect(Tok::Assign)?;
            let v = self.vector()?;
            match key.as_str() {
                "from" => from = Some(v),
                "to" => to = Some(v),
                "free" => free = Some(v),
                "value" | "values" => value = Some(v),
                "arrows" => arrows = Some(v),
                "label" | "labels" => label = Some(v),
                other => return self.err(format!("unknown mxPath keyword `{other}`")),
            }
            match self.peek() {
                Some(Tok::Comma) => self.pos += 1,
                Some(Tok::RParen) => {
                    self.pos += 1;
                    break;
                }
                other => return self.err(format!("expected `,` or `)`, found {other:?}")),
            }
        }
        let strings = |vals: Vec<Value>, what: &str| -> Result<Vec<String>> {
            vals.into_iter()
                .map(|v| match v {
                    Value::Str(s) => Ok(s),
                    other => Err(Error::Parse {
                        line: start_line,
                        message: format!("`{what}` must be strings, found {other:?}"),
                    }),
                })
                .collect()
        };
        let from = strings(
            from.ok_or_else(|| Error::Parse {
                line: start_line,
                message: "mxPath without `from`".into(),
            })?,
            "from",
        )?;
        let to = match to {
            Some(v) => strings(v, "to")?,
            None => from.clone(),
        };
        let arrows = match arrows.as_deref() {
            None => 1,
            Some([Value::Num(n)]) if *n == 1.0 || *n == 2.0 => *n as u8,
            Some(other) => {
                return Err(Error::Parse {
                    line: start_line,
                    message: format!("arrows must be 1 or 2, found {other:?}"),
                })
            }
        };
        let pairs: Vec<(String, String)> = match (from.len(), to.len()) {
            (1, _) => to.iter().map(|t| (from[0].clone(), t.clone())).collect(),
            (_, 1) => from.iter().map(|f| (f.clone(), to[0].clone())).collect(),
            (a, b) if a == b => from.into_iter().zip(to).collect(),
            (a, b) => {
                return Err(Error::Parse {
                    line: start_line,
                    message: format!("cannot pair {a} origins with {b} targets"),
                })
            }
        };
        let k = pairs.len();
        let broadcast = |v: Option<Vec<Value>>, what: &str| -> Result<Vec<Option<Value>>> {
            match v {
                None => Ok(vec![None; k]),
                Some(v) if v.len() == 1 => Ok(vec![Some(v[0].clone()); k]),
                Some(v) if v.len() == k => Ok(v.into_iter().map(Some).collect()),
                Some(v) => Err(Error::Parse {
                    line: start_line,
                    message: format!("`{what}` has {} entries for {k} paths", v.len()),
                }),
            }
        };
        let free = broadcast(free, "free")?;
        let value = broadcast(value, "value")?;
        let label = broadcast(label, "label")?;
        let mut out = Vec::with_capacity(k);
        for (i, (f, t)) in pairs.into_iter().enumerate() {
            let free = match &free[i] {
                None => true,
                Some(Value::Bool(b)) => *b,
                Some(other) => {
                    return Err(Error::Parse {
                        line: start_line,
                        message: format!("`free` must be logical, found {other:?}"),
                    })
                }
            };
            let value = match &value[i] {
                None | Some(Value::Na) => None,
                Some(Value::Num(n)) => Some(*n),
                Some(other) => {
                    return Err(Error::Parse {
                        line: start_line,
                        message: format!("`value` must be numeric, found {other:?}"),
                    })
                }
            };
            let label = match &label[i] {
                None | Some(Value::Na) => None,
                Some(Value::Str(s)) => Some(s.clone()),
                Some(other) => {
                    return Err(Error::Parse {
                        line: start_line,
                        message: format!("`label` must be strings, found {other:?}"),
                    })
                }
            };
            out.push(PathSpec {
                from: f,
                to: t,
                arrows,
                free,
                value,
                label,
                defn: false,
            });
        }
        Ok(out)
    }

    /// Skips a balanced parenthesised argument list.
    fn skip_call(&mut self) -> Result<()> {
        self.expect(Tok::LParen)?;
        let mut depth = 1;
        while depth > 0 {
            match self.peek() {
                Some(Tok::LParen) => depth += 1,
                Some(Tok::RParen) => depth -= 1,
                None => return self.err("unbalanced parentheses"),
                _ => {}
            }
            self.pos += 1;
        }
        Ok(())
    }
}

const WRAPPERS: &[&str] = &[
    "mxData",
    "mxModel",
    "mxRun",
    "umxRAM",
    "umxTwinMaker",
    "require",
    "library",
    "read.table",
    "read.csv",
];

fn declared_list(comment_or_code: &str, name: &str) -> Option<Vec<String>> {
    let text = comment_or_code.trim();
    let rest = text.strip_prefix(name)?.trim_start();
    let rest = rest
        .strip_prefix("<-")
        .or_else(|| rest.strip_prefix('='))?
        .trim_start();
    let inner = rest.strip_prefix("c(")?;
    let end = inner.find(')')?;
    Some(
        inner[..end]
            .split(',')
            .map(|s| s.trim().trim_matches(|c| c == '"' || c == '\'').to_string())
            .filter(|s| !s.is_empty())
            .collect(),
    )
}

/// Parses Onyx-exported OpenMx path code.
pub fn parse_onyx_export(text: &str) -> Result<ParsedPathSet> {
    let mut set = ParsedPathSet::default();
    let mut code = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let (code_part, comment) = split_comment(raw);
        for part in [Some(code_part), comment].into_iter().flatten() {
            if let Some(m) = declared_list(part, "manifests") {
                set.declared_manifests = m;
            }
            if let Some(l) = declared_list(part, "latents") {
                set.declared_latents = l;
            }
        }
        if let Some(c) = comment {
            for w in WRAPPERS {
                if c.contains(&format!("{w}(")) {
                    set.diagnostics.push(Diagnostic {
                        line,
                        message: format!("commented `{w}` call ignored"),
                    });
                }
            }
        }
        code.push((line, code_part.to_string()));
    }
    let toks = lex(&code)?;
    let depth: i64 = toks.iter().fold(0, |d, t| match t.tok {
        Tok::LParen => d + 1,
        Tok::RParen => d - 1,
        _ => d,
    });
    if depth != 0 {
        return Err(Error::Parse {
            line: toks.last().map_or(0, |t| t.line),
            message: "unbalanced parentheses".into(),
        });
    }
    let mut p = Parser {
        toks: &toks,
        pos: 0,
    };
    while let Some(tok) = p.peek().cloned() {
        match tok {
            Tok::Ident(id) if p.toks.get(p.pos + 1).map(|t| &t.tok) == Some(&Tok::LParen) => {
                let line = p.line();
                p.pos += 1;
                if id == "mxPath" || id == "umxPath" {
                    let mut specs = p.mxpath()?;
                    set.paths.append(&mut specs);
                } else if WRAPPERS.contains(&id.as_str()) {
                    set.diagnostics.push(Diagnostic {
                        line,
                        message: format!("`{id}` call ignored; data and models are bound separately"),
                    });
                    p.skip_call()?;
                } else if id == "c" {
                    p.pos += 1;
                } else {
                    set.diagnostics.push(Diagnostic {
                        line,
                        message: format!("unrecognized call `{id}` ignored"),
                    });
                    p.skip_call()?;
                }
            }
            _ => p.pos += 1,
        }
    }
    set.diagnostics.sort_by_key(|d| d.line);
    Ok(set)
}
