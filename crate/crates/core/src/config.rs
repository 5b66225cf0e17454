//! Line-oriented configuration files.
//!
//! ```text
//! # dog and sheep
//! a = 0.2 1 1
//! b = 1 1 1
//! horizon = 1e5      # optional simulation keys follow
//! seed = 7
//! ```
//!
//! Each non-blank line is `key = value`. Arrays are whitespace-separated.
//! `#` starts a comment that runs to the end of the line. Line endings may be
//! LF or CRLF. Keys: `a`, `b` (required, equal length), `horizon`, `burn_in`
//! (reals), `seed`, `replicas`, `cap` (non-negative integers), `initial_gaps`
//! (array of non-negative integers). Every key may appear at most once.

use std::fmt::Write as _;

use thiserror::Error;

use crate::error::Result as CoreResult;
use crate::model::RateSystem;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("line {line}, column {column}: {message}")]
    Syntax { line: usize, column: usize, message: String },

    #[error("line {line}: unknown key \"{key}\"")]
    UnknownKey { line: usize, key: String },

    #[error("line {line}: duplicate key \"{key}\" (first set on line {first})")]
    DuplicateKey { line: usize, key: String, first: usize },

    #[error("line {line}, column {column}: value \"{token}\" is not finite")]
    NonFinite { line: usize, column: usize, token: String },

    #[error("missing required key \"{0}\"")]
    MissingKey(&'static str),

    #[error("a has {a} entries but b has {b}")]
    LengthMismatch { a: usize, b: usize },
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigFile {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub horizon: Option<f64>,
    pub seed: Option<u64>,
    pub replicas: Option<u64>,
    pub burn_in: Option<f64>,
    pub initial_gaps: Option<Vec<u64>>,
    pub cap: Option<u64>,
}

const KEYS: [&str; 8] = ["a", "b", "horizon", "seed", "replicas", "burn_in", "initial_gaps", "cap"];

impl ConfigFile {
    pub fn new(a: Vec<f64>, b: Vec<f64>) -> Self {
        ConfigFile { a, b, ..Default::default() }
    }

    pub fn rates(&self) -> CoreResult<RateSystem> {
        RateSystem::new(self.a.clone(), self.b.clone())
    }

    /// Canonical text form; reals use the shortest round-trip decimal.
    pub fn to_text(&self) -> String {
        let join_f = |xs: &[f64]| xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ");
        let mut out = String::new();
        let _ = writeln!(out, "a = {}", join_f(&self.a));
        let _ = writeln!(out, "b = {}", join_f(&self.b));
        if let Some(h) = self.horizon {
            let _ = writeln!(out, "horizon = {h}");
        }
        if let Some(s) = self.seed {
            let _ = writeln!(out, "seed = {s}");
        }
        if let Some(r) = self.replicas {
            let _ = writeln!(out, "replicas = {r}");
        }
        if let Some(b) = self.burn_in {
            let _ = writeln!(out, "burn_in = {b}");
        }
        if let Some(g) = &self.initial_gaps {
            let g: Vec<String> = g.iter().map(|x| x.to_string()).collect();
            let _ = writeln!(out, "initial_gaps = {}", g.join(" "));
        }
        if let Some(c) = self.cap {
            let _ = writeln!(out, "cap = {c}");
        }
        out
    }
}

struct Token<'a> {
    text: &'a str,
    column: usize,
}

fn tokens(s: &str, offset: usize) -> Vec<Token<'_>> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, c) in s.char_indices() {
        match (c.is_whitespace(), start) {
            (true, Some(st)) => {
                out.push(Token { text: &s[st..i], column: offset + s[..st].chars().count() + 1 });
                start = None;
            }
            (false, None) => start = Some(i),
            _ => {}
        }
    }
    if let Some(st) = start {
        out.push(Token { text: &s[st..], column: offset + s[..st].chars().count() + 1 });
    }
    out
}

fn real(tok: &Token<'_>, line: usize) -> Result<f64, ConfigError> {
    let v: f64 = tok.text.parse().map_err(|_| ConfigError::Syntax {
        line,
        column: tok.column,
        message: format!("expected a decimal number, found \"{}\"", tok.text),
    })?;
    if !v.is_finite() {
        return Err(ConfigError::NonFinite { line, column: tok.column, token: tok.text.to_string() });
    }
    Ok(v)
}

fn integer(tok: &Token<'_>, line: usize) -> Result<u64, ConfigError> {
    tok.text.parse().map_err(|_| ConfigError::Syntax {
        line,
        column: tok.column,
        message: format!("expected a non-negative integer, found \"{}\"", tok.text),
    })
}

fn single<'a, 'b>(toks: &'b [Token<'a>], line: usize, eq_col: usize, key: &str) -> Result<&'b Token<'a>, ConfigError> {
    match toks {
        [t] => Ok(t),
        [] => Err(ConfigError::Syntax { line, column: eq_col + 1, message: format!("\"{key}\" needs a value") }),
        [_, t, ..] => Err(ConfigError::Syntax {
            line,
            column: t.column,
            message: format!("\"{key}\" takes a single value"),
        }),
    }
}

/// Parses configuration text.
pub fn parse_config(text: &str) -> Result<ConfigFile, ConfigError> {
    let mut cfg = ConfigFile::default();
    let mut seen: Vec<(&'static str, usize)> = Vec::new();
    let mut have_a = false;
    let mut have_b = false;
    for (idx, raw) in text.split('\n').enumerate() {
        let line = idx + 1;
        let raw = raw.strip_suffix('\r').unwrap_or(raw);
        let content = match raw.find('#') {
            Some(i) => &raw[..i],
            None => raw,
        };
        if content.trim().is_empty() {
            continue;
        }
        let Some(eq) = content.find('=') else {
            let col = content.chars().take_while(|c| c.is_whitespace()).count() + 1;
            return Err(ConfigError::Syntax { line, column: col, message: "expected \"key = value\"".into() });
        };
        let eq_col = content[..eq].chars().count() + 1;
        let key_toks = tokens(&content[..eq], 0);
        let key_tok = match key_toks.as_slice() {
            [k] => k,
            [] => return Err(ConfigError::Syntax { line, column: eq_col, message: "missing key before \"=\"".into() }),
            [_, k, ..] => {
                return Err(ConfigError::Syntax { line, column: k.column, message: "key must be a single word".into() })
            }
        };
        let Some(&key) = KEYS.iter().find(|&&k| k == key_tok.text) else {
            return Err(ConfigError::UnknownKey { line, key: key_tok.text.to_string() });
        };
        if let Some(&(_, first)) = seen.iter().find(|(k, _)| *k == key) {
            return Err(ConfigError::DuplicateKey { line, key: key.to_string(), first });
        }
        seen.push((key, line));
        let value_offset = content[..eq + 1].chars().count();
        let vals = tokens(&content[eq + 1..], value_offset);
        let reals = |vals: &[Token<'_>]| -> Result<Vec<f64>, ConfigError> {
            if vals.is_empty() {
                return Err(ConfigError::Syntax { line, column: eq_col + 1, message: format!("\"{key}\" needs values") });
            }
            vals.iter().map(|t| real(t, line)).collect()
        };
        match key {
            "a" => {
                cfg.a = reals(&vals)?;
                have_a = true;
            }
            "b" => {
                cfg.b = reals(&vals)?;
                have_b = true;
            }
            "horizon" => cfg.horizon = Some(real(single(&vals, line, eq_col, key)?, line)?),
            "burn_in" => cfg.burn_in = Some(real(single(&vals, line, eq_col, key)?, line)?),
            "seed" => cfg.seed = Some(integer(single(&vals, line, eq_col, key)?, line)?),
            "replicas" => cfg.replicas = Some(integer(single(&vals, line, eq_col, key)?, line)?),
            "cap" => cfg.cap = Some(integer(single(&vals, line, eq_col, key)?, line)?),
            "initial_gaps" => {
                if vals.is_empty() {
                    return Err(ConfigError::Syntax { line, column: eq_col + 1, message: "\"initial_gaps\" needs values".into() });
                }
                cfg.initial_gaps = Some(vals.iter().map(|t| integer(t, line)).collect::<Result<_, _>>()?);
            }
            _ => unreachable!("key list is exhaustive"),
        }
    }
    if !have_a {
        return Err(ConfigError::MissingKey("a"));
    }
    if !have_b {
        return Err(ConfigError::MissingKey("b"));
    }
    if cfg.a.len() != cfg.b.len() {
        return Err(ConfigError::LengthMismatch { a: cfg.a.len(), b: cfg.b.len() });
    }
    Ok(cfg)
}
