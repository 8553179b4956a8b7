//! S-expression matchers over the package, class and name of methods and
//! fields, and over string constants.
//!
//! ```text
//! (and (or (starts-with-package android.) (starts-with-package com.android.))
//!      (regex-name-words `^(enforce|has|check)\s([a-z\s]+\s)?permission(s)?\b`)
//!      (not (equals-package android.test)))
//! ```
//!
//! Regex literals are delimited by backquotes. A newline inside a literal,
//! together with the indentation that follows it, is dropped so long patterns
//! can be wrapped across lines.

use std::collections::BTreeSet;
use std::fmt;

use regex::Regex;
use thiserror::Error;

use crate::ir::{Member, MethodRef, Program};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MatcherError {
    #[error("line {line}: unbalanced parentheses")]
    Unbalanced { line: usize },
    #[error("line {line}: unterminated regex literal")]
    Unterminated { line: usize },
    #[error("line {line}: unknown operation `{op}`")]
    UnknownOp { line: usize, op: String },
    #[error("line {line}: `{op}` {msg}")]
    Arity { line: usize, op: String, msg: String },
    #[error("line {line}: bad regex: {msg}")]
    BadRegex { line: usize, msg: String },
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Part {
    Package,
    Class,
    Name,
    /// The whole subject; used by string matchers.
    Whole,
}

impl Part {
    fn suffix(self) -> &'static str {
        match self {
            Part::Package => "-package",
            Part::Class => "-class",
            Part::Name => "-name",
            Part::Whole => "",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TextOp {
    StartsWith,
    EndsWith,
    Contains,
    Equals,
}

impl TextOp {
    fn keyword(self) -> &'static str {
        match self {
            TextOp::StartsWith => "starts-with",
            TextOp::EndsWith => "ends-with",
            TextOp::Contains => "contains",
            TextOp::Equals => "equals",
        }
    }

    fn apply(self, subject: &str, arg: &str) -> bool {
        match self {
            TextOp::StartsWith => subject.starts_with(arg),
            TextOp::EndsWith => subject.ends_with(arg),
            TextOp::Contains => subject.contains(arg),
            TextOp::Equals => subject == arg,
        }
    }
}

/// A compiled pattern that compares by its source text.
#[derive(Debug, Clone)]
pub struct Pattern(Regex);

impl Pattern {
    pub fn new(src: &str) -> Result<Self, regex::Error> {
        Regex::new(src).map(Pattern)
    }

    pub fn as_str(&self) -> &str {
        self.0.as_str()
    }

    pub fn is_match(&self, s: &str) -> bool {
        self.0.is_match(s)
    }
}

impl PartialEq for Pattern {
    fn eq(&self, other: &Self) -> bool {
        self.as_str() == other.as_str()
    }
}

impl Eq for Pattern {}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MatcherExpr {
    And(Vec<MatcherExpr>),
    Or(Vec<MatcherExpr>),
    Not(Box<MatcherExpr>),
    Text {
        op: TextOp,
        part: Part,
        arg: String,
    },
    Regex {
        part: Part,
        pattern: Pattern,
    },
    NameWords(Pattern),
    /// Class words of the `$` component at `index` (0 innermost, -1 any).
    ClassWords(Pattern, i64),
}

/// Lowercase words of an identifier, split at lower-to-upper transitions and
/// at any non-alphanumeric character, joined by single spaces.
pub fn split_words(ident: &str) -> String {
    let mut words: Vec<String> = Vec::new();
    let mut cur = String::new();
    let mut prev_upper = true;
    for c in ident.chars() {
        if !c.is_alphanumeric() {
            if !cur.is_empty() {
                words.push(std::mem::take(&mut cur));
            }
            prev_upper = true;
            continue;
        }
        if c.is_uppercase() && !prev_upper && !cur.is_empty() {
            words.push(std::mem::take(&mut cur));
        }
        prev_upper = c.is_uppercase();
        cur.extend(c.to_lowercase());
    }
    if !cur.is_empty() {
        words.push(cur);
    }
    words.join(" ")
}

/// What a matcher is evaluated against.
#[derive(Debug, Clone, Copy)]
pub enum Subject<'a> {
    Member { package: &'a str, class: &'a str, name: &'a str },
    Str(&'a str),
}

impl<'a> Subject<'a> {
    pub fn of<M: Member>(m: &'a M) -> Self {
        Subject::Member { package: m.package(), class: m.simple_class(), name: m.member_name() }
    }
}

impl MatcherExpr {
    pub fn eval(&self, subject: Subject<'_>) -> bool {
        match self {
            MatcherExpr::And(cs) => cs.iter().all(|c| c.eval(subject)),
            MatcherExpr::Or(cs) => cs.iter().any(|c| c.eval(subject)),
            MatcherExpr::Not(c) => !c.eval(subject),
            MatcherExpr::Text { op, part, arg } => part_of(subject, *part).is_some_and(|s| op.apply(s, arg)),
            MatcherExpr::Regex { part, pattern } => part_of(subject, *part).is_some_and(|s| pattern.is_match(s)),
            MatcherExpr::NameWords(p) => match subject {
                Subject::Member { name, .. } => p.is_match(&split_words(name)),
                Subject::Str(_) => false,
            },
            MatcherExpr::ClassWords(p, index) => match subject {
                Subject::Member { class, .. } => {
                    let parts: Vec<&str> = class.split('$').rev().collect();
                    if *index < 0 {
                        parts.iter().any(|c| p.is_match(&split_words(c)))
                    } else {
                        usize::try_from(*index)
                            .ok()
                            .and_then(|i| parts.get(i))
                            .is_some_and(|c| p.is_match(&split_words(c)))
                    }
                }
                Subject::Str(_) => false,
            },
        }
    }

    pub fn matches<M: Member>(&self, m: &M) -> bool {
        self.eval(Subject::of(m))
    }

    pub fn matches_str(&self, s: &str) -> bool {
        self.eval(Subject::Str(s))
    }
}

fn part_of(subject: Subject<'_>, part: Part) -> Option<&str> {
    match (subject, part) {
        (Subject::Member { package, .. }, Part::Package) => Some(package),
        (Subject::Member { class, .. }, Part::Class) => Some(class),
        (Subject::Member { name, .. }, Part::Name) => Some(name),
        (Subject::Str(s), Part::Whole) => Some(s),
        _ => None,
    }
}

impl fmt::Display for MatcherExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let list = |f: &mut fmt::Formatter<'_>, op: &str, cs: &[MatcherExpr]| {
            write!(f, "({op}")?;
            for c in cs {
                write!(f, " {c}")?;
            }
            f.write_str(")")
        };
        match self {
            MatcherExpr::And(cs) => list(f, "and", cs),
            MatcherExpr::Or(cs) => list(f, "or", cs),
            MatcherExpr::Not(c) => write!(f, "(not {c})"),
            MatcherExpr::Text { op, part, arg } => write!(f, "({}{} `{arg}`)", op.keyword(), part.suffix()),
            MatcherExpr::Regex { part, pattern } => write!(f, "(regex{} `{}`)", part.suffix(), pattern.as_str()),
            MatcherExpr::NameWords(p) => write!(f, "(regex-name-words `{}`)", p.as_str()),
            MatcherExpr::ClassWords(p, i) => write!(f, "(regex-class-words `{}` {i})", p.as_str()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Open,
    Close,
    Atom(String),
    Quoted(String),
}

fn tokenize(text: &str) -> Result<Vec<(Tok, usize)>, MatcherError> {
    let mut out = Vec::new();
    let mut chars = text.chars().peekable();
    let mut line = 1;
    while let Some(c) = chars.next() {
        match c {
            '\n' => line += 1,
            c if c.is_whitespace() => {}
            ';' => {
                while chars.peek().is_some_and(|&c| c != '\n') {
                    chars.next();
                }
            }
            '(' => out.push((Tok::Open, line)),
            ')' => out.push((Tok::Close, line)),
            '`' => {
                let start = line;
                let mut s = String::new();
                loop {
                    match chars.next() {
                        None => return Err(MatcherError::Unterminated { line: start }),
                        Some('`') => break,
                        Some('\n') => {
                            line += 1;
                            while chars.peek().is_some_and(|&c| c == ' ' || c == '\t') {
                                chars.next();
                            }
                        }
                        Some(c) => s.push(c),
                    }
                }
                out.push((Tok::Quoted(s), start));
            }
            c => {
                let mut s = String::from(c);
                while chars.peek().is_some_and(|&c| !c.is_whitespace() && !matches!(c, '(' | ')' | '`' | ';')) {
                    s.push(chars.next().unwrap());
                }
                out.push((Tok::Atom(s), line));
            }
        }
    }
    Ok(out)
}

enum Sexp {
    List(Vec<Sexp>, usize),
    Atom(String, usize),
    Quoted(String, usize),
}

fn read_forms(toks: &[(Tok, usize)]) -> Result<Vec<Sexp>, MatcherError> {
    let mut stack: Vec<(Vec<Sexp>, usize)> = vec![(Vec::new(), 1)];
    for (t, line) in toks {
        match t {
            Tok::Open => stack.push((Vec::new(), *line)),
            Tok::Close => {
                if stack.len() == 1 {
                    return Err(MatcherError::Unbalanced { line: *line });
                }
                let (items, start) = stack.pop().unwrap();
                stack.last_mut().unwrap().0.push(Sexp::List(items, start));
            }
            Tok::Atom(a) => stack.last_mut().unwrap().0.push(Sexp::Atom(a.clone(), *line)),
            Tok::Quoted(q) => stack.last_mut().unwrap().0.push(Sexp::Quoted(q.clone(), *line)),
        }
    }
    if stack.len() > 1 {
        return Err(MatcherError::Unbalanced { line: stack.last().unwrap().1 });
    }
    Ok(stack.pop().unwrap().0)
}

fn leaf_op(op: &str) -> Option<(&'static str, Part)> {
    let canonical = op.strip_prefix("equal-").map(|rest| format!("equals-{rest}"));
    let op = canonical.as_deref().unwrap_or(op);
    if op == "equal" {
        return Some(("equals", Part::Whole));
    }
    for kw in ["starts-with", "ends-with", "contains", "equals", "regex"] {
        if let Some(rest) = op.strip_prefix(kw) {
            let part = match rest {
                "" => Part::Whole,
                "-package" => Part::Package,
                "-class" => Part::Class,
                "-name" => Part::Name,
                _ => continue,
            };
            return Some((kw, part));
        }
    }
    None
}

fn build(form: &Sexp) -> Result<MatcherExpr, MatcherError> {
    let (items, line) = match form {
        Sexp::List(items, line) => (items, *line),
        Sexp::Atom(_, line) | Sexp::Quoted(_, line) => {
            return Err(MatcherError::Syntax { line: *line, msg: "expected `(`".into() })
        }
    };
    let Some(Sexp::Atom(op, _)) = items.first() else {
        return Err(MatcherError::Syntax { line, msg: "expected an operation name".into() });
    };
    let args = &items[1..];
    let arity = |msg: &str| MatcherError::Arity { line, op: op.clone(), msg: msg.into() };
    let text_arg = |a: &Sexp| match a {
        Sexp::Atom(s, _) | Sexp::Quoted(s, _) => Ok(s.clone()),
        Sexp::List(..) => Err(arity("takes a string argument")),
    };
    let pattern = |a: &Sexp| {
        let src = text_arg(a)?;
        Pattern::new(&src).map_err(|e| MatcherError::BadRegex { line, msg: e.to_string() })
    };
    match op.as_str() {
        "and" | "or" => {
            if args.len() < 2 {
                return Err(arity("needs at least 2 operands"));
            }
            let cs = args.iter().map(build).collect::<Result<Vec<_>, _>>()?;
            Ok(if op == "and" { MatcherExpr::And(cs) } else { MatcherExpr::Or(cs) })
        }
        "not" => match args {
            [c] => Ok(MatcherExpr::Not(Box::new(build(c)?))),
            _ => Err(arity("needs exactly 1 operand")),
        },
        "regex-name-words" => match args {
            [a] => Ok(MatcherExpr::NameWords(pattern(a)?)),
            _ => Err(arity("needs exactly 1 argument")),
        },
        "regex-class-words" => match args {
            [a] => Ok(MatcherExpr::ClassWords(pattern(a)?, 0)),
            [a, Sexp::Atom(i, _)] => {
                let index: i64 = i.parse().map_err(|_| arity("index must be an integer"))?;
                if index < -1 {
                    return Err(arity("index must be at least -1"));
                }
                Ok(MatcherExpr::ClassWords(pattern(a)?, index))
            }
            _ => Err(arity("needs a regex and an optional index")),
        },
        _ => {
            let Some((kw, part)) = leaf_op(op) else {
                return Err(MatcherError::UnknownOp { line, op: op.clone() });
            };
            let [a] = args else {
                return Err(arity("needs exactly 1 argument"));
            };
            if kw == "regex" {
                return Ok(MatcherExpr::Regex { part, pattern: pattern(a)? });
            }
            let op = match kw {
                "starts-with" => TextOp::StartsWith,
                "ends-with" => TextOp::EndsWith,
                "contains" => TextOp::Contains,
                _ => TextOp::Equals,
            };
            Ok(MatcherExpr::Text { op, part, arg: text_arg(a)? })
        }
    }
}

/// Parses a single matcher expression.
pub fn parse_matcher(text: &str) -> Result<MatcherExpr, MatcherError> {
    let forms = read_forms(&tokenize(text)?)?;
    match forms.as_slice() {
        [f] => build(f),
        [] => Err(MatcherError::Syntax { line: 1, msg: "empty matcher".into() }),
        [_, f, ..] => {
            let line = match f {
                Sexp::List(_, l) | Sexp::Atom(_, l) | Sexp::Quoted(_, l) => *l,
            };
            Err(MatcherError::Syntax { line, msg: "more than one expression".into() })
        }
    }
}

/// Parses a context-query file: any number of top-level forms, `;` comments.
pub fn parse_matchers(text: &str) -> Result<Vec<MatcherExpr>, MatcherError> {
    read_forms(&tokenize(text)?)?.iter().map(build).collect()
}

/// Parses a seed file: one method signature per line, `#` comments.
pub fn parse_seeds(text: &str) -> Result<Vec<MethodRef>, MatcherError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        out.push(
            line.parse()
                .map_err(|e: crate::ir::SignatureError| MatcherError::Syntax { line: i + 1, msg: e.to_string() })?,
        );
    }
    Ok(out)
}

/// Methods with bodies matched by any expression, plus the seeds.
pub fn identify_context_queries(program: &Program, exprs: &[MatcherExpr], seeds: &[MethodRef]) -> BTreeSet<MethodRef> {
    let mut out: BTreeSet<MethodRef> = seeds.iter().cloned().collect();
    if exprs.is_empty() {
        return out;
    }
    for m in program.methods().filter(|m| m.body.is_some()) {
        let sig = m.sig();
        if exprs.iter().any(|e| e.matches(&sig)) {
            out.insert(sig);
        }
    }
    out
}
