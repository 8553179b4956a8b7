//! The control-predicate filter: XML-described keep rules deciding which
//! candidate conditionals are authorization checks.
//!
//! ```xml
//! <Filter>
//!   <KeepFieldValueUse Value="(regex-name-words `\b(flag(s)?)\b`)">
//!     <Restrictions UseUnion="false">
//!       <IsInArithmeticChain HandleConstants="false"/>
//!     </Restrictions>
//!   </KeepFieldValueUse>
//! </Filter>
//! ```

mod candidate;
mod loops;

use std::collections::BTreeSet;

use roxmltree::{Document, Node};
use thiserror::Error;

use crate::ir::{Program, Statement};
use crate::matchlang::{parse_matcher, MatcherError, MatcherExpr};

pub use candidate::{candidate_for, origins, ChainStep, ConditionalCandidate, Element, ElementKind};
pub use loops::{back_edges, detect_loop_conditionals};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FilterError {
    #[error("malformed filter document: {0}")]
    Xml(String),
    #[error("line {line}: unknown element `{name}`")]
    UnknownElement { line: u32, name: String },
    #[error("line {line}: attribute `{attr}`: {msg}")]
    BadAttribute { line: u32, attr: String, msg: String },
    #[error("line {line}: bad matcher: {source}")]
    BadMatcher { line: u32, source: MatcherError },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MatcherKind {
    Method,
    String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Restriction {
    IsInArithmeticChain { handle_constants: bool },
    IsValueUsedInMethodCall { position: i32, kind: MatcherKind, matcher: MatcherExpr, nested: Option<Box<Restriction>> },
    Group { use_union: bool, items: Vec<Restriction> },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Rule {
    KeepFieldValueUse { matcher: MatcherExpr, restrictions: Option<Restriction> },
    KeepMethodReturnValueUse { matcher: MatcherExpr, restrictions: Option<Restriction> },
    KeepStringUse { matcher: MatcherExpr, restrictions: Option<Restriction> },
    KeepMethodContainerUse { matcher: MatcherExpr },
    And(Vec<Rule>),
    Or(Vec<Rule>),
    Not(Box<Rule>),
}

/// Top-level rules; a candidate is kept when any of them holds.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FilterSpec {
    pub rules: Vec<Rule>,
}

/// Escapes raw newlines inside attribute values so they survive XML attribute
/// normalization and reach the matcher parser intact.
fn protect_attribute_newlines(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut in_tag = false;
    let mut quote: Option<char> = None;
    for c in text.chars() {
        match (in_tag, quote, c) {
            (false, _, '<') => in_tag = true,
            (true, None, '>') => in_tag = false,
            (true, None, '"' | '\'') => quote = Some(c),
            (true, Some(q), c) if c == q => quote = None,
            (true, Some(_), '\n') => {
                out.push_str("&#10;");
                continue;
            }
            _ => {}
        }
        out.push(c);
    }
    out
}

pub fn parse_filter(text: &str) -> Result<FilterSpec, FilterError> {
    if text.trim().is_empty() {
        return Ok(FilterSpec::default());
    }
    let protected = protect_attribute_newlines(text);
    let doc = Document::parse(&protected).map_err(|e| FilterError::Xml(e.to_string()))?;
    let rules = doc
        .root_element()
        .children()
        .filter(Node::is_element)
        .map(|n| parse_rule(&doc, n))
        .collect::<Result<_, _>>()?;
    Ok(FilterSpec { rules })
}

fn line_of(doc: &Document, n: Node) -> u32 {
    doc.text_pos_at(n.range().start).row
}

fn matcher_attr(doc: &Document, n: Node) -> Result<MatcherExpr, FilterError> {
    let line = line_of(doc, n);
    let v = n.attribute("Value").ok_or_else(|| FilterError::BadAttribute {
        line,
        attr: "Value".into(),
        msg: "missing".into(),
    })?;
    parse_matcher(v).map_err(|source| FilterError::BadMatcher { line, source })
}

fn bool_attr(doc: &Document, n: Node, name: &str) -> Result<bool, FilterError> {
    match n.attribute(name) {
        None => Ok(false),
        Some("true") => Ok(true),
        Some("false") => Ok(false),
        Some(other) => Err(FilterError::BadAttribute {
            line: line_of(doc, n),
            attr: name.into(),
            msg: format!("expected true or false, found `{other}`"),
        }),
    }
}

fn elements<'a, 'i>(n: Node<'a, 'i>) -> impl Iterator<Item = Node<'a, 'i>> {
    n.children().filter(Node::is_element)
}

fn unknown(doc: &Document, n: Node) -> FilterError {
    FilterError::UnknownElement { line: line_of(doc, n), name: n.tag_name().name().to_string() }
}

/// All `Restrictions` children of a rule, combined by conjunction.
fn rule_restrictions(doc: &Document, n: Node) -> Result<Option<Restriction>, FilterError> {
    let mut items = Vec::new();
    for c in elements(n) {
        match c.tag_name().name() {
            "Restrictions" => items.push(parse_restriction(doc, c)?),
            _ => return Err(unknown(doc, c)),
        }
    }
    Ok(match items.len() {
        0 => None,
        1 => items.pop(),
        _ => Some(Restriction::Group { use_union: false, items }),
    })
}

fn parse_rule(doc: &Document, n: Node) -> Result<Rule, FilterError> {
    let sub = |n: Node| elements(n).map(|c| parse_rule(doc, c)).collect::<Result<Vec<_>, _>>();
    Ok(match n.tag_name().name() {
        "KeepFieldValueUse" => {
            Rule::KeepFieldValueUse { matcher: matcher_attr(doc, n)?, restrictions: rule_restrictions(doc, n)? }
        }
        "KeepMethodReturnValueUse" => {
            Rule::KeepMethodReturnValueUse { matcher: matcher_attr(doc, n)?, restrictions: rule_restrictions(doc, n)? }
        }
        "KeepStringUse" => {
            Rule::KeepStringUse { matcher: matcher_attr(doc, n)?, restrictions: rule_restrictions(doc, n)? }
        }
        "KeepMethodContainerUse" => {
            if let Some(c) = elements(n).next() {
                return Err(unknown(doc, c));
            }
            Rule::KeepMethodContainerUse { matcher: matcher_attr(doc, n)? }
        }
        "And" => Rule::And(sub(n)?),
        "Or" => Rule::Or(sub(n)?),
        "Not" => {
            let mut rules = sub(n)?;
            if rules.len() != 1 {
                return Err(FilterError::BadAttribute {
                    line: line_of(doc, n),
                    attr: "Not".into(),
                    msg: "needs exactly one rule".into(),
                });
            }
            Rule::Not(Box::new(rules.remove(0)))
        }
        _ => return Err(unknown(doc, n)),
    })
}

fn parse_restriction(doc: &Document, n: Node) -> Result<Restriction, FilterError> {
    let line = line_of(doc, n);
    match n.tag_name().name() {
        "IsInArithmeticChain" => {
            Ok(Restriction::IsInArithmeticChain { handle_constants: bool_attr(doc, n, "HandleConstants")? })
        }
        "Restrictions" => Ok(Restriction::Group {
            use_union: bool_attr(doc, n, "UseUnion")?,
            items: elements(n).map(|c| parse_restriction(doc, c)).collect::<Result<_, _>>()?,
        }),
        "IsValueUsedInMethodCall" => {
            let bad = |msg: String| FilterError::BadAttribute { line, attr: "Position".into(), msg };
            let raw = n.attribute("Position").ok_or_else(|| bad("missing".into()))?;
            let position: i32 = raw.trim().parse().map_err(|_| bad(format!("not an integer: `{raw}`")))?;
            if position < -1 {
                return Err(bad(format!("must be at least -1, found {position}")));
            }
            let mut matcher = None;
            let mut nested = Vec::new();
            for c in elements(n) {
                match c.tag_name().name() {
                    "Matcher" => {
                        let kind = match c.attribute("class") {
                            Some("MethodMatcher") => MatcherKind::Method,
                            Some("StringMatcher") => MatcherKind::String,
                            other => {
                                return Err(FilterError::BadAttribute {
                                    line: line_of(doc, c),
                                    attr: "class".into(),
                                    msg: format!("expected MethodMatcher or StringMatcher, found {other:?}"),
                                })
                            }
                        };
                        matcher = Some((kind, matcher_attr(doc, c)?));
                    }
                    "Restrictions" => nested.push(parse_restriction(doc, c)?),
                    _ => return Err(unknown(doc, c)),
                }
            }
            let (kind, matcher) = matcher.ok_or_else(|| FilterError::BadAttribute {
                line,
                attr: "Matcher".into(),
                msg: "missing Matcher element".into(),
            })?;
            let nested = match nested.len() {
                0 => None,
                1 => nested.pop().map(Box::new),
                _ => Some(Box::new(Restriction::Group { use_union: false, items: nested })),
            };
            Ok(Restriction::IsValueUsedInMethodCall { position, kind, matcher, nested })
        }
        _ => Err(unknown(doc, n)),
    }
}

fn element_matches(kind: &MatcherKind, matcher: &MatcherExpr, e: &Element) -> bool {
    match (kind, &e.kind) {
        (MatcherKind::Method, ElementKind::MethodReturn { targets, .. }) => targets.iter().any(|t| matcher.matches(t)),
        (MatcherKind::String, ElementKind::StringConst(s)) => matcher.matches_str(s),
        _ => false,
    }
}

impl Restriction {
    pub fn holds(&self, program: &Program, e: &Element) -> bool {
        match self {
            Restriction::IsInArithmeticChain { handle_constants } => {
                e.is_arithmetic_chain() && (*handle_constants || !matches!(e.kind, ElementKind::StringConst(_)))
            }
            Restriction::Group { use_union: true, items } => items.iter().any(|r| r.holds(program, e)),
            Restriction::Group { use_union: false, items } => items.iter().all(|r| r.holds(program, e)),
            Restriction::IsValueUsedInMethodCall { position, kind, matcher, nested } => {
                let ElementKind::MethodReturn { site, .. } = &e.kind else { return false };
                let Some(method) = program.method(&site.method) else { return false };
                let Some(Statement::Invoke(inv)) = method.body().get(site.index) else { return false };
                let Some(v) = inv.value_at(*position) else { return false };
                origins(program, method, &site.method, &v)
                    .iter()
                    .any(|o| element_matches(kind, matcher, o) && nested.as_ref().is_none_or(|n| n.holds(program, o)))
            }
        }
    }
}

fn restrictions_hold(restrictions: &Option<Restriction>, program: &Program, e: &Element) -> bool {
    restrictions.as_ref().is_none_or(|r| r.holds(program, e))
}

impl Rule {
    pub fn holds(&self, program: &Program, c: &ConditionalCandidate) -> bool {
        let any = |pred: &dyn Fn(&Element) -> bool| c.elements.iter().any(pred);
        match self {
            Rule::KeepFieldValueUse { matcher, restrictions } => any(&|e| {
                matches!(&e.kind, ElementKind::Field(f) if matcher.matches(f))
                    && restrictions_hold(restrictions, program, e)
            }),
            Rule::KeepMethodReturnValueUse { matcher, restrictions } => any(&|e| {
                element_matches(&MatcherKind::Method, matcher, e) && restrictions_hold(restrictions, program, e)
            }),
            Rule::KeepStringUse { matcher, restrictions } => any(&|e| {
                element_matches(&MatcherKind::String, matcher, e) && restrictions_hold(restrictions, program, e)
            }),
            Rule::KeepMethodContainerUse { matcher } => matcher.matches(c.method()),
            Rule::And(rs) => rs.iter().all(|r| r.holds(program, c)),
            Rule::Or(rs) => rs.iter().any(|r| r.holds(program, c)),
            Rule::Not(r) => !r.holds(program, c),
        }
    }
}

impl FilterSpec {
    pub fn holds(&self, program: &Program, c: &ConditionalCandidate) -> bool {
        self.rules.iter().any(|r| r.holds(program, c))
    }
}

/// Decides whether a candidate conditional is kept.
///
/// Loop conditionals are always rejected. Conditionals inside context queries
/// or fed by a context-query return (`cq_derived`) are always kept. Anything
/// else is kept when the spec holds.
pub fn evaluate_filter(
    spec: &FilterSpec,
    program: &Program,
    candidate: &ConditionalCandidate,
    loop_set: &BTreeSet<usize>,
    cq_derived: bool,
) -> bool {
    if loop_set.contains(&candidate.site.index) {
        return false;
    }
    cq_derived || spec.holds(program, candidate)
}
