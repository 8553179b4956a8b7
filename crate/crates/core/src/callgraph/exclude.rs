use std::collections::BTreeSet;

use thiserror::Error;

use crate::ir::{MethodRef, Program};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {msg}")]
pub struct ExcludeError {
    pub line: usize,
    pub msg: String,
}

/// A class-path pattern: an exact class name, or a prefix when written with a
/// trailing `.*` (package prefix) or `$*` (outer class and all inner classes).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum ClassPattern {
    Exact(String),
    Package(String),
    Nested(String),
}

impl ClassPattern {
    pub fn parse(text: &str) -> Option<Self> {
        let valid = |s: &str| {
            !s.is_empty()
                && !s.contains('*')
                && s.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '$' | '.'))
        };
        let pat = if let Some(p) = text.strip_suffix(".*") {
            ClassPattern::Package(p.to_string())
        } else if let Some(p) = text.strip_suffix("$*") {
            ClassPattern::Nested(p.to_string())
        } else {
            ClassPattern::Exact(text.to_string())
        };
        let (ClassPattern::Exact(s) | ClassPattern::Package(s) | ClassPattern::Nested(s)) = &pat;
        valid(s).then_some(pat)
    }

    pub fn matches(&self, class: &str) -> bool {
        match self {
            ClassPattern::Exact(c) => class == c,
            ClassPattern::Package(p) => {
                class.len() > p.len() + 1 && class.starts_with(p.as_str()) && class.as_bytes()[p.len()] == b'.'
            }
            ClassPattern::Nested(c) => {
                class == c || (class.starts_with(c.as_str()) && class.as_bytes().get(c.len()) == Some(&b'$'))
            }
        }
    }
}

/// The exclusion procedures cutting library code out of call graphs.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ExcludeList {
    pub class_path: Vec<ClassPattern>,
    pub interface: BTreeSet<String>,
    pub interface_all: BTreeSet<String>,
    pub superclass: BTreeSet<String>,
    pub superclass_all: BTreeSet<String>,
    pub method_signature: BTreeSet<MethodRef>,
    pub overrides: BTreeSet<MethodRef>,
}

impl ExcludeList {
    pub fn is_empty(&self) -> bool {
        self.class_path.is_empty()
            && self.interface.is_empty()
            && self.interface_all.is_empty()
            && self.superclass.is_empty()
            && self.superclass_all.is_empty()
            && self.method_signature.is_empty()
    }
}

fn type_name(s: &str) -> bool {
    !s.is_empty() && s.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '$' | '.'))
}

/// Reads `<procedure>: <pattern>` lines; `#` starts a comment.
pub fn parse_exclude_list(text: &str) -> Result<ExcludeList, ExcludeError> {
    let mut x = ExcludeList::default();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let err = |msg: String| ExcludeError { line, msg };
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (proc_name, pattern) = content
            .split_once(':')
            .ok_or_else(|| err(format!("expected `<procedure>: <pattern>`, found `{content}`")))?;
        let (proc_name, pattern) = (proc_name.trim(), pattern.trim());
        if pattern.is_empty() {
            return Err(err(format!("empty pattern for `{proc_name}`")));
        }
        let bad = || err(format!("malformed pattern `{pattern}` for `{proc_name}`"));
        let named = |set: &mut BTreeSet<String>| {
            if type_name(pattern) {
                set.insert(pattern.to_string());
                Ok(())
            } else {
                Err(bad())
            }
        };
        match proc_name {
            "class_path" => x.class_path.push(ClassPattern::parse(pattern).ok_or_else(bad)?),
            "interface" => named(&mut x.interface)?,
            "interface_all" => named(&mut x.interface_all)?,
            "superclass" => named(&mut x.superclass)?,
            "superclass_all" => named(&mut x.superclass_all)?,
            "method_signature" => {
                x.method_signature.insert(pattern.parse().map_err(|_| bad())?);
            }
            "override" => {
                x.overrides.insert(pattern.parse().map_err(|_| bad())?);
            }
            other => return Err(err(format!("unknown procedure `{other}`"))),
        }
    }
    Ok(x)
}

/// True when any procedure matches `m` and `m` is not exempted by an override.
pub fn is_excluded(x: &ExcludeList, m: &MethodRef, program: &Program) -> bool {
    if x.overrides.contains(m) {
        return false;
    }
    if x.method_signature.contains(m) || x.class_path.iter().any(|p| p.matches(&m.class)) {
        return true;
    }
    if program.class(&m.class).is_none() {
        return false;
    }
    let overridden = || program.overridden_methods(m);
    let is_interface = |c: &str| program.class(c).is_some_and(|d| d.is_interface());
    (!x.interface.is_empty() && overridden().iter().any(|o| x.interface.contains(&o.class) && is_interface(&o.class)))
        || (!x.superclass.is_empty()
            && overridden().iter().any(|o| x.superclass.contains(&o.class) && !is_interface(&o.class)))
        || program.supertypes_of(&m.class).iter().any(|c| {
            (c.is_interface() && x.interface_all.contains(&c.name))
                || (!c.is_interface() && x.superclass_all.contains(&c.name))
        })
}
