use std::collections::BTreeSet;

use serde::Deserialize;

use crate::ir::{MethodRef, Program, Statement};

/// How entry points are recognized.
#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EntryPointConfig {
    /// Methods carrying this attribute are entry points.
    pub explicit_attribute: Option<String>,
    /// Binder-like base classes whose subclasses dispatch incoming calls.
    pub stub_bases: Vec<String>,
    /// Name of the dispatch method declared by stub subclasses.
    pub dispatch_method: String,
}

impl Default for EntryPointConfig {
    fn default() -> Self {
        EntryPointConfig {
            explicit_attribute: Some("entrypoint".to_string()),
            stub_bases: Vec::new(),
            dispatch_method: "onTransact".to_string(),
        }
    }
}

impl EntryPointConfig {
    pub fn is_enabled(&self) -> bool {
        self.explicit_attribute.is_some() || !self.stub_bases.is_empty()
    }
}

fn has_body(program: &Program, m: &MethodRef) -> bool {
    program.method(m).is_some_and(|d| d.body.is_some())
}

pub fn detect_entry_points(program: &Program, cfg: &EntryPointConfig) -> Vec<MethodRef> {
    let mut out = BTreeSet::new();
    if let Some(attr) = &cfg.explicit_attribute {
        out.extend(program.methods().filter(|m| m.body.is_some() && m.has_attribute(attr)).map(|m| m.sig()));
    }
    for class in program.classes() {
        let is_stub = cfg.stub_bases.iter().any(|b| *b != class.name && program.is_subtype(&class.name, b));
        if !is_stub {
            continue;
        }
        let Some(dispatch) = class.methods.iter().find(|m| m.name == cfg.dispatch_method && m.body.is_some()) else {
            continue;
        };
        let subclasses = program.subtypes_of(&class.name).unwrap_or_default();
        for stmt in dispatch.body() {
            let Statement::Invoke(inv) = stmt else { continue };
            if inv.receiver.as_deref() != Some("this") || inv.target.is_unresolved() {
                continue;
            }
            if let Some(m) = program.dispatch(&class.name, &inv.target) {
                if has_body(program, &m) {
                    out.insert(m);
                }
            }
            for sub in &subclasses {
                let Some(c) = program.class(sub) else { continue };
                out.extend(
                    c.methods
                        .iter()
                        .filter(|m| m.body.is_some())
                        .map(|m| m.sig())
                        .filter(|m| m.same_subsignature(&inv.target)),
                );
            }
        }
    }
    out.into_iter().collect()
}
