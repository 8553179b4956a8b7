//! Entry points, exclusion procedures, and per-entry-point class hierarchy
//! analysis call graphs.

mod entry;
mod exclude;

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::Serialize;

use crate::ir::{Invoke, InvokeKind, MethodRef, Program, Statement, StmtRef};

pub use entry::{detect_entry_points, EntryPointConfig};
pub use exclude::{is_excluded, parse_exclude_list, ClassPattern, ExcludeError, ExcludeList};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CutReason {
    Excluded,
    OtherEntrypoint,
    External,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CallGraph {
    pub root: MethodRef,
    /// Methods whose bodies were expanded.
    pub nodes: BTreeSet<MethodRef>,
    /// Call site to every possible target, cut or not.
    pub edges: BTreeMap<StmtRef, BTreeSet<MethodRef>>,
    /// Targets that were not expanded, with the reason.
    pub cuts: BTreeMap<MethodRef, CutReason>,
}

impl CallGraph {
    pub fn targets(&self, site: &StmtRef) -> impl Iterator<Item = &MethodRef> {
        self.edges.get(site).into_iter().flatten()
    }

    /// True when a call to `m` descends into its body. Calls back into the
    /// root are cut, so this is false for the root.
    pub fn is_expanded(&self, m: &MethodRef) -> bool {
        self.nodes.contains(m) && !self.cuts.contains_key(m)
    }

    /// Call sites whose target set contains `m`.
    pub fn callers_of<'a>(&'a self, m: &'a MethodRef) -> impl Iterator<Item = &'a StmtRef> + 'a {
        self.edges.iter().filter(move |(_, ts)| ts.contains(m)).map(|(s, _)| s)
    }
}

/// Every target a call may reach under class hierarchy analysis.
///
/// Static and special calls have their declared target. Virtual calls
/// dispatch from every class in the subtypes of the declared receiver class;
/// if none has an implementation the declared target itself is kept.
pub fn resolve_targets(program: &Program, inv: &Invoke) -> BTreeSet<MethodRef> {
    let declared = BTreeSet::from([inv.target.clone()]);
    if inv.target.is_unresolved() || inv.kind != InvokeKind::Virtual {
        return declared;
    }
    let Ok(subtypes) = program.subtypes_of(&inv.class) else {
        return declared;
    };
    let found: BTreeSet<MethodRef> = subtypes
        .iter()
        .filter(|s| program.class(s).is_some_and(|c| !c.is_interface()))
        .filter_map(|s| program.dispatch(s, &inv.target))
        .collect();
    if found.is_empty() {
        declared
    } else {
        found
    }
}

fn cut_reason(program: &Program, m: &MethodRef, x: &ExcludeList, all_eps: &BTreeSet<MethodRef>) -> Option<CutReason> {
    if all_eps.contains(m) {
        Some(CutReason::OtherEntrypoint)
    } else if is_excluded(x, m, program) {
        Some(CutReason::Excluded)
    } else if program.method(m).is_none_or(|d| d.body.is_none()) {
        Some(CutReason::External)
    } else {
        None
    }
}

pub fn build_cha_callgraph(
    program: &Program,
    root: &MethodRef,
    x: &ExcludeList,
    all_eps: &BTreeSet<MethodRef>,
) -> CallGraph {
    let mut g = CallGraph {
        root: root.clone(),
        nodes: BTreeSet::from([root.clone()]),
        edges: BTreeMap::new(),
        cuts: BTreeMap::new(),
    };
    let mut work = vec![root.clone()];
    while let Some(m) = work.pop() {
        let Some(decl) = program.method(&m) else { continue };
        for (i, stmt) in decl.body().iter().enumerate() {
            let Statement::Invoke(inv) = stmt else { continue };
            let targets = resolve_targets(program, inv);
            for t in &targets {
                match cut_reason(program, t, x, all_eps) {
                    Some(r) => {
                        g.cuts.insert(t.clone(), r);
                    }
                    None => {
                        if g.nodes.insert(t.clone()) {
                            work.push(t.clone());
                        }
                    }
                }
            }
            g.edges.insert(StmtRef::new(m.clone(), i), targets);
        }
    }
    g
}

/// Builds the graphs of all entry points in parallel, in input order.
pub fn build_all(program: &Program, eps: &[MethodRef], x: &ExcludeList) -> Vec<CallGraph> {
    let all: BTreeSet<MethodRef> = eps.iter().cloned().collect();
    eps.par_iter().map(|ep| build_cha_callgraph(program, ep, x, &all)).collect()
}
