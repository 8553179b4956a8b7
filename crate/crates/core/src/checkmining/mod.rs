//! Per-entry-point authorization checks: candidate conditionals from three
//! marking passes, the conditional filter, and value expansion into
//! canonical check strings.

mod marking;
mod values;

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::callgraph::{build_cha_callgraph, CallGraph, ExcludeList};
use crate::cpfilter::{candidate_for, detect_loop_conditionals, evaluate_filter, ConditionalCandidate, FilterSpec};
use crate::ir::{MethodRef, Program, Statement, StmtRef};

pub use marking::{find_security_throws, forward_defuse_cq_returns, mark_backward_cps, mark_cq_internal_cps, Icfg};
pub use values::{canonical_call, canonical_pair, product, Expander, Val, ValSet, MAX_PRODUCT};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MiningConfig {
    pub security_exception: String,
    /// Class whose methods return caller-controlled data.
    pub bundle_class: String,
}

impl Default for MiningConfig {
    fn default() -> Self {
        MiningConfig {
            security_exception: "java.lang.SecurityException".into(),
            bundle_class: "android.os.Bundle".into(),
        }
    }
}

/// The checks attributed to one entry point. Each check maps to the
/// statements it was derived from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckSet {
    pub entry_point: MethodRef,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub service: Option<String>,
    pub checks: BTreeSet<String>,
    #[serde(default)]
    pub provenance: BTreeMap<String, BTreeSet<String>>,
}

impl CheckSet {
    pub fn new(entry_point: MethodRef) -> Self {
        let service = Some(entry_point.class.clone());
        CheckSet { entry_point, service, checks: BTreeSet::new(), provenance: BTreeMap::new() }
    }

    pub fn insert(&mut self, check: String, origin: &StmtRef) {
        self.provenance.entry(check.clone()).or_default().insert(origin.to_string());
        self.checks.insert(check);
    }

    /// Service used to group entry points: the declared one, else the
    /// entry point's class.
    pub fn service_name(&self) -> &str {
        self.service.as_deref().unwrap_or(&self.entry_point.class)
    }

    pub fn is_empty(&self) -> bool {
        self.checks.is_empty()
    }

    /// Declaring methods of the statements behind a check.
    pub fn locations(&self, check: &str) -> BTreeSet<String> {
        self.provenance
            .get(check)
            .into_iter()
            .flatten()
            .map(|s| s.rsplit_once('#').map_or(s.as_str(), |(m, _)| m).to_string())
            .collect()
    }
}

/// Shared, read-only inputs of check mining.
pub struct MiningContext<'a> {
    pub program: &'a Program,
    pub entry_points: &'a BTreeSet<MethodRef>,
    pub cqs: &'a BTreeSet<MethodRef>,
    pub filter: &'a FilterSpec,
    pub exclude: &'a ExcludeList,
    pub config: &'a MiningConfig,
}

/// Everything computed for one entry point.
#[derive(Debug, Clone)]
pub struct EntryAnalysis {
    pub graph: CallGraph,
    /// Marked conditionals before filtering.
    pub candidates: Vec<ConditionalCandidate>,
    pub kept: BTreeSet<StmtRef>,
    pub checks: CheckSet,
}

fn is_result_unused(body: &[Statement], inv_result: Option<&str>) -> bool {
    inv_result.is_none_or(|r| !body.iter().any(|s| s.uses().contains(&r)))
}

pub fn analyze_entry_point(ctx: &MiningContext, entry: &MethodRef) -> EntryAnalysis {
    let graph = build_cha_callgraph(ctx.program, entry, ctx.exclude, ctx.entry_points);
    let icfg = Icfg::new(ctx.program, &graph);

    let mut targets = find_security_throws(&icfg, &ctx.config.security_exception);
    let cq_sites = icfg.cq_call_sites(ctx.cqs);
    targets.extend(cq_sites.iter().map(|&n| icfg.stmt_ref(n)));
    let backward = mark_backward_cps(&icfg, &targets);
    let mut cq_derived = mark_cq_internal_cps(&icfg, ctx.cqs);
    cq_derived.extend(forward_defuse_cq_returns(&icfg, ctx.cqs));
    let marked: BTreeSet<&StmtRef> = backward.iter().chain(&cq_derived).collect();

    let mut loop_sets: BTreeMap<usize, BTreeSet<usize>> = BTreeMap::new();
    let mut candidates = Vec::new();
    let mut kept = BTreeSet::new();
    for site in marked {
        let Some((mi, si)) = icfg.node_of(site) else { continue };
        let decl = icfg.methods[mi].1;
        let candidate = candidate_for(ctx.program, decl, si);
        let loops = loop_sets.entry(mi).or_insert_with(|| detect_loop_conditionals(&icfg.methods[mi].2, decl.body()));
        if evaluate_filter(ctx.filter, ctx.program, &candidate, loops, cq_derived.contains(site)) {
            kept.insert(site.clone());
        }
        candidates.push(candidate);
    }

    let mut checks = CheckSet::new(entry.clone());
    let mut expander = Expander::new(&icfg, ctx.cqs, &ctx.config.bundle_class);
    for site in &kept {
        let (mi, si) = icfg.node_of(site).expect("kept site is in the graph");
        for c in expander.conditional_checks(mi, si) {
            checks.insert(c, site);
        }
    }
    for &(mi, si) in &cq_sites {
        if !icfg.is_reachable((mi, si)) {
            continue;
        }
        let body = icfg.body(mi);
        let Statement::Invoke(inv) = &body[si] else { continue };
        if !is_result_unused(body, inv.result.as_deref()) {
            continue;
        }
        let site = icfg.stmt_ref((mi, si));
        for args in expander.call_values(mi, inv) {
            checks.insert(canonical_call(&inv.target, &args), &site);
        }
    }
    EntryAnalysis { graph, candidates, kept, checks }
}

pub fn mine_entrypoint_checks(ctx: &MiningContext, entry: &MethodRef) -> CheckSet {
    analyze_entry_point(ctx, entry).checks
}

/// Analyzes every entry point of the context in parallel, in sorted order.
pub fn analyze_all(ctx: &MiningContext) -> Vec<EntryAnalysis> {
    ctx.entry_points.par_iter().map(|e| analyze_entry_point(ctx, e)).collect()
}
