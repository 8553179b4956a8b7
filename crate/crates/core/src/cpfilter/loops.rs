use std::collections::BTreeSet;

use petgraph::algo::dominators::simple_fast;
use petgraph::graph::{DiGraph, NodeIndex};

use crate::ir::{ControlFlowGraph, Statement};

/// Back edges `(latch, header)` of the reachable part of a CFG: edges whose
/// target dominates their source.
pub fn back_edges(cfg: &ControlFlowGraph) -> BTreeSet<(usize, usize)> {
    if cfg.is_empty() {
        return BTreeSet::new();
    }
    let mut g: DiGraph<(), ()> = DiGraph::with_capacity(cfg.len(), cfg.len());
    for _ in 0..cfg.len() {
        g.add_node(());
    }
    for (a, b) in cfg.edges() {
        g.add_edge(NodeIndex::new(a), NodeIndex::new(b), ());
    }
    let doms = simple_fast(&g, NodeIndex::new(0));
    cfg.edges()
        .filter(|&(a, b)| {
            cfg.is_reachable(a) && doms.dominators(NodeIndex::new(a)).is_some_and(|mut ds| ds.any(|d| d.index() == b))
        })
        .collect()
}

/// Nodes of the natural loop of back edge `(latch, header)`.
fn natural_loop(cfg: &ControlFlowGraph, latch: usize, header: usize) -> BTreeSet<usize> {
    let mut body = BTreeSet::from([header, latch]);
    let mut stack = vec![latch];
    while let Some(n) = stack.pop() {
        if n == header {
            continue;
        }
        for &p in cfg.predecessors(n) {
            if body.insert(p) {
                stack.push(p);
            }
        }
    }
    body
}

/// Conditionals that close a loop (the source of a back edge) or test its
/// exit at the top: the first conditional reached from a loop header through
/// straight-line statements, provided one of its branches leaves the loop.
pub fn detect_loop_conditionals(cfg: &ControlFlowGraph, body: &[Statement]) -> BTreeSet<usize> {
    let mut out = BTreeSet::new();
    for (latch, header) in back_edges(cfg) {
        if body[latch].is_conditional() {
            out.insert(latch);
        }
        let members = natural_loop(cfg, latch, header);
        let mut n = header;
        let mut seen = BTreeSet::new();
        while members.contains(&n) && seen.insert(n) {
            if body[n].is_conditional() {
                if cfg.successors(n).iter().any(|s| !members.contains(s)) {
                    out.insert(n);
                }
                break;
            }
            match cfg.successors(n) {
                [next] => n = *next,
                _ => break,
            }
        }
    }
    out
}
