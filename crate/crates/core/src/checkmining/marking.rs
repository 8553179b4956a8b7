use std::collections::{BTreeSet, HashMap};

use crate::callgraph::CallGraph;
use crate::ir::{ControlFlowGraph, Expr, MethodDecl, MethodRef, Program, Statement, StmtRef};

/// Node of the interprocedural graph: (method index, statement index).
pub(crate) type Node = (usize, usize);

/// The expanded methods of one call graph with their CFGs and the
/// call-return summaries needed for valid-path reachability.
pub struct Icfg<'a> {
    pub(crate) program: &'a Program,
    pub(crate) graph: &'a CallGraph,
    pub(crate) methods: Vec<(MethodRef, &'a MethodDecl, ControlFlowGraph)>,
    pub(crate) index: HashMap<MethodRef, usize>,
    /// Expanded targets per call site.
    callees: HashMap<Node, Vec<usize>>,
    /// Call sites with at least one target whose body is not analyzed.
    open_calls: BTreeSet<Node>,
    can_return: Vec<bool>,
    /// Forward-reachable nodes from the root entry.
    reachable: BTreeSet<Node>,
}

impl<'a> Icfg<'a> {
    pub fn new(program: &'a Program, graph: &'a CallGraph) -> Self {
        let mut methods = Vec::new();
        let mut index = HashMap::new();
        for m in &graph.nodes {
            if let Some(decl) = program.method(m).filter(|d| d.body.is_some()) {
                index.insert(m.clone(), methods.len());
                methods.push((m.clone(), decl, ControlFlowGraph::from_body(decl.body())));
            }
        }
        let mut callees = HashMap::new();
        let mut open_calls = BTreeSet::new();
        for (mi, (sig, decl, _)) in methods.iter().enumerate() {
            for (si, stmt) in decl.body().iter().enumerate() {
                if !matches!(stmt, Statement::Invoke(_)) {
                    continue;
                }
                let site = StmtRef::new(sig.clone(), si);
                let mut expanded = Vec::new();
                for t in graph.targets(&site) {
                    match index.get(t) {
                        Some(&ti) if graph.is_expanded(t) => expanded.push(ti),
                        _ => {
                            open_calls.insert((mi, si));
                        }
                    }
                }
                callees.insert((mi, si), expanded);
            }
        }
        let mut icfg = Icfg {
            program,
            graph,
            can_return: vec![false; methods.len()],
            methods,
            index,
            callees,
            open_calls,
            reachable: BTreeSet::new(),
        };
        icfg.compute_can_return();
        icfg.compute_reachable();
        icfg
    }

    pub fn method_index(&self, m: &MethodRef) -> Option<usize> {
        self.index.get(m).copied()
    }

    pub fn body(&self, mi: usize) -> &'a [Statement] {
        self.methods[mi].1.body()
    }

    pub fn stmt_ref(&self, (mi, si): Node) -> StmtRef {
        StmtRef::new(self.methods[mi].0.clone(), si)
    }

    pub fn node_of(&self, s: &StmtRef) -> Option<Node> {
        self.method_index(&s.method).map(|mi| (mi, s.index))
    }

    pub(crate) fn callees(&self, n: Node) -> &[usize] {
        self.callees.get(&n).map_or(&[], Vec::as_slice)
    }

    /// Whether control continues after a call returns.
    fn call_returns(&self, n: Node) -> bool {
        self.open_calls.contains(&n) || self.callees(n).iter().any(|&t| self.can_return[t])
    }

    /// Intra-procedural successors, where a call that never returns has none.
    pub(crate) fn succ(&self, (mi, si): Node) -> Vec<Node> {
        if matches!(self.body(mi)[si], Statement::Invoke(_)) && !self.call_returns((mi, si)) {
            return Vec::new();
        }
        self.methods[mi].2.successors(si).iter().map(|&s| (mi, s)).collect()
    }

    fn compute_can_return(&mut self) {
        loop {
            let mut changed = false;
            for mi in 0..self.methods.len() {
                if self.can_return[mi] || self.body(mi).is_empty() {
                    continue;
                }
                let mut seen = BTreeSet::from([(mi, 0)]);
                let mut stack = vec![(mi, 0)];
                while let Some(n) = stack.pop() {
                    if matches!(self.body(mi)[n.1], Statement::Return(_)) {
                        self.can_return[mi] = true;
                        changed = true;
                        break;
                    }
                    for s in self.succ(n) {
                        if seen.insert(s) {
                            stack.push(s);
                        }
                    }
                }
            }
            if !changed {
                break;
            }
        }
    }

    fn compute_reachable(&mut self) {
        let Some(root) = self.method_index(&self.graph.root) else { return };
        if self.body(root).is_empty() {
            return;
        }
        let mut seen = BTreeSet::from([(root, 0)]);
        let mut stack = vec![(root, 0)];
        while let Some(n) = stack.pop() {
            let mut next = self.succ(n);
            next.extend(self.callees(n).iter().map(|&t| (t, 0)));
            for s in next {
                if seen.insert(s) {
                    stack.push(s);
                }
            }
        }
        self.reachable = seen;
    }

    pub fn is_reachable(&self, n: Node) -> bool {
        self.reachable.contains(&n)
    }

    pub(crate) fn nodes(&self) -> impl Iterator<Item = Node> + '_ {
        self.methods.iter().enumerate().flat_map(|(mi, (_, d, _))| (0..d.body().len()).map(move |si| (mi, si)))
    }

    fn conditionals(&self, mi: usize) -> impl Iterator<Item = Node> + '_ {
        self.body(mi).iter().enumerate().filter(|(_, s)| s.is_conditional()).map(move |(si, _)| (mi, si))
    }

    /// Call sites in the graph with some target in `cqs`.
    pub fn cq_call_sites(&self, cqs: &BTreeSet<MethodRef>) -> BTreeSet<Node> {
        self.nodes()
            .filter(|&(mi, si)| {
                matches!(self.body(mi)[si], Statement::Invoke(_))
                    && self.graph.targets(&self.stmt_ref((mi, si))).any(|t| cqs.contains(t))
            })
            .collect()
    }

    /// Reachable call sites whose expanded targets include `mi`.
    fn reachable_callers(&self, mi: usize) -> Vec<Node> {
        self.callees.iter().filter(|(n, ts)| ts.contains(&mi) && self.reachable.contains(n)).map(|(&n, _)| n).collect()
    }
}

/// Least fixpoint of a per-node predicate over intra successors plus a
/// per-node extra condition, recomputed until stable.
fn fixpoint(icfg: &Icfg, nodes: &[Node], mut f: impl FnMut(&Icfg, Node, &BTreeSet<Node>) -> bool) -> BTreeSet<Node> {
    let mut set = BTreeSet::new();
    loop {
        let mut changed = false;
        for &n in nodes.iter().rev() {
            if !set.contains(&n) && f(icfg, n, &set) {
                set.insert(n);
                changed = true;
            }
        }
        if !changed {
            return set;
        }
    }
}

/// Throw statements in graph nodes whose exception type is `exception` or a
/// declared subtype of it.
pub fn find_security_throws(icfg: &Icfg, exception: &str) -> BTreeSet<StmtRef> {
    icfg.nodes()
        .filter(|&(mi, si)| match &icfg.body(mi)[si] {
            Statement::Throw { exception: t, .. } => t == exception || icfg.program.is_subtype(t, exception),
            _ => false,
        })
        .map(|n| icfg.stmt_ref(n))
        .collect()
}

/// Conditionals reachable from the entry point from which some target can
/// be reached along a valid interprocedural path starting at a branch.
pub fn mark_backward_cps(icfg: &Icfg, targets: &BTreeSet<StmtRef>) -> BTreeSet<StmtRef> {
    let targets: BTreeSet<Node> = targets.iter().filter_map(|t| icfg.node_of(t)).collect();
    if targets.is_empty() {
        return BTreeSet::new();
    }
    let nodes: Vec<Node> = icfg.nodes().collect();
    // Target reached before the current frame returns.
    let down = fixpoint(icfg, &nodes, |g, n, set| {
        targets.contains(&n)
            || g.succ(n).iter().any(|s| set.contains(s))
            || g.callees(n).iter().any(|&t| set.contains(&(t, 0)))
    });
    // Current frame can return.
    let exits = fixpoint(icfg, &nodes, |g, n, set| {
        matches!(g.body(n.0)[n.1], Statement::Return(_)) || g.succ(n).iter().any(|s| set.contains(s))
    });
    // Per method: after returning, some caller continuation reaches a target.
    let mut cont = vec![false; icfg.methods.len()];
    let callers: Vec<Vec<Node>> = (0..icfg.methods.len()).map(|mi| icfg.reachable_callers(mi)).collect();
    loop {
        let mut changed = false;
        for mi in 0..icfg.methods.len() {
            if cont[mi] {
                continue;
            }
            let hit = callers[mi].iter().any(|&(cm, cs)| {
                let after = (cm, cs + 1);
                down.contains(&after) || (exits.contains(&after) && cont[cm])
            });
            if hit {
                cont[mi] = true;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    let reaches = |n: Node| down.contains(&n) || (exits.contains(&n) && cont[n.0]);
    (0..icfg.methods.len())
        .flat_map(|mi| icfg.conditionals(mi).collect::<Vec<_>>())
        .filter(|&n| icfg.is_reachable(n) && icfg.methods[n.0].2.successors(n.1).iter().any(|&s| reaches((n.0, s))))
        .map(|n| icfg.stmt_ref(n))
        .collect()
}

/// All conditionals in context-query methods of the graph and in the methods
/// they transitively call.
pub fn mark_cq_internal_cps(icfg: &Icfg, cqs: &BTreeSet<MethodRef>) -> BTreeSet<StmtRef> {
    let mut seen: BTreeSet<usize> = cqs.iter().filter_map(|m| icfg.method_index(m)).collect();
    let mut stack: Vec<usize> = seen.iter().copied().collect();
    while let Some(mi) = stack.pop() {
        for si in 0..icfg.body(mi).len() {
            for &t in icfg.callees((mi, si)) {
                if seen.insert(t) {
                    stack.push(t);
                }
            }
        }
    }
    seen.into_iter().flat_map(|mi| icfg.conditionals(mi).collect::<Vec<_>>()).map(|n| icfg.stmt_ref(n)).collect()
}

fn param_local(decl: &MethodDecl, pos: i32) -> Option<String> {
    if pos == -1 {
        Some("this".to_string())
    } else {
        decl.params.get(usize::try_from(pos).ok()?).map(|p| p.name.clone())
    }
}

/// Conditionals whose operands are computed from a context-query return
/// through copies, operators, array elements and parameters. Values stored
/// in fields or returned from methods are not followed.
pub fn forward_defuse_cq_returns(icfg: &Icfg, cqs: &BTreeSet<MethodRef>) -> BTreeSet<StmtRef> {
    let mut tainted: BTreeSet<(usize, String)> = BTreeSet::new();
    for (mi, si) in icfg.cq_call_sites(cqs) {
        if let Statement::Invoke(inv) = &icfg.body(mi)[si] {
            if let Some(r) = &inv.result {
                tainted.insert((mi, r.clone()));
            }
        }
    }
    loop {
        let before = tainted.len();
        for mi in 0..icfg.methods.len() {
            let is = |l: &str, t: &BTreeSet<(usize, String)>| t.contains(&(mi, l.to_string()));
            for (si, stmt) in icfg.body(mi).iter().enumerate() {
                match stmt {
                    Statement::Assign { local, expr } => {
                        let from = match expr {
                            Expr::Local(y) | Expr::Cast(_, crate::ir::Value::Local(y)) => vec![y.as_str()],
                            Expr::BinOp(..) | Expr::UnOp(..) => expr.uses(),
                            Expr::ArrayRead { base, .. } => vec![base.as_str()],
                            _ => Vec::new(),
                        };
                        if from.iter().any(|u| is(u, &tainted)) {
                            tainted.insert((mi, local.clone()));
                        }
                    }
                    Statement::ArrayWrite { base, value, .. } => {
                        if value.as_local().is_some_and(|v| is(v, &tainted)) {
                            tainted.insert((mi, base.clone()));
                        }
                    }
                    Statement::Invoke(inv) => {
                        let positions = (-1..inv.args.len() as i32)
                            .filter(|&p| {
                                inv.value_at(p).and_then(|v| v.as_local().map(|l| is(l, &tainted))) == Some(true)
                            })
                            .collect::<Vec<_>>();
                        for p in positions {
                            for &t in icfg.callees((mi, si)) {
                                if let Some(l) = param_local(icfg.methods[t].1, p) {
                                    tainted.insert((t, l));
                                }
                            }
                        }
                    }
                    _ => {}
                }
            }
        }
        if tainted.len() == before {
            break;
        }
    }
    icfg.nodes()
        .filter(|&(mi, si)| {
            let s = &icfg.body(mi)[si];
            s.is_conditional() && s.uses().iter().any(|u| tainted.contains(&(mi, u.to_string())))
        })
        .map(|n| icfg.stmt_ref(n))
        .collect()
}
