//! Per-method control-flow graphs with one node per statement.

use std::collections::HashMap;

use super::{IrError, MethodDecl, Statement};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ControlFlowGraph {
    succ: Vec<Vec<usize>>,
    pred: Vec<Vec<usize>>,
    reachable: Vec<bool>,
}

impl ControlFlowGraph {
    /// Builds the graph from a body whose labels are known to exist.
    pub fn from_body(body: &[Statement]) -> Self {
        let labels: HashMap<&str, usize> = body
            .iter()
            .enumerate()
            .filter_map(|(i, s)| match s {
                Statement::Label(l) => Some((l.as_str(), i)),
                _ => None,
            })
            .collect();
        let n = body.len();
        let mut succ = vec![Vec::new(); n];
        for (i, s) in body.iter().enumerate() {
            if s.falls_through() && i + 1 < n {
                succ[i].push(i + 1);
            }
            succ[i].extend(s.jump_targets().into_iter().map(|l| labels[l]));
        }
        let mut pred = vec![Vec::new(); n];
        for (i, ss) in succ.iter().enumerate() {
            for &t in ss {
                pred[t].push(i);
            }
        }
        let mut reachable = vec![false; n];
        let mut stack: Vec<usize> = if n > 0 { vec![0] } else { Vec::new() };
        while let Some(i) = stack.pop() {
            if !std::mem::replace(&mut reachable[i], true) {
                stack.extend(succ[i].iter().copied().filter(|&t| !reachable[t]));
            }
        }
        ControlFlowGraph { succ, pred, reachable }
    }

    pub fn len(&self) -> usize {
        self.succ.len()
    }

    pub fn is_empty(&self) -> bool {
        self.succ.is_empty()
    }

    /// Successors in branch order: fall-through first, then jump targets.
    /// An `if` whose target is the next statement lists it twice.
    pub fn successors(&self, node: usize) -> &[usize] {
        &self.succ[node]
    }

    pub fn predecessors(&self, node: usize) -> &[usize] {
        &self.pred[node]
    }

    pub fn is_reachable(&self, node: usize) -> bool {
        self.reachable[node]
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.succ.iter().enumerate().flat_map(|(i, ss)| ss.iter().map(move |&t| (i, t)))
    }
}

pub fn build_cfg(method: &MethodDecl) -> Result<ControlFlowGraph, IrError> {
    match &method.body {
        Some(body) => Ok(ControlFlowGraph::from_body(body)),
        None => Err(IrError::NoBody(method.sig())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::parse_program;

    fn cfg_of(body: &str) -> ControlFlowGraph {
        let p = parse_program(&format!("class a.A {{\n method m(p: int) -> int {{\n{body}\n }}\n}}")).unwrap();
        build_cfg(p.lookup_method("a.A", "m", 1).unwrap()).unwrap()
    }

    #[test]
    fn straight_line_is_a_path() {
        let g = cfg_of("l0 = const 1\nl1 = l0 + p\nl2 = l1 * 2\nreturn l2");
        assert_eq!(g.len(), 4);
        for i in 0..3 {
            assert_eq!(g.successors(i), &[i + 1]);
        }
        assert!(g.successors(3).is_empty());
        assert!((0..4).all(|i| g.is_reachable(i)));
    }

    #[test]
    fn branches_and_sinks() {
        let g = cfg_of(
            "if p == 0 goto L1\nthrow new java.lang.SecurityException()\nL1:\nswitch p { case 1: L1 case 2: L2 default: L2 }\nL2:\nreturn p\nreturn 0",
        );
        assert_eq!(g.successors(0), &[1, 2]);
        assert!(g.successors(1).is_empty());
        assert_eq!(g.successors(3), &[2, 4, 4]);
        assert!(g.successors(5).is_empty());
        assert!(!g.is_reachable(6));
        assert_eq!(g.predecessors(2), &[0, 3]);
    }

    #[test]
    fn bodiless_method_has_no_cfg() {
        let p = parse_program("interface a.I {\n method m() -> void\n}").unwrap();
        assert!(matches!(build_cfg(&p.classes()[0].methods[0]), Err(IrError::NoBody(_))));
    }
}
