use std::collections::BTreeSet;

use crate::callgraph::resolve_targets;
use crate::ir::{Constant, Expr, FieldRef, MethodDecl, MethodRef, Program, Statement, StmtRef, Value};

/// A step on the way from a contributing element to the value it feeds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ChainStep {
    /// Plain copy or cast.
    Assign,
    /// Standard binary or unary operator.
    Operator,
    /// Passed to a call at this position (-1 is the receiver).
    Argument(i32),
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ElementKind {
    Field(FieldRef),
    /// Return value of the call at `site`; `targets` are its possible callees.
    MethodReturn {
        site: StmtRef,
        targets: BTreeSet<MethodRef>,
    },
    StringConst(String),
}

/// A field, method return or string constant feeding a conditional, with the
/// use chain from the element to the conditional (closest step last).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Element {
    pub kind: ElementKind,
    pub chain: Vec<ChainStep>,
}

impl Element {
    pub fn is_arithmetic_chain(&self) -> bool {
        self.chain.iter().all(|s| matches!(s, ChainStep::Assign | ChainStep::Operator))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConditionalCandidate {
    pub site: StmtRef,
    pub elements: BTreeSet<Element>,
}

impl ConditionalCandidate {
    pub fn method(&self) -> &MethodRef {
        &self.site.method
    }
}

/// Builds the candidate for the conditional at `index` of `method`.
pub fn candidate_for(program: &Program, method: &MethodDecl, index: usize) -> ConditionalCandidate {
    let sig = method.sig();
    let operands: Vec<Value> = match &method.body()[index] {
        Statement::If { cond, .. } => cond.operands().into_iter().cloned().collect(),
        Statement::Switch { local, .. } => vec![Value::Local(local.clone())],
        _ => Vec::new(),
    };
    let mut elements = BTreeSet::new();
    for v in &operands {
        elements.extend(origins(program, method, &sig, v));
    }
    ConditionalCandidate { site: StmtRef::new(sig, index), elements }
}

/// Elements a value is computed from, found by walking definitions backwards
/// inside one method. Chains through call arguments are followed as well so
/// that an element swallowed by a call still shows up, marked by its step.
pub fn origins(program: &Program, method: &MethodDecl, sig: &MethodRef, v: &Value) -> BTreeSet<Element> {
    let mut out = BTreeSet::new();
    let mut path = Vec::new();
    walk_value(program, method, sig, v, &mut Vec::new(), &mut path, &mut out);
    out
}

fn walk_value(
    program: &Program,
    method: &MethodDecl,
    sig: &MethodRef,
    v: &Value,
    chain: &mut Vec<ChainStep>,
    path: &mut Vec<String>,
    out: &mut BTreeSet<Element>,
) {
    match v {
        Value::Const(Constant::Str(s)) => {
            out.insert(Element { kind: ElementKind::StringConst(s.clone()), chain: reversed(chain) });
        }
        Value::Const(_) => {}
        Value::Local(l) => walk_local(program, method, sig, l, chain, path, out),
    }
}

fn reversed(chain: &[ChainStep]) -> Vec<ChainStep> {
    chain.iter().rev().copied().collect()
}

fn walk_local(
    program: &Program,
    method: &MethodDecl,
    sig: &MethodRef,
    local: &str,
    chain: &mut Vec<ChainStep>,
    path: &mut Vec<String>,
    out: &mut BTreeSet<Element>,
) {
    if path.iter().any(|p| p == local) {
        return;
    }
    path.push(local.to_string());
    for (i, stmt) in method.body().iter().enumerate() {
        if stmt.def() != Some(local) {
            continue;
        }
        let step = |step: ChainStep,
                    vs: &[&Value],
                    chain: &mut Vec<ChainStep>,
                    path: &mut Vec<String>,
                    out: &mut BTreeSet<Element>| {
            chain.push(step);
            for v in vs {
                walk_value(program, method, sig, v, chain, path, out);
            }
            chain.pop();
        };
        match stmt {
            Statement::Assign { expr, .. } => match expr {
                Expr::Const(c) => walk_value(program, method, sig, &Value::Const(c.clone()), chain, path, out),
                Expr::Local(y) => step(ChainStep::Assign, &[&Value::Local(y.clone())], chain, path, out),
                Expr::Cast(_, a) => step(ChainStep::Assign, &[a], chain, path, out),
                Expr::FieldRead(fa) => {
                    out.insert(Element { kind: ElementKind::Field(fa.field.clone()), chain: reversed(chain) });
                }
                Expr::BinOp(_, a, b) => step(ChainStep::Operator, &[a, b], chain, path, out),
                Expr::UnOp(_, a) | Expr::LengthOf(a) | Expr::InstanceOf(_, a) => {
                    step(ChainStep::Operator, &[a], chain, path, out)
                }
                Expr::ArrayRead { .. } | Expr::New(_) => {}
            },
            Statement::Invoke(inv) => {
                let mut targets = resolve_targets(program, inv);
                targets.insert(inv.target.clone());
                out.insert(Element {
                    kind: ElementKind::MethodReturn { site: StmtRef::new(sig.clone(), i), targets },
                    chain: reversed(chain),
                });
                if let Some(r) = &inv.receiver {
                    step(ChainStep::Argument(-1), &[&Value::Local(r.clone())], chain, path, out);
                }
                for (k, a) in inv.args.iter().enumerate() {
                    step(ChainStep::Argument(k as i32), &[a], chain, path, out);
                }
            }
            _ => {}
        }
    }
    path.pop();
}
