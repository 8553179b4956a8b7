use std::collections::{BTreeSet, HashMap};
use std::fmt;

use super::marking::{Icfg, Node};
use crate::ir::{CondExpr, Constant, Expr, FieldRef, Invoke, LocalTypes, MethodRef, Statement, Value};

/// Products larger than this collapse to ALL.
pub const MAX_PRODUCT: usize = 4096;

/// A possible value of a variable after def-use expansion.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Val {
    All,
    Null,
    Int(i64),
    Bool(bool),
    Str(String),
    Field(FieldRef),
    /// Return value of a call to this method.
    Method(MethodRef),
    /// Return value of a context-query call with these arguments.
    Call(MethodRef, Vec<Val>),
    Array(Box<Val>, Box<Val>),
    Bin(&'static str, Box<Val>, Box<Val>),
    Un(&'static str, Box<Val>),
}

impl Val {
    pub fn is_const(&self) -> bool {
        matches!(self, Val::Int(_) | Val::Bool(_) | Val::Str(_))
    }

    fn from_const(c: &Constant) -> Self {
        match c {
            Constant::Int(v) => Val::Int(*v),
            Constant::Bool(v) => Val::Bool(*v),
            Constant::Str(s) => Val::Str(s.clone()),
            Constant::Null => Val::Null,
        }
    }
}

fn args(f: &mut fmt::Formatter<'_>, vs: &[Val]) -> fmt::Result {
    f.write_str("(")?;
    for (i, v) in vs.iter().enumerate() {
        if i > 0 {
            f.write_str(", ")?;
        }
        write!(f, "{v}")?;
    }
    f.write_str(")")
}

impl fmt::Display for Val {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Val::All => f.write_str("ALL"),
            Val::Null => f.write_str("NULL"),
            Val::Int(v) => write!(f, "{v}"),
            Val::Bool(v) => write!(f, "{v}"),
            Val::Str(s) => write!(f, "{}", Constant::Str(s.clone())),
            Val::Field(r) => write!(f, "{r}"),
            Val::Method(m) => write!(f, "{m}"),
            Val::Call(m, vs) => {
                write!(f, "{m}")?;
                args(f, vs)
            }
            Val::Array(b, i) => write!(f, "{b}[{i}]"),
            Val::Bin(op, a, b) => write!(f, "({a} {op} {b})"),
            Val::Un(op, a) => write!(f, "({op}{a})"),
        }
    }
}

pub type ValSet = BTreeSet<Val>;

fn all() -> ValSet {
    BTreeSet::from([Val::All])
}

/// ALL absorbs every other value; NULL only survives on its own. An empty
/// set means nothing is known and becomes ALL.
fn normalize(mut set: ValSet) -> ValSet {
    if set.is_empty() || set.contains(&Val::All) {
        return all();
    }
    if set.len() > 1 {
        set.remove(&Val::Null);
    }
    set
}

/// Every combination of one value per set, or `None` when there are too many.
pub fn product(sets: &[ValSet]) -> Option<Vec<Vec<Val>>> {
    let size = sets.iter().try_fold(1usize, |n, s| n.checked_mul(s.len()).filter(|&n| n <= MAX_PRODUCT));
    size?;
    let mut out = vec![Vec::new()];
    for s in sets {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                s.iter().map(move |v| {
                    let mut p = prefix.clone();
                    p.push(v.clone());
                    p
                })
            })
            .collect();
    }
    Some(out)
}

/// Builds composite values from a product of operand sets; any ALL operand
/// or an oversized product gives ALL.
fn combine(sets: &[ValSet], f: impl Fn(Vec<Val>) -> Val) -> ValSet {
    if sets.iter().any(|s| s.contains(&Val::All)) {
        return all();
    }
    match product(sets) {
        Some(rows) => rows.into_iter().map(f).collect(),
        None => all(),
    }
}

/// Canonical unordered pair, or `None` when the pair carries no information:
/// either side is ALL or NULL, both sides are constants, or they are equal.
pub fn canonical_pair(a: &Val, b: &Val) -> Option<String> {
    if matches!(a, Val::All | Val::Null) || matches!(b, Val::All | Val::Null) {
        return None;
    }
    if (a.is_const() && b.is_const()) || a == b {
        return None;
    }
    let (x, y) = (a.to_string(), b.to_string());
    let (x, y) = if x <= y { (x, y) } else { (y, x) };
    Some(format!("pair({x}, {y})"))
}

/// Canonical standalone context-query invocation.
pub fn canonical_call(target: &MethodRef, args: &[Val]) -> String {
    format!("call {}", Val::Call(target.clone(), args.to_vec()))
}

/// Flow-insensitive, inter-procedural value expansion over one call graph,
/// memoized per (method, local).
pub struct Expander<'g, 'a> {
    icfg: &'g Icfg<'a>,
    cqs: &'g BTreeSet<MethodRef>,
    bundle: &'g str,
    types: Vec<LocalTypes>,
    callers: Vec<Vec<Node>>,
    memo: HashMap<(usize, String), ValSet>,
    stack: Vec<(usize, String)>,
}

impl<'g, 'a> Expander<'g, 'a> {
    pub fn new(icfg: &'g Icfg<'a>, cqs: &'g BTreeSet<MethodRef>, bundle: &'g str) -> Self {
        let n = icfg.methods.len();
        let types = icfg.methods.iter().map(|(_, d, _)| LocalTypes::infer(d)).collect();
        let mut callers = vec![Vec::new(); n];
        for node in icfg.nodes() {
            for &t in icfg.callees(node) {
                callers[t].push(node);
            }
        }
        Expander { icfg, cqs, bundle, types, callers, memo: HashMap::new(), stack: Vec::new() }
    }

    fn is_cq_call(&self, site: Node) -> bool {
        self.icfg.graph.targets(&self.icfg.stmt_ref(site)).any(|t| self.cqs.contains(t))
    }

    pub fn value(&mut self, mi: usize, v: &Value) -> ValSet {
        match v {
            Value::Const(c) => BTreeSet::from([Val::from_const(c)]),
            Value::Local(l) => self.local(mi, l),
        }
    }

    pub fn local(&mut self, mi: usize, local: &str) -> ValSet {
        if self.types[mi].is_object(local) {
            return all();
        }
        let key = (mi, local.to_string());
        if self.stack.contains(&key) {
            return all();
        }
        if let Some(v) = self.memo.get(&key) {
            return v.clone();
        }
        self.stack.push(key.clone());
        let mut out = ValSet::new();
        let body = self.icfg.body(mi);
        for (si, stmt) in body.iter().enumerate() {
            if stmt.def() == Some(local) {
                out.extend(self.definition(mi, si, stmt));
            }
        }
        let decl = self.icfg.methods[mi].1;
        if let Some(k) = decl.param_index(local) {
            out.extend(self.parameter(mi, k));
        }
        self.stack.pop();
        let out = normalize(out);
        self.memo.insert(key, out.clone());
        out
    }

    fn parameter(&mut self, mi: usize, k: usize) -> ValSet {
        if self.icfg.methods[mi].0 == self.icfg.graph.root || self.callers[mi].is_empty() {
            return all();
        }
        let mut out = ValSet::new();
        for (cm, cs) in self.callers[mi].clone() {
            if let Statement::Invoke(inv) = &self.icfg.body(cm)[cs] {
                if let Some(a) = inv.args.get(k) {
                    out.extend(self.value(cm, a));
                }
            }
        }
        out
    }

    fn definition(&mut self, mi: usize, si: usize, stmt: &Statement) -> ValSet {
        match stmt {
            Statement::Assign { expr, .. } => match expr {
                Expr::Const(c) => BTreeSet::from([Val::from_const(c)]),
                Expr::Local(y) => self.local(mi, y),
                Expr::FieldRead(fa) => BTreeSet::from([Val::Field(fa.field.clone())]),
                Expr::ArrayRead { base, index } => {
                    let sets = [self.local(mi, base), self.value(mi, index)];
                    combine(&sets, |mut r| {
                        let i = r.pop().expect("index");
                        Val::Array(Box::new(r.pop().expect("base")), Box::new(i))
                    })
                }
                Expr::BinOp(op, a, b) => {
                    let sets = [self.value(mi, a), self.value(mi, b)];
                    let op = op.symbol();
                    combine(&sets, |mut r| {
                        let b = r.pop().expect("rhs");
                        Val::Bin(op, Box::new(r.pop().expect("lhs")), Box::new(b))
                    })
                }
                Expr::UnOp(op, a) => {
                    let sets = [self.value(mi, a)];
                    let op = op.symbol();
                    combine(&sets, |mut r| Val::Un(op, Box::new(r.pop().expect("operand"))))
                }
                Expr::Cast(..) | Expr::New(_) | Expr::LengthOf(_) | Expr::InstanceOf(..) => all(),
            },
            Statement::Invoke(inv) => self.call_result(mi, si, inv),
            _ => all(),
        }
    }

    fn call_result(&mut self, mi: usize, si: usize, inv: &Invoke) -> ValSet {
        let site = self.icfg.stmt_ref((mi, si));
        let mut targets: BTreeSet<MethodRef> = self.icfg.graph.targets(&site).cloned().collect();
        if targets.is_empty() {
            targets.insert(inv.target.clone());
        }
        if targets.iter().chain([&inv.target]).any(|t| t.class == self.bundle) {
            return all();
        }
        if self.is_cq_call((mi, si)) {
            return self.call_values(mi, inv).into_iter().map(|a| Val::Call(inv.target.clone(), a)).collect();
        }
        targets.into_iter().map(Val::Method).collect()
    }

    /// Argument combinations of a call; a single all-ALL row when the
    /// product is too large.
    pub fn call_values(&mut self, mi: usize, inv: &Invoke) -> Vec<Vec<Val>> {
        let sets: Vec<ValSet> = inv.args.iter().map(|a| self.value(mi, a)).collect();
        product(&sets).unwrap_or_else(|| vec![vec![Val::All; sets.len()]])
    }

    /// Local defined in `mi` by a one-argument `equals` call on a receiver.
    fn equals_def(&self, mi: usize, local: &str) -> Vec<&'a Invoke> {
        self.icfg
            .body(mi)
            .iter()
            .filter_map(|s| match s {
                Statement::Invoke(inv)
                    if inv.result.as_deref() == Some(local)
                        && inv.name == "equals"
                        && inv.args.len() == 1
                        && inv.receiver.is_some() =>
                {
                    Some(inv)
                }
                _ => None,
            })
            .collect()
    }

    /// Canonical pair checks for the conditional at `(mi, si)`.
    pub fn conditional_checks(&mut self, mi: usize, si: usize) -> BTreeSet<String> {
        let stmt = &self.icfg.body(mi)[si];
        let mut sides: Vec<(ValSet, ValSet)> = Vec::new();
        let operands: Vec<Value> = match stmt {
            Statement::If { cond, .. } => cond.operands().into_iter().cloned().collect(),
            Statement::Switch { local, .. } => vec![Value::Local(local.clone())],
            _ => return BTreeSet::new(),
        };
        let mut rebuilt = false;
        for op in &operands {
            let Some(l) = op.as_local() else { continue };
            for inv in self.equals_def(mi, l) {
                let recv = self.local(mi, inv.receiver.as_deref().expect("receiver"));
                let arg = self.value(mi, &inv.args[0]);
                sides.push((recv, arg));
                rebuilt = true;
            }
        }
        if !rebuilt {
            match stmt {
                Statement::If { cond: CondExpr::Compare(_, a, b), .. } => {
                    sides.push((self.value(mi, a), self.value(mi, b)));
                }
                Statement::If { cond: CondExpr::Not(a), .. } => {
                    sides.push((self.value(mi, a), BTreeSet::from([Val::Bool(false)])));
                }
                Statement::Switch { local, cases, .. } => {
                    let v = self.local(mi, local);
                    let cs = cases.iter().map(|(c, _)| Val::from_const(c)).collect();
                    sides.push((v, cs));
                }
                _ => {}
            }
        }
        let mut out = BTreeSet::new();
        for (a, b) in sides {
            for x in &a {
                for y in &b {
                    out.extend(canonical_pair(x, y));
                }
            }
        }
        out
    }
}
