//! Generators and independent oracles shared by the integration suites.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt::Write as _;
use std::path::PathBuf;

use authmine::callgraph::{CallGraph, ExcludeList};
use authmine::checkmining::{Expander, Icfg, MiningConfig};
use authmine::cli::{load_config, Inputs};
use authmine::ir::{build_cfg, parse_program, MethodRef, Program, Statement, StmtRef};
use authmine::rulemine::{ClosedItemset, Rational, TransactionDB};
use num_rational::Ratio;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// The core crate's fixtures, also when this module is compiled into
/// another package of the workspace.
pub fn fixture_dir() -> PathBuf {
    let here = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let own = here.join("fixtures");
    if own.is_dir() {
        own
    } else {
        here.join("../core/fixtures")
    }
}

pub fn service_inputs() -> Inputs {
    let config = load_config(&fixture_dir().join("user_restrictions/run.toml")).expect("fixture config");
    Inputs::load(&config).expect("fixture inputs")
}

pub fn sig(s: &str) -> MethodRef {
    s.parse().expect("signature")
}

// ---------------------------------------------------------------------------
// Random class hierarchies for call graph properties.

#[derive(Debug, Clone)]
pub struct ClassModel {
    pub name: String,
    pub interface: bool,
    pub superclass: Option<usize>,
    pub interfaces: Vec<usize>,
    /// Declared method names (all `(x: int) -> int`).
    pub methods: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct ProgramModel {
    pub classes: Vec<ClassModel>,
    pub text: String,
}

const METHOD_POOL: [&str; 4] = ["m0", "m1", "m2", "m3"];

fn depth(classes: &[ClassModel], i: usize) -> usize {
    let mut d = 1;
    let mut cur = classes[i].superclass;
    while let Some(c) = cur {
        d += 1;
        cur = classes[c].superclass;
    }
    d
}

/// Up to 8 classes and 3 interfaces in package `g`, hierarchies at most 5
/// deep, at most 30 methods, random virtual and static calls.
pub fn random_hierarchy(rng: &mut impl Rng) -> ProgramModel {
    let n_ifaces = rng.gen_range(0..=3);
    let n_classes = rng.gen_range(1..=8);
    let mut classes: Vec<ClassModel> = Vec::new();
    let mut budget = 30usize;
    for k in 0..n_ifaces {
        let supers: Vec<usize> = (0..classes.len()).filter(|_| rng.gen_bool(0.3)).collect();
        let methods = pick_methods(rng, &mut budget);
        classes.push(ClassModel {
            name: format!("g.I{k}"),
            interface: true,
            superclass: None,
            interfaces: supers,
            methods,
        });
    }
    for k in 0..n_classes {
        let idx = classes.len();
        let candidates: Vec<usize> = (n_ifaces..idx).filter(|&c| depth(&classes, c) < 5).collect();
        let superclass = if rng.gen_bool(0.7) { candidates.choose(rng).copied() } else { None };
        let interfaces = (0..n_ifaces).filter(|_| rng.gen_bool(0.3)).collect();
        let methods = pick_methods(rng, &mut budget);
        classes.push(ClassModel { name: format!("g.C{k}"), interface: false, superclass, interfaces, methods });
    }
    let text = render_hierarchy(rng, &classes);
    ProgramModel { classes, text }
}

fn pick_methods(rng: &mut impl Rng, budget: &mut usize) -> Vec<String> {
    let mut out = Vec::new();
    for m in METHOD_POOL {
        if *budget > 0 && rng.gen_bool(0.5) {
            out.push(m.to_string());
            *budget -= 1;
        }
    }
    out
}

/// Supertypes in breadth-first order, self first.
pub fn model_supertypes(classes: &[ClassModel], i: usize) -> Vec<usize> {
    let mut out = vec![i];
    let mut q = VecDeque::from([i]);
    while let Some(c) = q.pop_front() {
        for s in classes[c].superclass.iter().chain(&classes[c].interfaces) {
            if !out.contains(s) {
                out.push(*s);
                q.push_back(*s);
            }
        }
    }
    out
}

pub fn model_lookup(classes: &[ClassModel], i: usize, m: &str) -> Option<usize> {
    model_supertypes(classes, i).into_iter().find(|&c| classes[c].methods.iter().any(|x| x == m))
}

pub fn model_dispatch(classes: &[ClassModel], i: usize, m: &str) -> Option<usize> {
    let mut cur = Some(i);
    while let Some(c) = cur {
        if classes[c].methods.iter().any(|x| x == m) {
            return Some(c);
        }
        cur = classes[c].superclass;
    }
    None
}

pub fn model_subtypes(classes: &[ClassModel], i: usize) -> Vec<usize> {
    (0..classes.len()).filter(|&s| model_supertypes(classes, s).contains(&i)).collect()
}

pub fn model_sig(classes: &[ClassModel], c: usize, m: &str) -> MethodRef {
    sig(&format!("<{}: int {m}(int)>", classes[c].name))
}

fn render_hierarchy(rng: &mut impl Rng, classes: &[ClassModel]) -> String {
    let mut out = String::new();
    for c in classes {
        let kw = if c.interface { "interface" } else { "class" };
        let _ = write!(out, "{kw} {}", c.name);
        if let Some(s) = c.superclass {
            let _ = write!(out, " extends {}", classes[s].name);
        }
        if !c.interfaces.is_empty() {
            let names: Vec<&str> = c.interfaces.iter().map(|&i| classes[i].name.as_str()).collect();
            let kw = if c.interface { "extends" } else { "implements" };
            let _ = write!(out, " {kw} {}", names.join(", "));
        }
        out.push_str(" {\n");
        for m in &c.methods {
            if c.interface {
                let _ = writeln!(out, "  method {m}(x: int) -> int");
                continue;
            }
            let _ = writeln!(out, "  method {m}(x: int) -> int {{");
            let n = rng.gen_range(0..=3);
            for k in 0..n {
                let t = rng.gen_range(0..classes.len());
                let callee = METHOD_POOL[rng.gen_range(0..METHOD_POOL.len())];
                if model_lookup(classes, t, callee).is_none() {
                    continue;
                }
                if rng.gen_bool(0.75) {
                    let _ = writeln!(out, "    l{k} = invoke virtual {}.{callee}(x) on this", classes[t].name);
                } else {
                    let _ = writeln!(out, "    l{k} = invoke static {}.{callee}(x)", classes[t].name);
                }
                if rng.gen_bool(0.3) {
                    let _ = writeln!(out, "    if x == {k} goto E");
                }
            }
            out.push_str("    E:\n    return x\n  }\n");
        }
        out.push_str("}\n");
    }
    out
}

/// Call targets by class hierarchy analysis, computed from the model alone.
pub fn model_targets(classes: &[ClassModel], kind_virtual: bool, static_class: usize, m: &str) -> BTreeSet<MethodRef> {
    let Some(declared) = model_lookup(classes, static_class, m) else { return BTreeSet::new() };
    let declared = model_sig(classes, declared, m);
    if !kind_virtual {
        return BTreeSet::from([declared]);
    }
    let found: BTreeSet<MethodRef> = model_subtypes(classes, static_class)
        .into_iter()
        .filter(|&s| !classes[s].interface)
        .filter_map(|s| model_dispatch(classes, s, m).map(|d| model_sig(classes, d, m)))
        .collect();
    if found.is_empty() {
        BTreeSet::from([declared])
    } else {
        found
    }
}

/// Independent call graph construction from the model and parsed bodies:
/// (expanded methods, site → targets).
pub fn model_callgraph(
    model: &ProgramModel,
    program: &Program,
    root: &MethodRef,
    excluded_classes: &BTreeSet<String>,
) -> (BTreeSet<MethodRef>, BTreeMap<StmtRef, BTreeSet<MethodRef>>) {
    let index: BTreeMap<&str, usize> = model.classes.iter().enumerate().map(|(i, c)| (c.name.as_str(), i)).collect();
    let expandable = |m: &MethodRef| {
        m != root
            && !excluded_classes.contains(&m.class)
            && index.get(m.class.as_str()).is_some_and(|&c| !model.classes[c].interface)
    };
    let mut nodes = BTreeSet::from([root.clone()]);
    let mut edges = BTreeMap::new();
    let mut work = vec![root.clone()];
    while let Some(m) = work.pop() {
        let decl = program.method(&m).expect("expanded method exists");
        for (i, s) in decl.body().iter().enumerate() {
            let Statement::Invoke(inv) = s else { continue };
            let targets = model_targets(
                &model.classes,
                inv.kind == authmine::ir::InvokeKind::Virtual,
                index[inv.class.as_str()],
                &inv.name,
            );
            for t in &targets {
                if expandable(t) && nodes.insert(t.clone()) {
                    work.push(t.clone());
                }
            }
            edges.insert(StmtRef::new(m.clone(), i), targets);
        }
    }
    (nodes, edges)
}

// ---------------------------------------------------------------------------
// Small programs for the marking oracle.

#[derive(Debug, Clone)]
pub struct MarkingCase {
    pub text: String,
    pub root: MethodRef,
}

/// One to three static methods of `g.M` calling only later methods, plus an
/// external `g.Ext.e`, at most 20 statements in total.
pub fn random_marking_program(rng: &mut impl Rng) -> MarkingCase {
    loop {
        let n = rng.gen_range(1..=3);
        let mut text = String::from("class g.Ext external {\n  method e(x: int) -> int\n}\nclass g.M {\n");
        let mut total = 0;
        for i in 0..n {
            let attr = if i == 0 { " entrypoint" } else { "" };
            let _ = writeln!(text, "  method f{i}(x: int) -> int{attr} {{");
            let len = rng.gen_range(2..=4);
            let labels = ["A", "B"];
            let mut lines = Vec::new();
            for k in 0..len {
                let line = match rng.gen_range(0..14) {
                    0..=3 if i + 1 < n => format!("l{k} = invoke static g.M.f{}(x)", rng.gen_range(i + 1..n)),
                    0 => format!("l{k} = invoke static g.Ext.e(x)"),
                    1..=6 => format!("if x == {k} goto {}", labels.choose(rng).unwrap()),
                    7 => format!("goto {}", labels.choose(rng).unwrap()),
                    8 | 9 => "throw new java.lang.SecurityException()".to_string(),
                    10 => "return x".to_string(),
                    _ => format!("l{k} = x + 1"),
                };
                lines.push(line);
            }
            for l in labels {
                let at = rng.gen_range(0..=lines.len());
                lines.insert(at, format!("{l}:"));
            }
            if i + 1 < n && rng.gen_bool(0.7) {
                lines.insert(0, format!("c = invoke static g.M.f{}(x)", rng.gen_range(i + 1..n)));
            }
            if rng.gen_bool(0.5) {
                lines.extend(["if x == 9 goto R", "throw new java.lang.SecurityException()", "R:"].map(String::from));
            }
            lines.push("return x".to_string());
            total += lines.len();
            for l in lines {
                let _ = writeln!(text, "    {l}");
            }
            text.push_str("  }\n");
        }
        text.push_str("}\n");
        if total <= 20 {
            return MarkingCase { text, root: sig("<g.M: int f0(int)>") };
        }
    }
}

pub fn security_throws(program: &Program, graph: &CallGraph) -> BTreeSet<StmtRef> {
    let mut out = BTreeSet::new();
    for m in &graph.nodes {
        let Some(d) = program.method(m) else { continue };
        for (i, s) in d.body().iter().enumerate() {
            if matches!(s, Statement::Throw { exception, .. } if exception == "java.lang.SecurityException") {
                out.insert(StmtRef::new(m.clone(), i));
            }
        }
    }
    out
}

type State = (MethodRef, usize, Vec<(MethodRef, usize)>);

fn concrete_successors(program: &Program, graph: &CallGraph, (m, i, stack): &State) -> Vec<State> {
    let body = program.method(m).expect("method").body();
    let cfg = build_cfg(program.method(m).unwrap()).unwrap();
    let mut out = Vec::new();
    match &body[*i] {
        Statement::Return(_) => {
            if let Some((cm, cs)) = stack.last() {
                let mut rest = stack.clone();
                rest.pop();
                out.push((cm.clone(), cs + 1, rest));
            }
        }
        Statement::Invoke(_) => {
            let site = StmtRef::new(m.clone(), *i);
            let mut open = false;
            for t in graph.targets(&site) {
                let has_body = program.method(t).is_some_and(|d| d.body.is_some());
                if graph.is_expanded(t) && has_body {
                    let mut s = stack.clone();
                    s.push((m.clone(), *i));
                    out.push((t.clone(), 0, s));
                } else {
                    open = true;
                }
            }
            if open {
                out.extend(cfg.successors(*i).iter().map(|&n| (m.clone(), n, stack.clone())));
            }
        }
        _ => out.extend(cfg.successors(*i).iter().map(|&n| (m.clone(), n, stack.clone()))),
    }
    out
}

fn explore(program: &Program, graph: &CallGraph, start: State) -> BTreeSet<State> {
    let mut seen = BTreeSet::from([start.clone()]);
    let mut work = vec![start];
    while let Some(s) = work.pop() {
        for n in concrete_successors(program, graph, &s) {
            if seen.insert(n.clone()) {
                work.push(n);
            }
        }
    }
    seen
}

/// Conditionals on some concrete call-stack path from the root such that a
/// target lies on a concrete continuation from one of their branches.
pub fn path_oracle(program: &Program, graph: &CallGraph, targets: &BTreeSet<StmtRef>) -> BTreeSet<StmtRef> {
    let reachable = explore(program, graph, (graph.root.clone(), 0, Vec::new()));
    let mut out = BTreeSet::new();
    for (m, i, stack) in &reachable {
        let decl = program.method(m).unwrap();
        if !decl.body()[*i].is_conditional() {
            continue;
        }
        let cfg = build_cfg(decl).unwrap();
        let hit = cfg.successors(*i).iter().any(|&b| {
            explore(program, graph, (m.clone(), b, stack.clone()))
                .iter()
                .any(|(tm, ti, _)| targets.contains(&StmtRef::new(tm.clone(), *ti)))
        });
        if hit {
            out.insert(StmtRef::new(m.clone(), *i));
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Value expansion fixtures.

/// Canonical checks of the conditional at `index` of `method`, with the
/// graph rooted at `root`.
pub fn expand_at(text: &str, root: &str, method: &str, index: usize, cqs: &[&str]) -> BTreeSet<String> {
    let program = parse_program(text).expect("fixture parses");
    let root = sig(root);
    let graph = authmine::callgraph::build_cha_callgraph(
        &program,
        &root,
        &ExcludeList::default(),
        &BTreeSet::from([root.clone()]),
    );
    let icfg = Icfg::new(&program, &graph);
    let cqs: BTreeSet<MethodRef> = cqs.iter().map(|s| sig(s)).collect();
    let bundle = MiningConfig::default().bundle_class;
    let mut expander = Expander::new(&icfg, &cqs, &bundle);
    let mi = icfg.method_index(&sig(method)).expect("method in graph");
    expander.conditional_checks(mi, index)
}

pub struct RuleFixture {
    pub rule: u8,
    pub name: &'static str,
    pub text: &'static str,
    pub method: &'static str,
    pub index: usize,
    pub cqs: &'static [&'static str],
    pub expected: &'static [&'static str],
}

macro_rules! fixture {
    ($body:expr) => {
        concat!(
            "
class android.os.Bundle external {
  method getInt(key: java.lang.String) -> int
}
class t.S external {
  field UID: int
  field CODES: int[]
  field NAME: java.lang.String
  method uid() -> int
  method check(o: t.S, n: int) -> int
  method check1(n: int) -> int
  method bundle() -> android.os.Bundle
}
class t.E {
",
            $body,
            "
}
"
        )
    };
}

pub const E_ROOT: &str = "<t.E: void f(int,java.lang.String)>";
pub const E_F: &str = "<t.E: void f(int,java.lang.String)>";
pub const E_H: &str = "<t.E: void h(int)>";
pub const CHECK: &str = "<t.S: int check(t.S,int)>";
pub const CHECK1: &str = "<t.S: int check1(int)>";

pub fn rule_fixtures() -> Vec<RuleFixture> {
    vec![
        RuleFixture {
            rule: 1,
            name: "object-typed values become ALL",
            text: fixture!(
                "  method f(p: int, s: java.lang.String) -> void entrypoint {
    o = new t.S
    l0 = invoke static t.S.check(o, 5)
    if l0 == 0 goto X
    X:
    return
  }"
            ),
            method: E_F,
            index: 2,
            cqs: &[CHECK],
            expected: &["pair(0, <t.S: int check(t.S,int)>(ALL, 5))"],
        },
        RuleFixture {
            rule: 2,
            name: "cyclic definitions become ALL",
            text: fixture!(
                "  method f(p: int, s: java.lang.String) -> void entrypoint {
    l0 = const 1
    L:
    l0 = l0 + 1
    l1 = invoke static t.S.check1(l0)
    if l1 == 0 goto L
    return
  }"
            ),
            method: E_F,
            index: 4,
            cqs: &[CHECK1],
            expected: &["pair(0, <t.S: int check1(int)>(ALL))"],
        },
        RuleFixture {
            rule: 3,
            name: "entry point parameters are ALL, callee parameters take caller arguments",
            text: fixture!(
                "  method f(p: int, s: java.lang.String) -> void entrypoint {
    if p == 5 goto X
    invoke static t.E.h(7)
    X:
    return
  }
  method h(q: int) -> void {
    l0 = field t.S.UID
    if q == l0 goto Y
    Y:
    return
  }"
            ),
            method: E_H,
            index: 1,
            cqs: &[],
            expected: &["pair(7, <t.S: int UID>)"],
        },
        RuleFixture {
            rule: 3,
            name: "entry point parameter compared with a constant yields nothing",
            text: fixture!(
                "  method f(p: int, s: java.lang.String) -> void entrypoint {
    if p == 5 goto X
    X:
    return
  }"
            ),
            method: E_F,
            index: 0,
            cqs: &[],
            expected: &[],
        },
        RuleFixture {
            rule: 4,
            name: "lengthof, instanceof, new and cast give ALL",
            text: fixture!(
                "  method f(p: int, s: java.lang.String) -> void entrypoint {
    a = new int[]
    l0 = lengthof a
    o = new t.S
    l1 = instanceof t.S o
    l2 = cast int l0
    l3 = invoke static t.S.check(o, l0)
    l4 = invoke static t.S.check1(l2)
    l5 = l3 + l4
    if l5 == l1 goto X
    X:
    return
  }"
            ),
            method: E_F,
            index: 8,
            cqs: &[],
            expected: &[],
        },
        RuleFixture {
            rule: 4,
            name: "cast argument shows as ALL inside a context query call",
            text: fixture!(
                "  method f(p: int, s: java.lang.String) -> void entrypoint {
    l0 = field t.S.UID
    l1 = cast int l0
    l2 = invoke static t.S.check1(l1)
    if l2 == l0 goto X
    X:
    return
  }"
            ),
            method: E_F,
            index: 3,
            cqs: &[CHECK1],
            expected: &["pair(<t.S: int UID>, <t.S: int check1(int)>(ALL))"],
        },
        RuleFixture {
            rule: 5,
            name: "array reads with an ALL index are ALL, constant indices are kept",
            text: fixture!(
                "  method f(p: int, s: java.lang.String) -> void entrypoint {
    a = field t.S.CODES
    l0 = a[p]
    l1 = a[2]
    l2 = invoke static t.S.uid()
    if l0 == l2 goto X
    if l1 == l2 goto X
    X:
    return
  }"
            ),
            method: E_F,
            index: 5,
            cqs: &[],
            expected: &["pair(<t.S: int uid()>, <t.S: int[] CODES>[2])"],
        },
        RuleFixture {
            rule: 5,
            name: "array read with an ALL index gives no pair",
            text: fixture!(
                "  method f(p: int, s: java.lang.String) -> void entrypoint {
    a = field t.S.CODES
    l0 = a[p]
    l2 = invoke static t.S.uid()
    if l0 == l2 goto X
    X:
    return
  }"
            ),
            method: E_F,
            index: 3,
            cqs: &[],
            expected: &[],
        },
        RuleFixture {
            rule: 6,
            name: "returns of Bundle methods are ALL",
            text: fixture!(
                "  method f(p: int, s: java.lang.String) -> void entrypoint {
    b = invoke static t.S.bundle()
    l0 = invoke virtual android.os.Bundle.getInt(\"uid\") on b
    l1 = invoke static t.S.check1(l0)
    if l1 == 0 goto X
    X:
    return
  }"
            ),
            method: E_F,
            index: 3,
            cqs: &[CHECK1],
            expected: &["pair(0, <t.S: int check1(int)>(ALL))"],
        },
        RuleFixture {
            rule: 7,
            name: "a value set containing ALL collapses to ALL",
            text: fixture!(
                "  method f(p: int, s: java.lang.String) -> void entrypoint {
    l0 = const 3
    if p == 0 goto A
    l0 = p
    A:
    l1 = invoke static t.S.check1(l0)
    if l1 == 0 goto X
    X:
    return
  }"
            ),
            method: E_F,
            index: 5,
            cqs: &[CHECK1],
            expected: &["pair(0, <t.S: int check1(int)>(ALL))"],
        },
        RuleFixture {
            rule: 7,
            name: "without ALL every value is kept",
            text: fixture!(
                "  method f(p: int, s: java.lang.String) -> void entrypoint {
    l0 = const 3
    if p == 0 goto A
    l0 = const 4
    A:
    l1 = invoke static t.S.check1(l0)
    if l1 == 0 goto X
    X:
    return
  }"
            ),
            method: E_F,
            index: 5,
            cqs: &[CHECK1],
            expected: &["pair(0, <t.S: int check1(int)>(3))", "pair(0, <t.S: int check1(int)>(4))"],
        },
        RuleFixture {
            rule: 8,
            name: "NULL is dropped when other values exist",
            text: fixture!(
                "  method f(p: int, s: java.lang.String) -> void entrypoint {
    l0 = const null
    if p == 0 goto A
    l0 = field t.S.NAME
    A:
    l1 = const \"x\"
    if l0 == l1 goto X
    X:
    return
  }"
            ),
            method: E_F,
            index: 5,
            cqs: &[],
            expected: &["pair(\"x\", <t.S: java.lang.String NAME>)"],
        },
        RuleFixture {
            rule: 8,
            name: "a lone NULL comparison is removed",
            text: fixture!(
                "  method f(p: int, s: java.lang.String) -> void entrypoint {
    l0 = field t.S.NAME
    if l0 == null goto X
    X:
    return
  }"
            ),
            method: E_F,
            index: 1,
            cqs: &[],
            expected: &[],
        },
        RuleFixture {
            rule: 9,
            name: "constant pairs and equal sides are removed",
            text: fixture!(
                "  method f(p: int, s: java.lang.String) -> void entrypoint {
    l0 = const 1
    l1 = field t.S.UID
    l2 = l1
    if l0 == 2 goto X
    if l1 == l2 goto X
    if l1 == l0 goto X
    X:
    return
  }"
            ),
            method: E_F,
            index: 5,
            cqs: &[],
            expected: &["pair(1, <t.S: int UID>)"],
        },
        RuleFixture {
            rule: 9,
            name: "constant-only comparison yields nothing",
            text: fixture!(
                "  method f(p: int, s: java.lang.String) -> void entrypoint {
    l0 = const 1
    if l0 == 2 goto X
    X:
    return
  }"
            ),
            method: E_F,
            index: 1,
            cqs: &[],
            expected: &[],
        },
        RuleFixture {
            rule: 10,
            name: "equals pairs are rebuilt from receiver and argument",
            text: fixture!(
                "  method f(p: int, s: java.lang.String) -> void entrypoint {
    l0 = field t.S.NAME
    l1 = invoke virtual java.lang.String.equals(\"1\") on l0
    if l1 == 0 goto X
    X:
    return
  }"
            ),
            method: E_F,
            index: 2,
            cqs: &[],
            expected: &["pair(\"1\", <t.S: java.lang.String NAME>)"],
        },
    ]
}

// ---------------------------------------------------------------------------
// Random transaction databases and rule oracles.

/// At most 10 items and 8 transactions.
pub fn random_db(rng: &mut impl Rng) -> TransactionDB {
    let n_items = rng.gen_range(1..=10);
    let n_tx = rng.gen_range(1..=8);
    let density = rng.gen_range(0.2..0.8);
    let rows = (0..n_tx).map(|_| (0..n_items).filter(|_| rng.gen_bool(density)).collect()).collect();
    TransactionDB::from_ids(n_items, rows)
}

pub fn support_count(db: &TransactionDB, set: &BTreeSet<usize>) -> usize {
    db.transactions.iter().filter(|t| set.is_subset(t)).count()
}

pub type RuleKey = (BTreeSet<usize>, BTreeSet<usize>);

/// Targeted rules straight from the definition, over a given family of
/// closed sets: (X, Y) → (supporters, confidence).
pub fn oracle_rules(
    db: &TransactionDB,
    closed: &BTreeSet<ClosedItemset>,
    j: usize,
    minconf: Rational,
) -> BTreeMap<RuleKey, (BTreeSet<usize>, Rational)> {
    let a = &db.transactions[j];
    let mut out: BTreeMap<_, (BTreeSet<usize>, Rational)> = BTreeMap::new();
    for c in closed {
        let x: BTreeSet<usize> = c.items.iter().filter(|i| a.contains(i)).copied().collect();
        let y: BTreeSet<usize> = c.items.iter().filter(|i| !a.contains(i)).copied().collect();
        if x.is_empty() || y.is_empty() {
            continue;
        }
        let sup: BTreeSet<usize> = (0..db.len()).filter(|&t| c.items.is_subset(&db.transactions[t])).collect();
        if sup.len() < 2 {
            continue;
        }
        let conf = Ratio::new(sup.len() as u64, support_count(db, &x) as u64);
        if conf < minconf {
            continue;
        }
        let key = (x, y);
        if out.get(&key).is_none_or(|(s, _)| s.len() < sup.len()) {
            out.insert(key, (sup, conf));
        }
    }
    out
}

pub fn subsets(set: &BTreeSet<usize>) -> Vec<BTreeSet<usize>> {
    let items: Vec<usize> = set.iter().copied().collect();
    (0u32..(1 << items.len()))
        .map(|mask| items.iter().enumerate().filter(|(k, _)| mask & (1 << k) != 0).map(|(_, &i)| i).collect())
        .collect()
}

/// Counterexamples to the naive claim: closed `X ∪ Y`, `Y' ⊂ Y` with
/// σ(X ∪ Y') > σ(X ∪ Y) but `X ∪ Y'` not among the closed sets.
pub fn support_increase_violations(db: &TransactionDB, closed: &BTreeSet<ClosedItemset>) -> usize {
    let sets: BTreeSet<&BTreeSet<usize>> = closed.iter().map(|c| &c.items).collect();
    let mut bad = 0;
    for c in closed {
        for x in subsets(&c.items) {
            let y: BTreeSet<usize> = c.items.difference(&x).copied().collect();
            for yp in subsets(&y) {
                if yp.len() == y.len() {
                    continue;
                }
                let xyp: BTreeSet<usize> = x.union(&yp).copied().collect();
                if xyp.is_empty() {
                    continue;
                }
                if support_count(db, &xyp) > c.support_count() && !sets.contains(&xyp) {
                    bad += 1;
                }
            }
        }
    }
    bad
}

/// Counterexamples to the closure form: whenever σ(X ∪ Y') > σ(X ∪ Y)
/// the closure of `X ∪ Y'` is a mined closed set with the same support.
pub fn support_increase_closure_violations(db: &TransactionDB, closed: &BTreeSet<ClosedItemset>) -> usize {
    let by_items: BTreeMap<&BTreeSet<usize>, usize> = closed.iter().map(|c| (&c.items, c.support_count())).collect();
    let mut bad = 0;
    for c in closed {
        for x in subsets(&c.items) {
            let y: BTreeSet<usize> = c.items.difference(&x).copied().collect();
            for yp in subsets(&y) {
                let xyp: BTreeSet<usize> = x.union(&yp).copied().collect();
                if xyp.is_empty() || yp.len() == y.len() {
                    continue;
                }
                let sup = db.supporters(&xyp);
                if sup.len() <= c.support_count() {
                    continue;
                }
                let closure = db.closure(&sup);
                if by_items.get(&closure) != Some(&sup.len()) {
                    bad += 1;
                }
            }
        }
    }
    bad
}

/// Counterexamples to the naive sub-rule claim: a frequent closed `X ∪ Y` whose
/// rule `X ⇒ Y` is not confident, a confident `X ⇒ Y'` with `∅ ≠ Y' ⊂ Y`,
/// and `X ∪ Y'` not among the closed sets.
pub fn confident_subrule_violations(db: &TransactionDB, closed: &BTreeSet<ClosedItemset>, minconf: Rational) -> usize {
    let sets: BTreeSet<&BTreeSet<usize>> = closed.iter().map(|c| &c.items).collect();
    let mut bad = 0;
    for c in closed {
        for x in subsets(&c.items) {
            let y: BTreeSet<usize> = c.items.difference(&x).copied().collect();
            if x.is_empty() || y.is_empty() {
                continue;
            }
            let sx = support_count(db, &x) as u64;
            if Ratio::new(c.support_count() as u64, sx) >= minconf {
                continue;
            }
            for yp in subsets(&y) {
                if yp.is_empty() || yp.len() == y.len() {
                    continue;
                }
                let xyp: BTreeSet<usize> = x.union(&yp).copied().collect();
                if Ratio::new(support_count(db, &xyp) as u64, sx) >= minconf && !sets.contains(&xyp) {
                    bad += 1;
                }
            }
        }
    }
    bad
}

/// Confident rules over frequent itemsets that no emitted rule subsumes.
/// `X ⇒ Y'` from a frequent `Z` (with `X = Z ∩ A_j`) is subsumed by an
/// emitted `X₁ ⇒ Y₁` with `X ⊆ X₁`, `Y' ⊆ Y₁`, the same supporters and
/// at least the same confidence.
pub fn coverage_violations(
    db: &TransactionDB,
    closed: &BTreeSet<ClosedItemset>,
    min_count: usize,
    minconf: Rational,
) -> usize {
    let universe: BTreeSet<usize> = (0..db.items.len()).collect();
    let frequent: Vec<BTreeSet<usize>> =
        subsets(&universe).into_iter().filter(|z| !z.is_empty() && support_count(db, z) >= min_count.max(2)).collect();
    let mut bad = 0;
    for j in 0..db.len() {
        let emitted = authmine::rulemine::generate_targeted_rules(db, closed, j, minconf);
        let a = &db.transactions[j];
        for z in &frequent {
            let x: BTreeSet<usize> = z.intersection(a).copied().collect();
            let yp: BTreeSet<usize> = z.difference(a).copied().collect();
            if x.is_empty() || yp.is_empty() {
                continue;
            }
            let sup = db.supporters(z);
            let conf = Ratio::new(sup.len() as u64, support_count(db, &x) as u64);
            if conf < minconf {
                continue;
            }
            let covered = emitted.iter().any(|r| {
                x.is_subset(&r.antecedent)
                    && yp.is_subset(&r.consequent)
                    && r.supporters == sup
                    && r.confidence() >= conf
            });
            if !covered {
                bad += 1;
            }
        }
    }
    bad
}

// ---------------------------------------------------------------------------
// Dominators by definition, for loop detection.

/// Back edges `(a, b)` where every path from node 0 to `a` passes `b`.
pub fn brute_back_edges(succ: &[Vec<usize>]) -> BTreeSet<(usize, usize)> {
    let n = succ.len();
    let reach_without = |blocked: Option<usize>| {
        let mut seen = vec![false; n];
        if blocked == Some(0) || n == 0 {
            return seen;
        }
        seen[0] = true;
        let mut stack = vec![0];
        while let Some(v) = stack.pop() {
            for &w in &succ[v] {
                if Some(w) != blocked && !seen[w] {
                    seen[w] = true;
                    stack.push(w);
                }
            }
        }
        seen
    };
    let all = reach_without(None);
    let mut out = BTreeSet::new();
    for a in 0..n {
        if !all[a] {
            continue;
        }
        for &b in &succ[a] {
            let dominates = a == b || b == 0 || !reach_without(Some(b))[a];
            if dominates {
                out.insert((a, b));
            }
        }
    }
    out
}
