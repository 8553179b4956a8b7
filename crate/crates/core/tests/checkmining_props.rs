mod common;

use std::collections::BTreeSet;

use authmine::callgraph::{build_cha_callgraph, ExcludeList};
use authmine::checkmining::{analyze_all, forward_defuse_cq_returns, Expander, Icfg, MiningConfig, Val};
use authmine::ir::{parse_program, StmtRef};
use common::{rule_fixtures, service_inputs, sig, E_ROOT};

#[test]
fn value_sets_containing_all_are_exactly_all() {
    let bundle = MiningConfig::default().bundle_class;
    let mut saw_all = 0;
    for f in rule_fixtures() {
        let program = parse_program(f.text).unwrap();
        let root = sig(E_ROOT);
        let graph = build_cha_callgraph(&program, &root, &ExcludeList::default(), &BTreeSet::from([root.clone()]));
        let icfg = Icfg::new(&program, &graph);
        let cqs: BTreeSet<_> = f.cqs.iter().map(|s| sig(s)).collect();
        let mut ex = Expander::new(&icfg, &cqs, &bundle);
        for m in &graph.nodes {
            let mi = icfg.method_index(m).unwrap();
            let locals: BTreeSet<String> = icfg.body(mi).iter().filter_map(|s| s.def().map(str::to_string)).collect();
            for l in locals {
                let vals = ex.local(mi, &l);
                if vals.contains(&Val::All) {
                    saw_all += 1;
                    assert_eq!(vals, BTreeSet::from([Val::All]), "{} {l}", f.name);
                }
            }
        }
    }
    assert!(saw_all > 10);
}

#[test]
fn pairs_never_have_a_bare_all_side() {
    let inputs = service_inputs();
    let mut pairs = 0;
    for a in analyze_all(&inputs.context()) {
        for c in a.checks.checks.iter().filter(|c| c.starts_with("pair(")) {
            pairs += 1;
            assert!(!c.starts_with("pair(ALL,") && !c.ends_with(", ALL)"), "{c}");
        }
    }
    assert!(pairs > 5);
}

#[test]
fn mining_is_deterministic() {
    let inputs = service_inputs();
    let once = serde_json::to_string(&analyze_all(&inputs.context()).into_iter().map(|a| a.checks).collect::<Vec<_>>())
        .unwrap();
    for _ in 0..5 {
        let again =
            serde_json::to_string(&analyze_all(&inputs.context()).into_iter().map(|a| a.checks).collect::<Vec<_>>())
                .unwrap();
        assert_eq!(once, again);
    }
}

const DIRECT: &str = "
class g.Ctx external {
  method check(n: int) -> int
}
class g.S {
  field SAVED: int
  method f(x: int) -> int entrypoint {
    l0 = invoke static g.Ctx.check(x)
    l1 = l0
    if l1 == 4 goto A
    A:
    return x
  }
}
";

#[test]
fn a_field_round_trip_removes_the_marking() {
    let through_field = DIRECT.replace("    l1 = l0\n", "    field g.S.SAVED = l0\n    l1 = field g.S.SAVED\n");
    let root = sig("<g.S: int f(int)>");
    let cqs = BTreeSet::from([sig("<g.Ctx: int check(int)>")]);
    let marked = |text: &str| {
        let program = parse_program(text).unwrap();
        let graph = build_cha_callgraph(&program, &root, &ExcludeList::default(), &BTreeSet::from([root.clone()]));
        forward_defuse_cq_returns(&Icfg::new(&program, &graph), &cqs)
    };
    assert_eq!(marked(DIRECT), BTreeSet::from([StmtRef::new(root.clone(), 2)]));
    assert!(marked(&through_field).is_empty());
}
