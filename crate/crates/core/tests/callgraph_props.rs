mod common;

use std::collections::BTreeSet;

use authmine::callgraph::{build_cha_callgraph, ClassPattern, ExcludeList};
use authmine::ir::parse_program;
use common::{model_callgraph, model_sig, model_subtypes, random_hierarchy, rng};
use proptest::prelude::*;

fn roots(model: &common::ProgramModel) -> Vec<authmine::ir::MethodRef> {
    model
        .classes
        .iter()
        .enumerate()
        .filter(|(_, c)| !c.interface)
        .flat_map(|(i, c)| c.methods.iter().map(move |m| model_sig(&model.classes, i, m)))
        .collect()
}

fn exclusion(classes: &BTreeSet<String>) -> ExcludeList {
    ExcludeList {
        class_path: classes.iter().map(|c| ClassPattern::Exact(c.clone())).collect(),
        ..ExcludeList::default()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn subtypes_match_the_model(seed in any::<u64>()) {
        let model = random_hierarchy(&mut rng(seed));
        let program = parse_program(&model.text).unwrap();
        for (i, c) in model.classes.iter().enumerate() {
            let want: BTreeSet<String> =
                model_subtypes(&model.classes, i).into_iter().map(|s| model.classes[s].name.clone()).collect();
            prop_assert_eq!(program.subtypes_of(&c.name).unwrap(), want);
            for d in &model.classes {
                prop_assert_eq!(program.is_subtype(&d.name, &c.name), program.subtypes_of(&c.name).unwrap().contains(&d.name));
            }
        }
    }

    #[test]
    fn cha_graph_matches_the_model(seed in any::<u64>()) {
        let model = random_hierarchy(&mut rng(seed));
        let program = parse_program(&model.text).unwrap();
        for root in roots(&model) {
            let g = build_cha_callgraph(&program, &root, &ExcludeList::default(), &BTreeSet::from([root.clone()]));
            let (nodes, edges) = model_callgraph(&model, &program, &root, &BTreeSet::new());
            prop_assert_eq!(&g.nodes, &nodes);
            prop_assert_eq!(&g.edges, &edges);
        }
    }

    #[test]
    fn excluding_more_classes_never_grows_the_graph(seed in any::<u64>(), picks in proptest::collection::vec(any::<bool>(), 11)) {
        let model = random_hierarchy(&mut rng(seed));
        let program = parse_program(&model.text).unwrap();
        let names: Vec<String> = model.classes.iter().map(|c| c.name.clone()).collect();
        let small: BTreeSet<String> = names.iter().zip(&picks).filter(|(_, &p)| p).map(|(n, _)| n.clone()).take(2).collect();
        let large: BTreeSet<String> = names.iter().zip(&picks).filter(|(_, &p)| p).map(|(n, _)| n.clone()).collect();
        for root in roots(&model) {
            let eps = BTreeSet::from([root.clone()]);
            let a = build_cha_callgraph(&program, &root, &exclusion(&small), &eps);
            let b = build_cha_callgraph(&program, &root, &exclusion(&large), &eps);
            prop_assert!(b.nodes.is_subset(&a.nodes));
            prop_assert!(b.edges.keys().all(|k| a.edges.contains_key(k)));
            let (nodes, _) = model_callgraph(&model, &program, &root, &large);
            prop_assert_eq!(&b.nodes, &nodes);
        }
    }
}

#[test]
fn service_graphs_stop_at_library_classes() {
    let inputs = common::service_inputs();
    let ctx = inputs.context();
    let root =
        common::sig("<com.android.server.pm.UserManagerService: boolean hasBaseUserRestriction(java.lang.String,int)>");
    let g = build_cha_callgraph(ctx.program, &root, ctx.exclude, ctx.entry_points);
    let classes: BTreeSet<&str> = g.nodes.iter().map(|m| m.class.as_str()).collect();
    assert_eq!(classes, BTreeSet::from(["com.android.server.pm.UserManagerService"]));
    assert_eq!(g.nodes.len(), 3);
    assert!(g.cuts.keys().any(|m| m.class == "android.os.Binder"));
}

#[test]
fn generated_hierarchies_exercise_dispatch() {
    let (mut deep, mut polymorphic) = (0, 0);
    for seed in 0..200 {
        let model = random_hierarchy(&mut rng(seed));
        let program = parse_program(&model.text).unwrap();
        for root in roots(&model) {
            let g = build_cha_callgraph(&program, &root, &ExcludeList::default(), &BTreeSet::from([root.clone()]));
            deep += usize::from(g.nodes.len() > 2);
            polymorphic += g.edges.values().filter(|t| t.len() > 1).count();
        }
    }
    assert!(deep > 50 && polymorphic > 50, "deep {deep}, polymorphic {polymorphic}");
}
