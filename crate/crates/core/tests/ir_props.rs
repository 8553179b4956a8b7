mod common;

use authmine::ir::{build_cfg, parse_program, render_program, Statement};
use common::{random_hierarchy, random_marking_program, rng, rule_fixtures};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;

/// A class exercising every statement and expression form.
fn random_program(r: &mut impl Rng) -> String {
    let strings = ["plain", "with \"quotes\"", "tab\tand\nnewline", "back\\slash", ""];
    let locals = ["x", "a", "b", "o"];
    let labels = ["L0", "L1", "L2"];
    let mut lines = vec![
        "a = const 1".to_string(),
        "b = const true".to_string(),
        "o = new g.K".to_string(),
        "arr = new int[]".to_string(),
    ];
    for k in 0..r.gen_range(0..15) {
        let l = locals.choose(r).unwrap();
        let line = match r.gen_range(0..18) {
            0 => format!("s{k} = const {:?}", strings.choose(r).unwrap()),
            1 => format!("t{k} = const null"),
            2 => format!("t{k} = const -{k}"),
            3 => format!("t{k} = {l} + {k}"),
            4 => format!("t{k} = neg {l}"),
            5 => format!("t{k} = not b"),
            6 => format!("t{k} = field g.K.f on o"),
            7 => format!("t{k} = field g.K.s"),
            8 => format!("field g.K.f on o = {l}"),
            9 => format!("arr[{k}] = {l}"),
            10 => format!("t{k} = arr[{l}]"),
            11 => format!("t{k} = cast long {l}"),
            12 => format!("t{k} = instanceof g.K o"),
            13 => format!("t{k} = lengthof arr"),
            14 => format!("t{k} = invoke special g.K.m(x, \"s\", {k}) on o"),
            15 => format!("if {l} >= {k} goto {}", labels.choose(r).unwrap()),
            16 => format!(
                "switch x {{ case 1: {} case 2: {} default: {} }}",
                labels.choose(r).unwrap(),
                labels.choose(r).unwrap(),
                labels.choose(r).unwrap()
            ),
            _ => format!("if not b goto {}", labels.choose(r).unwrap()),
        };
        lines.push(line);
    }
    for l in labels {
        let at = r.gen_range(4..=lines.len());
        lines.insert(at, format!("{l}:"));
    }
    if r.gen_bool(0.5) {
        lines.push("throw new java.lang.IllegalStateException(a)".into());
    } else {
        lines.push("return x".into());
    }
    format!(
        "# generated\nclass g.K {{\n  field f: int\n  field s: java.lang.String\n  method m(x: int, y: java.lang.String, z: int) -> int {{\n    return x\n  }}\n  method run(x: int) -> int entrypoint {{\n    {}\n  }}\n}}\n",
        lines.join("\n    ")
    )
}

fn round_trips(text: &str) -> Result<(), TestCaseError> {
    let p = parse_program(text).map_err(|e| TestCaseError::fail(format!("{e}\n{text}")))?;
    let rendered = render_program(&p);
    let q = parse_program(&rendered).map_err(|e| TestCaseError::fail(format!("{e}\n{rendered}")))?;
    prop_assert_eq!(&p, &q);
    prop_assert_eq!(render_program(&q), rendered);
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn random_bodies_round_trip(seed in any::<u64>()) {
        round_trips(&random_program(&mut rng(seed)))?;
    }

    #[test]
    fn random_hierarchies_round_trip(seed in any::<u64>()) {
        round_trips(&random_hierarchy(&mut rng(seed)).text)?;
        round_trips(&random_marking_program(&mut rng(seed)).text)?;
    }

    #[test]
    fn cfg_successor_counts(seed in any::<u64>()) {
        let p = parse_program(&random_program(&mut rng(seed))).unwrap();
        for m in p.methods().filter(|m| m.body.is_some()) {
            let cfg = build_cfg(m).unwrap();
            let body = m.body();
            for (i, s) in body.iter().enumerate() {
                let n = cfg.successors(i).len();
                match s {
                    Statement::If { .. } => prop_assert_eq!(n, 2),
                    Statement::Switch { cases, .. } => prop_assert_eq!(n, cases.len() + 1),
                    _ => prop_assert!(n <= 1),
                }
            }
        }
    }
}

#[test]
fn fixtures_round_trip() {
    for f in rule_fixtures() {
        round_trips(f.text).unwrap();
    }
    let text = std::fs::read_to_string(common::fixture_dir().join("user_restrictions/program.ir")).unwrap();
    round_trips(&text).unwrap();
}
