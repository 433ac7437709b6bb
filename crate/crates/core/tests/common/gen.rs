//! Random small local types for the merge laws.

use proptest::prelude::*;
use scrib_core::local::{BranchArm, Instance, LocalType, SelectArm};
use scrib_core::RoleName;

pub fn local_type() -> impl Strategy<Value = LocalType> {
    let leaf = prop_oneof![
        3 => Just(LocalType::End),
        1 => prop::sample::select(&["X", "Y"][..])
            .prop_map(|p| LocalType::Var(Instance::new(p, [RoleName::new("P"), RoleName::new("Q")]))),
    ];
    leaf.prop_recursive(3, 20, 3, |inner| {
        let payloads = prop::sample::select(vec![vec![], vec!["int".to_owned()]]);
        let arms = prop::collection::btree_map(prop::sample::select(&["a", "b", "c"][..]), (payloads, inner), 1..3);
        prop_oneof![
            3 => (prop::sample::select(&["P", "Q"][..]), arms.clone()).prop_map(|(from, arms)| LocalType::Branch {
                from: RoleName::new(from),
                arms: arms
                    .into_iter()
                    .map(|(label, (payloads, cont))| BranchArm { label: label.into(), payloads, cont })
                    .collect(),
            }),
            1 => arms.prop_map(|arms| LocalType::Select(
                arms.into_iter()
                    .map(|(label, (payloads, cont))| SelectArm {
                        to: RoleName::new("P"),
                        label: label.into(),
                        payloads,
                        cont,
                    })
                    .collect(),
            )),
        ]
    })
}

pub fn same(
    a: &Result<LocalType, impl std::fmt::Debug>,
    b: &Result<LocalType, impl std::fmt::Debug>,
) -> bool {
    match (a, b) {
        (Ok(x), Ok(y)) => x.equiv(y),
        (Err(_), Err(_)) => true,
        _ => false,
    }
}
