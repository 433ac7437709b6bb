mod common;

use std::time::Instant;

use common::corpus;
use scrib_core::codegen::{
    affinity_audit, check_closed, emit_browser_api, emit_node_api, emit_runtime_behavior_spec,
    parse_behavior_spec, TransitionTable,
};
use scrib_core::verify::{bounded_traces, check_safety, compose, TraceSource, Verdict};
use scrib_core::{parse_module, pretty_print};

#[test]
fn corpus_is_large_enough() {
    assert!(corpus().len() >= 10);
}

#[test]
fn pretty_printing_round_trips() {
    for case in corpus() {
        let printed = pretty_print(&case.module);
        let again =
            parse_module(&printed).unwrap_or_else(|d| panic!("{}: {d:?}\n{printed}", case.name));
        assert!(again.structurally_eq(&case.module), "{}", case.name);
        assert_eq!(pretty_print(&again), printed, "{}", case.name);
    }
}

#[test]
fn machines_are_valid() {
    for case in corpus() {
        for m in case.efsms() {
            m.validate()
                .unwrap_or_else(|e| panic!("{}/{}: {e}", case.name, m.role));
            assert!(m.terminal().is_some() || !m.transitions.is_empty());
        }
    }
}

#[test]
fn every_protocol_is_safe() {
    for case in corpus() {
        let pg = compose(&case.efsms()).unwrap();
        let report = check_safety(&pg);
        assert_eq!(report.verdict, Verdict::Safe, "{}:\n{report}", case.name);
    }
}

#[test]
fn global_and_product_traces_agree_to_depth_twelve() {
    for case in corpus() {
        let started = Instant::now();
        let pg = compose(&case.efsms()).unwrap();
        for k in 0..=12 {
            let global = bounded_traces(
                TraceSource::Global {
                    module: &case.module,
                    protocol: &case.protocol,
                },
                k,
            );
            let product = bounded_traces(TraceSource::Product(&pg), k);
            assert!(!global.is_empty());
            assert_eq!(global, product, "{} at depth {k}", case.name);
        }
        assert!(
            started.elapsed().as_secs_f64() < 5.0,
            "{} took {:?}",
            case.name,
            started.elapsed()
        );
    }
}

#[test]
fn renaming_any_label_makes_the_system_unsafe() {
    for case in corpus() {
        let efsms = case.efsms();
        for (i, m) in efsms.iter().enumerate() {
            for (state, ts) in &m.transitions {
                for (j, t) in ts.iter().enumerate() {
                    let mut mutated = efsms.clone();
                    mutated[i].transitions.get_mut(state).unwrap()[j].label = "Mutated".into();
                    let report = check_safety(&compose(&mutated).unwrap());
                    assert_eq!(
                        report.verdict,
                        Verdict::Unsafe,
                        "{}: renaming {} in {}/{state} went unnoticed",
                        case.name,
                        t.action(),
                        m.role
                    );
                }
            }
        }
    }
}

#[test]
fn runtime_behavior_follows_every_product_trace() {
    for case in corpus() {
        let efsms = case.efsms();
        let pg = compose(&efsms).unwrap();
        let traces = bounded_traces(TraceSource::Product(&pg), 10);
        for m in &efsms {
            let spec = parse_behavior_spec(&emit_runtime_behavior_spec(m)).unwrap();
            for t in &traces {
                spec.follow(t)
                    .unwrap_or_else(|e| panic!("{}/{}: {e}", case.name, m.role));
            }
        }
    }
}

#[test]
fn bundles_are_closed_and_deterministic() {
    for case in corpus() {
        let server = case.server().clone();
        let svr = case.efsm(&server);
        let node = emit_node_api(&svr, &case.module, &case.protocol).unwrap();
        check_closed(&node).unwrap_or_else(|e| panic!("{}/{server}: {e:?}", case.name));
        assert_eq!(
            node,
            emit_node_api(&svr, &case.module, &case.protocol).unwrap()
        );
        assert_eq!(node.table, TransitionTable::from_efsm(&svr));
        assert_eq!(node.manifest.len(), svr.states.len());
        let audit = affinity_audit(&node);
        assert!(audit.passed(), "{}:\n{audit}", case.name);
        for role in case.clients() {
            let m = case.efsm(role);
            let web = emit_browser_api(&m, &case.module, &case.protocol, &server)
                .unwrap_or_else(|e| panic!("{}/{role}: {e}", case.name));
            check_closed(&web).unwrap_or_else(|e| panic!("{}/{role}: {e:?}", case.name));
            assert_eq!(
                web,
                emit_browser_api(&m, &case.module, &case.protocol, &server).unwrap()
            );
            let audit = affinity_audit(&web);
            assert!(audit.passed(), "{}/{role}:\n{audit}", case.name);
            assert_eq!(web.table.len(), m.transition_count());
        }
    }
}

#[test]
fn client_roles_cannot_get_server_code() {
    // With two roles either one is a hub, so only larger protocols apply.
    for case in corpus().into_iter().filter(|c| c.roles.len() > 2) {
        for role in case.clients() {
            assert!(
                emit_node_api(&case.efsm(role), &case.module, &case.protocol).is_err(),
                "{}/{role}",
                case.name
            );
        }
    }
}
