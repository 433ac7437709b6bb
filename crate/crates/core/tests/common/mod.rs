#![allow(dead_code)]

pub mod gen;

use std::path::{Path, PathBuf};

use scrib_core::efsm::canonicalize;
use scrib_core::{build_efsm, check_well_formed, parse_source, project, Efsm, Module, RoleName};

pub fn fixtures() -> PathBuf {
    // Relative to either crate of the workspace.
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures")
}

/// A protocol under test: the first protocol of the file, whose first role
/// is the server.
pub struct Case {
    pub name: String,
    pub module: Module,
    pub protocol: String,
    pub roles: Vec<RoleName>,
}

impl Case {
    pub fn load(path: &Path) -> Case {
        let text = std::fs::read_to_string(path).unwrap();
        let module = parse_source(&path.display().to_string(), &text)
            .unwrap_or_else(|d| panic!("{}: {d:?}", path.display()));
        let diags = check_well_formed(&module);
        assert!(diags.is_empty(), "{}: {diags:?}", path.display());
        let proto = &module.protocols[0];
        Case {
            name: path.file_stem().unwrap().to_string_lossy().into_owned(),
            protocol: proto.name.as_str().to_owned(),
            roles: proto.roles.iter().map(RoleName::from).collect(),
            module,
        }
    }

    pub fn server(&self) -> &RoleName {
        &self.roles[0]
    }

    pub fn clients(&self) -> &[RoleName] {
        &self.roles[1..]
    }

    pub fn efsm(&self, role: &RoleName) -> Efsm {
        let sys = project(&self.module, &self.protocol, role.as_str())
            .unwrap_or_else(|e| panic!("{}/{role}: {e:?}", self.name));
        build_efsm(&sys).unwrap()
    }

    pub fn efsms(&self) -> Vec<Efsm> {
        self.roles.iter().map(|r| self.efsm(r)).collect()
    }
}

pub fn game() -> Case {
    Case::load(&fixtures().join("game.scr"))
}

/// The game plus every corpus protocol, in a stable order.
pub fn corpus() -> Vec<Case> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(fixtures().join("corpus"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "scr"))
        .collect();
    paths.sort();
    let mut cases = vec![game()];
    cases.extend(paths.iter().map(|p| Case::load(p)));
    cases
}

/// Reads a machine written one transition per line:
///
/// ```text
/// initial A
/// terminal Z
/// A P1?Pos(Point) B
/// B P2!Draw(Point) C
/// ```
///
/// State names are arbitrary; the result is renumbered canonically.
pub fn read_machine(role: &str, text: &str) -> Efsm {
    use scrib_core::efsm::{Direction, StateId, StateKind, Transition};
    use std::collections::BTreeMap;

    let mut ids: BTreeMap<String, StateId> = BTreeMap::new();
    let intern = |s: &str, ids: &mut BTreeMap<String, StateId>| {
        let n = ids.len() as u32;
        *ids.entry(s.to_owned()).or_insert(StateId(n))
    };
    let mut initial = None;
    let mut states = BTreeMap::new();
    let mut transitions: BTreeMap<StateId, Vec<Transition>> = BTreeMap::new();
    for line in text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
    {
        let words: Vec<&str> = line.split_whitespace().collect();
        match words.as_slice() {
            ["initial", s] => initial = Some(intern(s, &mut ids)),
            ["terminal", s] => {
                let id = intern(s, &mut ids);
                states.insert(id, StateKind::Terminal);
                transitions.entry(id).or_default();
            }
            [from, action, to] => {
                let src = intern(from, &mut ids);
                let dst = intern(to, &mut ids);
                let (dir, partner, rest) = match action.split_once('!') {
                    Some((p, r)) => (Direction::Send, p, r),
                    None => {
                        let (p, r) = action.split_once('?').expect("action");
                        (Direction::Receive, p, r)
                    }
                };
                let (label, payloads) =
                    rest.trim_end_matches(')').split_once('(').expect("payload");
                let payloads: Vec<String> = payloads
                    .split(',')
                    .map(str::trim)
                    .filter(|p| !p.is_empty())
                    .map(str::to_owned)
                    .collect();
                let kind = match dir {
                    Direction::Send => StateKind::Send,
                    Direction::Receive => StateKind::Receive {
                        from: RoleName::new(partner),
                    },
                };
                states.insert(src, kind);
                transitions.entry(src).or_default().push(Transition {
                    label: label.to_owned(),
                    payloads,
                    partner: RoleName::new(partner),
                    direction: dir,
                    target: dst,
                });
            }
            _ => panic!("bad machine line `{line}`"),
        }
    }
    let efsm = Efsm {
        role: RoleName::new(role),
        states,
        transitions,
        initial: initial.expect("initial line"),
    };
    efsm.validate().unwrap();
    canonicalize(&efsm)
}
