//! Local (endpoint) types and the merge operator used by projection.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::ast::RoleName;

/// A protocol applied to actual role arguments, e.g. `Game(Svr, P2, P1)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Instance {
    pub protocol: String,
    pub role_args: Vec<RoleName>,
}

impl Instance {
    pub fn new(protocol: impl Into<String>, role_args: impl IntoIterator<Item = RoleName>) -> Self {
        Instance {
            protocol: protocol.into(),
            role_args: role_args.into_iter().collect(),
        }
    }
}

impl fmt::Display for Instance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.protocol)?;
        for (i, r) in self.role_args.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{r}")?;
        }
        f.write_str(")")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SelectArm {
    pub to: RoleName,
    pub label: String,
    pub payloads: Vec<String>,
    pub cont: LocalType,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BranchArm {
    pub label: String,
    pub payloads: Vec<String>,
    pub cont: LocalType,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LocalType {
    /// Internal choice: the role sends one of the arms.
    Select(Vec<SelectArm>),
    /// External choice: the role receives one of the arms from `from`.
    Branch {
        from: RoleName,
        arms: Vec<BranchArm>,
    },
    Var(Instance),
    End,
}

impl LocalType {
    /// Copy with every arm list sorted by label, recursively. Two local
    /// types are equal up to branch reordering iff their normal forms are equal.
    pub fn normalized(&self) -> LocalType {
        match self {
            LocalType::Select(arms) => {
                let mut arms: Vec<SelectArm> = arms
                    .iter()
                    .map(|a| SelectArm {
                        cont: a.cont.normalized(),
                        ..a.clone()
                    })
                    .collect();
                arms.sort_by(|x, y| (&x.label, &x.to).cmp(&(&y.label, &y.to)));
                LocalType::Select(arms)
            }
            LocalType::Branch { from, arms } => {
                let mut arms: Vec<BranchArm> = arms
                    .iter()
                    .map(|a| BranchArm {
                        cont: a.cont.normalized(),
                        ..a.clone()
                    })
                    .collect();
                arms.sort_by(|x, y| x.label.cmp(&y.label));
                LocalType::Branch {
                    from: from.clone(),
                    arms,
                }
            }
            other => other.clone(),
        }
    }

    pub fn equiv(&self, other: &LocalType) -> bool {
        self.normalized() == other.normalized()
    }

    /// Instances referenced by `Var` anywhere in this type.
    pub fn vars(&self) -> BTreeSet<&Instance> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars<'a>(&'a self, out: &mut BTreeSet<&'a Instance>) {
        match self {
            LocalType::Select(arms) => arms.iter().for_each(|a| a.cont.collect_vars(out)),
            LocalType::Branch { arms, .. } => arms.iter().for_each(|a| a.cont.collect_vars(out)),
            LocalType::Var(i) => {
                out.insert(i);
            }
            LocalType::End => {}
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("cannot merge `{left}` with `{right}`")]
pub struct MergeError {
    pub left: LocalType,
    pub right: LocalType,
}

/// Merges the projections of two sibling choice branches.
///
/// Receive branches from the same sender are unioned; arms with the same
/// label must carry the same payloads and have mergeable continuations.
/// Everything else must already be identical (up to arm order).
pub fn merge(a: &LocalType, b: &LocalType) -> Result<LocalType, MergeError> {
    let conflict = || MergeError {
        left: a.clone(),
        right: b.clone(),
    };
    match (a, b) {
        (LocalType::End, LocalType::End) => Ok(LocalType::End),
        (LocalType::Var(x), LocalType::Var(y)) if x == y => Ok(a.clone()),
        (LocalType::Select(_), LocalType::Select(_)) if a.equiv(b) => Ok(a.clone()),
        (
            LocalType::Branch {
                from: from_a,
                arms: arms_a,
            },
            LocalType::Branch {
                from: from_b,
                arms: arms_b,
            },
        ) if from_a == from_b => {
            let mut arms = arms_a.clone();
            for arm in arms_b {
                match arms.iter_mut().find(|x| x.label == arm.label) {
                    Some(existing) => {
                        if existing.payloads != arm.payloads {
                            return Err(conflict());
                        }
                        existing.cont = merge(&existing.cont, &arm.cont)?;
                    }
                    None => arms.push(arm.clone()),
                }
            }
            Ok(LocalType::Branch {
                from: from_a.clone(),
                arms,
            })
        }
        _ => Err(conflict()),
    }
}

/// The projection of one role: recursive definitions keyed by instance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LocalSystem {
    pub role: RoleName,
    pub defs: BTreeMap<Instance, LocalType>,
    pub entry: Instance,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LocalSystemError {
    #[error("`{0}` is referenced but not defined")]
    Undefined(Instance),
    #[error("`{0}` recurses without performing an action")]
    Unguarded(Instance),
}

impl LocalSystem {
    /// Follows `Var` aliases from `instance` to the first non-variable type.
    pub fn resolve<'a>(&'a self, instance: &Instance) -> Result<&'a LocalType, LocalSystemError> {
        let mut seen = BTreeSet::new();
        let mut current = instance;
        loop {
            if !seen.insert(current) {
                return Err(LocalSystemError::Unguarded(instance.clone()));
            }
            match self.defs.get(current) {
                None => return Err(LocalSystemError::Undefined(current.clone())),
                Some(LocalType::Var(next)) => current = next,
                Some(t) => return Ok(t),
            }
        }
    }

    /// Checks closedness (every `Var` is defined) and guardedness.
    pub fn validate(&self) -> Result<(), LocalSystemError> {
        if !self.defs.contains_key(&self.entry) {
            return Err(LocalSystemError::Undefined(self.entry.clone()));
        }
        for t in self.defs.values() {
            for v in t.vars() {
                if !self.defs.contains_key(v) {
                    return Err(LocalSystemError::Undefined(v.clone()));
                }
            }
        }
        for inst in self.defs.keys() {
            self.resolve(inst)?;
        }
        Ok(())
    }
}

impl fmt::Display for LocalSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "// role {}, entry {}", self.role, self.entry)?;
        for (inst, t) in &self.defs {
            writeln!(f, "{inst} = {t}")?;
        }
        Ok(())
    }
}

fn payload_list(payloads: &[String]) -> String {
    payloads.join(", ")
}

impl fmt::Display for LocalType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LocalType::End => f.write_str("end"),
            LocalType::Var(i) => write!(f, "{i}"),
            LocalType::Select(arms) if arms.len() == 1 => {
                let a = &arms[0];
                write!(
                    f,
                    "{}!{}({}).{}",
                    a.to,
                    a.label,
                    payload_list(&a.payloads),
                    a.cont
                )
            }
            LocalType::Select(arms) => {
                f.write_str("+{ ")?;
                for (i, a) in arms.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(
                        f,
                        "{}!{}({}).{}",
                        a.to,
                        a.label,
                        payload_list(&a.payloads),
                        a.cont
                    )?;
                }
                f.write_str(" }")
            }
            LocalType::Branch { from, arms } if arms.len() == 1 => {
                let a = &arms[0];
                write!(
                    f,
                    "{}?{}({}).{}",
                    from,
                    a.label,
                    payload_list(&a.payloads),
                    a.cont
                )
            }
            LocalType::Branch { from, arms } => {
                write!(f, "{from}&{{ ")?;
                for (i, a) in arms.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{}({}).{}", a.label, payload_list(&a.payloads), a.cont)?;
                }
                f.write_str(" }")
            }
        }
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub fn recv(from: &str, arms: Vec<(&str, LocalType)>) -> LocalType {
        LocalType::Branch {
            from: from.into(),
            arms: arms
                .into_iter()
                .map(|(label, cont)| BranchArm {
                    label: label.into(),
                    payloads: vec!["Point".into()],
                    cont,
                })
                .collect(),
        }
    }

    pub fn send(to: &str, arms: Vec<(&str, LocalType)>) -> LocalType {
        LocalType::Select(
            arms.into_iter()
                .map(|(label, cont)| SelectArm {
                    to: to.into(),
                    label: label.into(),
                    payloads: vec!["Point".into()],
                    cont,
                })
                .collect(),
        )
    }

    #[test]
    fn branch_union() {
        let lose = recv("Svr", vec![("Lose", LocalType::End)]);
        let draw = recv("Svr", vec![("Draw", LocalType::End)]);
        let merged = merge(&lose, &draw).unwrap();
        assert_eq!(
            merged,
            recv(
                "Svr",
                vec![("Lose", LocalType::End), ("Draw", LocalType::End)]
            )
        );
    }

    #[test]
    fn end_end() {
        assert_eq!(
            merge(&LocalType::End, &LocalType::End).unwrap(),
            LocalType::End
        );
    }

    #[test]
    fn distinct_senders_conflict() {
        let a = recv("A", vec![("L", LocalType::End)]);
        let b = recv("B", vec![("L", LocalType::End)]);
        let err = merge(&a, &b).unwrap_err();
        assert_eq!(err.left, a);
        assert_eq!(err.right, b);
    }

    #[test]
    fn same_label_divergent_continuations() {
        let a = recv("A", vec![("L", LocalType::End)]);
        let b = recv("A", vec![("L", send("A", vec![("M", LocalType::End)]))]);
        assert!(merge(&a, &b).is_err());
    }

    #[test]
    fn same_label_payload_mismatch() {
        let a = recv("A", vec![("L", LocalType::End)]);
        let mut b = a.clone();
        if let LocalType::Branch { arms, .. } = &mut b {
            arms[0].payloads = vec!["int".into()];
        }
        assert!(merge(&a, &b).is_err());
    }

    #[test]
    fn vars_and_selects() {
        let x = LocalType::Var(Instance::new("G", ["A".into(), "B".into()]));
        let y = LocalType::Var(Instance::new("G", ["B".into(), "A".into()]));
        assert_eq!(merge(&x, &x).unwrap(), x);
        assert!(merge(&x, &y).is_err());
        let s1 = send("B", vec![("X", LocalType::End), ("Y", LocalType::End)]);
        let s2 = send("B", vec![("Y", LocalType::End), ("X", LocalType::End)]);
        assert!(merge(&s1, &s2).is_ok());
        let s3 = send("B", vec![("X", LocalType::End)]);
        assert!(merge(&s1, &s3).is_err());
        assert!(merge(&s1, &LocalType::End).is_err());
    }

    #[test]
    fn unguarded_alias_cycle_detected() {
        let a = Instance::new("P", ["A".into()]);
        let b = Instance::new("Q", ["A".into()]);
        let mut defs = BTreeMap::new();
        defs.insert(a.clone(), LocalType::Var(b.clone()));
        defs.insert(b.clone(), LocalType::Var(a.clone()));
        let sys = LocalSystem {
            role: "A".into(),
            defs,
            entry: a,
        };
        assert!(matches!(
            sys.validate(),
            Err(LocalSystemError::Unguarded(_))
        ));
    }

    #[test]
    fn display_forms() {
        let t = send(
            "Svr",
            vec![(
                "Pos",
                recv(
                    "Svr",
                    vec![("Win", LocalType::End), ("Draw", LocalType::End)],
                ),
            )],
        );
        assert_eq!(
            t.to_string(),
            "Svr!Pos(Point).Svr&{ Win(Point).end, Draw(Point).end }"
        );
    }
}
