use std::collections::HashSet;
use std::fmt;

use crate::surface::{Atom, GroundPath};
use crate::terms::Binding;

use super::Clause;

/// One step of a derivation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TraceStep {
    /// A forward-chaining rule instance: `premises -> derived`.
    Firing {
        clause: Clause,
        binding: Binding,
        premises: Vec<Atom>,
        derived: Atom,
    },
    /// A backward-chaining step selecting `clause` for `goal`.
    Resolution {
        goal: Atom,
        clause: Clause,
        unifier: Binding,
    },
    /// A stored fact consulted, with the agent it came from.
    FactUse { atom: Atom, source: Option<GroundPath> },
    Materialize(GroundPath),
    MacroExpand(GroundPath),
}

impl TraceStep {
    /// The instantiated implication of a firing, e.g. `fib(1,1) & fib(2,2) -> fib(3,3)`.
    pub fn instantiated(&self) -> Option<String> {
        match self {
            TraceStep::Firing {
                premises, derived, ..
            } => {
                let body: Vec<String> = premises.iter().map(Atom::to_string).collect();
                Some(if body.is_empty() {
                    derived.to_string()
                } else {
                    format!("{} -> {derived}", body.join(" & "))
                })
            }
            _ => None,
        }
    }
}

impl fmt::Display for TraceStep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TraceStep::Firing {
                binding, derived, ..
            } => {
                write!(f, "FIRE {}", self.instantiated().unwrap_or_default())?;
                if !binding.is_empty() {
                    write!(f, " WITH {binding}")?;
                }
                write!(f, " DERIVES {derived}")
            }
            TraceStep::Resolution { goal, clause, .. } => write!(f, "RESOLVE {goal} VIA {clause}"),
            TraceStep::FactUse { atom, source } => match source {
                Some(p) => write!(f, "USE {atom} FROM {p}"),
                None => write!(f, "USE {atom} FROM lemma"),
            },
            TraceStep::Materialize(p) => write!(f, "MATERIALIZE {p}"),
            TraceStep::MacroExpand(p) => write!(f, "MACRO {p}"),
        }
    }
}

/// Ordered record of everything a query did.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ProofTrace {
    pub steps: Vec<TraceStep>,
}

impl ProofTrace {
    pub fn new() -> Self {
        ProofTrace::default()
    }

    pub fn push(&mut self, step: TraceStep) {
        self.steps.push(step);
    }

    pub fn extend(&mut self, other: ProofTrace) {
        self.steps.extend(other.steps);
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn firings(&self) -> impl Iterator<Item = &TraceStep> {
        self.steps
            .iter()
            .filter(|s| matches!(s, TraceStep::Firing { .. }))
    }

    pub fn firing_count(&self) -> usize {
        self.firings().count()
    }

    /// Firings whose rule is stored at an agent named `name`.
    pub fn firings_of(&self, name: &str) -> usize {
        self.steps
            .iter()
            .filter(|s| matches!(s, TraceStep::Firing { clause, .. } if clause.origin.agent_name() == Some(name)))
            .count()
    }

    /// Atoms derived by firings, in order.
    pub fn derived(&self) -> Vec<&Atom> {
        self.steps
            .iter()
            .filter_map(|s| match s {
                TraceStep::Firing { derived, .. } => Some(derived),
                _ => None,
            })
            .collect()
    }

    /// Checks that every firing premise was established earlier in the trace,
    /// either as a used fact or as the result of an earlier firing.
    pub fn check_well_founded(&self) -> Result<(), String> {
        let mut known: HashSet<&Atom> = HashSet::new();
        for (i, step) in self.steps.iter().enumerate() {
            match step {
                TraceStep::FactUse { atom, .. } => {
                    known.insert(atom);
                }
                TraceStep::Firing {
                    premises, derived, ..
                } => {
                    if let Some(missing) = premises.iter().find(|p| !known.contains(p)) {
                        return Err(format!("step {i}: premise {missing} not established earlier"));
                    }
                    known.insert(derived);
                }
                _ => {}
            }
        }
        Ok(())
    }
}

impl fmt::Display for ProofTrace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for s in &self.steps {
            writeln!(f, "{s}")?;
        }
        Ok(())
    }
}
