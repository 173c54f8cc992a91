//! Query evaluation.
//!
//! Blind (`cla`) rules are used by backward chaining and never change the
//! store. Rules that come from class agents are used by semi-naive forward
//! chaining, and every atom they derive is kept as a lemma. Annotated
//! formulas are evaluated against the pooled knowledge of their context
//! agents, which are materialized on demand.

mod backward;
mod eval;
mod forward;
mod trace;

use std::fmt;

use thiserror::Error;

use crate::registry::Registry;
use crate::surface::{AgentPath, Atom, Formula, GroundPath, Nat};
use crate::terms::{Binding, TermError};

pub use trace::{ProofTrace, TraceStep};

pub(crate) use eval::Evaluator;

/// Resource limits for a single query.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Limits {
    /// Maximum backward-chaining resolution depth.
    pub depth: usize,
    /// Maximum forward-chaining rounds per saturation.
    pub rounds: usize,
}

impl Default for Limits {
    fn default() -> Self {
        Limits {
            depth: 512,
            rounds: 10_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SolveError {
    #[error("agent {0} is not declared")]
    AbsentAgent(GroundPath),
    #[error("cyclic dependency through agent {0}")]
    Cycle(GroundPath),
    #[error("no argument supplied for `ada {0}`")]
    MissingArgument(String),
    #[error("resolution depth limit {0} exceeded")]
    DepthExceeded(usize),
    #[error("forward chaining stopped after {0} rounds without proving the goal")]
    RoundsExceeded(usize),
    #[error("knowledge of agent {0} is not derivable from its context")]
    SolveFailure(GroundPath),
    #[error("agent path {0} does not evaluate to a ground location")]
    NonGroundPath(AgentPath),
    #[error("rule `{0}` derived a non-ground head")]
    UnsafeClause(String),
    #[error("cannot evaluate {0}")]
    Unsupported(String),
    #[error(transparent)]
    Term(#[from] TermError),
}

impl SolveError {
    /// Errors caused by resource limits rather than by the program itself.
    pub fn is_limit(&self) -> bool {
        matches!(
            self,
            SolveError::DepthExceeded(_)
                | SolveError::RoundsExceeded(_)
                | SolveError::Term(TermError::Overflow)
        )
    }
}

/// Result of a query: whether it succeeded and the values chosen for its
/// `ade` variables, outermost first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Answer {
    pub success: bool,
    pub witnesses: Binding,
}

impl Answer {
    pub fn failure() -> Self {
        Answer {
            success: false,
            witnesses: Binding::new(),
        }
    }

    /// The witness for `var` as a natural, if bound.
    pub fn witness(&self, var: &str) -> Option<Nat> {
        match self.witnesses.get(var) {
            Some(crate::surface::Term::Nat(n)) => Some(*n),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ClauseKind {
    /// Blind universal rule, used by backward chaining only.
    Buq,
    /// Class-agent rule, expanded by forward chaining.
    Puq,
}

/// Where a rule was declared.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum ClauseOrigin {
    Agent(GroundPath),
    Class { name: String, pattern: String },
    Inline,
}

impl ClauseOrigin {
    pub fn agent_name(&self) -> Option<&str> {
        match self {
            ClauseOrigin::Agent(p) => Some(&p.name),
            ClauseOrigin::Class { name, .. } => Some(name),
            ClauseOrigin::Inline => None,
        }
    }
}

/// Lower bound on a class variable carried by rules lifted from class templates.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Guard {
    pub var: String,
    pub lower: Nat,
}

/// A Horn rule `body -> head` universally quantified over `vars`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Clause {
    pub kind: ClauseKind,
    pub vars: Vec<String>,
    pub body: Vec<Atom>,
    pub head: Atom,
    pub origin: ClauseOrigin,
    pub guards: Vec<Guard>,
}

impl Clause {
    /// Reads a rule out of a formula of shape `cla vs: a & b -> h`, `a -> h`
    /// or `cla vs: h`. Returns `None` for anything else.
    pub fn from_formula(f: &Formula, kind: ClauseKind, origin: ClauseOrigin) -> Option<Clause> {
        let mut vars: Vec<String> = Vec::new();
        let mut f = f;
        while let Formula::Blind { vars: vs, body } = f {
            for v in vs {
                if !vars.contains(v) {
                    vars.push(v.clone());
                }
            }
            f = body;
        }
        let (body, head) = match f {
            Formula::Impl { body, head } => {
                let atoms = match &**body {
                    Formula::Atom(a) => vec![a.clone()],
                    Formula::Conj(parts) => parts
                        .iter()
                        .map(|p| match p {
                            Formula::Atom(a) => Some(a.clone()),
                            _ => None,
                        })
                        .collect::<Option<Vec<_>>>()?,
                    _ => return None,
                };
                (atoms, head.clone())
            }
            Formula::Atom(a) if !vars.is_empty() => (Vec::new(), a.clone()),
            _ => return None,
        };
        let mut free = Vec::new();
        body.iter().for_each(|a| a.vars_into(&mut free));
        head.vars_into(&mut free);
        for v in free {
            if !vars.contains(&v) {
                vars.push(v);
            }
        }
        Some(Clause {
            kind,
            vars,
            body,
            head,
            origin,
            guards: Vec::new(),
        })
    }

    pub fn to_formula(&self) -> Formula {
        let core = if self.body.is_empty() {
            Formula::Atom(self.head.clone())
        } else {
            Formula::implies(
                Formula::conj(self.body.iter().cloned().map(Formula::Atom).collect()),
                self.head.clone(),
            )
        };
        if self.vars.is_empty() {
            core
        } else {
            Formula::blind(self.vars.clone(), core)
        }
    }
}

impl fmt::Display for Clause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_formula())
    }
}

/// A stored fact together with the agent it was read from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct Fact {
    pub atom: Atom,
    pub source: Option<GroundPath>,
}

/// Backward chaining (SLD resolution) against a fixed store: facts first,
/// then rules, both in order, first answer wins. The store is not modified.
pub fn solve_buq(
    goal: &Atom,
    facts: &[Atom],
    clauses: &[Clause],
    depth_limit: usize,
) -> Result<(Answer, ProofTrace), SolveError> {
    let facts: Vec<Fact> = facts
        .iter()
        .map(|a| Fact {
            atom: crate::terms::normalize_atom(a),
            source: None,
        })
        .collect();
    let (found, steps) = backward::run(&facts, clauses, goal, depth_limit)?;
    let trace = ProofTrace { steps };
    Ok((answer_for(goal, found)?, trace))
}

/// Output of [`chain_forward`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ForwardOutcome {
    /// Newly derived atoms in derivation order.
    pub derived: Vec<Atom>,
    pub answer: Answer,
    pub trace: ProofTrace,
}

/// Semi-naive forward chaining. Stops as soon as `goal` unifies with a known
/// atom, when a round adds nothing, or after `max_rounds` rounds.
pub fn chain_forward(
    facts: &[Atom],
    clauses: &[Clause],
    goal: Option<&Atom>,
    max_rounds: usize,
) -> Result<ForwardOutcome, SolveError> {
    let mut known: Vec<Fact> = facts
        .iter()
        .map(|a| Fact {
            atom: crate::terms::normalize_atom(a),
            source: None,
        })
        .collect();
    let mut trace = ProofTrace::new();
    let run = forward::run(&mut known, clauses, goal, max_rounds, &mut trace)?;
    let answer = match goal {
        Some(g) => answer_for(g, run.answer)?,
        None => Answer {
            success: true,
            witnesses: Binding::new(),
        },
    };
    Ok(ForwardOutcome {
        derived: run.derived,
        answer,
        trace,
    })
}

fn answer_for(goal: &Atom, found: Option<Binding>) -> Result<Answer, SolveError> {
    let Some(b) = found else {
        return Ok(Answer::failure());
    };
    let mut witnesses = Binding::new();
    for v in goal.vars() {
        let n = crate::terms::eval_term(&crate::surface::Term::Var(v.clone()), &b)?;
        witnesses.insert(v, crate::surface::Term::Nat(n));
    }
    Ok(Answer {
        success: true,
        witnesses,
    })
}

/// Evaluates a query against the registry. `ada` variables take their values
/// from `args`, outermost first. Materializations and lemmas are kept.
pub fn resolve_query(
    registry: &mut Registry,
    query: &Formula,
    args: &[Nat],
    limits: Limits,
) -> Result<(Answer, ProofTrace), SolveError> {
    let mut ev = Evaluator::new(registry, limits, args);
    let answer = ev.resolve(query)?;
    Ok((answer, ev.into_trace()))
}

/// Replaces an agent reference by its knowledge, recursively expanding
/// nested references. Class instances are instantiated but not evaluated.
pub fn expand_macro(registry: &Registry, path: &AgentPath) -> Result<Formula, SolveError> {
    eval::expand_macro(registry, path, &mut Vec::new())
}

#[cfg(test)]
mod tests;
