//! Depth-first SLD resolution with chronological backtracking.
//!
//! The resolvent is an explicit goal stack and backtracking goes through an
//! explicit stack of choice points, so proof size is not bounded by the
//! native stack. A choice point is only kept while some later fact or
//! clause could still match its goal, which keeps deterministic proofs
//! (like the Fibonacci rule) free of copies of the binding.

use crate::surface::{Atom, Nat, Term};
use crate::terms::{
    apply_atom, eval_ground, match_index, normalize, normalize_atom, unify, unify_terms, Binding,
    TermError,
};

use super::{Clause, Fact, SolveError, TraceStep};

#[derive(Debug, Clone)]
enum Goal {
    Atom(Atom, usize),
    /// Deferred arithmetic check: the term must evaluate to the value once
    /// the clause body has bound its variables.
    Equals(Term, Nat),
}

/// A goal with untried alternatives and the state to restore before trying them.
struct Choice {
    goal: Atom,
    depth: usize,
    /// Remaining goals after `goal`, top of stack last.
    rest: Vec<Goal>,
    sigma: Binding,
    next: usize,
    mark: usize,
}

struct Sld<'a> {
    facts: &'a [Fact],
    clauses: &'a [Clause],
    renames: usize,
    steps: Vec<TraceStep>,
}

/// Solves `goal`, returning the final binding of the first proof and the
/// steps along it.
pub(crate) fn run(
    facts: &[Fact],
    clauses: &[Clause],
    goal: &Atom,
    limit: usize,
) -> Result<(Option<Binding>, Vec<TraceStep>), SolveError> {
    let mut sld = Sld {
        facts,
        clauses,
        renames: 0,
        steps: Vec::new(),
    };
    let found = sld.solve(goal, limit)?;
    if found.is_none() {
        sld.steps.clear();
    }
    Ok((found, sld.steps))
}

/// One matching alternative for a goal. `local` mentions only the goal's
/// variables and fresh clause variables, so it composes onto the current
/// binding without touching the rest of it.
struct Step {
    local: Binding,
    pushed: Vec<Goal>,
    trace: TraceStep,
}

impl Sld<'_> {
    fn alternatives(&self) -> usize {
        self.facts.len() + self.clauses.len()
    }

    fn solve(&mut self, goal: &Atom, limit: usize) -> Result<Option<Binding>, SolveError> {
        let mut goals = vec![Goal::Atom(goal.clone(), 1)];
        let mut sigma = Binding::new();
        let mut choices: Vec<Choice> = Vec::new();

        loop {
            let ok = match goals.pop() {
                None => return Ok(Some(sigma)),
                Some(Goal::Equals(t, n)) => match eval_ground(&normalize(&sigma.apply_term(&t))) {
                    Ok(v) => v == n,
                    Err(TermError::UnboundVariable(_)) => false,
                    Err(e) => return Err(e.into()),
                },
                Some(Goal::Atom(g, depth)) => {
                    if depth > limit {
                        return Err(SolveError::DepthExceeded(limit));
                    }
                    let g = normalize_atom(&apply_atom(&g, &sigma));
                    let mark = self.steps.len();
                    let mut next = 0;
                    match self.find(&g, depth, &mut next) {
                        Some(step) => {
                            if next < self.alternatives() {
                                choices.push(Choice {
                                    goal: g,
                                    depth,
                                    rest: goals.clone(),
                                    sigma: sigma.clone(),
                                    next,
                                    mark,
                                });
                            }
                            self.apply(step, &mut sigma, &mut goals)
                        }
                        None => false,
                    }
                }
            };
            if ok {
                continue;
            }
            // backtrack to the most recent goal with untried alternatives
            loop {
                let Some(mut choice) = choices.pop() else {
                    return Ok(None);
                };
                self.steps.truncate(choice.mark);
                let Some(step) = self.find(&choice.goal, choice.depth, &mut choice.next) else {
                    continue;
                };
                sigma = choice.sigma.clone();
                goals = choice.rest.clone();
                if choice.next < self.alternatives() {
                    choices.push(choice);
                }
                if self.apply(step, &mut sigma, &mut goals) {
                    break;
                }
            }
        }
    }

    fn apply(&mut self, step: Step, sigma: &mut Binding, goals: &mut Vec<Goal>) -> bool {
        for (v, t) in step.local.iter() {
            if !sigma.bind(v, t) {
                return false;
            }
        }
        self.steps.push(step.trace);
        goals.extend(step.pushed.into_iter().rev());
        true
    }

    /// Returns the first alternative at or after `*next` that matches `goal`,
    /// and leaves `*next` at the following matching alternative (or the end)
    /// so exhausted choice points are dropped right away.
    fn find(&mut self, goal: &Atom, depth: usize, next: &mut usize) -> Option<Step> {
        let mut found = None;
        while *next < self.alternatives() {
            let i = *next;
            if found.is_some() {
                let saved = self.renames;
                let matches = self.try_alt(goal, depth, i).is_some();
                self.renames = saved;
                if matches {
                    break;
                }
            } else {
                found = self.try_alt(goal, depth, i);
            }
            *next += 1;
        }
        found
    }

    fn try_alt(&mut self, goal: &Atom, depth: usize, i: usize) -> Option<Step> {
        if let Some(fact) = self.facts.get(i) {
            let local = unify(goal, &fact.atom)?;
            return Some(Step {
                local,
                pushed: Vec::new(),
                trace: TraceStep::FactUse {
                    atom: fact.atom.clone(),
                    source: fact.source.clone(),
                },
            });
        }
        let clause = &self.clauses[i - self.facts.len()];
        let (head, body) = self.rename(clause);
        let (local, checks) = resolve_head(goal, &head)?;
        let mut pushed: Vec<Goal> = body.into_iter().map(|a| Goal::Atom(a, depth + 1)).collect();
        pushed.extend(checks);
        Some(Step {
            trace: TraceStep::Resolution {
                goal: goal.clone(),
                clause: clause.clone(),
                unifier: local.restrict(&goal.vars()),
            },
            local,
            pushed,
        })
    }

    fn rename(&mut self, clause: &Clause) -> (Atom, Vec<Atom>) {
        self.renames += 1;
        let suffix = self.renames;
        let fresh: Binding = clause
            .vars
            .iter()
            .map(|v| (v.clone(), Term::var(format!("{v}#{suffix}"))))
            .collect();
        let head = apply_atom(&clause.head, &fresh);
        let body = clause.body.iter().map(|a| apply_atom(a, &fresh)).collect();
        (head, body)
    }
}

/// Unifies a goal with a renamed clause head. Ground goal arguments facing
/// head arguments that cannot be inverted (such as `y+z`) become deferred
/// checks instead of failing outright.
fn resolve_head(goal: &Atom, head: &Atom) -> Option<(Binding, Vec<Goal>)> {
    if goal.predicate != head.predicate || goal.args.len() != head.args.len() {
        return None;
    }
    let mut s = Binding::new();
    let mut checks = Vec::new();
    for (g, h) in goal.args.iter().zip(&head.args) {
        let g = normalize(&s.apply_term(g));
        let h = normalize(&s.apply_term(h));
        if let (Term::Nat(n), false) = (&g, h.is_ground()) {
            if matches!(match_index(&h, *n), Err(TermError::UnsupportedPattern(_))) {
                checks.push(Goal::Equals(h, *n));
                continue;
            }
        }
        if !unify_terms(&g, &h, &mut s) {
            return None;
        }
    }
    Some((s, checks))
}
