//! Semi-naive bottom-up evaluation.
//!
//! Each round matches rule bodies against the atoms known when the round
//! started and only keeps instantiations that use at least one atom derived in
//! the previous round. New heads are appended immediately and are visible
//! from the next round on.

use std::collections::HashSet;

use crate::surface::{Atom, Term};
use crate::terms::{apply_atom, eval_term, normalize, normalize_atom, unify, unify_with, Binding};

use super::{Clause, Fact, ProofTrace, SolveError, TraceStep};

pub(crate) struct ForwardRun {
    pub derived: Vec<Atom>,
    pub answer: Option<Binding>,
    /// True when the last round derived nothing new.
    pub quiescent: bool,
}

pub(crate) fn run(
    known: &mut Vec<Fact>,
    clauses: &[Clause],
    goal: Option<&Atom>,
    max_rounds: usize,
    trace: &mut ProofTrace,
) -> Result<ForwardRun, SolveError> {
    let mut out = ForwardRun {
        derived: Vec::new(),
        answer: None,
        quiescent: false,
    };
    let goal = goal.map(normalize_atom);
    if let Some(g) = &goal {
        for fact in known.iter() {
            if let Some(b) = unify(g, &fact.atom) {
                trace.push(TraceStep::FactUse {
                    atom: fact.atom.clone(),
                    source: fact.source.clone(),
                });
                out.answer = Some(b);
                return Ok(out);
            }
        }
    }

    let initial = known.len();
    let mut present: HashSet<Atom> = known.iter().map(|f| f.atom.clone()).collect();
    let mut announced = vec![false; initial];
    let mut delta_start = 0;

    for _round in 0..max_rounds {
        let round_end = known.len();
        let mut added = false;
        for clause in clauses {
            let mut found = Vec::new();
            match_body(
                &known[..round_end],
                delta_start,
                &clause.body,
                Binding::new(),
                false,
                &mut Vec::new(),
                &mut found,
            );
            for (sigma, premises) in found {
                if !guards_hold(clause, &sigma) {
                    continue;
                }
                let head = normalize_atom(&apply_atom(&clause.head, &sigma));
                if !head.is_ground() {
                    return Err(SolveError::UnsafeClause(clause.to_string()));
                }
                // ground but left unfolded: the value does not fit
                if head.args.iter().any(|t| !matches!(t, Term::Nat(_))) {
                    return Err(crate::terms::TermError::Overflow.into());
                }
                if present.contains(&head) {
                    continue;
                }
                for &i in &premises {
                    if i < initial && !announced[i] {
                        announced[i] = true;
                        trace.push(TraceStep::FactUse {
                            atom: known[i].atom.clone(),
                            source: known[i].source.clone(),
                        });
                    }
                }
                let binding: Binding = clause
                    .vars
                    .iter()
                    .filter_map(|v| {
                        let t = normalize(&sigma.apply_term(&Term::var(v.clone())));
                        t.is_ground().then(|| (v.clone(), t))
                    })
                    .collect();
                trace.push(TraceStep::Firing {
                    clause: clause.clone(),
                    binding,
                    premises: premises.iter().map(|&i| known[i].atom.clone()).collect(),
                    derived: head.clone(),
                });
                present.insert(head.clone());
                known.push(Fact {
                    atom: head.clone(),
                    source: None,
                });
                out.derived.push(head.clone());
                added = true;
                if let Some(g) = &goal {
                    if let Some(b) = unify(g, &head) {
                        out.answer = Some(b);
                        return Ok(out);
                    }
                }
            }
        }
        if !added {
            out.quiescent = true;
            return Ok(out);
        }
        delta_start = round_end;
    }

    if goal.is_some() {
        return Err(SolveError::RoundsExceeded(max_rounds));
    }
    Ok(out)
}

fn match_body(
    known: &[Fact],
    delta_start: usize,
    body: &[Atom],
    sigma: Binding,
    used_new: bool,
    premises: &mut Vec<usize>,
    out: &mut Vec<(Binding, Vec<usize>)>,
) {
    let Some((first, rest)) = body.split_first() else {
        if used_new {
            out.push((sigma, premises.clone()));
        }
        return;
    };
    let pattern = apply_atom(first, &sigma);
    for (i, fact) in known.iter().enumerate() {
        let Some(next) = unify_with(&pattern, &fact.atom, &sigma) else {
            continue;
        };
        premises.push(i);
        match_body(known, delta_start, rest, next, used_new || i >= delta_start, premises, out);
        premises.pop();
    }
}

fn guards_hold(clause: &Clause, sigma: &Binding) -> bool {
    clause.guards.iter().all(|g| {
        eval_term(&Term::var(g.var.clone()), sigma).map_or(true, |v| v >= g.lower)
    })
}
