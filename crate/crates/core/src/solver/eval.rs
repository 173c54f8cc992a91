//! Structural evaluation of queries against the registry.

use std::collections::VecDeque;

use crate::registry::{AgentEntry, Lookup, Origin, Registry, Status, LEMMA_AGENT};
use crate::surface::{AgentPath, Atom, Formula, GroundPath, Nat, Term};
use crate::terms::{apply_atom, apply_subst, eval_term, normalize, normalize_atom, unify, Binding};

use super::{
    backward, forward, Clause, ClauseKind, ClauseOrigin, Fact, Guard, Limits, ProofTrace, SolveError,
    TraceStep,
};

/// Knowledge pooled from a set of agents.
#[derive(Debug, Default)]
pub(crate) struct Store {
    facts: Vec<Fact>,
    buq: Vec<Clause>,
    puq: Vec<Clause>,
    /// Claims that are proved on demand, e.g. `ada n: (ade y: fib(n,y)) @ [/a[n]]`.
    providers: Vec<(Formula, GroundPath)>,
    /// Forward chaining has reached a fixpoint; rerunning it cannot help.
    saturated: bool,
    derived: Vec<Atom>,
}

impl Store {
    fn add_fact(&mut self, atom: Atom, source: Option<GroundPath>) {
        if !self.facts.iter().any(|f| f.atom == atom) {
            self.facts.push(Fact { atom, source });
        }
    }

    /// Sorts the parts of `knowledge` into facts, rules and providers.
    fn absorb(&mut self, knowledge: &Formula, kind: ClauseKind, source: &GroundPath) {
        match knowledge {
            Formula::Conj(parts) => {
                for p in parts {
                    self.absorb(p, kind, source);
                }
            }
            Formula::Atom(a) if a.is_ground() => {
                self.add_fact(normalize_atom(a), Some(source.clone()));
            }
            _ => {
                let origin = ClauseOrigin::Agent(source.clone());
                match Clause::from_formula(knowledge, kind, origin) {
                    Some(c) if kind == ClauseKind::Puq => self.puq.push(c),
                    Some(c) => self.buq.push(c),
                    None => self.providers.push((knowledge.clone(), source.clone())),
                }
            }
        }
    }
}

/// Formulas that need evaluating before their agent can be stored as facts.
fn is_claim(f: &Formula) -> bool {
    match f {
        Formula::WithContext { .. } | Formula::ChooseEx { .. } => true,
        Formula::Conj(parts) => parts.iter().any(is_claim),
        _ => false,
    }
}

fn has_macro(f: &Formula) -> bool {
    match f {
        Formula::MacroRef(_) => true,
        Formula::Atom(_) => false,
        Formula::Conj(parts) => parts.iter().any(has_macro),
        Formula::Impl { body, .. } => has_macro(body),
        Formula::Blind { body, .. }
        | Formula::ChooseAll { body, .. }
        | Formula::ChooseEx { body, .. } => has_macro(body),
        Formula::WithContext { inner, .. } => has_macro(inner),
    }
}

/// Atoms asserted by a claim, in the order [`witnessed`] reports them.
fn claim_atoms(f: &Formula) -> Vec<&Atom> {
    match f {
        Formula::Atom(a) => vec![a],
        Formula::Conj(parts) => parts.iter().flat_map(claim_atoms).collect(),
        Formula::ChooseEx { body, .. } | Formula::ChooseAll { body, .. } => claim_atoms(body),
        Formula::WithContext { inner, .. } => claim_atoms(inner),
        _ => Vec::new(),
    }
}

/// The claim's atoms under a successful evaluation's binding.
fn witnessed(f: &Formula, b: &Binding) -> Vec<Atom> {
    claim_atoms(f)
        .into_iter()
        .map(|a| normalize_atom(&apply_atom(a, b)))
        .collect()
}

/// `ade` variables of a query, outermost first. Provider bodies are not part
/// of the query, so only the query's own quantifiers count.
fn choice_vars(f: &Formula, out: &mut Vec<String>) {
    match f {
        Formula::ChooseEx { var, body } => {
            if !out.contains(var) {
                out.push(var.clone());
            }
            choice_vars(body, out);
        }
        Formula::ChooseAll { body, .. } | Formula::Blind { body, .. } => choice_vars(body, out),
        Formula::WithContext { inner, .. } => choice_vars(inner, out),
        Formula::Conj(parts) => parts.iter().for_each(|p| choice_vars(p, out)),
        Formula::Impl { body, .. } => choice_vars(body, out),
        Formula::Atom(_) | Formula::MacroRef(_) => {}
    }
}

pub(crate) struct Evaluator<'r> {
    reg: &'r mut Registry,
    limits: Limits,
    trace: ProofTrace,
    args: VecDeque<Nat>,
    /// Atoms derived by forward chaining since the innermost materialization began.
    lemma_sink: Vec<Atom>,
    /// Providers currently being evaluated, for cycle detection.
    active: Vec<(GroundPath, Atom)>,
    /// Class instances currently being materialized.
    nesting: usize,
}

impl<'r> Evaluator<'r> {
    pub(crate) fn new(reg: &'r mut Registry, limits: Limits, args: &[Nat]) -> Self {
        Evaluator {
            reg,
            limits,
            trace: ProofTrace::new(),
            args: args.iter().copied().collect(),
            lemma_sink: Vec::new(),
            active: Vec::new(),
            nesting: 0,
        }
    }

    pub(crate) fn into_trace(self) -> ProofTrace {
        self.trace
    }

    pub(crate) fn resolve(&mut self, query: &Formula) -> Result<super::Answer, SolveError> {
        let mut store = self.global_store();
        let result = self.eval(query, &mut store)?;
        for atom in store.derived {
            if !self.reg.global_lemmas.contains(&atom) {
                self.reg.global_lemmas.push(atom);
            }
        }
        let Some(b) = result else {
            return Ok(super::Answer::failure());
        };
        let mut vars = Vec::new();
        choice_vars(query, &mut vars);
        let mut witnesses = Binding::new();
        for v in vars {
            // an unconstrained choice can be answered with anything
            let n = eval_term(&Term::var(v.clone()), &b).unwrap_or(0);
            witnesses.insert(v, Term::Nat(n));
        }
        Ok(super::Answer {
            success: true,
            witnesses,
        })
    }

    /// Facts of every stored agent, rules of explicit agents (blind) and
    /// rules of class templates (expanding).
    fn global_store(&self) -> Store {
        let mut store = Store::default();
        for entry in self.reg.agents.values() {
            if entry.status == Status::Checking {
                continue;
            }
            let explicit = entry.origin == Origin::Explicit;
            let mut facts = Vec::new();
            let mut sorter = Store::default();
            sorter.absorb(&entry.knowledge, ClauseKind::Buq, &entry.path);
            facts.extend(sorter.facts);
            for f in facts {
                store.add_fact(f.atom, f.source);
            }
            for l in &entry.lemmas {
                store.add_fact(l.clone(), Some(entry.path.clone()));
            }
            if explicit {
                store.buq.extend(sorter.buq);
            }
        }
        let lemma_source = GroundPath::new(LEMMA_AGENT, None);
        for l in &self.reg.global_lemmas {
            store.add_fact(l.clone(), Some(lemma_source.clone()));
        }
        for class in &self.reg.classes {
            let origin = ClauseOrigin::Class {
                name: class.decl.template.path.name.clone(),
                pattern: class.id.clone(),
            };
            if let Some(mut c) =
                Clause::from_formula(&class.decl.template.knowledge, ClauseKind::Puq, origin)
            {
                if !c.vars.contains(&class.decl.var) {
                    c.vars.insert(0, class.decl.var.clone());
                }
                c.guards.push(Guard {
                    var: class.decl.var.clone(),
                    lower: class.decl.lower,
                });
                store.puq.push(c);
            }
        }
        store
    }

    fn eval(&mut self, f: &Formula, store: &mut Store) -> Result<Option<Binding>, SolveError> {
        match f {
            Formula::Atom(a) => self.prove(a, store),
            Formula::Conj(parts) => {
                let mut sigma = Binding::new();
                for p in parts {
                    let part = apply_subst(p, &sigma);
                    let Some(b) = self.eval(&part, store)? else {
                        return Ok(None);
                    };
                    for (k, v) in b.iter() {
                        if !sigma.bind(k, v) {
                            return Ok(None);
                        }
                    }
                }
                Ok(Some(sigma))
            }
            Formula::ChooseEx { body, .. } => self.eval(body, store),
            Formula::ChooseAll { var, body } => {
                let n = self
                    .args
                    .pop_front()
                    .ok_or_else(|| SolveError::MissingArgument(var.clone()))?;
                let at = Binding::from_iter([(var.clone(), Term::Nat(n))]);
                self.eval(&apply_subst(body, &at), store)
            }
            Formula::WithContext { inner, ctx } => {
                let mut local = self.pool(ctx)?;
                self.eval(inner, &mut local)
            }
            Formula::MacroRef(p) => {
                let gp = p.ground().ok_or_else(|| SolveError::NonGroundPath(p.clone()))?;
                let expanded = expand_macro(self.reg, p, &mut Vec::new())?;
                self.trace.push(TraceStep::MacroExpand(gp));
                self.eval(&expanded, store)
            }
            Formula::Impl { .. } | Formula::Blind { .. } => Err(SolveError::Unsupported(format!(
                "rule `{f}` as a goal"
            ))),
        }
    }

    /// Facts first, then forward chaining over expanding rules, then
    /// providers, then backward chaining over blind rules.
    fn prove(&mut self, goal: &Atom, store: &mut Store) -> Result<Option<Binding>, SolveError> {
        let goal = normalize_atom(goal);
        for fact in &store.facts {
            if let Some(b) = unify(&goal, &fact.atom) {
                self.trace.push(TraceStep::FactUse {
                    atom: fact.atom.clone(),
                    source: fact.source.clone(),
                });
                return Ok(Some(b));
            }
        }

        if !store.puq.is_empty() && !store.saturated {
            let run = forward::run(
                &mut store.facts,
                &store.puq,
                Some(&goal),
                self.limits.rounds,
                &mut self.trace,
            )?;
            store.saturated = run.quiescent;
            self.lemma_sink.extend(run.derived.iter().cloned());
            store.derived.extend(run.derived);
            if let Some(b) = run.answer {
                return Ok(Some(b));
            }
        }

        for i in 0..store.providers.len() {
            let (formula, source) = store.providers[i].clone();
            if let Some(fact) = self.use_provider(&goal, &formula, &source)? {
                let b = unify(&goal, &fact).expect("provider result unifies with its goal");
                store.add_fact(fact, Some(source));
                return Ok(Some(b));
            }
        }

        if !store.buq.is_empty() {
            let (found, steps) = backward::run(&store.facts, &store.buq, &goal, self.limits.depth)?;
            if found.is_some() {
                self.trace.steps.extend(steps);
                return Ok(found);
            }
        }
        Ok(None)
    }

    /// Answers `goal` from a claim such as `ada n: (ade y: fib(n,y)) @ [/a[n]]`:
    /// the goal fixes the `ada` variables, the instance is evaluated, and the
    /// witnessed atom is returned if it matches the goal.
    fn use_provider(
        &mut self,
        goal: &Atom,
        formula: &Formula,
        source: &GroundPath,
    ) -> Result<Option<Atom>, SolveError> {
        let mut ada = Vec::new();
        let mut body = formula;
        while let Formula::ChooseAll { var, body: inner } = body {
            ada.push(var.clone());
            body = inner;
        }

        // keep goal variables apart from the provider's own
        let renamed: Binding = goal
            .vars()
            .into_iter()
            .map(|v| (v.clone(), Term::var(format!("{v}?"))))
            .collect();
        let probe = apply_atom(goal, &renamed);

        for (i, claimed) in claim_atoms(body).into_iter().enumerate() {
            let Some(sigma) = unify(&probe, claimed) else {
                continue;
            };
            let mut fixed = Binding::new();
            let mut complete = true;
            for v in &ada {
                match sigma.get(v).map(normalize) {
                    Some(t @ Term::Nat(_)) => fixed.insert(v.clone(), t),
                    _ => complete = false,
                }
            }
            if !complete {
                continue;
            }
            let instance = crate::terms::normalize_formula(&apply_subst(body, &fixed));

            let key = (source.clone(), goal.clone());
            if self.active.contains(&key) {
                return Err(SolveError::Cycle(source.clone()));
            }
            if self.active.len() >= self.limits.depth {
                return Err(SolveError::DepthExceeded(self.limits.depth));
            }
            self.active.push(key);
            let saved_args = std::mem::take(&mut self.args);
            let result = self.eval(&instance, &mut Store::default());
            self.args = saved_args;
            self.active.pop();

            let Some(b) = result? else {
                continue;
            };
            let fact = witnessed(&instance, &b).swap_remove(i);
            if fact.is_ground() && unify(goal, &fact).is_some() {
                self.trace.push(TraceStep::FactUse {
                    atom: fact.clone(),
                    source: Some(source.clone()),
                });
                return Ok(Some(fact));
            }
        }
        Ok(None)
    }

    /// Pools the knowledge of the context agents, materializing them first.
    fn pool(&mut self, ctx: &[AgentPath]) -> Result<Store, SolveError> {
        let mut store = Store::default();
        for p in ctx {
            let gp = p
                .ground()
                .ok_or_else(|| SolveError::NonGroundPath(p.clone()))?;
            let entry = self.materialize(&gp)?;
            let kind = match entry.origin {
                Origin::Explicit => ClauseKind::Buq,
                Origin::ClassInstance { .. } => ClauseKind::Puq,
            };
            let knowledge = if has_macro(&entry.knowledge) {
                self.trace.push(TraceStep::MacroExpand(gp.clone()));
                expand_refs(self.reg, &entry.knowledge, &mut vec![gp.clone()])?
            } else {
                entry.knowledge
            };
            store.absorb(&knowledge, kind, &gp);
            for l in entry.lemmas {
                store.add_fact(l, Some(gp.clone()));
            }
        }
        Ok(store)
    }

    pub(crate) fn materialize(&mut self, path: &GroundPath) -> Result<AgentEntry, SolveError> {
        let (class_idx, index) = match self.reg.lookup(path) {
            Lookup::Entry(e) if e.status == Status::Checking => {
                return Err(SolveError::Cycle(path.clone()))
            }
            Lookup::Entry(e) => return Ok(e.clone()),
            Lookup::Absent => return Err(SolveError::AbsentAgent(path.clone())),
            Lookup::Class { class, index } => (class, index),
        };
        if self.nesting >= self.limits.depth {
            return Err(SolveError::DepthExceeded(self.limits.depth));
        }
        let class = &self.reg.classes[class_idx];
        let knowledge = class.instance_knowledge(index);
        let class_id = class.id.clone();

        self.trace.push(TraceStep::Materialize(path.clone()));
        self.reg.agents.insert(
            path.clone(),
            AgentEntry {
                path: path.clone(),
                knowledge: knowledge.clone(),
                status: Status::Checking,
                origin: Origin::ClassInstance {
                    class: class_id,
                    index,
                },
                lemmas: Vec::new(),
            },
        );
        self.reg.classes[class_idx].consumed.insert(index);

        let mut lemmas = Vec::new();
        let mut stored = knowledge.clone();
        if is_claim(&knowledge) {
            let outer_sink = std::mem::take(&mut self.lemma_sink);
            let saved_args = std::mem::take(&mut self.args);
            let mut own = Store::default();
            own.absorb(&knowledge, ClauseKind::Puq, path);
            own.providers.clear();
            self.nesting += 1;
            let result = self.eval(&knowledge, &mut own);
            self.nesting -= 1;
            self.args = saved_args;
            let produced = std::mem::replace(&mut self.lemma_sink, outer_sink);

            let outcome = match result {
                Ok(Some(b)) => {
                    let atoms = witnessed(&knowledge, &b);
                    if atoms.iter().all(Atom::is_ground) {
                        Ok(atoms)
                    } else {
                        Err(SolveError::SolveFailure(path.clone()))
                    }
                }
                Ok(None) => Err(SolveError::SolveFailure(path.clone())),
                Err(e) => Err(e),
            };
            match outcome {
                Ok(atoms) => {
                    for l in produced {
                        if !atoms.contains(&l) && !lemmas.contains(&l) {
                            lemmas.push(l);
                        }
                    }
                    stored = Formula::conj(atoms.into_iter().map(Formula::Atom).collect());
                }
                Err(e) => {
                    self.reg.agents.remove(path);
                    self.reg.classes[class_idx].consumed.remove(&index);
                    return Err(e);
                }
            }
        }

        let entry = self.reg.agents.get_mut(path).expect("inserted above");
        entry.knowledge = stored;
        entry.lemmas = lemmas;
        entry.status = Status::Materialized;
        Ok(entry.clone())
    }
}

pub(crate) fn expand_macro(
    reg: &Registry,
    path: &AgentPath,
    visiting: &mut Vec<GroundPath>,
) -> Result<Formula, SolveError> {
    let gp = path
        .ground()
        .ok_or_else(|| SolveError::NonGroundPath(path.clone()))?;
    if visiting.contains(&gp) {
        return Err(SolveError::Cycle(gp));
    }
    let knowledge = match reg.lookup(&gp) {
        Lookup::Entry(e) => e.knowledge.clone(),
        Lookup::Class { class, index } => reg.classes[class].instance_knowledge(index),
        Lookup::Absent => return Err(SolveError::AbsentAgent(gp)),
    };
    visiting.push(gp);
    let out = expand_refs(reg, &knowledge, visiting);
    visiting.pop();
    out
}

fn expand_refs(
    reg: &Registry,
    f: &Formula,
    visiting: &mut Vec<GroundPath>,
) -> Result<Formula, SolveError> {
    Ok(match f {
        Formula::MacroRef(p) if p.is_ground() => expand_macro(reg, p, visiting)?,
        Formula::MacroRef(_) | Formula::Atom(_) => f.clone(),
        Formula::Conj(parts) => Formula::Conj(
            parts
                .iter()
                .map(|p| expand_refs(reg, p, visiting))
                .collect::<Result<_, _>>()?,
        ),
        Formula::Impl { body, head } => {
            Formula::implies(expand_refs(reg, body, visiting)?, head.clone())
        }
        Formula::Blind { vars, body } => Formula::blind(vars.clone(), expand_refs(reg, body, visiting)?),
        Formula::ChooseAll { var, body } => {
            Formula::choose_all(var.clone(), expand_refs(reg, body, visiting)?)
        }
        Formula::ChooseEx { var, body } => {
            Formula::choose_ex(var.clone(), expand_refs(reg, body, visiting)?)
        }
        Formula::WithContext { inner, ctx } => {
            Formula::with_context(expand_refs(reg, inner, visiting)?, ctx.clone())
        }
    })
}
