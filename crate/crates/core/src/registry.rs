//! The live knowledgebase of agents.
//!
//! Plain declarations are stored as they are. Class agents keep their
//! template plus the set of class-variable values already used up, either
//! because an explicit declaration shadows the instance or because the
//! instance was materialized. Materialized instances stay in the registry,
//! so each one is computed at most once.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use thiserror::Error;

use crate::solver::{Limits, ProofTrace, SolveError};
use crate::surface::{Atom, ClassDecl, Formula, GroundPath, Item, Nat, Program, Term};
use crate::terms::{apply_subst, eval_term, match_index, normalize_formula, Binding};

/// Name of the pseudo-agent that holds lemmas derived outside any context.
pub const LEMMA_AGENT: &str = "lemmas";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RegistryError {
    #[error("agent {0} is declared more than once")]
    DuplicateAgent(GroundPath),
    #[error("declared agent path {0} is not ground")]
    NonGroundPath(String),
    #[error("class {class} mentions free variable `{var}` other than its class variable")]
    FreeVariable { class: String, var: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Declared,
    Materialized,
    /// Only while the entry's own knowledge is being evaluated.
    Checking,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Origin {
    Explicit,
    ClassInstance { class: String, index: Nat },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AgentEntry {
    pub path: GroundPath,
    pub knowledge: Formula,
    pub status: Status,
    pub origin: Origin,
    /// Ground atoms derived while materializing this agent, besides its knowledge.
    pub lemmas: Vec<Atom>,
}

impl AgentEntry {
    /// Knowledge and lemmas combined, as printed in snapshots.
    pub fn full_knowledge(&self) -> Formula {
        if self.lemmas.is_empty() {
            return self.knowledge.clone();
        }
        let mut parts = match &self.knowledge {
            Formula::Conj(parts) => parts.clone(),
            other => vec![other.clone()],
        };
        parts.extend(self.lemmas.iter().cloned().map(Formula::Atom));
        Formula::conj(parts)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassEntry {
    pub id: String,
    pub decl: ClassDecl,
    pub consumed: BTreeSet<Nat>,
}

impl ClassEntry {
    /// Smallest class-variable value at or above the lower bound not yet used.
    pub fn residual_lower(&self) -> Nat {
        let mut n = self.decl.lower;
        while self.consumed.contains(&n) {
            n += 1;
        }
        n
    }

    /// Class-variable value whose instance lives at `path`, if any.
    pub fn instance_index(&self, path: &GroundPath) -> Option<Nat> {
        let template = &self.decl.template.path;
        if template.name != path.name {
            return None;
        }
        let (Some(pattern), Some(n)) = (&template.index, path.index) else {
            return None;
        };
        let b = match_index(pattern, n).ok()??;
        match b.get(&self.decl.var) {
            Some(Term::Nat(v)) => Some(*v),
            _ => None,
        }
    }

    /// Location of the instance for class-variable value `index`.
    pub fn instance_path(&self, index: Nat) -> Option<GroundPath> {
        let template = &self.decl.template.path;
        let at = Binding::from_iter([(self.decl.var.clone(), Term::Nat(index))]);
        let idx = match &template.index {
            Some(t) => Some(eval_term(t, &at).ok()?),
            None => None,
        };
        Some(GroundPath::new(template.name.clone(), idx))
    }

    /// The template's knowledge with the class variable fixed to `index`.
    pub fn instance_knowledge(&self, index: Nat) -> Formula {
        let at = Binding::from_iter([(self.decl.var.clone(), Term::Nat(index))]);
        normalize_formula(&apply_subst(&self.decl.template.knowledge, &at))
    }
}

/// Result of looking up a ground path.
#[derive(Debug, Clone, PartialEq)]
pub enum Lookup<'a> {
    Entry(&'a AgentEntry),
    /// No stored agent, but the instance `index` of class `class` lives there.
    Class { class: usize, index: Nat },
    Absent,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Registry {
    pub(crate) agents: BTreeMap<GroundPath, AgentEntry>,
    pub(crate) classes: Vec<ClassEntry>,
    pub(crate) global_lemmas: Vec<Atom>,
}

impl Registry {
    pub fn new() -> Self {
        Registry::default()
    }

    pub fn load(program: &Program) -> Result<Self, RegistryError> {
        let mut reg = Registry::new();
        for item in &program.decls {
            match item {
                Item::Decl(d) => {
                    let path = d
                        .path
                        .ground()
                        .ok_or_else(|| RegistryError::NonGroundPath(d.path.to_string()))?;
                    if reg.agents.contains_key(&path) {
                        return Err(RegistryError::DuplicateAgent(path));
                    }
                    reg.agents.insert(
                        path.clone(),
                        AgentEntry {
                            path,
                            knowledge: d.knowledge.clone(),
                            status: Status::Declared,
                            origin: Origin::Explicit,
                            lemmas: Vec::new(),
                        },
                    );
                }
                Item::Class(c) => {
                    let id = reg.fresh_class_id(&c.template.path.to_string());
                    let mut free = c.template.knowledge.free_vars();
                    if let Some(t) = &c.template.path.index {
                        let mut vs = Vec::new();
                        t.vars_into(&mut vs);
                        free.extend(vs);
                    }
                    if let Some(var) = free.into_iter().find(|v| *v != c.var) {
                        return Err(RegistryError::FreeVariable { class: id, var });
                    }
                    reg.classes.push(ClassEntry {
                        id,
                        decl: c.clone(),
                        consumed: BTreeSet::new(),
                    });
                }
            }
        }
        // explicit declarations shadow the class instances at the same location
        for path in reg.agents.keys() {
            for class in &mut reg.classes {
                if let Some(i) = class.instance_index(path) {
                    class.consumed.insert(i);
                }
            }
        }
        Ok(reg)
    }

    fn fresh_class_id(&self, base: &str) -> String {
        let taken = |id: &str| self.classes.iter().any(|c| c.id == id);
        if !taken(base) {
            return base.to_string();
        }
        (2..).map(|i| format!("{base}#{i}")).find(|id| !taken(id)).unwrap()
    }

    pub fn agents(&self) -> impl Iterator<Item = &AgentEntry> {
        self.agents.values()
    }

    pub fn entry(&self, path: &GroundPath) -> Option<&AgentEntry> {
        self.agents.get(path)
    }

    pub fn classes(&self) -> &[ClassEntry] {
        &self.classes
    }

    pub fn class(&self, id: &str) -> Option<&ClassEntry> {
        self.classes.iter().find(|c| c.id == id)
    }

    /// Atoms derived by forward chaining outside any agent context.
    pub fn global_lemmas(&self) -> &[Atom] {
        &self.global_lemmas
    }

    /// Stored entries win; otherwise the first class (in declaration order)
    /// whose template location matches.
    pub fn lookup(&self, path: &GroundPath) -> Lookup<'_> {
        if let Some(e) = self.agents.get(path) {
            return Lookup::Entry(e);
        }
        for (i, class) in self.classes.iter().enumerate() {
            if let Some(index) = class.instance_index(path) {
                if index >= class.decl.lower {
                    return Lookup::Class { class: i, index };
                }
            }
        }
        Lookup::Absent
    }

    /// Ensures the agent at `path` is stored, instantiating and evaluating a
    /// class instance if needed. Already stored agents are returned unchanged
    /// with an empty trace.
    pub fn materialize(
        &mut self,
        path: &GroundPath,
        limits: Limits,
    ) -> Result<(AgentEntry, ProofTrace), SolveError> {
        let mut ev = crate::solver::Evaluator::new(self, limits, &[]);
        let entry = ev.materialize(path)?;
        Ok((entry, ev.into_trace()))
    }

    /// Residual lower bound of the class with the given id.
    pub fn residual_lower(&self, class_id: &str) -> Option<Nat> {
        self.class(class_id).map(ClassEntry::residual_lower)
    }

    /// Deterministic dump in program syntax: agents in path order, then
    /// classes in declaration order starting from their residual.
    pub fn snapshot(&self) -> String {
        let mut agents: BTreeMap<GroundPath, Formula> = self
            .agents
            .values()
            .filter(|e| e.status != Status::Checking)
            .map(|e| (e.path.clone(), e.full_knowledge()))
            .collect();
        if !self.global_lemmas.is_empty() {
            let key = GroundPath::new(LEMMA_AGENT, None);
            let mut parts = match agents.remove(&key) {
                Some(Formula::Conj(parts)) => parts,
                Some(other) => vec![other],
                None => Vec::new(),
            };
            parts.extend(self.global_lemmas.iter().cloned().map(Formula::Atom));
            agents.insert(key, Formula::conj(parts));
        }

        let mut out = String::new();
        for (path, knowledge) in &agents {
            out.push_str(&format!("agent {path} = {knowledge}.\n"));
        }
        for class in &self.classes {
            let residual = class.residual_lower();
            let gaps: Vec<String> = class
                .consumed
                .range(residual + 1..)
                .map(Nat::to_string)
                .collect();
            if !gaps.is_empty() {
                out.push_str(&format!(
                    "# {} also consumed: {} = {}\n",
                    class.id,
                    class.decl.var,
                    gaps.join(", ")
                ));
            }
            let shown = ClassDecl {
                lower: residual,
                ..class.decl.clone()
            };
            out.push_str(&format!("{shown}\n"));
        }
        out
    }

    /// Freezes the registry into a shareable read-only value.
    pub fn freeze(self) -> FrozenRegistry {
        FrozenRegistry(Arc::new(self))
    }
}

/// An immutable registry that can be shared across threads. Queries run on
/// a private copy obtained with [`FrozenRegistry::thaw`].
#[derive(Debug, Clone)]
pub struct FrozenRegistry(Arc<Registry>);

impl FrozenRegistry {
    pub fn thaw(&self) -> Registry {
        (*self.0).clone()
    }
}

impl std::ops::Deref for FrozenRegistry {
    type Target = Registry;

    fn deref(&self) -> &Registry {
        &self.0
    }
}
