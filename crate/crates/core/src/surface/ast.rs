//! Abstract syntax for agent programs and queries.

use std::collections::BTreeSet;
use std::fmt;

/// Natural numbers used throughout the object language.
pub type Nat = u64;

/// Object-language terms: naturals, variables, successor and addition.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Term {
    Nat(Nat),
    Var(String),
    Succ(Box<Term>),
    Plus(Box<Term>, Box<Term>),
}

impl Term {
    pub fn var(name: impl Into<String>) -> Term {
        Term::Var(name.into())
    }

    pub fn succ(t: Term) -> Term {
        Term::Succ(Box::new(t))
    }

    pub fn plus(l: Term, r: Term) -> Term {
        Term::Plus(Box::new(l), Box::new(r))
    }

    pub fn is_ground(&self) -> bool {
        match self {
            Term::Nat(_) => true,
            Term::Var(_) => false,
            Term::Succ(t) => t.is_ground(),
            Term::Plus(l, r) => l.is_ground() && r.is_ground(),
        }
    }

    /// Variables in left-to-right order of first occurrence.
    pub fn vars_into(&self, out: &mut Vec<String>) {
        match self {
            Term::Nat(_) => {}
            Term::Var(v) => {
                if !out.contains(v) {
                    out.push(v.clone());
                }
            }
            Term::Succ(t) => t.vars_into(out),
            Term::Plus(l, r) => {
                l.vars_into(out);
                r.vars_into(out);
            }
        }
    }

    pub fn mentions(&self, var: &str) -> bool {
        match self {
            Term::Nat(_) => false,
            Term::Var(v) => v == var,
            Term::Succ(t) => t.mentions(var),
            Term::Plus(l, r) => l.mentions(var) || r.mentions(var),
        }
    }
}

impl From<Nat> for Term {
    fn from(n: Nat) -> Self {
        Term::Nat(n)
    }
}

/// A predicate applied to terms, e.g. `fib(x+2,y+z)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Atom {
    pub predicate: String,
    pub args: Vec<Term>,
}

impl Atom {
    pub fn new(predicate: impl Into<String>, args: Vec<Term>) -> Self {
        Atom {
            predicate: predicate.into(),
            args,
        }
    }

    pub fn arity(&self) -> usize {
        self.args.len()
    }

    pub fn is_ground(&self) -> bool {
        self.args.iter().all(Term::is_ground)
    }

    pub fn vars(&self) -> Vec<String> {
        let mut out = Vec::new();
        self.vars_into(&mut out);
        out
    }

    pub fn vars_into(&self, out: &mut Vec<String>) {
        for a in &self.args {
            a.vars_into(out);
        }
    }
}

/// An agent location, `/name` or `/name[t]`.
///
/// Equality here is structural. Two paths denote the same agent when their
/// [`GroundPath`]s agree, see [`AgentPath::ground`].
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct AgentPath {
    pub name: String,
    pub index: Option<Term>,
}

impl AgentPath {
    pub fn new(name: impl Into<String>, index: Option<Term>) -> Self {
        AgentPath {
            name: name.into(),
            index,
        }
    }

    pub fn is_ground(&self) -> bool {
        self.index.as_ref().is_none_or(Term::is_ground)
    }

    /// Evaluates the index, returning `None` when it still mentions variables
    /// or overflows.
    pub fn ground(&self) -> Option<GroundPath> {
        let index = match &self.index {
            None => None,
            Some(t) => Some(crate::terms::eval_ground(t).ok()?),
        };
        Some(GroundPath {
            name: self.name.clone(),
            index,
        })
    }
}

/// A fully evaluated agent location; the key of the registry.
///
/// Ordered by name, then by index with unindexed paths first.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GroundPath {
    pub name: String,
    pub index: Option<Nat>,
}

impl GroundPath {
    pub fn new(name: impl Into<String>, index: Option<Nat>) -> Self {
        GroundPath {
            name: name.into(),
            index,
        }
    }

    pub fn to_path(&self) -> AgentPath {
        AgentPath {
            name: self.name.clone(),
            index: self.index.map(Term::Nat),
        }
    }
}

impl fmt::Display for GroundPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.index {
            Some(i) => write!(f, "/{}[{}]", self.name, i),
            None => write!(f, "/{}", self.name),
        }
    }
}

/// Formulas of the supported fragment.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Formula {
    Atom(Atom),
    /// `a & b & ...`, always at least two parts when built by the parser.
    Conj(Vec<Formula>),
    /// Horn implication; the head is a single atom.
    Impl { body: Box<Formula>, head: Atom },
    /// Blind universal quantifier `cla x,y: F`.
    Blind { vars: Vec<String>, body: Box<Formula> },
    /// Choice universal `ada x: F`; the environment picks `x`.
    ChooseAll { var: String, body: Box<Formula> },
    /// Choice existential `ade x: F`; the machine must produce `x`.
    ChooseEx { var: String, body: Box<Formula> },
    /// `F @ [/a, /b]`: `F` holds relative to the knowledge of the listed agents.
    WithContext { inner: Box<Formula>, ctx: Vec<AgentPath> },
    /// A bare agent path standing for that agent's knowledge.
    MacroRef(AgentPath),
}

impl Formula {
    pub fn atom(a: Atom) -> Formula {
        Formula::Atom(a)
    }

    /// Builds a conjunction, collapsing the single-part case.
    pub fn conj(mut parts: Vec<Formula>) -> Formula {
        if parts.len() == 1 {
            parts.pop().unwrap()
        } else {
            Formula::Conj(parts)
        }
    }

    pub fn implies(body: Formula, head: Atom) -> Formula {
        Formula::Impl {
            body: Box::new(body),
            head,
        }
    }

    pub fn blind(vars: Vec<String>, body: Formula) -> Formula {
        Formula::Blind {
            vars,
            body: Box::new(body),
        }
    }

    pub fn choose_all(var: impl Into<String>, body: Formula) -> Formula {
        Formula::ChooseAll {
            var: var.into(),
            body: Box::new(body),
        }
    }

    pub fn choose_ex(var: impl Into<String>, body: Formula) -> Formula {
        Formula::ChooseEx {
            var: var.into(),
            body: Box::new(body),
        }
    }

    /// Attaches a context, merging with an existing annotation so that
    /// annotations never nest directly. Duplicates keep their first position.
    pub fn with_context(inner: Formula, ctx: Vec<AgentPath>) -> Formula {
        let (inner, mut merged) = match inner {
            Formula::WithContext { inner, ctx } => (*inner, ctx),
            other => (other, Vec::new()),
        };
        for p in ctx {
            if !merged.contains(&p) {
                merged.push(p);
            }
        }
        Formula::WithContext {
            inner: Box::new(inner),
            ctx: merged,
        }
    }

    /// True when a context annotation occurs anywhere in the formula.
    pub fn has_context(&self) -> bool {
        match self {
            Formula::WithContext { .. } => true,
            Formula::Atom(_) | Formula::MacroRef(_) => false,
            Formula::Conj(parts) => parts.iter().any(Formula::has_context),
            Formula::Impl { body, .. } => body.has_context(),
            Formula::Blind { body, .. }
            | Formula::ChooseAll { body, .. }
            | Formula::ChooseEx { body, .. } => body.has_context(),
        }
    }

    /// All atoms in the formula, in textual order.
    pub fn atoms(&self) -> Vec<&Atom> {
        let mut out = Vec::new();
        self.atoms_into(&mut out);
        out
    }

    fn atoms_into<'a>(&'a self, out: &mut Vec<&'a Atom>) {
        match self {
            Formula::Atom(a) => out.push(a),
            Formula::Conj(parts) => parts.iter().for_each(|p| p.atoms_into(out)),
            Formula::Impl { body, head } => {
                body.atoms_into(out);
                out.push(head);
            }
            Formula::Blind { body, .. }
            | Formula::ChooseAll { body, .. }
            | Formula::ChooseEx { body, .. } => body.atoms_into(out),
            Formula::WithContext { inner, .. } => inner.atoms_into(out),
            Formula::MacroRef(_) => {}
        }
    }

    /// Free variables, including those in agent path indices.
    pub fn free_vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.free_vars_into(&mut BTreeSet::new(), &mut out);
        out
    }

    fn free_vars_into(&self, bound: &mut BTreeSet<String>, out: &mut BTreeSet<String>) {
        let term = |t: &Term, bound: &BTreeSet<String>, out: &mut BTreeSet<String>| {
            let mut vs = Vec::new();
            t.vars_into(&mut vs);
            out.extend(vs.into_iter().filter(|v| !bound.contains(v)));
        };
        match self {
            Formula::Atom(a) => a.args.iter().for_each(|t| term(t, bound, out)),
            Formula::Conj(parts) => parts.iter().for_each(|p| p.free_vars_into(bound, out)),
            Formula::Impl { body, head } => {
                body.free_vars_into(bound, out);
                head.args.iter().for_each(|t| term(t, bound, out));
            }
            Formula::Blind { vars, body } => {
                let fresh: Vec<String> = vars.iter().filter(|v| bound.insert((*v).clone())).cloned().collect();
                body.free_vars_into(bound, out);
                fresh.iter().for_each(|v| {
                    bound.remove(v);
                });
            }
            Formula::ChooseAll { var, body } | Formula::ChooseEx { var, body } => {
                let fresh = bound.insert(var.clone());
                body.free_vars_into(bound, out);
                if fresh {
                    bound.remove(var);
                }
            }
            Formula::WithContext { inner, ctx } => {
                inner.free_vars_into(bound, out);
                for p in ctx {
                    if let Some(t) = &p.index {
                        term(t, bound, out);
                    }
                }
            }
            Formula::MacroRef(p) => {
                if let Some(t) = &p.index {
                    term(t, bound, out);
                }
            }
        }
    }

    /// Agent paths named in context annotations, outermost first.
    pub fn context_paths(&self) -> Vec<&AgentPath> {
        let mut out = Vec::new();
        self.context_paths_into(&mut out);
        out
    }

    fn context_paths_into<'a>(&'a self, out: &mut Vec<&'a AgentPath>) {
        match self {
            Formula::WithContext { inner, ctx } => {
                out.extend(ctx.iter());
                inner.context_paths_into(out);
            }
            Formula::Conj(parts) => parts.iter().for_each(|p| p.context_paths_into(out)),
            Formula::Impl { body, .. } => body.context_paths_into(out),
            Formula::Blind { body, .. }
            | Formula::ChooseAll { body, .. }
            | Formula::ChooseEx { body, .. } => body.context_paths_into(out),
            Formula::Atom(_) | Formula::MacroRef(_) => {}
        }
    }
}

/// A named agent bound to its knowledge.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Declaration {
    pub path: AgentPath,
    pub knowledge: Formula,
}

/// A class agent: the infinite family of `template` instances for
/// `var = lower, lower+1, ...`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ClassDecl {
    pub var: String,
    pub lower: Nat,
    pub template: Declaration,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Item {
    Decl(Declaration),
    Class(ClassDecl),
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct Program {
    pub decls: Vec<Item>,
}
