//! Validity checking: every context-annotated claim must be derivable from
//! the agents it names.
//!
//! Checking works on a private copy of the registry. Contexts are checked
//! before the claims that rely on them, and each agent is checked once.
//! Class agents are infinite conjunctions, so only a prefix of their
//! remaining instances is checked.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::registry::{Lookup, Registry};
use crate::solver::{Evaluator, Limits, ProofTrace, SolveError};
use crate::surface::{Formula, GroundPath, Term};
use crate::terms::{apply_subst, Binding};

/// How far to look for `ada` values whose context agents exist.
const ADA_SCAN: u64 = 1024;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    Valid { trace: ProofTrace, witnesses: Binding },
    Invalid(String),
    Skipped(String),
}

impl Verdict {
    pub fn is_invalid(&self) -> bool {
        matches!(self, Verdict::Invalid(_))
    }

    fn label(&self) -> &'static str {
        match self {
            Verdict::Valid { .. } => "VALID",
            Verdict::Invalid(_) => "INVALID",
            Verdict::Skipped(_) => "SKIPPED",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CheckEntry {
    pub path: GroundPath,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CheckReport {
    pub entries: Vec<CheckEntry>,
    /// True iff no entry is invalid.
    pub overall: bool,
    /// Number of instances checked per class.
    pub class_sample: usize,
}

impl CheckReport {
    pub fn invalid(&self) -> impl Iterator<Item = &CheckEntry> {
        self.entries.iter().filter(|e| e.verdict.is_invalid())
    }

    /// One line per entry, then a summary line.
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            let detail = match &e.verdict {
                Verdict::Valid { trace, .. } => format!("{} steps", trace.len()),
                Verdict::Invalid(r) | Verdict::Skipped(r) => r.clone(),
            };
            let _ = writeln!(out, "{}: {} — {}", e.path, e.verdict.label(), detail);
        }
        let _ = writeln!(
            out,
            "{} (class agents checked on their first {} remaining instances)",
            if self.overall { "valid" } else { "invalid" },
            self.class_sample
        );
        out
    }

    /// Line-oriented `key=value` records.
    pub fn render_records(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            let _ = write!(
                out,
                "path={} verdict={}",
                e.path,
                e.verdict.label().to_lowercase()
            );
            match &e.verdict {
                Verdict::Valid { trace, witnesses } => {
                    let _ = write!(out, " steps={}", trace.len());
                    for (k, v) in witnesses.iter() {
                        let _ = write!(out, " witness.{k}={v}");
                    }
                }
                Verdict::Invalid(r) | Verdict::Skipped(r) => {
                    let _ = write!(out, " reason={r:?}");
                }
            }
            out.push('\n');
        }
        let _ = writeln!(
            out,
            "overall={} class_sample={}",
            self.overall, self.class_sample
        );
        out
    }
}

const CYCLE: &str = "cyclic dependency";

struct Checker<'a> {
    original: &'a Registry,
    work: Registry,
    limits: Limits,
    class_sample: usize,
    done: BTreeMap<GroundPath, Verdict>,
    in_progress: Vec<GroundPath>,
}

impl Checker<'_> {
    fn check(&mut self, path: &GroundPath) -> Verdict {
        if let Some(v) = self.done.get(path) {
            return v.clone();
        }
        if self.in_progress.contains(path) {
            return Verdict::Invalid(CYCLE.into());
        }
        let knowledge = match self.original.lookup(path) {
            Lookup::Entry(e) => e.knowledge.clone(),
            Lookup::Class { class, index } => self.original.classes()[class].instance_knowledge(index),
            Lookup::Absent => return Verdict::Invalid(format!("agent {path} is not declared")),
        };
        self.in_progress.push(path.clone());
        let verdict = self.check_formula(&knowledge);
        self.in_progress.pop();
        self.done.insert(path.clone(), verdict.clone());
        verdict
    }

    fn check_formula(&mut self, knowledge: &Formula) -> Verdict {
        if !knowledge.has_context() {
            return Verdict::Skipped("axiomatic".into());
        }
        let Formula::ChooseAll { var, body } = knowledge else {
            return self.check_claim(knowledge);
        };
        if matches!(**body, Formula::ChooseAll { .. }) {
            return Verdict::Skipped("several `ada` variables are not sampled".into());
        }

        let mut trace = ProofTrace::new();
        let mut witnesses = Binding::new();
        let mut sampled = 0;
        for n in 0..ADA_SCAN {
            if sampled == self.class_sample {
                break;
            }
            let at = Binding::from_iter([(var.clone(), Term::Nat(n))]);
            let claim = apply_subst(body, &at);
            let declared = claim.context_paths().iter().all(|p| {
                p.ground()
                    .is_some_and(|g| !matches!(self.original.lookup(&g), Lookup::Absent))
            });
            if !declared {
                continue;
            }
            sampled += 1;
            match self.check_claim(&claim) {
                Verdict::Valid { trace: t, witnesses: w } => {
                    trace.extend(t);
                    witnesses = w;
                }
                Verdict::Invalid(r) => return Verdict::Invalid(format!("{r} (at {var} = {n})")),
                Verdict::Skipped(_) => {}
            }
        }
        if sampled == 0 {
            return Verdict::Skipped(format!("no value of `{var}` has a declared context"));
        }
        Verdict::Valid { trace, witnesses }
    }

    fn check_claim(&mut self, claim: &Formula) -> Verdict {
        for p in claim.context_paths() {
            let Some(g) = p.ground() else {
                return Verdict::Invalid(format!("context {p} is not a ground location"));
            };
            match self.check(&g) {
                Verdict::Invalid(r) if r == CYCLE => return Verdict::Invalid(r),
                Verdict::Invalid(_) => return Verdict::Invalid(format!("context {g} is invalid")),
                _ => {}
            }
        }
        let mut ev = Evaluator::new(&mut self.work, self.limits, &[]);
        let result = ev.resolve(claim);
        let trace = ev.into_trace();
        match result {
            Ok(a) if a.success => Verdict::Valid {
                trace,
                witnesses: a.witnesses,
            },
            Ok(_) => Verdict::Invalid("not derivable from its context".into()),
            Err(e) if e.is_limit() => Verdict::Invalid("inconclusive: limit".into()),
            Err(SolveError::Cycle(_)) => Verdict::Invalid(CYCLE.into()),
            Err(e) => Verdict::Invalid(e.to_string()),
        }
    }
}

/// Checks a single agent (explicit or class instance) of `registry`.
pub fn check_declaration(registry: &Registry, path: &GroundPath, limits: Limits) -> Verdict {
    checker(registry, 1, limits).check(path)
}

fn checker(registry: &Registry, class_sample: usize, limits: Limits) -> Checker<'_> {
    Checker {
        original: registry,
        work: registry.clone(),
        limits,
        class_sample,
        done: BTreeMap::new(),
        in_progress: Vec::new(),
    }
}

/// Checks every stored agent and the first `class_sample` remaining
/// instances of every class. `registry` itself is not modified.
pub fn check_program(registry: &Registry, class_sample: usize, limits: Limits) -> CheckReport {
    let mut c = checker(registry, class_sample, limits);
    let mut targets: Vec<GroundPath> = registry.agents().map(|e| e.path.clone()).collect();
    for class in registry.classes() {
        let fresh = (class.decl.lower..)
            .filter(|n| !class.consumed.contains(n))
            .filter_map(|n| class.instance_path(n))
            .take(class_sample);
        targets.extend(fresh);
    }
    let entries: Vec<CheckEntry> = targets
        .into_iter()
        .map(|path| {
            let verdict = c.check(&path);
            CheckEntry { path, verdict }
        })
        .collect();
    CheckReport {
        overall: !entries.iter().any(|e| e.verdict.is_invalid()),
        entries,
        class_sample,
    }
}
