//! Substitutions, unification and arithmetic over object-language terms.
//!
//! Arithmetic is evaluate-when-ground: a ground term stands for its value,
//! and the only non-ground shapes that unification can invert are linear
//! patterns `v + k` (a single variable occurrence plus a ground offset).

use std::collections::BTreeSet;

use indexmap::IndexMap;
use thiserror::Error;

use crate::surface::{AgentPath, Atom, Formula, Nat, Term};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TermError {
    #[error("unbound variable `{0}`")]
    UnboundVariable(String),
    #[error("unsupported index pattern `{0}`: expected a variable plus a ground offset")]
    UnsupportedPattern(Term),
    #[error("arithmetic overflow")]
    Overflow,
}

/// A substitution from variable names to terms.
///
/// Kept idempotent: no bound variable occurs in any bound value.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Binding(IndexMap<String, Term>);

impl Binding {
    pub fn new() -> Self {
        Binding::default()
    }

    pub fn get(&self, var: &str) -> Option<&Term> {
        self.0.get(var)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Term)> {
        self.0.iter()
    }

    pub fn contains(&self, var: &str) -> bool {
        self.0.contains_key(var)
    }

    /// Inserts `var ↦ value` without composing. Callers building a binding
    /// from ground values can use this directly.
    pub fn insert(&mut self, var: impl Into<String>, value: Term) {
        self.0.insert(var.into(), value);
    }

    pub fn remove(&mut self, var: &str) -> Option<Term> {
        self.0.shift_remove(var)
    }

    /// Binds `var` to `value` and composes, keeping the binding idempotent.
    /// Returns `false` (leaving `self` unchanged) if the occurs check fails.
    pub fn bind(&mut self, var: &str, value: &Term) -> bool {
        if let Some(existing) = self.0.get(var).cloned() {
            return unify_terms(&existing, value, self);
        }
        let value = normalize(&self.apply_term(value));
        if value == Term::Var(var.to_string()) {
            return true;
        }
        if value.mentions(var) {
            return false;
        }
        let single = Binding::from_iter([(var.to_string(), value.clone())]);
        for v in self.0.values_mut() {
            if v.mentions(var) {
                *v = normalize(&single.apply_term(v));
            }
        }
        self.0.insert(var.to_string(), value);
        true
    }

    pub fn apply_term(&self, t: &Term) -> Term {
        apply_term(t, self)
    }

    pub fn apply_atom(&self, a: &Atom) -> Atom {
        apply_atom(a, self)
    }

    /// Keeps only the listed variables, in the listed order.
    pub fn restrict(&self, vars: &[String]) -> Binding {
        vars.iter()
            .filter_map(|v| self.0.get(v).map(|t| (v.clone(), t.clone())))
            .collect()
    }
}

impl FromIterator<(String, Term)> for Binding {
    fn from_iter<I: IntoIterator<Item = (String, Term)>>(iter: I) -> Self {
        Binding(iter.into_iter().collect())
    }
}

impl std::fmt::Display for Binding {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for (i, (k, v)) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{k}={v}")?;
        }
        Ok(())
    }
}

/// Evaluates a term, looking variables up in `b`.
pub fn eval_term(t: &Term, b: &Binding) -> Result<Nat, TermError> {
    match t {
        Term::Nat(n) => Ok(*n),
        Term::Var(v) => match b.get(v) {
            Some(value) if value.mentions(v) => Err(TermError::UnboundVariable(v.clone())),
            Some(value) => eval_term(value, b),
            None => Err(TermError::UnboundVariable(v.clone())),
        },
        Term::Succ(t) => eval_term(t, b)?.checked_add(1).ok_or(TermError::Overflow),
        Term::Plus(l, r) => eval_term(l, b)?
            .checked_add(eval_term(r, b)?)
            .ok_or(TermError::Overflow),
    }
}

/// Evaluates a term that should contain no variables.
pub fn eval_ground(t: &Term) -> Result<Nat, TermError> {
    eval_term(t, &Binding::new())
}

/// Folds every ground subterm into a constant. Overflowing subterms are left
/// unfolded.
pub fn normalize(t: &Term) -> Term {
    if t.is_ground() {
        if let Ok(n) = eval_ground(t) {
            return Term::Nat(n);
        }
        return t.clone();
    }
    match t {
        Term::Succ(a) => Term::succ(normalize(a)),
        Term::Plus(l, r) => Term::plus(normalize(l), normalize(r)),
        _ => t.clone(),
    }
}

pub fn normalize_atom(a: &Atom) -> Atom {
    Atom::new(a.predicate.clone(), a.args.iter().map(normalize).collect())
}

/// Normalizes every term in a formula, including path indices.
pub fn normalize_formula(f: &Formula) -> Formula {
    map_terms(f, &normalize)
}

fn map_terms(f: &Formula, g: &dyn Fn(&Term) -> Term) -> Formula {
    let atom = |a: &Atom| Atom::new(a.predicate.clone(), a.args.iter().map(g).collect());
    let path = |p: &AgentPath| AgentPath::new(p.name.clone(), p.index.as_ref().map(g));
    match f {
        Formula::Atom(a) => Formula::Atom(atom(a)),
        Formula::Conj(parts) => Formula::Conj(parts.iter().map(|p| map_terms(p, g)).collect()),
        Formula::Impl { body, head } => Formula::implies(map_terms(body, g), atom(head)),
        Formula::Blind { vars, body } => Formula::blind(vars.clone(), map_terms(body, g)),
        Formula::ChooseAll { var, body } => Formula::choose_all(var.clone(), map_terms(body, g)),
        Formula::ChooseEx { var, body } => Formula::choose_ex(var.clone(), map_terms(body, g)),
        Formula::WithContext { inner, ctx } => Formula::WithContext {
            inner: Box::new(map_terms(inner, g)),
            ctx: ctx.iter().map(path).collect(),
        },
        Formula::MacroRef(p) => Formula::MacroRef(path(p)),
    }
}

pub fn apply_term(t: &Term, b: &Binding) -> Term {
    match t {
        Term::Nat(_) => t.clone(),
        Term::Var(v) => b.get(v).cloned().unwrap_or_else(|| t.clone()),
        Term::Succ(a) => Term::succ(apply_term(a, b)),
        Term::Plus(l, r) => Term::plus(apply_term(l, b), apply_term(r, b)),
    }
}

pub fn apply_atom(a: &Atom, b: &Binding) -> Atom {
    Atom::new(a.predicate.clone(), a.args.iter().map(|t| apply_term(t, b)).collect())
}

pub fn apply_path(p: &AgentPath, b: &Binding) -> AgentPath {
    AgentPath::new(p.name.clone(), p.index.as_ref().map(|t| apply_term(t, b)))
}

/// Substitutes free occurrences only. Quantified variables shadow the
/// binding, and are renamed when a substituted value would be captured.
pub fn apply_subst(f: &Formula, b: &Binding) -> Formula {
    if b.is_empty() {
        return f.clone();
    }
    match f {
        Formula::Atom(a) => Formula::Atom(apply_atom(a, b)),
        Formula::Conj(parts) => Formula::Conj(parts.iter().map(|p| apply_subst(p, b)).collect()),
        Formula::Impl { body, head } => Formula::implies(apply_subst(body, b), apply_atom(head, b)),
        Formula::Blind { vars, body } => {
            let (vars, body) = under_binder(vars, body, b);
            Formula::blind(vars, body)
        }
        Formula::ChooseAll { var, body } => {
            let (mut vars, body) = under_binder(std::slice::from_ref(var), body, b);
            Formula::choose_all(vars.remove(0), body)
        }
        Formula::ChooseEx { var, body } => {
            let (mut vars, body) = under_binder(std::slice::from_ref(var), body, b);
            Formula::choose_ex(vars.remove(0), body)
        }
        Formula::WithContext { inner, ctx } => Formula::WithContext {
            inner: Box::new(apply_subst(inner, b)),
            ctx: ctx.iter().map(|p| apply_path(p, b)).collect(),
        },
        Formula::MacroRef(p) => Formula::MacroRef(apply_path(p, b)),
    }
}

fn under_binder(vars: &[String], body: &Formula, b: &Binding) -> (Vec<String>, Formula) {
    let inner: Binding = b
        .iter()
        .filter(|(k, _)| !vars.contains(k))
        .map(|(k, v)| (k.clone(), v.clone()))
        .collect();
    let mut captured_by_values = Vec::new();
    for (_, v) in inner.iter() {
        v.vars_into(&mut captured_by_values);
    }
    let mut taken: BTreeSet<String> = body.free_vars();
    taken.extend(captured_by_values.iter().cloned());
    taken.extend(vars.iter().cloned());
    taken.extend(inner.iter().map(|(k, _)| k.clone()));

    let mut out_vars = Vec::with_capacity(vars.len());
    let mut renames = Binding::new();
    for v in vars {
        if captured_by_values.contains(v) {
            let fresh = (1..)
                .map(|i| format!("{v}{i}"))
                .find(|c| !taken.contains(c))
                .unwrap();
            taken.insert(fresh.clone());
            renames.insert(v.clone(), Term::Var(fresh.clone()));
            out_vars.push(fresh);
        } else {
            out_vars.push(v.clone());
        }
    }
    let body = if renames.is_empty() {
        body.clone()
    } else {
        apply_subst(body, &renames)
    };
    if inner.is_empty() {
        return (out_vars, body);
    }
    (out_vars, apply_subst(&body, &inner))
}

/// Shape of a term as far as arithmetic inversion is concerned.
#[derive(Debug, Clone, PartialEq, Eq)]
enum Linear {
    Ground(Nat),
    Offset(String, Nat),
    Other,
}

fn linear(t: &Term) -> Linear {
    if t.is_ground() {
        return match eval_ground(t) {
            Ok(n) => Linear::Ground(n),
            Err(_) => Linear::Other,
        };
    }
    match t {
        Term::Var(v) => Linear::Offset(v.clone(), 0),
        Term::Succ(a) => match linear(a) {
            Linear::Offset(v, k) => k
                .checked_add(1)
                .map_or(Linear::Other, |k| Linear::Offset(v, k)),
            _ => Linear::Other,
        },
        Term::Plus(l, r) => match (linear(l), linear(r)) {
            (Linear::Offset(v, k), Linear::Ground(n)) | (Linear::Ground(n), Linear::Offset(v, k)) => k
                .checked_add(n)
                .map_or(Linear::Other, |k| Linear::Offset(v, k)),
            _ => Linear::Other,
        },
        Term::Nat(_) => unreachable!("ground handled above"),
    }
}

fn offset_term(var: &str, k: Nat) -> Term {
    if k == 0 {
        Term::var(var)
    } else {
        Term::plus(Term::var(var), Term::Nat(k))
    }
}

/// Inverts a linear index pattern against a concrete natural.
///
/// `Ok(None)` means the pattern cannot produce `n`; an error means the
/// pattern is outside the supported shapes.
pub fn match_index(pattern: &Term, n: Nat) -> Result<Option<Binding>, TermError> {
    match linear(pattern) {
        Linear::Ground(m) => Ok((m == n).then(Binding::new)),
        Linear::Offset(v, k) => Ok((n >= k).then(|| Binding::from_iter([(v, Term::Nat(n - k))]))),
        Linear::Other => Err(TermError::UnsupportedPattern(pattern.clone())),
    }
}

/// Most general unifier of two atoms, or `None`.
pub fn unify(a: &Atom, b: &Atom) -> Option<Binding> {
    unify_with(a, b, &Binding::new())
}

/// Unifies two atoms under an existing binding, returning the extension.
pub fn unify_with(a: &Atom, b: &Atom, sigma: &Binding) -> Option<Binding> {
    if a.predicate != b.predicate || a.args.len() != b.args.len() {
        return None;
    }
    let mut s = sigma.clone();
    for (x, y) in a.args.iter().zip(&b.args) {
        if !unify_terms(x, y, &mut s) {
            return None;
        }
    }
    Some(s)
}

/// Unifies two terms in place. On failure `s` may hold a partial extension.
pub fn unify_terms(x: &Term, y: &Term, s: &mut Binding) -> bool {
    let x = normalize(&s.apply_term(x));
    let y = normalize(&s.apply_term(y));
    if x == y {
        return true;
    }
    match (linear(&x), linear(&y)) {
        (Linear::Ground(m), Linear::Ground(n)) => m == n,
        (Linear::Offset(v, 0), _) => s.bind(&v, &y),
        (_, Linear::Offset(v, 0)) => s.bind(&v, &x),
        (Linear::Ground(n), Linear::Offset(v, k)) | (Linear::Offset(v, k), Linear::Ground(n)) => {
            n >= k && s.bind(&v, &Term::Nat(n - k))
        }
        (Linear::Offset(v, j), Linear::Offset(w, k)) => {
            if v == w {
                j == k
            } else if j >= k {
                s.bind(&w, &offset_term(&v, j - k))
            } else {
                s.bind(&v, &offset_term(&w, k - j))
            }
        }
        // same non-linear shape on both sides: the structural unifier is sound
        (Linear::Other, Linear::Other) => match (&x, &y) {
            (Term::Succ(a), Term::Succ(b)) => unify_terms(a, b, s),
            (Term::Plus(a, b), Term::Plus(c, d)) => unify_terms(a, c, s) && unify_terms(b, d, s),
            _ => false,
        },
        _ => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surface::parse_query;

    fn t(src: &str) -> Term {
        match parse_query(&format!("p({src})")).unwrap() {
            Formula::Atom(a) => a.args[0].clone(),
            _ => unreachable!(),
        }
    }

    fn atom(src: &str) -> Atom {
        match parse_query(src).unwrap() {
            Formula::Atom(a) => a,
            _ => unreachable!(),
        }
    }

    fn binding(pairs: &[(&str, Nat)]) -> Binding {
        pairs.iter().map(|(k, v)| (k.to_string(), Term::Nat(*v))).collect()
    }

    #[test]
    fn eval_examples() {
        assert_eq!(eval_term(&t("x+2"), &binding(&[("x", 1)])), Ok(3));
        assert_eq!(eval_term(&t("0"), &Binding::new()), Ok(0));
        assert_eq!(eval_term(&t("0'''"), &Binding::new()), Ok(3));
        assert_eq!(
            eval_term(&t("x+y"), &binding(&[("x", 1)])),
            Err(TermError::UnboundVariable("y".into()))
        );
        assert_eq!(
            eval_term(&t("x+1"), &binding(&[("x", Nat::MAX)])),
            Err(TermError::Overflow)
        );
    }

    #[test]
    fn substitution_examples() {
        let b = binding(&[("x", 0), ("y", 1), ("z", 1)]);
        assert_eq!(apply_atom(&atom("fib(x+2,y+z)"), &b), atom("fib(0+2,1+1)"));
        assert_eq!(apply_atom(&atom("fib(n,3)"), &Binding::new()), atom("fib(n,3)"));
        let f = parse_query("cla x: p(x,y)").unwrap();
        let b = binding(&[("x", 5), ("y", 7)]);
        assert_eq!(apply_subst(&f, &b), parse_query("cla x: p(x,7)").unwrap());
    }

    #[test]
    fn substitution_avoids_capture() {
        let f = parse_query("ade y: p(x,y)").unwrap();
        let b: Binding = [("x".to_string(), Term::var("y"))].into_iter().collect();
        assert_eq!(apply_subst(&f, &b), parse_query("ade y1: p(y,y1)").unwrap());
    }

    #[test]
    fn substitution_reaches_context_indices() {
        let f = parse_query("(ade y: fib(n,y)) @ [/a[n]]").unwrap();
        let out = apply_subst(&f, &binding(&[("n", 4)]));
        assert_eq!(out.to_string(), "(ade y: fib(4,y)) @ [/a[4]]");
    }

    #[test]
    fn unify_examples() {
        let s = unify(&atom("fib(3,Y)"), &atom("fib(1+2,3)")).unwrap();
        assert_eq!(s, binding(&[("Y", 3)]));
        assert_eq!(unify(&atom("fib(X,Y)"), &atom("fib(X,Y)")), Some(Binding::new()));
        assert_eq!(unify(&atom("fib(0,1)"), &atom("fib(1,1)")), None);
        assert_eq!(unify(&atom("fib(0,1)"), &atom("fob(0,1)")), None);
        assert_eq!(unify(&atom("p(1)"), &atom("p(1,2)")), None);
    }

    #[test]
    fn unify_inverts_linear_patterns() {
        let s = unify(&atom("fib(x+2,y+z)"), &atom("fib(4,Y)")).unwrap();
        assert_eq!(s.get("x"), Some(&Term::Nat(2)));
        assert_eq!(s.get("Y"), Some(&t("y+z")));
        assert_eq!(unify(&atom("fib(x+2,1)"), &atom("fib(1,1)")), None);
        let s = unify(&atom("p(x+2)"), &atom("p(z+1)")).unwrap();
        assert_eq!(s.get("z"), Some(&t("x+1")));
    }

    #[test]
    fn unify_occurs_check() {
        assert_eq!(unify(&atom("p(x)"), &atom("p(x+1)")), None);
        assert_eq!(unify(&atom("p(x,x+1)"), &atom("p(y,y)")), None);
    }

    #[test]
    fn unify_refuses_nonlinear_ground_equations() {
        assert_eq!(unify(&atom("p(y+z)"), &atom("p(3)")), None);
        assert_eq!(unify(&atom("p(y+z)"), &atom("p(x+1)")), None);
    }

    #[test]
    fn binding_stays_idempotent() {
        let s = unify(&atom("p(y,x+1,x)"), &atom("p(x+1,z,2)")).unwrap();
        assert_eq!(s.apply_term(&t("y")), Term::Nat(3));
        for (_, v) in s.iter() {
            assert_eq!(&s.apply_term(v), v);
        }
    }

    #[test]
    fn match_index_examples() {
        assert_eq!(match_index(&t("x+2"), 4), Ok(Some(binding(&[("x", 2)]))));
        assert_eq!(match_index(&t("x+2"), 1), Ok(None));
        assert!(matches!(
            match_index(&t("x+y"), 4),
            Err(TermError::UnsupportedPattern(_))
        ));
        assert!(matches!(
            match_index(&t("x+x"), 4),
            Err(TermError::UnsupportedPattern(_))
        ));
        assert_eq!(match_index(&t("3"), 3), Ok(Some(Binding::new())));
        assert_eq!(match_index(&t("1+2"), 4), Ok(None));
        assert_eq!(match_index(&t("x'"), 3), Ok(Some(binding(&[("x", 2)]))));
        assert_eq!(match_index(&t("(1+x)''"), 3), Ok(Some(binding(&[("x", 0)]))));
    }

    #[test]
    fn normalize_folds_ground_subterms() {
        assert_eq!(normalize(&t("x+(1+1)")), t("x+2"));
        assert_eq!(normalize(&t("0'''")), Term::Nat(3));
        let f = parse_query("cla y,z: fib(2,y) & fib(2+1,z) -> fib(2+2,y+z)").unwrap();
        assert_eq!(
            normalize_formula(&f).to_string(),
            "cla y,z: fib(2,y) & fib(3,z) -> fib(4,y+z)"
        );
    }
}
