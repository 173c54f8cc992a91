//! Oracles, generators and fixtures shared by the integration tests.
#![allow(dead_code)]

use std::collections::BTreeSet;
use std::path::PathBuf;

use colweb::registry::Registry;
use colweb::surface::{parse_program, AgentPath, Atom, Formula, Nat, Term};
use colweb::terms::{unify, Binding};
use proptest::prelude::*;

pub fn corpus_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("corpus").join(name)
}

pub fn corpus(name: &str) -> String {
    std::fs::read_to_string(corpus_path(name)).unwrap()
}

pub const CORPUS: [&str; 7] = [
    "fib_buq.colw",
    "fib_puq.colw",
    "fib_agents.colw",
    "fib_variation.colw",
    "m_chain.colw",
    "fib_agents_corrupt.colw",
    "empty.colw",
];

pub fn load(src: &str) -> Registry {
    Registry::load(&parse_program(src).unwrap()).unwrap()
}

/// Iterative Fibonacci with fib(0) = fib(1) = 1.
pub fn fib_from_zero(n: u64) -> u64 {
    let (mut a, mut b) = (1u64, 1u64);
    for _ in 0..n {
        let next = a + b;
        a = b;
        b = next;
    }
    a
}

/// Iterative Fibonacci with fib(1) = fib(2) = 1.
pub fn fib_from_one(n: u64) -> u64 {
    let (mut a, mut b) = (0u64, 1u64);
    for _ in 0..n {
        let next = a + b;
        a = b;
        b = next;
    }
    a
}

/// Value of a term under an assignment, in wide arithmetic. `None` for
/// unbound variables.
pub fn value(t: &Term, env: &dyn Fn(&str) -> Option<u128>) -> Option<u128> {
    match t {
        Term::Nat(n) => Some(u128::from(*n)),
        Term::Var(v) => env(v),
        Term::Succ(a) => value(a, env).map(|x| x + 1),
        Term::Plus(a, b) => Some(value(a, env)? + value(b, env)?),
    }
}

pub fn ground_value(t: &Term) -> Option<u128> {
    value(t, &|_| None)
}

/// Ground terms of depth at most 8 with occasionally huge leaves.
pub fn ground_term() -> impl Strategy<Value = Term> {
    let leaf = prop_oneof![
        4 => (0u64..100).prop_map(Term::Nat),
        1 => any::<u64>().prop_map(Term::Nat),
        1 => (u64::MAX - 3..=u64::MAX).prop_map(Term::Nat),
    ];
    leaf.prop_recursive(8, 64, 2, |inner| {
        prop_oneof![
            inner.clone().prop_map(Term::succ),
            (inner.clone(), inner).prop_map(|(a, b)| Term::plus(a, b)),
        ]
    })
}

const VARS: [&str; 3] = ["x", "y", "z"];

/// Terms of the linear fragment: constants, `v`, `v+k`, `k+v` and `v'`.
pub fn linear_term() -> impl Strategy<Value = Term> {
    let var = prop::sample::select(&VARS[..]).prop_map(Term::var);
    prop_oneof![
        (0u64..=5).prop_map(Term::Nat),
        var.clone(),
        (var.clone(), 1u64..=3).prop_map(|(v, k)| Term::plus(v, Term::Nat(k))),
        (var.clone(), 1u64..=3).prop_map(|(v, k)| Term::plus(Term::Nat(k), v)),
        var.prop_map(Term::succ),
    ]
}

pub fn linear_atom() -> impl Strategy<Value = Atom> {
    (
        prop::sample::select(&["p", "p", "p", "q"][..]),
        prop::collection::vec(linear_term(), 2),
    )
        .prop_map(|(p, args)| Atom::new(p, args))
}

fn atom_vars(a: &Atom) -> Vec<String> {
    let set: BTreeSet<String> = a.vars().into_iter().collect();
    set.into_iter().collect()
}

/// Checks soundness and generality of `unify(a, b)` against exhaustive
/// search over assignments of 0..=8.
pub fn check_unifier(a: &Atom, b: &Atom) -> Result<(), String> {
    const MAX: u128 = 8;
    let mut vars = atom_vars(a);
    for v in atom_vars(b) {
        if !vars.contains(&v) {
            vars.push(v);
        }
    }
    let got = unify(a, b);
    let same_shape = a.predicate == b.predicate && a.args.len() == b.args.len();

    let assignments = (0..(MAX + 1).pow(vars.len() as u32)).map(|mut code| {
        let mut tau = Vec::new();
        for v in &vars {
            tau.push((v.clone(), code % (MAX + 1)));
            code /= MAX + 1;
        }
        tau
    });
    for tau in assignments {
        let env = |name: &str| tau.iter().find(|(v, _)| v == name).map(|(_, n)| *n);
        let solves = same_shape
            && a.args
                .iter()
                .zip(&b.args)
                .all(|(x, y)| value(x, &env) == value(y, &env));
        match &got {
            None if solves => {
                return Err(format!("{a} and {b} have a common instance at {tau:?} but did not unify"))
            }
            None => {}
            Some(sigma) => {
                // sound: every instance of sigma is a common instance
                let inst = |t: &Term| value(&sigma.apply_term(t), &env);
                let agrees = a.args.iter().zip(&b.args).all(|(x, y)| inst(x) == inst(y));
                if !same_shape || !agrees {
                    return Err(format!("unifier {sigma} of {a} and {b} fails at {tau:?}"));
                }
                // general: every common instance is an instance of sigma
                if solves {
                    for (v, t) in sigma.iter() {
                        if env(v) != value(t, &env) {
                            return Err(format!(
                                "common instance {tau:?} of {a} and {b} is not an instance of {sigma}"
                            ));
                        }
                    }
                }
            }
        }
    }
    Ok(())
}

/// Checks `match_index` on `pattern` for one value against exhaustive search.
pub fn check_match_index(pattern: &Term, n: Nat) -> Result<(), String> {
    let got = colweb::terms::match_index(pattern, n).map_err(|e| format!("{pattern}: {e}"))?;
    let vars = {
        let mut vs = Vec::new();
        pattern.vars_into(&mut vs);
        vs
    };
    let solutions: Vec<u128> = (0..=u128::from(n))
        .filter(|x| value(pattern, &|v| vars.contains(&v.to_string()).then_some(*x)) == Some(n.into()))
        .collect();
    match got {
        Some(b) => {
            let back = value(pattern, &|v| match b.get(v) {
                Some(Term::Nat(k)) => Some(u128::from(*k)),
                _ => None,
            });
            if back != Some(n.into()) {
                return Err(format!("{pattern} with {b} does not give {n}"));
            }
        }
        None if !solutions.is_empty() => {
            return Err(format!("{pattern} can produce {n} but match_index said no"))
        }
        None => {}
    }
    Ok(())
}

fn var_name() -> impl Strategy<Value = String> {
    prop::sample::select(&["x", "y", "z", "n", "v1"][..]).prop_map(str::to_string)
}

/// Arbitrary terms as the parser builds them.
pub fn surface_term() -> impl Strategy<Value = Term> {
    let leaf = prop_oneof![
        (0u64..1000).prop_map(Term::Nat),
        var_name().prop_map(Term::Var),
    ];
    leaf.prop_recursive(4, 16, 2, |inner| {
        prop_oneof![
            inner.clone().prop_map(Term::succ),
            (inner.clone(), inner).prop_map(|(a, b)| Term::plus(a, b)),
        ]
    })
}

/// Predicates with a fixed arity each, since programs must use them consistently.
const PREDICATES: [(&str, usize); 5] = [("p", 1), ("q", 2), ("fib", 2), ("even", 1), ("r2", 0)];

pub fn surface_atom() -> impl Strategy<Value = Atom> {
    prop::sample::select(&PREDICATES[..]).prop_flat_map(|(p, arity)| {
        prop::collection::vec(surface_term(), arity).prop_map(move |args| Atom::new(p, args))
    })
}

pub fn agent_path() -> impl Strategy<Value = AgentPath> {
    (
        prop::sample::select(&["a", "b", "fib", "query"][..]),
        prop::option::of(surface_term()),
    )
        .prop_map(|(n, i)| AgentPath::new(n, i))
}

/// Arbitrary formulas in the shapes the parser produces.
pub fn surface_formula() -> impl Strategy<Value = Formula> {
    let leaf = prop_oneof![
        3 => surface_atom().prop_map(Formula::Atom),
        1 => agent_path().prop_map(Formula::MacroRef),
    ];
    leaf.prop_recursive(4, 24, 3, |inner| {
        prop_oneof![
            prop::collection::vec(inner.clone(), 2..4).prop_map(Formula::Conj),
            (inner.clone(), surface_atom()).prop_map(|(b, h)| Formula::implies(b, h)),
            (prop::collection::vec(var_name(), 1..3), inner.clone())
                .prop_map(|(vs, b)| Formula::blind(vs, b)),
            (var_name(), inner.clone()).prop_map(|(v, b)| Formula::choose_all(v, b)),
            (var_name(), inner.clone()).prop_map(|(v, b)| Formula::choose_ex(v, b)),
            (inner, prop::collection::vec(agent_path(), 1..3))
                .prop_map(|(f, ctx)| Formula::with_context(f, ctx)),
        ]
    })
}

/// The binding as `name=value` pairs, for comparisons across registries.
pub fn witnesses(b: &Binding) -> String {
    b.to_string()
}
