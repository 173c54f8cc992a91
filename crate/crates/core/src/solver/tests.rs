use super::*;
use crate::registry::Registry;
use crate::surface::{parse_program, parse_query, Term};

fn atom(src: &str) -> Atom {
    match parse_query(src).unwrap() {
        Formula::Atom(a) => a,
        other => panic!("not an atom: {other}"),
    }
}

fn clause(src: &str, kind: ClauseKind) -> Clause {
    let f = parse_query(src).unwrap();
    Clause::from_formula(&f, kind, ClauseOrigin::Inline).unwrap()
}

const FIB_RULE: &str = "cla x,y,z: fib(x,y) & fib(x+1,z) -> fib(x+2,y+z)";

fn base_facts() -> Vec<Atom> {
    vec![atom("fib(0,1)"), atom("fib(1,1)")]
}

/// fib(0) = fib(1) = 1.
fn fib_from_zero(n: u64) -> u64 {
    let (mut a, mut b) = (1u64, 1u64);
    for _ in 0..n {
        (a, b) = (b, a + b);
    }
    a
}

/// fib(1) = fib(2) = 1.
fn fib_from_one(n: u64) -> u64 {
    let (mut a, mut b) = (0u64, 1u64);
    for _ in 0..n {
        (a, b) = (b, a + b);
    }
    a
}

fn load(src: &str) -> Registry {
    Registry::load(&parse_program(src).unwrap()).unwrap()
}

const FIB_AGENTS: &str = include_str!("../../corpus/fib_agents.colw");
const FIB_VARIATION: &str = include_str!("../../corpus/fib_variation.colw");
const M_CHAIN: &str = include_str!("../../corpus/m_chain.colw");

#[test]
fn oracles_agree_on_small_values() {
    assert_eq!((0..6).map(fib_from_zero).collect::<Vec<_>>(), [1, 1, 2, 3, 5, 8]);
    assert_eq!((1..7).map(fib_from_one).collect::<Vec<_>>(), [1, 1, 2, 3, 5, 8]);
}

#[test]
fn buq_returns_three() {
    let rules = [clause(FIB_RULE, ClauseKind::Buq)];
    let (answer, trace) = solve_buq(&atom("fib(3,X)"), &base_facts(), &rules, 64).unwrap();
    assert!(answer.success);
    assert_eq!(answer.witness("X"), Some(3));
    assert!(trace.firings().next().is_none());
    assert!(trace.steps.iter().any(|s| matches!(s, TraceStep::Resolution { .. })));
}

#[test]
fn buq_fact_goal_uses_one_fact() {
    let rules = [clause(FIB_RULE, ClauseKind::Buq)];
    let (answer, trace) = solve_buq(&atom("fib(0,1)"), &base_facts(), &rules, 64).unwrap();
    assert!(answer.success);
    assert_eq!(trace.len(), 1);
    assert_eq!(trace.to_string(), "USE fib(0,1) FROM lemma\n");
}

#[test]
fn buq_without_rules_fails() {
    let (answer, trace) = solve_buq(&atom("fib(3,X)"), &base_facts(), &[], 64).unwrap();
    assert_eq!(answer, Answer::failure());
    assert!(trace.is_empty());
}

#[test]
fn buq_checks_ground_goals() {
    let rules = [clause(FIB_RULE, ClauseKind::Buq)];
    for (goal, ok) in [("fib(4,5)", true), ("fib(4,6)", false), ("fib(5,8)", true)] {
        let (answer, _) = solve_buq(&atom(goal), &base_facts(), &rules, 64).unwrap();
        assert_eq!(answer.success, ok, "{goal}");
    }
}

#[test]
fn buq_depth_limit_is_an_error() {
    let rules = [clause(FIB_RULE, ClauseKind::Buq)];
    let err = solve_buq(&atom("fib(40,X)"), &base_facts(), &rules, 8).unwrap_err();
    assert_eq!(err, SolveError::DepthExceeded(8));
    assert!(err.is_limit());
    let loops = [clause("cla x: p(x) -> p(x)", ClauseKind::Buq)];
    assert_eq!(
        solve_buq(&atom("p(1)"), &[], &loops, 20).unwrap_err(),
        SolveError::DepthExceeded(20)
    );
}

#[test]
fn buq_leaves_store_untouched() {
    let facts = base_facts();
    let rules = vec![clause(FIB_RULE, ClauseKind::Buq)];
    let (before_f, before_r) = (facts.clone(), rules.clone());
    solve_buq(&atom("fib(6,X)"), &facts, &rules, 64).unwrap();
    assert_eq!((facts, rules), (before_f, before_r));
}

#[test]
fn forward_lists_lemmas_in_order() {
    let rules = [clause(FIB_RULE, ClauseKind::Puq)];
    let out = chain_forward(&base_facts(), &rules, Some(&atom("fib(3,X)")), 100).unwrap();
    assert_eq!(out.derived, [atom("fib(2,2)"), atom("fib(3,3)")]);
    assert_eq!(out.answer.witness("X"), Some(3));
    let fired: Vec<String> = out
        .trace
        .firings()
        .map(|s| s.instantiated().unwrap())
        .collect();
    assert_eq!(fired, ["fib(0,1) & fib(1,1) -> fib(2,2)", "fib(1,1) & fib(2,2) -> fib(3,3)"]);
    out.trace.check_well_founded().unwrap();
}

#[test]
fn forward_trace_text() {
    let rules = [clause(FIB_RULE, ClauseKind::Puq)];
    let out = chain_forward(&base_facts(), &rules, Some(&atom("fib(3,X)")), 100).unwrap();
    assert_eq!(
        out.trace.to_string(),
        "USE fib(0,1) FROM lemma\n\
         USE fib(1,1) FROM lemma\n\
         FIRE fib(0,1) & fib(1,1) -> fib(2,2) WITH x=0, y=1, z=1 DERIVES fib(2,2)\n\
         FIRE fib(1,1) & fib(2,2) -> fib(3,3) WITH x=1, y=1, z=2 DERIVES fib(3,3)\n"
    );
}

#[test]
fn forward_goal_already_known() {
    let rules = [clause(FIB_RULE, ClauseKind::Puq)];
    let out = chain_forward(&base_facts(), &rules, Some(&atom("fib(0,1)")), 100).unwrap();
    assert!(out.derived.is_empty());
    assert!(out.answer.success);
    assert_eq!(out.trace.firing_count(), 0);
}

#[test]
fn forward_matches_oracle() {
    let rules = [clause(FIB_RULE, ClauseKind::Puq)];
    let out = chain_forward(&base_facts(), &rules, Some(&atom("fib(4,X)")), 100).unwrap();
    assert!(out.derived.contains(&atom("fib(4,5)")));
    assert_eq!(out.answer.witness("X"), Some(fib_from_zero(4)));
}

#[test]
fn forward_round_limit() {
    let rules = [clause(FIB_RULE, ClauseKind::Puq)];
    let err = chain_forward(&base_facts(), &rules, Some(&atom("fib(20,X)")), 3).unwrap_err();
    assert_eq!(err, SolveError::RoundsExceeded(3));
}

#[test]
fn forward_quiesces_without_goal() {
    let rules = [clause("cla x: p(x) -> q(x)", ClauseKind::Puq)];
    let out = chain_forward(&[atom("p(1)"), atom("p(2)")], &rules, None, 10).unwrap();
    assert_eq!(out.derived, [atom("q(1)"), atom("q(2)")]);
    // a goal that never becomes true ends at the fixpoint, not the limit
    let out = chain_forward(&[atom("p(1)")], &rules, Some(&atom("q(7)")), 10).unwrap();
    assert!(!out.answer.success);
}

#[test]
fn forward_rejects_unsafe_heads() {
    let rules = [clause("cla x,y: p(x) -> q(y)", ClauseKind::Puq)];
    assert!(matches!(
        chain_forward(&[atom("p(1)")], &rules, None, 10),
        Err(SolveError::UnsafeClause(_))
    ));
}

#[test]
fn forward_never_rederives() {
    let rules = [
        clause(FIB_RULE, ClauseKind::Puq),
        clause("cla x,y: fib(x,y) -> fib(x,y)", ClauseKind::Puq),
    ];
    let out = chain_forward(&base_facts(), &rules, Some(&atom("fib(12,X)")), 100).unwrap();
    let derived = out.trace.derived();
    let unique: std::collections::HashSet<_> = derived.iter().collect();
    assert_eq!(unique.len(), derived.len());
}

#[test]
fn backward_and_forward_agree() {
    let buq = [clause(FIB_RULE, ClauseKind::Buq)];
    let puq = [clause(FIB_RULE, ClauseKind::Puq)];
    for n in 0..=15u64 {
        let goal = Atom::new("fib", vec![Term::Nat(n), Term::var("X")]);
        let (b, _) = solve_buq(&goal, &base_facts(), &buq, 64).unwrap();
        let f = chain_forward(&base_facts(), &puq, Some(&goal), 100).unwrap();
        assert_eq!(b.witness("X"), Some(fib_from_zero(n)), "n={n}");
        assert_eq!(f.answer.witness("X"), Some(fib_from_zero(n)), "n={n}");
    }
}

#[test]
fn forward_lemmas_are_provable_backward() {
    let buq = [clause(FIB_RULE, ClauseKind::Buq)];
    let puq = [clause(FIB_RULE, ClauseKind::Puq)];
    let out = chain_forward(&base_facts(), &puq, Some(&atom("fib(12,X)")), 100).unwrap();
    for lemma in &out.derived {
        let (a, _) = solve_buq(lemma, &base_facts(), &buq, 64).unwrap();
        assert!(a.success, "{lemma}");
    }
}

#[test]
fn traces_are_deterministic() {
    let run = || {
        let mut reg = load(FIB_AGENTS);
        let q = parse_query("(ade y: fib(9,y)) @ [/fib]").unwrap();
        let (_, trace) = resolve_query(&mut reg, &q, &[], Limits::default()).unwrap();
        (trace.to_string(), reg.snapshot())
    };
    assert_eq!(run(), run());
}

#[test]
fn query_through_fib_agent() {
    let mut reg = load(FIB_AGENTS);
    let q = parse_query("(ade y: fib(4,y)) @ [/fib]").unwrap();
    let (answer, trace) = resolve_query(&mut reg, &q, &[], Limits::default()).unwrap();
    assert!(answer.success);
    assert_eq!(answer.witness("y"), Some(3));
    assert_eq!(trace.firings_of("b"), 2);
    trace.check_well_founded().unwrap();
    let snap = reg.snapshot();
    assert!(snap.contains("agent /a[3] = fib(3,2).\n"));
    assert!(snap.contains("agent /a[4] = fib(4,3).\n"));
    assert!(snap.contains("wedge x from 3: agent /a[x+2]"));
}

#[test]
fn query_by_argument() {
    let mut reg = load(FIB_AGENTS);
    let q = parse_query("ada n: (ade y: fib(n,y)) @ [/a[n]]").unwrap();
    let (answer, _) = resolve_query(&mut reg, &q, &[7], Limits::default()).unwrap();
    assert_eq!(answer.witness("y"), Some(fib_from_one(7)));
    assert_eq!(
        resolve_query(&mut reg, &q, &[], Limits::default()).unwrap_err(),
        SolveError::MissingArgument("n".into())
    );
}

#[test]
fn query_against_fact_agent() {
    let mut reg = load(FIB_AGENTS);
    let q = parse_query("fib(1,1) @ [/a[1]]").unwrap();
    let (answer, _) = resolve_query(&mut reg, &q, &[], Limits::default()).unwrap();
    assert!(answer.success);
    assert!(answer.witnesses.is_empty());
    let q = parse_query("fib(1,2) @ [/a[1]]").unwrap();
    let (answer, _) = resolve_query(&mut reg, &q, &[], Limits::default()).unwrap();
    assert!(!answer.success);
}

#[test]
fn query_absent_context() {
    let mut reg = load(FIB_AGENTS);
    let q = parse_query("p @ [/nowhere]").unwrap();
    assert_eq!(
        resolve_query(&mut reg, &q, &[], Limits::default()).unwrap_err(),
        SolveError::AbsentAgent(GroundPath::new("nowhere", None))
    );
}

#[test]
fn firing_count_is_linear() {
    let mut reg = load(FIB_AGENTS);
    let q = parse_query("(ade y: fib(30,y)) @ [/fib]").unwrap();
    let (answer, trace) = resolve_query(&mut reg, &q, &[], Limits::default()).unwrap();
    assert_eq!(answer.witness("y"), Some(fib_from_one(30)));
    assert_eq!(trace.firings_of("b"), 28);
    let (again, trace) = resolve_query(&mut reg, &q, &[], Limits::default()).unwrap();
    assert_eq!(again, answer);
    assert_eq!(trace.firing_count(), 0);
}

#[test]
fn variation_gives_same_witnesses() {
    for n in 3..=10u64 {
        let q = parse_query(&format!("(ade y: fib({n},y)) @ [/fib]")).unwrap();
        let mut a = load(FIB_AGENTS);
        let mut b = load(FIB_VARIATION);
        let (x, _) = resolve_query(&mut a, &q, &[], Limits::default()).unwrap();
        let (y, _) = resolve_query(&mut b, &q, &[], Limits::default()).unwrap();
        assert_eq!(x, y);
        assert_eq!(x.witness("y"), Some(fib_from_one(n)));
    }
}

#[test]
fn global_store_blind_rules_do_not_grow() {
    let mut reg = load(include_str!("../../corpus/fib_buq.colw"));
    let before = reg.snapshot();
    let q = parse_query("ade x: fib(3,x)").unwrap();
    let (answer, _) = resolve_query(&mut reg, &q, &[], Limits::default()).unwrap();
    assert_eq!(answer.witness("x"), Some(3));
    assert_eq!(reg.snapshot(), before);
}

#[test]
fn global_store_class_rules_keep_lemmas() {
    let mut reg = load(include_str!("../../corpus/fib_puq.colw"));
    let q = parse_query("ade x: fib(3,x)").unwrap();
    let (answer, trace) = resolve_query(&mut reg, &q, &[], Limits::default()).unwrap();
    assert_eq!(answer.witness("x"), Some(3));
    assert_eq!(reg.global_lemmas(), [atom("fib(2,2)"), atom("fib(3,3)")]);
    assert!(trace
        .firings()
        .any(|s| s.instantiated().unwrap() == "fib(1,1) & fib(2,2) -> fib(3,3)"));
    // lemmas are reused
    let (_, trace) = resolve_query(&mut reg, &q, &[], Limits::default()).unwrap();
    assert_eq!(trace.firing_count(), 0);
}

#[test]
fn conjunction_shares_bindings() {
    let mut reg = load("agent /k = p(1) & q(1,2) & q(2,3).");
    let q = parse_query("(ade x: ade y: p(x) & q(x,y)) @ [/k]").unwrap();
    let (answer, _) = resolve_query(&mut reg, &q, &[], Limits::default()).unwrap();
    assert_eq!(answer.witnesses.to_string(), "x=1, y=2");
}

#[test]
fn macro_expands_class_chain() {
    let reg = load(M_CHAIN);
    let p = AgentPath::new("m", Some(Term::succ(Term::succ(Term::succ(Term::Nat(0))))));
    assert_eq!(expand_macro(&reg, &p).unwrap().to_string(), "p & (p & (p & q))");
    // nothing is registered by expansion
    assert_eq!(reg.snapshot(), load(M_CHAIN).snapshot());
}

#[test]
fn macro_of_plain_agent() {
    let reg = load(FIB_AGENTS);
    let p = AgentPath::new("a", Some(Term::Nat(1)));
    assert_eq!(expand_macro(&reg, &p).unwrap().to_string(), "fib(1,1)");
}

#[test]
fn macro_errors() {
    let reg = load("agent /w = /w.");
    assert_eq!(
        expand_macro(&reg, &AgentPath::new("w", None)),
        Err(SolveError::Cycle(GroundPath::new("w", None)))
    );
    assert_eq!(
        expand_macro(&reg, &AgentPath::new("v", None)),
        Err(SolveError::AbsentAgent(GroundPath::new("v", None)))
    );
}

#[test]
fn macro_reference_in_query() {
    let mut reg = load("agent /k = p(1).\nagent /j = /k.");
    let q = parse_query("(ade x: p(x)) @ [/k]").unwrap();
    let (answer, _) = resolve_query(&mut reg, &q, &[], Limits::default()).unwrap();
    assert_eq!(answer.witness("x"), Some(1));
    let q = parse_query("/k").unwrap();
    let (answer, trace) = resolve_query(&mut reg, &q, &[], Limits::default()).unwrap();
    assert!(answer.success);
    assert!(trace.to_string().starts_with("MACRO /k\n"));
}

#[test]
fn context_with_macro_is_expanded() {
    let mut reg = load(M_CHAIN);
    let q = parse_query("q @ [/m[2]]").unwrap();
    let (answer, trace) = resolve_query(&mut reg, &q, &[], Limits::default()).unwrap();
    assert!(answer.success);
    assert!(trace.to_string().contains("MACRO /m[2]\n"));
}
