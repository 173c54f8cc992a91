//! An interpreter for a small agent-located logic.
//!
//! Programs declare agents that hold knowledge, either one at a time
//! (`agent /a[1] = fib(1,1).`) or as a class (`wedge x: agent /a[x+2] = ...`).
//! Queries are evaluated against the knowledge of named agents, which are
//! computed on demand and remembered.

pub mod checker;
pub mod cli;
pub mod registry;
pub mod solver;
pub mod surface;
pub mod terms;

pub use registry::{FrozenRegistry, Registry, RegistryError};
pub use solver::{resolve_query, Answer, Limits, ProofTrace, SolveError};
pub use surface::{parse_program, parse_query, Formula, Program, SyntaxError};
