//! Concrete syntax: parsing `.colw` programs and queries, and printing them back.
//!
//! ```text
//! wedge x from 3: agent /a[x+2] = (ade y: fib(x+2,y)) @ [/a[x], /a[x+1], /b[x+2]].
//! ```
//!
//! `cla` is the blind universal, `ada`/`ade` the choice quantifiers, `wedge`
//! declares a class agent and `@ [...]` names the agents a formula is claimed
//! to follow from. `#` starts a comment.

mod ast;
mod lexer;
mod parser;
mod pretty;

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

pub use ast::*;
pub use pretty::pretty;

use parser::Parser;

/// A syntax error with its position and the tokens that would have been accepted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub expected: Vec<String>,
    pub found: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "line {}, column {}: expected {}, found {}",
            self.line,
            self.column,
            self.expected.join(" or "),
            self.found
        )
    }
}

impl std::error::Error for ParseError {}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SyntaxError {
    #[error("parse error at {0}")]
    Parse(#[from] ParseError),
    #[error("predicate `{predicate}` used with arity {found} but earlier with arity {expected}")]
    Arity {
        predicate: String,
        expected: usize,
        found: usize,
    },
}

/// Parses a whole program and checks that each predicate keeps one arity.
pub fn parse_program(text: &str) -> Result<Program, SyntaxError> {
    let mut parser = Parser::new(text)?;
    let program = parser.program()?;
    let mut arities = BTreeMap::new();
    for item in &program.decls {
        let decl = match item {
            Item::Decl(d) => d,
            Item::Class(c) => &c.template,
        };
        check_arities(&decl.knowledge, &mut arities)?;
    }
    Ok(program)
}

/// Parses a standalone formula, e.g. `(ade y: fib(4,y)) @ [/fib]`.
pub fn parse_query(text: &str) -> Result<Formula, SyntaxError> {
    let mut parser = Parser::new(text)?;
    let f = parser.formula()?;
    parser.expect_eof()?;
    check_arities(&f, &mut BTreeMap::new())?;
    Ok(f)
}

fn check_arities(f: &Formula, seen: &mut BTreeMap<String, usize>) -> Result<(), SyntaxError> {
    for atom in f.atoms() {
        let expected = *seen.entry(atom.predicate.clone()).or_insert(atom.arity());
        if expected != atom.arity() {
            return Err(SyntaxError::Arity {
                predicate: atom.predicate.clone(),
                expected,
                found: atom.arity(),
            });
        }
    }
    Ok(())
}
