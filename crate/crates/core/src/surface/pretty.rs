//! Canonical text for the abstract syntax.
//!
//! Parenthesization follows the grammar's precedence levels (quantifier,
//! annotation, implication, conjunction, atomic), so printing then parsing
//! gives back the same tree.

use std::fmt::{self, Display, Formatter, Write};

use super::ast::*;

impl Display for Term {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        match self {
            Term::Nat(n) => write!(f, "{n}"),
            Term::Var(v) => f.write_str(v),
            Term::Succ(t) => write!(f, "{t}'"),
            Term::Plus(l, r) => match **r {
                Term::Plus(..) | Term::Succ(_) => write!(f, "{l}+({r})"),
                _ => write!(f, "{l}+{r}"),
            },
        }
    }
}

impl Display for Atom {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        f.write_str(&self.predicate)?;
        if !self.args.is_empty() {
            f.write_char('(')?;
            for (i, a) in self.args.iter().enumerate() {
                if i > 0 {
                    f.write_char(',')?;
                }
                write!(f, "{a}")?;
            }
            f.write_char(')')?;
        }
        Ok(())
    }
}

impl Display for AgentPath {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        match &self.index {
            Some(t) => write!(f, "/{}[{}]", self.name, t),
            None => write!(f, "/{}", self.name),
        }
    }
}

fn quantified(f: &mut Formatter<'_>, kw: &str, vars: &[String], body: &Formula) -> fmt::Result {
    write!(f, "{kw} {}: ", vars.join(","))?;
    formula(f, body)
}

fn formula(f: &mut Formatter<'_>, node: &Formula) -> fmt::Result {
    match node {
        Formula::Blind { vars, body } => quantified(f, "cla", vars, body),
        Formula::ChooseAll { var, body } => quantified(f, "ada", std::slice::from_ref(var), body),
        Formula::ChooseEx { var, body } => quantified(f, "ade", std::slice::from_ref(var), body),
        _ => annotated(f, node),
    }
}

fn annotated(f: &mut Formatter<'_>, node: &Formula) -> fmt::Result {
    match node {
        Formula::WithContext { inner, ctx } => {
            implication(f, inner)?;
            f.write_str(" @ [")?;
            for (i, p) in ctx.iter().enumerate() {
                if i > 0 {
                    f.write_str(", ")?;
                }
                write!(f, "{p}")?;
            }
            f.write_char(']')
        }
        _ => implication(f, node),
    }
}

fn implication(f: &mut Formatter<'_>, node: &Formula) -> fmt::Result {
    match node {
        Formula::Impl { body, head } => {
            conjunction(f, body)?;
            write!(f, " -> {head}")
        }
        _ => conjunction(f, node),
    }
}

fn conjunction(f: &mut Formatter<'_>, node: &Formula) -> fmt::Result {
    match node {
        Formula::Conj(parts) => {
            for (i, p) in parts.iter().enumerate() {
                if i > 0 {
                    f.write_str(" & ")?;
                }
                atomic(f, p)?;
            }
            Ok(())
        }
        _ => atomic(f, node),
    }
}

fn atomic(f: &mut Formatter<'_>, node: &Formula) -> fmt::Result {
    match node {
        Formula::Atom(a) => write!(f, "{a}"),
        Formula::MacroRef(p) => write!(f, "{p}"),
        _ => {
            f.write_char('(')?;
            formula(f, node)?;
            f.write_char(')')
        }
    }
}

impl Display for Formula {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        formula(f, self)
    }
}

impl Display for Declaration {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        write!(f, "agent {} = {}.", self.path, self.knowledge)
    }
}

impl Display for ClassDecl {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        if self.lower == 0 {
            write!(f, "wedge {}: {}", self.var, self.template)
        } else {
            write!(f, "wedge {} from {}: {}", self.var, self.lower, self.template)
        }
    }
}

impl Display for Item {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        match self {
            Item::Decl(d) => d.fmt(f),
            Item::Class(c) => c.fmt(f),
        }
    }
}

impl Display for Program {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        for d in &self.decls {
            writeln!(f, "{d}")?;
        }
        Ok(())
    }
}

/// Canonical text of any syntax node.
pub fn pretty<T: Display + ?Sized>(node: &T) -> String {
    node.to_string()
}
