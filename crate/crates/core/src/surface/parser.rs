use super::ast::*;
use super::lexer::{tokenize, Spanned, Tok};
use super::ParseError;

const KEYWORDS: &[&str] = &["agent", "wedge", "from", "cla", "ada", "ade"];

pub(crate) struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
}

impl Parser {
    pub(crate) fn new(src: &str) -> Result<Self, ParseError> {
        Ok(Parser {
            toks: tokenize(src)?,
            pos: 0,
        })
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_keyword(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw)
    }

    fn advance(&mut self) -> Tok {
        let tok = self.toks[self.pos].tok.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        tok
    }

    fn error<T>(&self, expected: &[&str]) -> Result<T, ParseError> {
        let at = &self.toks[self.pos];
        Err(ParseError {
            line: at.line,
            column: at.column,
            expected: expected.iter().map(|s| s.to_string()).collect(),
            found: at.tok.to_string(),
        })
    }

    fn expect(&mut self, tok: Tok, label: &str) -> Result<(), ParseError> {
        if *self.peek() == tok {
            self.advance();
            Ok(())
        } else {
            self.error(&[label])
        }
    }

    fn expect_keyword(&mut self, kw: &str) -> Result<(), ParseError> {
        if self.peek_keyword(kw) {
            self.advance();
            Ok(())
        } else {
            self.error(&[&format!("`{kw}`")])
        }
    }

    fn identifier(&mut self, what: &str) -> Result<String, ParseError> {
        match self.peek() {
            Tok::Ident(s) if !KEYWORDS.contains(&s.as_str()) => {
                let s = s.clone();
                self.advance();
                Ok(s)
            }
            _ => self.error(&[what]),
        }
    }

    pub(crate) fn at_eof(&self) -> bool {
        *self.peek() == Tok::Eof
    }

    pub(crate) fn expect_eof(&self) -> Result<(), ParseError> {
        if self.at_eof() {
            Ok(())
        } else {
            self.error(&["end of input"])
        }
    }

    pub(crate) fn program(&mut self) -> Result<Program, ParseError> {
        let mut decls = Vec::new();
        while !self.at_eof() {
            decls.push(self.decl()?);
        }
        Ok(Program { decls })
    }

    fn decl(&mut self) -> Result<Item, ParseError> {
        if self.peek_keyword("wedge") {
            self.advance();
            let var = self.identifier("variable")?;
            let mut lower = 0;
            if self.peek_keyword("from") {
                self.advance();
                match self.advance() {
                    Tok::Nat(n) => lower = n,
                    _ => {
                        self.pos -= 1;
                        return self.error(&["natural number"]);
                    }
                }
            }
            self.expect(Tok::Colon, "`:`")?;
            let template = self.agent_decl()?;
            Ok(Item::Class(ClassDecl {
                var,
                lower,
                template,
            }))
        } else if self.peek_keyword("agent") {
            Ok(Item::Decl(self.agent_decl()?))
        } else {
            self.error(&["`agent`", "`wedge`"])
        }
    }

    fn agent_decl(&mut self) -> Result<Declaration, ParseError> {
        self.expect_keyword("agent")?;
        let path = self.path()?;
        self.expect(Tok::Eq, "`=`")?;
        let knowledge = self.formula()?;
        self.expect(Tok::Dot, "`.`")?;
        Ok(Declaration { path, knowledge })
    }

    fn path(&mut self) -> Result<AgentPath, ParseError> {
        self.expect(Tok::Slash, "`/`")?;
        let name = self.identifier("agent name")?;
        let index = if *self.peek() == Tok::LBracket {
            self.advance();
            let t = self.term()?;
            self.expect(Tok::RBracket, "`]`")?;
            Some(t)
        } else {
            None
        };
        Ok(AgentPath { name, index })
    }

    pub(crate) fn formula(&mut self) -> Result<Formula, ParseError> {
        let quant = ["cla", "ada", "ade"]
            .into_iter()
            .find(|kw| self.peek_keyword(kw));
        let Some(kw) = quant else {
            return self.annotated();
        };
        self.advance();
        let mut vars = vec![self.identifier("variable")?];
        while *self.peek() == Tok::Comma {
            self.advance();
            vars.push(self.identifier("variable")?);
        }
        self.expect(Tok::Colon, "`:`")?;
        let body = self.formula()?;
        Ok(match kw {
            "cla" => Formula::blind(vars, body),
            "ada" => vars
                .into_iter()
                .rev()
                .fold(body, |acc, v| Formula::choose_all(v, acc)),
            _ => vars
                .into_iter()
                .rev()
                .fold(body, |acc, v| Formula::choose_ex(v, acc)),
        })
    }

    fn annotated(&mut self) -> Result<Formula, ParseError> {
        let inner = self.implication()?;
        if *self.peek() != Tok::At {
            return Ok(inner);
        }
        self.advance();
        self.expect(Tok::LBracket, "`[`")?;
        let mut ctx = vec![self.path()?];
        while *self.peek() == Tok::Comma {
            self.advance();
            ctx.push(self.path()?);
        }
        self.expect(Tok::RBracket, "`]`")?;
        Ok(Formula::with_context(inner, ctx))
    }

    fn implication(&mut self) -> Result<Formula, ParseError> {
        let body = self.conjunction()?;
        if *self.peek() != Tok::Arrow {
            return Ok(body);
        }
        self.advance();
        let head_at = self.pos;
        match self.atom_formula()? {
            Formula::Atom(head) => Ok(Formula::implies(body, head)),
            _ => {
                self.pos = head_at;
                self.error(&["atom (implication heads are single atoms)"])
            }
        }
    }

    fn conjunction(&mut self) -> Result<Formula, ParseError> {
        let mut parts = vec![self.atom_formula()?];
        while *self.peek() == Tok::Amp {
            self.advance();
            parts.push(self.atom_formula()?);
        }
        Ok(Formula::conj(parts))
    }

    fn atom_formula(&mut self) -> Result<Formula, ParseError> {
        match self.peek() {
            Tok::Slash => Ok(Formula::MacroRef(self.path()?)),
            Tok::LParen => {
                self.advance();
                let f = self.formula()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(f)
            }
            Tok::Ident(s) if !KEYWORDS.contains(&s.as_str()) => Ok(Formula::Atom(self.atom()?)),
            _ => self.error(&["atom", "agent path", "`(`"]),
        }
    }

    fn atom(&mut self) -> Result<Atom, ParseError> {
        let predicate = self.identifier("predicate")?;
        let mut args = Vec::new();
        if *self.peek() == Tok::LParen {
            self.advance();
            args.push(self.term()?);
            while *self.peek() == Tok::Comma {
                self.advance();
                args.push(self.term()?);
            }
            self.expect(Tok::RParen, "`)`")?;
        }
        Ok(Atom { predicate, args })
    }

    fn term(&mut self) -> Result<Term, ParseError> {
        let mut t = self.factor()?;
        loop {
            match self.peek() {
                Tok::Plus => {
                    self.advance();
                    let r = self.factor()?;
                    t = Term::plus(t, r);
                }
                Tok::Prime => {
                    self.advance();
                    t = Term::succ(t);
                }
                _ => return Ok(t),
            }
        }
    }

    fn factor(&mut self) -> Result<Term, ParseError> {
        match self.peek().clone() {
            Tok::Nat(n) => {
                self.advance();
                Ok(Term::Nat(n))
            }
            Tok::Ident(s) if !KEYWORDS.contains(&s.as_str()) => {
                self.advance();
                Ok(Term::Var(s))
            }
            Tok::LParen => {
                self.advance();
                let t = self.term()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(t)
            }
            _ => self.error(&["natural number", "variable", "`(`"]),
        }
    }
}
