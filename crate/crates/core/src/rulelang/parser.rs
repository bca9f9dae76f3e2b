use std::collections::{BTreeMap, HashMap, HashSet};

use super::ast::{Atom, Clause, Literal, ProbExpr, Program, Term};
use super::lexer::{Token, TokenKind};
use super::RuleLangError;

/// Tolerance for annotated-disjunction mass above one.
pub const MASS_TOLERANCE: f64 = 1e-9;

pub fn parse_program(tokens: &[Token]) -> Result<Program, RuleLangError> {
    let mut parser = Parser { tokens, pos: 0 };
    let mut program = Program::default();
    while !parser.at_end() {
        parser.statement(&mut program)?;
    }
    validate(&program)?;
    Ok(program)
}

struct Parser<'a> {
    tokens: &'a [Token],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn at_end(&self) -> bool {
        self.pos >= self.tokens.len()
    }

    fn peek(&self) -> Option<&'a TokenKind> {
        self.tokens.get(self.pos).map(|t| &t.kind)
    }

    fn peek_at(&self, offset: usize) -> Option<&'a TokenKind> {
        self.tokens.get(self.pos + offset).map(|t| &t.kind)
    }

    fn error(&self, message: impl Into<String>) -> RuleLangError {
        let (line, column) = match self.tokens.get(self.pos) {
            Some(t) => (t.line, t.column),
            None => self
                .tokens
                .last()
                .map(|t| (t.line, t.column + 1))
                .unwrap_or((1, 1)),
        };
        let found = match self.peek() {
            Some(kind) => describe(kind),
            None => "end of input".to_string(),
        };
        RuleLangError::Parse {
            line,
            column,
            message: format!("{}, found {found}", message.into()),
        }
    }

    fn expect(&mut self, kind: &TokenKind, what: &str) -> Result<(), RuleLangError> {
        if self.peek() == Some(kind) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.error(format!("expected {what}")))
        }
    }

    fn statement(&mut self, program: &mut Program) -> Result<(), RuleLangError> {
        if let (Some(TokenKind::Sym(name)), Some(TokenKind::LParen)) = (self.peek(), self.peek_at(1)) {
            match name.as_str() {
                "query" => {
                    self.pos += 2;
                    let atom = self.atom()?;
                    self.expect(&TokenKind::RParen, "`)`")?;
                    self.expect(&TokenKind::Dot, "`.`")?;
                    program.queries.push(atom);
                    return Ok(());
                }
                "evidence" => {
                    self.pos += 2;
                    let atom = self.atom()?;
                    let mut value = true;
                    if self.peek() == Some(&TokenKind::Comma) {
                        self.pos += 1;
                        value = match self.peek() {
                            Some(TokenKind::Sym(s)) if s == "true" => true,
                            Some(TokenKind::Sym(s)) if s == "false" => false,
                            _ => return Err(self.error("expected `true` or `false`")),
                        };
                        self.pos += 1;
                    }
                    self.expect(&TokenKind::RParen, "`)`")?;
                    self.expect(&TokenKind::Dot, "`.`")?;
                    program.evidence.push((atom, value));
                    return Ok(());
                }
                _ => {}
            }
        }
        let clause = self.clause()?;
        check_clause(&clause, program.clauses.len() + 1)?;
        program.clauses.push(clause);
        Ok(())
    }

    fn clause(&mut self) -> Result<Clause, RuleLangError> {
        let (head, deterministic) = match self.peek() {
            Some(TokenKind::Sym(_)) => (vec![(ProbExpr::Const(1.0), self.atom()?)], true),
            Some(TokenKind::Num(_)) | Some(TokenKind::Var(_)) => {
                let mut head = vec![self.annotated()?];
                while self.peek() == Some(&TokenKind::Semi) {
                    self.pos += 1;
                    head.push(self.annotated()?);
                }
                (head, false)
            }
            _ => return Err(self.error("expected a clause head")),
        };

        let mut body = Vec::new();
        if self.peek() == Some(&TokenKind::ColonDash) {
            self.pos += 1;
            body.push(self.literal()?);
            while self.peek() == Some(&TokenKind::Comma) {
                self.pos += 1;
                body.push(self.literal()?);
            }
        }
        self.expect(&TokenKind::Dot, "`.`")?;
        Ok(Clause {
            head,
            body,
            deterministic,
        })
    }

    fn annotated(&mut self) -> Result<(ProbExpr, Atom), RuleLangError> {
        let prob = match (self.peek(), self.peek_at(1)) {
            (Some(TokenKind::Num(c)), Some(TokenKind::Star)) => {
                self.pos += 2;
                match self.peek() {
                    Some(TokenKind::Var(v)) => {
                        self.pos += 1;
                        ProbExpr::Scaled {
                            coefficient: *c,
                            var: v.clone(),
                        }
                    }
                    _ => return Err(self.error("expected a variable after `*`")),
                }
            }
            (Some(TokenKind::Num(v)), _) => {
                self.pos += 1;
                ProbExpr::Const(*v)
            }
            (Some(TokenKind::Var(v)), _) => {
                self.pos += 1;
                ProbExpr::Scaled {
                    coefficient: 1.0,
                    var: v.clone(),
                }
            }
            _ => return Err(self.error("expected a probability annotation")),
        };
        self.expect(&TokenKind::ColonColon, "`::`")?;
        Ok((prob, self.atom()?))
    }

    fn literal(&mut self) -> Result<Literal, RuleLangError> {
        match (self.peek(), self.peek_at(1)) {
            (Some(TokenKind::Var(v)), Some(TokenKind::Is)) => {
                self.pos += 2;
                match self.peek() {
                    Some(TokenKind::Num(value)) => {
                        self.pos += 1;
                        Ok(Literal::Bind {
                            var: v.clone(),
                            value: *value,
                        })
                    }
                    _ => Err(self.error("expected a number after `is`")),
                }
            }
            _ => Ok(Literal::Atom(self.atom()?)),
        }
    }

    fn atom(&mut self) -> Result<Atom, RuleLangError> {
        let predicate = match self.peek() {
            Some(TokenKind::Sym(s)) => s.clone(),
            _ => return Err(self.error("expected a predicate symbol")),
        };
        self.pos += 1;
        let mut args = Vec::new();
        if self.peek() == Some(&TokenKind::LParen) {
            self.pos += 1;
            args.push(self.term()?);
            while self.peek() == Some(&TokenKind::Comma) {
                self.pos += 1;
                args.push(self.term()?);
            }
            self.expect(&TokenKind::RParen, "`)`")?;
        }
        Ok(Atom { predicate, args })
    }

    fn term(&mut self) -> Result<Term, RuleLangError> {
        let term = match self.peek() {
            Some(TokenKind::Sym(s)) => Term::Constant(s.clone()),
            Some(TokenKind::Var(v)) => Term::Variable(v.clone()),
            _ => return Err(self.error("expected a constant or variable")),
        };
        self.pos += 1;
        Ok(term)
    }
}

fn describe(kind: &TokenKind) -> String {
    match kind {
        TokenKind::Sym(s) => format!("symbol `{s}`"),
        TokenKind::Var(v) => format!("variable `{v}`"),
        TokenKind::Num(n) => format!("number `{n}`"),
        TokenKind::ColonColon => "`::`".into(),
        TokenKind::ColonDash => "`:-`".into(),
        TokenKind::Semi => "`;`".into(),
        TokenKind::Comma => "`,`".into(),
        TokenKind::Dot => "`.`".into(),
        TokenKind::LParen => "`(`".into(),
        TokenKind::RParen => "`)`".into(),
        TokenKind::Is => "`is`".into(),
        TokenKind::Star => "`*`".into(),
    }
}

fn semantic(index: usize, clause: &Clause, message: impl Into<String>) -> RuleLangError {
    RuleLangError::Semantic {
        clause: index,
        head: head_text(clause),
        message: message.into(),
    }
}

fn head_text(clause: &Clause) -> String {
    clause
        .head
        .iter()
        .map(|(_, a)| a.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

/// Per-clause invariants; `index` is 1-based.
fn check_clause(clause: &Clause, index: usize) -> Result<(), RuleLangError> {
    let mut bindings: HashMap<&str, usize> = HashMap::new();
    for lit in &clause.body {
        if let Literal::Bind { var, value } = lit {
            *bindings.entry(var.as_str()).or_default() += 1;
            if !value.is_finite() {
                return Err(semantic(index, clause, format!("`{var}` bound to a non-finite value")));
            }
        }
    }
    if let Some((var, _)) = bindings.iter().find(|(_, n)| **n > 1) {
        return Err(semantic(index, clause, format!("variable `{var}` bound more than once")));
    }
    let atom_vars: HashSet<&str> = clause
        .head
        .iter()
        .map(|(_, a)| a)
        .chain(clause.body_atoms())
        .flat_map(|a| a.variables())
        .collect();
    if let Some(var) = bindings.keys().find(|v| atom_vars.contains(**v)) {
        return Err(semantic(
            index,
            clause,
            format!("probability variable `{var}` also appears as an atom argument"),
        ));
    }

    let mut const_mass = 0.0;
    let mut all_const = true;
    for (prob, _) in &clause.head {
        match prob {
            ProbExpr::Const(v) => {
                if !(0.0..=1.0).contains(v) {
                    return Err(semantic(index, clause, format!("probability {v} outside [0,1]")));
                }
                const_mass += v;
            }
            ProbExpr::Scaled { coefficient, var } => {
                all_const = false;
                if !(*coefficient > 0.0) || !coefficient.is_finite() {
                    return Err(semantic(
                        index,
                        clause,
                        format!("coefficient {coefficient} must be positive"),
                    ));
                }
                if !bindings.contains_key(var.as_str()) {
                    return Err(semantic(
                        index,
                        clause,
                        format!("probability variable `{var}` is not bound by an `is` literal"),
                    ));
                }
            }
        }
    }
    if all_const && const_mass > 1.0 + MASS_TOLERANCE {
        return Err(semantic(
            index,
            clause,
            format!("head probabilities sum to {const_mass}, above 1"),
        ));
    }

    for (i, (_, a)) in clause.head.iter().enumerate() {
        if clause.head[..i].iter().any(|(_, b)| a == b) {
            return Err(semantic(index, clause, format!("head atom `{a}` repeated")));
        }
    }
    Ok(())
}

/// Program-wide invariants: fixed arity per predicate, and no predicate both
/// derived by a deterministic clause and chosen by an annotated fact.
fn validate(program: &Program) -> Result<(), RuleLangError> {
    let mut arity: BTreeMap<String, usize> = BTreeMap::new();
    let mut check = |atom: &Atom, index: usize, clause: Option<&Clause>| -> Result<(), RuleLangError> {
        let expected = *arity.entry(atom.predicate.clone()).or_insert(atom.arity());
        if expected == atom.arity() {
            return Ok(());
        }
        let message = format!(
            "predicate `{}` used with arity {} but first used with arity {expected}",
            atom.predicate,
            atom.arity()
        );
        Err(match clause {
            Some(c) => semantic(index, c, message),
            None => RuleLangError::Semantic {
                clause: 0,
                head: atom.to_string(),
                message,
            },
        })
    };
    for (i, clause) in program.clauses.iter().enumerate() {
        for atom in clause.head.iter().map(|(_, a)| a).chain(clause.body_atoms()) {
            check(atom, i + 1, Some(clause))?;
        }
    }
    for atom in program.queries.iter().chain(program.evidence.iter().map(|(a, _)| a)) {
        check(atom, 0, None)?;
    }

    let derived: HashSet<&str> = program
        .clauses
        .iter()
        .filter(|c| c.deterministic)
        .map(|c| c.head[0].1.predicate.as_str())
        .collect();
    for (i, clause) in program.clauses.iter().enumerate() {
        if !clause.is_choice_fact() {
            continue;
        }
        if let Some((_, atom)) = clause.head.iter().find(|(_, a)| derived.contains(a.predicate.as_str())) {
            return Err(semantic(
                i + 1,
                clause,
                format!(
                    "predicate `{}` is both chosen by a probabilistic fact and derived by a rule",
                    atom.predicate
                ),
            ));
        }
    }
    Ok(())
}
