//! Lexer, parser and printer for the probabilistic rule language.
//!
//! The language is a small subset of ProbLog:
//!
//! ```text
//! 0.10::salivation(X,decreased); 0.10::salivation(X,increased); 0.80::salivation(X,usual).
//! 4*P::hasToxidrome(X,sympathomimetic); P::hasToxidrome(X,serotonergic) :-
//!     mentalStatus(X,agitated), P is 0.2.
//! hasToxidrome(X,cholinergic) :- salivation(X,increased), pupilDiameter(X,small).
//! query(hasToxidrome(pt,cholinergic)).
//! evidence(salivation(pt,increased), true).
//! ```
//!
//! The full grammar is in `docs/grammar.md`.

mod ast;
mod lexer;
mod parser;
mod printer;

use thiserror::Error;

pub use ast::{Atom, Clause, Literal, ProbExpr, Program, Term};
pub use lexer::{tokenize, Token, TokenKind};
pub use parser::{parse_program, MASS_TOLERANCE};
pub use printer::{clause_to_string, print_program};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RuleLangError {
    #[error("{line}:{column}: unexpected character `{found}`")]
    Lex {
        line: usize,
        column: usize,
        found: char,
    },
    #[error("{line}:{column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    /// `clause` is 1-based; 0 refers to a `query`/`evidence` directive.
    #[error("clause {clause} (`{head}`): {message}")]
    Semantic {
        clause: usize,
        head: String,
        message: String,
    },
    #[error("input is not valid UTF-8")]
    Encoding,
}

/// Tokenizes and parses `source`.
pub fn parse(source: &str) -> Result<Program, RuleLangError> {
    parse_program(&tokenize(source)?)
}

/// Like [`parse`], for raw bytes of unknown encoding.
pub fn parse_bytes(source: &[u8]) -> Result<Program, RuleLangError> {
    let text = std::str::from_utf8(source).map_err(|_| RuleLangError::Encoding)?;
    parse(text)
}
