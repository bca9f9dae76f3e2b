use std::fmt::Write;

use super::ast::{Clause, Program};

/// Canonical text for a program: one statement per line, clauses first, then
/// `query` and `evidence` directives. Parsing the output yields the same
/// [`Program`].
pub fn print_program(program: &Program) -> String {
    let mut out = String::new();
    for clause in &program.clauses {
        write_clause(&mut out, clause);
        out.push('\n');
    }
    for query in &program.queries {
        let _ = writeln!(out, "query({query}).");
    }
    for (atom, value) in &program.evidence {
        let _ = writeln!(out, "evidence({atom}, {value}).");
    }
    out
}

pub fn clause_to_string(clause: &Clause) -> String {
    let mut out = String::new();
    write_clause(&mut out, clause);
    out
}

fn write_clause(out: &mut String, clause: &Clause) {
    if clause.deterministic {
        let _ = write!(out, "{}", clause.head[0].1);
    } else {
        for (i, (prob, atom)) in clause.head.iter().enumerate() {
            if i > 0 {
                out.push_str("; ");
            }
            let _ = write!(out, "{prob}::{atom}");
        }
    }
    if !clause.body.is_empty() {
        out.push_str(" :- ");
        for (i, lit) in clause.body.iter().enumerate() {
            if i > 0 {
                out.push_str(", ");
            }
            let _ = write!(out, "{lit}");
        }
    }
    out.push('.');
}
