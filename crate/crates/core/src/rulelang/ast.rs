use std::fmt;

/// A constant (`pt`, `increased`) or a logic variable (`X`, `P`).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Term {
    Constant(String),
    Variable(String),
}

impl Term {
    pub fn is_variable(&self) -> bool {
        matches!(self, Term::Variable(_))
    }

    pub fn name(&self) -> &str {
        match self {
            Term::Constant(name) | Term::Variable(name) => name,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Atom {
    pub predicate: String,
    pub args: Vec<Term>,
}

impl Atom {
    pub fn new(predicate: impl Into<String>, args: Vec<Term>) -> Self {
        Self {
            predicate: predicate.into(),
            args,
        }
    }

    pub fn arity(&self) -> usize {
        self.args.len()
    }

    pub fn is_ground(&self) -> bool {
        self.args.iter().all(|t| !t.is_variable())
    }

    pub fn variables(&self) -> impl Iterator<Item = &str> {
        self.args.iter().filter_map(|t| match t {
            Term::Variable(v) => Some(v.as_str()),
            Term::Constant(_) => None,
        })
    }
}

/// Head annotation: a literal probability, or `coefficient * Var` where the
/// variable is bound by an `is` literal in the body.
#[derive(Debug, Clone, PartialEq)]
pub enum ProbExpr {
    Const(f64),
    Scaled { coefficient: f64, var: String },
}

#[derive(Debug, Clone, PartialEq)]
pub enum Literal {
    Atom(Atom),
    /// `Var is value`
    Bind { var: String, value: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Clause {
    pub head: Vec<(ProbExpr, Atom)>,
    pub body: Vec<Literal>,
    /// Single unannotated head atom (`h :- b.` or `h.`).
    pub deterministic: bool,
}

impl Clause {
    pub fn body_atoms(&self) -> impl Iterator<Item = &Atom> {
        self.body.iter().filter_map(|l| match l {
            Literal::Atom(a) => Some(a),
            Literal::Bind { .. } => None,
        })
    }

    pub fn binding(&self, var: &str) -> Option<f64> {
        self.body.iter().find_map(|l| match l {
            Literal::Bind { var: v, value } if v == var => Some(*value),
            _ => None,
        })
    }

    /// An annotated clause without atom body, e.g. a prior over a finding's values.
    pub fn is_choice_fact(&self) -> bool {
        !self.deterministic && self.body_atoms().next().is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Program {
    pub clauses: Vec<Clause>,
    pub queries: Vec<Atom>,
    pub evidence: Vec<(Atom, bool)>,
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.predicate)?;
        if !self.args.is_empty() {
            f.write_str("(")?;
            for (i, arg) in self.args.iter().enumerate() {
                if i > 0 {
                    f.write_str(",")?;
                }
                write!(f, "{arg}")?;
            }
            f.write_str(")")?;
        }
        Ok(())
    }
}

impl fmt::Display for ProbExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProbExpr::Const(v) => write!(f, "{v}"),
            ProbExpr::Scaled { coefficient, var } if *coefficient == 1.0 => f.write_str(var),
            ProbExpr::Scaled { coefficient, var } => write!(f, "{coefficient}*{var}"),
        }
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Literal::Atom(a) => write!(f, "{a}"),
            Literal::Bind { var, value } => write!(f, "{var} is {value}"),
        }
    }
}
