//! Grounding and exact inference over possible worlds.
//!
//! A ground program is a set of independent [`ChoiceGroup`]s plus deterministic
//! rules. A world picks one outcome (or the residual "none of these") from
//! every group; its weight is the product of the picked weights. The
//! probability of a query is the total weight of worlds whose least model
//! contains it, conditioned on the evidence.
//!
//! Annotated clauses with a body become guarded groups: the choice is made in
//! every world, but the chosen atom only holds where the guard holds. This is
//! the usual rewrite into an auxiliary choice plus guarded rules, kept as one
//! structure so the enumerator can skip choices whose guard is false.

mod ground;
mod infer;

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rulelang::{self, Atom, Term};

pub use ground::ground;
pub use infer::{Engine, ExplainedWorld, Posterior, DEFAULT_ENUMERATION_CAP};

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GroundAtom {
    pub predicate: String,
    pub args: Vec<String>,
}

impl GroundAtom {
    pub fn new<S: Into<String>>(predicate: impl Into<String>, args: impl IntoIterator<Item = S>) -> Self {
        Self {
            predicate: predicate.into(),
            args: args.into_iter().map(Into::into).collect(),
        }
    }

    /// Parses text such as `hasToxidrome(pt,opioid)`.
    pub fn parse(text: &str) -> Option<Self> {
        let program = rulelang::parse(&format!("query({text}).")).ok()?;
        let atom = program.queries.into_iter().next()?;
        Self::from_atom(&atom)
    }

    /// `None` when the atom still contains variables.
    pub fn from_atom(atom: &Atom) -> Option<Self> {
        let args = atom
            .args
            .iter()
            .map(|t| match t {
                Term::Constant(c) => Some(c.clone()),
                Term::Variable(_) => None,
            })
            .collect::<Option<Vec<_>>>()?;
        Some(Self {
            predicate: atom.predicate.clone(),
            args,
        })
    }
}

impl fmt::Display for GroundAtom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.predicate)?;
        if !self.args.is_empty() {
            write!(f, "({})", self.args.join(","))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct AtomId(pub u32);

impl AtomId {
    fn index(self) -> usize {
        self.0 as usize
    }
}

/// One annotated-disjunction instance. Exactly one outcome, or the residual,
/// is selected per world; an outcome atom holds only where every guard atom
/// holds.
#[derive(Debug, Clone, PartialEq)]
pub struct ChoiceGroup {
    pub id: usize,
    /// 1-based index of the source clause.
    pub clause: usize,
    pub outcomes: Vec<(AtomId, f64)>,
    pub residual: f64,
    pub guard: Vec<AtomId>,
}

impl ChoiceGroup {
    pub fn total_weight(&self) -> f64 {
        self.outcomes.iter().map(|(_, w)| w).sum::<f64>() + self.residual
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundRule {
    pub head: AtomId,
    pub body: Vec<AtomId>,
    pub clause: usize,
}

/// Where an atom's truth can come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Deriver {
    Rule(usize),
    Outcome { group: usize, outcome: usize },
}

#[derive(Debug, Clone)]
pub struct GroundProgram {
    atoms: Vec<GroundAtom>,
    index: HashMap<GroundAtom, AtomId>,
    pub groups: Vec<ChoiceGroup>,
    pub rules: Vec<GroundRule>,
    pub evidence: Vec<(AtomId, bool)>,
    pub queries: Vec<AtomId>,
    /// Per atom, in atom-id order.
    derivers: Vec<Vec<Deriver>>,
    /// Position of each atom in a topological order (dependencies first).
    topo_rank: Vec<usize>,
    topo_order: Vec<AtomId>,
}

impl GroundProgram {
    pub fn atom(&self, id: AtomId) -> &GroundAtom {
        &self.atoms[id.index()]
    }

    pub fn lookup(&self, atom: &GroundAtom) -> Option<AtomId> {
        self.index.get(atom).copied()
    }

    pub fn atoms(&self) -> impl Iterator<Item = (AtomId, &GroundAtom)> {
        self.atoms
            .iter()
            .enumerate()
            .map(|(i, a)| (AtomId(i as u32), a))
    }

    pub fn atom_count(&self) -> usize {
        self.atoms.len()
    }

    /// True when no rule or choice can make the atom hold; such atoms are
    /// supplied facts, true exactly when asserted by evidence.
    pub fn is_input(&self, id: AtomId) -> bool {
        self.derivers[id.index()].is_empty()
    }

    pub(crate) fn derivers(&self, id: AtomId) -> &[Deriver] {
        &self.derivers[id.index()]
    }

    pub(crate) fn topo_rank(&self, id: AtomId) -> usize {
        self.topo_rank[id.index()]
    }

    pub(crate) fn topo_order(&self) -> &[AtomId] {
        &self.topo_order
    }

    pub fn describe_rule(&self, rule: &GroundRule) -> String {
        let body: Vec<String> = rule.body.iter().map(|b| self.atom(*b).to_string()).collect();
        if body.is_empty() {
            format!("{}.", self.atom(rule.head))
        } else {
            format!("{} :- {}.", self.atom(rule.head), body.join(", "))
        }
    }

    pub fn describe_choice(&self, group: usize, outcome: usize) -> String {
        let g = &self.groups[group];
        let (atom, weight) = g.outcomes[outcome];
        let guard: Vec<String> = g.guard.iter().map(|b| self.atom(*b).to_string()).collect();
        if guard.is_empty() {
            format!("{weight}::{}.", self.atom(atom))
        } else {
            format!("{weight}::{} :- {}.", self.atom(atom), guard.join(", "))
        }
    }
}

/// A complete selection: `selection[g]` is the chosen outcome index of group
/// `g`, or `None` for the residual.
#[derive(Debug, Clone, PartialEq)]
pub struct World {
    pub selection: Vec<Option<usize>>,
    pub weight: f64,
}

impl World {
    /// Builds a world and computes its weight from `program`.
    pub fn new(program: &GroundProgram, selection: Vec<Option<usize>>) -> Self {
        let weight = program
            .groups
            .iter()
            .zip(&selection)
            .map(|(g, s)| match s {
                Some(i) => g.outcomes[*i].1,
                None => g.residual,
            })
            .product();
        Self { selection, weight }
    }
}

/// True iff `atom` is in the least model of `world`. Input atoms hold when the
/// program's own evidence asserts them; unknown atoms are false.
pub fn holds(world: &World, program: &GroundProgram, atom: &GroundAtom) -> bool {
    let Some(target) = program.lookup(atom) else {
        return false;
    };
    let mut value = vec![false; program.atom_count()];
    for &(id, v) in &program.evidence {
        if program.is_input(id) {
            value[id.index()] = v;
        }
    }
    for &id in program.topo_order() {
        if program.is_input(id) {
            continue;
        }
        value[id.index()] = program.derivers(id).iter().any(|d| match *d {
            Deriver::Rule(r) => program.rules[r].body.iter().all(|b| value[b.index()]),
            Deriver::Outcome { group, outcome } => {
                world.selection[group] == Some(outcome)
                    && program.groups[group].guard.iter().all(|b| value[b.index()])
            }
        });
    }
    value[target.index()]
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GroundingError {
    #[error("no individuals to ground over")]
    NoIndividuals,
    #[error("cyclic dependency through `{0}`")]
    Cycle(String),
    #[error("clause {clause} (`{head}`): probability variable `{var}` has no value")]
    Unresolvable { clause: usize, head: String, var: String },
    #[error("clause {clause} (`{head}`): weights sum to {mass} after scaling")]
    MassExceeded { clause: usize, head: String, mass: f64 },
    #[error("clause {clause} (`{head}`): weight {weight} outside [0,1] after scaling")]
    WeightOutOfRange { clause: usize, head: String, weight: f64 },
    #[error("evidence atom `{0}` is not ground")]
    NonGroundEvidence(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum InferenceError {
    #[error("{groups} choice groups exceed the enumeration cap of {cap}")]
    CapExceeded { groups: usize, cap: usize },
    #[error("inconsistent evidence")]
    InconsistentEvidence,
    #[error("no labels given")]
    NoLabels,
}
