use std::collections::{BTreeMap, HashMap, HashSet};

use super::{AtomId, ChoiceGroup, Deriver, GroundAtom, GroundProgram, GroundRule, GroundingError};
use crate::rulelang::{clause_to_string, Atom, Clause, ProbExpr, Program, Term, MASS_TOLERANCE};

type Substitution = BTreeMap<String, String>;

/// Instantiates `program` over `individuals`.
///
/// Body atoms whose predicate some clause defines are joined against the
/// atoms that could possibly hold; variables left unbound after the join
/// range over `individuals`. Body atoms of undefined predicates become input
/// atoms, true only when asserted as evidence.
pub fn ground(program: &Program, individuals: &[String]) -> Result<GroundProgram, GroundingError> {
    if individuals.is_empty() {
        return Err(GroundingError::NoIndividuals);
    }
    let defined: HashSet<&str> = program
        .clauses
        .iter()
        .flat_map(|c| c.head.iter().map(|(_, a)| a.predicate.as_str()))
        .collect();

    // Fixpoint over the possible atoms; a clause instance is recorded once.
    let mut possible: HashMap<String, Vec<Vec<String>>> = HashMap::new();
    let mut possible_set: HashSet<GroundAtom> = HashSet::new();
    let mut seen: HashSet<(usize, Vec<(String, String)>)> = HashSet::new();
    let mut instances: Vec<(usize, Substitution)> = Vec::new();
    loop {
        let mut changed = false;
        for (ci, clause) in program.clauses.iter().enumerate() {
            for subst in instantiate(clause, &defined, &possible, individuals) {
                let key = (ci, subst.clone().into_iter().collect::<Vec<_>>());
                if !seen.insert(key) {
                    continue;
                }
                for (_, head) in &clause.head {
                    let g = apply(head, &subst);
                    if possible_set.insert(g.clone()) {
                        possible.entry(g.predicate).or_default().push(g.args);
                    }
                }
                instances.push((ci, subst));
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    instances.sort_by_key(|(ci, _)| *ci);

    let mut builder = Builder::default();
    for (ci, subst) in &instances {
        let clause = &program.clauses[*ci];
        let index = ci + 1;
        let body: Vec<AtomId> = clause
            .body_atoms()
            .map(|a| builder.intern(apply(a, subst)))
            .collect();
        if clause.deterministic {
            let head = builder.intern(apply(&clause.head[0].1, subst));
            builder.rules.push(GroundRule {
                head,
                body,
                clause: index,
            });
            continue;
        }
        let mut outcomes = Vec::with_capacity(clause.head.len());
        let mut mass = 0.0;
        for (prob, atom) in &clause.head {
            let weight = resolve(prob, clause, index)?;
            if !(0.0..=1.0).contains(&weight) {
                return Err(GroundingError::WeightOutOfRange {
                    clause: index,
                    head: clause_to_string(clause),
                    weight,
                });
            }
            mass += weight;
            outcomes.push((builder.intern(apply(atom, subst)), weight));
        }
        if mass > 1.0 + MASS_TOLERANCE {
            return Err(GroundingError::MassExceeded {
                clause: index,
                head: clause_to_string(clause),
                mass,
            });
        }
        let id = builder.groups.len();
        builder.groups.push(ChoiceGroup {
            id,
            clause: index,
            outcomes,
            residual: (1.0 - mass).max(0.0),
            guard: body,
        });
    }

    for (atom, value) in &program.evidence {
        let g = GroundAtom::from_atom(atom).ok_or_else(|| GroundingError::NonGroundEvidence(atom.to_string()))?;
        let id = builder.intern(g);
        builder.evidence.push((id, *value));
    }
    for query in &program.queries {
        match GroundAtom::from_atom(query) {
            Some(g) => {
                let id = builder.intern(g);
                builder.queries.push(id);
            }
            None => {
                let mut matches: Vec<GroundAtom> = possible_set
                    .iter()
                    .filter(|g| unify(query, g).is_some())
                    .cloned()
                    .collect();
                matches.sort();
                for g in matches {
                    let id = builder.intern(g);
                    builder.queries.push(id);
                }
            }
        }
    }
    builder.finish()
}

fn resolve(prob: &ProbExpr, clause: &Clause, index: usize) -> Result<f64, GroundingError> {
    match prob {
        ProbExpr::Const(v) => Ok(*v),
        ProbExpr::Scaled { coefficient, var } => clause
            .binding(var)
            .map(|v| coefficient * v)
            .ok_or_else(|| GroundingError::Unresolvable {
                clause: index,
                head: clause_to_string(clause),
                var: var.clone(),
            }),
    }
}

fn apply(atom: &Atom, subst: &Substitution) -> GroundAtom {
    GroundAtom {
        predicate: atom.predicate.clone(),
        args: atom
            .args
            .iter()
            .map(|t| match t {
                Term::Constant(c) => c.clone(),
                Term::Variable(v) => subst[v].clone(),
            })
            .collect(),
    }
}

fn unify(atom: &Atom, ground: &GroundAtom) -> Option<Substitution> {
    unify_args(atom, &ground.predicate, &ground.args, Substitution::new())
}

fn unify_args(atom: &Atom, predicate: &str, args: &[String], mut subst: Substitution) -> Option<Substitution> {
    if atom.predicate != predicate || atom.args.len() != args.len() {
        return None;
    }
    for (term, value) in atom.args.iter().zip(args) {
        match term {
            Term::Constant(c) if c != value => return None,
            Term::Constant(_) => {}
            Term::Variable(v) => match subst.get(v) {
                Some(bound) if bound != value => return None,
                Some(_) => {}
                None => {
                    subst.insert(v.clone(), value.clone());
                }
            },
        }
    }
    Some(subst)
}

/// All substitutions for the clause's atom variables given the current
/// possible atoms.
fn instantiate(
    clause: &Clause,
    defined: &HashSet<&str>,
    possible: &HashMap<String, Vec<Vec<String>>>,
    individuals: &[String],
) -> Vec<Substitution> {
    let joined: Vec<&Atom> = clause
        .body_atoms()
        .filter(|a| defined.contains(a.predicate.as_str()))
        .collect();
    let mut partial = vec![Substitution::new()];
    for atom in joined {
        let candidates = possible.get(&atom.predicate).map(Vec::as_slice).unwrap_or(&[]);
        partial = partial
            .into_iter()
            .flat_map(|s| {
                candidates
                    .iter()
                    .filter_map(move |args| unify_args(atom, &atom.predicate, args, s.clone()))
            })
            .collect();
        if partial.is_empty() {
            return partial;
        }
    }

    let mut free: Vec<&str> = clause
        .head
        .iter()
        .map(|(_, a)| a)
        .chain(clause.body_atoms())
        .flat_map(|a| a.variables())
        .collect();
    free.sort_unstable();
    free.dedup();
    for var in free {
        partial = partial
            .into_iter()
            .flat_map(|s| {
                if s.contains_key(var) {
                    vec![s]
                } else {
                    individuals
                        .iter()
                        .map(|ind| {
                            let mut s = s.clone();
                            s.insert(var.to_string(), ind.clone());
                            s
                        })
                        .collect()
                }
            })
            .collect();
    }
    partial
}

#[derive(Default)]
struct Builder {
    atoms: Vec<GroundAtom>,
    index: HashMap<GroundAtom, AtomId>,
    groups: Vec<ChoiceGroup>,
    rules: Vec<GroundRule>,
    evidence: Vec<(AtomId, bool)>,
    queries: Vec<AtomId>,
}

impl Builder {
    fn intern(&mut self, atom: GroundAtom) -> AtomId {
        if let Some(id) = self.index.get(&atom) {
            return *id;
        }
        let id = AtomId(self.atoms.len() as u32);
        self.index.insert(atom.clone(), id);
        self.atoms.push(atom);
        id
    }

    fn finish(self) -> Result<GroundProgram, GroundingError> {
        let n = self.atoms.len();
        let mut derivers = vec![Vec::new(); n];
        for (r, rule) in self.rules.iter().enumerate() {
            derivers[rule.head.index()].push(Deriver::Rule(r));
        }
        for (g, group) in self.groups.iter().enumerate() {
            for (o, (atom, _)) in group.outcomes.iter().enumerate() {
                derivers[atom.index()].push(Deriver::Outcome { group: g, outcome: o });
            }
        }

        // Depth-first topological sort; dependencies of an atom are the bodies
        // of its rules and the guards of its choices.
        let deps = |id: usize| -> Vec<AtomId> {
            derivers[id]
                .iter()
                .flat_map(|d| match *d {
                    Deriver::Rule(r) => self.rules[r].body.clone(),
                    Deriver::Outcome { group, .. } => self.groups[group].guard.clone(),
                })
                .collect()
        };
        #[derive(Clone, Copy, PartialEq)]
        enum Mark {
            New,
            Active,
            Done,
        }
        let mut mark = vec![Mark::New; n];
        let mut order = Vec::with_capacity(n);
        for root in 0..n {
            if mark[root] != Mark::New {
                continue;
            }
            let mut stack: Vec<(usize, Vec<AtomId>)> = vec![(root, deps(root))];
            mark[root] = Mark::Active;
            while let Some((node, pending)) = stack.last_mut() {
                match pending.pop() {
                    Some(next) => {
                        let next = next.index();
                        match mark[next] {
                            Mark::Active => return Err(GroundingError::Cycle(self.atoms[next].to_string())),
                            Mark::Done => {}
                            Mark::New => {
                                mark[next] = Mark::Active;
                                let d = deps(next);
                                stack.push((next, d));
                            }
                        }
                    }
                    None => {
                        let node = *node;
                        mark[node] = Mark::Done;
                        order.push(AtomId(node as u32));
                        stack.pop();
                    }
                }
            }
        }
        let mut topo_rank = vec![0; n];
        for (rank, id) in order.iter().enumerate() {
            topo_rank[id.index()] = rank;
        }

        Ok(GroundProgram {
            atoms: self.atoms,
            index: self.index,
            groups: self.groups,
            rules: self.rules,
            evidence: self.evidence,
            queries: self.queries,
            derivers,
            topo_rank,
            topo_order: order,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rulelang::parse;

    fn pt() -> Vec<String> {
        vec!["pt".to_string()]
    }

    fn atom(text: &str) -> GroundAtom {
        GroundAtom::parse(text).unwrap()
    }

    #[test]
    fn link_clause_becomes_guarded_group() {
        let p = parse(
            "4*P::hasToxidrome(X,sympathomimetic); P::hasToxidrome(X,serotonergic) :- mentalStatus(X,agitated), P is 0.2.",
        )
        .unwrap();
        let gp = ground(&p, &pt()).unwrap();
        assert_eq!(gp.groups.len(), 1);
        let g = &gp.groups[0];
        let outcomes: Vec<(GroundAtom, f64)> = g.outcomes.iter().map(|(a, w)| (gp.atom(*a).clone(), *w)).collect();
        assert_eq!(
            outcomes,
            vec![
                (atom("hasToxidrome(pt,sympathomimetic)"), 4.0 * 0.2),
                (atom("hasToxidrome(pt,serotonergic)"), 0.2),
            ]
        );
        assert!(g.residual.abs() < 1e-12);
        assert_eq!(g.guard.len(), 1);
        assert_eq!(gp.atom(g.guard[0]), &atom("mentalStatus(pt,agitated)"));
        assert!(gp.is_input(g.guard[0]));
    }

    #[test]
    fn prior_clause_becomes_unconditional_group() {
        let p = parse("0.10::salivation(X,decreased); 0.10::salivation(X,increased); 0.80::salivation(X,usual).").unwrap();
        let gp = ground(&p, &pt()).unwrap();
        assert_eq!(gp.groups.len(), 1);
        let g = &gp.groups[0];
        let weights: Vec<f64> = g.outcomes.iter().map(|(_, w)| *w).collect();
        assert_eq!(weights, vec![0.10, 0.10, 0.80]);
        assert!(g.guard.is_empty());
        assert!(g.residual.abs() < 1e-12);
    }

    #[test]
    fn empty_program() {
        let gp = ground(&Program::default(), &pt()).unwrap();
        assert!(gp.groups.is_empty());
        assert!(gp.rules.is_empty());
    }

    #[test]
    fn body_join_binds_variables() {
        let p = parse("0.5::r(a). 0.5::r(b). 0.4::q(Y) :- r(Y). s :- q(a).").unwrap();
        let gp = ground(&p, &pt()).unwrap();
        // two facts, two guarded instances of the middle clause
        assert_eq!(gp.groups.len(), 4);
        assert_eq!(gp.rules.len(), 1);
        assert!(gp.lookup(&atom("q(b)")).is_some());
        assert!(gp.lookup(&atom("q(pt)")).is_none());
    }

    #[test]
    fn rejects_cycles_and_bad_mass() {
        let p = parse("0.5::c. a :- c. a :- b. b :- a.").unwrap();
        assert!(matches!(ground(&p, &pt()), Err(GroundingError::Cycle(_))));

        let p = parse("3*P::a; P::b :- c, P is 0.3.").unwrap();
        match ground(&p, &pt()) {
            Err(GroundingError::MassExceeded { clause, .. }) => assert_eq!(clause, 1),
            other => panic!("unexpected {other:?}"),
        }
        let p = parse("5*P::a :- c, P is 0.3.").unwrap();
        assert!(matches!(ground(&p, &pt()), Err(GroundingError::WeightOutOfRange { .. })));
        assert!(matches!(ground(&p, &[]), Err(GroundingError::NoIndividuals)));
    }

    #[test]
    fn non_ground_query_expands() {
        let p = parse("0.5::h(X,a); 0.5::h(X,b). query(h(pt,T)).").unwrap();
        let gp = ground(&p, &pt()).unwrap();
        let queries: Vec<String> = gp.queries.iter().map(|q| gp.atom(*q).to_string()).collect();
        assert_eq!(queries, vec!["h(pt,a)", "h(pt,b)"]);
    }
}
