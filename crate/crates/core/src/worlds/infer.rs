use std::collections::HashSet;

use serde::Serialize;

use super::{AtomId, Deriver, GroundAtom, GroundProgram, InferenceError};

pub const DEFAULT_ENUMERATION_CAP: usize = 20;

/// Exact inference over a ground program.
///
/// Each query enumerates the worlds of the sub-program relevant to the query
/// and evidence: groups that cannot reach either are summed out (their weights
/// total one), outcomes that reach neither are merged into a single branch, and
/// a guarded group whose guard is already false contributes its total weight
/// without branching. Every remaining world is visited in a fixed order, so
/// results are bitwise reproducible.
#[derive(Debug, Clone, Copy)]
pub struct Engine<'a> {
    program: &'a GroundProgram,
    cap: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Posterior {
    /// `P(label | evidence)` per label, in the order given.
    pub entries: Vec<(GroundAtom, f64)>,
    pub evidence_probability: f64,
}

impl Posterior {
    pub fn probability(&self, label: &GroundAtom) -> Option<f64> {
        self.entries.iter().find(|(l, _)| l == label).map(|(_, p)| *p)
    }

    /// Highest entry; exact ties go to the lexicographically smallest label text.
    pub fn argmax(&self) -> &GroundAtom {
        argmax_by_name(self.entries.iter().map(|(l, p)| (l, *p)))
    }

    /// Entries scaled to sum to one, or `None` when every entry is zero.
    pub fn normalized(&self) -> Option<Vec<(GroundAtom, f64)>> {
        let total: f64 = self.entries.iter().map(|(_, p)| p).sum();
        if !(total > 0.0) {
            return None;
        }
        Some(self.entries.iter().map(|(l, p)| (l.clone(), p / total)).collect())
    }
}

pub(crate) fn argmax_by_name<'l, I>(entries: I) -> &'l GroundAtom
where
    I: IntoIterator<Item = (&'l GroundAtom, f64)>,
{
    let mut best: Option<(&GroundAtom, String, f64)> = None;
    for (label, p) in entries {
        let name = label.to_string();
        let better = match &best {
            None => true,
            Some((_, best_name, best_p)) => p > *best_p || (p == *best_p && name < *best_name),
        };
        if better {
            best = Some((label, name, p));
        }
    }
    best.expect("argmax of an empty label set").0
}

/// One world from [`Engine::explain`]. Groups summed out of the enumeration
/// are not listed; a `None` choice means the residual or an outcome that
/// cannot affect the label or evidence.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExplainedWorld {
    pub choices: Vec<(usize, Option<GroundAtom>)>,
    /// Weight conditioned on the evidence.
    pub weight: f64,
    /// Rule and choice instances that derive the label, supports first.
    pub fired: Vec<String>,
}

#[derive(Debug, Clone)]
struct Branch {
    outcome: Option<usize>,
    weight: f64,
}

#[derive(Debug, Clone)]
struct PlannedGroup {
    group: usize,
    branches: Vec<Branch>,
    total: f64,
    /// Atoms to evaluate, in topological order, before testing the guard.
    guard_closure: Vec<AtomId>,
}

struct Plan {
    groups: Vec<PlannedGroup>,
    /// Relevant non-input atoms in topological order.
    order: Vec<AtomId>,
    evidence: Vec<(AtomId, bool)>,
    facts: Vec<AtomId>,
    /// False when the evidence already rules out every world.
    feasible: bool,
}

const UNASSIGNED: usize = usize::MAX;
const MERGED: usize = usize::MAX - 1;

impl<'a> Engine<'a> {
    pub fn new(program: &'a GroundProgram) -> Self {
        Self {
            program,
            cap: DEFAULT_ENUMERATION_CAP,
        }
    }

    pub fn with_cap(mut self, cap: usize) -> Self {
        self.cap = cap;
        self
    }

    pub fn program(&self) -> &'a GroundProgram {
        self.program
    }

    /// `P(query | evidence)`, where the program's own evidence is combined
    /// with `evidence`.
    pub fn probability(&self, query: &GroundAtom, evidence: &[(GroundAtom, bool)]) -> Result<f64, InferenceError> {
        let (z, zq) = self.masses(query, evidence)?;
        Ok(zq / z)
    }

    /// Probability of the evidence alone (the normalizing constant).
    pub fn evidence_probability(&self, evidence: &[(GroundAtom, bool)]) -> Result<f64, InferenceError> {
        let evidence = self.resolve_evidence(evidence)?;
        let plan = self.plan(&[], &evidence)?;
        let mut z = 0.0;
        self.enumerate(&plan, |_, weight, _| z += weight);
        Ok(z)
    }

    /// Sum of the weights of every world enumerated for `query` with no
    /// evidence; one for a well-formed program.
    pub fn enumerated_mass(&self, query: &GroundAtom) -> Result<f64, InferenceError> {
        let targets: Vec<AtomId> = self.program.lookup(query).into_iter().collect();
        let plan = self.plan(&targets, &[])?;
        let mut total = 0.0;
        self.enumerate_all(&plan, |_, weight, _| total += weight);
        Ok(total)
    }

    pub fn posterior(&self, labels: &[GroundAtom], evidence: &[(GroundAtom, bool)]) -> Result<Posterior, InferenceError> {
        if labels.is_empty() {
            return Err(InferenceError::NoLabels);
        }
        let mut entries = Vec::with_capacity(labels.len());
        let mut evidence_probability = 0.0;
        for label in labels {
            let (z, zq) = self.masses(label, evidence)?;
            evidence_probability = z;
            entries.push((label.clone(), zq / z));
        }
        Ok(Posterior {
            entries,
            evidence_probability,
        })
    }

    /// The `top_n` heaviest evidence-consistent worlds in which `label` holds.
    pub fn explain(
        &self,
        label: &GroundAtom,
        evidence: &[(GroundAtom, bool)],
        top_n: usize,
    ) -> Result<Vec<ExplainedWorld>, InferenceError> {
        let evidence = self.resolve_evidence(evidence)?;
        let target = self.program.lookup(label);
        let targets: Vec<AtomId> = target.into_iter().collect();
        let plan = self.plan(&targets, &evidence)?;
        let mut z = 0.0;
        let mut kept: Vec<(f64, Vec<usize>, Vec<bool>)> = Vec::new();
        self.enumerate(&plan, |selection, weight, value| {
            z += weight;
            let Some(t) = target else { return };
            if top_n == 0 || !value[t.0 as usize] {
                return;
            }
            // Keep the list sorted by descending weight; earlier worlds win ties.
            let pos = kept.partition_point(|(w, _, _)| *w >= weight);
            if pos < top_n {
                kept.insert(pos, (weight, selection.to_vec(), value.to_vec()));
                kept.truncate(top_n);
            }
        });
        if !(z > 0.0) {
            return Err(InferenceError::InconsistentEvidence);
        }
        let Some(target) = target else {
            return Ok(Vec::new());
        };
        Ok(kept
            .into_iter()
            .map(|(weight, selection, value)| {
                let choices = plan
                    .groups
                    .iter()
                    .zip(&selection)
                    .filter(|(_, s)| **s != UNASSIGNED)
                    .map(|(pg, &s)| {
                        let group = &self.program.groups[pg.group];
                        let atom = (s < group.outcomes.len()).then(|| self.program.atom(group.outcomes[s].0).clone());
                        (group.id, atom)
                    })
                    .collect();
                ExplainedWorld {
                    choices,
                    weight: weight / z,
                    fired: self.trace(target, &plan, &selection, &value),
                }
            })
            .collect())
    }

    fn masses(&self, query: &GroundAtom, evidence: &[(GroundAtom, bool)]) -> Result<(f64, f64), InferenceError> {
        let evidence = self.resolve_evidence(evidence)?;
        let target = self.program.lookup(query);
        let targets: Vec<AtomId> = target.into_iter().collect();
        let plan = self.plan(&targets, &evidence)?;
        let mut z = 0.0;
        let mut zq = 0.0;
        self.enumerate(&plan, |_, weight, value| {
            z += weight;
            if let Some(t) = target {
                if value[t.0 as usize] {
                    zq += weight;
                }
            }
        });
        if !(z > 0.0) {
            return Err(InferenceError::InconsistentEvidence);
        }
        Ok((z, zq))
    }

    fn resolve_evidence(&self, extra: &[(GroundAtom, bool)]) -> Result<Vec<(AtomId, bool)>, InferenceError> {
        let mut out: Vec<(AtomId, bool)> = self.program.evidence.clone();
        for (atom, value) in extra {
            // Atoms the program never mentions cannot affect any query.
            if let Some(id) = self.program.lookup(atom) {
                out.push((id, *value));
            }
        }
        out.sort();
        out.dedup();
        if out.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(InferenceError::InconsistentEvidence);
        }
        Ok(out)
    }

    fn plan(&self, targets: &[AtomId], evidence: &[(AtomId, bool)]) -> Result<Plan, InferenceError> {
        let p = self.program;
        let n = p.atom_count();

        // Backward closure from the targets and evidence atoms.
        let mut relevant = vec![false; n];
        let mut stack: Vec<AtomId> = targets.iter().copied().chain(evidence.iter().map(|(a, _)| *a)).collect();
        let mut groups_seen = HashSet::new();
        while let Some(a) = stack.pop() {
            if std::mem::replace(&mut relevant[a.index()], true) {
                continue;
            }
            for d in p.derivers(a) {
                match *d {
                    Deriver::Rule(r) => stack.extend(&p.rules[r].body),
                    Deriver::Outcome { group, .. } => {
                        if groups_seen.insert(group) {
                            stack.extend(&p.groups[group].guard);
                        }
                    }
                }
            }
        }

        let mut facts = Vec::new();
        let mut checked = Vec::new();
        for &(a, v) in evidence {
            if p.is_input(a) {
                if v {
                    facts.push(a);
                }
            } else {
                checked.push((a, v));
            }
        }

        let mut group_ids: Vec<usize> = groups_seen.into_iter().collect();
        group_ids.sort_unstable();
        let mut groups = Vec::with_capacity(group_ids.len());
        let mut feasible = true;
        for g in group_ids {
            let group = &p.groups[g];
            let mut branches = Vec::new();
            let mut merged = group.residual;
            for (o, (atom, w)) in group.outcomes.iter().enumerate() {
                if relevant[atom.index()] {
                    branches.push(Branch {
                        outcome: Some(o),
                        weight: *w,
                    });
                } else {
                    merged += w;
                }
            }
            if merged > 0.0 {
                branches.push(Branch {
                    outcome: None,
                    weight: merged,
                });
            }
            let total: f64 = branches.iter().map(|b| b.weight).sum();

            // Evidence on an atom only this unguarded group can produce fixes
            // or forbids the corresponding branch.
            if group.guard.is_empty() {
                let only_here = |atom: AtomId| p.derivers(atom).len() == 1;
                branches.retain(|b| match b.outcome {
                    Some(o) => {
                        let atom = group.outcomes[o].0;
                        !(only_here(atom) && checked.contains(&(atom, false)))
                    }
                    None => true,
                });
                let forced: Vec<usize> = group
                    .outcomes
                    .iter()
                    .enumerate()
                    .filter(|(_, (atom, _))| only_here(*atom) && checked.contains(&(*atom, true)))
                    .map(|(o, _)| o)
                    .collect();
                if forced.len() > 1 {
                    feasible = false;
                } else if let Some(&o) = forced.first() {
                    branches.retain(|b| b.outcome == Some(o));
                }
            }
            branches.retain(|b| b.weight > 0.0);
            if branches.is_empty() {
                feasible = false;
            }

            let guard_closure = closure_in_order(p, &group.guard);
            groups.push(PlannedGroup {
                group: g,
                branches,
                total,
                guard_closure,
            });
        }
        let branching = groups.iter().filter(|g| g.branches.len() > 1).count();
        if branching > self.cap {
            return Err(InferenceError::CapExceeded {
                groups: branching,
                cap: self.cap,
            });
        }

        // Groups whose guards depend only on earlier groups come first.
        let guard_key = |pg: &PlannedGroup| -> Option<usize> {
            p.groups[pg.group].guard.iter().map(|a| p.topo_rank(*a)).max()
        };
        groups.sort_by_key(|pg| (guard_key(pg), pg.group));

        let order = p
            .topo_order()
            .iter()
            .copied()
            .filter(|a| relevant[a.index()] && !p.is_input(*a))
            .collect();
        Ok(Plan {
            groups,
            order,
            evidence: checked,
            facts,
            feasible,
        })
    }

    /// Visits every evidence-consistent world with its weight and the truth
    /// value of every atom.
    fn enumerate<F: FnMut(&[usize], f64, &[bool])>(&self, plan: &Plan, mut visit: F) {
        self.walk(plan, true, &mut visit);
    }

    /// Like [`Self::enumerate`] but without the evidence filter.
    fn enumerate_all<F: FnMut(&[usize], f64, &[bool])>(&self, plan: &Plan, mut visit: F) {
        self.walk(plan, false, &mut visit);
    }

    fn walk<F: FnMut(&[usize], f64, &[bool])>(&self, plan: &Plan, filter: bool, visit: &mut F) {
        if !plan.feasible && filter {
            return;
        }
        let mut value = vec![false; self.program.atom_count()];
        for a in &plan.facts {
            value[a.index()] = true;
        }
        let mut selection = vec![UNASSIGNED; plan.groups.len()];
        let position: Vec<usize> = {
            let mut pos = vec![usize::MAX; self.program.groups.len()];
            for (i, pg) in plan.groups.iter().enumerate() {
                pos[pg.group] = i;
            }
            pos
        };
        let mut state = Walk {
            engine: self,
            plan,
            filter,
            position,
            value,
            selection: &mut selection,
        };
        state.descend(0, 1.0, visit);
    }

    /// Fired derivations for `target` in a world, dependencies first.
    fn trace(&self, target: AtomId, plan: &Plan, selection: &[usize], value: &[bool]) -> Vec<String> {
        let p = self.program;
        let mut position = vec![usize::MAX; p.groups.len()];
        for (i, pg) in plan.groups.iter().enumerate() {
            position[pg.group] = i;
        }
        let mut out = Vec::new();
        let mut done = HashSet::new();
        fn visit(
            engine: &Engine<'_>,
            atom: AtomId,
            position: &[usize],
            selection: &[usize],
            value: &[bool],
            done: &mut HashSet<AtomId>,
            out: &mut Vec<String>,
        ) {
            if !done.insert(atom) || !value[atom.index()] {
                return;
            }
            let p = engine.program;
            for d in p.derivers(atom) {
                match *d {
                    Deriver::Rule(r) => {
                        let rule = &p.rules[r];
                        if rule.body.iter().all(|b| value[b.index()]) {
                            for b in &rule.body {
                                visit(engine, *b, position, selection, value, done, out);
                            }
                            out.push(p.describe_rule(rule));
                        }
                    }
                    Deriver::Outcome { group, outcome } => {
                        let g = &p.groups[group];
                        let pos = position[group];
                        if pos != usize::MAX
                            && selection[pos] == outcome
                            && g.guard.iter().all(|b| value[b.index()])
                        {
                            for b in &g.guard {
                                visit(engine, *b, position, selection, value, done, out);
                            }
                            out.push(p.describe_choice(group, outcome));
                        }
                    }
                }
            }
            if p.is_input(atom) {
                out.push(format!("{} (observed)", p.atom(atom)));
            }
        }
        visit(self, target, &position, selection, value, &mut done, &mut out);
        out
    }
}

struct Walk<'e, 'a> {
    engine: &'e Engine<'a>,
    plan: &'e Plan,
    filter: bool,
    position: Vec<usize>,
    value: Vec<bool>,
    selection: &'e mut Vec<usize>,
}

impl Walk<'_, '_> {
    fn descend<F: FnMut(&[usize], f64, &[bool])>(&mut self, depth: usize, weight: f64, visit: &mut F) {
        let plan = self.plan;
        if depth == plan.groups.len() {
            self.evaluate(&plan.order);
            if self.filter && !plan.evidence.iter().all(|&(a, v)| self.value[a.index()] == v) {
                return;
            }
            visit(self.selection, weight, &self.value);
            return;
        }
        let pg = &plan.groups[depth];
        let group = &self.engine.program.groups[pg.group];
        if !group.guard.is_empty() {
            self.evaluate(&pg.guard_closure);
            if !group.guard.iter().all(|a| self.value[a.index()]) {
                self.selection[depth] = UNASSIGNED;
                self.descend(depth + 1, weight * pg.total, visit);
                return;
            }
        }
        for branch in &pg.branches {
            self.selection[depth] = branch.outcome.unwrap_or(MERGED);
            self.descend(depth + 1, weight * branch.weight, visit);
        }
        self.selection[depth] = UNASSIGNED;
    }

    fn evaluate(&mut self, atoms: &[AtomId]) {
        let p = self.engine.program;
        for &a in atoms {
            if p.is_input(a) {
                continue;
            }
            let holds = p.derivers(a).iter().any(|d| match *d {
                Deriver::Rule(r) => p.rules[r].body.iter().all(|b| self.value[b.index()]),
                Deriver::Outcome { group, outcome } => {
                    let pos = self.position[group];
                    pos != usize::MAX
                        && self.selection[pos] == outcome
                        && p.groups[group].guard.iter().all(|b| self.value[b.index()])
                }
            });
            self.value[a.index()] = holds;
        }
    }
}

/// `roots` and all their non-input ancestors, in topological order.
fn closure_in_order(p: &GroundProgram, roots: &[AtomId]) -> Vec<AtomId> {
    let mut seen = HashSet::new();
    let mut stack: Vec<AtomId> = roots.to_vec();
    while let Some(a) = stack.pop() {
        if !seen.insert(a) {
            continue;
        }
        for d in p.derivers(a) {
            match *d {
                Deriver::Rule(r) => stack.extend(&p.rules[r].body),
                Deriver::Outcome { group, .. } => stack.extend(&p.groups[group].guard),
            }
        }
    }
    let mut out: Vec<AtomId> = seen.into_iter().filter(|a| !p.is_input(*a)).collect();
    out.sort_by_key(|a| p.topo_rank(*a));
    out
}
