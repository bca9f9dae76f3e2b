//! Test support: random propositional programs and a naive reference
//! enumerator that shares no code with the library.
#![allow(dead_code)]

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use toxlogic::casegen::Case;
use toxlogic::toxkb::template_of;

pub const ATOMS: usize = 12;
pub const MAX_GROUPS: usize = 12;
pub const MAX_RULES: usize = 20;

/// An annotated disjunction over 0-arity atoms, optionally with a body.
#[derive(Debug, Clone)]
pub struct Group {
    pub outcomes: Vec<(usize, f64)>,
    pub body: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct Rule {
    pub head: usize,
    pub body: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct RandomProgram {
    pub groups: Vec<Group>,
    pub rules: Vec<Rule>,
    pub query: usize,
    pub evidence: Vec<(usize, bool)>,
}

pub fn name(atom: usize) -> String {
    format!("p{atom}")
}

fn distinct_below<R: Rng>(rng: &mut R, bound: usize, max: usize) -> Vec<usize> {
    let want = rng.gen_range(1..=max).min(bound);
    let mut out = Vec::new();
    while out.len() < want {
        let a = rng.gen_range(0..bound);
        if !out.contains(&a) {
            out.push(a);
        }
    }
    out
}

impl RandomProgram {
    /// Acyclic by construction: every body atom has a smaller index than the
    /// heads it supports.
    pub fn generate(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n_groups = rng.gen_range(1..=MAX_GROUPS);
        let mut groups = Vec::new();
        // Atoms chosen by a body-less group; deterministic rules may not
        // define them.
        let mut chosen = [false; ATOMS];
        for _ in 0..n_groups {
            let k = rng.gen_range(1..=2);
            let mut heads: Vec<usize> = Vec::new();
            while heads.len() < k {
                let a = rng.gen_range(0..ATOMS);
                if !heads.contains(&a) {
                    heads.push(a);
                }
            }
            let lowest = *heads.iter().min().unwrap();
            let body = if lowest > 0 && rng.gen_bool(0.5) {
                distinct_below(&mut rng, lowest, 2)
            } else {
                Vec::new()
            };
            // Exhaustive groups use eighths so that the residual is exactly 0.
            let weights: Vec<f64> = if rng.gen_bool(0.2) {
                let first = if k == 1 { 8 } else { rng.gen_range(1..8) };
                [first, 8 - first][..k].iter().map(|w| f64::from(*w) / 8.0).collect()
            } else {
                heads.iter().map(|_| rng.gen_range(0.0..1.0) / k as f64).collect()
            };
            if body.is_empty() {
                for &h in &heads {
                    chosen[h] = true;
                }
            }
            groups.push(Group {
                outcomes: heads.into_iter().zip(weights).collect(),
                body,
            });
        }

        let mut rules = Vec::new();
        let n_rules = rng.gen_range(0..=MAX_RULES);
        for _ in 0..n_rules {
            let head = rng.gen_range(0..ATOMS);
            if chosen[head] {
                continue;
            }
            let body = if head == 0 || rng.gen_bool(0.05) {
                Vec::new()
            } else {
                distinct_below(&mut rng, head, 3)
            };
            rules.push(Rule { head, body });
        }

        let mut program = Self {
            groups,
            rules,
            query: 0,
            evidence: Vec::new(),
        };
        let mentioned = program.mentioned();
        program.query = mentioned[rng.gen_range(0..mentioned.len())];
        let n_evidence = rng.gen_range(0..=3);
        for _ in 0..n_evidence {
            let a = mentioned[rng.gen_range(0..mentioned.len())];
            if program.evidence.iter().all(|(b, _)| *b != a) {
                program.evidence.push((a, rng.gen_bool(0.6)));
            }
        }
        program
    }

    pub fn mentioned(&self) -> Vec<usize> {
        let mut atoms: Vec<usize> = self
            .groups
            .iter()
            .flat_map(|g| g.outcomes.iter().map(|(a, _)| *a).chain(g.body.iter().copied()))
            .chain(self.rules.iter().flat_map(|r| std::iter::once(r.head).chain(r.body.iter().copied())))
            .collect();
        atoms.sort_unstable();
        atoms.dedup();
        atoms
    }

    /// Atoms that no clause can make true; they hold only when evidence
    /// asserts them.
    pub fn is_input(&self, atom: usize) -> bool {
        !self.rules.iter().any(|r| r.head == atom)
            && !self.groups.iter().any(|g| g.outcomes.iter().any(|(a, _)| *a == atom))
    }

    /// Clauses only; queries and evidence are passed separately.
    pub fn source(&self) -> String {
        let mut out = String::new();
        for g in &self.groups {
            let heads: Vec<String> = g.outcomes.iter().map(|(a, p)| format!("{p}::{}", name(*a))).collect();
            out.push_str(&heads.join("; "));
            if !g.body.is_empty() {
                let body: Vec<String> = g.body.iter().map(|a| name(*a)).collect();
                let _ = write!(out, " :- {}", body.join(", "));
            }
            out.push_str(".\n");
        }
        for r in &self.rules {
            out.push_str(&name(r.head));
            if !r.body.is_empty() {
                let body: Vec<String> = r.body.iter().map(|a| name(*a)).collect();
                let _ = write!(out, " :- {}", body.join(", "));
            }
            out.push_str(".\n");
        }
        out
    }

    /// Source with `query` and `evidence` directives appended.
    pub fn source_with_directives(&self) -> String {
        let mut out = self.source();
        let _ = writeln!(out, "query({}).", name(self.query));
        for (a, v) in &self.evidence {
            let _ = writeln!(out, "evidence({}, {v}).", name(*a));
        }
        out
    }

    /// Least model of one world, by repeated passes until nothing changes.
    fn least_model(&self, selection: &[usize], evidence: &[(usize, bool)]) -> [bool; ATOMS] {
        let mut truth = [false; ATOMS];
        for &(a, v) in evidence {
            if v && self.is_input(a) {
                truth[a] = true;
            }
        }
        loop {
            let mut changed = false;
            for (g, &s) in self.groups.iter().zip(selection) {
                if s < g.outcomes.len() && g.body.iter().all(|b| truth[*b]) {
                    let a = g.outcomes[s].0;
                    changed |= !std::mem::replace(&mut truth[a], true);
                }
            }
            for r in &self.rules {
                if r.body.iter().all(|b| truth[*b]) {
                    changed |= !std::mem::replace(&mut truth[r.head], true);
                }
            }
            if !changed {
                return truth;
            }
        }
    }

    /// `(P(evidence), P(query and evidence))` by visiting every world: each
    /// group picks one outcome or nothing, whether or not its body holds.
    pub fn masses(&self, query: usize, evidence: &[(usize, bool)]) -> (f64, f64) {
        let sizes: Vec<usize> = self.groups.iter().map(|g| g.outcomes.len() + 1).collect();
        let mut selection = vec![0usize; self.groups.len()];
        let (mut z, mut zq) = (0.0, 0.0);
        loop {
            let weight: f64 = self
                .groups
                .iter()
                .zip(&selection)
                .map(|(g, &s)| {
                    if s < g.outcomes.len() {
                        g.outcomes[s].1
                    } else {
                        1.0 - g.outcomes.iter().map(|(_, p)| p).sum::<f64>()
                    }
                })
                .product();
            let truth = self.least_model(&selection, evidence);
            if evidence.iter().all(|&(a, v)| truth[a] == v) {
                z += weight;
                if truth[query] {
                    zq += weight;
                }
            }
            // Odometer step.
            let mut i = 0;
            loop {
                if i == selection.len() {
                    return (z, zq);
                }
                selection[i] += 1;
                if selection[i] < sizes[i] {
                    break;
                }
                selection[i] = 0;
                i += 1;
            }
        }
    }

    /// `P(query | evidence)`, or `None` when the evidence has probability 0.
    pub fn oracle(&self) -> Option<f64> {
        let (z, zq) = self.masses(self.query, &self.evidence);
        (z > 0.0).then(|| zq / z)
    }

    pub fn total_mass(&self) -> f64 {
        self.masses(self.query, &[]).0
    }
}

/// True when some choice of `k` reported signs taken from the distractor's
/// template, with the rest from the intended template, reproduces the case.
pub fn has_split(case: &Case) -> bool {
    let k = case.difficulty as usize;
    let intended = template_of(case.intended);
    let distractor = template_of(case.distractor);
    (0u32..1 << case.findings.len()).any(|mask| {
        mask.count_ones() as usize == k
            && case.findings.iter().enumerate().all(|(i, f)| {
                let template = if mask & (1 << i) != 0 { &distractor } else { &intended };
                template.value(f.sign) == f.value
            })
    })
}
