//! The toxidrome knowledge base.
//!
//! The shipped rule file (`data/toxkb.plx`) has three kinds of clauses:
//! a prior over each sign's values, linking clauses that spread belief from
//! one sign value over the toxidromes showing it, and one goal clause per
//! toxidrome that derives it outright from a characteristic combination.
//! A [`KnowledgeBase`] grounds it for a single patient and classifies sets of
//! findings by conditioning on them.

mod vocab;

use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;
use thiserror::Error;

use crate::rulelang::{self, Program, RuleLangError};
use crate::worlds::{self, Engine, GroundAtom, GroundProgram, GroundingError, InferenceError, DEFAULT_ENUMERATION_CAP};

pub use vocab::{
    template_named, template_of, Finding, FindingError, Sign, ToxidromeTemplate, Toxidrome, UnknownName, Value,
};

/// The shipped rule file.
pub const SHIPPED_KB: &str = include_str!("../../data/toxkb.plx");

/// Constant naming the patient in ground atoms.
pub const PATIENT: &str = "pt";

/// Predicate of the toxidrome labels.
pub const LABEL_PREDICATE: &str = "hasToxidrome";

const PRIOR_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum KbError {
    #[error("reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Parse(#[from] RuleLangError),
    #[error(transparent)]
    Ground(#[from] GroundingError),
    #[error("priors: {0}")]
    Priors(String),
    #[error("self-test failed for {toxidrome}: {reason}")]
    SelfTest { toxidrome: Toxidrome, reason: String },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ClassifyError {
    #[error(transparent)]
    Inference(#[from] InferenceError),
    #[error("no toxidrome is derivable from the findings")]
    NoDiagnosis,
}

/// Prior probability per toxidrome, indexed by [`Toxidrome::index`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Priors([f64; 6]);

impl Priors {
    pub fn uniform() -> Self {
        Self([1.0 / 6.0; 6])
    }

    pub fn new(values: BTreeMap<Toxidrome, f64>) -> Result<Self, KbError> {
        let mut out = [0.0; 6];
        for (t, p) in values {
            if !(0.0..=1.0).contains(&p) {
                return Err(KbError::Priors(format!("{t} = {p} is outside [0,1]")));
            }
            out[t.index()] = p;
        }
        let total: f64 = out.iter().sum();
        if (total - 1.0).abs() > PRIOR_TOLERANCE {
            return Err(KbError::Priors(format!("priors sum to {total}, not 1")));
        }
        Ok(Self(out))
    }

    /// Reads flat `toxidrome = probability` lines; toxidromes not listed get 0.
    pub fn parse(text: &str) -> Result<Self, KbError> {
        let table: toml::Table = text.parse().map_err(|e: toml::de::Error| KbError::Priors(e.message().to_string()))?;
        let mut values = BTreeMap::new();
        for (key, value) in table {
            let t: Toxidrome = key.parse().map_err(|e: UnknownName| KbError::Priors(e.to_string()))?;
            let p = match value {
                toml::Value::Float(f) => f,
                toml::Value::Integer(i) => i as f64,
                other => return Err(KbError::Priors(format!("{key}: expected a number, got {other}"))),
            };
            values.insert(t, p);
        }
        Self::new(values)
    }

    pub fn read(path: &Path) -> Result<Self, KbError> {
        let text = std::fs::read_to_string(path).map_err(|source| KbError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn get(&self, t: Toxidrome) -> f64 {
        self.0[t.index()]
    }
}

impl Default for Priors {
    fn default() -> Self {
        Self::uniform()
    }
}

/// Result of classifying one set of findings.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Diagnosis {
    /// Prior-weighted, normalized over the six toxidromes.
    pub posterior: Vec<(Toxidrome, f64)>,
    /// `P(label | findings)` from the rule program.
    pub probability: Vec<(Toxidrome, f64)>,
    pub evidence_probability: f64,
    pub predicted: Toxidrome,
}

impl Diagnosis {
    pub fn posterior_of(&self, t: Toxidrome) -> f64 {
        self.posterior[t.index()].1
    }
}

/// Clause counts by kind.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ClauseCounts {
    pub total: usize,
    /// Annotated clauses without a body.
    pub priors: usize,
    /// Annotated clauses with a body.
    pub linking: usize,
    /// Deterministic clauses.
    pub goals: usize,
}

#[derive(Debug, Clone)]
pub struct KnowledgeBase {
    pub program: Program,
    pub ground: GroundProgram,
    pub priors: Priors,
    pub templates: [ToxidromeTemplate; 6],
    labels: Vec<GroundAtom>,
    cap: usize,
}

impl KnowledgeBase {
    /// Loads, grounds and self-tests a rule file.
    pub fn load(path: &Path, priors: Option<Priors>) -> Result<Self, KbError> {
        let source = std::fs::read_to_string(path).map_err(|source| KbError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_source(&source, priors)
    }

    /// The shipped knowledge base.
    pub fn shipped(priors: Option<Priors>) -> Result<Self, KbError> {
        Self::from_source(SHIPPED_KB, priors)
    }

    pub fn from_source(source: &str, priors: Option<Priors>) -> Result<Self, KbError> {
        let kb = Self::from_source_unchecked(source, priors)?;
        kb.self_test()?;
        Ok(kb)
    }

    /// Parses and grounds without the difficulty-0 self-test, for partial rule
    /// files.
    pub fn from_source_unchecked(source: &str, priors: Option<Priors>) -> Result<Self, KbError> {
        let program = rulelang::parse(source)?;
        let ground = worlds::ground(&program, &[PATIENT.to_string()])?;
        let labels = Toxidrome::ALL
            .iter()
            .map(|t| {
                std::iter::once(t.name())
                    .chain(t.aliases().iter().copied())
                    .map(|name| GroundAtom::new(LABEL_PREDICATE, [PATIENT, name]))
                    .find(|atom| ground.lookup(atom).is_some())
                    .unwrap_or_else(|| GroundAtom::new(LABEL_PREDICATE, [PATIENT, t.name()]))
            })
            .collect();
        Ok(Self {
            program,
            ground,
            priors: priors.unwrap_or_default(),
            templates: Toxidrome::ALL.map(template_of),
            labels,
            cap: DEFAULT_ENUMERATION_CAP,
        })
    }

    pub fn with_cap(mut self, cap: usize) -> Self {
        self.cap = cap;
        self
    }

    pub fn engine(&self) -> Engine<'_> {
        Engine::new(&self.ground).with_cap(self.cap)
    }

    /// Ground label atom for each toxidrome, in [`Toxidrome::ALL`] order.
    pub fn labels(&self) -> &[GroundAtom] {
        &self.labels
    }

    pub fn label(&self, t: Toxidrome) -> &GroundAtom {
        &self.labels[t.index()]
    }

    pub fn template(&self, t: Toxidrome) -> &ToxidromeTemplate {
        &self.templates[t.index()]
    }

    pub fn clause_counts(&self) -> ClauseCounts {
        let clauses = &self.program.clauses;
        ClauseCounts {
            total: clauses.len(),
            priors: clauses.iter().filter(|c| c.is_choice_fact()).count(),
            linking: clauses.iter().filter(|c| !c.deterministic && !c.is_choice_fact()).count(),
            goals: clauses.iter().filter(|c| c.deterministic).count(),
        }
    }

    pub fn evidence(findings: &[Finding]) -> Vec<(GroundAtom, bool)> {
        findings
            .iter()
            .map(|f| (finding_atom(*f), true))
            .collect()
    }

    pub fn classify(&self, findings: &[Finding]) -> Result<Diagnosis, ClassifyError> {
        let evidence = Self::evidence(findings);
        let raw = self.engine().posterior(&self.labels, &evidence)?;
        let weighted: Vec<f64> = Toxidrome::ALL
            .iter()
            .zip(&raw.entries)
            .map(|(t, (_, p))| self.priors.get(*t) * p)
            .collect();
        let total: f64 = weighted.iter().sum();
        if !(total > 0.0) {
            return Err(ClassifyError::NoDiagnosis);
        }
        let posterior: Vec<(Toxidrome, f64)> = Toxidrome::ALL
            .iter()
            .zip(&weighted)
            .map(|(t, w)| (*t, w / total))
            .collect();
        // Toxidrome::ALL is in name order, so the first maximum wins ties.
        let predicted = posterior
            .iter()
            .fold(None::<(Toxidrome, f64)>, |best, &(t, p)| match best {
                Some((_, bp)) if bp >= p => best,
                _ => Some((t, p)),
            })
            .map(|(t, _)| t)
            .expect("six toxidromes");
        Ok(Diagnosis {
            posterior,
            probability: Toxidrome::ALL
                .iter()
                .zip(&raw.entries)
                .map(|(t, (_, p))| (*t, *p))
                .collect(),
            evidence_probability: raw.evidence_probability,
            predicted,
        })
    }

    /// Every toxidrome's full canonical presentation must establish it with
    /// certainty and give it a strictly higher probability than any other
    /// label. The priors play no part: this checks the rules alone.
    pub fn self_test(&self) -> Result<(), KbError> {
        for t in Toxidrome::ALL {
            let findings: Vec<Finding> = self.template(t).findings().collect();
            let evidence = Self::evidence(&findings);
            let raw = self
                .engine()
                .posterior(&self.labels, &evidence)
                .map_err(|e| KbError::SelfTest {
                    toxidrome: t,
                    reason: e.to_string(),
                })?;
            let own = raw.entries[t.index()].1;
            if own < 1.0 - PRIOR_TOLERANCE {
                return Err(KbError::SelfTest {
                    toxidrome: t,
                    reason: format!("canonical presentation gives probability {own:.4}, not 1 (is its goal clause missing?)"),
                });
            }
            if let Some((other, p)) = Toxidrome::ALL
                .iter()
                .zip(&raw.entries)
                .map(|(o, (_, p))| (*o, *p))
                .find(|(o, p)| *o != t && *p >= own)
            {
                return Err(KbError::SelfTest {
                    toxidrome: t,
                    reason: format!("probability {own:.4} does not exceed {other} at {p:.4}"),
                });
            }
        }
        Ok(())
    }
}

pub fn finding_atom(f: Finding) -> GroundAtom {
    GroundAtom::new(f.sign.predicate(), [PATIENT, f.value.name()])
}
