//! Cohen's kappa and the benchmark harness.
//!
//! [`run_benchmark`] classifies every case with the knowledge base and with a
//! per-difficulty decision tree, then reports agreement of each rater with the
//! intended toxidrome. Cases where the knowledge base abstains are left out of
//! the confusion matrix and counted separately.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::BufRead;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::casegen::{rng_for_seed, Case, Dataset, DIFFICULTIES};
use crate::dtree::{encode, DecisionTree, DtreeError, DEFAULT_MAX_DEPTH};
use crate::toxkb::{ClassifyError, KnowledgeBase, Toxidrome};
use crate::worlds::InferenceError;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("confusion matrix is empty")]
    EmptyMatrix,
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("case {id}: {source}")]
    Inference { id: u64, source: InferenceError },
    #[error(transparent)]
    Tree(#[from] DtreeError),
    #[error("external labels line {line}: {message}")]
    ExternalLabels { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Rows are rater A, columns rater B.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub labels: Vec<String>,
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn new(labels: Vec<String>) -> Self {
        let k = labels.len();
        Self {
            labels,
            counts: vec![vec![0; k]; k],
        }
    }

    pub fn from_counts(labels: Vec<String>, counts: Vec<Vec<u64>>) -> Self {
        assert!(
            counts.len() == labels.len() && counts.iter().all(|r| r.len() == labels.len()),
            "square matrix matching the labels"
        );
        Self { labels, counts }
    }

    pub fn toxidromes() -> Self {
        Self::new(Toxidrome::ALL.iter().map(|t| t.name().to_string()).collect())
    }

    pub fn add(&mut self, a: usize, b: usize) {
        self.counts[a][b] += 1;
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn transpose(&self) -> Self {
        let k = self.labels.len();
        Self {
            labels: self.labels.clone(),
            counts: (0..k).map(|j| (0..k).map(|i| self.counts[i][j]).collect()).collect(),
        }
    }

    /// Off-diagonal count for (row `a`, column `b`) plus (row `b`, column `a`).
    pub fn confusions_between(&self, a: usize, b: usize) -> u64 {
        if a == b {
            0
        } else {
            self.counts[a][b] + self.counts[b][a]
        }
    }

    pub fn disagreements(&self) -> u64 {
        self.total() - (0..self.labels.len()).map(|i| self.counts[i][i]).sum::<u64>()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Kappa {
    pub kappa: f64,
    pub p_o: f64,
    pub p_e: f64,
    pub n: u64,
    /// Both raters used one and the same label throughout (`p_e = 1`).
    pub degenerate: bool,
}

/// Cohen's kappa. The ratio is formed from integer counts,
/// `(n * trace - sum(row_i * col_i)) / (n^2 - sum(row_i * col_i))`, so
/// rational inputs such as `[[45,5],[15,35]]` give exact results.
pub fn kappa(cm: &ConfusionMatrix) -> Result<Kappa, EvalError> {
    let n = cm.total();
    if n == 0 {
        return Err(EvalError::EmptyMatrix);
    }
    let k = cm.labels.len();
    let diagonal: u64 = (0..k).map(|i| cm.counts[i][i]).sum();
    let chance: u128 = (0..k)
        .map(|i| {
            let row: u64 = cm.counts[i].iter().sum();
            let col: u64 = cm.counts.iter().map(|r| r[i]).sum();
            u128::from(row) * u128::from(col)
        })
        .sum();
    let n2 = u128::from(n) * u128::from(n);
    let total = n as f64;
    let p_o = diagonal as f64 / total;
    let p_e = chance as f64 / n2 as f64;
    let degenerate = chance == n2;
    let kappa = if degenerate {
        1.0
    } else {
        let numerator = (u128::from(n) * u128::from(diagonal)) as i128 - chance as i128;
        numerator as f64 / (n2 - chance) as f64
    };
    Ok(Kappa {
        kappa,
        p_o,
        p_e,
        n,
        degenerate,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KappaReport {
    pub pair: String,
    pub difficulty: u8,
    /// `None` when no case had both ratings.
    pub kappa: Option<Kappa>,
    pub abstentions: usize,
    pub matrix: ConfusionMatrix,
}

/// One label from an outside rater, as read from JSONL.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExternalLabel {
    pub id: u64,
    pub label: String,
    #[serde(default)]
    pub rater: Option<String>,
}

pub const DEFAULT_RATER: &str = "human";

/// Reads `{"id": .., "label": .., "rater": ..}` lines. Labels may use any
/// toxidrome name or alias.
pub fn read_external_labels<R: BufRead>(
    reader: R,
) -> Result<BTreeMap<String, BTreeMap<u64, Toxidrome>>, EvalError> {
    let mut raters: BTreeMap<String, BTreeMap<u64, Toxidrome>> = BTreeMap::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let bad = |message: String| EvalError::ExternalLabels { line: i + 1, message };
        let entry: ExternalLabel = serde_json::from_str(&line).map_err(|e| bad(e.to_string()))?;
        let label: Toxidrome = entry.label.parse().map_err(|e: crate::toxkb::UnknownName| bad(e.to_string()))?;
        let rater = entry.rater.unwrap_or_else(|| DEFAULT_RATER.to_string());
        if raters.entry(rater.clone()).or_default().insert(entry.id, label).is_some() {
            return Err(bad(format!("case {} labelled twice by {rater}", entry.id)));
        }
    }
    Ok(raters)
}

#[derive(Debug, Clone, Default)]
pub struct BenchmarkConfig {
    pub max_depth: Option<usize>,
    /// Seed of the held-out split; defaults to the dataset seed.
    pub split_seed: Option<u64>,
    pub external: BTreeMap<String, BTreeMap<u64, Toxidrome>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CasePrediction {
    pub id: u64,
    pub difficulty: u8,
    pub intended: Toxidrome,
    /// `None` when the knowledge base abstained.
    pub tak: Option<Toxidrome>,
    pub dt: Toxidrome,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchmarkReport {
    pub n_cases: usize,
    /// Resubstitution trees and the knowledge base, plus any outside raters.
    pub reports: Vec<KappaReport>,
    /// Trees trained on one half of each difficulty and scored on the other.
    pub held_out: Vec<KappaReport>,
    pub predictions: Vec<CasePrediction>,
}

impl BenchmarkReport {
    pub fn find(&self, pair: &str, difficulty: u8) -> Option<&KappaReport> {
        self.reports
            .iter()
            .find(|r| r.pair == pair && r.difficulty == difficulty)
    }

    /// `type,difficulty,kappa`, one row per pair and difficulty. A pair with
    /// no rated cases has an empty kappa field.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("type,difficulty,kappa\n");
        for r in &self.reports {
            let k = r.kappa.map(|k| k.kappa.to_string()).unwrap_or_default();
            let _ = writeln!(out, "{},{},{k}", r.pair, r.difficulty);
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize")
    }
}

fn report(pair: String, difficulty: u8, ratings: impl Iterator<Item = (Option<Toxidrome>, Option<Toxidrome>)>) -> KappaReport {
    let mut matrix = ConfusionMatrix::toxidromes();
    let mut abstentions = 0;
    for (a, b) in ratings {
        match (a, b) {
            (Some(a), Some(b)) => matrix.add(a.index(), b.index()),
            _ => abstentions += 1,
        }
    }
    KappaReport {
        pair,
        difficulty,
        kappa: kappa(&matrix).ok(),
        abstentions,
        matrix,
    }
}

fn fit_and_predict(train: &[&Case], test: &[&Case], depth: usize) -> Result<Vec<Toxidrome>, DtreeError> {
    let x: Vec<Vec<bool>> = train.iter().map(|c| encode(&c.findings)).collect();
    let y: Vec<Toxidrome> = train.iter().map(|c| c.intended).collect();
    let tree = DecisionTree::fit(&x, &y, depth)?;
    Ok(test.iter().map(|c| tree.predict(&encode(&c.findings))).collect())
}

/// Classifies every case and reports kappa per rater pair and difficulty.
pub fn run_benchmark(kb: &KnowledgeBase, dataset: &Dataset, config: &BenchmarkConfig) -> Result<BenchmarkReport, EvalError> {
    if dataset.is_empty() {
        return Err(EvalError::EmptyDataset);
    }
    let depth = config.max_depth.unwrap_or(DEFAULT_MAX_DEPTH);

    let tak: Vec<Option<Toxidrome>> = dataset
        .cases
        .par_iter()
        .map(|case| match kb.classify(&case.findings) {
            Ok(d) => Ok(Some(d.predicted)),
            Err(ClassifyError::NoDiagnosis) => Ok(None),
            Err(ClassifyError::Inference(source)) => Err(EvalError::Inference { id: case.id, source }),
        })
        .collect::<Result<_, _>>()?;

    let mut levels: Vec<u8> = dataset.cases.iter().map(|c| c.difficulty).collect();
    levels.extend(DIFFICULTIES);
    levels.sort_unstable();
    levels.dedup();

    let mut dt: Vec<Option<Toxidrome>> = vec![None; dataset.len()];
    let mut held_out = Vec::new();
    let mut split_rng = rng_for_seed(config.split_seed.unwrap_or(dataset.seed));
    for &k in &levels {
        let idx: Vec<usize> = (0..dataset.len()).filter(|&i| dataset.cases[i].difficulty == k).collect();
        if idx.is_empty() {
            continue;
        }
        let cases: Vec<&Case> = idx.iter().map(|&i| &dataset.cases[i]).collect();
        for (i, p) in idx.iter().zip(fit_and_predict(&cases, &cases, depth)?) {
            dt[*i] = Some(p);
        }

        let mut shuffled = cases.clone();
        shuffled.shuffle(&mut split_rng);
        let (train, test) = shuffled.split_at(shuffled.len().div_ceil(2));
        let predicted = if train.is_empty() || test.is_empty() {
            Vec::new()
        } else {
            fit_and_predict(train, test, depth)?
        };
        held_out.push(report(
            "dt_heldout_vs_intended".into(),
            k,
            test.iter().zip(predicted).map(|(c, p)| (Some(p), Some(c.intended))),
        ));
    }

    let mut reports = Vec::new();
    let at = |k: u8| (0..dataset.len()).filter(move |&i| dataset.cases[i].difficulty == k);
    for &k in &levels {
        let intended = |i: usize| Some(dataset.cases[i].intended);
        reports.push(report("tak_vs_intended".into(), k, at(k).map(|i| (tak[i], intended(i)))));
        reports.push(report("dt_vs_intended".into(), k, at(k).map(|i| (dt[i], intended(i)))));
        let raters: Vec<(&String, &BTreeMap<u64, Toxidrome>)> = config.external.iter().collect();
        for (r, (name, labels)) in raters.iter().enumerate() {
            let external = |i: usize| labels.get(&dataset.cases[i].id).copied();
            reports.push(report(format!("{name}_vs_intended"), k, at(k).map(|i| (external(i), intended(i)))));
            reports.push(report(format!("{name}_vs_tak"), k, at(k).map(|i| (external(i), tak[i]))));
            for (other, other_labels) in &raters[r + 1..] {
                let second = |i: usize| other_labels.get(&dataset.cases[i].id).copied();
                reports.push(report(format!("{name}_vs_{other}"), k, at(k).map(|i| (external(i), second(i)))));
            }
        }
    }

    let predictions = dataset
        .cases
        .iter()
        .enumerate()
        .map(|(i, c)| CasePrediction {
            id: c.id,
            difficulty: c.difficulty,
            intended: c.intended,
            tak: tak[i],
            dt: dt[i].expect("every case has a tree prediction"),
        })
        .collect();

    Ok(BenchmarkReport {
        n_cases: dataset.len(),
        reports,
        held_out,
        predictions,
    })
}
