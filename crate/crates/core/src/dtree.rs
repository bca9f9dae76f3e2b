//! CART decision trees over one-hot encoded findings.
//!
//! Each (sign, value) pair in the vocabulary is one binary feature, so an
//! unreported sign is simply all-zero in its block. Splits minimise weighted
//! Gini impurity; on equal gain the lower feature index wins.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};

use thiserror::Error;

use crate::toxkb::{Finding, Sign, Value};

pub const DEFAULT_MAX_DEPTH: usize = 3;

const MIN_GAIN: f64 = 1e-12;

/// Feature index to (sign, value), in sign order then domain order.
pub fn feature_table() -> Vec<(Sign, Value)> {
    Sign::ALL
        .iter()
        .flat_map(|&s| s.domain().iter().map(move |&v| (s, v)))
        .collect()
}

pub fn feature_count() -> usize {
    Sign::ALL.iter().map(|s| s.domain().len()).sum()
}

pub fn encode(findings: &[Finding]) -> Vec<bool> {
    let table = feature_table();
    table
        .iter()
        .map(|&(s, v)| findings.iter().any(|f| f.sign == s && f.value == v))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DtreeError {
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("{rows} rows but {labels} labels")]
    LengthMismatch { rows: usize, labels: usize },
    #[error("class counts are all zero")]
    ZeroCounts,
}

/// `1 - sum(p_i^2)` over the class counts.
pub fn gini(counts: &[usize]) -> Result<f64, DtreeError> {
    let n: usize = counts.iter().sum();
    if n == 0 {
        return Err(DtreeError::ZeroCounts);
    }
    let n = n as f64;
    Ok(1.0 - counts.iter().map(|&c| (c as f64 / n).powi(2)).sum::<f64>())
}

fn node_gini(counts: &[usize]) -> f64 {
    gini(counts).expect("nodes are non-empty")
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node<L> {
    Leaf {
        label: L,
        counts: Vec<(L, usize)>,
    },
    Split {
        feature: usize,
        /// Samples with the feature present.
        present: Box<Node<L>>,
        absent: Box<Node<L>>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecisionTree<L> {
    pub root: Node<L>,
    pub max_depth: usize,
}

fn class_counts<L: Ord + Copy>(labels: &[L], rows: &[usize]) -> BTreeMap<L, usize> {
    let mut counts = BTreeMap::new();
    for &r in rows {
        *counts.entry(labels[r]).or_insert(0) += 1;
    }
    counts
}

/// Majority label; ties go to the smallest label.
fn majority<L: Ord + Copy>(counts: &BTreeMap<L, usize>) -> L {
    let mut best: Option<(L, usize)> = None;
    for (&l, &c) in counts {
        if best.map_or(true, |(_, bc)| c > bc) {
            best = Some((l, c));
        }
    }
    best.expect("non-empty node").0
}

impl<L: Ord + Copy> DecisionTree<L> {
    /// Fits a tree to rows of binary features.
    pub fn fit(features: &[Vec<bool>], labels: &[L], max_depth: usize) -> Result<Self, DtreeError> {
        if features.len() != labels.len() {
            return Err(DtreeError::LengthMismatch {
                rows: features.len(),
                labels: labels.len(),
            });
        }
        if labels.is_empty() {
            return Err(DtreeError::EmptyTrainingSet);
        }
        let rows: Vec<usize> = (0..labels.len()).collect();
        Ok(Self {
            root: build(features, labels, &rows, max_depth),
            max_depth,
        })
    }

    pub fn predict(&self, features: &[bool]) -> L {
        let mut node = &self.root;
        loop {
            match node {
                Node::Leaf { label, .. } => return *label,
                Node::Split {
                    feature,
                    present,
                    absent,
                } => node = if features[*feature] { present } else { absent },
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn depth<L>(n: &Node<L>) -> usize {
            match n {
                Node::Leaf { .. } => 0,
                Node::Split { present, absent, .. } => 1 + depth(present).max(depth(absent)),
            }
        }
        depth(&self.root)
    }
}

fn build<L: Ord + Copy>(features: &[Vec<bool>], labels: &[L], rows: &[usize], depth_left: usize) -> Node<L> {
    let counts = class_counts(labels, rows);
    let leaf = || Node::Leaf {
        label: majority(&counts),
        counts: counts.iter().map(|(l, c)| (*l, *c)).collect(),
    };
    if depth_left == 0 || counts.len() <= 1 {
        return leaf();
    }
    let parent: Vec<usize> = counts.values().copied().collect();
    let parent_gini = node_gini(&parent);
    let n = rows.len() as f64;
    let width = features[rows[0]].len();

    let mut best: Option<(usize, f64)> = None;
    for feature in 0..width {
        let (yes, no): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&r| features[r][feature]);
        if yes.is_empty() || no.is_empty() {
            continue;
        }
        let side = |part: &[usize]| {
            let c: Vec<usize> = class_counts(labels, part).into_values().collect();
            part.len() as f64 / n * node_gini(&c)
        };
        let gain = parent_gini - side(&yes) - side(&no);
        if gain > MIN_GAIN && best.map_or(true, |(_, g)| gain > g) {
            best = Some((feature, gain));
        }
    }
    let Some((feature, _)) = best else {
        return leaf();
    };
    let (yes, no): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&r| features[r][feature]);
    Node::Split {
        feature,
        present: Box::new(build(features, labels, &yes, depth_left - 1)),
        absent: Box::new(build(features, labels, &no, depth_left - 1)),
    }
}

impl<L: Ord + Copy + fmt::Display> DecisionTree<L> {
    /// Indented text form; feature names come from [`feature_table`].
    pub fn render(&self) -> String {
        let table = feature_table();
        let mut out = String::new();
        render(&self.root, &table, 0, &mut out);
        out
    }
}

fn render<L: fmt::Display>(node: &Node<L>, table: &[(Sign, Value)], indent: usize, out: &mut String) {
    let pad = "  ".repeat(indent);
    match node {
        Node::Leaf { label, counts } => {
            let n: usize = counts.iter().map(|(_, c)| c).sum();
            let _ = writeln!(out, "{pad}-> {label} ({n})");
        }
        Node::Split {
            feature,
            present,
            absent,
        } => {
            let _ = match table.get(*feature) {
                Some((s, v)) => writeln!(out, "{pad}{s}={v}?"),
                None => writeln!(out, "{pad}feature {feature}?"),
            };
            render(present, table, indent + 1, out);
            let _ = writeln!(out, "{pad}else");
            render(absent, table, indent + 1, out);
        }
    }
}
