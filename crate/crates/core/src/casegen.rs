//! Seeded generation of simulated presentations.
//!
//! Each case picks an intended toxidrome and a different distractor, then
//! reports `5 - k` signs with the intended template's values and `k` further
//! signs with the distractor's values. All randomness comes from a
//! [`ChaCha8Rng`] seeded with [`rng_for_seed`], so a seed fixes the dataset.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::BufRead;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::toxkb::{template_of, Finding, Sign, Toxidrome, Value};

/// Signs per presentation.
pub const SIGNS_PER_CASE: usize = 5;

pub const DIFFICULTIES: [u8; 3] = [0, 1, 2];

#[derive(Debug, Error)]
pub enum CaseGenError {
    #[error("difficulty weights must be three non-negative numbers summing to 1, got {0:?}")]
    Weights(Vec<f64>),
    #[error("difficulty {0} exceeds {SIGNS_PER_CASE}")]
    Difficulty(usize),
    #[error("case count must be positive")]
    Empty,
    #[error("line {line}: {message}")]
    Read { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Field order is the JSONL wire order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Case {
    pub id: u64,
    pub difficulty: u8,
    pub intended: Toxidrome,
    pub distractor: Toxidrome,
    pub findings: Vec<Finding>,
}

impl Case {
    /// Checks the case against the templates: distinct toxidromes, five
    /// distinct signs, and a split of the findings into `5 - k` that match the
    /// intended template and `k` that match the distractor's.
    pub fn validate(&self) -> Result<(), String> {
        if self.intended == self.distractor {
            return Err("intended and distractor coincide".into());
        }
        if self.findings.len() != SIGNS_PER_CASE {
            return Err(format!("{} findings", self.findings.len()));
        }
        let mut signs: Vec<Sign> = self.findings.iter().map(|f| f.sign).collect();
        signs.sort();
        signs.dedup();
        if signs.len() != self.findings.len() {
            return Err("a sign is reported twice".into());
        }
        let k = self.difficulty as usize;
        if k > SIGNS_PER_CASE {
            return Err(format!("difficulty {k}"));
        }
        let intended = template_of(self.intended);
        let distractor = template_of(self.distractor);
        let (mut only_intended, mut only_distractor) = (0, 0);
        for f in &self.findings {
            let a = intended.value(f.sign) == f.value;
            let b = distractor.value(f.sign) == f.value;
            match (a, b) {
                (true, false) => only_intended += 1,
                (false, true) => only_distractor += 1,
                (true, true) => {}
                (false, false) => return Err(format!("{f} matches neither template")),
            }
        }
        if only_intended > SIGNS_PER_CASE - k || only_distractor > k {
            return Err(format!(
                "{only_intended} intended-only and {only_distractor} distractor-only findings cannot split as {}/{k}",
                SIGNS_PER_CASE - k
            ));
        }
        Ok(())
    }
}

pub fn rng_for_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Draws one case of difficulty `k` (`id` is left at 0).
pub fn generate_case<R: Rng + ?Sized>(rng: &mut R, k: usize) -> Result<Case, CaseGenError> {
    if k > SIGNS_PER_CASE {
        return Err(CaseGenError::Difficulty(k));
    }
    let intended = Toxidrome::ALL[rng.gen_range(0..Toxidrome::ALL.len())];
    let others: Vec<Toxidrome> = Toxidrome::ALL.into_iter().filter(|t| *t != intended).collect();
    let distractor = others[rng.gen_range(0..others.len())];

    // Partial Fisher-Yates: the first 5 positions are drawn without
    // replacement, the first 5 - k from the intended template.
    let mut signs = Sign::ALL;
    for i in 0..SIGNS_PER_CASE {
        let j = rng.gen_range(i..signs.len());
        signs.swap(i, j);
    }
    let intended_template = template_of(intended);
    let distractor_template = template_of(distractor);
    let mut findings: Vec<Finding> = signs[..SIGNS_PER_CASE]
        .iter()
        .enumerate()
        .map(|(i, &sign)| {
            let template = if i < SIGNS_PER_CASE - k {
                &intended_template
            } else {
                &distractor_template
            };
            Finding {
                sign,
                value: template.value(sign),
            }
        })
        .collect();
    findings.sort();
    Ok(Case {
        id: 0,
        difficulty: k as u8,
        intended,
        distractor,
        findings,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub cases: Vec<Case>,
    pub seed: u64,
}

pub const UNIFORM_WEIGHTS: [f64; 3] = [1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0];

fn check_weights(weights: &[f64]) -> Result<(), CaseGenError> {
    let total: f64 = weights.iter().sum();
    if weights.len() != DIFFICULTIES.len()
        || weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite())
        || (total - 1.0).abs() > 1e-9
    {
        return Err(CaseGenError::Weights(weights.to_vec()));
    }
    Ok(())
}

/// `n` cases with difficulties drawn from `weights` over 0, 1, 2. Ids run
/// from 1 to `n`.
pub fn generate_dataset(seed: u64, n: usize, weights: &[f64]) -> Result<Dataset, CaseGenError> {
    if n == 0 {
        return Err(CaseGenError::Empty);
    }
    check_weights(weights)?;
    let mut rng = rng_for_seed(seed);
    let mut cases = Vec::with_capacity(n);
    for id in 1..=n as u64 {
        let u: f64 = rng.gen();
        let mut k = DIFFICULTIES.len() - 1;
        let mut acc = 0.0;
        for (i, w) in weights.iter().enumerate() {
            acc += w;
            if u < acc {
                k = i;
                break;
            }
        }
        let mut case = generate_case(&mut rng, k)?;
        case.id = id;
        cases.push(case);
    }
    Ok(Dataset { cases, seed })
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.cases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cases.is_empty()
    }

    /// Cases per (intended toxidrome, difficulty).
    pub fn counts(&self) -> BTreeMap<(Toxidrome, u8), usize> {
        let mut counts = BTreeMap::new();
        for case in &self.cases {
            *counts.entry((case.intended, case.difficulty)).or_insert(0) += 1;
        }
        counts
    }

    /// One JSON object per line.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for case in &self.cases {
            out.push_str(&serde_json::to_string(case).expect("cases serialize"));
            out.push('\n');
        }
        out
    }

    pub fn from_jsonl<R: BufRead>(reader: R, seed: u64) -> Result<Self, CaseGenError> {
        let mut cases = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let case: Case = serde_json::from_str(&line).map_err(|e| CaseGenError::Read {
                line: i + 1,
                message: e.to_string(),
            })?;
            cases.push(case);
        }
        Ok(Self { cases, seed })
    }

    /// Counts table with one row per toxidrome and one column per difficulty.
    pub fn counts_csv(&self) -> String {
        let counts = self.counts();
        let mut levels: Vec<u8> = self.cases.iter().map(|c| c.difficulty).collect();
        levels.extend(DIFFICULTIES);
        levels.sort_unstable();
        levels.dedup();
        let mut out = String::from("toxidrome");
        for k in &levels {
            let _ = write!(out, ",difficulty_{k}");
        }
        out.push('\n');
        for t in Toxidrome::ALL {
            out.push_str(t.name());
            for k in &levels {
                let _ = write!(out, ",{}", counts.get(&(t, *k)).copied().unwrap_or(0));
            }
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Plausibility {
    Plausible,
    Implausible(String),
}

/// A combination of findings judged impossible together.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlausibilityRule {
    pub reason: String,
    pub when: Vec<Finding>,
}

/// Flags cases that match any rule. The default filter has no rules.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PlausibilityFilter {
    pub rules: Vec<PlausibilityRule>,
}

impl PlausibilityFilter {
    /// Reads lines of the form `reason: sign=value, sign=value`; `#` starts a
    /// comment.
    pub fn parse(text: &str) -> Result<Self, String> {
        let mut rules = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (reason, findings) = line
                .split_once(':')
                .ok_or_else(|| format!("line {}: expected `reason: sign=value, ...`", i + 1))?;
            let when = findings
                .split(',')
                .map(|f| f.trim().parse::<Finding>().map_err(|e| format!("line {}: {e}", i + 1)))
                .collect::<Result<Vec<_>, _>>()?;
            rules.push(PlausibilityRule {
                reason: reason.trim().to_string(),
                when,
            });
        }
        Ok(Self { rules })
    }

    pub fn check(&self, case: &Case) -> Plausibility {
        // Distinct signs are guaranteed by construction, so one sign cannot
        // carry two contradictory values here.
        debug_assert!(case.validate().is_ok() || case.findings.len() != SIGNS_PER_CASE);
        self.rules
            .iter()
            .find(|rule| rule.when.iter().all(|f| case.findings.contains(f)))
            .map_or(Plausibility::Plausible, |rule| Plausibility::Implausible(rule.reason.clone()))
    }
}

/// The value a sign takes in `case`, if reported.
pub fn reported(case: &Case, sign: Sign) -> Option<Value> {
    case.findings.iter().find(|f| f.sign == sign).map(|f| f.value)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn count_matches(case: &Case, t: Toxidrome) -> usize {
        let template = template_of(t);
        case.findings.iter().filter(|f| template.value(f.sign) == f.value).count()
    }

    #[test]
    fn difficulty_zero_uses_only_the_intended_template() {
        let mut rng = rng_for_seed(7);
        for _ in 0..200 {
            let case = generate_case(&mut rng, 0).unwrap();
            assert_eq!(count_matches(&case, case.intended), 5);
            case.validate().unwrap();
        }
    }

    #[test]
    fn cholinergic_values_for_drawn_signs() {
        let mut rng = rng_for_seed(0);
        let case = std::iter::repeat_with(|| generate_case(&mut rng, 0).unwrap())
            .find(|c| {
                c.intended == Toxidrome::Cholinergic
                    && reported(c, Sign::BloodPressure).is_none()
                    && reported(c, Sign::Temperature).is_none()
            })
            .unwrap();
        let values: Vec<Value> = case.findings.iter().map(|f| f.value).collect();
        assert_eq!(
            values,
            vec![Value::Decreased, Value::Small, Value::Increased, Value::Decreased, Value::Sedated]
        );
    }

    #[test]
    fn difficulty_five_uses_only_the_distractor() {
        let mut rng = rng_for_seed(3);
        for _ in 0..200 {
            let case = generate_case(&mut rng, 5).unwrap();
            assert_eq!(count_matches(&case, case.distractor), 5);
            case.validate().unwrap();
        }
        assert!(matches!(generate_case(&mut rng, 6), Err(CaseGenError::Difficulty(6))));
    }

    #[test]
    fn opioid_with_sympathomimetic_distractor_splits_three_two() {
        let mut rng = rng_for_seed(1);
        let case = std::iter::repeat_with(|| generate_case(&mut rng, 2).unwrap())
            .find(|c| c.intended == Toxidrome::Opioid && c.distractor == Toxidrome::Sympathomimetic)
            .unwrap();
        case.validate().unwrap();
        let opioid = template_of(Toxidrome::Opioid);
        let symp = template_of(Toxidrome::Sympathomimetic);
        let from_opioid = case.findings.iter().filter(|f| opioid.value(f.sign) == f.value).count();
        let from_symp = case.findings.iter().filter(|f| symp.value(f.sign) == f.value).count();
        // Signs where both templates agree (e.g. secretions normal) count for both.
        let shared = case
            .findings
            .iter()
            .filter(|f| opioid.value(f.sign) == f.value && symp.value(f.sign) == f.value)
            .count();
        assert_eq!(from_opioid - shared + from_symp, 5);
        assert!(from_opioid >= 3 && from_symp >= 2, "{case:?}");
    }

    #[test]
    fn dataset_is_deterministic() {
        let a = generate_dataset(42, 300, &UNIFORM_WEIGHTS).unwrap();
        let b = generate_dataset(42, 300, &UNIFORM_WEIGHTS).unwrap();
        assert_eq!(a.to_jsonl(), b.to_jsonl());
        assert_eq!(a.len(), 300);
        assert_ne!(a.to_jsonl(), generate_dataset(43, 300, &UNIFORM_WEIGHTS).unwrap().to_jsonl());
        let one = generate_dataset(42, 1, &UNIFORM_WEIGHTS).unwrap();
        assert_eq!(one.len(), 1);
        assert_eq!(one.cases[0].id, 1);
    }

    #[test]
    fn jsonl_field_order_and_round_trip() {
        let d = generate_dataset(5, 3, &UNIFORM_WEIGHTS).unwrap();
        let text = d.to_jsonl();
        let first = text.lines().next().unwrap();
        assert!(
            first.starts_with(r#"{"id":1,"difficulty":"#) && first.contains(r#","findings":[{"sign":"#),
            "{first}"
        );
        let back = Dataset::from_jsonl(text.as_bytes(), 5).unwrap();
        assert_eq!(back, d);
        assert!(Dataset::from_jsonl(&b"{\"id\":1}\n"[..], 0).is_err());
    }

    #[test]
    fn invalid_inputs() {
        assert!(matches!(generate_dataset(1, 0, &UNIFORM_WEIGHTS), Err(CaseGenError::Empty)));
        assert!(generate_dataset(1, 10, &[0.5, 0.5]).is_err());
        assert!(generate_dataset(1, 10, &[0.5, 0.6, -0.1]).is_err());
        assert!(generate_dataset(1, 10, &[0.5, 0.4, 0.0]).is_err());
        let only_hard = generate_dataset(1, 50, &[0.0, 0.0, 1.0]).unwrap();
        assert!(only_hard.cases.iter().all(|c| c.difficulty == 2));
    }

    #[test]
    fn counts_table_shape() {
        let d = generate_dataset(42, 300, &UNIFORM_WEIGHTS).unwrap();
        let csv = d.counts_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "toxidrome,difficulty_0,difficulty_1,difficulty_2");
        assert_eq!(lines.len(), 7);
        let total: usize = d.counts().values().sum();
        assert_eq!(total, 300);
    }

    #[test]
    fn default_filter_accepts_everything() {
        let d = generate_dataset(9, 100, &UNIFORM_WEIGHTS).unwrap();
        let filter = PlausibilityFilter::default();
        assert!(d.cases.iter().all(|c| filter.check(c) == Plausibility::Plausible));
    }

    #[test]
    fn custom_rule_flags_matching_case() {
        let filter =
            PlausibilityFilter::parse("slow breathing while agitated: respiratory_rate=decreased, mental_status=agitated\n")
                .unwrap();
        // Serotonin toxicity template for four signs, opioid's respiratory rate.
        let serotonin = template_of(Toxidrome::SerotoninToxicity);
        let mut findings: Vec<Finding> = [Sign::HeartRate, Sign::BloodPressure, Sign::Temperature, Sign::MentalStatus]
            .into_iter()
            .map(|sign| Finding {
                sign,
                value: serotonin.value(sign),
            })
            .collect();
        findings.push(Finding {
            sign: Sign::RespiratoryRate,
            value: template_of(Toxidrome::Opioid).value(Sign::RespiratoryRate),
        });
        findings.sort();
        let case = Case {
            id: 1,
            difficulty: 1,
            intended: Toxidrome::SerotoninToxicity,
            distractor: Toxidrome::Opioid,
            findings,
        };
        case.validate().unwrap();
        assert_eq!(
            filter.check(&case),
            Plausibility::Implausible("slow breathing while agitated".into())
        );
        assert!(PlausibilityFilter::parse("no colon here").is_err());
    }

    #[test]
    fn validate_rejects_bad_cases() {
        let mut rng = rng_for_seed(11);
        let good = generate_case(&mut rng, 1).unwrap();
        let mut same = good.clone();
        same.distractor = same.intended;
        assert!(same.validate().is_err());
        let mut dup = good.clone();
        dup.findings[1].sign = dup.findings[0].sign;
        assert!(dup.validate().is_err());
        let mut short = good;
        short.findings.pop();
        assert!(short.validate().is_err());
    }
}
