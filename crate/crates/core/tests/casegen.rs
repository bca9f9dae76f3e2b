mod common;

use std::collections::BTreeSet;

use common::has_split;
use proptest::prelude::*;
use toxlogic::casegen::{generate_case, generate_dataset, rng_for_seed, Dataset, SIGNS_PER_CASE, UNIFORM_WEIGHTS};
use toxlogic::toxkb::{template_of, Sign, Toxidrome};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn generated_cases_satisfy_invariants(seed in any::<u64>(), k in 0usize..=5) {
        let case = generate_case(&mut rng_for_seed(seed), k).unwrap();
        prop_assert_eq!(case.findings.len(), SIGNS_PER_CASE);
        let signs: BTreeSet<Sign> = case.findings.iter().map(|f| f.sign).collect();
        prop_assert_eq!(signs.len(), SIGNS_PER_CASE);
        prop_assert_ne!(case.intended, case.distractor);
        prop_assert!(case.findings.windows(2).all(|w| w[0].sign < w[1].sign));
        for f in &case.findings {
            prop_assert!(f.sign.domain().contains(&f.value));
        }
        prop_assert!(has_split(&case), "{case:?}");
        prop_assert!(case.validate().is_ok());
    }

    #[test]
    fn validate_agrees_with_exhaustive_split(seed in any::<u64>(), k in 0usize..=5, flip in 0usize..5, other in 0usize..6) {
        // Perturb one finding and compare the two checks.
        let mut case = generate_case(&mut rng_for_seed(seed), k).unwrap();
        let sign = case.findings[flip].sign;
        case.findings[flip].value = template_of(Toxidrome::ALL[other]).value(sign);
        prop_assert_eq!(case.validate().is_ok(), has_split(&case));
    }

    #[test]
    fn jsonl_round_trips(seed in any::<u64>(), n in 1usize..40) {
        let d = generate_dataset(seed, n, &UNIFORM_WEIGHTS).unwrap();
        let back = Dataset::from_jsonl(d.to_jsonl().as_bytes(), seed).unwrap();
        prop_assert_eq!(back, d);
    }
}

#[test]
fn ten_thousand_cases_are_uniform_over_intended() {
    let d = generate_dataset(2024, 10_000, &UNIFORM_WEIGHTS).unwrap();
    for t in Toxidrome::ALL {
        let share = d.cases.iter().filter(|c| c.intended == t).count() as f64 / 10_000.0;
        assert!((share - 1.0 / 6.0).abs() <= 0.02, "{t}: {share}");
    }
    for k in 0..3u8 {
        let share = d.cases.iter().filter(|c| c.difficulty == k).count() as f64 / 10_000.0;
        assert!((share - 1.0 / 3.0).abs() <= 0.02, "difficulty {k}: {share}");
    }
}

#[test]
fn same_seed_same_bytes() {
    let a = generate_dataset(42, 300, &UNIFORM_WEIGHTS).unwrap();
    let b = generate_dataset(42, 300, &UNIFORM_WEIGHTS).unwrap();
    assert_eq!(a.to_jsonl().into_bytes(), b.to_jsonl().into_bytes());
    assert_eq!(a.counts_csv(), b.counts_csv());
}

#[test]
fn counts_table_matches_cases() {
    let d = generate_dataset(42, 300, &UNIFORM_WEIGHTS).unwrap();
    let csv = d.counts_csv();
    let mut total = 0;
    for (line, t) in csv.lines().skip(1).zip(Toxidrome::ALL) {
        let cells: Vec<&str> = line.split(',').collect();
        assert_eq!(cells[0], t.name());
        for (k, cell) in cells[1..].iter().enumerate() {
            let expected = d.cases.iter().filter(|c| c.intended == t && c.difficulty as usize == k).count();
            assert_eq!(cell.parse::<usize>().unwrap(), expected);
            total += expected;
        }
    }
    assert_eq!(total, 300);
}
