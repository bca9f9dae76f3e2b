use toxlogic::rulelang;
use toxlogic::toxkb::PATIENT;
use toxlogic::worlds::{self, Engine, GroundAtom};

const GRAMMAR: &str = include_str!("../../../docs/grammar.md");

fn example() -> &'static str {
    let start = GRAMMAR.find("```prolog\n").expect("example block") + "```prolog\n".len();
    let len = GRAMMAR[start..].find("```").unwrap();
    &GRAMMAR[start..start + len]
}

#[test]
fn documented_example_parses_and_answers() {
    let program = rulelang::parse(example()).unwrap();
    assert_eq!(program.clauses.len(), 3);
    assert_eq!(program.queries.len(), 1);
    let ground = worlds::ground(&program, &[PATIENT.to_string()]).unwrap();
    let evidence: Vec<(GroundAtom, bool)> = program
        .evidence
        .iter()
        .map(|(a, v)| (GroundAtom::from_atom(a).unwrap(), *v))
        .collect();
    let query = GroundAtom::from_atom(&program.queries[0]).unwrap();
    // respiratoryRate and secretions are inputs nobody asserted.
    assert_eq!(Engine::new(&ground).probability(&query, &evidence), Ok(0.0));
}

#[test]
fn static_checks_listed_in_the_doc_are_enforced() {
    for bad in [
        "1.5::a.",
        "0.6::a; 0.6::b.",
        "0*P::a :- b, P is 0.2.",
        "P::a :- b.",
        "P::a(P) :- b, P is 0.2.",
        "0.2::a; 0.3::a.",
        "a(x). b :- a.",
        "0.5::a. a :- b.",
    ] {
        assert!(rulelang::parse(bad).is_err(), "{bad}");
    }
    let scaled = rulelang::parse("3*P::a; P::b :- c, P is 0.3.").unwrap();
    assert!(worlds::ground(&scaled, &[PATIENT.to_string()]).is_err());
    let inert = rulelang::parse("a :- b. b :- a.").unwrap();
    assert!(worlds::ground(&inert, &[PATIENT.to_string()]).is_ok());
    let cyclic = rulelang::parse("0.5::c. a :- b. b :- a. b :- c.").unwrap();
    assert!(worlds::ground(&cyclic, &[PATIENT.to_string()]).is_err());
}
