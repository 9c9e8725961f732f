mod common;

use memrex::agents::{OracleAgent, OracleConfig, RandomAgent};
use memrex::catalog::{generate_split, Catalog, ScenarioSet, Split, SplitCounts};
use memrex::dialog::{read_corpus, write_corpus};
use memrex::simulator::{run_episode, SimulatorConfig};
use memrex::Error;

#[test]
fn corpus_round_trips() {
    let cat = common::catalog();
    let dir = tempfile::tempdir().unwrap();
    let mut dialogs = Vec::new();
    for seed in 0..40 {
        let s = common::scenario(&cat, seed);
        let e = if seed % 2 == 0 {
            run_episode(
                &mut OracleAgent::new(OracleConfig::default()),
                &s,
                &SimulatorConfig::default(),
                seed,
            )
        } else {
            run_episode(&mut RandomAgent, &s, &SimulatorConfig::default(), seed)
        };
        dialogs.push(e.unwrap().dialog);
    }
    let p = dir.path().join("corpus.jsonl");
    write_corpus(&dialogs, &p).unwrap();
    assert_eq!(read_corpus(&p).unwrap(), dialogs);
}

#[test]
fn bad_line_is_reported_by_number() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.jsonl");
    std::fs::write(
        &p,
        "{\"scenario_id\":\"a\",\"success\":false,\"turns\":[]}\n{\"scenario_id\":\"b\",\"success\":false,\"turns\":[{\"role\":\"Agent\",\"act\":\"Recommendation\"}]}\n",
    )
    .unwrap();
    match read_corpus(&p) {
        Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
        other => panic!("{other:?}"),
    }
}

#[test]
fn catalog_and_scenarios_round_trip() {
    let cat = common::catalog();
    let dir = tempfile::tempdir().unwrap();
    cat.save(&dir.path().join("catalog.jsonl")).unwrap();
    assert_eq!(Catalog::load(&dir.path().join("catalog.jsonl")).unwrap(), cat);
    let [train, _, test] = generate_split(
        &cat,
        SplitCounts {
            train: 20,
            dev: 0,
            test: 20,
        },
        3,
    )
    .unwrap();
    let p = dir.path().join("test.jsonl");
    test.save(&p).unwrap();
    let back = ScenarioSet::load(Split::Test, &p).unwrap();
    assert_eq!(back.scenarios, test.scenarios);
    assert!(back.user_ids().is_disjoint(&train.user_ids()));
}
