//! Rebuilds `fixtures/completions.yaml` and `fixtures/http/` from the
//! scenario files: `cargo test -p curation --test fixtures_regen -- --ignored`.

mod common;

use std::collections::BTreeMap;
use std::fs;
use std::sync::Arc;

use common::*;
use curation_core::http::{save_exchange, Exchange, HttpRequest, HttpResponse, ReplayTransport};
use curation_core::providers::{load_fixture_file, save_fixture_file, FixtureEntry};

fn generate() -> (BTreeMap<String, FixtureEntry>, Vec<(HttpRequest, HttpResponse)>) {
    let scenarios = load_scenarios();
    let exchanges = stub_exchanges(&scenarios, &SourceDb::load());
    let mut transport = ReplayTransport::new();
    for (req, resp) in &exchanges {
        transport.insert(req, resp.clone());
    }
    let transport = Arc::new(transport);
    let mut completions: BTreeMap<String, FixtureEntry> = BTreeMap::new();
    for sc in &scenarios {
        let replies: Vec<(String, String)> = sc
            .agent_steps()
            .flat_map(|s| s.all_replies())
            .map(|r| (sc.name.clone(), r))
            .collect();
        let (app, mock) = recording_app(&replies, transport.clone());
        for (i, r) in run_scenario(&mut Direct(&app), sc).into_iter().enumerate() {
            if let Err(e) = r {
                panic!("{} step {i}: {e}", sc.name);
            }
        }
        let recorded = mock.recorded();
        assert_eq!(recorded.len(), replies.len(), "{}: not every scripted reply was used", sc.name);
        for (digest, entry) in recorded {
            if let Some(prev) = completions.get(&digest) {
                assert_eq!(prev.text, entry.text, "{}: prompt {digest} already has a different reply", sc.name);
                continue;
            }
            completions.insert(digest, entry);
        }
    }
    (completions, exchanges)
}

#[test]
#[ignore]
fn regenerate_fixtures() {
    let (completions, exchanges) = generate();
    save_fixture_file(&completions_file(), &completions).unwrap();
    let dir = http_dir();
    fs::create_dir_all(&dir).unwrap();
    for entry in fs::read_dir(&dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "json") {
            fs::remove_file(path).unwrap();
        }
    }
    for (request, response) in exchanges {
        save_exchange(&dir, &Exchange { request, response }).unwrap();
    }
}

#[test]
fn recorded_fixtures_match_scenarios() {
    let (completions, exchanges) = generate();
    let on_disk = load_fixture_file(&completions_file()).unwrap();
    assert_eq!(on_disk, completions, "completions.yaml is stale; rerun the ignored regenerate_fixtures test");
    let replay = ReplayTransport::from_dir(&http_dir()).unwrap();
    assert_eq!(replay.len(), exchanges.len(), "fixtures/http is stale");
    for (request, response) in exchanges {
        use curation_core::http::HttpTransport;
        assert_eq!(replay.send(&request).unwrap(), response, "stale exchange for {}", request.url);
    }
}
