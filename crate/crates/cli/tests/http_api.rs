mod common;

use common::*;
use serde_json::{json, Value};

fn server() -> (Http, tempfile::TempDir) {
    let dir = tempfile::tempdir().unwrap();
    let app = curation::App::open(replay_settings(&dir.path().join("db"))).unwrap();
    (Http::new(app), dir)
}

fn foodon(http: &Http) {
    let path = absolute(std::path::Path::new("ontologies/foodon.json"));
    let (status, body) = http.call("POST", "/collections/foodon/ingest", Some(&json!({"kind": "ontology", "path": path})));
    assert_eq!(status, 200, "{body}");
}

#[test]
fn collection_lifecycle() {
    let (http, _dir) = server();
    let (status, body) = http.call("POST", "/collections", Some(&json!({"name": "terms"})));
    assert_eq!(status, 201, "{body}");
    let (status, body) = http.call("POST", "/collections", Some(&json!({"name": "terms"})));
    assert_eq!(status, 409);
    assert!(body["error_code"].is_string() && body["message"].is_string());

    let obj = json!({"id": "Apple", "label": "apple", "definition": "A pome fruit."});
    let (status, body) = http.call("POST", "/collections/terms/objects", Some(&json!({"object": obj})));
    assert_eq!(status, 201, "{body}");
    assert_eq!(body["object_count"], 1);
    let (status, body) = http.call("GET", "/collections/terms/objects", None);
    assert_eq!(status, 200);
    assert!(body.to_string().contains("A pome fruit."));

    let (status, _) = http.call("GET", "/collections", None);
    assert_eq!(status, 200);
    let (status, _) = http.call("DELETE", "/collections/terms", None);
    assert_eq!(status, 200);
    let (status, body) = http.call("GET", "/collections/terms/objects", None);
    assert_eq!(status, 404, "{body}");
}

#[test]
fn bad_requests_are_400_with_error_json() {
    let (http, _dir) = server();
    let (status, body) = http.call("POST", "/collections", None);
    assert_eq!(status, 400);
    assert!(body["error_code"].is_string());

    let (status, _) = http.call("POST", "/collections", Some(&json!({"nmae": "typo"})));
    assert_eq!(status, 400);

    http.call("POST", "/collections", Some(&json!({"name": "t"})));
    let (status, body) = http.call("POST", "/collections/t/objects", Some(&json!({"object": {"id": "", "label": "x"}})));
    assert_eq!(status, 400, "{body}");
}

#[test]
fn unknown_routes_and_agents_are_404() {
    let (http, _dir) = server();
    let (status, body) = http.call("GET", "/no/such/route", None);
    assert_eq!((status, body["error_code"].as_str()), (404, Some("unknown_route")));
    let (status, body) = http.call("POST", "/agents/oracle", Some(&json!({})));
    assert_eq!((status, body["error_code"].as_str()), (404, Some("unknown_agent")));
    let (status, _) = http.call("GET", "/collections/missing/search?q=x", None);
    assert_eq!(status, 404);
}

#[test]
fn search_hits_are_ranked() {
    let (http, _dir) = server();
    foodon(&http);
    let (status, body) = http.call("GET", "/collections/foodon/search?q=red%20raspberry&k=4", None);
    assert_eq!(status, 200, "{body}");
    let hits = body["hits"].as_array().expect("hits");
    assert_eq!(hits.len(), 4);
    let ranks: Vec<u64> = hits.iter().map(|h| h["rank"].as_u64().unwrap()).collect();
    assert_eq!(ranks, [1, 2, 3, 4]);
    let (status, _) = http.call("GET", "/collections/foodon/search?q=x&k=lots", None);
    assert_eq!(status, 400);
    let (status, body) = http.call("GET", "/collections/foodon/projection", None);
    assert_eq!(status, 200);
    assert_eq!(body["points"].as_array().map(Vec::len), Some(16));
}

#[test]
fn cart_keeps_unique_pairs_and_persists() {
    let dir = tempfile::tempdir().unwrap();
    let db = dir.path().join("db");
    {
        let http = Http::new(curation::App::open(replay_settings(&db)).unwrap());
        foodon(&http);
        let add = json!({"object_id": "RedRaspberry", "source": "foodon"});
        assert_eq!(http.call("POST", "/cart", Some(&add)).0, 200);
        let (_, cart) = http.call("POST", "/cart", Some(&json!({"object_id": "RedRaspberry", "source": "foodon", "purpose": "REFINE"})));
        assert_eq!(cart["items"].as_array().map(Vec::len), Some(1));
        assert_eq!(cart["items"][0]["purpose"], "REFINE");
        let (status, _) = http.call("POST", "/cart", Some(&json!({"object_id": "Nope", "source": "foodon"})));
        assert_eq!(status, 404);
    }
    let http = Http::new(curation::App::open(replay_settings(&db)).unwrap());
    let (_, cart) = http.call("GET", "/cart", None);
    assert_eq!(cart["items"][0]["object_id"], "RedRaspberry");
    let (_, cart) = http.call("POST", "/cart", Some(&json!({"action": "remove", "object_id": "RedRaspberry", "source": "foodon"})));
    assert_eq!(cart["items"], Value::Array(vec![]));
}

#[test]
fn config_and_wrappers_are_reported() {
    let (http, _dir) = server();
    let (status, config) = http.call("GET", "/config", None);
    assert_eq!(status, 200);
    assert!(config.is_object());
    let (status, wrappers) = http.call("GET", "/wrappers", None);
    assert_eq!(status, 200);
    let text = wrappers.to_string();
    assert!(text.contains("pubmed") && text.contains("wikipedia"), "{text}");
}
