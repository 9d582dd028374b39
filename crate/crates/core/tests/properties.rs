use std::sync::Arc;

use curation_core::agents::{
    agent_chat, agent_match, parse_llm_object, repair_schema, AgentContext, BootstrapConfig, ChatOptions,
};
use curation_core::prompts::PromptLibrary;
use curation_core::providers::{Embedder, HashEmbedder, MockProvider, ProviderSet, TableEmbedder};
use curation_core::schema::{AttributeSpec, ClassSpec, SchemaSpec};
use curation_core::sources::WrapperRegistry;
use curation_core::store::{export_bundle, import_bundle, mmr_rerank, similarity, IndexOptions, MmrParams, Query};
use curation_core::{canonical_serialize, Collection, CuratedObject, DistanceMetric, Relationship, Store};
use proptest::prelude::*;
use serde_json::{json, Value};

fn metric() -> impl Strategy<Value = DistanceMetric> {
    prop_oneof![
        Just(DistanceMetric::Cosine),
        Just(DistanceMetric::Euclidean),
        Just(DistanceMetric::NegativeInnerProduct)
    ]
}

fn vector(dim: usize) -> impl Strategy<Value = Vec<f32>> {
    prop::collection::vec(-1.0f32..1.0, dim).prop_filter("non-zero", |v| v.iter().any(|x| x.abs() > 1e-3))
}

fn text() -> impl Strategy<Value = String> {
    prop_oneof![
        "[a-z]{1,8}( [a-z]{1,8}){0,3}",
        "[ -~]{1,24}",
        Just("yes".to_string()),
        Just("null".to_string()),
        Just("- item".to_string()),
        Just("key: value".to_string()),
        Just("line one\nline two".to_string()),
        Just("Żółw ñandú".to_string()),
        Just("0.50".to_string()),
    ]
    .prop_filter("non-blank", |s| !s.trim().is_empty())
}

fn extra_value() -> impl Strategy<Value = Value> {
    let leaf = prop_oneof![
        text().prop_map(Value::from),
        any::<i32>().prop_map(Value::from),
        any::<bool>().prop_map(Value::from),
        (-1.0e6f64..1.0e6).prop_map(Value::from),
    ];
    leaf.prop_recursive(2, 8, 3, |inner| {
        prop_oneof![
            prop::collection::vec(inner.clone(), 1..3).prop_map(Value::Array),
            prop::collection::btree_map("[a-z]{1,6}", inner, 1..3)
                .prop_map(|m| Value::Object(m.into_iter().collect())),
        ]
    })
}

prop_compose! {
    fn object()(
        id in "[A-Za-z][A-Za-z0-9_:]{0,12}",
        label in text(),
        definition in prop::option::of(text()),
        aliases in prop::collection::vec(text(), 0..3),
        relationships in prop::collection::vec((text(), text()), 0..3),
        original_id in prop::option::of("[A-Z]{2,6}:[0-9]{7}"),
        extras in prop::collection::btree_map("(comment|xref|note|score|parts)", extra_value(), 0..3),
    ) -> CuratedObject {
        let mut o = CuratedObject::new(id, label);
        o.definition = definition;
        o.aliases = aliases;
        o.relationships = relationships.into_iter().map(|(p, t)| Relationship::new(p, t)).collect();
        o.original_id = original_id;
        o.extras = extras.into_iter().collect();
        o
    }
}

fn indexed(metric: DistanceMetric, vectors: &[Vec<f32>]) -> Collection {
    let mut coll = Collection::with_metric("p", metric);
    let objects: Vec<CuratedObject> =
        (0..vectors.len()).map(|i| CuratedObject::new(format!("o{i}"), format!("item {i}"))).collect();
    coll.upsert(objects.clone()).unwrap();
    let table = TableEmbedder::new(objects.iter().zip(vectors).map(|(o, v)| (coll.embedding_text(o), v.clone())));
    coll.build_index(&table, IndexOptions::default()).unwrap();
    coll
}

fn with_vectors(max: usize) -> impl Strategy<Value = (Vec<f32>, Vec<Vec<f32>>)> {
    (1usize..=8, 1usize..=max).prop_flat_map(|(dim, n)| (vector(dim), prop::collection::vec(vector(dim), n)))
}

proptest! {
    #[test]
    fn canonical_form_round_trips(o in object()) {
        prop_assert!(o.validate().is_ok());
        let back = parse_llm_object(&canonical_serialize(&o)).unwrap();
        prop_assert_eq!(back, o);
    }

    #[test]
    fn canonical_form_ignores_extras_order(o in object()) {
        let mut reversed = o.clone();
        reversed.extras = o.extras.iter().rev().map(|(k, v)| (k.clone(), v.clone())).collect();
        prop_assert_eq!(canonical_serialize(&o), canonical_serialize(&reversed));
    }

    #[test]
    fn cosine_is_symmetric_and_scale_invariant(
        (u, v) in (1usize..=16).prop_flat_map(|d| (vector(d), vector(d))),
        a in 0.01f32..100.0,
        b in 0.01f32..100.0,
    ) {
        let uv = similarity(&u, &v, DistanceMetric::Cosine).unwrap();
        let vu = similarity(&v, &u, DistanceMetric::Cosine).unwrap();
        prop_assert_eq!(uv, vu);
        let su: Vec<f32> = u.iter().map(|x| x * a).collect();
        let sv: Vec<f32> = v.iter().map(|x| x * b).collect();
        let scaled = similarity(&su, &sv, DistanceMetric::Cosine).unwrap();
        prop_assert!((uv - scaled).abs() < 1e-5, "{} vs {}", uv, scaled);
    }

    #[test]
    fn knn_equals_exhaustive_sort(metric in metric(), (q, vectors) in with_vectors(50), k in 1usize..60) {
        let coll = indexed(metric, &vectors);
        let hits = coll.knn_search(&Query::Vector(q.clone()), k, None).unwrap();
        let mut want: Vec<(usize, f64)> =
            vectors.iter().enumerate().map(|(i, v)| (i, metric.distance(&q, v).unwrap())).collect();
        want.sort_by(|a, b| a.1.total_cmp(&b.1));
        want.truncate(k);
        prop_assert_eq!(hits.len(), want.len());
        for (r, (h, (i, d))) in hits.iter().zip(&want).enumerate() {
            prop_assert_eq!(h.rank, r + 1);
            prop_assert_eq!(&h.object_id, &format!("o{i}"));
            prop_assert_eq!(h.distance, *d);
        }
        prop_assert!(hits.windows(2).all(|w| w[0].distance <= w[1].distance));
    }

    #[test]
    fn mmr_output_shape(
        metric in metric(),
        (q, vectors) in with_vectors(10),
        lambda in 0.0f64..=1.0,
        count in 1usize..12,
    ) {
        let cands: Vec<(String, Vec<f32>)> = vectors.iter().enumerate().map(|(i, v)| (format!("c{i}"), v.clone())).collect();
        let pool = count.max(cands.len());
        let hits = mmr_rerank(&q, &cands, MmrParams::new(lambda, pool, count).unwrap(), metric).unwrap();
        prop_assert_eq!(hits.len(), count.min(cands.len()));
        let mut ids: Vec<&str> = hits.iter().map(|h| h.object_id.as_str()).collect();
        prop_assert!(ids.iter().all(|id| cands.iter().any(|(c, _)| c == id)));
        prop_assert_eq!(hits.iter().map(|h| h.rank).collect::<Vec<_>>(), (1..=hits.len()).collect::<Vec<_>>());
        ids.sort_unstable();
        ids.dedup();
        prop_assert_eq!(ids.len(), hits.len());
    }

    #[test]
    fn mmr_with_lambda_one_is_relevance_order(metric in metric(), (q, vectors) in with_vectors(10)) {
        let cands: Vec<(String, Vec<f32>)> = vectors.iter().enumerate().map(|(i, v)| (format!("c{i}"), v.clone())).collect();
        let n = cands.len();
        let hits = mmr_rerank(&q, &cands, MmrParams::new(1.0, n, n).unwrap(), metric).unwrap();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|a, b| {
            let ra = metric.relatedness(&q, &cands[*a].1).unwrap();
            let rb = metric.relatedness(&q, &cands[*b].1).unwrap();
            rb.total_cmp(&ra)
        });
        let want: Vec<String> = order.into_iter().map(|i| format!("c{i}")).collect();
        let got: Vec<String> = hits.into_iter().map(|h| h.object_id).collect();
        prop_assert_eq!(got, want);
    }

    #[test]
    fn embed_preserves_length_and_order(texts in prop::collection::vec(text(), 1..12)) {
        let e = HashEmbedder::new(32);
        let batch = e.embed(&texts).unwrap();
        prop_assert_eq!(batch.len(), texts.len());
        for (t, v) in texts.iter().zip(&batch) {
            prop_assert_eq!(v, &e.embed(std::slice::from_ref(t)).unwrap()[0]);
        }
        let other = MockProvider::builder().dimension(32).build();
        prop_assert_eq!(other.embed(&texts).unwrap(), batch);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn bundle_round_trip_is_identity(objects in prop::collection::vec(object(), 1..8), metric in metric()) {
        let mut coll = Collection::with_metric("bundled", metric);
        let mut seen = std::collections::HashSet::new();
        let unique: Vec<CuratedObject> = objects.into_iter().filter(|o| seen.insert(o.id.clone())).collect();
        coll.upsert(unique).unwrap();
        coll.build_index(&HashEmbedder::new(16), IndexOptions::default()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        export_bundle(&coll, dir.path()).unwrap();
        let back = import_bundle(dir.path()).unwrap();
        prop_assert!(back.objects().eq(coll.objects()));
        let (a, b) = (coll.index().unwrap(), back.index().unwrap());
        prop_assert_eq!(&a.metadata, &b.metadata);
        prop_assert_eq!(a.rows.len(), b.rows.len());
        for ((ia, va), (ib, vb)) in a.rows.iter().zip(&b.rows) {
            prop_assert_eq!(ia, ib);
            prop_assert!(va.iter().zip(vb).all(|(x, y)| x.to_bits() == y.to_bits()));
        }
    }

    #[test]
    fn rebuild_embeds_only_changed_objects(total in 2usize..20, changed in prop::collection::btree_set(0usize..20, 0..6)) {
        let provider = MockProvider::builder().dimension(16).build();
        let mut coll = Collection::new("inc");
        let objects: Vec<CuratedObject> = (0..total).map(|i| CuratedObject::new(format!("t{i}"), format!("term {i}"))).collect();
        coll.upsert(objects.clone()).unwrap();
        coll.build_index(&provider, IndexOptions::default()).unwrap();
        let before: usize = provider.embed_batches().iter().sum();
        prop_assert_eq!(before, total);
        let edits: Vec<CuratedObject> = changed
            .iter()
            .filter(|i| **i < total)
            .map(|i| objects[*i].clone().with_definition("edited"))
            .collect();
        let n = edits.len();
        if n > 0 {
            coll.upsert(edits).unwrap();
        }
        coll.build_index(&provider, IndexOptions::default()).unwrap();
        let after: usize = provider.embed_batches().iter().sum();
        prop_assert_eq!(after - before, n);
        prop_assert!(coll.is_fresh());
    }

    #[test]
    fn chat_references_match_markers(
        n in 1usize..8,
        k in 1usize..6,
        markers in prop::collection::vec(0usize..12, 0..6),
    ) {
        let body: String = markers.iter().map(|m| format!("Claim [{m}]. ")).collect();
        let provider = MockProvider::builder().strict(false).script(None, body.clone()).build();
        let ctx = context(provider);
        load(&ctx, "kb", (0..n).map(|i| CuratedObject::new(format!("K{i}"), format!("knowledge {i}"))).collect());
        let r = agent_chat(&ctx, &["kb".to_string()], "what is known", ChatOptions { k, background: None }).unwrap();
        let shown = r.context.len();
        prop_assert_eq!(shown, n.min(k));
        prop_assert!(r.references.iter().all(|x| (1..=shown).contains(&x.index)));
        let mut resolved: Vec<usize> = markers.iter().copied().filter(|m| (1..=shown).contains(m)).collect();
        resolved.sort_unstable();
        resolved.dedup();
        prop_assert_eq!(r.references.iter().map(|x| x.index).collect::<Vec<_>>(), resolved);
        let mut unresolved: Vec<usize> = Vec::new();
        for m in markers.iter().copied().filter(|m| !(1..=shown).contains(m)) {
            if !unresolved.contains(&m) {
                unresolved.push(m);
            }
        }
        prop_assert_eq!(r.unresolved_markers, unresolved);
    }

    #[test]
    fn match_choice_is_always_a_candidate(n in 1usize..15, top in 1usize..12, reply in "[A-Za-z0-9 :]{0,20}") {
        let provider = MockProvider::builder().strict(false).script(None, format!("chosen: {reply}\nrationale: x")).build();
        let ctx = context(provider);
        load(&ctx, "kb", (0..n).map(|i| CuratedObject::new(format!("K{i}"), format!("knowledge {i}"))).collect());
        let m = agent_match(&ctx, "kb", "knowledge", top).unwrap();
        prop_assert_eq!(m.candidates.len(), n.min(top));
        prop_assert!(m.candidates.iter().any(|c| c.object_id == m.chosen));
    }

    #[test]
    fn schema_repair_is_idempotent(
        main in "[A-Z][a-z]{2,8}",
        attrs in prop::collection::vec("[a-z]{2,8}", 1..5),
        present in prop::collection::vec("[a-z]{2,8}", 0..4),
        with_main in any::<bool>(),
        with_root in any::<bool>(),
    ) {
        let config = BootstrapConfig {
            kb_name: "kb".into(),
            description: "d".into(),
            attributes: attrs,
            main_class: main.clone(),
        };
        let mut classes = Vec::new();
        if with_main {
            classes.push(ClassSpec {
                name: main.clone(),
                description: String::new(),
                attributes: present.into_iter().map(AttributeSpec::string).collect(),
            });
        }
        if with_root {
            classes.push(ClassSpec { name: "Container".into(), description: String::new(), attributes: vec![] });
        }
        let mut schema = SchemaSpec {
            name: "kb".into(),
            root_class: if with_root { "Container".into() } else { String::new() },
            classes,
            ..Default::default()
        };
        repair_schema(&mut schema, &config);
        let once = schema.clone();
        let second = repair_schema(&mut schema, &config);
        prop_assert!(second.is_empty(), "{:?}", second);
        prop_assert_eq!(schema, once);
    }
}

fn context(provider: MockProvider) -> AgentContext {
    let providers = ProviderSet {
        completions: Arc::new(provider),
        embedder: Arc::new(HashEmbedder::new(64)),
    };
    AgentContext::new(
        Arc::new(Store::in_memory()),
        providers,
        Arc::new(WrapperRegistry::new()),
        Arc::new(PromptLibrary::builtin()),
    )
}

fn load(ctx: &AgentContext, name: &str, objects: Vec<CuratedObject>) {
    let handle = ctx.store.get_or_create(name, DistanceMetric::Cosine).unwrap();
    let mut coll = handle.write();
    coll.upsert(objects).unwrap();
    coll.build_index(ctx.providers.embedder.as_ref(), IndexOptions::default()).unwrap();
}

#[test]
fn non_scalar_extras_survive_canonical_round_trip() {
    let o = CuratedObject::new("Nested", "nested thing").with_extra("parts", json!([{"a": [1, 2]}, {"b": "x: y"}]));
    assert_eq!(parse_llm_object(&canonical_serialize(&o)).unwrap(), o);
}
