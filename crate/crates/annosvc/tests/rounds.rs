mod common;

use std::collections::HashMap;
use std::sync::Arc;

use altogether_annosvc::{complete_checklist, Alignment, CreateProject, Service, Submission};
use altogether_core::corpus::{round_stats, Corpus, EmbeddingMatrix, RoundStats, TextEmbedder};
use common::{fixture_dir, fixture_items, fixture_rounds, Client};
use serde_json::json;

/// Replay the bundled fixture through the HTTP API: round r of every item is
/// submitted by whichever vendor the rotation assigned.
async fn replay_fixture(c: &Client) -> String {
    let rounds = fixture_rounds();
    let (status, p) = c
        .create("fixture", &fixture_items(), &["vendor-a", "vendor-b"])
        .await;
    assert_eq!(status, 201);
    let pid = p["id"].as_str().unwrap().to_string();
    for r in 2..=3u32 {
        let (_, opened) = c
            .post(&format!("/projects/{pid}/rounds"), &json!({"round_no": r}))
            .await;
        for a in opened["assignments"].as_array().unwrap() {
            let item = a["item_id"].as_str().unwrap().to_string();
            let body = json!({
                "caption": rounds[&(item, r)],
                "checklist": complete_checklist(),
                "annotator": a["vendor"],
            });
            let (status, resp) = c
                .post(
                    &format!("/assignments/{}/submit", a["id"].as_str().unwrap()),
                    &body,
                )
                .await;
            assert_eq!(status, 200, "{resp}");
        }
    }
    pid
}

#[tokio::test]
async fn fixture_statistics_match_direct_computation() {
    let c = Client::start(Service::in_memory()).await;
    let pid = replay_fixture(&c).await;
    let (_, body) = c.get(&format!("/projects/{pid}/stats")).await;
    let served: Vec<RoundStats> = serde_json::from_value(body["rounds"].clone()).unwrap();

    let dir = fixture_dir();
    let mut corpus = Corpus::ingest_pairs(&dir.join("items.jsonl")).unwrap();
    corpus.load_rounds(&dir.join("rounds.jsonl")).unwrap();
    let direct: Vec<RoundStats> = (1..=3)
        .map(|r| round_stats(&corpus, r, None).unwrap())
        .collect();
    assert_eq!(served.len(), 3);
    for (s, d) in served.iter().zip(&direct) {
        assert_eq!(s.round_no, d.round_no);
        assert_eq!(s.item_count, 20);
        assert_eq!(s.mean_length_words, d.mean_length_words);
        assert_eq!(s.mean_edit_distance, d.mean_edit_distance);
    }
    assert!(served[2].mean_length_words >= served[1].mean_length_words);
    assert!(served[1].mean_length_words >= served[0].mean_length_words);
    assert!(served[2].mean_edit_distance < served[1].mean_edit_distance);
}

struct Bag(HashMap<&'static str, usize>);

impl TextEmbedder for Bag {
    fn embed(&self, text: &str) -> Vec<f32> {
        let mut v = vec![0.0; self.0.len()];
        for w in text.split(|c: char| !c.is_alphanumeric()) {
            if let Some(&i) = self.0.get(w.to_lowercase().as_str()) {
                v[i] += 1.0;
            }
        }
        v
    }
}

#[test]
fn alignment_column_needs_registered_embeddings() {
    let mut items = common::items(2);
    items[0].alt_text = "owl".into();
    items[1].alt_text = "a photo of a fox".into();
    for (i, it) in items.iter_mut().enumerate() {
        it.embedding_row = Some(i);
    }
    let index = items
        .iter()
        .enumerate()
        .map(|(i, it)| (it.id.clone(), i))
        .collect();
    let embeddings = EmbeddingMatrix::new(2, vec![1.0, 0.0, 0.0, 1.0], index).unwrap();
    let embedder = Arc::new(Bag(HashMap::from([("owl", 0), ("fox", 1)])));
    let svc = Service::in_memory().with_alignment(Alignment {
        embeddings,
        embedder,
    });
    let req = CreateProject {
        name: "aligned".into(),
        items: Some(items.clone()),
        vendors: vec!["A".into()],
        ..Default::default()
    };
    let p = svc.create_project(req.clone()).unwrap();
    let r1 = &svc.stats(&p.id).unwrap()[0];
    assert!(r1.mean_alignment.unwrap() > 0.0);

    let plain = Service::in_memory();
    let p = plain.create_project(req).unwrap();
    assert!(plain.stats(&p.id).unwrap()[0].mean_alignment.is_none());

    let a = svc.open_round("p1", 2).unwrap();
    svc.submit(
        &a[0].id,
        Submission {
            caption: "a photo of an owl".into(),
            checklist: complete_checklist(),
            annotator: "A".into(),
        },
    )
    .unwrap();
    assert_eq!(
        svc.stats("p1").unwrap().len(),
        1,
        "round 2 is not complete yet"
    );
}
