#![allow(dead_code)]

use std::path::PathBuf;
use std::sync::Arc;

use altogether_annosvc::{spawn, Service};
use altogether_core::corpus::{ImageItem, Source};
use serde_json::{json, Value};

pub fn fixture_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/annotation")
}

pub struct Client {
    pub base: String,
    pub http: reqwest::Client,
}

impl Client {
    pub async fn start(service: Service) -> Client {
        Self::start_shared(Arc::new(service)).await
    }

    pub async fn start_shared(service: Arc<Service>) -> Client {
        let (addr, _) = spawn("127.0.0.1:0".parse().unwrap(), service)
            .await
            .unwrap();
        Client {
            base: format!("http://{addr}"),
            http: reqwest::Client::new(),
        }
    }

    pub async fn get(&self, path: &str) -> (u16, Value) {
        let r = self
            .http
            .get(format!("{}{path}", self.base))
            .send()
            .await
            .unwrap();
        (r.status().as_u16(), r.json().await.unwrap())
    }

    pub async fn post(&self, path: &str, body: &Value) -> (u16, Value) {
        let r = self
            .http
            .post(format!("{}{path}", self.base))
            .json(body)
            .send()
            .await
            .unwrap();
        (r.status().as_u16(), r.json().await.unwrap())
    }

    pub async fn create(&self, name: &str, items: &[ImageItem], vendors: &[&str]) -> (u16, Value) {
        self.post(
            "/projects",
            &json!({ "name": name, "items": items, "vendors": vendors }),
        )
        .await
    }

    pub async fn next(&self, project: &str, annotator: &str) -> Value {
        let (status, body) = self
            .get(&format!(
                "/projects/{project}/tasks/next?annotator={annotator}"
            ))
            .await;
        assert_eq!(status, 200, "{body}");
        body
    }
}

pub fn items(n: usize) -> Vec<ImageItem> {
    (0..n)
        .map(|i| ImageItem {
            id: format!("item-{i}"),
            image_ref: format!("img/{i}.jpg"),
            alt_text: format!("a photo of object {i}"),
            source: Source::Wit,
            embedding_row: None,
        })
        .collect()
}

pub fn checklist() -> Value {
    json!(altogether_annosvc::complete_checklist())
}

/// Fixture captions keyed by (item id, round).
pub fn fixture_rounds() -> std::collections::HashMap<(String, u32), String> {
    let text = std::fs::read_to_string(fixture_dir().join("rounds.jsonl")).unwrap();
    text.lines()
        .map(|l| {
            let v: Value = serde_json::from_str(l).unwrap();
            (
                (
                    v["id"].as_str().unwrap().to_string(),
                    v["round"].as_u64().unwrap() as u32,
                ),
                v["caption"].as_str().unwrap().to_string(),
            )
        })
        .collect()
}

pub fn fixture_items() -> Vec<ImageItem> {
    let text = std::fs::read_to_string(fixture_dir().join("items.jsonl")).unwrap();
    text.lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}
