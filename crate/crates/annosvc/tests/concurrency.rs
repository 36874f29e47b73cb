mod common;

use std::collections::BTreeMap;
use std::sync::Arc;

use altogether_annosvc::Service;
use common::{checklist, fixture_items, fixture_rounds, Client};
use serde_json::json;

struct Served {
    item: String,
    round: u32,
    previous: String,
    vendor: String,
}

/// Work one round's queue until it is empty. Returns what was served for
/// every accepted submission and the number of lost races.
async fn worker(
    c: Arc<Client>,
    pid: String,
    vendor: &'static str,
    round: u32,
) -> (Vec<Served>, usize) {
    let captions = fixture_rounds();
    let mut served = Vec::new();
    let mut conflicts = 0;
    loop {
        let next = c.next(&pid, vendor).await;
        if next["status"] == "empty" {
            return (served, conflicts);
        }
        let task = &next["task"];
        let item = task["item_id"].as_str().unwrap().to_string();
        let previous = task["previous_caption"].as_str().unwrap().to_string();
        assert_eq!(task["round_no"], round);
        let caption = captions
            .get(&(item.clone(), round))
            .cloned()
            .unwrap_or_else(|| format!("{previous}, seen again in round {round}"));
        let body = json!({"caption": caption, "checklist": checklist(), "annotator": vendor});
        let (status, resp) = c
            .post(
                &format!(
                    "/assignments/{}/submit",
                    task["assignment_id"].as_str().unwrap()
                ),
                &body,
            )
            .await;
        match status {
            200 => served.push(Served {
                item,
                round,
                previous,
                vendor: vendor.to_string(),
            }),
            409 => {
                assert_eq!(resp["error"]["code"], "already_submitted");
                conflicts += 1;
            }
            other => panic!("unexpected {other}: {resp}"),
        }
    }
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn eight_clients_keep_the_round_chain_intact() {
    let svc = Arc::new(Service::in_memory());
    let c = Arc::new(Client::start_shared(svc.clone()).await);
    let (status, p) = c
        .create("concurrent", &fixture_items(), &["vendor-a", "vendor-b"])
        .await;
    assert_eq!(status, 201);
    let pid = p["id"].as_str().unwrap().to_string();

    let mut served = Vec::new();
    for round in 2..=4 {
        let (status, _) = c
            .post(
                &format!("/projects/{pid}/rounds"),
                &json!({"round_no": round}),
            )
            .await;
        assert_eq!(status, 201);
        let handles: Vec<_> = (0..8)
            .map(|k| {
                let vendor = if k % 2 == 0 { "vendor-a" } else { "vendor-b" };
                tokio::spawn(worker(c.clone(), pid.clone(), vendor, round))
            })
            .collect();
        for h in handles {
            let (s, _) = h.await.unwrap();
            served.extend(s);
        }
    }

    assert_eq!(
        served.len(),
        20 * 3,
        "each assignment accepted exactly once"
    );
    let corpus = svc.corpus(&pid).unwrap();
    let mut vendors: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for s in &served {
        let stored_prev = &corpus.round(&s.item, s.round - 1).unwrap().caption;
        assert_eq!(&s.previous, stored_prev, "{} round {}", s.item, s.round);
        let rec = corpus.round(&s.item, s.round).unwrap();
        assert_eq!(rec.annotator, s.vendor);
        vendors.entry(&s.item).or_default().push(&s.vendor);
    }
    for (item, mut v) in vendors {
        assert_eq!(v.len(), 3);
        v.dedup();
        assert_eq!(v.len(), 3, "{item}: vendor did not swap");
    }
}
