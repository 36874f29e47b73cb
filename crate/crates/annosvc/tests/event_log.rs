mod common;

use std::io::Write;

use altogether_annosvc::{complete_checklist, CreateProject, Service, ServiceError, Submission};
use common::items;

fn populate(svc: &Service) -> String {
    let p = svc
        .create_project(CreateProject {
            name: "logged".into(),
            items: Some(items(3)),
            vendors: vec!["A".into(), "B".into()],
            ..Default::default()
        })
        .unwrap();
    for a in svc.open_round(&p.id, 2).unwrap().into_iter().take(2) {
        svc.submit(
            &a.id,
            Submission {
                caption: format!("a photo of {} with more detail", a.item_id),
                checklist: complete_checklist(),
                annotator: a.vendor.clone(),
            },
        )
        .unwrap();
    }
    p.id
}

#[test]
fn restart_replays_the_log() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("events.jsonl");
    let (pid, before) = {
        let svc = Service::open(&path).unwrap();
        let pid = populate(&svc);
        (pid.clone(), svc.corpus(&pid).unwrap())
    };
    let svc = Service::open(&path).unwrap();
    let after = svc.corpus(&pid).unwrap();
    for item in before.items() {
        assert_eq!(before.rounds(&item.id), after.rounds(&item.id));
    }
    let a = svc.assignments(&pid, 2).unwrap();
    assert_eq!(
        a.iter()
            .filter(|a| a.state == altogether_annosvc::AssignmentState::Open)
            .count(),
        1
    );
    assert_eq!(
        svc.stats(&pid).unwrap(),
        Service::open(&path).unwrap().stats(&pid).unwrap()
    );

    // the reopened service keeps appending to the same log
    let open = a
        .iter()
        .find(|a| a.state == altogether_annosvc::AssignmentState::Open)
        .unwrap();
    svc.submit(
        &open.id,
        Submission {
            caption: "a photo of the last one".into(),
            checklist: complete_checklist(),
            annotator: open.vendor.clone(),
        },
    )
    .unwrap();
    drop(svc);
    let svc = Service::open(&path).unwrap();
    assert_eq!(svc.stats(&pid).unwrap().len(), 2);
}

#[test]
fn rejected_requests_leave_no_trace() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("events.jsonl");
    let svc = Service::open(&path).unwrap();
    let pid = populate(&svc);
    let lines = std::fs::read_to_string(&path).unwrap().lines().count();
    let a = &svc.assignments(&pid, 2).unwrap()[2];
    let bad = Submission {
        caption: "This image shows a dog".into(),
        checklist: complete_checklist(),
        annotator: a.vendor.clone(),
    };
    assert!(matches!(
        svc.submit(&a.id, bad),
        Err(ServiceError::Rejected(_))
    ));
    assert!(svc.open_round(&pid, 3).is_err());
    assert_eq!(
        std::fs::read_to_string(&path).unwrap().lines().count(),
        lines
    );
}

#[test]
fn audit_refuses_a_forged_submission() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("events.jsonl");
    let pid = populate(&Service::open(&path).unwrap());
    let forged = serde_json::json!({
        "event": "submitted",
        "assignment_id": format!("{pid}-r2-3"),
        "submission": {
            "caption": "This image shows a dog",
            "checklist": complete_checklist(),
            "annotator": "A",
        },
        "ts": 0.0,
    });
    let mut f = std::fs::OpenOptions::new()
        .append(true)
        .open(&path)
        .unwrap();
    writeln!(f, "{forged}").unwrap();
    drop(f);
    let lines = std::fs::read_to_string(&path).unwrap().lines().count();
    match Service::open(&path) {
        Err(ServiceError::Replay { line, detail }) => {
            assert_eq!(line, lines);
            assert!(
                detail.contains("starting_prompt") || detail.contains("annotator"),
                "{detail}"
            );
        }
        Err(e) => panic!("unexpected error {e}"),
        Ok(_) => panic!("forged event accepted"),
    }
}

#[test]
fn garbage_line_is_a_replay_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("events.jsonl");
    populate(&Service::open(&path).unwrap());
    let mut f = std::fs::OpenOptions::new()
        .append(true)
        .open(&path)
        .unwrap();
    writeln!(f, "{{\"event\": \"submitted\", \"trunc").unwrap();
    drop(f);
    assert!(matches!(
        Service::open(&path),
        Err(ServiceError::Replay { .. })
    ));
}
