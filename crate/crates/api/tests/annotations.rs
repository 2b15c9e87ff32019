mod common;

use std::collections::BTreeSet;

use serde_json::json;

use common::{app_for, copy_dir, fixture, get, post_json};

fn scratch() -> (tempfile::TempDir, axum::Router) {
    let dir = tempfile::tempdir().unwrap();
    copy_dir(&fixture().store, dir.path());
    let app = app_for(dir.path());
    (dir, app)
}

const SNAP: &str = "NEX-DCP_CESM1-CAM5_pr_2008-07-01";

#[tokio::test]
async fn post_then_get_round_trips() {
    let (_dir, app) = scratch();
    let body = json!({
        "author": "rk",
        "text": "wet July in the Southeast",
        "pin": {"lat": 33.5, "lon": -84.25},
        "snapshot": SNAP,
    });
    let r = post_json(&app, "/api/annotations", &body).await;
    assert_eq!(r.status, 201);
    let created = r.json();
    assert_eq!(created["author"], "rk");
    assert_eq!(created["pin"], json!({"lat": 33.5, "lon": -84.25}));

    let page = get(&app, &format!("/api/annotations?snapshot={SNAP}")).await.json();
    assert_eq!(page["total"], 1);
    assert_eq!(page["items"][0], created);

    let inside = get(&app, "/api/annotations?bbox=-90,30,-80,35").await.json();
    assert_eq!(inside["total"], 1);
    let outside = get(&app, "/api/annotations?bbox=-120,30,-110,35").await.json();
    assert_eq!(outside["total"], 0);
    let other = get(&app, "/api/annotations?snapshot=NEX-DCP_CESM1-CAM5_pr_2008-08-01").await.json();
    assert_eq!(other["total"], 0);
}

#[tokio::test]
async fn unpinned_notes_only_show_unfiltered() {
    let (_dir, app) = scratch();
    let r = post_json(&app, "/api/annotations", &json!({"author": "a", "text": "general remark"})).await;
    assert_eq!(r.status, 201);
    assert_eq!(get(&app, "/api/annotations").await.json()["total"], 1);
    assert_eq!(get(&app, &format!("/api/annotations?snapshot={SNAP}")).await.json()["total"], 0);
    assert_eq!(get(&app, "/api/annotations?bbox=-180,-90,180,90").await.json()["total"], 0);
}

#[tokio::test]
async fn rejected_posts() {
    let (_dir, app) = scratch();
    let cases = [
        (json!({"text": "no author"}), 400, "missing_author"),
        (json!({"author": "  ", "text": "blank author"}), 400, "missing_author"),
        (json!({"author": "a", "snapshot": "NEX-DCP_CESM1-CAM5_pr_2099-01-01"}), 404, "unknown_snapshot"),
        (json!({"author": "a", "snapshot": "bad key"}), 400, "malformed_index"),
        (json!({"author": "a", "pin": {"lat": 95.0, "lon": 0.0}}), 400, "bad_pin"),
        (json!({"author": 3}), 400, "bad_body"),
    ];
    for (body, status, code) in cases {
        let r = post_json(&app, "/api/annotations", &body).await;
        assert_eq!(r.status, status, "{body}");
        assert_eq!(r.code(), code, "{body}");
    }
    let req = axum::http::Request::post("/api/annotations")
        .body(axum::body::Body::from("{not json"))
        .unwrap();
    let r = common::send(&app, req).await;
    assert_eq!(r.status, 400);
    assert_eq!(r.code(), "bad_body");
    assert_eq!(get(&app, "/api/annotations").await.json()["total"], 0);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn concurrent_posts_all_persist_with_distinct_ids() {
    let (dir, app) = scratch();
    let mut tasks = Vec::new();
    for i in 0..24 {
        let app = app.clone();
        tasks.push(tokio::spawn(async move {
            let body = json!({"author": format!("client-{}", i % 2), "text": format!("note {i}"), "snapshot": SNAP});
            post_json(&app, "/api/annotations", &body).await
        }));
    }
    let mut ids = BTreeSet::new();
    for t in tasks {
        let r = t.await.unwrap();
        assert_eq!(r.status, 201);
        ids.insert(r.json()["id"].as_u64().unwrap());
    }
    assert_eq!(ids.len(), 24);

    let page = get(&app, &format!("/api/annotations?snapshot={SNAP}&limit=10")).await.json();
    assert_eq!(page["total"], 24);
    assert_eq!(page["items"].as_array().unwrap().len(), 10);
    assert_eq!(page["next_offset"], 10);

    // A fresh process over the same store sees the same log.
    drop(app);
    let reopened = app_for(dir.path());
    let all = get(&reopened, "/api/annotations?limit=100").await.json();
    let texts: BTreeSet<String> = all["items"]
        .as_array()
        .unwrap()
        .iter()
        .map(|a| a["text"].as_str().unwrap().to_string())
        .collect();
    assert_eq!(texts.len(), 24);
    let ids2: BTreeSet<u64> = all["items"].as_array().unwrap().iter().map(|a| a["id"].as_u64().unwrap()).collect();
    assert_eq!(ids2, ids);
}
