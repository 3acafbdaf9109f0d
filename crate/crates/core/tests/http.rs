mod common;

use std::net::SocketAddr;

use trajpriv::model::MobilityProfile;
use trajpriv::privacy::{OpParams, SanitizedTrajectory};

use common::{cat_traj, location_multiset};

async fn start(params: OpParams) -> SocketAddr {
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(trajpriv::http::serve(listener, params));
    addr
}

#[tokio::test]
async fn healthz() {
    let addr = start(OpParams::default()).await;
    let body = reqwest::get(format!("http://{addr}/healthz")).await.unwrap().text().await.unwrap();
    assert_eq!(body, "ok");
}

#[tokio::test]
async fn server_params_apply() {
    let params = OpParams { dummy_count: 4, ..OpParams::default() };
    let addr = start(params).await;
    let t = cat_traj("u", "t", "ABC");
    let s: SanitizedTrajectory = reqwest::Client::new()
        .post(format!("http://{addr}/sanitize/dummy_locations"))
        .json(&t)
        .send()
        .await
        .unwrap()
        .json()
        .await
        .unwrap();
    assert_eq!(s.released.len(), 15);
    assert_eq!(s.provenance, vec![0, 0, 0, 0, 0, 1, 1, 1, 1, 1, 2, 2, 2, 2, 2]);
}

#[tokio::test]
async fn sanitize_is_deterministic_and_keeps_multiset() {
    let addr = start(OpParams { rng_seed: 9, ..OpParams::default() }).await;
    let t = cat_traj("u", "t", "ABCDEFGHIJ");
    let client = reqwest::Client::new();
    let mut seen = Vec::new();
    for _ in 0..2 {
        let s: SanitizedTrajectory = client
            .post(format!("http://{addr}/sanitize/loose_pathconf"))
            .json(&t)
            .send()
            .await
            .unwrap()
            .json()
            .await
            .unwrap();
        assert_eq!(location_multiset(s.released.reports()), location_multiset(t.reports()));
        seen.push(s);
    }
    assert_eq!(seen[0], seen[1]);
}

#[tokio::test]
async fn profile_body_returns_array() {
    let addr = start(OpParams::default()).await;
    let p = MobilityProfile::new("u", vec![cat_traj("u", "a", "AB"), cat_traj("u", "b", "CDE")]).unwrap();
    let v: serde_json::Value = reqwest::Client::new()
        .post(format!("http://{addr}/sanitize/cloak"))
        .json(&p)
        .send()
        .await
        .unwrap()
        .json()
        .await
        .unwrap();
    let arr = v.as_array().unwrap();
    assert_eq!(arr.len(), 2);
    assert_eq!(arr[1]["traj_id"], "b");
    assert_eq!(arr[1]["op"], "cloak");
}

#[tokio::test]
async fn errors_are_json() {
    let addr = start(OpParams::default()).await;
    let client = reqwest::Client::new();
    let resp = client.post(format!("http://{addr}/sanitize/cloak")).body("[1, 2").send().await.unwrap();
    assert_eq!(resp.status(), 400);
    let v: serde_json::Value = resp.json().await.unwrap();
    assert!(v["error"].is_string());
    let resp = client.post(format!("http://{addr}/sanitize/nope")).body("{}").send().await.unwrap();
    assert_eq!(resp.status(), 404);
    let resp = client.get(format!("http://{addr}/sanitize/cloak")).send().await.unwrap();
    assert_eq!(resp.status(), 405);
}
