use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use cohortflow::data::synth::{generate_synthetic, SynthSpec};
use cohortflow::data::SeverityCoding;
use cohortflow::graph::{train_autoencoder, PatientGraph, TrainConfig};
use cohortflow::pipeline::AnalysisConfig;
use cohortflow_service::{router, Session};
use http_body_util::BodyExt;
use serde_json::Value;
use std::sync::Arc;
use tower::ServiceExt;

fn analysis() -> AnalysisConfig {
    AnalysisConfig { neighbors: 5, ..AnalysisConfig::default() }
}

fn app(with_model: bool) -> Router {
    let s = generate_synthetic(&SynthSpec { n: 40, arm_a: 20, ..SynthSpec::default() }, 7).unwrap();
    let coding = SeverityCoding::default();
    let params = with_model.then(|| {
        let graph = PatientGraph::from_cohort(&s.cohort, &coding, 5).unwrap();
        let config = TrainConfig { epochs: 3, hidden: 12, latent: 6, lr: 1e-3, ..TrainConfig::default() };
        train_autoencoder(&graph, &config, 7).unwrap().params
    });
    let session = Session::new(s.cohort, coding, analysis(), params).unwrap();
    router(Arc::new(session))
}

async fn get(app: &Router, uri: &str) -> (StatusCode, Vec<u8>) {
    let res = app.clone().oneshot(Request::get(uri).body(Body::empty()).unwrap()).await.unwrap();
    let status = res.status();
    (status, res.into_body().collect().await.unwrap().to_bytes().to_vec())
}

async fn get_json(app: &Router, uri: &str) -> (StatusCode, Value) {
    let (status, body) = get(app, uri).await;
    (status, serde_json::from_slice(&body).unwrap())
}

#[tokio::test]
async fn patient_detail() {
    let app = app(false);
    let (status, v) = get_json(&app, "/api/patients").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(v["patients"].as_array().unwrap().len(), 40);
    let id = v["patients"][0]["id"].as_str().unwrap().to_string();
    let (status, v) = get_json(&app, &format!("/api/patients/{id}")).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(v["timeline"].as_array().unwrap().len(), 181);
    assert_eq!(v["codes"].as_array().unwrap().len(), 181);
    let baseline = v["baseline"].as_array().unwrap();
    assert_eq!(baseline.len(), 21);
    for b in baseline {
        if let (Some(x), Some(r)) = (b["value"].as_f64(), b["range"].as_array()) {
            let (lo, hi) = (r[0].as_f64().unwrap(), r[1].as_f64().unwrap());
            assert_eq!(b["abnormal"].as_bool().unwrap(), x < lo || x > hi, "{b}");
        }
    }
    let (status, v) = get_json(&app, "/api/patients/NOPE").await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(v["error"]["code"], "PATIENT_NOT_FOUND");
}

#[tokio::test]
async fn ward_clusters_cover_cohort() {
    let app = app(false);
    let (status, v) = get_json(&app, "/api/clusters?method=ward&k=4").await;
    assert_eq!(status, StatusCode::OK);
    let sizes: Vec<u64> = v["sizes"].as_array().unwrap().iter().map(|s| s.as_u64().unwrap()).collect();
    assert_eq!(sizes.len(), 4);
    assert!(sizes.iter().all(|&s| s > 0));
    assert_eq!(sizes.iter().sum::<u64>(), 40);
    assert_eq!(v["labels"].as_object().unwrap().len(), 40);
    assert_eq!(v["clusters"][0]["codes"].as_array().unwrap().len() as u64, sizes[0]);
}

#[tokio::test]
async fn error_contract() {
    let app = app(false);
    let (status, v) = get_json(&app, "/api/clusters/Q/progression?method=ward&k=4").await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(v["error"]["code"], "CLUSTER_NOT_FOUND");
    let (status, v) = get_json(&app, "/api/clusters/E/stats?k=4").await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(v["error"]["code"], "CLUSTER_NOT_FOUND");
    for uri in [
        "/api/clusters?k=0",
        "/api/clusters?k=41",
        "/api/clusters?k=abc",
        "/api/clusters?method=spectral",
        "/api/clusters/A/progression?delta=1.5",
        "/api/clusters/A/progression?sigma=-0.1",
        "/api/survival?groupby=site",
    ] {
        let (status, v) = get_json(&app, uri).await;
        assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY, "{uri}");
        assert_eq!(v["error"]["code"], "INVALID_PARAMETER", "{uri}");
    }
    for uri in ["/api/clusters?method=graph", "/api/clusters/A/importance?method=ward"] {
        let (status, v) = get_json(&app, uri).await;
        assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY, "{uri}");
        assert_eq!(v["error"]["code"], "MODEL_NOT_LOADED", "{uri}");
    }
    let (status, _) = get_json(&app, "/api/nothing").await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn progression_stats_and_survival() {
    let app = app(false);
    let (status, v) = get_json(&app, "/api/clusters/A/progression?k=4&delta=1&sigma=0").await;
    assert_eq!(status, StatusCode::OK);
    let blocks = v["blocks"].as_array().unwrap();
    assert!(blocks.iter().all(|b| b["first_day"] == b["last_day"]));
    let (_, v) = get_json(&app, "/api/clusters/B/stats?k=4").await;
    assert_eq!(v["km"]["points"][0]["survival"], 1.0);
    assert_eq!(v["boxes"].as_array().unwrap().len(), 19);
    let (_, v) = get_json(&app, "/api/survival?groupby=arm").await;
    let groups: Vec<&str> = v["curves"].as_array().unwrap().iter().map(|c| c["group"].as_str().unwrap()).collect();
    assert_eq!(groups, ["A", "B"]);
    let (_, v) = get_json(&app, "/api/survival?k=3").await;
    assert_eq!(v["curves"].as_array().unwrap().len(), 3);
    let (_, v) = get_json(&app, "/api/meta").await;
    assert_eq!(v["patients"], 40);
    assert_eq!(v["model_loaded"], false);
}

#[tokio::test]
async fn graph_method_and_importance_with_model() {
    let app = app(true);
    let (status, v) = get_json(&app, "/api/clusters?method=graph&k=3").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(v["sizes"].as_array().unwrap().len(), 3);
    let (status, v) = get_json(&app, "/api/clusters/A/importance?method=graph&k=3").await;
    assert_eq!(status, StatusCode::OK);
    let imp: Vec<f64> = v["importance"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
    let r = v["features"].as_array().unwrap().len();
    assert_eq!(imp.len(), r);
    // Payload floats carry 6 significant digits, so the identity holds to
    // rounding error only.
    assert!((imp.iter().sum::<f64>() - (2.0 - r as f64)).abs() < 1e-4);
    for m in v["members"].as_array().unwrap() {
        assert!(m["scores"].as_array().unwrap().iter().all(|s| s.as_f64().unwrap() >= 0.0));
    }
}

#[tokio::test]
async fn repeated_gets_are_byte_identical() {
    let uris = [
        "/api/meta",
        "/api/patients",
        "/api/patients/P001",
        "/api/clusters?method=ward&k=4",
        "/api/clusters?method=graph&k=4",
        "/api/clusters/A/importance?method=ward&k=4",
        "/api/clusters/A/progression?method=graph&k=4&delta=0.3",
        "/api/clusters/B/stats?method=ward&k=4",
        "/api/survival?groupby=cluster&method=graph&k=4",
        "/api/survival?groupby=arm",
    ];
    let a = app(true);
    let b = app(true);
    for uri in uris {
        let (s1, first) = get(&a, uri).await;
        let (_, second) = get(&a, uri).await;
        let (_, fresh) = get(&b, uri).await;
        assert_eq!(s1, StatusCode::OK, "{uri}");
        assert_eq!(first, second, "{uri}");
        assert_eq!(first, fresh, "{uri}");
    }
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn concurrent_identical_requests_agree() {
    let app = app(true);
    let mut tasks = Vec::new();
    for _ in 0..8 {
        let app = app.clone();
        tasks.push(tokio::spawn(async move { get(&app, "/api/clusters/A/importance?method=graph&k=4").await }));
    }
    let mut bodies = Vec::new();
    for t in tasks {
        bodies.push(t.await.unwrap().1);
    }
    assert!(bodies.windows(2).all(|w| w[0] == w[1]));
}
