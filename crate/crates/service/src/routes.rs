use crate::error::ApiError;
use crate::json::to_canonical_bytes;
use crate::session::Session;
use axum::extract::{Path, Query, State};
use axum::http::header::CONTENT_TYPE;
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::Router;
use cohortflow::agglomeration::progression_graph;
use cohortflow::clustering::{cluster_index, ClusterAssignment, ClusterMethod};
use cohortflow::data::{encode_sequence, Arm, BaselineValue, EventStatus, FeatureKind};
use cohortflow::explain::cluster_importance;
use cohortflow::pipeline::{group_km, group_sequences, group_stats};
use serde_json::{json, Value};
use std::collections::BTreeMap;
use std::sync::Arc;

type Params = Query<BTreeMap<String, String>>;
type Reply = Result<Response, ApiError>;

pub fn router(session: Arc<Session>) -> Router {
    Router::new()
        .route("/api/meta", get(meta))
        .route("/api/patients", get(patients))
        .route("/api/patients/{id}", get(patient))
        .route("/api/clusters", get(clusters))
        .route("/api/clusters/{c}/importance", get(importance))
        .route("/api/clusters/{c}/progression", get(progression))
        .route("/api/clusters/{c}/stats", get(stats))
        .route("/api/survival", get(survival))
        .fallback(|| async { ApiError::not_found() })
        .with_state(session)
}

fn reply(body: Arc<Vec<u8>>) -> Response {
    ([(CONTENT_TYPE, "application/json")], body.as_ref().clone()).into_response()
}

fn parse_num<T: std::str::FromStr>(q: &BTreeMap<String, String>, key: &str, default: T) -> Result<T, ApiError> {
    match q.get(key) {
        None => Ok(default),
        Some(v) => v.parse().map_err(|_| ApiError::invalid(format!("`{key}` has invalid value `{v}`"))),
    }
}

fn parse_unit(q: &BTreeMap<String, String>, key: &str, default: f64) -> Result<f64, ApiError> {
    let v: f64 = parse_num(q, key, default)?;
    if !(0.0..=1.0).contains(&v) {
        return Err(ApiError::invalid(format!("`{key}` must lie in [0, 1]")));
    }
    Ok(v)
}

fn parse_method(q: &BTreeMap<String, String>) -> Result<ClusterMethod, ApiError> {
    match q.get("method") {
        None => Ok(ClusterMethod::WardKnowledge),
        Some(m) => ClusterMethod::parse(m).ok_or_else(|| ApiError::invalid(format!("unknown method `{m}`"))),
    }
}

/// Method and k from the query, with the session defaults.
fn method_k(s: &Session, q: &BTreeMap<String, String>) -> Result<(ClusterMethod, usize), ApiError> {
    Ok((parse_method(q)?, parse_num(q, "k", s.analysis.k)?))
}

fn resolve_cluster(a: &ClusterAssignment, name: &str) -> Result<usize, ApiError> {
    cluster_index(name).filter(|&c| c < a.k).ok_or_else(|| ApiError::cluster_not_found(name))
}

async fn meta(State(s): State<Arc<Session>>) -> Reply {
    let me = s.clone();
    let body = s
        .cached_response("meta".into(), move || {
            let a = &me.analysis;
            Ok(to_canonical_bytes(&json!({
                "patients": me.cohort.len(),
                "horizon": me.cohort.horizon,
                "features": me.cohort.features,
                "statuses": EventStatus::ALL.iter().map(|x| x.name()).collect::<Vec<_>>(),
                "severity": EventStatus::ALL.iter().map(|&x| (x.name(), me.coding.code(x))).collect::<BTreeMap<_, _>>(),
                "methods": ["ward", "graph"],
                "model_loaded": me.model_loaded(),
                "defaults": {
                    "k": a.k, "delta": a.delta, "sigma": a.sigma, "neighbors": a.neighbors,
                    "seed": a.seed, "confidence": a.confidence, "transplant_is_event": a.transplant_is_event,
                },
            })))
        })
        .await?;
    Ok(reply(body))
}

async fn patients(State(s): State<Arc<Session>>) -> Reply {
    let me = s.clone();
    let body = s
        .cached_response("patients".into(), move || {
            let list: Vec<Value> = me.cohort.patients.iter().map(|p| json!({"id": p.id, "arm": p.arm.label()})).collect();
            Ok(to_canonical_bytes(&json!({ "patients": list })))
        })
        .await?;
    Ok(reply(body))
}

async fn patient(State(s): State<Arc<Session>>, Path(id): Path<String>) -> Reply {
    let i = s.cohort.patient_index(&id).ok_or_else(|| ApiError::patient_not_found(&id))?;
    let me = s.clone();
    let body = s
        .cached_response(format!("patient/{id}"), move || {
            let c = &me.cohort;
            let p = &c.patients[i];
            let baseline: Vec<Value> = c
                .features
                .iter()
                .enumerate()
                .map(|(f, spec)| match (&spec.kind, p.baseline[f]) {
                    (FeatureKind::Numeric { units, range }, BaselineValue::Numeric(x)) => json!({
                        "name": spec.name,
                        "value": x,
                        "units": units,
                        "range": range.map(|(lo, hi)| [lo, hi]),
                        "abnormal": range.is_some_and(|(lo, hi)| x < lo || x > hi),
                        "imputed": p.imputed[f],
                    }),
                    (FeatureKind::Categorical { levels }, BaselineValue::Level(l)) => json!({
                        "name": spec.name,
                        "value": levels[l],
                        "units": null,
                        "range": null,
                        "abnormal": false,
                        "imputed": p.imputed[f],
                    }),
                    _ => unreachable!("baseline values follow the schema"),
                })
                .collect();
            let seq = &c.sequences[i];
            let events: Vec<Value> = c
                .events_of(&p.id)
                .map(|e| json!({"kind": e.kind.name(), "start_day": e.start_day, "end_day": e.end_day}))
                .collect();
            Ok(to_canonical_bytes(&json!({
                "id": p.id,
                "arm": p.arm.label(),
                "baseline": baseline,
                "timeline": seq.statuses.iter().map(|x| x.name()).collect::<Vec<_>>(),
                "codes": encode_sequence(seq, &me.coding),
                "events": events,
            })))
        })
        .await?;
    Ok(reply(body))
}

async fn clusters(State(s): State<Arc<Session>>, Query(q): Params) -> Reply {
    let (method, k) = method_k(&s, &q)?;
    let a = s.assignment(method, k).await?;
    let me = s.clone();
    let body = s
        .cached_response(format!("clusters/{}/{k}", method.key()), move || {
            let c = &me.cohort;
            let sizes = a.sizes();
            let groups: Vec<Value> = (0..a.k)
                .map(|g| {
                    let members = a.members(g);
                    json!({
                        "index": g,
                        "name": a.cluster_names[g],
                        "size": sizes[g],
                        "members": members.iter().map(|&i| c.patients[i].id.as_str()).collect::<Vec<_>>(),
                        "codes": members.iter().map(|&i| encode_sequence(&c.sequences[i], &me.coding)).collect::<Vec<_>>(),
                    })
                })
                .collect();
            let labels: BTreeMap<&str, &str> =
                c.patients.iter().zip(&a.labels).map(|(p, &l)| (p.id.as_str(), a.cluster_names[l].as_str())).collect();
            Ok(to_canonical_bytes(&json!({
                "method": method.key(),
                "k": a.k,
                "sizes": sizes,
                "labels": labels,
                "clusters": groups,
            })))
        })
        .await?;
    Ok(reply(body))
}

async fn importance(State(s): State<Arc<Session>>, Path(name): Path<String>, Query(q): Params) -> Reply {
    let (method, k) = method_k(&s, &q)?;
    let a = s.assignment(method, k).await?;
    let c = resolve_cluster(&a, &name)?;
    let pipeline = s.explainer(method, k).await?;
    let me = s.clone();
    let body = s
        .cached_response(format!("importance/{}/{k}/{c}", method.key()), move || {
            let members = pipeline.member_importances(&a, c)?;
            let agg = cluster_importance(c, &members, me.cohort.len())?;
            let features: Vec<&str> = pipeline.graph.layout.baseline.iter().map(|b| b.name.as_str()).collect();
            let member_rows: Vec<Value> = members
                .iter()
                .map(|v| json!({"id": me.cohort.patients[v.patient].id, "scores": v.scores}))
                .collect();
            Ok(to_canonical_bytes(&json!({
                "method": method.key(),
                "k": k,
                "cluster": a.cluster_names[c],
                "features": features,
                "importance": agg.scores,
                "classifier_accuracy": pipeline.mlp.as_ref().map(|m| m.train_accuracy),
                "members": member_rows,
            })))
        })
        .await?;
    Ok(reply(body))
}

async fn progression(State(s): State<Arc<Session>>, Path(name): Path<String>, Query(q): Params) -> Reply {
    let (method, k) = method_k(&s, &q)?;
    let delta = parse_unit(&q, "delta", s.analysis.delta)?;
    let sigma = parse_unit(&q, "sigma", s.analysis.sigma)?;
    let a = s.assignment(method, k).await?;
    let c = resolve_cluster(&a, &name)?;
    let me = s.clone();
    let key = format!("progression/{}/{k}/{c}/{:x}/{:x}", method.key(), delta.to_bits(), sigma.to_bits());
    let body = s
        .cached_response(key, move || {
            let seqs = group_sequences(&me.cohort, &a.members(c));
            let g = progression_graph(&seqs, delta, sigma)?;
            let blocks: Vec<Value> = g
                .blocks
                .iter()
                .enumerate()
                .map(|(id, b)| {
                    json!({
                        "id": id,
                        "status": b.status.name(),
                        "first_day": b.first_day,
                        "last_day": b.last_day,
                        "num": b.num,
                        "patient_days": b.patient_days(),
                    })
                })
                .collect();
            let transitions: Vec<Value> = g
                .transitions
                .iter()
                .map(|t| {
                    json!({
                        "from": t.from,
                        "to": t.to,
                        "from_status": g.blocks[t.from].status.name(),
                        "to_status": g.blocks[t.to].status.name(),
                        "flow": t.flow,
                        "strength": t.strength,
                    })
                })
                .collect();
            Ok(to_canonical_bytes(&json!({
                "method": method.key(),
                "k": k,
                "cluster": a.cluster_names[c],
                "delta": delta,
                "sigma": sigma,
                "blocks": blocks,
                "transitions": transitions,
            })))
        })
        .await?;
    Ok(reply(body))
}

async fn stats(State(s): State<Arc<Session>>, Path(name): Path<String>, Query(q): Params) -> Reply {
    let (method, k) = method_k(&s, &q)?;
    let a = s.assignment(method, k).await?;
    let c = resolve_cluster(&a, &name)?;
    let me = s.clone();
    let body = s
        .cached_response(format!("stats/{}/{k}/{c}", method.key()), move || {
            let an = &me.analysis;
            let g = group_stats(&me.cohort, &a.members(c), &a.cluster_names[c], an.confidence, an.survival_options())?;
            Ok(to_canonical_bytes(&json!({
                "method": method.key(),
                "k": k,
                "cluster": a.cluster_names[c],
                "km": g.km,
                "boxes": g.boxes,
                "incidence": g.incidence,
            })))
        })
        .await?;
    Ok(reply(body))
}

async fn survival(State(s): State<Arc<Session>>, Query(q): Params) -> Reply {
    let by_arm = match q.get("groupby").map(String::as_str) {
        None | Some("cluster") => false,
        Some("arm") => true,
        Some(other) => return Err(ApiError::invalid(format!("unknown groupby `{other}`"))),
    };
    let (method, k) = method_k(&s, &q)?;
    let groups: Vec<(String, Vec<usize>)> = if by_arm {
        [Arm::A, Arm::B]
            .into_iter()
            .map(|arm| {
                let m = s.cohort.patients.iter().enumerate().filter(|(_, p)| p.arm == arm).map(|(i, _)| i).collect();
                (arm.label().to_string(), m)
            })
            .collect()
    } else {
        let a = s.assignment(method, k).await?;
        (0..a.k).map(|c| (a.cluster_names[c].clone(), a.members(c))).collect()
    };
    let key = if by_arm { "survival/arm".to_string() } else { format!("survival/cluster/{}/{k}", method.key()) };
    let me = s.clone();
    let body = s
        .cached_response(key, move || {
            let an = &me.analysis;
            let curves = groups
                .iter()
                .filter(|(_, m)| !m.is_empty())
                .map(|(name, m)| group_km(&me.cohort, m, name, an.confidence, an.survival_options()))
                .collect::<cohortflow::Result<Vec<_>>>()?;
            let groupby = if by_arm { "arm" } else { "cluster" };
            let mut payload = json!({"groupby": groupby, "curves": curves});
            if !by_arm {
                payload["method"] = json!(method.key());
                payload["k"] = json!(k);
            }
            Ok(to_canonical_bytes(&payload))
        })
        .await?;
    Ok(reply(body))
}
