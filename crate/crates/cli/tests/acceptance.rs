//! Acceptance suite: one PASS/FAIL line per criterion. Runs as a plain
//! binary (`harness = false`) and exits non-zero if any criterion fails.

use axum::body::Body;
use axum::http::{Request, StatusCode};
use cohortflow::agglomeration::{build_status_matrix, progression_graph, stage_agglomeration};
use cohortflow::clustering::{adjusted_rand_index, ward_cluster, ward_dendrogram, ClusterAssignment};
use cohortflow::data::synth::{generate_synthetic, SynthCohort, SynthSpec};
use cohortflow::data::{encode_sequence, EventSet, EventStatus, RawEventType, SeverityCoding, StatusSequence, STATUS_COUNT};
use cohortflow::explain::{train_mlp, ExplainPipeline, MlpConfig};
use cohortflow::graph::{
    encode, latent_embed, loss_and_grads, train_autoencoder, Adjacency, GTParams, PatientGraph, TrainConfig, TrainState,
};
use cohortflow::linalg::Mat;
use cohortflow::pipeline::{explain_pipeline, graph_assignment, group_km, ward_assignment, AnalysisConfig};
use cohortflow::stats::{km_estimate, SurvivalOptions, SurvivalRecord};
use cohortflow_service::{router, Session};
use http_body_util::BodyExt;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::sync::Arc;
use std::time::{Duration, Instant};
use tower::ServiceExt;

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

struct Suite {
    failed: Vec<&'static str>,
}

impl Suite {
    fn check(&mut self, name: &'static str, f: impl FnOnce() -> Outcome) {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            let msg = p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {name} ({detail}; {secs:.1}s)"),
            Err(detail) => {
                println!("FAIL {name}: {detail} ({secs:.1}s)");
                self.failed.push(name);
            }
        }
    }
}

fn main() {
    let mut suite = Suite { failed: Vec::new() };
    suite.check("trump-rule oracle", trump_rule);
    suite.check("sequence invariants", sequence_invariants);
    suite.check("status matrix", status_matrix);
    suite.check("agglomeration conservation", agglomeration_conservation);
    suite.check("transition strength", transition_strength);
    suite.check("ward oracle", ward_oracle_check);
    suite.check("gradient checks", gradient_checks);
    let mut trained: Option<(SynthCohort, PatientGraph, TrainState)> = None;
    suite.check("training sanity", || training_sanity(&mut trained));
    suite.check("clustering recovery", || clustering_recovery(trained.as_ref()));
    suite.check("grad-cam identities", || gradcam_identities(trained.as_ref()));
    suite.check("km oracle", km_oracle);
    suite.check("service determinism", service_determinism);
    suite.check("pipeline byte identity", pipeline_identity);
    if suite.failed.is_empty() {
        println!("acceptance: all criteria passed");
    } else {
        println!("acceptance: {} failed: {}", suite.failed.len(), suite.failed.join(", "));
        std::process::exit(1);
    }
}

fn fixture() -> SynthCohort {
    generate_synthetic(&SynthSpec::default(), 7).expect("fixture generates")
}

fn seq(id: &str, statuses: Vec<EventStatus>) -> StatusSequence {
    StatusSequence { patient_id: id.into(), statuses }
}

/// Priority scan: the first status, highest priority first, whose defining
/// raw-event condition holds.
fn trump_oracle(set: EventSet) -> EventStatus {
    use RawEventType as R;
    let has = |k| set.contains(k);
    let rules: [(EventStatus, bool); STATUS_COUNT] = [
        (EventStatus::DeathOrTransplant, has(R::Death) || has(R::LiverTransplant)),
        (EventStatus::OffStudy, has(R::OffStudy)),
        (EventStatus::AkiPlusInfection, has(R::Aki) && has(R::Infection)),
        (EventStatus::Aki, has(R::Aki)),
        (EventStatus::Infection, has(R::Infection)),
        (EventStatus::Oae, has(R::Oae) && !has(R::Treatment)),
        (EventStatus::TreatmentPlusOae, has(R::Oae) && has(R::Treatment)),
        (EventStatus::Treatment, has(R::Treatment)),
        (EventStatus::NoEvent, true),
    ];
    rules.into_iter().find(|(_, applies)| *applies).unwrap().0
}

fn trump_rule() -> Outcome {
    let mut n = 0;
    for bits in 0u8..128 {
        let set = EventSet::from_bits(bits);
        let got = cohortflow::data::summarize_day(set);
        ensure!(got == trump_oracle(set), "subset {bits:07b}: {got} vs {}", trump_oracle(set));
        n += 1;
    }
    Ok(format!("{n} subsets"))
}

fn sequence_invariants() -> Outcome {
    let s = generate_synthetic(&SynthSpec { n: 1000, arm_a: 500, ..SynthSpec::default() }, 1000).map_err(|e| e.to_string())?;
    let h = s.cohort.horizon;
    for (p, q) in s.cohort.patients.iter().zip(&s.cohort.sequences) {
        ensure!(q.patient_id == p.id, "sequence order");
        ensure!(q.statuses.len() == h + 1, "{}: length {}", p.id, q.statuses.len());
        // Independent rebuild: per-day priority scan, then absorption.
        let mut days = vec![EventSet::EMPTY; h + 1];
        for e in s.cohort.events_of(&p.id) {
            for d in e.start_day..=e.end_day.min(h) {
                days[d].insert(e.kind);
            }
        }
        let mut expect: Vec<EventStatus> = days.into_iter().map(trump_oracle).collect();
        let mut absorbed = None::<EventStatus>;
        for st in expect.iter_mut() {
            absorbed = match (absorbed, *st) {
                (Some(EventStatus::DeathOrTransplant), _) | (_, EventStatus::DeathOrTransplant) => Some(EventStatus::DeathOrTransplant),
                (Some(EventStatus::OffStudy), _) | (_, EventStatus::OffStudy) => Some(EventStatus::OffStudy),
                _ => None,
            };
            if let Some(a) = absorbed {
                *st = a;
            }
        }
        ensure!(q.statuses == expect, "{}: sequence differs from oracle", p.id);
        for term in [EventStatus::DeathOrTransplant, EventStatus::OffStudy] {
            if let Some(t) = q.first_day_of(term) {
                ensure!(
                    q.statuses[t..].iter().all(|&x| x == term || x == EventStatus::DeathOrTransplant),
                    "{}: {term} not absorbing",
                    p.id
                );
            }
        }
    }
    Ok(format!("{} patients", s.cohort.len()))
}

fn status_matrix() -> Outcome {
    let s = fixture();
    let seqs = &s.cohort.sequences;
    let m = build_status_matrix(seqs).map_err(|e| e.to_string())?;
    let n = seqs.len();
    for d in 0..m.days() {
        let col: usize = (0..STATUS_COUNT).map(|k| m.cells[k][d].num).sum();
        ensure!(col == n, "day {d}: column sum {col}");
        for k in 0..STATUS_COUNT {
            let c = &m.cells[k][d];
            let (i, o) = (c.inflow.iter().sum::<usize>(), c.outflow.iter().sum::<usize>());
            ensure!(i == c.num && o == c.num, "cell ({k},{d}): in {i} out {o} num {}", c.num);
            if d + 1 < m.days() {
                for j in 0..STATUS_COUNT {
                    ensure!(c.outflow[j] == m.cells[j][d + 1].inflow[k], "flow asymmetry {k}->{j} at day {d}");
                }
            }
        }
    }
    Ok(format!("{n} patients x {} days", m.days()))
}

fn status_days(seqs: &[StatusSequence]) -> [usize; STATUS_COUNT] {
    let mut t = [0; STATUS_COUNT];
    for q in seqs {
        for s in &q.statuses {
            t[s.index()] += 1;
        }
    }
    t
}

fn agglomeration_conservation() -> Outcome {
    let s = fixture();
    let seqs = &s.cohort.sequences;
    let truth = status_days(seqs);
    let occupied = build_status_matrix(seqs).unwrap().cells.iter().flatten().filter(|c| c.num > 0).count();
    for delta in [0.0, 0.3, 0.5, 0.8, 1.0] {
        let chains = stage_agglomeration(seqs, delta).map_err(|e| e.to_string())?;
        for (k, chain) in chains.iter().enumerate() {
            let total: usize = chain.iter().map(|b| b.patient_days()).sum();
            ensure!(total == truth[k], "delta {delta} status {k}: {total} vs {}", truth[k]);
        }
        if delta == 1.0 {
            let blocks: usize = chains.iter().map(Vec::len).sum();
            ensure!(blocks == occupied, "delta 1: {blocks} blocks vs {occupied} occupied days");
        }
    }
    // Constant cohort: each patient holds one status for the whole horizon.
    let statuses = [EventStatus::NoEvent, EventStatus::Treatment, EventStatus::Aki, EventStatus::OffStudy];
    let constant: Vec<StatusSequence> = (0..12).map(|i| seq(&format!("c{i}"), vec![statuses[i % 4]; 30])).collect();
    for delta in [0.0, 0.3, 0.5, 0.8] {
        let chains = stage_agglomeration(&constant, delta).map_err(|e| e.to_string())?;
        for st in EventStatus::ALL {
            let want = usize::from(statuses.contains(&st));
            ensure!(chains[st.index()].len() == want, "constant cohort delta {delta} {st}: {} blocks", chains[st.index()].len());
        }
    }
    Ok(format!("{occupied} occupied status-days"))
}

fn transition_strength() -> Outcome {
    let n = 12;
    let switch: Vec<StatusSequence> = (0..n)
        .map(|i| seq(&format!("s{i}"), (0..20).map(|d| if d < 8 { EventStatus::Treatment } else { EventStatus::Aki }).collect()))
        .collect();
    let mut checked = 0;
    for delta in [0.0, 0.3, 0.5, 1.0] {
        let g = progression_graph(&switch, delta, 0.1).map_err(|e| e.to_string())?;
        ensure!(g.transitions.len() == 1, "delta {delta}: {} transitions", g.transitions.len());
        let t = &g.transitions[0];
        ensure!(t.flow == n && (t.strength - 1.0).abs() <= 1e-12, "delta {delta}: flow {} strength {}", t.flow, t.strength);
        checked += 1;
    }
    let still: Vec<StatusSequence> =
        (0..n).map(|i| seq(&format!("c{i}"), vec![EventStatus::ALL[i % STATUS_COUNT]; 20])).collect();
    let g = progression_graph(&still, 0.5, 0.0).map_err(|e| e.to_string())?;
    ensure!(g.transitions.is_empty(), "no-switch fixture has {} transitions", g.transitions.len());
    Ok(format!("strength 1.0 at {checked} deltas; no-switch empty"))
}

/// Exhaustive Ward oracle from raw member coordinates.
fn ward_oracle(points: &[Vec<f64>], w: &[f64]) -> Vec<(usize, usize, f64)> {
    let n = points.len();
    let ess = |members: &[usize]| -> f64 {
        (0..points[0].len())
            .map(|d| {
                let mean = members.iter().map(|&i| points[i][d]).sum::<f64>() / members.len() as f64;
                w[d] * members.iter().map(|&i| (points[i][d] - mean).powi(2)).sum::<f64>()
            })
            .sum()
    };
    let mut clusters: Vec<(usize, Vec<usize>)> = (0..n).map(|i| (i, vec![i])).collect();
    let mut out = Vec::new();
    for step in 0..n.saturating_sub(1) {
        let mut best: Option<(f64, usize, usize, usize, usize)> = None;
        for a in 0..clusters.len() {
            for b in a + 1..clusters.len() {
                let joint: Vec<usize> = clusters[a].1.iter().chain(&clusters[b].1).copied().collect();
                let inc = ess(&joint) - ess(&clusters[a].1) - ess(&clusters[b].1);
                let (lo, hi) = (clusters[a].0.min(clusters[b].0), clusters[a].0.max(clusters[b].0));
                if best.is_none_or(|(bi, blo, bhi, _, _)| inc < bi || (inc == bi && (lo, hi) < (blo, bhi))) {
                    best = Some((inc, lo, hi, a, b));
                }
            }
        }
        let (inc, lo, hi, a, b) = best.unwrap();
        let joint: Vec<usize> = clusters[a].1.iter().chain(&clusters[b].1).copied().collect();
        clusters.remove(b);
        clusters[a] = (n + step, joint);
        out.push((lo, hi, inc));
    }
    out
}

fn ward_oracle_check() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(50);
    let mut merges = 0;
    for inst in 0..50 {
        let n = rng.random_range(2..=12);
        let dim = rng.random_range(1..=5);
        let pts: Vec<Vec<f64>> = (0..n).map(|_| (0..dim).map(|_| rng.random_range(-10.0..10.0)).collect()).collect();
        let w: Vec<f64> = (0..dim).map(|_| rng.random_range(0.1..3.0)).collect();
        let d = ward_dendrogram(&pts, Some(&w)).map_err(|e| e.to_string())?;
        let oracle = ward_oracle(&pts, &w);
        ensure!(d.merges.len() == oracle.len(), "instance {inst}: merge count");
        for (m, (lo, hi, h)) in d.merges.iter().zip(oracle) {
            ensure!((m.left, m.right) == (lo, hi), "instance {inst}: merged ({},{}) vs ({lo},{hi})", m.left, m.right);
            ensure!((m.height - h).abs() <= 1e-9 * h.abs(), "instance {inst}: height {} vs {h}", m.height);
            merges += 1;
        }
    }
    let t = start.elapsed();
    ensure!(t < Duration::from_secs(10), "took {t:?}");
    Ok(format!("50 instances, {merges} merges"))
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

fn random_graph(rng: &mut ChaCha8Rng, n: usize) -> Adjacency {
    let edges: Vec<(usize, usize)> = (0..n).flat_map(|a| (a + 1..n).map(move |b| (a, b))).filter(|_| rng.random_bool(0.4)).collect();
    Adjacency::from_edges(n, edges).unwrap()
}

fn gradient_checks() -> Outcome {
    const H: f64 = 1e-5;
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(60);
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for trial in 0..6 {
        let n = 6 + trial % 3;
        let dims = [5, 4, 3, 4, 5];
        let adj = random_graph(&mut rng, n);
        let x = Mat::from_vec(n, 5, (0..n * 5).map(|_| rng.random_range(-1.0..1.0)).collect());
        let mut params = GTParams::init(&dims, rng.random()).unwrap();
        for t in params.tensors_mut() {
            for v in t {
                *v = rng.random_range(-0.8..0.8);
            }
        }
        let mask: Vec<usize> = (0..n).filter(|i| i % 3 != 1).collect();
        let (_, grads) = loss_and_grads(&adj, &x, &params, &mask).map_err(|e| e.to_string())?;
        let analytic: Vec<Vec<f64>> = grads.tensors().iter().map(|t| t.to_vec()).collect();
        let mut p = params.clone();
        for (t, g) in analytic.iter().enumerate() {
            for i in 0..g.len() {
                let orig = p.tensors()[t][i];
                p.tensors_mut()[t][i] = orig + H;
                let up = loss_and_grads(&adj, &x, &p, &mask).unwrap().0;
                p.tensors_mut()[t][i] = orig - H;
                let down = loss_and_grads(&adj, &x, &p, &mask).unwrap().0;
                p.tensors_mut()[t][i] = orig;
                let e = rel_err(g[i], (up - down) / (2.0 * H));
                ensure!(e < 1e-4, "trial {trial} tensor {t} entry {i}: relative error {e:e}");
                worst = worst.max(e);
                count += 1;
            }
        }
    }
    // Baseline-feature gradients of the class probability used for attribution.
    for seed in 0..3u64 {
        let s = generate_synthetic(&SynthSpec { n: 8, arm_a: 4, ..SynthSpec::default() }, seed).unwrap();
        let graph = PatientGraph::from_cohort(&s.cohort, &SeverityCoding::default(), 2).unwrap();
        let f = graph.features.cols();
        let params = GTParams::init(&[f, 6, 4, 6, f], seed).unwrap();
        let z = latent_embed(&params, &graph).unwrap();
        let labels: Vec<usize> = (0..graph.len()).map(|i| i % 3).collect();
        let mlp = train_mlp(&z, &labels, 3, &MlpConfig { hidden: 5, epochs: 50, lr: 1e-2 }, seed).unwrap();
        let p = ExplainPipeline { graph, params: Some(params), mlp: Some(mlp) };
        let (params, mlp) = (p.params.as_ref().unwrap(), p.mlp.as_ref().unwrap());
        for i in 0..p.graph.len() {
            for c in 0..3 {
                let v = p.patient_importance(i, c).map_err(|e| e.to_string())?;
                let prob = |x: &Mat| mlp.probabilities(encode(&p.graph.adjacency, x, params).unwrap().0.row(i))[c];
                let mut x = p.graph.features.clone();
                for r in 0..p.graph.layout.baseline_width() {
                    let orig = x.get(i, r);
                    x.set(i, r, orig + H);
                    let up = prob(&x);
                    x.set(i, r, orig - H);
                    let down = prob(&x);
                    x.set(i, r, orig);
                    let e = rel_err(v.gradient[r], (up - down) / (2.0 * H));
                    ensure!(e < 1e-4, "attribution seed {seed} patient {i} class {c} column {r}: {e:e}");
                    worst = worst.max(e);
                    count += 1;
                }
            }
        }
    }
    let t = start.elapsed();
    ensure!(t < Duration::from_secs(60), "took {t:?}");
    Ok(format!("{count} derivatives, worst relative error {worst:.2e}"))
}

fn training_sanity(slot: &mut Option<(SynthCohort, PatientGraph, TrainState)>) -> Outcome {
    let s = fixture();
    let cfg = AnalysisConfig::default();
    let graph = PatientGraph::from_cohort(&s.cohort, &SeverityCoding::default(), cfg.neighbors).map_err(|e| e.to_string())?;
    let train = TrainConfig::default();
    ensure!(
        (train.hidden, train.latent, train.lr, train.batch_size, train.epochs) == (78, 36, 1e-5, 512, 300),
        "defaults drifted: {train:?}"
    );
    let start = Instant::now();
    let a = train_autoencoder(&graph, &train, cfg.seed).map_err(|e| e.to_string())?;
    let t = start.elapsed();
    let b = train_autoencoder(&graph, &train, cfg.seed).map_err(|e| e.to_string())?;
    ensure!(t < Duration::from_secs(600), "training took {t:?}");
    ensure!((a.split.train.len(), a.split.val.len(), a.split.test.len()) == (117, 15, 15), "split {:?}", a.split);
    ensure!(a.final_train_mse() < a.initial_train_mse, "MSE {} -> {}", a.initial_train_mse, a.final_train_mse());
    let bits = |s: &TrainState| -> Vec<(u64, u64)> { s.history.iter().map(|h| (h.train_mse.to_bits(), h.val_mse.to_bits())).collect() };
    ensure!(bits(&a) == bits(&b) && a.history.len() == 300, "histories differ between reruns");
    let detail = format!("MSE {:.4} -> {:.4}, one run {:.1}s", a.initial_train_mse, a.final_train_mse(), t.as_secs_f64());
    *slot = Some((s, graph, a));
    Ok(detail)
}

fn clustering_recovery(trained: Option<&(SynthCohort, PatientGraph, TrainState)>) -> Outcome {
    let (s, graph, state) = trained.ok_or("training did not complete")?;
    let coding = SeverityCoding::default();
    let vectors: Vec<Vec<f64>> = s.cohort.sequences.iter().map(|q| encode_sequence(q, &coding)).collect();
    let (ward, _) = ward_cluster(&vectors, None, 4).map_err(|e| e.to_string())?;
    let ward_ari = adjusted_rand_index(&ward.labels, &s.labels);
    let z = latent_embed(&state.params, graph).map_err(|e| e.to_string())?;
    let g = graph_assignment(&z, 4, AnalysisConfig::default().seed).map_err(|e| e.to_string())?;
    let graph_ari = adjusted_rand_index(&g.labels, &s.labels);
    ensure!(ward_ari >= 0.9 && graph_ari >= 0.5, "Ward ARI {ward_ari:.4}, graph ARI {graph_ari:.4}");
    Ok(format!("Ward ARI {ward_ari:.4}, graph ARI {graph_ari:.4}"))
}

fn gradcam_identities(trained: Option<&(SynthCohort, PatientGraph, TrainState)>) -> Outcome {
    let (s, graph, state) = trained.ok_or("training did not complete")?;
    let cfg = AnalysisConfig::default();
    let a: ClusterAssignment = ward_assignment(&s.cohort, &SeverityCoding::default(), 4).map_err(|e| e.to_string())?;
    let p = explain_pipeline(graph.clone(), state.params.clone(), &a, &cfg.mlp, cfg.seed).map_err(|e| e.to_string())?;
    let r = p.graph.layout.baseline_width() as f64;
    for c in 0..a.k {
        for v in p.member_importances(&a, c).map_err(|e| e.to_string())? {
            ensure!(v.scores.iter().all(|x| *x >= 0.0), "negative patient score for {} in cluster {c}", v.patient);
        }
    }
    let rows = p.heatmap(&a).map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    for row in &rows {
        let dev = (row.scores.iter().sum::<f64>() - (2.0 - r)).abs();
        ensure!(dev <= 1e-9, "cluster {} sum off by {dev:e}", row.cluster);
        ensure!(row.scores.iter().all(|x| *x > -1.0 && *x < 1.0), "cluster {} entry outside (-1, 1)", row.cluster);
        worst = worst.max(dev);
    }
    Ok(format!("{} clusters, R = {r}, max sum deviation {worst:.1e}", rows.len()))
}

fn km_oracle() -> Outcome {
    let rec = |time, event| SurvivalRecord { patient_id: format!("p{time}"), time, event };
    let c = km_estimate(&[rec(1, true), rec(2, true), rec(3, false), rec(4, true)], 0.95).map_err(|e| e.to_string())?;
    let got: Vec<(usize, f64)> = c.points.iter().map(|p| (p.time, p.survival)).collect();
    // Hand-computed: 1·(3/4) at t=1, ·(2/3) at t=2, censor at 3, ·0 at 4.
    let want = vec![(0, 1.0), (1, 3.0 / 4.0), (2, 3.0 / 4.0 * 2.0 / 3.0), (3, 0.5), (4, 0.0)];
    ensure!(got == want, "{got:?}");
    let s = fixture();
    let mut curves = vec![c];
    for (name, arm) in [("A", cohortflow::data::Arm::A), ("B", cohortflow::data::Arm::B)] {
        let members: Vec<usize> = s.cohort.patients.iter().enumerate().filter(|(_, p)| p.arm == arm).map(|(i, _)| i).collect();
        for opts in [SurvivalOptions { transplant_is_event: true }, SurvivalOptions { transplant_is_event: false }] {
            curves.push(group_km(&s.cohort, &members, name, 0.95, opts).map_err(|e| e.to_string())?);
        }
    }
    for c in &curves {
        ensure!(c.points[0].time == 0 && c.points[0].survival == 1.0, "{}: S(0) != 1", c.group);
        for w in c.points.windows(2) {
            ensure!(w[1].survival <= w[0].survival, "{}: not monotone", c.group);
        }
        for p in &c.points {
            ensure!(
                0.0 <= p.lower && p.lower <= p.survival && p.survival <= p.upper && p.upper <= 1.0,
                "{}: CI at t={} is [{}, {}] around {}",
                c.group,
                p.time,
                p.lower,
                p.upper,
                p.survival
            );
        }
    }
    Ok(format!("{} curves", curves.len()))
}

fn service_determinism() -> Outcome {
    let build = || {
        let s = generate_synthetic(&SynthSpec { n: 40, arm_a: 20, ..SynthSpec::default() }, 7).unwrap();
        let coding = SeverityCoding::default();
        let graph = PatientGraph::from_cohort(&s.cohort, &coding, 5).unwrap();
        let config = TrainConfig { epochs: 5, ..TrainConfig::default() };
        let params = train_autoencoder(&graph, &config, 7).unwrap().params;
        let analysis = AnalysisConfig { neighbors: 5, ..AnalysisConfig::default() };
        router(Arc::new(Session::new(s.cohort, coding, analysis, Some(params)).unwrap()))
    };
    let uris = [
        "/api/meta",
        "/api/patients",
        "/api/clusters?method=ward&k=4",
        "/api/clusters?method=graph&k=3",
        "/api/clusters/A/importance?method=graph&k=3",
        "/api/clusters/B/progression?method=ward&k=4&delta=0.3&sigma=0.05",
        "/api/clusters/A/stats?method=ward&k=4",
        "/api/survival?groupby=arm",
        "/api/survival?groupby=cluster&method=graph&k=3",
    ];
    let rt = tokio::runtime::Runtime::new().unwrap();
    rt.block_on(async {
        let get = |app: axum::Router, uri: &'static str| async move {
            let res = app.oneshot(Request::get(uri).body(Body::empty()).unwrap()).await.unwrap();
            let status = res.status();
            (status, res.into_body().collect().await.unwrap().to_bytes().to_vec())
        };
        let (a, b) = (build(), build());
        for uri in uris {
            let first = get(a.clone(), uri).await;
            ensure!(first.0 == StatusCode::OK, "{uri}: status {}", first.0);
            let again = get(a.clone(), uri).await;
            let fresh = get(b.clone(), uri).await;
            ensure!(first == again, "{uri}: repeated GET differs");
            ensure!(first == fresh, "{uri}: fresh session differs");
        }
        Ok(format!("{} endpoints", uris.len()))
    })
}

fn listing(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
        })
        .collect();
    files.sort();
    files
}

fn pipeline_identity() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let input = tmp.path().join("fixture");
    let arg = |p: &Path| p.to_str().unwrap().to_string();
    let code = cohortflow_cli::run(["cohortflow", "synth", "--seed", "7", "--out-dir", &arg(&input)]);
    ensure!(code == 0, "synth exited {code}");
    let mut runs = Vec::new();
    for name in ["run1", "run2"] {
        let out = tmp.path().join(name);
        let code = cohortflow_cli::run(["cohortflow", "pipeline", "--input", &arg(&input), "--out-dir", &arg(&out)]);
        ensure!(code == 0, "pipeline exited {code}");
        runs.push(listing(&out));
    }
    ensure!(runs[0].len() == runs[1].len(), "file lists differ");
    for ((na, ca), (nb, cb)) in runs[0].iter().zip(&runs[1]) {
        ensure!(na == nb && ca == cb, "{na} differs between runs");
    }
    Ok(format!("{} artifacts identical", runs[0].len()))
}
