use cohortflow::agglomeration::{build_status_matrix, extract_transitions, progression_graph, stage_agglomeration, weighted_jaccard};
use cohortflow::data::{EventStatus, StatusSequence, STATUS_COUNT};
use proptest::prelude::*;

/// Runs of random statuses, so that blocks have some length.
fn arb_cohort() -> impl Strategy<Value = Vec<StatusSequence>> {
    (2usize..25).prop_flat_map(|days| {
        prop::collection::vec(prop::collection::vec((0..STATUS_COUNT, 1usize..6), 1..8), 1..12).prop_map(move |patients| {
            patients
                .into_iter()
                .enumerate()
                .map(|(i, runs)| {
                    let mut statuses: Vec<EventStatus> =
                        runs.into_iter().flat_map(|(s, len)| std::iter::repeat_n(EventStatus::ALL[s], len)).collect();
                    statuses.resize(days, *statuses.last().unwrap());
                    StatusSequence { patient_id: format!("p{i}"), statuses }
                })
                .collect()
        })
    })
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

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn matrix_columns_and_flows_balance(seqs in arb_cohort()) {
        let m = build_status_matrix(&seqs).unwrap();
        for d in 0..m.days() {
            prop_assert_eq!((0..STATUS_COUNT).map(|k| m.cells[k][d].num).sum::<usize>(), seqs.len());
            for k in 0..STATUS_COUNT {
                let c = &m.cells[k][d];
                prop_assert_eq!(c.inflow.iter().sum::<usize>(), c.num);
                prop_assert_eq!(c.outflow.iter().sum::<usize>(), c.num);
                if d + 1 < m.days() {
                    for j in 0..STATUS_COUNT {
                        prop_assert_eq!(c.outflow[j], m.cells[j][d + 1].inflow[k]);
                    }
                }
            }
        }
    }

    #[test]
    fn agglomeration_conserves_patient_days(seqs in arb_cohort(), delta in 0.0f64..=1.0) {
        let truth = status_days(&seqs);
        let chains = stage_agglomeration(&seqs, delta).unwrap();
        for (k, chain) in chains.iter().enumerate() {
            prop_assert_eq!(chain.iter().map(|b| b.patient_days()).sum::<usize>(), truth[k]);
            for w in chain.windows(2) {
                prop_assert!(w[0].last_day < w[1].first_day);
            }
            for b in chain {
                prop_assert_eq!(b.day_counts.len(), b.last_day - b.first_day + 1);
                prop_assert!(b.day_counts.iter().all(|&c| c > 0));
                // Distinct members, recounted from the sequences.
                let members: Vec<usize> = (0..seqs.len())
                    .filter(|&i| (b.first_day..=b.last_day).any(|d| seqs[i].statuses[d] == b.status))
                    .collect();
                prop_assert_eq!(&b.members, &members);
                prop_assert_eq!(b.num, members.len());
            }
        }
    }

    #[test]
    fn lower_delta_never_yields_more_blocks_at_one(seqs in arb_cohort()) {
        let count = |delta| stage_agglomeration(&seqs, delta).unwrap().iter().map(Vec::len).sum::<usize>();
        let occupied = build_status_matrix(&seqs).unwrap().cells.iter().flatten().filter(|c| c.num > 0).count();
        prop_assert_eq!(count(1.0), occupied);
        prop_assert!(count(0.0) <= occupied);
    }

    #[test]
    fn transition_flows_are_recounted(seqs in arb_cohort(), delta in 0.0f64..=1.0) {
        let chains = stage_agglomeration(&seqs, delta).unwrap();
        let g = extract_transitions(&chains, &seqs, -1.0).unwrap();
        for t in &g.transitions {
            let (a, b) = (&g.blocks[t.from], &g.blocks[t.to]);
            prop_assert!(a.status != b.status);
            let flow = seqs
                .iter()
                .filter(|q| (0..q.statuses.len() - 1).any(|d| {
                    a.contains_day(d) && b.contains_day(d + 1) && q.statuses[d] == a.status && q.statuses[d + 1] == b.status
                }))
                .count();
            prop_assert!(t.flow >= flow);
            prop_assert!(t.strength > 0.0 && t.strength <= 2.0);
            prop_assert_eq!(t.strength, 2.0 * t.flow as f64 / (a.num + b.num) as f64);
        }
        // Every status switch is carried by exactly one transition.
        let switches: usize = seqs.iter().map(|q| q.statuses.windows(2).filter(|w| w[0] != w[1]).count()).sum();
        prop_assert_eq!(g.transitions.iter().map(|t| t.flow).sum::<usize>(), switches);
    }

    #[test]
    fn jaccard_is_symmetric_and_bounded(
        u in prop::collection::vec(0.0f64..10.0, 1..20),
        v in prop::collection::vec(0.0f64..10.0, 1..20),
    ) {
        let n = u.len().min(v.len());
        let (u, v) = (&u[..n], &v[..n]);
        let a = weighted_jaccard(u, v).unwrap();
        prop_assert_eq!(a, weighted_jaccard(v, u).unwrap());
        prop_assert!((0.0..=1.0).contains(&a));
        prop_assert_eq!(weighted_jaccard(u, u).unwrap(), 1.0);
    }
}

#[test]
fn sigma_filters_weak_transitions() {
    let mut seqs = Vec::new();
    for i in 0..20 {
        let switch = i == 0;
        let statuses = (0..10).map(|d| if switch && d >= 5 { EventStatus::Aki } else { EventStatus::NoEvent }).collect();
        seqs.push(StatusSequence { patient_id: format!("p{i}"), statuses });
    }
    let all = progression_graph(&seqs, 0.5, 0.0).unwrap();
    assert_eq!(all.transitions.len(), 1);
    let s = all.transitions[0].strength;
    assert!(progression_graph(&seqs, 0.5, s).unwrap().transitions.is_empty());
    assert!(stage_agglomeration(&seqs, 1.5).is_err());
    assert!(progression_graph(&seqs, 0.5, f64::NAN).is_err());
}
