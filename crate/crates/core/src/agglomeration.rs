//! Status matrix, day-block agglomeration and cross-status transitions.

use crate::data::{EventStatus, StatusSequence, STATUS_COUNT};
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt::Write as _;

pub const DEFAULT_DELTA: f64 = 0.5;
pub const DEFAULT_SIGMA: f64 = 0.1;
pub const SIM_VEC_LEN: usize = 1 + 2 * STATUS_COUNT;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TransitionTriplet {
    pub num: usize,
    /// Indexed by source status.
    pub inflow: [usize; STATUS_COUNT],
    /// Indexed by destination status.
    pub outflow: [usize; STATUS_COUNT],
}

impl TransitionTriplet {
    pub fn sim_vec(&self) -> [f64; SIM_VEC_LEN] {
        sim_vec(self.num, &self.inflow, &self.outflow)
    }
}

fn sim_vec(num: usize, inflow: &[usize; STATUS_COUNT], outflow: &[usize; STATUS_COUNT]) -> [f64; SIM_VEC_LEN] {
    let mut v = [0.0; SIM_VEC_LEN];
    v[0] = num as f64;
    for k in 0..STATUS_COUNT {
        v[1 + k] = inflow[k] as f64;
        v[1 + STATUS_COUNT + k] = outflow[k] as f64;
    }
    v
}

/// One triplet per (status, day). Day 0 has a virtual self-entry and the last
/// day a virtual self-exit, so inflow and outflow both sum to `num` in every
/// cell.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatusMatrix {
    pub patients: usize,
    /// `cells[status][day]`.
    pub cells: Vec<Vec<TransitionTriplet>>,
}

impl StatusMatrix {
    pub fn days(&self) -> usize {
        self.cells[0].len()
    }

    pub fn cell(&self, status: EventStatus, day: usize) -> &TransitionTriplet {
        &self.cells[status.index()][day]
    }
}

fn check_lengths(sequences: &[StatusSequence]) -> Result<usize> {
    let first = sequences.first().ok_or(Error::EmptyGroup)?;
    let len = first.statuses.len();
    if let Some(bad) = sequences.iter().find(|s| s.statuses.len() != len) {
        return Err(Error::LengthMismatch { expected: len, found: bad.statuses.len() });
    }
    if len == 0 {
        return Err(Error::EmptyGroup);
    }
    Ok(len)
}

pub fn build_status_matrix(sequences: &[StatusSequence]) -> Result<StatusMatrix> {
    let days = check_lengths(sequences)?;
    let mut cells = vec![vec![TransitionTriplet::default(); days]; STATUS_COUNT];
    for seq in sequences {
        let s: Vec<usize> = seq.statuses.iter().map(|x| x.index()).collect();
        for t in 0..days {
            let cell = &mut cells[s[t]][t];
            cell.num += 1;
            let from = if t == 0 { s[t] } else { s[t - 1] };
            let to = if t + 1 == days { s[t] } else { s[t + 1] };
            cell.inflow[from] += 1;
            cell.outflow[to] += 1;
        }
    }
    Ok(StatusMatrix { patients: sequences.len(), cells })
}

/// `Σ min(u, v) / Σ max(u, v)`; two all-zero vectors are identical (1).
pub fn weighted_jaccard(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::LengthMismatch { expected: u.len(), found: v.len() });
    }
    for (index, &value) in u.iter().chain(v).enumerate() {
        if !(value >= 0.0) {
            return Err(Error::NegativeEntry { index: index % u.len().max(1), value });
        }
    }
    let (mut lo, mut hi) = (0.0, 0.0);
    for (a, b) in u.iter().zip(v) {
        lo += a.min(*b);
        hi += a.max(*b);
    }
    Ok(if hi == 0.0 { 1.0 } else { lo / hi })
}

/// A run of consecutive days of one status.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Block {
    pub status: EventStatus,
    pub first_day: usize,
    pub last_day: usize,
    /// Distinct patients in this status on any day of the span.
    pub num: usize,
    pub boundary_in: [usize; STATUS_COUNT],
    pub boundary_out: [usize; STATUS_COUNT],
    /// Patients (cohort indices), sorted.
    pub members: Vec<usize>,
    /// Occupancy of each day of the span.
    pub day_counts: Vec<usize>,
}

impl Block {
    pub fn sim_vec(&self) -> [f64; SIM_VEC_LEN] {
        sim_vec(self.num, &self.boundary_in, &self.boundary_out)
    }

    pub fn patient_days(&self) -> usize {
        self.day_counts.iter().sum()
    }

    pub fn contains_day(&self, day: usize) -> bool {
        (self.first_day..=self.last_day).contains(&day)
    }

    fn merge(self, next: Block) -> Block {
        debug_assert_eq!(self.last_day + 1, next.first_day);
        let mut members = Vec::with_capacity(self.members.len() + next.members.len());
        let (mut i, mut j) = (0, 0);
        while i < self.members.len() || j < next.members.len() {
            let take = match (self.members.get(i), next.members.get(j)) {
                (Some(a), Some(b)) if a == b => {
                    j += 1;
                    i += 1;
                    *a
                }
                (Some(a), Some(b)) if a < b => {
                    i += 1;
                    *a
                }
                (Some(a), None) => {
                    i += 1;
                    *a
                }
                (_, Some(b)) => {
                    j += 1;
                    *b
                }
                (None, None) => unreachable!(),
            };
            members.push(take);
        }
        let mut day_counts = self.day_counts;
        day_counts.extend(next.day_counts);
        Block {
            status: self.status,
            first_day: self.first_day,
            last_day: next.last_day,
            num: members.len(),
            boundary_in: self.boundary_in,
            boundary_out: next.boundary_out,
            members,
            day_counts,
        }
    }
}

fn pair_similarity(a: &Block, b: &Block) -> f64 {
    if a.last_day + 1 != b.first_day || a.status != b.status {
        return f64::NEG_INFINITY;
    }
    weighted_jaccard(&a.sim_vec(), &b.sim_vec()).expect("counts are non-negative")
}

/// Repeatedly merges the most similar adjacent pair while its similarity is
/// strictly above `delta`; ties go to the earliest pair. Blocks that are not
/// day-contiguous are never merged.
pub fn merge_linkedlist(chain: Vec<Block>, delta: f64) -> Vec<Block> {
    let mut chain = chain;
    let mut sims: Vec<f64> = chain.windows(2).map(|w| pair_similarity(&w[0], &w[1])).collect();
    while chain.len() > 1 {
        let best = (0..sims.len()).fold(0, |b, i| if sims[i] > sims[b] { i } else { b });
        if !(sims[best] > delta) {
            break;
        }
        let next = chain.remove(best + 1);
        let merged = chain[best].clone().merge(next);
        chain[best] = merged;
        sims.remove(best);
        if best > 0 {
            sims[best - 1] = pair_similarity(&chain[best - 1], &chain[best]);
        }
        if best < sims.len() {
            sims[best] = pair_similarity(&chain[best], &chain[best + 1]);
        }
    }
    chain
}

/// Single-day blocks of one status, in day order, skipping empty days.
pub fn day_blocks(matrix: &StatusMatrix, sequences: &[StatusSequence], status: EventStatus) -> Vec<Block> {
    let k = status.index();
    let mut out = Vec::new();
    for (day, cell) in matrix.cells[k].iter().enumerate() {
        if cell.num == 0 {
            continue;
        }
        let members: Vec<usize> = sequences.iter().enumerate().filter(|(_, s)| s.statuses[day] == status).map(|(i, _)| i).collect();
        out.push(Block {
            status,
            first_day: day,
            last_day: day,
            num: cell.num,
            boundary_in: cell.inflow,
            boundary_out: cell.outflow,
            members,
            day_counts: vec![cell.num],
        });
    }
    out
}

/// Merged block chains, one per status in priority order.
pub fn stage_agglomeration(sequences: &[StatusSequence], delta: f64) -> Result<Vec<Vec<Block>>> {
    if !(0.0..=1.0).contains(&delta) {
        return Err(Error::InvalidConfig(format!("delta {delta} outside [0, 1]")));
    }
    let matrix = build_status_matrix(sequences)?;
    let mut chains = Vec::with_capacity(STATUS_COUNT);
    for status in EventStatus::ALL {
        let blocks = day_blocks(&matrix, sequences, status);
        // Runs of consecutive days are merged independently.
        let mut merged = Vec::new();
        let mut run: Vec<Block> = Vec::new();
        for b in blocks {
            if run.last().is_some_and(|last| last.last_day + 1 != b.first_day) {
                merged.extend(merge_linkedlist(std::mem::take(&mut run), delta));
            }
            run.push(b);
        }
        merged.extend(merge_linkedlist(run, delta));
        chains.push(merged);
    }
    Ok(chains)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    /// Indices into `ProgressionGraph::blocks`.
    pub from: usize,
    pub to: usize,
    pub flow: usize,
    pub strength: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProgressionGraph {
    pub blocks: Vec<Block>,
    pub transitions: Vec<Transition>,
}

/// Cross-status flows between blocks, kept when
/// `2·flow / (num_from + num_to) > sigma`.
pub fn extract_transitions(chains: &[Vec<Block>], sequences: &[StatusSequence], sigma: f64) -> Result<ProgressionGraph> {
    if !sigma.is_finite() {
        return Err(Error::InvalidConfig(format!("transition threshold {sigma} is not finite")));
    }
    let days = check_lengths(sequences)?;
    let blocks: Vec<Block> = chains.iter().flatten().cloned().collect();
    let mut lookup = vec![vec![None; days]; STATUS_COUNT];
    for (id, b) in blocks.iter().enumerate() {
        if b.last_day >= days {
            return Err(Error::LengthMismatch { expected: days, found: b.last_day + 1 });
        }
        for day in b.first_day..=b.last_day {
            lookup[b.status.index()][day] = Some(id);
        }
    }
    let mut flows: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    for seq in sequences {
        for d in 0..days - 1 {
            let (a, b) = (seq.statuses[d], seq.statuses[d + 1]);
            if a == b {
                continue;
            }
            if let (Some(x), Some(y)) = (lookup[a.index()][d], lookup[b.index()][d + 1]) {
                *flows.entry((x, y)).or_default() += 1;
            }
        }
    }
    let transitions = flows
        .into_iter()
        .filter_map(|((from, to), flow)| {
            let strength = 2.0 * flow as f64 / (blocks[from].num + blocks[to].num) as f64;
            (flow >= 1 && strength > sigma).then_some(Transition { from, to, flow, strength })
        })
        .collect();
    Ok(ProgressionGraph { blocks, transitions })
}

/// Agglomerates and extracts transitions in one call.
pub fn progression_graph(sequences: &[StatusSequence], delta: f64, sigma: f64) -> Result<ProgressionGraph> {
    let chains = stage_agglomeration(sequences, delta)?;
    extract_transitions(&chains, sequences, sigma)
}

impl ProgressionGraph {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("graph serializes")
    }

    /// Graphviz rendering, one node per block.
    pub fn to_dot(&self) -> String {
        let mut s = String::from("digraph progression {\n  rankdir=LR;\n");
        for (i, b) in self.blocks.iter().enumerate() {
            let _ = writeln!(s, "  b{i} [label=\"{} d{}-{} n={}\"];", b.status.name(), b.first_day, b.last_day, b.num);
        }
        for t in &self.transitions {
            let _ = writeln!(s, "  b{} -> b{} [label=\"{} ({:.3})\", penwidth={}];", t.from, t.to, t.flow, t.strength, 1 + t.flow.min(20) / 2);
        }
        s.push_str("}\n");
        s
    }
}
