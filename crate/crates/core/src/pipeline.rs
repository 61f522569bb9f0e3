//! Glue shared by the command line and the service: end-to-end analysis
//! steps over one cohort.

use crate::agglomeration::{DEFAULT_DELTA, DEFAULT_SIGMA};
use crate::clustering::{cluster_index, kmeans, ward_cluster, ClusterAssignment, ClusterMethod, DEFAULT_K};
use crate::data::{encode_sequence, BaselineValue, Cohort, FeatureKind, SeverityCoding, StatusSequence};
use crate::error::{Error, Result};
use crate::explain::{train_mlp, ExplainPipeline, MlpConfig};
use crate::graph::{latent_embed, GTParams, PatientGraph, TrainConfig, DEFAULT_NEIGHBORS};
use crate::linalg::Mat;
use crate::stats::{box_summary, incidence_summary, km_estimate, survival_records, BoxStats, IncidenceStats, KmCurve, SurvivalOptions};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

pub const DEFAULT_SEED: u64 = 7;
pub const DEFAULT_CONFIDENCE: f64 = 0.95;

/// Every tunable of a full run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisConfig {
    pub k: usize,
    pub neighbors: usize,
    pub seed: u64,
    pub delta: f64,
    pub sigma: f64,
    pub confidence: f64,
    pub transplant_is_event: bool,
    pub train: TrainConfig,
    pub mlp: MlpConfig,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            k: DEFAULT_K,
            neighbors: DEFAULT_NEIGHBORS,
            seed: DEFAULT_SEED,
            delta: DEFAULT_DELTA,
            sigma: DEFAULT_SIGMA,
            confidence: DEFAULT_CONFIDENCE,
            transplant_is_event: true,
            train: TrainConfig::default(),
            mlp: MlpConfig::default(),
        }
    }
}

impl AnalysisConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::InvalidConfig("k must be positive".into()));
        }
        if self.neighbors == 0 {
            return Err(Error::InvalidConfig("neighbors must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.delta) {
            return Err(Error::InvalidConfig(format!("delta {} outside [0, 1]", self.delta)));
        }
        if !(0.0..=1.0).contains(&self.sigma) {
            return Err(Error::InvalidConfig(format!("sigma {} outside [0, 1]", self.sigma)));
        }
        if !(self.confidence > 0.0 && self.confidence < 1.0) {
            return Err(Error::InvalidConfig(format!("confidence {} outside (0, 1)", self.confidence)));
        }
        if self.mlp.hidden == 0 || !(self.mlp.lr >= 0.0) {
            return Err(Error::InvalidConfig("classifier needs hidden units and a non-negative learning rate".into()));
        }
        self.train.validate()
    }

    pub fn survival_options(&self) -> SurvivalOptions {
        SurvivalOptions { transplant_is_event: self.transplant_is_event }
    }
}

pub fn coded_sequences(cohort: &Cohort, coding: &SeverityCoding) -> Vec<Vec<f64>> {
    cohort.sequences.iter().map(|s| encode_sequence(s, coding)).collect()
}

/// Unweighted Ward on severity-coded sequences.
pub fn ward_assignment(cohort: &Cohort, coding: &SeverityCoding, k: usize) -> Result<ClusterAssignment> {
    Ok(ward_cluster(&coded_sequences(cohort, coding), None, k)?.0)
}

/// k-means on latent rows.
pub fn graph_assignment(latent: &Mat, k: usize, seed: u64) -> Result<ClusterAssignment> {
    kmeans(&latent.to_rows(), k, seed)
}

/// Builds the explanation pipeline for an assignment: latent from `params`,
/// classifier fitted to the assignment's labels.
pub fn explain_pipeline(
    graph: PatientGraph,
    params: GTParams,
    assignment: &ClusterAssignment,
    mlp: &MlpConfig,
    seed: u64,
) -> Result<ExplainPipeline> {
    let latent = latent_embed(&params, &graph)?;
    let model = train_mlp(&latent, &assignment.labels, assignment.k, mlp, seed)?;
    Ok(ExplainPipeline { graph, params: Some(params), mlp: Some(model) })
}

pub fn group_sequences(cohort: &Cohort, members: &[usize]) -> Vec<StatusSequence> {
    members.iter().map(|&i| cohort.sequences[i].clone()).collect()
}

/// Statistics view payload for one group of patients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupStats {
    pub km: KmCurve,
    pub boxes: Vec<BoxStats>,
    pub incidence: IncidenceStats,
}

pub fn group_km(cohort: &Cohort, members: &[usize], group: &str, confidence: f64, options: SurvivalOptions) -> Result<KmCurve> {
    let all = survival_records(cohort, options);
    let records: Vec<_> = members.iter().map(|&i| all[i].clone()).collect();
    let mut km = km_estimate(&records, confidence)?;
    km.group = group.to_string();
    Ok(km)
}

pub fn group_stats(cohort: &Cohort, members: &[usize], group: &str, confidence: f64, options: SurvivalOptions) -> Result<GroupStats> {
    let km = group_km(cohort, members, group, confidence, options)?;
    let mut boxes = Vec::new();
    for (f, spec) in cohort.features.iter().enumerate() {
        if let FeatureKind::Numeric { .. } = spec.kind {
            let values: Vec<f64> = members
                .iter()
                .filter_map(|&i| match cohort.patients[i].baseline[f] {
                    BaselineValue::Numeric(x) => Some(x),
                    BaselineValue::Level(_) => None,
                })
                .collect();
            boxes.push(BoxStats { feature: spec.name.clone(), group: group.to_string(), summary: box_summary(&values)? });
        }
    }
    let mut incidence = incidence_summary(&group_sequences(cohort, members))?;
    incidence.group = group.to_string();
    Ok(GroupStats { km, boxes, incidence })
}

/// `patient_id,cluster` with cluster names, preceded by `#` header lines.
pub fn write_assignment_csv(cohort: &Cohort, assignment: &ClusterAssignment, header: &[String]) -> String {
    let mut s = String::new();
    for line in header {
        let _ = writeln!(s, "# {line}");
    }
    s.push_str("patient_id,cluster\n");
    for (p, &l) in cohort.patients.iter().zip(&assignment.labels) {
        let _ = writeln!(s, "{},{}", p.id, assignment.cluster_names[l]);
    }
    s
}

/// Reads an assignment written by [`write_assignment_csv`]. Every cohort
/// patient must appear exactly once.
pub fn parse_assignment_csv(text: &str, cohort: &Cohort, method: ClusterMethod) -> Result<ClusterAssignment> {
    let file = "assignment";
    let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_reader(text.as_bytes());
    let headers = reader.headers()?.clone();
    let header_row = reader.position().line().max(1) as usize;
    if headers.iter().collect::<Vec<_>>() != ["patient_id", "cluster"] {
        return Err(Error::validation(file, header_row, None, "header must be `patient_id,cluster`"));
    }
    let mut raw: Vec<Option<usize>> = vec![None; cohort.len()];
    for rec in reader.records() {
        let rec = rec?;
        let row = rec.position().map_or(0, |p| p.line() as usize);
        if rec.len() != 2 {
            return Err(Error::validation(file, row, None, format!("expected 2 fields, found {}", rec.len())));
        }
        let i = cohort
            .patient_index(&rec[0])
            .ok_or_else(|| Error::validation(file, row, Some("patient_id"), format!("unknown patient `{}`", &rec[0])))?;
        let c = cluster_index(&rec[1])
            .ok_or_else(|| Error::validation(file, row, Some("cluster"), format!("bad cluster name `{}`", &rec[1])))?;
        if raw[i].replace(c).is_some() {
            return Err(Error::validation(file, row, Some("patient_id"), format!("duplicate patient `{}`", &rec[0])));
        }
    }
    if let Some(i) = raw.iter().position(Option::is_none) {
        return Err(Error::InvalidCohort(format!("patient {} has no cluster", cohort.patients[i].id)));
    }
    let raw: Vec<usize> = raw.into_iter().map(|c| c.expect("checked")).collect();
    Ok(ClusterAssignment::from_raw(method, &raw))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::synth::{generate_synthetic, SynthSpec};

    #[test]
    fn assignment_csv_round_trip() {
        let s = generate_synthetic(&SynthSpec { n: 30, arm_a: 15, ..SynthSpec::default() }, 1).unwrap();
        let a = ward_assignment(&s.cohort, &SeverityCoding::default(), 4).unwrap();
        let text = write_assignment_csv(&s.cohort, &a, &["seed 1".into()]);
        assert_eq!(parse_assignment_csv(&text, &s.cohort, a.method).unwrap(), a);
        let dup = text.replacen("\nP002,", "\nP001,", 1);
        assert!(parse_assignment_csv(&dup, &s.cohort, a.method).unwrap_err().is_validation());
    }

    #[test]
    fn group_stats_cover_numeric_features() {
        let s = generate_synthetic(&SynthSpec { n: 20, arm_a: 10, ..SynthSpec::default() }, 2).unwrap();
        let members: Vec<usize> = (0..20).collect();
        let g = group_stats(&s.cohort, &members, "all", 0.95, SurvivalOptions::default()).unwrap();
        assert_eq!(g.boxes.len(), 19);
        assert_eq!(g.incidence.n, 20);
        assert_eq!(g.km.points[0].at_risk, 20);
    }
}
