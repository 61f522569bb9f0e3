//! Cohort data model: patients, raw events, daily status sequences.

mod coding;
mod config;
mod ingest;
mod sequence;
mod status;
pub mod synth;

pub use coding::SeverityCoding;
pub use config::{CohortConfig, FeatureConfig, MissingPolicy};
pub use ingest::{
    parse_baseline, parse_cohort, parse_cohort_str, parse_events, write_baseline_csv, write_events_csv,
};
pub use sequence::{build_sequence, encode_sequence};
pub use status::{summarize_day, EventSet, EventStatus, RawEventType, UnknownName, STATUS_COUNT};

use serde::{Deserialize, Serialize};

pub const DEFAULT_HORIZON: usize = 180;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum FeatureKind {
    Numeric {
        units: Option<String>,
        /// Inclusive normal range used for abnormal-value flags.
        range: Option<(f64, f64)>,
    },
    Categorical {
        levels: Vec<String>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub name: String,
    pub kind: FeatureKind,
}

impl FeatureSpec {
    pub fn is_numeric(&self) -> bool {
        matches!(self.kind, FeatureKind::Numeric { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum BaselineValue {
    Numeric(f64),
    /// Index into the feature's declared level list.
    Level(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Arm {
    A,
    B,
}

impl Arm {
    pub fn label(self) -> &'static str {
        match self {
            Arm::A => "A",
            Arm::B => "B",
        }
    }

    pub fn parse(s: &str) -> Option<Arm> {
        match s {
            "A" => Some(Arm::A),
            "B" => Some(Arm::B),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Patient {
    pub id: String,
    pub arm: Arm,
    /// One value per feature, in schema order.
    pub baseline: Vec<BaselineValue>,
    /// Per-feature flag: the value was missing and has been imputed.
    pub imputed: Vec<bool>,
}

impl Patient {
    pub fn has_imputed(&self) -> bool {
        self.imputed.iter().any(|&b| b)
    }
}

/// A raw event over the closed day interval `[start_day, end_day]`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RawEventRecord {
    pub patient_id: String,
    pub kind: RawEventType,
    pub start_day: usize,
    pub end_day: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatusSequence {
    pub patient_id: String,
    /// Day-indexed statuses, `horizon + 1` entries.
    pub statuses: Vec<EventStatus>,
}

impl StatusSequence {
    pub fn horizon(&self) -> usize {
        self.statuses.len().saturating_sub(1)
    }

    /// First day holding `status`, if any.
    pub fn first_day_of(&self, status: EventStatus) -> Option<usize> {
        self.statuses.iter().position(|&s| s == status)
    }
}

/// A validated cohort. Patients are ordered by id; `sequences[i]` belongs
/// to `patients[i]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cohort {
    pub horizon: usize,
    pub features: Vec<FeatureSpec>,
    pub patients: Vec<Patient>,
    pub raw_events: Vec<RawEventRecord>,
    pub sequences: Vec<StatusSequence>,
}

impl Cohort {
    pub fn len(&self) -> usize {
        self.patients.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patients.is_empty()
    }

    pub fn patient_index(&self, id: &str) -> Option<usize> {
        self.patients.binary_search_by(|p| p.id.as_str().cmp(id)).ok()
    }

    pub fn events_of<'a>(&'a self, id: &'a str) -> impl Iterator<Item = &'a RawEventRecord> + 'a {
        self.raw_events.iter().filter(move |e| e.patient_id == id)
    }

    /// Numeric values of one feature across the cohort (imputed values included).
    pub fn numeric_column(&self, feature: usize) -> Vec<f64> {
        self.patients
            .iter()
            .filter_map(|p| match p.baseline[feature] {
                BaselineValue::Numeric(v) => Some(v),
                BaselineValue::Level(_) => None,
            })
            .collect()
    }
}
