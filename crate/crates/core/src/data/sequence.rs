use super::coding::SeverityCoding;
use super::status::{summarize_day, EventSet, EventStatus};
use super::{RawEventRecord, StatusSequence};
use crate::error::{Error, Result};

/// Expands one patient's raw event intervals into a daily status sequence of
/// length `horizon + 1`, then makes terminal statuses absorbing.
///
/// Intervals reaching past the horizon are clipped to it; ingestion is where
/// out-of-range days are reported as errors.
pub fn build_sequence(patient_id: &str, records: &[RawEventRecord], horizon: usize) -> Result<StatusSequence> {
    let mut active = vec![EventSet::EMPTY; horizon + 1];
    for r in records {
        if r.start_day > r.end_day {
            return Err(Error::InvalidCohort(format!(
                "event {} for {} starts on day {} after it ends on day {}",
                r.kind, r.patient_id, r.start_day, r.end_day
            )));
        }
        if r.start_day > horizon {
            continue;
        }
        for day in &mut active[r.start_day..=r.end_day.min(horizon)] {
            day.insert(r.kind);
        }
    }
    let mut statuses: Vec<EventStatus> = active.into_iter().map(summarize_day).collect();

    let first_off = statuses.iter().position(|&s| s == EventStatus::OffStudy);
    let first_death = statuses.iter().position(|&s| s == EventStatus::DeathOrTransplant);
    if let Some(t) = first_off {
        statuses[t..].fill(EventStatus::OffStudy);
    }
    if let Some(t) = first_death {
        statuses[t..].fill(EventStatus::DeathOrTransplant);
    }

    Ok(StatusSequence { patient_id: patient_id.to_string(), statuses })
}

pub fn encode_sequence(seq: &StatusSequence, coding: &SeverityCoding) -> Vec<f64> {
    seq.statuses.iter().map(|&s| coding.code(s)).collect()
}
