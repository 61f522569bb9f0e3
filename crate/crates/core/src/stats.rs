//! Survival curves, box summaries and adverse-event incidence.

use crate::data::{Cohort, EventStatus, RawEventType, StatusSequence};
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use std::io::Write;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SurvivalRecord {
    pub patient_id: String,
    pub time: usize,
    pub event: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SurvivalOptions {
    /// When false, a transplant (without death the same day) censors.
    pub transplant_is_event: bool,
}

impl Default for SurvivalOptions {
    fn default() -> Self {
        SurvivalOptions { transplant_is_event: true }
    }
}

/// Record for one sequence: the first death/transplant day is an event;
/// otherwise the patient is censored at the first off-study day or the
/// horizon.
pub fn survival_record(seq: &StatusSequence) -> SurvivalRecord {
    let time_event = match seq.first_day_of(EventStatus::DeathOrTransplant) {
        Some(d) => (d, true),
        None => (seq.first_day_of(EventStatus::OffStudy).unwrap_or(seq.horizon()), false),
    };
    SurvivalRecord { patient_id: seq.patient_id.clone(), time: time_event.0, event: time_event.1 }
}

pub fn survival_records(cohort: &Cohort, options: SurvivalOptions) -> Vec<SurvivalRecord> {
    cohort
        .sequences
        .iter()
        .map(|seq| {
            let mut r = survival_record(seq);
            if r.event && !options.transplant_is_event {
                let on_day = |kind| cohort.events_of(&seq.patient_id).any(|e| e.kind == kind && e.start_day == r.time);
                if on_day(RawEventType::LiverTransplant) && !on_day(RawEventType::Death) {
                    r.event = false;
                }
            }
            r
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KmPoint {
    pub time: usize,
    pub survival: f64,
    pub lower: f64,
    pub upper: f64,
    pub at_risk: usize,
    pub events: usize,
    pub censored: usize,
}

/// Step points: an initial `(0, 1)` point, then one point per distinct
/// observed time carrying the estimate just after that time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KmCurve {
    pub group: String,
    pub confidence: f64,
    pub points: Vec<KmPoint>,
}

impl KmCurve {
    /// `S(t)`: the last point at or before `t`.
    pub fn survival_at(&self, t: usize) -> f64 {
        self.points.iter().take_while(|p| p.time <= t).last().map_or(1.0, |p| p.survival)
    }
}

/// Product-limit estimate with Greenwood variance and a normal interval
/// clamped to [0, 1].
pub fn km_estimate(records: &[SurvivalRecord], confidence: f64) -> Result<KmCurve> {
    if records.is_empty() {
        return Err(Error::EmptyGroup);
    }
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(Error::InvalidConfig(format!("confidence {confidence} outside (0, 1)")));
    }
    let z = Normal::standard().inverse_cdf(0.5 + confidence / 2.0);
    let mut sorted: Vec<(usize, bool)> = records.iter().map(|r| (r.time, r.event)).collect();
    sorted.sort_unstable();
    let n = sorted.len();
    let mut points = vec![KmPoint { time: 0, survival: 1.0, lower: 1.0, upper: 1.0, at_risk: n, events: 0, censored: 0 }];
    let (mut s, mut greenwood, mut at_risk, mut i) = (1.0, 0.0, n, 0);
    while i < n {
        let t = sorted[i].0;
        let (mut d, mut c) = (0, 0);
        while i < n && sorted[i].0 == t {
            if sorted[i].1 {
                d += 1;
            } else {
                c += 1;
            }
            i += 1;
        }
        if d > 0 {
            s *= 1.0 - d as f64 / at_risk as f64;
            if d < at_risk {
                greenwood += d as f64 / (at_risk as f64 * (at_risk - d) as f64);
            }
        }
        let (lower, upper) = if s == 0.0 {
            (0.0, 0.0)
        } else {
            let half = z * s * greenwood.sqrt();
            ((s - half).clamp(0.0, 1.0), (s + half).clamp(0.0, 1.0))
        };
        points.push(KmPoint { time: t, survival: s, lower, upper, at_risk, events: d, censored: c });
        at_risk -= d + c;
    }
    Ok(KmCurve { group: String::new(), confidence, points })
}

/// Type-7 quantile (linear interpolation between order statistics) of sorted
/// data.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    Some(quantile_sorted(&v, 0.5))
}

fn mean(values: &[f64]) -> Option<f64> {
    (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxSummary {
    pub n: usize,
    pub min_whisker: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max_whisker: f64,
    /// Points beyond the whiskers, ascending.
    pub outliers: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxStats {
    pub feature: String,
    pub group: String,
    #[serde(flatten)]
    pub summary: BoxSummary,
}

/// Tukey box: whiskers at the most extreme points within 1.5·IQR of the
/// quartiles.
pub fn box_summary(values: &[f64]) -> Result<BoxSummary> {
    if values.is_empty() {
        return Err(Error::EmptyGroup);
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("box plot values".into()));
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let (q1, med, q3) = (quantile_sorted(&v, 0.25), quantile_sorted(&v, 0.5), quantile_sorted(&v, 0.75));
    let iqr = q3 - q1;
    let (lo_fence, hi_fence) = (q1 - 1.5 * iqr, q3 + 1.5 * iqr);
    let inside: Vec<f64> = v.iter().copied().filter(|x| (lo_fence..=hi_fence).contains(x)).collect();
    let outliers = v.iter().copied().filter(|x| !(lo_fence..=hi_fence).contains(x)).collect();
    Ok(BoxSummary {
        n: v.len(),
        // The quartiles lie inside the fences, so `inside` is never empty.
        min_whisker: inside[0],
        q1,
        median: med,
        q3,
        max_whisker: inside[inside.len() - 1],
        outliers,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AeIncidence {
    pub affected: usize,
    pub percent: f64,
    /// Total days in the counted statuses, over affected patients.
    pub median_days: Option<f64>,
    pub mean_days: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TerminalIncidence {
    pub affected: usize,
    pub percent: f64,
    /// Day of first entry, over affected patients.
    pub median_day: Option<f64>,
    pub mean_day: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IncidenceStats {
    pub group: String,
    pub n: usize,
    pub aki: AeIncidence,
    pub infection: AeIncidence,
    pub oae: AeIncidence,
    pub death_or_dropoff: TerminalIncidence,
    pub death: TerminalIncidence,
    pub dropoff: TerminalIncidence,
}

fn ae_incidence(sequences: &[StatusSequence], statuses: &[EventStatus]) -> AeIncidence {
    let days: Vec<f64> = sequences
        .iter()
        .map(|s| s.statuses.iter().filter(|x| statuses.contains(x)).count())
        .filter(|&d| d > 0)
        .map(|d| d as f64)
        .collect();
    AeIncidence {
        affected: days.len(),
        percent: 100.0 * days.len() as f64 / sequences.len() as f64,
        median_days: median(&days),
        mean_days: mean(&days),
    }
}

fn terminal_incidence(sequences: &[StatusSequence], statuses: &[EventStatus]) -> TerminalIncidence {
    let days: Vec<f64> = sequences
        .iter()
        .filter_map(|s| s.statuses.iter().position(|x| statuses.contains(x)))
        .map(|d| d as f64)
        .collect();
    TerminalIncidence {
        affected: days.len(),
        percent: 100.0 * days.len() as f64 / sequences.len() as f64,
        median_day: median(&days),
        mean_day: mean(&days),
    }
}

pub fn incidence_summary(sequences: &[StatusSequence]) -> Result<IncidenceStats> {
    use EventStatus::*;
    if sequences.is_empty() {
        return Err(Error::EmptyGroup);
    }
    Ok(IncidenceStats {
        group: String::new(),
        n: sequences.len(),
        aki: ae_incidence(sequences, &[Aki, AkiPlusInfection]),
        infection: ae_incidence(sequences, &[Infection, AkiPlusInfection]),
        oae: ae_incidence(sequences, &[Oae, TreatmentPlusOae]),
        death_or_dropoff: terminal_incidence(sequences, &[DeathOrTransplant, OffStudy]),
        death: terminal_incidence(sequences, &[DeathOrTransplant]),
        dropoff: terminal_incidence(sequences, &[OffStudy]),
    })
}

fn write_header(out: &mut impl Write, header: &[String]) -> Result<()> {
    for line in header {
        writeln!(out, "# {line}")?;
    }
    Ok(())
}

fn opt(v: Option<f64>) -> String {
    v.map_or(String::new(), |x| x.to_string())
}

pub fn write_km_csv(curves: &[KmCurve], header: &[String], mut out: impl Write) -> Result<()> {
    write_header(&mut out, header)?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["group", "time", "survival", "lower", "upper", "at_risk", "events", "censored"])?;
    for c in curves {
        for p in &c.points {
            w.write_record([
                c.group.clone(),
                p.time.to_string(),
                p.survival.to_string(),
                p.lower.to_string(),
                p.upper.to_string(),
                p.at_risk.to_string(),
                p.events.to_string(),
                p.censored.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_box_csv(rows: &[BoxStats], header: &[String], mut out: impl Write) -> Result<()> {
    write_header(&mut out, header)?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["group", "feature", "n", "min_whisker", "q1", "median", "q3", "max_whisker", "outliers"])?;
    for b in rows {
        let s = &b.summary;
        let outliers: Vec<String> = s.outliers.iter().map(f64::to_string).collect();
        w.write_record([
            b.group.clone(),
            b.feature.clone(),
            s.n.to_string(),
            s.min_whisker.to_string(),
            s.q1.to_string(),
            s.median.to_string(),
            s.q3.to_string(),
            s.max_whisker.to_string(),
            outliers.join(";"),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_incidence_csv(rows: &[IncidenceStats], header: &[String], mut out: impl Write) -> Result<()> {
    write_header(&mut out, header)?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["group", "n", "measure", "affected", "percent", "median", "mean"])?;
    for r in rows {
        for (name, a) in [("aki", &r.aki), ("infection", &r.infection), ("oae", &r.oae)] {
            w.write_record([
                r.group.clone(),
                r.n.to_string(),
                name.into(),
                a.affected.to_string(),
                a.percent.to_string(),
                opt(a.median_days),
                opt(a.mean_days),
            ])?;
        }
        for (name, t) in [("death_or_dropoff", &r.death_or_dropoff), ("death", &r.death), ("dropoff", &r.dropoff)] {
            w.write_record([
                r.group.clone(),
                r.n.to_string(),
                name.into(),
                t.affected.to_string(),
                t.percent.to_string(),
                opt(t.median_day),
                opt(t.mean_day),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}
