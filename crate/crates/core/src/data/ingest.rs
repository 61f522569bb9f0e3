//! CSV ingestion and the matching writers.
//!
//! Both files may start with `#` comment lines (artifact metadata). Row
//! numbers in errors are physical line numbers, header = line 1 when there
//! are no comments.

use super::config::{CohortConfig, MissingPolicy};
use super::sequence::build_sequence;
use super::{Arm, BaselineValue, Cohort, FeatureKind, FeatureSpec, Patient, RawEventRecord, RawEventType};
use crate::error::{Error, Result};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::io::Read;
use std::path::Path;

const BASELINE_FIXED: [&str; 2] = ["patient_id", "arm"];
const EVENT_COLUMNS: [&str; 4] = ["patient_id", "kind", "start_day", "end_day"];

fn reader<R: Read>(input: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(input)
}

fn csv_error(file: &str, e: csv::Error) -> Error {
    let row = e.position().map(|p| p.line() as usize).unwrap_or(0);
    Error::validation(file, row, None, e.to_string())
}

fn line_of(record: &csv::StringRecord) -> usize {
    record.position().map(|p| p.line() as usize).unwrap_or(0)
}

/// Parses a number without accepting `NaN`/`inf` spellings.
fn parse_number(text: &str) -> Option<f64> {
    text.parse::<f64>().ok().filter(|v| v.is_finite())
}

/// Parses the baseline file into a feature schema and patients sorted by id.
pub fn parse_baseline<R: Read>(input: R, file: &str, config: &CohortConfig) -> Result<(Vec<FeatureSpec>, Vec<Patient>)> {
    let mut rdr = reader(input);
    let headers = rdr.headers().map_err(|e| csv_error(file, e))?.clone();
    let header_row = line_of(&headers).max(1);
    if headers.len() < 2 || headers.get(0) != Some(BASELINE_FIXED[0]) || headers.get(1) != Some(BASELINE_FIXED[1]) {
        return Err(Error::validation(file, header_row, None, "header must start with `patient_id,arm`"));
    }
    let mut features = Vec::new();
    let mut seen = BTreeSet::new();
    for name in headers.iter().skip(2) {
        if name.is_empty() {
            return Err(Error::validation(file, header_row, None, "empty feature name"));
        }
        if BASELINE_FIXED.contains(&name) || !seen.insert(name.to_string()) {
            return Err(Error::validation(file, header_row, Some(name), "duplicate column"));
        }
        let cfg = config.features.get(name).cloned().unwrap_or_default();
        let kind = match cfg.levels {
            Some(levels) => FeatureKind::Categorical { levels },
            None => FeatureKind::Numeric { units: cfg.units, range: cfg.range.map(|[lo, hi]| (lo, hi)) },
        };
        features.push(FeatureSpec { name: name.to_string(), kind });
    }

    // Missing cells are collected as None and resolved after all rows are read.
    let mut rows: Vec<(String, Arm, Vec<Option<BaselineValue>>, usize)> = Vec::new();
    let mut ids = BTreeMap::new();
    for record in rdr.records() {
        let record = record.map_err(|e| csv_error(file, e))?;
        let row = line_of(&record);
        let id = record.get(0).unwrap_or_default();
        if id.is_empty() {
            return Err(Error::validation(file, row, Some("patient_id"), "empty patient id"));
        }
        if let Some(first) = ids.insert(id.to_string(), row) {
            return Err(Error::validation(
                file,
                row,
                Some("patient_id"),
                format!("duplicate patient id `{id}` (first seen on row {first})"),
            ));
        }
        let arm_text = record.get(1).unwrap_or_default();
        let arm = Arm::parse(arm_text).ok_or_else(|| {
            Error::validation(file, row, Some("arm"), format!("arm must be `A` or `B`, found `{arm_text}`"))
        })?;
        let mut values = Vec::with_capacity(features.len());
        for (j, spec) in features.iter().enumerate() {
            let cell = record.get(j + 2).unwrap_or_default();
            if cell.is_empty() {
                values.push(None);
                continue;
            }
            let value = match &spec.kind {
                FeatureKind::Categorical { levels } => {
                    let idx = levels.iter().position(|l| l == cell).ok_or_else(|| {
                        Error::validation(file, row, Some(&spec.name), format!("undeclared level `{cell}`"))
                    })?;
                    BaselineValue::Level(idx)
                }
                FeatureKind::Numeric { .. } => {
                    let v = parse_number(cell).ok_or_else(|| {
                        Error::validation(file, row, Some(&spec.name), format!("malformed number `{cell}`"))
                    })?;
                    BaselineValue::Numeric(v)
                }
            };
            values.push(Some(value));
        }
        rows.push((id.to_string(), arm, values, row));
    }

    let mut fill = Vec::with_capacity(features.len());
    for (j, spec) in features.iter().enumerate() {
        let observed: Vec<BaselineValue> = rows.iter().filter_map(|r| r.2[j]).collect();
        let missing_row = rows.iter().find(|r| r.2[j].is_none()).map(|r| r.3);
        let Some(missing_row) = missing_row else {
            fill.push(None);
            continue;
        };
        if config.missing == MissingPolicy::Reject {
            return Err(Error::validation(file, missing_row, Some(&spec.name), "missing value"));
        }
        let value = match &spec.kind {
            FeatureKind::Numeric { .. } => {
                let mut xs: Vec<f64> = observed
                    .iter()
                    .map(|v| match v {
                        BaselineValue::Numeric(x) => *x,
                        BaselineValue::Level(_) => unreachable!(),
                    })
                    .collect();
                if xs.is_empty() {
                    return Err(Error::validation(file, missing_row, Some(&spec.name), "no observed values to impute from"));
                }
                BaselineValue::Numeric(median(&mut xs))
            }
            FeatureKind::Categorical { levels } => {
                let mut counts = vec![0usize; levels.len()];
                for v in &observed {
                    if let BaselineValue::Level(i) = v {
                        counts[*i] += 1;
                    }
                }
                let best = counts.iter().enumerate().max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0))).map(|(i, _)| i);
                BaselineValue::Level(best.unwrap_or(0))
            }
        };
        fill.push(Some(value));
    }

    let mut patients: Vec<Patient> = rows
        .into_iter()
        .map(|(id, arm, values, _)| {
            let imputed = values.iter().map(Option::is_none).collect();
            let baseline = values
                .into_iter()
                .enumerate()
                .map(|(j, v)| v.or(fill[j]).expect("imputation fills every missing column"))
                .collect();
            Patient { id, arm, baseline, imputed }
        })
        .collect();
    patients.sort_by(|a, b| a.id.cmp(&b.id));
    Ok((features, patients))
}

fn median(xs: &mut [f64]) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

/// Parses the events file, checking references against `known_ids`.
pub fn parse_events<R: Read>(
    input: R,
    file: &str,
    known_ids: &BTreeSet<&str>,
    horizon: usize,
) -> Result<Vec<RawEventRecord>> {
    let mut rdr = reader(input);
    let headers = rdr.headers().map_err(|e| csv_error(file, e))?.clone();
    if headers.iter().collect::<Vec<_>>() != EVENT_COLUMNS {
        return Err(Error::validation(
            file,
            line_of(&headers).max(1),
            None,
            "header must be `patient_id,kind,start_day,end_day`",
        ));
    }
    let mut events = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| csv_error(file, e))?;
        let row = line_of(&record);
        let id = &record[0];
        if !known_ids.contains(id) {
            return Err(Error::validation(file, row, Some("patient_id"), format!("unknown patient `{id}`")));
        }
        let kind: RawEventType = record[1]
            .parse()
            .map_err(|e| Error::validation(file, row, Some("kind"), format!("{e}")))?;
        let day = |col: usize| -> Result<usize> {
            let name = EVENT_COLUMNS[col];
            let text = &record[col];
            let d: usize = text
                .parse()
                .map_err(|_| Error::validation(file, row, Some(name), format!("malformed day `{text}`")))?;
            if d > horizon {
                return Err(Error::validation(file, row, Some(name), format!("day {d} out of range [0, {horizon}]")));
            }
            Ok(d)
        };
        let start_day = day(2)?;
        let end_day = day(3)?;
        if start_day > end_day {
            return Err(Error::validation(file, row, Some("end_day"), format!("end_day {end_day} before start_day {start_day}")));
        }
        if kind.is_point_event() && start_day != end_day {
            return Err(Error::validation(file, row, Some("end_day"), format!("{kind} must be a single-day event")));
        }
        events.push(RawEventRecord { patient_id: id.to_string(), kind, start_day, end_day });
    }
    events.sort();
    Ok(events)
}

pub(crate) fn assemble(features: Vec<FeatureSpec>, patients: Vec<Patient>, raw_events: Vec<RawEventRecord>, horizon: usize) -> Result<Cohort> {
    let mut by_patient: BTreeMap<&str, Vec<RawEventRecord>> = BTreeMap::new();
    for e in &raw_events {
        by_patient.entry(e.patient_id.as_str()).or_default().push(e.clone());
    }
    let sequences = patients
        .iter()
        .map(|p| build_sequence(&p.id, by_patient.get(p.id.as_str()).map(Vec::as_slice).unwrap_or(&[]), horizon))
        .collect::<Result<Vec<_>>>()?;
    Ok(Cohort { horizon, features, patients, raw_events, sequences })
}

/// Parses a cohort from in-memory CSV text.
pub fn parse_cohort_str(baseline: &str, events: &str, config: &CohortConfig) -> Result<Cohort> {
    let (features, patients) = parse_baseline(baseline.as_bytes(), "baseline", config)?;
    let ids: BTreeSet<&str> = patients.iter().map(|p| p.id.as_str()).collect();
    let raw_events = parse_events(events.as_bytes(), "events", &ids, config.horizon)?;
    assemble(features, patients, raw_events, config.horizon)
}

pub fn parse_cohort(baseline_file: &Path, events_file: &Path, config: &CohortConfig) -> Result<Cohort> {
    let b_name = baseline_file.display().to_string();
    let e_name = events_file.display().to_string();
    let (features, patients) = parse_baseline(std::fs::File::open(baseline_file)?, &b_name, config)?;
    let ids: BTreeSet<&str> = patients.iter().map(|p| p.id.as_str()).collect();
    let raw_events = parse_events(std::fs::File::open(events_file)?, &e_name, &ids, config.horizon)?;
    assemble(features, patients, raw_events, config.horizon)
}

fn comment_block(out: &mut String, header: &[String]) {
    for line in header {
        let _ = writeln!(out, "# {line}");
    }
}

fn csv_line(out: &mut String, cells: impl IntoIterator<Item = String>) {
    let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
    w.write_record(cells).expect("in-memory write");
    out.push_str(std::str::from_utf8(&w.into_inner().expect("in-memory flush")).expect("utf-8"));
}

/// Writes the baseline file. Imputed cells are written empty so re-parsing
/// reproduces the same cohort.
pub fn write_baseline_csv(cohort: &Cohort, header: &[String]) -> String {
    let mut out = String::new();
    comment_block(&mut out, header);
    csv_line(
        &mut out,
        BASELINE_FIXED.iter().map(|s| s.to_string()).chain(cohort.features.iter().map(|f| f.name.clone())),
    );
    for p in &cohort.patients {
        let cells = p.baseline.iter().zip(&p.imputed).zip(&cohort.features).map(|((v, &imputed), spec)| {
            if imputed {
                return String::new();
            }
            match (v, &spec.kind) {
                (BaselineValue::Numeric(x), _) => format!("{x}"),
                (BaselineValue::Level(i), FeatureKind::Categorical { levels }) => levels[*i].clone(),
                (BaselineValue::Level(i), FeatureKind::Numeric { .. }) => i.to_string(),
            }
        });
        csv_line(&mut out, [p.id.clone(), p.arm.label().to_string()].into_iter().chain(cells));
    }
    out
}

pub fn write_events_csv(events: &[RawEventRecord], header: &[String]) -> String {
    let mut out = String::new();
    comment_block(&mut out, header);
    csv_line(&mut out, EVENT_COLUMNS.iter().map(|s| s.to_string()));
    for e in events {
        csv_line(
            &mut out,
            [e.patient_id.clone(), e.kind.name().to_string(), e.start_day.to_string(), e.end_day.to_string()],
        );
    }
    out
}
