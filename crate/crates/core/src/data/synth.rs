//! Seeded synthetic cohorts built from four outcome archetypes.
//!
//! Each archetype has a characteristic event trajectory and shifts a subset
//! of baseline labs by `separation` standard deviations, so both the
//! sequence-based and the baseline-graph clustering paths have signal to
//! recover.

use super::config::{CohortConfig, FeatureConfig};
use super::ingest::{assemble, write_baseline_csv, write_events_csv};
use super::{Arm, BaselineValue, Cohort, FeatureKind, FeatureSpec, Patient, RawEventRecord, RawEventType};
use crate::error::{Error, Result};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand::distr::weighted::WeightedIndex;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Archetype {
    TreatmentSuccess,
    DeathOrTransplant,
    SustainedAdverseEvents,
    EarlyDropOff,
}

impl Archetype {
    pub const ALL: [Archetype; 4] = [
        Archetype::TreatmentSuccess,
        Archetype::DeathOrTransplant,
        Archetype::SustainedAdverseEvents,
        Archetype::EarlyDropOff,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Archetype::TreatmentSuccess => "treatment_success",
            Archetype::DeathOrTransplant => "death_transplant",
            Archetype::SustainedAdverseEvents => "sustained_ae",
            Archetype::EarlyDropOff => "early_dropoff",
        }
    }

    pub fn parse(s: &str) -> Option<Archetype> {
        Archetype::ALL.into_iter().find(|a| a.name() == s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub n: usize,
    /// Patients in arm A; the rest are in arm B.
    pub arm_a: usize,
    /// Mixture weights in `Archetype::ALL` order.
    pub mixture: [f64; 4],
    /// Archetype shift of affected baseline features, in standard deviations.
    pub separation: f64,
    pub horizon: usize,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec { n: 147, arm_a: 73, mixture: [0.25; 4], separation: 1.5, horizon: 180 }
    }
}

/// Last day of the protocol treatment window.
pub const TREATMENT_WINDOW: usize = 90;
const MIN_HORIZON: usize = 40;

struct FeatureDef {
    name: &'static str,
    mean: f64,
    sd: f64,
    min: f64,
    max: f64,
    decimals: i32,
    units: &'static str,
    range: (f64, f64),
    /// Shift in sd units per archetype, `Archetype::ALL` order.
    shift: [f64; 4],
}

#[rustfmt::skip]
const NUMERIC: [FeatureDef; 19] = [
    FeatureDef { name: "Age", mean: 46.0, sd: 10.0, min: 21.0, max: 80.0, decimals: 0, units: "years", range: (18.0, 90.0), shift: [0.5, 0.3, 0.2, -1.0] },
    FeatureDef { name: "BMI", mean: 27.0, sd: 5.0, min: 15.0, max: 50.0, decimals: 1, units: "kg/m2", range: (18.5, 25.0), shift: [0.0, 0.3, 0.0, -0.8] },
    FeatureDef { name: "MELD", mean: 24.0, sd: 5.0, min: 6.0, max: 40.0, decimals: 0, units: "score", range: (6.0, 20.0), shift: [-1.0, 1.5, 0.3, 0.0] },
    FeatureDef { name: "Hb", mean: 11.0, sd: 1.5, min: 5.0, max: 17.0, decimals: 1, units: "g/dL", range: (12.0, 17.5), shift: [0.5, -0.5, -1.2, 0.0] },
    FeatureDef { name: "WBC", mean: 11.0, sd: 4.0, min: 2.0, max: 40.0, decimals: 1, units: "10^3/uL", range: (4.5, 11.0), shift: [-0.5, 0.5, 1.5, 0.0] },
    FeatureDef { name: "Platelets", mean: 150.0, sd: 60.0, min: 20.0, max: 450.0, decimals: 0, units: "10^3/uL", range: (150.0, 400.0), shift: [0.5, -0.5, -1.2, 0.3] },
    FeatureDef { name: "MCV", mean: 101.0, sd: 8.0, min: 75.0, max: 125.0, decimals: 1, units: "fL", range: (80.0, 100.0), shift: [0.0, 0.3, 0.0, 0.8] },
    FeatureDef { name: "INR", mean: 1.8, sd: 0.4, min: 0.9, max: 4.0, decimals: 2, units: "ratio", range: (0.8, 1.2), shift: [-0.8, 1.5, 0.0, 0.0] },
    FeatureDef { name: "PT", mean: 20.0, sd: 4.0, min: 10.0, max: 40.0, decimals: 1, units: "s", range: (11.0, 13.5), shift: [-0.5, 1.2, 0.0, 0.0] },
    FeatureDef { name: "Alb", mean: 2.8, sd: 0.5, min: 1.5, max: 4.5, decimals: 1, units: "g/dL", range: (3.4, 5.4), shift: [1.0, -1.0, -0.3, 0.0] },
    FeatureDef { name: "TBil", mean: 12.0, sd: 6.0, min: 3.0, max: 45.0, decimals: 1, units: "mg/dL", range: (0.1, 1.2), shift: [-1.0, 1.5, 0.3, 0.0] },
    FeatureDef { name: "DBil", mean: 7.0, sd: 4.0, min: 1.0, max: 30.0, decimals: 1, units: "mg/dL", range: (0.0, 0.3), shift: [-0.8, 1.5, 0.0, 0.0] },
    FeatureDef { name: "Cr", mean: 0.9, sd: 0.3, min: 0.3, max: 4.0, decimals: 2, units: "mg/dL", range: (0.6, 1.3), shift: [-0.5, 1.5, 1.0, 0.0] },
    FeatureDef { name: "ALT", mean: 50.0, sd: 20.0, min: 8.0, max: 250.0, decimals: 0, units: "U/L", range: (7.0, 56.0), shift: [-0.5, 1.5, 0.0, 0.3] },
    FeatureDef { name: "AST", mean: 120.0, sd: 50.0, min: 20.0, max: 500.0, decimals: 0, units: "U/L", range: (10.0, 40.0), shift: [-0.5, 1.5, 0.0, 0.3] },
    FeatureDef { name: "ALK", mean: 170.0, sd: 60.0, min: 40.0, max: 600.0, decimals: 0, units: "U/L", range: (44.0, 147.0), shift: [0.0, 0.3, 1.2, 0.0] },
    FeatureDef { name: "TP", mean: 6.5, sd: 0.8, min: 4.0, max: 9.0, decimals: 1, units: "g/dL", range: (6.0, 8.3), shift: [0.3, 0.0, 0.0, -1.0] },
    FeatureDef { name: "Drinks30", mean: 250.0, sd: 100.0, min: 0.0, max: 900.0, decimals: 0, units: "drinks", range: (0.0, 60.0), shift: [-0.8, 0.0, 0.0, 1.5] },
    FeatureDef { name: "DrinkingDays30", mean: 24.0, sd: 4.0, min: 0.0, max: 30.0, decimals: 0, units: "days", range: (0.0, 8.0), shift: [-0.8, 0.0, 0.0, 1.2] },
];

const SEX_LEVELS: [&str; 2] = ["F", "M"];
const SEX_WEIGHTS: [f64; 2] = [0.4, 0.6];
const RACE_LEVELS: [&str; 4] = ["White", "Black", "Asian", "Other"];
const RACE_WEIGHTS: [f64; 4] = [0.75, 0.1, 0.05, 0.1];

/// Generated cohort plus the file renderings.
#[derive(Debug, Clone)]
pub struct SynthCohort {
    pub cohort: Cohort,
    pub config: CohortConfig,
    /// Archetype per patient, aligned with `cohort.patients`.
    pub labels: Vec<Archetype>,
    pub baseline_csv: String,
    pub events_csv: String,
    pub labels_csv: String,
    pub config_toml: String,
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidSpec("n must be positive".into()));
        }
        if self.arm_a > self.n {
            return Err(Error::InvalidSpec(format!("arm A size {} exceeds n = {}", self.arm_a, self.n)));
        }
        if self.mixture.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidSpec("mixture weights must be finite and non-negative".into()));
        }
        let total: f64 = self.mixture.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidSpec(format!("mixture weights sum to {total}, expected 1")));
        }
        if !self.separation.is_finite() {
            return Err(Error::InvalidSpec("separation must be finite".into()));
        }
        if self.horizon < MIN_HORIZON {
            return Err(Error::InvalidSpec(format!("horizon must be at least {MIN_HORIZON}")));
        }
        Ok(())
    }

    pub fn config(&self) -> CohortConfig {
        let mut config = CohortConfig { horizon: self.horizon, ..CohortConfig::default() };
        config.features.insert(
            "Sex".into(),
            FeatureConfig { levels: Some(SEX_LEVELS.iter().map(|s| s.to_string()).collect()), ..Default::default() },
        );
        config.features.insert(
            "Race".into(),
            FeatureConfig { levels: Some(RACE_LEVELS.iter().map(|s| s.to_string()).collect()), ..Default::default() },
        );
        for f in &NUMERIC {
            config.features.insert(
                f.name.into(),
                FeatureConfig { units: Some(f.units.into()), range: Some([f.range.0, f.range.1]), levels: None },
            );
        }
        config
    }
}

fn feature_schema() -> Vec<FeatureSpec> {
    let mut features = vec![
        FeatureSpec {
            name: "Sex".into(),
            kind: FeatureKind::Categorical { levels: SEX_LEVELS.iter().map(|s| s.to_string()).collect() },
        },
        FeatureSpec {
            name: "Race".into(),
            kind: FeatureKind::Categorical { levels: RACE_LEVELS.iter().map(|s| s.to_string()).collect() },
        },
    ];
    features.extend(NUMERIC.iter().map(|f| FeatureSpec {
        name: f.name.into(),
        kind: FeatureKind::Numeric { units: Some(f.units.into()), range: Some(f.range) },
    }));
    features
}

fn round_to(x: f64, decimals: i32) -> f64 {
    let scale = 10f64.powi(decimals);
    (x * scale).round() / scale
}

fn event(id: &str, kind: RawEventType, start: usize, end: usize, horizon: usize) -> Option<RawEventRecord> {
    (start <= horizon).then(|| RawEventRecord {
        patient_id: id.to_string(),
        kind,
        start_day: start,
        end_day: end.min(horizon),
    })
}

fn trajectory(archetype: Archetype, id: &str, horizon: usize, rng: &mut ChaCha8Rng) -> Vec<RawEventRecord> {
    use RawEventType as R;
    let window = TREATMENT_WINDOW.min(horizon);
    let mut out = Vec::new();
    match archetype {
        Archetype::TreatmentSuccess => {
            out.extend(event(id, R::Treatment, 0, window, horizon));
            if rng.random_bool(0.5) {
                let start = rng.random_range(5..=window.min(60));
                let len = rng.random_range(0..=3);
                out.extend(event(id, R::Oae, start, (start + len).min(window), horizon));
            }
        }
        Archetype::DeathOrTransplant => {
            let onset = rng.random_range(6..=12);
            let terminal = rng.random_range(18..=32);
            if rng.random_bool(0.5) {
                let start = rng.random_range(2..=3);
                out.extend(event(id, R::Oae, start, start + rng.random_range(0..=1), horizon));
            }
            out.extend(event(id, R::Treatment, 0, terminal - 1, horizon));
            out.extend(event(id, R::Aki, onset, terminal - 1, horizon));
            let kind = if rng.random_bool(0.8) { R::Death } else { R::LiverTransplant };
            out.extend(event(id, kind, terminal, terminal, horizon));
        }
        Archetype::SustainedAdverseEvents => {
            out.extend(event(id, R::Treatment, 0, window, horizon));
            let onset = rng.random_range(20..=40);
            out.extend(event(id, R::Aki, onset, horizon, horizon));
            for _ in 0..rng.random_range(1..=2) {
                let start = rng.random_range(onset + 5..=horizon.saturating_sub(20).max(onset + 5));
                let len = rng.random_range(5..=15);
                out.extend(event(id, R::Infection, start, start + len, horizon));
            }
        }
        Archetype::EarlyDropOff => {
            let day = rng.random_range(3..=12);
            out.extend(event(id, R::Treatment, 0, day - 1, horizon));
            if rng.random_bool(0.3) {
                let start = rng.random_range(1..day);
                out.extend(event(id, R::Oae, start, start, horizon));
            }
            out.extend(event(id, R::OffStudy, day, day, horizon));
        }
    }
    out
}

/// Generates a cohort. Deterministic for a fixed `(spec, seed)`.
pub fn generate_synthetic(spec: &SynthSpec, seed: u64) -> Result<SynthCohort> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let archetype_dist = WeightedIndex::new(spec.mixture).map_err(|e| Error::InvalidSpec(e.to_string()))?;
    let sex_dist = WeightedIndex::new(SEX_WEIGHTS).expect("static weights");
    let race_dist = WeightedIndex::new(RACE_WEIGHTS).expect("static weights");
    let std_normal = Normal::new(0.0, 1.0).expect("unit normal");

    let mut arms: Vec<Arm> = (0..spec.n).map(|i| if i < spec.arm_a { Arm::A } else { Arm::B }).collect();
    arms.shuffle(&mut rng);

    let width = spec.n.to_string().len().max(3);
    let mut patients = Vec::with_capacity(spec.n);
    let mut labels = Vec::with_capacity(spec.n);
    let mut events = Vec::new();
    for (i, arm) in arms.into_iter().enumerate() {
        let id = format!("P{:0width$}", i + 1);
        let archetype = Archetype::ALL[archetype_dist.sample(&mut rng)];
        let a = archetype as usize;
        let mut baseline = vec![
            BaselineValue::Level(sex_dist.sample(&mut rng)),
            BaselineValue::Level(race_dist.sample(&mut rng)),
        ];
        for f in &NUMERIC {
            let z: f64 = std_normal.sample(&mut rng);
            let x = f.mean + f.sd * (z + spec.separation * f.shift[a]);
            baseline.push(BaselineValue::Numeric(round_to(x.clamp(f.min, f.max), f.decimals)));
        }
        events.extend(trajectory(archetype, &id, spec.horizon, &mut rng));
        let imputed = vec![false; baseline.len()];
        patients.push(Patient { id, arm, baseline, imputed });
        labels.push(archetype);
    }
    events.sort();

    let cohort = assemble(feature_schema(), patients, events, spec.horizon)?;
    let config = spec.config();
    let meta = vec![format!(
        "cohortflow synth {} seed={seed} n={} arm_a={} mixture={:?} separation={} horizon={}",
        env!("CARGO_PKG_VERSION"),
        spec.n,
        spec.arm_a,
        spec.mixture,
        spec.separation,
        spec.horizon
    )];
    let baseline_csv = write_baseline_csv(&cohort, &meta);
    let events_csv = write_events_csv(&cohort.raw_events, &meta);
    let mut labels_csv = String::new();
    for line in &meta {
        let _ = writeln!(labels_csv, "# {line}");
    }
    labels_csv.push_str("patient_id,archetype\n");
    for (p, a) in cohort.patients.iter().zip(&labels) {
        let _ = writeln!(labels_csv, "{},{}", p.id, a.name());
    }
    let config_toml = format!("# {}\n{}", meta[0], config.to_toml_string());
    Ok(SynthCohort { cohort, config, labels, baseline_csv, events_csv, labels_csv, config_toml })
}

/// Reads a `patient_id,archetype` sidecar file.
pub fn parse_labels(text: &str) -> Result<Vec<(String, Archetype)>> {
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_reader(text.as_bytes());
    let mut out = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let row = record.position().map(|p| p.line() as usize).unwrap_or(0);
        let (Some(id), Some(name)) = (record.get(0), record.get(1)) else {
            return Err(Error::validation("labels", row, None, "expected `patient_id,archetype`"));
        };
        let archetype = Archetype::parse(name)
            .ok_or_else(|| Error::validation("labels", row, Some("archetype"), format!("unknown archetype `{name}`")))?;
        out.push((id.to_string(), archetype));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{parse_cohort_str, EventStatus};

    #[test]
    fn default_cohort_parses_back() {
        let s = generate_synthetic(&SynthSpec::default(), 7).unwrap();
        assert_eq!(s.cohort.len(), 147);
        let a = s.cohort.patients.iter().filter(|p| p.arm == Arm::A).count();
        assert_eq!((a, 147 - a), (73, 74));
        let config = CohortConfig::from_toml_str(&s.config_toml).unwrap();
        let parsed = parse_cohort_str(&s.baseline_csv, &s.events_csv, &config).unwrap();
        assert_eq!(parsed, s.cohort);
        let labels = parse_labels(&s.labels_csv).unwrap();
        assert_eq!(labels.len(), 147);
        assert!(labels.iter().zip(&s.labels).all(|(l, a)| l.1 == *a));
    }

    #[test]
    fn seed_determinism() {
        let spec = SynthSpec { n: 40, arm_a: 20, ..SynthSpec::default() };
        let a = generate_synthetic(&spec, 11).unwrap();
        let b = generate_synthetic(&spec, 11).unwrap();
        assert_eq!(a.baseline_csv, b.baseline_csv);
        assert_eq!(a.events_csv, b.events_csv);
        assert_eq!(a.labels_csv, b.labels_csv);
        let c = generate_synthetic(&spec, 12).unwrap();
        assert_ne!(a.events_csv, c.events_csv);
    }

    #[test]
    fn success_only_has_nothing_after_treatment_window() {
        let spec = SynthSpec { n: 60, arm_a: 30, mixture: [1.0, 0.0, 0.0, 0.0], ..SynthSpec::default() };
        let s = generate_synthetic(&spec, 3).unwrap();
        assert!(s.cohort.raw_events.iter().all(|e| e.end_day <= TREATMENT_WINDOW));
        for seq in &s.cohort.sequences {
            assert!(seq.statuses[TREATMENT_WINDOW + 1..].iter().all(|&x| x == EventStatus::NoEvent));
        }
    }

    #[test]
    fn invalid_specs() {
        let bad_mix = SynthSpec { mixture: [0.5, 0.5, 0.1, 0.0], ..SynthSpec::default() };
        assert!(matches!(generate_synthetic(&bad_mix, 1), Err(Error::InvalidSpec(_))));
        let near = SynthSpec { mixture: [0.25, 0.25, 0.25, 0.25 + 1e-12], ..SynthSpec::default() };
        assert!(generate_synthetic(&near, 1).is_ok());
        let arms = SynthSpec { arm_a: 200, ..SynthSpec::default() };
        assert!(generate_synthetic(&arms, 1).is_err());
    }
}
