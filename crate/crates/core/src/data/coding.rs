use super::status::{EventStatus, STATUS_COUNT};
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Numeric severity code per status, used for knowledge-guided clustering.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeverityCoding {
    codes: [f64; STATUS_COUNT],
}

impl Default for SeverityCoding {
    fn default() -> Self {
        use EventStatus::*;
        let mut codes = [0.0; STATUS_COUNT];
        for (status, code) in [
            (DeathOrTransplant, 20.0),
            (OffStudy, 15.0),
            (AkiPlusInfection, 5.0),
            (Aki, 4.0),
            (Infection, 3.0),
            (Oae, 2.0),
            (TreatmentPlusOae, 2.0),
            (Treatment, -5.0),
            (NoEvent, -5.0),
        ] {
            codes[status.index()] = code;
        }
        SeverityCoding { codes }
    }
}

const ADVERSE: [EventStatus; 5] = [
    EventStatus::AkiPlusInfection,
    EventStatus::Aki,
    EventStatus::Infection,
    EventStatus::Oae,
    EventStatus::TreatmentPlusOae,
];

impl SeverityCoding {
    /// Builds a coding from a full table, checking the severity order:
    /// death/transplant > off-study > every adverse event > no event.
    pub fn new(codes: [f64; STATUS_COUNT]) -> Result<Self> {
        let coding = SeverityCoding { codes };
        coding.validate()?;
        Ok(coding)
    }

    /// Default table with the named entries replaced.
    pub fn with_overrides(overrides: &BTreeMap<String, f64>) -> Result<Self> {
        let mut codes = SeverityCoding::default().codes;
        for (name, &code) in overrides {
            let status: EventStatus = name
                .parse()
                .map_err(|_| Error::InvalidConfig(format!("unknown status `{name}` in severity table")))?;
            codes[status.index()] = code;
        }
        SeverityCoding::new(codes)
    }

    fn validate(&self) -> Result<()> {
        if self.codes.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidConfig("severity codes must be finite".into()));
        }
        let death = self.code(EventStatus::DeathOrTransplant);
        let off = self.code(EventStatus::OffStudy);
        let none = self.code(EventStatus::NoEvent);
        let ordered = death > off
            && ADVERSE.iter().all(|&s| off > self.code(s) && self.code(s) > none);
        if !ordered {
            return Err(Error::InvalidConfig(
                "severity codes must satisfy DeathOrTransplant > OffStudy > adverse events > NoEvent".into(),
            ));
        }
        Ok(())
    }

    pub fn code(&self, status: EventStatus) -> f64 {
        self.codes[status.index()]
    }

    pub fn codes(&self) -> &[f64; STATUS_COUNT] {
        &self.codes
    }

    /// Largest absolute code, used to scale sequences into node features.
    pub fn max_abs(&self) -> f64 {
        self.codes.iter().fold(0.0f64, |m, c| m.max(c.abs()))
    }
}
