//! Raw event kinds, summarized daily statuses and the cascade trump rule.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

/// Raw event kinds accepted at ingestion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum RawEventType {
    Treatment,
    Oae,
    Infection,
    Aki,
    OffStudy,
    LiverTransplant,
    Death,
}

impl RawEventType {
    pub const ALL: [RawEventType; 7] = [
        RawEventType::Treatment,
        RawEventType::Oae,
        RawEventType::Infection,
        RawEventType::Aki,
        RawEventType::OffStudy,
        RawEventType::LiverTransplant,
        RawEventType::Death,
    ];

    /// Name used in the events CSV `kind` column.
    pub fn name(self) -> &'static str {
        match self {
            RawEventType::Treatment => "Treatment",
            RawEventType::Oae => "OAE",
            RawEventType::Infection => "Infection",
            RawEventType::Aki => "AKI",
            RawEventType::OffStudy => "OffStudy",
            RawEventType::LiverTransplant => "LiverTransplant",
            RawEventType::Death => "Death",
        }
    }

    /// Death and transplant are single-day events.
    pub fn is_point_event(self) -> bool {
        matches!(self, RawEventType::Death | RawEventType::LiverTransplant)
    }

    fn bit(self) -> u8 {
        1 << (self as u8)
    }
}

impl fmt::Display for RawEventType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnknownName(pub String);

impl fmt::Display for UnknownName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "unknown name `{}`", self.0)
    }
}

impl std::error::Error for UnknownName {}

impl FromStr for RawEventType {
    type Err = UnknownName;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        RawEventType::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| UnknownName(s.to_string()))
    }
}

/// Set of raw event kinds active on one day.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct EventSet(u8);

impl EventSet {
    pub const EMPTY: EventSet = EventSet(0);

    pub fn from_bits(bits: u8) -> Self {
        EventSet(bits & 0x7f)
    }

    pub fn bits(self) -> u8 {
        self.0
    }

    pub fn insert(&mut self, kind: RawEventType) {
        self.0 |= kind.bit();
    }

    pub fn contains(self, kind: RawEventType) -> bool {
        self.0 & kind.bit() != 0
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    /// All 128 subsets of the raw event kinds.
    pub fn all_subsets() -> impl Iterator<Item = EventSet> {
        (0u8..128).map(EventSet)
    }
}

impl FromIterator<RawEventType> for EventSet {
    fn from_iter<I: IntoIterator<Item = RawEventType>>(iter: I) -> Self {
        let mut set = EventSet::EMPTY;
        for kind in iter {
            set.insert(kind);
        }
        set
    }
}

/// Summarized daily status, declared in trump priority order (highest first).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum EventStatus {
    DeathOrTransplant,
    OffStudy,
    AkiPlusInfection,
    Aki,
    Infection,
    Oae,
    TreatmentPlusOae,
    Treatment,
    NoEvent,
}

pub const STATUS_COUNT: usize = 9;

impl EventStatus {
    pub const ALL: [EventStatus; STATUS_COUNT] = [
        EventStatus::DeathOrTransplant,
        EventStatus::OffStudy,
        EventStatus::AkiPlusInfection,
        EventStatus::Aki,
        EventStatus::Infection,
        EventStatus::Oae,
        EventStatus::TreatmentPlusOae,
        EventStatus::Treatment,
        EventStatus::NoEvent,
    ];

    /// Dense index 0..9, equal to `priority() - 1`.
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<EventStatus> {
        EventStatus::ALL.get(i).copied()
    }

    /// Trump rank, 1 = highest priority.
    pub fn priority(self) -> usize {
        self.index() + 1
    }

    pub fn name(self) -> &'static str {
        match self {
            EventStatus::DeathOrTransplant => "DeathOrTransplant",
            EventStatus::OffStudy => "OffStudy",
            EventStatus::AkiPlusInfection => "AkiPlusInfection",
            EventStatus::Aki => "Aki",
            EventStatus::Infection => "Infection",
            EventStatus::Oae => "Oae",
            EventStatus::TreatmentPlusOae => "TreatmentPlusOae",
            EventStatus::Treatment => "Treatment",
            EventStatus::NoEvent => "NoEvent",
        }
    }

    /// Statuses that persist to the end of follow-up once entered.
    pub fn is_absorbing(self) -> bool {
        matches!(self, EventStatus::DeathOrTransplant | EventStatus::OffStudy)
    }
}

impl fmt::Display for EventStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EventStatus {
    type Err = UnknownName;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        EventStatus::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| UnknownName(s.to_string()))
    }
}

/// Resolves the raw events active on one day into a single status.
///
/// `Oae` is OAE without ongoing treatment; OAE during treatment resolves to
/// `TreatmentPlusOae` unless an infection or kidney injury trumps it.
pub fn summarize_day(active: EventSet) -> EventStatus {
    use RawEventType as R;
    let has = |k| active.contains(k);
    if has(R::Death) || has(R::LiverTransplant) {
        EventStatus::DeathOrTransplant
    } else if has(R::OffStudy) {
        EventStatus::OffStudy
    } else if has(R::Aki) && has(R::Infection) {
        EventStatus::AkiPlusInfection
    } else if has(R::Aki) {
        EventStatus::Aki
    } else if has(R::Infection) {
        EventStatus::Infection
    } else if has(R::Oae) {
        if has(R::Treatment) {
            EventStatus::TreatmentPlusOae
        } else {
            EventStatus::Oae
        }
    } else if has(R::Treatment) {
        EventStatus::Treatment
    } else {
        EventStatus::NoEvent
    }
}
