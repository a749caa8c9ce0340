//! Tiny performance data model and its interchange formats.
//!
//! A performance is a single serial stream of touch samples recorded inside a
//! square area, at most five seconds long. Events travel as CSV
//! (`time,x,y,z,moving`); everything else about a performance travels in a
//! JSON sidecar ([`Metadata`]).

use std::fmt;
use std::fmt::Write as _;
use std::str::FromStr;

use chrono::{DateTime, TimeZone, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Upper bound on event time, in seconds.
pub const MAX_DURATION: f64 = 5.0;

/// Header line of the performance CSV.
pub const CSV_HEADER: &str = "time,x,y,z,moving";

/// One timestamped touch sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TouchEvent {
    /// Seconds since the first touch of the performance.
    pub time: f64,
    /// Horizontal position as a fraction of the area width.
    pub x: f64,
    /// Vertical position as a fraction of the area width, growing downward.
    pub y: f64,
    /// Raw device pressure, stored verbatim.
    pub z: f64,
    /// `false` for a touch-down, `true` for a touch-moved sample.
    #[serde(with = "moving_flag")]
    pub moving: bool,
}

impl TouchEvent {
    pub fn new(time: f64, x: f64, y: f64, z: f64, moving: bool) -> Self {
        Self {
            time,
            x,
            y,
            z,
            moving,
        }
    }

    pub fn down(time: f64, x: f64, y: f64) -> Self {
        Self::new(time, x, y, 1.0, false)
    }

    pub fn moved(time: f64, x: f64, y: f64) -> Self {
        Self::new(time, x, y, 1.0, true)
    }

    /// Euclidean distance to another sample, in area widths.
    pub fn distance_to(&self, other: &TouchEvent) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

mod moving_flag {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &bool, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u8(u8::from(*v))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<bool, D::Error> {
        match u8::deserialize(d)? {
            0 => Ok(false),
            1 => Ok(true),
            other => Err(serde::de::Error::custom(format!(
                "moving must be 0 or 1, got {other}"
            ))),
        }
    }
}

/// The eight synthesised instruments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Instrument {
    Chirp,
    Drums,
    Fmlead,
    Keys,
    Pad,
    Quack,
    Strings,
    Wub,
}

impl Instrument {
    pub const ALL: [Instrument; 8] = [
        Instrument::Chirp,
        Instrument::Drums,
        Instrument::Fmlead,
        Instrument::Keys,
        Instrument::Pad,
        Instrument::Quack,
        Instrument::Strings,
        Instrument::Wub,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Instrument::Chirp => "chirp",
            Instrument::Drums => "drums",
            Instrument::Fmlead => "fmlead",
            Instrument::Keys => "keys",
            Instrument::Pad => "pad",
            Instrument::Quack => "quack",
            Instrument::Strings => "strings",
            Instrument::Wub => "wub",
        }
    }
}

impl fmt::Display for Instrument {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown instrument `{0}`")]
pub struct UnknownInstrument(pub String);

impl FromStr for Instrument {
    type Err = UnknownInstrument;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Instrument::ALL
            .into_iter()
            .find(|i| i.name() == s)
            .ok_or_else(|| UnknownInstrument(s.to_string()))
    }
}

/// Sidecar metadata of a performance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub id: String,
    pub performer: String,
    pub instrument: Instrument,
    pub date: DateTime<Utc>,
    pub parent_id: Option<String>,
}

impl Metadata {
    /// Metadata for a performance that has no identity yet, e.g. one read
    /// from a bare CSV file.
    pub fn anonymous(instrument: Instrument) -> Self {
        Self {
            id: String::new(),
            performer: String::new(),
            instrument,
            date: Utc.timestamp_opt(0, 0).unwrap(),
            parent_id: None,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("metadata serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TinyPerformance {
    pub meta: Metadata,
    pub events: Vec<TouchEvent>,
}

impl TinyPerformance {
    pub fn new(meta: Metadata, events: Vec<TouchEvent>) -> Self {
        Self { meta, events }
    }

    pub fn id(&self) -> &str {
        &self.meta.id
    }

    pub fn instrument(&self) -> Instrument {
        self.meta.instrument
    }

    pub fn to_csv(&self) -> String {
        serialize_events_csv(&self.events)
    }

    pub fn validate(&self) -> Validation {
        validate_events(&self.events)
    }
}

/// A reply chain ordered from the root performance to the newest reply.
#[derive(Debug, Clone, PartialEq)]
pub struct LayeredPerformance {
    layers: Vec<TinyPerformance>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ChainError {
    #[error("a layered performance needs at least one layer")]
    Empty,
    #[error("layer {index} has parent {found:?}, expected {expected:?}")]
    BrokenLink {
        index: usize,
        expected: String,
        found: Option<String>,
    },
    #[error("performance {0} appears twice in the chain")]
    Cycle(String),
}

impl LayeredPerformance {
    pub fn new(layers: Vec<TinyPerformance>) -> Result<Self, ChainError> {
        if layers.is_empty() {
            return Err(ChainError::Empty);
        }
        for (index, pair) in layers.windows(2).enumerate() {
            let (older, newer) = (&pair[0], &pair[1]);
            if newer.meta.parent_id.as_deref() != Some(older.id()) {
                return Err(ChainError::BrokenLink {
                    index: index + 1,
                    expected: older.id().to_string(),
                    found: newer.meta.parent_id.clone(),
                });
            }
        }
        let mut seen = std::collections::HashSet::new();
        for layer in &layers {
            if !seen.insert(layer.id()) {
                return Err(ChainError::Cycle(layer.id().to_string()));
            }
        }
        Ok(Self { layers })
    }

    pub fn single(perf: TinyPerformance) -> Self {
        Self { layers: vec![perf] }
    }

    pub fn layers(&self) -> &[TinyPerformance] {
        &self.layers
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn newest(&self) -> &TinyPerformance {
        self.layers.last().expect("non-empty by construction")
    }

    pub fn into_layers(self) -> Vec<TinyPerformance> {
        self.layers
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FormatError {
    #[error("line 1: expected header `{CSV_HEADER}`, found `{found}`")]
    Header { found: String },
    #[error("line {line}: expected 5 fields, found {found}")]
    Arity { line: usize, found: usize },
    #[error("line {line}: field `{field}` is not a number: `{value}`")]
    NotANumber {
        line: usize,
        field: &'static str,
        value: String,
    },
    #[error("line {line}: moving flag must be 0 or 1, found `{value}`")]
    MovingFlag { line: usize, value: String },
}

impl FormatError {
    /// 1-based line number the error was found on.
    pub fn line(&self) -> usize {
        match self {
            FormatError::Header { .. } => 1,
            FormatError::Arity { line, .. }
            | FormatError::NotANumber { line, .. }
            | FormatError::MovingFlag { line, .. } => *line,
        }
    }
}

const FIELDS: [&str; 5] = ["time", "x", "y", "z", "moving"];

/// Parses a performance CSV into its events, preserving row order.
///
/// Accepts any decimal representation and CRLF line endings; a trailing
/// empty line is ignored. Ordering and range problems are not errors here,
/// see [`validate_events`].
pub fn parse_events_csv(text: &str) -> Result<Vec<TouchEvent>, FormatError> {
    let mut lines = text.split('\n').map(|l| l.strip_suffix('\r').unwrap_or(l));
    let header = lines.next().unwrap_or("");
    let header = header.strip_prefix('\u{feff}').unwrap_or(header);
    if header.trim() != CSV_HEADER {
        return Err(FormatError::Header {
            found: header.to_string(),
        });
    }

    let mut events = Vec::new();
    for (offset, raw) in lines.enumerate() {
        let line = offset + 2;
        if raw.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = raw.split(',').map(str::trim).collect();
        if fields.len() != 5 {
            return Err(FormatError::Arity {
                line,
                found: fields.len(),
            });
        }
        let mut nums = [0.0f64; 4];
        for (i, slot) in nums.iter_mut().enumerate() {
            *slot = fields[i]
                .parse::<f64>()
                .map_err(|_| FormatError::NotANumber {
                    line,
                    field: FIELDS[i],
                    value: fields[i].to_string(),
                })?;
        }
        let moving = parse_moving(fields[4]).ok_or_else(|| FormatError::MovingFlag {
            line,
            value: fields[4].to_string(),
        })?;
        events.push(TouchEvent::new(nums[0], nums[1], nums[2], nums[3], moving));
    }
    Ok(events)
}

fn parse_moving(field: &str) -> Option<bool> {
    match field {
        "0" => Some(false),
        "1" => Some(true),
        // exports from dataframe tools sometimes write the flag as a float
        other => match other.parse::<f64>().ok()? {
            0.0 => Some(false),
            1.0 => Some(true),
            _ => None,
        },
    }
}

/// Writes events as CSV with fixed 6-decimal floats and LF line endings.
pub fn serialize_events_csv(events: &[TouchEvent]) -> String {
    let mut out = String::with_capacity(CSV_HEADER.len() + 1 + events.len() * 40);
    out.push_str(CSV_HEADER);
    out.push('\n');
    for e in events {
        let _ = writeln!(
            out,
            "{:.6},{:.6},{:.6},{:.6},{}",
            e.time,
            e.x,
            e.y,
            e.z,
            u8::from(e.moving)
        );
    }
    out
}

/// A single broken invariant of a performance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    TimeOutOfRange { index: usize, value: f64 },
    XOutOfRange { index: usize, value: f64 },
    YOutOfRange { index: usize, value: f64 },
    NegativePressure { index: usize, value: f64 },
    NonMonotonicTime { index: usize, previous: f64, value: f64 },
    BeginsMidSwipe,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::TimeOutOfRange { index, value } => {
                write!(f, "time out of range at index {index}: {value}")
            }
            Violation::XOutOfRange { index, value } => {
                write!(f, "x out of range at index {index}: {value}")
            }
            Violation::YOutOfRange { index, value } => {
                write!(f, "y out of range at index {index}: {value}")
            }
            Violation::NegativePressure { index, value } => {
                write!(f, "z out of range at index {index}: {value}")
            }
            Violation::NonMonotonicTime {
                index,
                previous,
                value,
            } => write!(
                f,
                "non-monotonic time at index {index}: {value} after {previous}"
            ),
            Violation::BeginsMidSwipe => f.write_str("performance begins mid-swipe"),
        }
    }
}

/// Outcome of [`validate_events`]: every violation found, in event order.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Validation {
    pub violations: Vec<Violation>,
}

impl Validation {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn into_result(self) -> Result<(), Vec<Violation>> {
        if self.is_ok() {
            Ok(())
        } else {
            Err(self.violations)
        }
    }
}

fn in_unit(v: f64) -> bool {
    (0.0..=1.0).contains(&v)
}

/// Checks ranges, time ordering, duration and the touch-down start.
pub fn validate_events(events: &[TouchEvent]) -> Validation {
    let mut violations = Vec::new();
    if events.first().is_some_and(|e| e.moving) {
        violations.push(Violation::BeginsMidSwipe);
    }
    for (index, e) in events.iter().enumerate() {
        if !(0.0..=MAX_DURATION).contains(&e.time) {
            violations.push(Violation::TimeOutOfRange {
                index,
                value: e.time,
            });
        }
        if !in_unit(e.x) {
            violations.push(Violation::XOutOfRange { index, value: e.x });
        }
        if !in_unit(e.y) {
            violations.push(Violation::YOutOfRange { index, value: e.y });
        }
        if !(e.z >= 0.0 && e.z.is_finite()) {
            violations.push(Violation::NegativePressure { index, value: e.z });
        }
        if index > 0 {
            let previous = events[index - 1].time;
            // NaN times fail the range check already
            if e.time < previous {
                violations.push(Violation::NonMonotonicTime {
                    index,
                    previous,
                    value: e.time,
                });
            }
        }
    }
    Validation { violations }
}
