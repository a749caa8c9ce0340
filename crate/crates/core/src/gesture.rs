//! Tap/swipe segmentation and per-event, per-swipe statistics.

use serde::Serialize;
use thiserror::Error;

use crate::perf::{TouchEvent, MAX_DURATION};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GestureError {
    #[error("event stream begins with a touch-moved event")]
    BeginsMidSwipe,
    #[error("a swipe needs at least 2 events, found {0}")]
    NotASwipe(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum GestureKind {
    Tap,
    Swipe,
}

/// A touch-down and every touch-moved event that follows it.
#[derive(Debug, Clone, PartialEq)]
pub struct Gesture {
    pub kind: GestureKind,
    /// Index of the touch-down within the performance.
    pub start: usize,
    pub events: Vec<TouchEvent>,
}

impl Gesture {
    pub fn is_swipe(&self) -> bool {
        self.kind == GestureKind::Swipe
    }

    pub fn duration(&self) -> f64 {
        match (self.events.first(), self.events.last()) {
            (Some(a), Some(b)) => b.time - a.time,
            _ => 0.0,
        }
    }
}

/// Splits an event stream at each touch-down.
pub fn segment(events: &[TouchEvent]) -> Result<Vec<Gesture>, GestureError> {
    if events.first().is_some_and(|e| e.moving) {
        return Err(GestureError::BeginsMidSwipe);
    }
    let mut gestures: Vec<Gesture> = Vec::new();
    for (i, e) in events.iter().enumerate() {
        if e.moving {
            let current = gestures.last_mut().expect("stream starts with a touch-down");
            current.events.push(*e);
            current.kind = GestureKind::Swipe;
        } else {
            gestures.push(Gesture {
                kind: GestureKind::Tap,
                start: i,
                events: vec![*e],
            });
        }
    }
    Ok(gestures)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SwipeFilter {
    pub kept: Vec<Gesture>,
    pub removed: usize,
}

/// Keeps swipes no longer than `max_time` seconds; taps are dropped and
/// not counted as removed.
pub fn filter_valid_swipes(gestures: Vec<Gesture>, max_time: f64) -> SwipeFilter {
    let mut removed = 0;
    let kept = gestures
        .into_iter()
        .filter(|g| g.is_swipe())
        .filter(|g| {
            let ok = g.duration() <= max_time;
            if !ok {
                removed += 1;
            }
            ok
        })
        .collect();
    SwipeFilter { kept, removed }
}

pub fn filter_valid_swipes_default(gestures: Vec<Gesture>) -> SwipeFilter {
    filter_valid_swipes(gestures, MAX_DURATION)
}

/// Descriptive measurements of one swipe. Distances are in area widths,
/// velocities in widths per second.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SwipeStats {
    pub length_events: usize,
    pub time_s: f64,
    pub distance: f64,
    pub mean_velocity: f64,
    pub max_velocity: f64,
}

/// Speed of each segment between consecutive events. A segment with zero
/// elapsed time has speed 0.
pub fn segment_speeds(events: &[TouchEvent]) -> Vec<f64> {
    events
        .windows(2)
        .map(|w| {
            let dt = w[1].time - w[0].time;
            if dt > 0.0 {
                w[0].distance_to(&w[1]) / dt
            } else {
                0.0
            }
        })
        .collect()
}

pub fn swipe_stats(swipe: &Gesture) -> Result<SwipeStats, GestureError> {
    let events = &swipe.events;
    if events.len() < 2 {
        return Err(GestureError::NotASwipe(events.len()));
    }
    let distance = events.windows(2).map(|w| w[0].distance_to(&w[1])).sum();
    let speeds = segment_speeds(events);
    let mean_velocity = speeds.iter().sum::<f64>() / speeds.len() as f64;
    let max_velocity = speeds.iter().copied().fold(0.0, f64::max);
    Ok(SwipeStats {
        length_events: events.len(),
        time_s: swipe.duration(),
        distance,
        mean_velocity,
        max_velocity,
    })
}

/// Difference between an event and the one before it in the same
/// performance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EventDelta {
    pub dt: f64,
    pub dist: f64,
    pub moving: bool,
}

/// One delta per event after the first, ignoring gesture boundaries.
pub fn event_deltas(events: &[TouchEvent]) -> Vec<EventDelta> {
    events
        .windows(2)
        .map(|w| EventDelta {
            dt: w[1].time - w[0].time,
            dist: w[0].distance_to(&w[1]),
            moving: w[1].moving,
        })
        .collect()
}
