//! Seeded synthetic corpora for desk-scale testing.
//!
//! Swipe durations, sampling intervals and pauses are drawn from
//! log-normal distributions tuned so the swipe table lands near a real
//! corpus (median swipe ≈ 0.13 s, upper quartile ≈ 0.5 s). The match is
//! approximate.

use chrono::{Duration, TimeZone, Utc};
use rand::distr::weighted::WeightedIndex;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::LogNormal;

use crate::perf::{Instrument, Metadata, TinyPerformance, TouchEvent, MAX_DURATION};

/// Fraction of performances that reply to an earlier one.
pub const REPLY_FRACTION: f64 = 0.29;

const INSTRUMENT_WEIGHTS: [(Instrument, u32); 8] = [
    (Instrument::Chirp, 35),
    (Instrument::Drums, 12),
    (Instrument::Keys, 11),
    (Instrument::Quack, 10),
    (Instrument::Strings, 10),
    (Instrument::Pad, 8),
    (Instrument::Fmlead, 7),
    (Instrument::Wub, 7),
];

#[derive(Debug, Clone, Copy)]
enum Plan {
    Taps,
    Swipes,
    LongSwipe,
    Mixture,
}

struct Dists {
    swipe_time: LogNormal<f64>,
    moving_dt: LogNormal<f64>,
    pause: LogNormal<f64>,
    speed: LogNormal<f64>,
}

impl Dists {
    fn new() -> Self {
        let ln = |median: f64, sigma: f64| LogNormal::new(f64::ln(median), sigma).unwrap();
        Self {
            swipe_time: ln(0.13, 1.9),
            moving_dt: ln(0.017, 0.35),
            pause: ln(0.22, 0.75),
            speed: ln(0.9, 0.8),
        }
    }
}

fn micro(v: f64) -> f64 {
    (v * 1e6).round() / 1e6
}

fn reflect(v: f64) -> f64 {
    let v = v.rem_euclid(2.0);
    if v > 1.0 {
        2.0 - v
    } else {
        v
    }
}

struct Recorder {
    events: Vec<TouchEvent>,
    z: f64,
}

impl Recorder {
    fn push(&mut self, t: f64, x: f64, y: f64, moving: bool) {
        self.events.push(TouchEvent::new(
            micro(t.min(MAX_DURATION)),
            micro(x.clamp(0.0, 1.0)),
            micro(y.clamp(0.0, 1.0)),
            self.z,
            moving,
        ));
    }
}

fn swipe(rng: &mut ChaCha8Rng, d: &Dists, rec: &mut Recorder, start: f64, duration: f64) -> f64 {
    let (mut x, mut y) = (rng.random::<f64>(), rng.random::<f64>());
    rec.push(start, x, y, false);
    let speed: f64 = d.speed.sample(rng).min(8.0);
    let mut heading = rng.random_range(0.0..std::f64::consts::TAU);
    let turn = rng.random_range(0.0..1.5);
    let mut t = start;
    let end = (start + duration).min(MAX_DURATION);
    loop {
        let dt = d.moving_dt.sample(rng).clamp(0.001, 0.2);
        if t + dt > end && t > start {
            break;
        }
        t = (t + dt).min(MAX_DURATION);
        heading += rng.random_range(-turn..=turn);
        x = reflect(x + speed * dt * heading.cos());
        y = reflect(y + speed * dt * heading.sin());
        rec.push(t, x, y, true);
        if t >= MAX_DURATION {
            break;
        }
    }
    t
}

fn performance_events(rng: &mut ChaCha8Rng, d: &Dists) -> Vec<TouchEvent> {
    let plan = match rng.random_range(0..100) {
        0..15 => Plan::Taps,
        15..45 => Plan::Swipes,
        45..55 => Plan::LongSwipe,
        _ => Plan::Mixture,
    };
    let z = [0.0, 1.0, 38.640625][rng.random_range(0..3)];
    let mut rec = Recorder {
        events: Vec::new(),
        z,
    };
    let mut t = rng.random_range(0.0..0.03);
    if let Plan::LongSwipe = plan {
        let duration = rng.random_range(4.0..MAX_DURATION - t);
        swipe(rng, d, &mut rec, t, duration);
        return rec.events;
    }
    let tap_chance = match plan {
        Plan::Taps => 0.95,
        Plan::Swipes => 0.05,
        _ => 0.5,
    };
    while t < MAX_DURATION {
        if rng.random_bool(tap_chance) {
            rec.push(t, rng.random(), rng.random(), false);
        } else {
            let duration = d.swipe_time.sample(rng).max(0.002);
            t = swipe(rng, d, &mut rec, t, duration);
        }
        t += d.pause.sample(rng).clamp(0.01, 2.0);
    }
    rec.events
}

fn hex_id(rng: &mut ChaCha8Rng) -> String {
    format!("{:032x}", rng.random::<u128>())
}

/// Generates `n` valid performances. Identical `(n, seed)` yields
/// identical corpora; about [`REPLY_FRACTION`] of them reply to an
/// earlier performance.
pub fn generate_corpus(n: usize, seed: u64) -> Vec<TinyPerformance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = Dists::new();
    let weights = WeightedIndex::new(INSTRUMENT_WEIGHTS.iter().map(|w| w.1)).unwrap();
    let epoch = Utc.with_ymd_and_hms(2017, 3, 1, 12, 0, 0).unwrap();
    let mut corpus: Vec<TinyPerformance> = Vec::with_capacity(n);
    for i in 0..n {
        let id = hex_id(&mut rng);
        let parent_id = (i > 0 && rng.random_bool(REPLY_FRACTION)).then(|| {
            // recent performances are the likeliest to get replies
            let back = rng.random_range(1..=i.min(30));
            corpus[i - back].id().to_string()
        });
        let meta = Metadata {
            id,
            performer: format!("player{:02}", rng.random_range(0..40)),
            instrument: INSTRUMENT_WEIGHTS[weights.sample(&mut rng)].0,
            date: epoch + Duration::minutes(37 * i as i64) + Duration::seconds(rng.random_range(0..60)),
            parent_id,
        };
        let events = performance_events(&mut rng, &d);
        corpus.push(TinyPerformance::new(meta, events));
    }
    corpus
}
