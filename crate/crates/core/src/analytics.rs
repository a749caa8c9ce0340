//! Corpus-level aggregation: counts, distributions, swipe tables, ANOVA,
//! touch-location density, quartile sampling and velocity curves.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::Write as _;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::gesture::{event_deltas, segment, segment_speeds, swipe_stats, Gesture, SwipeStats};
use crate::perf::{Instrument, TinyPerformance, MAX_DURATION};
use crate::stats::{anova_oneway, kde2d, quantile, AnovaResult, KdeGrid, Summary, DEFAULT_RESOLUTION};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AnalyticsError {
    #[error("velocity curve of a zero-duration swipe is undefined")]
    ZeroDuration,
    #[error("velocity curve needs at least 2 events")]
    TooFewEvents,
    #[error("velocity curve needs at least 1 point")]
    NoPoints,
}

/// Knobs for [`build_report`].
#[derive(Debug, Clone, PartialEq)]
pub struct ReportOptions {
    pub seed: u64,
    pub max_swipe_time: f64,
    pub per_quartile: usize,
    pub curve_points: usize,
    pub kde_resolution: usize,
}

impl Default for ReportOptions {
    fn default() -> Self {
        Self {
            seed: 0,
            max_swipe_time: MAX_DURATION,
            per_quartile: 200,
            curve_points: 50,
            kde_resolution: DEFAULT_RESOLUTION,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SwipeTable {
    pub length_events: Option<Summary>,
    pub time_s: Option<Summary>,
    pub mean_velocity: Option<Summary>,
    pub distance: Option<Summary>,
    pub max_velocity: Option<Summary>,
}

impl SwipeTable {
    pub const COLUMNS: [&'static str; 5] =
        ["length (events)", "time (s)", "mean velocity", "distance", "max velocity"];

    fn of(stats: &[SwipeStats]) -> Self {
        let col = |f: fn(&SwipeStats) -> f64| Summary::of(&stats.iter().map(f).collect::<Vec<_>>());
        Self {
            length_events: col(|s| s.length_events as f64),
            time_s: col(|s| s.time_s),
            mean_velocity: col(|s| s.mean_velocity),
            distance: col(|s| s.distance),
            max_velocity: col(|s| s.max_velocity),
        }
    }

    fn columns(&self) -> [&Option<Summary>; 5] {
        [
            &self.length_events,
            &self.time_s,
            &self.mean_velocity,
            &self.distance,
            &self.max_velocity,
        ]
    }

    /// CSV with one row per statistic (mean, std, min, 25%, 50%, 75%, max)
    /// and one column per measurement. Empty columns are left blank.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("statistic");
        for c in Self::COLUMNS {
            out.push(',');
            out.push_str(c);
        }
        out.push('\n');
        for (r, label) in Summary::ROW_LABELS.iter().enumerate() {
            out.push_str(label);
            for col in self.columns() {
                out.push(',');
                if let Some(s) = col {
                    let _ = write!(out, "{:.4}", s.rows()[r]);
                }
            }
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ByMoving {
    pub moving: Option<Summary>,
    pub nonmoving: Option<Summary>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplyStats {
    /// Performances that name a parent.
    pub n_replies: usize,
    /// Layer count of each reply's chain → number of replies.
    pub depth_histogram: BTreeMap<usize, usize>,
    /// Replies whose chain leaves the corpus or loops.
    pub depth_unknown: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampledSwipe {
    pub performance_id: String,
    pub instrument: Instrument,
    pub gesture_start: usize,
    pub time_s: f64,
    pub velocity_curve: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuartileSample {
    pub quartile: usize,
    pub time_from: f64,
    pub time_to: f64,
    pub population: usize,
    pub swipes: Vec<SampledSwipe>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Style {
    Empty,
    Taps,
    Swipes,
    LongSwipe,
    Mixture,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorpusReport {
    pub n_performances: usize,
    pub n_events: usize,
    pub n_moving: usize,
    pub n_nonmoving: usize,
    pub instrument_counts: BTreeMap<Instrument, usize>,
    pub touches_per_performance: BTreeMap<Instrument, Summary>,
    pub moving_proportion: BTreeMap<Instrument, Summary>,
    pub n_taps: usize,
    pub n_swipes: usize,
    pub n_valid_swipes: usize,
    pub n_excluded_swipes: usize,
    pub swipe_table: SwipeTable,
    pub dt: ByMoving,
    pub dist: ByMoving,
    pub replies: ReplyStats,
    pub styles: BTreeMap<Style, usize>,
    /// Keyed by measurement: `time_s`, `distance`, `mean_velocity`.
    pub anova: BTreeMap<String, AnovaResult>,
    pub quartile_samples: Vec<QuartileSample>,
    pub kde: Option<KdeGrid>,
}

/// Everything derived from a single performance.
struct PerfDigest {
    n_events: usize,
    n_moving: usize,
    taps: usize,
    swipes: Vec<(Gesture, SwipeStats)>,
    dt_moving: Vec<f64>,
    dt_still: Vec<f64>,
    dist_moving: Vec<f64>,
    dist_still: Vec<f64>,
    style: Style,
}

fn digest(perf: &TinyPerformance) -> PerfDigest {
    // invalid streams (leading moved event) contribute events but no gestures
    let gestures = segment(&perf.events).unwrap_or_default();
    let taps = gestures.iter().filter(|g| !g.is_swipe()).count();
    let style = classify_gestures(&gestures);
    let swipes = gestures
        .into_iter()
        .filter(Gesture::is_swipe)
        .map(|g| {
            let s = swipe_stats(&g).expect("swipes have at least 2 events");
            (g, s)
        })
        .collect();
    let mut d = PerfDigest {
        n_events: perf.events.len(),
        n_moving: perf.events.iter().filter(|e| e.moving).count(),
        taps,
        swipes,
        dt_moving: Vec::new(),
        dt_still: Vec::new(),
        dist_moving: Vec::new(),
        dist_still: Vec::new(),
        style,
    };
    for delta in event_deltas(&perf.events) {
        if delta.moving {
            d.dt_moving.push(delta.dt);
            d.dist_moving.push(delta.dist);
        } else {
            d.dt_still.push(delta.dt);
            d.dist_still.push(delta.dist);
        }
    }
    d
}

fn reply_stats(corpus: &[&TinyPerformance]) -> ReplyStats {
    let parents: HashMap<&str, Option<&str>> = corpus
        .iter()
        .map(|p| (p.id(), p.meta.parent_id.as_deref()))
        .collect();
    let mut stats = ReplyStats {
        n_replies: 0,
        depth_histogram: BTreeMap::new(),
        depth_unknown: 0,
    };
    for perf in corpus {
        let Some(mut parent) = perf.meta.parent_id.as_deref() else {
            continue;
        };
        stats.n_replies += 1;
        let mut depth = 1;
        let mut seen = HashSet::from([perf.id()]);
        let known = loop {
            match parents.get(parent) {
                None => break false,
                Some(_) if !seen.insert(parent) => break false,
                Some(next) => {
                    depth += 1;
                    match next {
                        Some(p) => parent = p,
                        None => break true,
                    }
                }
            }
        };
        if known {
            *stats.depth_histogram.entry(depth).or_default() += 1;
        } else {
            stats.depth_unknown += 1;
        }
    }
    stats
}

/// Aggregates a corpus. The result doesn't depend on corpus order.
pub fn build_report(corpus: &[TinyPerformance], opts: &ReportOptions) -> CorpusReport {
    let mut sorted: Vec<&TinyPerformance> = corpus.iter().collect();
    sorted.sort_by_cached_key(|p| (p.id().to_string(), p.to_csv(), p.meta.to_json()));

    let digests: Vec<PerfDigest> = sorted.par_iter().map(|p| digest(p)).collect();

    let mut instrument_counts: BTreeMap<Instrument, usize> =
        Instrument::ALL.iter().map(|i| (*i, 0)).collect();
    let mut touches: BTreeMap<Instrument, Vec<f64>> = BTreeMap::new();
    let mut proportions: BTreeMap<Instrument, Vec<f64>> = BTreeMap::new();
    let mut styles: BTreeMap<Style, usize> = BTreeMap::new();
    let (mut dt_m, mut dt_s, mut di_m, mut di_s) = (vec![], vec![], vec![], vec![]);
    let mut all_swipes: Vec<(&TinyPerformance, &Gesture, SwipeStats)> = Vec::new();
    let mut n_taps = 0;

    for (perf, d) in sorted.iter().zip(&digests) {
        let inst = perf.instrument();
        *instrument_counts.entry(inst).or_default() += 1;
        touches.entry(inst).or_default().push(d.n_events as f64);
        if d.n_events > 0 {
            proportions
                .entry(inst)
                .or_default()
                .push(d.n_moving as f64 / d.n_events as f64);
        }
        *styles.entry(d.style).or_default() += 1;
        dt_m.extend_from_slice(&d.dt_moving);
        dt_s.extend_from_slice(&d.dt_still);
        di_m.extend_from_slice(&d.dist_moving);
        di_s.extend_from_slice(&d.dist_still);
        n_taps += d.taps;
        all_swipes.extend(d.swipes.iter().map(|(g, s)| (*perf, g, *s)));
    }

    let n_swipes = all_swipes.len();
    let valid: Vec<_> = all_swipes
        .into_iter()
        .filter(|(_, _, s)| s.time_s <= opts.max_swipe_time)
        .collect();
    let valid_stats: Vec<SwipeStats> = valid.iter().map(|v| v.2).collect();

    let anova = swipe_anova(&valid);
    let quartile_samples = quartile_samples(&valid, opts);

    let points: Vec<(f64, f64)> = sorted
        .iter()
        .flat_map(|p| p.events.iter().map(|e| (e.x, e.y)))
        .collect();
    let kde = kde2d(&points, opts.kde_resolution).ok();

    let n_events: usize = digests.iter().map(|d| d.n_events).sum();
    let n_moving: usize = digests.iter().map(|d| d.n_moving).sum();
    let summarize = |m: BTreeMap<Instrument, Vec<f64>>| {
        m.into_iter()
            .filter_map(|(k, v)| Summary::of(&v).map(|s| (k, s)))
            .collect()
    };

    CorpusReport {
        n_performances: sorted.len(),
        n_events,
        n_moving,
        n_nonmoving: n_events - n_moving,
        instrument_counts,
        touches_per_performance: summarize(touches),
        moving_proportion: summarize(proportions),
        n_taps,
        n_swipes,
        n_valid_swipes: valid.len(),
        n_excluded_swipes: n_swipes - valid.len(),
        swipe_table: SwipeTable::of(&valid_stats),
        dt: ByMoving {
            moving: Summary::of(&dt_m),
            nonmoving: Summary::of(&dt_s),
        },
        dist: ByMoving {
            moving: Summary::of(&di_m),
            nonmoving: Summary::of(&di_s),
        },
        replies: reply_stats(&sorted),
        styles,
        anova,
        quartile_samples,
        kde,
    }
}

type Measurement = (&'static str, fn(&SwipeStats) -> f64);

fn swipe_anova(valid: &[(&TinyPerformance, &Gesture, SwipeStats)]) -> BTreeMap<String, AnovaResult> {
    let measurements: [Measurement; 3] = [
        ("time_s", |s| s.time_s),
        ("distance", |s| s.distance),
        ("mean_velocity", |s| s.mean_velocity),
    ];
    let mut out = BTreeMap::new();
    for (name, f) in measurements {
        let mut groups: BTreeMap<Instrument, Vec<f64>> = BTreeMap::new();
        for (p, _, s) in valid {
            groups.entry(p.instrument()).or_default().push(f(s));
        }
        groups.retain(|_, v| v.len() >= 2);
        let labels: Vec<String> = groups.keys().map(|i| i.name().to_string()).collect();
        let values: Vec<Vec<f64>> = groups.into_values().collect();
        if let Ok(r) = anova_oneway(&labels, &values) {
            out.insert(name.to_string(), r);
        }
    }
    out
}

fn quartile_samples(
    valid: &[(&TinyPerformance, &Gesture, SwipeStats)],
    opts: &ReportOptions,
) -> Vec<QuartileSample> {
    let times: Vec<f64> = valid.iter().map(|v| v.2.time_s).collect();
    let Some(bounds) = quartile_bounds(&times) else {
        return Vec::new();
    };
    let picks = quartile_sample_indices(&times, opts.per_quartile, opts.seed);
    let populations = quartile_membership(&times, &bounds).map(|m| m.len());
    picks
        .into_iter()
        .enumerate()
        .map(|(q, idx)| QuartileSample {
            quartile: q + 1,
            time_from: bounds[q],
            time_to: bounds[q + 1],
            population: populations[q],
            swipes: idx
                .into_iter()
                .map(|i| {
                    let (p, g, s) = &valid[i];
                    SampledSwipe {
                        performance_id: p.id().to_string(),
                        instrument: p.instrument(),
                        gesture_start: g.start,
                        time_s: s.time_s,
                        velocity_curve: velocity_curve(g, opts.curve_points).unwrap_or_default(),
                    }
                })
                .collect(),
        })
        .collect()
}

/// `[min, q25, q50, q75, max]` of the values, or `None` if empty.
pub fn quartile_bounds(times: &[f64]) -> Option<[f64; 5]> {
    let mut sorted: Vec<f64> = times.to_vec();
    sorted.sort_by(f64::total_cmp);
    Some([
        *sorted.first()?,
        quantile(&sorted, 0.25)?,
        quantile(&sorted, 0.5)?,
        quantile(&sorted, 0.75)?,
        *sorted.last()?,
    ])
}

/// Indices of the values in each quartile, using half-open intervals
/// `[q_k, q_k+1)` with the last one closed.
pub fn quartile_membership(times: &[f64], bounds: &[f64; 5]) -> [Vec<usize>; 4] {
    let mut out: [Vec<usize>; 4] = Default::default();
    for (i, &t) in times.iter().enumerate() {
        let q = (1..4).take_while(|&k| t >= bounds[k]).count();
        out[q].push(i);
    }
    out
}

/// Draws up to `per_quartile` indices uniformly without replacement from
/// each time quartile. Each quartile's draw is sorted ascending and
/// depends only on `seed`.
pub fn quartile_sample_indices(times: &[f64], per_quartile: usize, seed: u64) -> [Vec<usize>; 4] {
    let Some(bounds) = quartile_bounds(times) else {
        return Default::default();
    };
    let members = quartile_membership(times, &bounds);
    let mut out: [Vec<usize>; 4] = Default::default();
    for (q, pool) in members.into_iter().enumerate() {
        let mut picked = if pool.len() <= per_quartile {
            pool
        } else {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(q as u64));
            index::sample(&mut rng, pool.len(), per_quartile)
                .into_iter()
                .map(|i| pool[i])
                .collect()
        };
        picked.sort_unstable();
        out[q] = picked;
    }
    out
}

/// Samples swipes from each quartile of swipe duration.
pub fn sample_swipes_by_quartile(swipes: &[Gesture], per_quartile: usize, seed: u64) -> [Vec<&Gesture>; 4] {
    let times: Vec<f64> = swipes.iter().map(Gesture::duration).collect();
    quartile_sample_indices(&times, per_quartile, seed).map(|idx| idx.into_iter().map(|i| &swipes[i]).collect())
}

/// Speed profile over normalised time, resampled to `n_points` and scaled
/// so its peak is 1.
///
/// Each segment's speed sits at the normalised start time of the segment;
/// values are held constant after the last segment start.
pub fn velocity_curve(swipe: &Gesture, n_points: usize) -> Result<Vec<f64>, AnalyticsError> {
    let events = &swipe.events;
    if events.len() < 2 {
        return Err(AnalyticsError::TooFewEvents);
    }
    if n_points == 0 {
        return Err(AnalyticsError::NoPoints);
    }
    let t0 = events[0].time;
    let span = events[events.len() - 1].time - t0;
    if span <= 0.0 {
        return Err(AnalyticsError::ZeroDuration);
    }
    let speeds = segment_speeds(events);
    let positions: Vec<f64> = events[..events.len() - 1]
        .iter()
        .map(|e| (e.time - t0) / span)
        .collect();

    let mut curve = Vec::with_capacity(n_points);
    for k in 0..n_points {
        let u = if n_points == 1 {
            0.0
        } else {
            k as f64 / (n_points - 1) as f64
        };
        // last knot at or before u
        let j = positions.partition_point(|&p| p <= u).saturating_sub(1);
        let v = match positions.get(j + 1) {
            Some(&next) if next > positions[j] && u > positions[j] => {
                let w = (u - positions[j]) / (next - positions[j]);
                speeds[j] + w * (speeds[j + 1] - speeds[j])
            }
            _ => speeds[j],
        };
        curve.push(v);
    }
    let max = curve.iter().copied().fold(0.0, f64::max);
    if max > 0.0 {
        for v in &mut curve {
            *v /= max;
        }
    }
    Ok(curve)
}

fn classify_gestures(gestures: &[Gesture]) -> Style {
    if gestures.is_empty() {
        return Style::Empty;
    }
    let n = gestures.len() as f64;
    let swipes: Vec<&Gesture> = gestures.iter().filter(|g| g.is_swipe()).collect();
    let taps = gestures.len() - swipes.len();
    if taps as f64 >= 0.9 * n {
        Style::Taps
    } else if swipes.len() == 1 && swipes[0].duration() >= 0.8 * MAX_DURATION {
        Style::LongSwipe
    } else if swipes.len() as f64 >= 0.9 * n {
        Style::Swipes
    } else {
        Style::Mixture
    }
}

/// Heuristic gesture-composition style of a performance.
pub fn classify_style(perf: &TinyPerformance) -> Style {
    classify_gestures(&segment(&perf.events).unwrap_or_default())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gesture::GestureKind;
    use crate::perf::{Metadata, TouchEvent};

    fn swipe(points: &[(f64, f64, f64)]) -> Gesture {
        Gesture {
            kind: GestureKind::Swipe,
            start: 0,
            events: points
                .iter()
                .enumerate()
                .map(|(i, &(t, x, y))| TouchEvent::new(t, x, y, 1.0, i > 0))
                .collect(),
        }
    }

    fn perf(id: &str, parent: Option<&str>, events: Vec<TouchEvent>) -> TinyPerformance {
        let mut meta = Metadata::anonymous(Instrument::Chirp);
        meta.id = id.into();
        meta.parent_id = parent.map(Into::into);
        TinyPerformance::new(meta, events)
    }

    #[test]
    fn quartiles_of_eight() {
        let times: Vec<f64> = (1..=8).map(f64::from).collect();
        let q = quartile_sample_indices(&times, 10, 1);
        assert_eq!(q, [vec![0, 1], vec![2, 3], vec![4, 5], vec![6, 7]]);
        let small = quartile_sample_indices(&times, 1, 1);
        assert!(small.iter().all(|v| v.len() == 1));
        assert_eq!(small, quartile_sample_indices(&times, 1, 1));
        assert_eq!(quartile_sample_indices(&[], 3, 0), <[Vec<usize>; 4]>::default());
    }

    #[test]
    fn velocity_curve_shapes() {
        let flat = swipe(&[(0.0, 0.0, 0.0), (0.1, 0.1, 0.0), (0.2, 0.2, 0.0), (0.3, 0.3, 0.0)]);
        let c = velocity_curve(&flat, 7).unwrap();
        assert!(c.iter().all(|v| (v - 1.0).abs() < 1e-12), "{c:?}");

        let two = swipe(&[(0.0, 0.0, 0.0), (0.2, 0.5, 0.5)]);
        assert_eq!(velocity_curve(&two, 5).unwrap(), vec![1.0; 5]);

        // speeds 1, 3, 2 over equal time steps
        let profile = swipe(&[(0.0, 0.0, 0.0), (1.0, 0.1, 0.0), (2.0, 0.4, 0.0), (3.0, 0.6, 0.0)]);
        let c = velocity_curve(&profile, 4).unwrap();
        let expected = [1.0 / 3.0, 1.0, 2.0 / 3.0, 2.0 / 3.0];
        for (a, b) in c.iter().zip(expected) {
            assert!((a - b).abs() < 1e-12, "{c:?}");
        }

        let still = swipe(&[(0.0, 0.5, 0.5), (0.1, 0.5, 0.5)]);
        assert_eq!(velocity_curve(&still, 3).unwrap(), vec![0.0; 3]);
        let instant = swipe(&[(0.1, 0.0, 0.0), (0.1, 0.5, 0.5)]);
        assert_eq!(velocity_curve(&instant, 3), Err(AnalyticsError::ZeroDuration));
    }

    #[test]
    fn styles() {
        let taps: Vec<TouchEvent> = (0..10).map(|i| TouchEvent::down(i as f64 * 0.4, 0.5, 0.5)).collect();
        assert_eq!(classify_style(&perf("a", None, taps.clone())), Style::Taps);

        let mut long = vec![TouchEvent::down(0.0, 0.1, 0.1)];
        long.extend((1..=48).map(|i| TouchEvent::moved(i as f64 * 0.1, 0.1 + i as f64 * 0.01, 0.1)));
        assert_eq!(classify_style(&perf("b", None, long)), Style::LongSwipe);

        let mut mix = taps[..5].to_vec();
        for k in 0..5 {
            let t = 2.0 + k as f64 * 0.4;
            mix.push(TouchEvent::down(t, 0.2, 0.2));
            mix.push(TouchEvent::moved(t + 0.05, 0.3, 0.2));
        }
        assert_eq!(classify_style(&perf("c", None, mix)), Style::Mixture);

        let short_swipes: Vec<TouchEvent> = (0..4)
            .flat_map(|k| {
                let t = k as f64 * 0.5;
                [TouchEvent::down(t, 0.2, 0.2), TouchEvent::moved(t + 0.1, 0.4, 0.2)]
            })
            .collect();
        assert_eq!(classify_style(&perf("d", None, short_swipes)), Style::Swipes);
        assert_eq!(classify_style(&perf("e", None, vec![])), Style::Empty);
    }

    #[test]
    fn reply_depths() {
        let corpus = [
            perf("root", None, vec![]),
            perf("r1", Some("root"), vec![]),
            perf("r2", Some("r1"), vec![]),
            perf("other", Some("r1"), vec![]),
            perf("lost", Some("missing"), vec![]),
        ];
        let r = reply_stats(&corpus.iter().collect::<Vec<_>>());
        assert_eq!(r.n_replies, 4);
        assert_eq!(r.depth_histogram, BTreeMap::from([(2, 1), (3, 2)]));
        assert_eq!(r.depth_unknown, 1);
    }

    #[test]
    fn empty_corpus_report() {
        let r = build_report(&[], &ReportOptions::default());
        assert_eq!((r.n_performances, r.n_events, r.n_moving, r.n_nonmoving), (0, 0, 0, 0));
        assert!(r.kde.is_none());
        assert!(r.swipe_table.time_s.is_none());
        assert!(r.instrument_counts.values().all(|c| *c == 0));
        assert!(r.anova.is_empty() && r.quartile_samples.is_empty());
        let csv = r.swipe_table.to_csv();
        assert_eq!(csv.lines().count(), 8);
        assert!(csv.lines().nth(1).unwrap().starts_with("mean,,"));
    }
}
