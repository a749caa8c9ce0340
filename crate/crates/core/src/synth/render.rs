//! Offline rendering of performances to PCM.

use crate::gesture::segment;
use crate::perf::{LayeredPerformance, TinyPerformance, MAX_DURATION};

use super::instruments::{InstrumentSpec, SynthesisMethod};
use super::mapping::{map_touch, ControlFrame, SynthState};
use super::voice::{drum_hit, melodic_voice, Params, Voice};
use super::{AudioBuffer, SynthError};

pub const DEFAULT_SAMPLE_RATE: u32 = 44_100;
/// Silence appended after the performance for releases and echoes.
pub const TAIL_SECONDS: f64 = 1.0;

pub const ATTACK_S: f64 = 0.005;
pub const RELEASE_S: f64 = 0.120;
/// A touch-down with no movement within this window plays a short note.
pub const HOLD_WINDOW_S: f64 = 0.080;
pub const ROLL_INTERVAL_S: f64 = 0.050;

pub const DELAY_S: f64 = 0.180;
pub const DELAY_FEEDBACK: f64 = 0.45;

const NOTE_LEVEL: f64 = 0.5;
const SMOOTHING_S: f64 = 0.005;
const LIMITER_KNEE: f64 = 0.5;

/// Soft clip: identity up to the knee, then a tanh curve approaching ±1.
pub fn soft_limit(x: f64) -> f64 {
    let a = x.abs();
    if a <= LIMITER_KNEE {
        x
    } else {
        let head = 1.0 - LIMITER_KNEE;
        x.signum() * (LIMITER_KNEE + head * ((a - LIMITER_KNEE) / head).tanh())
    }
}

fn to_samples(seconds: f64, sr: f64) -> usize {
    (seconds * sr).round().max(0.0) as usize
}

struct Smoother {
    coef: f64,
    freq: f64,
    amplitude: f64,
    send: f64,
    params: Params,
}

impl Smoother {
    fn new(frame: &ControlFrame, sr: f64) -> Self {
        Self {
            coef: 1.0 - (-1.0 / (SMOOTHING_S * sr)).exp(),
            freq: frame.frequency().unwrap_or(0.0),
            amplitude: frame.amplitude,
            send: frame.reverb_send,
            params: Params {
                freq: frame.frequency().unwrap_or(0.0),
                lower_octave_mix: frame.lower_octave_mix,
                tremolo_depth: frame.tremolo_depth,
                tremolo_rate_hz: frame.tremolo_rate_hz,
                modulation: frame.modulation,
                timbre: frame.timbre,
            },
        }
    }

    fn step(&mut self, f: &ControlFrame) {
        let c = self.coef;
        let glide = |cur: &mut f64, target: f64| *cur += c * (target - *cur);
        glide(&mut self.freq, f.frequency().unwrap_or(0.0));
        glide(&mut self.amplitude, f.amplitude);
        glide(&mut self.send, f.reverb_send);
        let p = &mut self.params;
        p.freq = self.freq;
        glide(&mut p.lower_octave_mix, f.lower_octave_mix);
        glide(&mut p.tremolo_depth, f.tremolo_depth);
        glide(&mut p.tremolo_rate_hz, f.tremolo_rate_hz);
        glide(&mut p.modulation, f.modulation);
        glide(&mut p.timbre, f.timbre);
    }
}

/// Dry and effect-send buses for one performance before limiting.
struct Bus {
    dry: Vec<f64>,
    send: Vec<f64>,
}

impl Bus {
    fn new(len: usize) -> Self {
        Self {
            dry: vec![0.0; len],
            send: vec![0.0; len],
        }
    }

    fn add(&mut self, i: usize, value: f64, send: f64) {
        self.dry[i] += value;
        self.send[i] += value * send;
    }

    /// Single feedback delay fed by the send bus, summed into the dry bus.
    fn mixdown(self, sr: f64) -> Vec<f64> {
        let d = to_samples(DELAY_S, sr).max(1);
        let mut line = vec![0.0; self.dry.len()];
        let mut out = self.dry;
        for i in 0..out.len() {
            let delayed = if i >= d { line[i - d] } else { 0.0 };
            line[i] = self.send[i] + DELAY_FEEDBACK * delayed;
            out[i] += delayed;
        }
        out
    }
}

/// Total buffer length: at least the 5 s performance window plus the tail.
pub fn buffer_len(perf: &TinyPerformance, sample_rate: u32) -> usize {
    let last = perf.events.last().map_or(0.0, |e| e.time);
    to_samples(last.max(MAX_DURATION) + TAIL_SECONDS, sample_rate as f64)
}

/// Unlimited mix of one performance.
fn render_unlimited(perf: &TinyPerformance, sample_rate: u32, len: usize) -> Result<Vec<f64>, SynthError> {
    perf.validate().into_result().map_err(SynthError::Invalid)?;
    let sr = sample_rate as f64;
    let spec = InstrumentSpec::for_instrument(perf.instrument());
    let z_max = perf.events.iter().map(|e| e.z).fold(0.0, f64::max);
    let gestures = segment(&perf.events).expect("validated stream starts with a touch-down");

    let mut bus = Bus::new(len);
    let mut state = SynthState::new(z_max);
    for (n, gesture) in gestures.iter().enumerate() {
        let frames: Vec<(usize, ControlFrame)> = gesture
            .events
            .iter()
            .map(|e| (to_samples(e.time, sr), map_touch(spec, e, &mut state)))
            .collect();
        let seed = (n as u64) << 32 | gesture.start as u64;
        if spec.method == SynthesisMethod::DrumKit {
            render_drums(&frames, sr, seed, &mut bus);
        } else {
            let times: Vec<f64> = gesture.events.iter().map(|e| e.time).collect();
            render_note(spec.method, &frames, &times, sr, seed, &mut bus);
        }
    }
    Ok(bus.mixdown(sr))
}

/// Gate intervals `[on, off)` in samples for one gesture.
fn gates(times: &[f64], sr: f64) -> Vec<(usize, usize)> {
    let t0 = times[0];
    let attack_end = to_samples(t0 + ATTACK_S, sr);
    let start = to_samples(t0, sr);
    let Some(&first_moved) = times.get(1) else {
        return vec![(start, attack_end)];
    };
    let end = to_samples(*times.last().unwrap(), sr).max(attack_end);
    if first_moved - t0 <= HOLD_WINDOW_S {
        vec![(start, end)]
    } else {
        // short note first, the swipe resumes the sound once it moves
        vec![(start, attack_end), (to_samples(first_moved, sr), end)]
    }
}

fn render_note(
    method: SynthesisMethod,
    frames: &[(usize, ControlFrame)],
    times: &[f64],
    sr: f64,
    seed: u64,
    bus: &mut Bus,
) {
    let gates = gates(times, sr);
    let last_gate_off = gates.last().map_or(0, |g| g.1);
    let attack_step = 1.0 / (ATTACK_S * sr);
    let release_step = 1.0 / (RELEASE_S * sr);
    let start = frames[0].0;
    let stop = (last_gate_off + to_samples(RELEASE_S, sr) + 1).min(bus.dry.len());

    let mut voice: Box<dyn Voice> = melodic_voice(method, sr, seed);
    let mut smooth = Smoother::new(&frames[0].1, sr);
    let mut frame_idx = 0;
    let mut env = 0.0f64;
    for i in start..stop {
        while frame_idx + 1 < frames.len() && frames[frame_idx + 1].0 <= i {
            frame_idx += 1;
        }
        smooth.step(&frames[frame_idx].1);
        let gate_on = gates.iter().any(|&(on, off)| on <= i && i < off);
        env = if gate_on {
            (env + attack_step).min(1.0)
        } else {
            (env - release_step).max(0.0)
        };
        let v = voice.next(&smooth.params);
        if env > 0.0 {
            bus.add(i, NOTE_LEVEL * env * smooth.amplitude * v, smooth.send);
        } else if i >= last_gate_off {
            break;
        }
    }
}

fn render_drums(frames: &[(usize, ControlFrame)], sr: f64, seed: u64, bus: &mut Bus) {
    let (start, first) = frames[0];
    let Some(voice) = first.drum else {
        return;
    };
    let end = frames.last().map_or(start, |f| f.0);
    let roll = to_samples(ROLL_INTERVAL_S, sr).max(1);

    let mut hits = vec![start];
    let mut t = start + roll;
    if frames.len() > 1 {
        while t <= end {
            hits.push(t);
            t += roll;
        }
    }
    let mut scratch = vec![0.0; to_samples(voice.length(), sr)];
    for (k, &hit) in hits.iter().enumerate() {
        // control values in effect at the moment of the hit
        let frame = frames
            .iter()
            .take_while(|f| f.0 <= hit)
            .last()
            .map_or(first, |f| f.1);
        drum_hit(voice, frame.bend_ratio, sr, seed ^ ((k as u64) << 16), &mut scratch);
        let gain = NOTE_LEVEL * frame.amplitude;
        for (j, s) in scratch.iter().enumerate() {
            let i = hit + j;
            if i >= bus.dry.len() {
                break;
            }
            bus.add(i, gain * s, frame.reverb_send);
        }
    }
}

fn limited(mix: Vec<f64>, sample_rate: u32) -> AudioBuffer {
    AudioBuffer {
        samples: mix.into_iter().map(|s| soft_limit(s) as f32).collect(),
        sample_rate,
    }
}

/// Renders one performance with its own instrument.
pub fn render(perf: &TinyPerformance, sample_rate: u32) -> Result<AudioBuffer, SynthError> {
    if sample_rate == 0 {
        return Err(SynthError::SampleRate);
    }
    let len = buffer_len(perf, sample_rate);
    Ok(limited(render_unlimited(perf, sample_rate, len)?, sample_rate))
}

/// Renders every layer separately, sums them and limits the sum.
pub fn render_layers(layers: &LayeredPerformance, sample_rate: u32) -> Result<AudioBuffer, SynthError> {
    if sample_rate == 0 {
        return Err(SynthError::SampleRate);
    }
    let len = layers
        .layers()
        .iter()
        .map(|p| buffer_len(p, sample_rate))
        .max()
        .unwrap_or(0);
    let mut mix = vec![0.0; len];
    for layer in layers.layers() {
        for (m, s) in mix.iter_mut().zip(render_unlimited(layer, sample_rate, len)?) {
            *m += s;
        }
    }
    Ok(limited(mix, sample_rate))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::perf::{Instrument, Metadata, TouchEvent};

    fn perf(instrument: Instrument, events: Vec<TouchEvent>) -> TinyPerformance {
        TinyPerformance::new(Metadata::anonymous(instrument), events)
    }

    fn rms(s: &[f32]) -> f64 {
        (s.iter().map(|v| (*v as f64).powi(2)).sum::<f64>() / s.len() as f64).sqrt()
    }

    #[test]
    fn limiter_is_bounded_and_transparent_below_knee() {
        assert_eq!(soft_limit(0.3), 0.3);
        assert_eq!(soft_limit(-0.5), -0.5);
        for x in [0.6, 1.0, 1.6, 5.0, 1e9] {
            let y = soft_limit(x);
            assert!(y > 0.5 && y <= 1.0);
            assert_eq!(soft_limit(-x), -y);
        }
        assert!(soft_limit(0.9) < soft_limit(1.0));
    }

    #[test]
    fn empty_performance_is_silent() {
        let b = render(&perf(Instrument::Chirp, vec![]), 8000).unwrap();
        assert_eq!(b.samples.len(), 48_000);
        assert!(b.samples.iter().all(|s| *s == 0.0));
    }

    #[test]
    fn invalid_performance_is_rejected() {
        let p = perf(Instrument::Chirp, vec![TouchEvent::moved(0.0, 0.5, 0.5)]);
        assert!(matches!(render(&p, 8000), Err(SynthError::Invalid(_))));
        assert!(matches!(
            render(&perf(Instrument::Chirp, vec![]), 0),
            Err(SynthError::SampleRate)
        ));
    }

    #[test]
    fn tap_starts_on_its_sample() {
        let sr = 8000;
        let p = perf(Instrument::Chirp, vec![TouchEvent::down(0.25, 0.5, 0.5)]);
        let b = render(&p, sr).unwrap();
        let first = b.samples.iter().position(|s| *s != 0.0).unwrap();
        // first sample of the note is sin(0) = 0, sound begins one sample on
        assert!((2000..=2001).contains(&first), "{first}");
        let note_end = 2000 + ((ATTACK_S + RELEASE_S) * sr as f64) as usize + 2;
        assert!(b.samples[note_end..].iter().all(|s| *s == 0.0));
    }

    #[test]
    fn held_swipe_sustains() {
        let sr = 8000;
        let mut events = vec![TouchEvent::down(0.5, 0.4, 0.5)];
        let mut t = 0.52;
        while t <= 2.5 {
            events.push(TouchEvent::moved(t, 0.4, 0.5));
            t += 0.02;
        }
        let b = render(&perf(Instrument::Fmlead, events), sr).unwrap();
        let win = 400;
        for w in (sr as usize / 2 + win..(2.4 * sr as f64) as usize).step_by(win) {
            assert!(rms(&b.samples[w..w + win]) > 0.05, "quiet window at {w}");
        }
    }

    #[test]
    fn every_instrument_renders_bounded_and_deterministic() {
        let events = vec![
            TouchEvent::down(0.0, 0.2, 0.2),
            TouchEvent::moved(0.05, 0.3, 0.4),
            TouchEvent::moved(0.3, 0.8, 0.9),
            TouchEvent::down(0.6, 0.9, 0.1),
            TouchEvent::down(0.9, 0.1, 0.9),
            TouchEvent::moved(1.2, 0.6, 0.6),
        ];
        for i in Instrument::ALL {
            let p = perf(i, events.clone());
            let a = render(&p, 8000).unwrap();
            let b = render(&p, 8000).unwrap();
            assert_eq!(a, b, "{i}");
            assert!(a.samples.iter().all(|s| s.abs() <= 1.0));
            assert!(rms(&a.samples) > 1e-3, "{i} is silent");
        }
    }

    #[test]
    fn drum_roll_retriggers() {
        let sr = 8000;
        let events = vec![
            TouchEvent::down(0.0, 0.2, 0.8),
            TouchEvent::moved(0.1, 0.25, 0.8),
            TouchEvent::moved(0.2, 0.3, 0.8),
        ];
        let b = render(&perf(Instrument::Drums, events), sr).unwrap();
        // bass drum onsets every 50 ms: energy right after 0.2 s is still high
        assert!(rms(&b.samples[1600..1700]) > 0.05);
    }

    #[test]
    fn single_layer_matches_plain_render() {
        let p = perf(
            Instrument::Keys,
            vec![TouchEvent::down(0.1, 0.5, 0.5), TouchEvent::moved(0.15, 0.6, 0.2)],
        );
        let one = render_layers(&LayeredPerformance::single(p.clone()), 8000).unwrap();
        assert_eq!(one, render(&p, 8000).unwrap());
    }
}
