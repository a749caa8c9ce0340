//! Minimal oscillators behind each synthesis method.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::instruments::SynthesisMethod;
use super::mapping::DrumVoice;

/// Smoothed, per-sample view of a control frame.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Params {
    pub freq: f64,
    pub lower_octave_mix: f64,
    pub tremolo_depth: f64,
    pub tremolo_rate_hz: f64,
    pub modulation: f64,
    pub timbre: f64,
}

pub(crate) trait Voice {
    fn next(&mut self, p: &Params) -> f64;
}

fn advance(phase: &mut f64, freq: f64, sr: f64) {
    *phase += freq / sr;
    *phase -= phase.floor();
}

/// Two cascaded one-pole low-pass sections.
#[derive(Default)]
struct TwoPole {
    a: f64,
    b: f64,
}

impl TwoPole {
    fn process(&mut self, x: f64, cutoff: f64, sr: f64) -> f64 {
        let k = 1.0 - (-TAU * cutoff / sr).exp();
        self.a += k * (x - self.a);
        self.b += k * (self.a - self.b);
        self.b
    }
}

/// Square-law LFO gain in `[1 − depth, 1]`.
fn tremolo_gain(phase: f64, depth: f64) -> f64 {
    let lfo = 0.5 + 0.5 * (TAU * phase).sin();
    1.0 - depth + depth * lfo * lfo
}

struct Sine {
    sr: f64,
    phase: f64,
    sub: f64,
}

impl Voice for Sine {
    fn next(&mut self, p: &Params) -> f64 {
        let out = (TAU * self.phase).sin() + p.lower_octave_mix * (TAU * self.sub).sin();
        advance(&mut self.phase, p.freq, self.sr);
        advance(&mut self.sub, p.freq * 0.5, self.sr);
        out / (1.0 + p.lower_octave_mix)
    }
}

/// Two-operator FM/PM: one modulator at `ratio` × carrier.
struct TwoOp {
    sr: f64,
    ratio: f64,
    fixed_index: Option<f64>,
    carrier: f64,
    modulator: f64,
    sub: f64,
}

impl Voice for TwoOp {
    fn next(&mut self, p: &Params) -> f64 {
        let index = self.fixed_index.unwrap_or(p.modulation);
        let m = (TAU * self.modulator).sin();
        let main = (TAU * self.carrier + index * m).sin();
        let low = (TAU * self.sub + index * m).sin();
        advance(&mut self.carrier, p.freq, self.sr);
        advance(&mut self.modulator, p.freq * self.ratio, self.sr);
        advance(&mut self.sub, p.freq * 0.5, self.sr);
        (main + p.lower_octave_mix * low) / (1.0 + p.lower_octave_mix)
    }
}

struct SawPad {
    sr: f64,
    phase: f64,
    detuned: f64,
    lfo: f64,
    filter: TwoPole,
}

impl Voice for SawPad {
    fn next(&mut self, p: &Params) -> f64 {
        let saw = (2.0 * self.phase - 1.0) + (2.0 * self.detuned - 1.0);
        advance(&mut self.phase, p.freq, self.sr);
        advance(&mut self.detuned, p.freq * 1.004, self.sr);
        advance(&mut self.lfo, p.tremolo_rate_hz, self.sr);
        let filtered = self.filter.process(0.5 * saw, 1200.0, self.sr);
        filtered * tremolo_gain(self.lfo, p.tremolo_depth)
    }
}

/// Raised-cosine windowed bursts, one per fundamental period; timbre moves
/// the burst's inner frequency.
struct WavePacket {
    sr: f64,
    phase: f64,
}

impl Voice for WavePacket {
    fn next(&mut self, p: &Params) -> f64 {
        let ratio = 1.0 + 5.0 * p.timbre;
        let window = 0.5 * (1.0 - (TAU * self.phase).cos());
        let out = window * (TAU * ratio * self.phase).sin();
        advance(&mut self.phase, p.freq, self.sr);
        out
    }
}

pub(crate) const PLUCK_DAMPING: f64 = 0.996;

/// Karplus-Strong delay line with a fractional, bendable read position.
struct Pluck {
    sr: f64,
    line: Vec<f64>,
    write: usize,
}

impl Pluck {
    fn new(sr: f64, rng: &mut ChaCha8Rng) -> Self {
        // room for the lowest bent pitch of any register
        let len = (sr / 20.0) as usize + 4;
        let line = (0..len).map(|_| rng.random_range(-1.0..1.0)).collect();
        Self { sr, line, write: 0 }
    }

    fn read(&self, delay: f64) -> f64 {
        let len = self.line.len() as f64;
        let pos = (self.write as f64 - delay).rem_euclid(len);
        let i = pos.floor() as usize;
        let frac = pos - pos.floor();
        let a = self.line[i % self.line.len()];
        let b = self.line[(i + 1) % self.line.len()];
        a + (b - a) * frac
    }
}

impl Voice for Pluck {
    fn next(&mut self, p: &Params) -> f64 {
        // the two-tap average adds half a sample of delay
        let delay = (self.sr / p.freq - 0.5).clamp(2.0, self.line.len() as f64 - 2.0);
        let out = 0.5 * (self.read(delay) + self.read(delay + 1.0)) * PLUCK_DAMPING;
        self.line[self.write] = out;
        self.write = (self.write + 1) % self.line.len();
        out
    }
}

struct WubBass {
    sr: f64,
    phase: f64,
    lfo: f64,
    filter: TwoPole,
}

impl Voice for WubBass {
    fn next(&mut self, p: &Params) -> f64 {
        let saw = 2.0 * self.phase - 1.0;
        advance(&mut self.phase, p.freq, self.sr);
        advance(&mut self.lfo, p.tremolo_rate_hz, self.sr);
        let cutoff = 150.0 + 2500.0 * p.timbre * p.timbre;
        let filtered = self.filter.process(saw, cutoff, self.sr);
        1.6 * filtered * tremolo_gain(self.lfo, p.tremolo_depth)
    }
}

pub(crate) fn melodic_voice(method: SynthesisMethod, sr: f64, seed: u64) -> Box<dyn Voice> {
    match method {
        SynthesisMethod::Sine => Box::new(Sine {
            sr,
            phase: 0.0,
            sub: 0.0,
        }),
        SynthesisMethod::Fm2Op => Box::new(TwoOp {
            sr,
            ratio: 2.0,
            fixed_index: Some(2.0),
            carrier: 0.0,
            modulator: 0.0,
            sub: 0.0,
        }),
        SynthesisMethod::PhaseMod => Box::new(TwoOp {
            sr,
            ratio: 1.0,
            fixed_index: None,
            carrier: 0.0,
            modulator: 0.0,
            sub: 0.0,
        }),
        SynthesisMethod::SawtoothPad => Box::new(SawPad {
            sr,
            phase: 0.0,
            detuned: 0.25,
            lfo: 0.0,
            filter: TwoPole::default(),
        }),
        SynthesisMethod::WavePacket => Box::new(WavePacket { sr, phase: 0.0 }),
        SynthesisMethod::PluckedString => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            Box::new(Pluck::new(sr, &mut rng))
        }
        SynthesisMethod::TremoloBass => Box::new(WubBass {
            sr,
            phase: 0.0,
            lfo: 0.0,
            filter: TwoPole::default(),
        }),
        SynthesisMethod::DrumKit => unreachable!("drums are rendered as one-shot hits"),
    }
}

impl DrumVoice {
    /// Length of a hit before it is cut off, in seconds.
    pub(crate) fn length(self) -> f64 {
        match self {
            DrumVoice::BassDrum => 0.6,
            DrumVoice::Snare => 0.35,
            DrumVoice::Hihat => 0.15,
            DrumVoice::Crash => 1.5,
        }
    }
}

/// Writes one drum hit into `out` starting at index 0. `bend` scales the
/// tonal components.
pub(crate) fn drum_hit(voice: DrumVoice, bend: f64, sr: f64, seed: u64, out: &mut [f64]) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut phase = 0.0f64;
    let mut prev_noise = 0.0f64;
    for (n, slot) in out.iter_mut().enumerate() {
        let t = n as f64 / sr;
        let noise: f64 = rng.random_range(-1.0..1.0);
        let bright = noise - prev_noise;
        prev_noise = noise;
        *slot = match voice {
            DrumVoice::BassDrum => {
                let f = bend * (50.0 + 100.0 * (-t / 0.04).exp());
                let s = (TAU * phase).sin();
                advance(&mut phase, f, sr);
                s * (-t / 0.25).exp()
            }
            DrumVoice::Snare => {
                let s = (TAU * phase).sin();
                advance(&mut phase, 185.0 * bend, sr);
                0.6 * noise * (-t / 0.08).exp() + 0.4 * s * (-t / 0.06).exp()
            }
            DrumVoice::Hihat => 0.5 * bright * (-t / 0.03).exp(),
            DrumVoice::Crash => 0.4 * bright * (-t / 0.6).exp(),
        };
    }
}
