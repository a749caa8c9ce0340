//! Touch-to-sound instrument mappings and offline rendering.

mod instruments;
mod mapping;
mod render;
mod voice;
mod wav;

use thiserror::Error;

use crate::perf::Violation;

pub use instruments::{
    semitone_to_hz, Input, InstrumentSpec, Register, SynthesisMethod, Target, INSTRUMENTS,
};
pub use mapping::{map_touch, ControlFrame, DrumVoice, SynthState, BEND_RANGE_SEMITONES};
pub use render::{
    buffer_len, render, render_layers, soft_limit, DEFAULT_SAMPLE_RATE, TAIL_SECONDS,
};
pub use wav::{decode_wav, encode_wav, write_wav};

/// Identifies the sound of rendered artifacts; bump when rendering changes.
pub const ENGINE_VERSION: &str = concat!("tinyjam-synth-", env!("CARGO_PKG_VERSION"));

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("unknown instrument `{0}`")]
    UnknownInstrument(String),
    #[error("performance is invalid: {}", join(.0))]
    Invalid(Vec<Violation>),
    #[error("sample rate must be positive")]
    SampleRate,
    #[error("wav encoding failed: {0}")]
    Wav(#[from] hound::Error),
}

fn join(v: &[Violation]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

/// Mono PCM samples in `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioBuffer {
    pub samples: Vec<f32>,
    pub sample_rate: u32,
}

impl AudioBuffer {
    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    pub fn peak(&self) -> f32 {
        self.samples.iter().fold(0.0, |m, s| m.max(s.abs()))
    }
}
