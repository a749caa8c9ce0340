//! Touch event → synthesis control frame.

use serde::Serialize;

use crate::perf::TouchEvent;

use super::instruments::{semitone_to_hz, Input, InstrumentSpec, Target};

/// Bend range at full-width horizontal offset, in semitones.
pub const BEND_RANGE_SEMITONES: f64 = 2.0;
pub const BASE_TREMOLO_HZ: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DrumVoice {
    Hihat,
    Crash,
    BassDrum,
    Snare,
}

impl DrumVoice {
    /// Quadrant lookup with y growing downward. Points on a midline belong
    /// to the right/lower side.
    pub fn for_position(x: f64, y: f64) -> DrumVoice {
        match (x >= 0.5, y >= 0.5) {
            (false, false) => DrumVoice::Hihat,
            (true, false) => DrumVoice::Crash,
            (false, true) => DrumVoice::BassDrum,
            (true, true) => DrumVoice::Snare,
        }
    }
}

/// Per-gesture mapping state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthState {
    pub anchor_x: f64,
    pub anchor_y: f64,
    pub dx: f64,
    pub dy: f64,
    pub active: bool,
    /// Largest pressure in the performance; pressure scales amplitude
    /// relative to it.
    pub z_max: f64,
}

impl SynthState {
    pub fn new(z_max: f64) -> Self {
        Self {
            anchor_x: 0.0,
            anchor_y: 0.0,
            dx: 0.0,
            dy: 0.0,
            active: false,
            z_max,
        }
    }
}

/// Synthesis parameters in effect from one event until the next.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ControlFrame {
    /// True for a touch-down: the start of a new note or drum hit.
    pub trigger: bool,
    /// Unbent pitch; `None` for unpitched instruments.
    pub pitch_hz: Option<f64>,
    pub amplitude: f64,
    pub bend_ratio: f64,
    pub lower_octave_mix: f64,
    pub reverb_send: f64,
    pub tremolo_depth: f64,
    pub tremolo_rate_hz: f64,
    pub modulation: f64,
    pub timbre: f64,
    pub drum: Option<DrumVoice>,
}

impl ControlFrame {
    pub fn frequency(&self) -> Option<f64> {
        self.pitch_hz.map(|f| f * self.bend_ratio)
    }
}

fn volume_from_y(y: f64) -> f64 {
    0.3 + 0.7 * (1.0 - y.clamp(0.0, 1.0))
}

fn pressure_factor(z: f64, z_max: f64) -> f64 {
    if z_max > 0.0 {
        (z / z_max).clamp(0.0, 1.0)
    } else {
        1.0
    }
}

/// Updates `state` from `event` and returns the control frame it implies.
///
/// Pitch comes from the touch-down position and stays fixed for the
/// gesture; horizontal offsets from the anchor bend it by up to ±2
/// semitones and vertical offsets scale the mapped effect sends.
pub fn map_touch(spec: &InstrumentSpec, event: &TouchEvent, state: &mut SynthState) -> ControlFrame {
    let trigger = !event.moving || !state.active;
    if trigger {
        state.anchor_x = event.x;
        state.anchor_y = event.y;
        state.active = true;
    }
    state.dx = (event.x - state.anchor_x).clamp(-1.0, 1.0);
    state.dy = (event.y - state.anchor_y).clamp(-1.0, 1.0);
    let ady = state.dy.abs();

    let mut frame = ControlFrame {
        trigger,
        pitch_hz: None,
        amplitude: pressure_factor(event.z, state.z_max),
        bend_ratio: 1.0,
        lower_octave_mix: 0.0,
        reverb_send: 0.0,
        tremolo_depth: 0.0,
        tremolo_rate_hz: BASE_TREMOLO_HZ,
        modulation: 1.0,
        timbre: 0.5,
        drum: None,
    };
    let mut timbre_sum = 0.0;
    let mut timbre_inputs = 0;

    for &(input, target) in spec.mapping {
        match (input, target) {
            (Input::X, Target::Pitch) => {
                if let Some(register) = spec.register {
                    frame.pitch_hz =
                        Some(semitone_to_hz(register.semitone(state.anchor_x) as f64));
                }
            }
            (Input::X | Input::Y, Target::DrumQuadrant) => {
                frame.drum = Some(DrumVoice::for_position(state.anchor_x, state.anchor_y));
            }
            (Input::Dx, Target::PitchBend) => {
                frame.bend_ratio = 2f64.powf(state.dx * BEND_RANGE_SEMITONES / 12.0);
            }
            (Input::Y, Target::Volume) => frame.amplitude *= volume_from_y(event.y),
            (Input::Y, Target::LowerOctaveMix) => frame.lower_octave_mix = event.y,
            (Input::Dy, Target::LowerOctaveMix) => frame.lower_octave_mix = ady,
            (Input::Dy, Target::ReverbDelaySend) => frame.reverb_send = ady,
            (Input::Dy, Target::Tremolo) => frame.tremolo_depth = ady,
            (Input::Y, Target::Tremolo) => {
                // 2–8 Hz, 4 Hz at mid-height, faster towards the top
                frame.tremolo_rate_hz = BASE_TREMOLO_HZ * 2f64.powf(1.0 - 2.0 * event.y);
                frame.tremolo_depth = 0.9;
            }
            (Input::Dy, Target::Modulation) => frame.modulation = 1.0 + 6.0 * ady,
            (Input::X, Target::Timbre) => {
                timbre_sum += event.x;
                timbre_inputs += 1;
            }
            (Input::Y, Target::Timbre) => {
                timbre_sum += 1.0 - event.y;
                timbre_inputs += 1;
            }
            _ => {}
        }
    }
    if timbre_inputs > 0 {
        frame.timbre = timbre_sum / timbre_inputs as f64;
    }
    frame
}
