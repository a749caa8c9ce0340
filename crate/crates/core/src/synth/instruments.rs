use serde::Serialize;

use crate::perf::Instrument;

use super::SynthError;

/// Touch-derived control inputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Input {
    X,
    Y,
    Dx,
    Dy,
}

/// Synthesis parameters an input can drive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    Pitch,
    Volume,
    Timbre,
    PitchBend,
    LowerOctaveMix,
    ReverbDelaySend,
    Tremolo,
    Modulation,
    DrumQuadrant,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SynthesisMethod {
    Sine,
    Fm2Op,
    PhaseMod,
    SawtoothPad,
    WavePacket,
    PluckedString,
    TremoloBass,
    DrumKit,
}

/// Semitone range that x sweeps across, in MIDI note numbers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Register {
    pub low: i32,
    pub high: i32,
}

impl Register {
    /// Nearest semitone for a horizontal position in `[0, 1]`.
    pub fn semitone(&self, x: f64) -> i32 {
        let x = x.clamp(0.0, 1.0);
        (self.low as f64 + x * (self.high - self.low) as f64).round() as i32
    }
}

pub fn semitone_to_hz(semitone: f64) -> f64 {
    440.0 * 2f64.powf((semitone - 69.0) / 12.0)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InstrumentSpec {
    pub instrument: Instrument,
    /// `None` for the drum kit, which is unpitched.
    pub register: Option<Register>,
    pub mapping: &'static [(Input, Target)],
    pub method: SynthesisMethod,
}

impl InstrumentSpec {
    pub fn name(&self) -> &'static str {
        self.instrument.name()
    }

    pub fn targets_of(&self, input: Input) -> impl Iterator<Item = Target> + '_ {
        self.mapping
            .iter()
            .filter(move |(i, _)| *i == input)
            .map(|(_, t)| *t)
    }

    pub fn maps(&self, input: Input, target: Target) -> bool {
        self.mapping.contains(&(input, target))
    }

    pub fn for_instrument(instrument: Instrument) -> &'static InstrumentSpec {
        INSTRUMENTS
            .iter()
            .find(|s| s.instrument == instrument)
            .expect("every instrument is described")
    }

    pub fn by_name(name: &str) -> Result<&'static InstrumentSpec, SynthError> {
        let instrument = name
            .parse::<Instrument>()
            .map_err(|_| SynthError::UnknownInstrument(name.to_string()))?;
        Ok(Self::for_instrument(instrument))
    }
}

use Input::*;
use Target::*;

const LEAD: Register = Register { low: 48, high: 84 };
const BASS: Register = Register { low: 24, high: 48 };
const PAD: Register = Register { low: 36, high: 72 };

pub static INSTRUMENTS: [InstrumentSpec; 8] = [
    InstrumentSpec {
        instrument: Instrument::Chirp,
        register: Some(LEAD),
        mapping: &[(X, Pitch), (Y, LowerOctaveMix), (Dx, PitchBend)],
        method: SynthesisMethod::Sine,
    },
    InstrumentSpec {
        instrument: Instrument::Drums,
        register: None,
        mapping: &[
            (X, DrumQuadrant),
            (Y, DrumQuadrant),
            (Dx, PitchBend),
            (Dy, ReverbDelaySend),
        ],
        method: SynthesisMethod::DrumKit,
    },
    InstrumentSpec {
        instrument: Instrument::Fmlead,
        register: Some(BASS),
        mapping: &[
            (X, Pitch),
            (Y, Volume),
            (Dx, PitchBend),
            (Dy, LowerOctaveMix),
            (Dy, ReverbDelaySend),
        ],
        method: SynthesisMethod::Fm2Op,
    },
    InstrumentSpec {
        instrument: Instrument::Keys,
        register: Some(LEAD),
        mapping: &[(X, Pitch), (Y, Volume), (Dx, PitchBend), (Dy, Modulation)],
        method: SynthesisMethod::PhaseMod,
    },
    InstrumentSpec {
        instrument: Instrument::Pad,
        register: Some(PAD),
        mapping: &[
            (X, Pitch),
            (Y, Volume),
            (Dx, PitchBend),
            (Dy, Tremolo),
            (Dy, ReverbDelaySend),
        ],
        method: SynthesisMethod::SawtoothPad,
    },
    InstrumentSpec {
        instrument: Instrument::Quack,
        register: Some(LEAD),
        mapping: &[(X, Pitch), (Y, Timbre), (Dx, PitchBend)],
        method: SynthesisMethod::WavePacket,
    },
    InstrumentSpec {
        instrument: Instrument::Strings,
        register: Some(LEAD),
        mapping: &[(X, Pitch), (Y, Volume), (Dx, PitchBend), (Dy, ReverbDelaySend)],
        method: SynthesisMethod::PluckedString,
    },
    InstrumentSpec {
        instrument: Instrument::Wub,
        register: Some(BASS),
        mapping: &[
            (X, Pitch),
            (X, Timbre),
            (Y, Tremolo),
            (Y, Timbre),
            (Dx, PitchBend),
        ],
        method: SynthesisMethod::TremoloBass,
    },
];

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_instrument_has_one_spec() {
        for i in Instrument::ALL {
            assert_eq!(InstrumentSpec::for_instrument(i).instrument, i);
        }
        assert!(matches!(
            InstrumentSpec::by_name("theremin"),
            Err(SynthError::UnknownInstrument(_))
        ));
    }

    #[test]
    fn registers_are_ordered_and_dx_always_bends() {
        for spec in &INSTRUMENTS {
            if let Some(r) = spec.register {
                assert!(r.low < r.high);
                assert!(spec.maps(X, Pitch));
            } else {
                assert!(!spec.maps(X, Pitch));
            }
            assert!(spec.maps(Dx, PitchBend), "{}", spec.name());
        }
    }

    #[test]
    fn mid_register_chirp_is_f_sharp() {
        let r = InstrumentSpec::for_instrument(Instrument::Chirp).register.unwrap();
        assert_eq!(r.semitone(0.5), 66);
        assert!((semitone_to_hz(66.0) - 369.994).abs() < 1e-3);
        assert_eq!(semitone_to_hz(69.0), 440.0);
    }
}
