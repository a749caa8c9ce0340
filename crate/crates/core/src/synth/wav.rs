use std::io::Cursor;
use std::path::Path;

use super::{AudioBuffer, SynthError};

fn spec(sample_rate: u32) -> hound::WavSpec {
    hound::WavSpec {
        channels: 1,
        sample_rate,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    }
}

fn to_i16(s: f32) -> i16 {
    (s.clamp(-1.0, 1.0) * i16::MAX as f32).round() as i16
}

/// 16-bit signed little-endian mono WAV bytes.
pub fn encode_wav(buffer: &AudioBuffer) -> Result<Vec<u8>, SynthError> {
    let mut cursor = Cursor::new(Vec::with_capacity(44 + buffer.samples.len() * 2));
    {
        let mut writer = hound::WavWriter::new(&mut cursor, spec(buffer.sample_rate))?;
        let mut w = writer.get_i16_writer(buffer.samples.len() as u32);
        for &s in &buffer.samples {
            w.write_sample(to_i16(s));
        }
        w.flush()?;
        writer.finalize()?;
    }
    Ok(cursor.into_inner())
}

pub fn write_wav(path: &Path, buffer: &AudioBuffer) -> Result<(), SynthError> {
    let bytes = encode_wav(buffer)?;
    std::fs::write(path, bytes).map_err(|e| SynthError::Wav(hound::Error::IoError(e)))
}

/// Reads 16-bit mono WAV bytes back into a buffer.
pub fn decode_wav(bytes: &[u8]) -> Result<AudioBuffer, SynthError> {
    let reader = hound::WavReader::new(Cursor::new(bytes))?;
    let sample_rate = reader.spec().sample_rate;
    let samples = reader
        .into_samples::<i16>()
        .map(|s| s.map(|v| v as f32 / i16::MAX as f32))
        .collect::<Result<_, _>>()?;
    Ok(AudioBuffer {
        samples,
        sample_rate,
    })
}
