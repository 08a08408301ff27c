use std::path::Path;

use hound::{SampleFormat, WavReader, WavSpec, WavWriter};
use roomsynth_core::synthesis::RoomImpulseResponse;

use crate::error::{CliError, CliResult};

/// Deinterleaved audio.
#[derive(Debug, Clone, PartialEq)]
pub struct Clip {
    pub sample_rate: u32,
    pub channels: Vec<Vec<f32>>,
}

impl Clip {
    pub fn len(&self) -> usize {
        self.channels.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Average of all channels.
    pub fn mono(&self) -> Vec<f32> {
        let n = self.channels.len().max(1) as f32;
        (0..self.len()).map(|i| self.channels.iter().map(|c| c[i]).sum::<f32>() / n).collect()
    }
}

/// Reads float or integer PCM; integers are scaled to `[-1, 1)`.
pub fn read_wav(path: &Path) -> CliResult<Clip> {
    let mut reader = WavReader::open(path).map_err(|e| CliError::io(path, e))?;
    let spec = reader.spec();
    let count = spec.channels as usize;
    if count == 0 {
        return Err(CliError::Parse(format!("{}: no channels", path.display())));
    }
    let samples: Vec<f32> = match spec.sample_format {
        SampleFormat::Float => reader.samples::<f32>().collect::<Result<_, _>>(),
        SampleFormat::Int => {
            let scale = 1.0 / (1u64 << (spec.bits_per_sample - 1)) as f32;
            reader.samples::<i32>().map(|s| s.map(|v| v as f32 * scale)).collect::<Result<_, _>>()
        }
    }
    .map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))?;
    let channels = (0..count).map(|c| samples.iter().skip(c).step_by(count).copied().collect()).collect();
    Ok(Clip { sample_rate: spec.sample_rate, channels })
}

/// Writes 32-bit float PCM.
pub fn write_wav(path: &Path, clip: &Clip) -> CliResult<()> {
    let spec = WavSpec {
        channels: clip.channels.len() as u16,
        sample_rate: clip.sample_rate,
        bits_per_sample: 32,
        sample_format: SampleFormat::Float,
    };
    let mut writer = WavWriter::create(path, spec).map_err(|e| CliError::io(path, e))?;
    for i in 0..clip.len() {
        for c in &clip.channels {
            writer.write_sample(c[i]).map_err(|e| CliError::io(path, e))?;
        }
    }
    writer.finalize().map_err(|e| CliError::io(path, e))
}

pub fn write_rir(path: &Path, rir: &RoomImpulseResponse) -> CliResult<()> {
    let channels = rir.channels.iter().map(|c| c.iter().map(|&v| v as f32).collect()).collect();
    write_wav(path, &Clip { sample_rate: rir.sample_rate, channels })
}

/// Loads a response file. Timing markers are not stored in audio files, so
/// the direct arrival is taken at the absolute peak.
pub fn read_rir(path: &Path) -> CliResult<RoomImpulseResponse> {
    let clip = read_wav(path)?;
    if clip.channels.len() > 2 {
        return Err(CliError::InvalidArgument(format!("{}: responses need 1 or 2 channels", path.display())));
    }
    let channels: Vec<Vec<f64>> = clip.channels.iter().map(|c| c.iter().map(|&v| v as f64).collect()).collect();
    let peak = channels[0]
        .iter()
        .enumerate()
        .fold((0, 0.0f64), |(bi, bv), (i, v)| if v.abs() > bv { (i, v.abs()) } else { (bi, bv) })
        .0;
    let rir = RoomImpulseResponse {
        sample_rate: clip.sample_rate,
        channels,
        direct_index: peak,
        early_end: peak,
        late_onset: peak,
    };
    rir.validate()?;
    Ok(rir)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_round_trip_is_exact() {
        let path = std::env::temp_dir().join(format!("roomsynth-audio-{}.wav", std::process::id()));
        let clip = Clip { sample_rate: 44100, channels: vec![vec![0.5, -0.25, 1e-7], vec![0.0, 1.0, -1.0]] };
        write_wav(&path, &clip).unwrap();
        assert_eq!(read_wav(&path).unwrap(), clip);
        std::fs::remove_file(path).unwrap();
    }

    #[test]
    fn empty_clip_round_trips() {
        let path = std::env::temp_dir().join(format!("roomsynth-empty-{}.wav", std::process::id()));
        let clip = Clip { sample_rate: 48000, channels: vec![Vec::new()] };
        write_wav(&path, &clip).unwrap();
        assert!(read_wav(&path).unwrap().is_empty());
        std::fs::remove_file(path).unwrap();
    }
}
