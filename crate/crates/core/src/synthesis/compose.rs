use serde::{Deserialize, Serialize};

use crate::bands::BAND_COUNT;
use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::metrics::OctaveFilterBank;
use crate::synthesis::ism::{ReflectionTap, MIN_DISTANCE};

/// Largest allowed absolute sample value of a composed response.
pub const PEAK_LIMIT: f64 = 4.0;

/// Line-of-sight arrival.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DirectPath {
    pub delay: f64,
    pub amplitude: f64,
    pub direction: Vec3,
}

impl DirectPath {
    pub fn between(source: &Vec3, listener: &Vec3, speed_of_sound: f64) -> Self {
        let offset = source - listener;
        let distance = offset.norm();
        let direction = if distance > 0.0 { offset / distance } else { Vec3::zeros() };
        Self { delay: distance / speed_of_sound, amplitude: 1.0 / distance.max(MIN_DISTANCE), direction }
    }
}

/// Late reverberation buffers, one per output channel (or one shared by
/// all channels), each starting at time zero.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LateComponent {
    pub onset: f64,
    pub buffers: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoomImpulseResponse {
    pub sample_rate: u32,
    /// One buffer per channel, all of the same length.
    pub channels: Vec<Vec<f64>>,
    /// Sample of the direct arrival.
    pub direct_index: usize,
    /// Sample of the last early reflection (the direct sample without any).
    pub early_end: usize,
    /// First sample of the late tail.
    pub late_onset: usize,
}

impl RoomImpulseResponse {
    pub fn channel_count(&self) -> usize {
        self.channels.len()
    }

    pub fn len(&self) -> usize {
        self.channels.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn peak(&self) -> f64 {
        self.channels.iter().flatten().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// A single-channel response holding one sample of value one at `delay`.
    pub fn impulse(sample_rate: u32, delay: usize, len: usize) -> Self {
        let mut data = vec![0.0; len.max(delay + 1)];
        data[delay] = 1.0;
        Self { sample_rate, channels: vec![data], direct_index: delay, early_end: delay, late_onset: delay }
    }

    pub fn validate(&self) -> Result<()> {
        let len = self.len();
        if self.channels.is_empty() || self.channels.len() > 2 || self.channels.iter().any(|c| c.len() != len) {
            return Err(Error::InvalidLength("responses need 1 or 2 channels of equal length".into()));
        }
        if self.channels.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::DegenerateInput("non-finite sample in impulse response".into()));
        }
        Ok(())
    }
}

fn sample_index(seconds: f64, sample_rate: f64) -> usize {
    (seconds * sample_rate).round().max(0.0) as usize
}

/// Renders early taps per band through causal octave filters and sums the
/// bands, so each tap carries its frequency-dependent attenuation.
pub fn render_early(bank: &OctaveFilterBank, early: &[ReflectionTap], len: usize) -> Vec<f64> {
    let fs = bank.sample_rate();
    let mut out = vec![0.0; len];
    if early.is_empty() {
        return out;
    }
    let mut bands: [Vec<f64>; BAND_COUNT] = std::array::from_fn(|_| vec![0.0; len]);
    for tap in early {
        let i = sample_index(tap.delay, fs);
        if i < len {
            for (band, signal) in bands.iter_mut().enumerate() {
                signal[i] += tap.amplitude[band];
            }
        }
    }
    bank.filter_causal_bands_in_place(&mut bands);
    for signal in &bands {
        for (o, s) in out.iter_mut().zip(signal) {
            *o += s;
        }
    }
    out
}

/// Sums direct path, early reflections and late tail into a response of
/// `channels` channels. Direct and early parts are identical on every
/// channel; late buffers are taken per channel when one is given for each.
/// The response is as long as the longest late buffer, or just long enough
/// for the last arrival. A response whose peak would exceed
/// [`PEAK_LIMIT`] is scaled down as a whole.
pub fn compose_rir(
    direct: &DirectPath,
    early: &[ReflectionTap],
    late: &LateComponent,
    bank: &OctaveFilterBank,
    channels: usize,
) -> Result<RoomImpulseResponse> {
    if !(1..=2).contains(&channels) {
        return Err(Error::InvalidConfig(format!("{channels} channels requested; 1 or 2 supported")));
    }
    if !late.buffers.is_empty() && late.buffers.len() != 1 && late.buffers.len() != channels {
        return Err(Error::InvalidConfig("late buffers must be shared or one per channel".into()));
    }
    let fs = bank.sample_rate();
    let direct_index = sample_index(direct.delay, fs);
    let early_end = early.iter().map(|t| sample_index(t.delay, fs)).max().map_or(direct_index, |e| e.max(direct_index));
    let late_len = late.buffers.iter().map(Vec::len).max().unwrap_or(0);
    let len = late_len.max(early_end + 1);

    let mut base = render_early(bank, early, len);
    base[direct_index] += direct.amplitude;

    let mut out = Vec::with_capacity(channels);
    for c in 0..channels {
        let mut ch = base.clone();
        if let Some(buffer) = late.buffers.get(c).or(late.buffers.first()) {
            for (o, l) in ch.iter_mut().zip(buffer) {
                *o += l;
            }
        }
        out.push(ch);
    }

    let peak = out.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    if peak > PEAK_LIMIT {
        let scale = PEAK_LIMIT / peak;
        out.iter_mut().flatten().for_each(|v| *v *= scale);
    }
    let late_onset = if late.buffers.is_empty() { len } else { sample_index(late.onset, fs).min(len) };
    let rir = RoomImpulseResponse { sample_rate: fs.round() as u32, channels: out, direct_index, early_end, late_onset };
    rir.validate()?;
    Ok(rir)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn direct_only_is_one_impulse() {
        let bank = OctaveFilterBank::new(48000.0).unwrap();
        let direct = DirectPath::between(&Vec3::new(1.0, 0.0, 0.0), &Vec3::zeros(), 343.0);
        let rir = compose_rir(&direct, &[], &LateComponent::default(), &bank, 1).unwrap();
        assert_eq!(rir.direct_index, 140);
        assert_eq!(rir.len(), 141);
        assert_eq!(rir.channels[0][140], 1.0);
        assert_eq!(rir.channels[0].iter().filter(|&&v| v != 0.0).count(), 1);
    }

    #[test]
    fn boundaries_follow_taps_and_onset() {
        let bank = OctaveFilterBank::new(48000.0).unwrap();
        let direct = DirectPath::between(&Vec3::new(2.0, 0.0, 0.0), &Vec3::zeros(), 343.0);
        let taps = vec![
            ReflectionTap { delay: 0.010, amplitude: [0.3; 8], direction: Vec3::x() },
            ReflectionTap { delay: 0.020, amplitude: [0.2; 8], direction: Vec3::y() },
        ];
        let late = LateComponent { onset: 0.09, buffers: vec![vec![0.0; 9600]] };
        let rir = compose_rir(&direct, &taps, &late, &bank, 2).unwrap();
        assert_eq!(rir.early_end, 960);
        assert_eq!(rir.late_onset, 4320);
        assert_eq!(rir.channel_count(), 2);
        assert_eq!(rir.channels[0], rir.channels[1]);
    }

    #[test]
    fn coincident_positions_are_limited() {
        let bank = OctaveFilterBank::new(48000.0).unwrap();
        let direct = DirectPath::between(&Vec3::zeros(), &Vec3::zeros(), 343.0);
        assert_eq!(direct.amplitude, 10.0);
        let rir = compose_rir(&direct, &[], &LateComponent::default(), &bank, 1).unwrap();
        assert_eq!(rir.peak(), PEAK_LIMIT);
    }
}
