use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::bands::{BandValues, BAND_COUNT};
use crate::error::{Error, Result};
use crate::metrics::{rt60_from_energy, OctaveFilterBank};
use crate::synthesis::eyring::{MAX_RT60, MIN_RT60};

/// ln(10^6) / 2: amplitude decay constant for a 60 dB energy drop.
pub const DECAY_CONSTANT: f64 = 6.91;

const MAX_ITERATIONS: usize = 8;
const TOLERANCE: f64 = 0.005;
const STEP_EXPONENT: f64 = 0.8;
const FIT_POINTS: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LateReverbSpec {
    pub rt60: BandValues,
    /// Amplitude relative to a unit-energy direct path.
    pub gain: f64,
    /// Start of the tail, seconds.
    pub onset: f64,
    pub seed: u64,
}

impl LateReverbSpec {
    /// Clamps RT60s into the supported range.
    pub fn new(rt60: BandValues, gain: f64, onset: f64, seed: u64) -> Self {
        Self { rt60: rt60.map(|t| t.clamp(MIN_RT60, MAX_RT60)), gain, onset, seed }
    }
}

/// Band-limited noise for one tail; the expensive part of late synthesis.
struct NoiseBands {
    bands: [Vec<f64>; BAND_COUNT],
    mean_power: BandValues,
}

impl NoiseBands {
    fn new(bank: &OctaveFilterBank, len: usize, seed: u64) -> Self {
        let mut bands: [Vec<f64>; BAND_COUNT] = std::array::from_fn(|band| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(band as u64);
            (0..len).map(|_| StandardNormal.sample(&mut rng)).collect()
        });
        // Filtering twice steepens the band skirts, which keeps a slowly
        // decaying band from swamping the measurement of its neighbors.
        bank.filter_zero_phase_bands_in_place(&mut bands);
        bank.filter_zero_phase_bands_in_place(&mut bands);
        let mean_power = std::array::from_fn(|b| {
            let e: f64 = bands[b].iter().map(|v| v * v).sum();
            e / len.max(1) as f64
        });
        Self { bands, mean_power }
    }

    /// Sum of enveloped bands. Each band carries the energy a unit-variance
    /// excitation decaying at its target time would carry, whatever
    /// envelope time is used to shape it.
    fn render(&self, envelope_rt: &BandValues, target_rt: &BandValues, fs: f64, out: &mut [f64]) {
        out.fill(0.0);
        let mut shaped = vec![0.0; out.len()];
        for b in 0..BAND_COUNT {
            let decay = (-DECAY_CONSTANT / (envelope_rt[b] * fs)).exp();
            let mut env = 1.0;
            let mut energy = 0.0;
            for (s, &z) in shaped.iter_mut().zip(&self.bands[b]) {
                *s = z * env;
                energy += *s * *s;
                env *= decay;
                if env < 1e-150 {
                    env = 0.0;
                }
            }
            if !(energy > 0.0) {
                continue;
            }
            let wanted = self.mean_power[b] * target_rt[b] * fs / (2.0 * DECAY_CONSTANT);
            let w = (wanted / energy).sqrt();
            for (o, s) in out.iter_mut().zip(&shaped) {
                *o += w * s;
            }
        }
    }
}

/// Per-band RT60 measured on a broadband tail with a fast T30 fit.
fn measure_bands(bank: &OctaveFilterBank, tail: &[f64]) -> [Option<f64>; BAND_COUNT] {
    let bands = bank.analyze(tail);
    let mut energy = vec![0.0; tail.len() + 1];
    std::array::from_fn(|band| {
        backward_energy(&bands[band], &mut energy);
        rt60_from_energy(|i| energy[i], tail.len(), bank.sample_rate(), FIT_POINTS).map(|d| d.seconds)
    })
}

/// `out[i] = sum_{j >= i} x[j]^2`, with `out.len() == x.len() + 1`.
pub(crate) fn backward_energy(x: &[f64], out: &mut [f64]) {
    let n = x.len();
    out[n] = 0.0;
    for i in (0..n).rev() {
        out[i] = out[i + 1] + x[i] * x[i];
    }
}

/// Decaying noise tail of `len` samples whose measured per-band RT60s
/// track `target`. Band envelopes are corrected from measurements of the
/// rendered tail, since filter-bank leakage between bands otherwise biases
/// the decay of each band towards its neighbors. The result is not scaled.
pub(crate) fn shaped_tail(bank: &OctaveFilterBank, target: &BandValues, len: usize, seed: u64) -> Vec<f64> {
    let fs = bank.sample_rate();
    let noise = NoiseBands::new(bank, len, seed);
    let mut envelope = *target;
    let mut tail = vec![0.0; len];
    let mut best: Option<(f64, Vec<f64>)> = None;
    for _ in 0..MAX_ITERATIONS {
        noise.render(&envelope, target, fs, &mut tail);
        let measured = measure_bands(bank, &tail);
        let log_errors: Vec<f64> = (0..BAND_COUNT)
            .map(|b| measured[b].map_or(0.0, |m| (target[b] / m).ln()))
            .collect();
        let score = log_errors.iter().map(|e| e * e).sum::<f64>();
        if best.as_ref().map_or(true, |(s, _)| score < *s) {
            best = Some((score, tail.clone()));
        }
        if log_errors.iter().all(|e| e.abs() < TOLERANCE) {
            break;
        }
        for b in 0..BAND_COUNT {
            envelope[b] = (envelope[b] * (log_errors[b] * STEP_EXPONENT).exp()).clamp(0.005, 20.0);
        }
    }
    best.map(|(_, t)| t).unwrap_or(tail)
}

/// Late reverberation of `length` seconds: zero before the onset, then a
/// noise tail decaying per band at the specified RT60, scaled to total
/// energy `gain^2`.
pub fn synthesize_late(spec: &LateReverbSpec, length: f64, sample_rate: f64) -> Result<Vec<f64>> {
    let bank = OctaveFilterBank::new(sample_rate)?;
    synthesize_late_with(&bank, spec, length)
}

pub fn synthesize_late_with(bank: &OctaveFilterBank, spec: &LateReverbSpec, length: f64) -> Result<Vec<f64>> {
    let fs = bank.sample_rate();
    if !(length.is_finite() && spec.onset.is_finite() && spec.onset >= 0.0 && length >= spec.onset) {
        return Err(Error::InvalidLength(format!("late length {length} s must cover onset {} s", spec.onset)));
    }
    if !(spec.gain.is_finite() && spec.gain >= 0.0) {
        return Err(Error::DegenerateInput(format!("late gain {} must be non-negative", spec.gain)));
    }
    let total = (length * fs).round() as usize;
    let onset = ((spec.onset * fs).round() as usize).min(total);
    let mut out = vec![0.0; total];
    if spec.gain == 0.0 || onset == total {
        return Ok(out);
    }
    let target = spec.rt60.map(|t| t.clamp(MIN_RT60, MAX_RT60));
    let tail = shaped_tail(bank, &target, total - onset, spec.seed);
    let energy: f64 = tail.iter().map(|v| v * v).sum();
    if energy > 0.0 {
        let scale = spec.gain / energy.sqrt();
        for (o, t) in out[onset..].iter_mut().zip(&tail) {
            *o = t * scale;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::measure_rir;

    #[test]
    fn zero_gain_is_silent() {
        let spec = LateReverbSpec::new([0.5; 8], 0.0, 0.05, 1);
        assert!(synthesize_late(&spec, 0.5, 48000.0).unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn deterministic_and_scaled() {
        let spec = LateReverbSpec::new([0.4; 8], 0.5, 0.05, 9);
        let a = synthesize_late(&spec, 0.6, 48000.0).unwrap();
        let b = synthesize_late(&spec, 0.6, 48000.0).unwrap();
        assert_eq!(a, b);
        assert!(a[..2400].iter().all(|&v| v == 0.0));
        let energy: f64 = a.iter().map(|v| v * v).sum();
        assert!((energy - 0.25).abs() < 1e-12);
    }

    #[test]
    fn length_must_cover_onset() {
        let spec = LateReverbSpec::new([0.4; 8], 0.5, 0.5, 9);
        assert!(matches!(synthesize_late(&spec, 0.2, 48000.0), Err(Error::InvalidLength(_))));
    }

    #[test]
    fn single_band_round_trip() {
        let mut rt = [MIN_RT60; 8];
        rt[4] = 0.5;
        let spec = LateReverbSpec::new(rt, 1.0, 0.0, 3);
        let tail = synthesize_late(&spec, 0.8, 48000.0).unwrap();
        let measured = measure_rir(&tail, 48000.0).unwrap()[4].rt60_seconds().unwrap();
        assert!((measured / 0.5 - 1.0).abs() < 0.05, "measured {measured}");
    }
}
