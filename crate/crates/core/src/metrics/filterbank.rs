//! Octave-band filter bank built from 4th-order Butterworth band-pass
//! sections (two biquads per band, bilinear transform with pre-warped
//! band edges).

use std::f64::consts::PI;

use realfft::num_complex::Complex64;

use crate::bands::{band_edges, BAND_COUNT, BAND_CENTERS_HZ};
use crate::error::{Error, Result};

/// Second-order section with the band-pass zero pattern `b1 = 0, b2 = -b0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    pub b0: f64,
    pub b1: f64,
    pub b2: f64,
    pub a1: f64,
    pub a2: f64,
}

impl Biquad {
    /// Transposed direct form II, in place, zero initial state.
    pub fn process_in_place(&self, signal: &mut [f64]) {
        let (b0, b1, b2, a1, a2) = (self.b0, self.b1, self.b2, self.a1, self.a2);
        let mut s1 = 0.0;
        let mut s2 = 0.0;
        for x in signal.iter_mut() {
            let input = *x;
            let y = b0 * input + s1;
            s1 = flush(b1 * input - a1 * y + s2);
            s2 = flush(b2 * input - a2 * y);
            *x = y;
        }
    }

    fn response(&self, z_inv: Complex64) -> Complex64 {
        let z2 = z_inv * z_inv;
        (self.b0 + self.b1 * z_inv + self.b2 * z2) / (1.0 + self.a1 * z_inv + self.a2 * z2)
    }
}

/// Zeroes filter states far below any audible level, so decaying
/// recursions never reach subnormal arithmetic.
#[inline(always)]
fn flush(v: f64) -> f64 {
    if v.abs() < 1e-200 {
        0.0
    } else {
        v
    }
}

/// Lowest sample rate that keeps the top band edge below Nyquist.
pub fn min_sample_rate() -> f64 {
    2.0 * band_edges(BAND_COUNT - 1).1
}

#[derive(Debug, Clone)]
pub struct OctaveFilterBank {
    sample_rate: f64,
    sections: [[Biquad; 2]; BAND_COUNT],
}

impl OctaveFilterBank {
    pub fn new(sample_rate: f64) -> Result<Self> {
        if !(sample_rate.is_finite() && sample_rate > min_sample_rate()) {
            return Err(Error::RateTooLow(sample_rate));
        }
        let mut sections = [[Biquad { b0: 0.0, b1: 0.0, b2: 0.0, a1: 0.0, a2: 0.0 }; 2]; BAND_COUNT];
        for (band, slot) in sections.iter_mut().enumerate() {
            *slot = design_band(band, sample_rate);
        }
        Ok(Self { sample_rate, sections })
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn sections(&self, band: usize) -> &[Biquad; 2] {
        &self.sections[band]
    }

    /// Single-pass (causal) band filtering, in place.
    pub fn filter_causal_in_place(&self, band: usize, signal: &mut [f64]) {
        for section in &self.sections[band] {
            section.process_in_place(signal);
        }
    }

    /// Forward-backward (zero-phase) band filtering, in place.
    pub fn filter_zero_phase_in_place(&self, band: usize, signal: &mut [f64]) {
        self.filter_causal_in_place(band, signal);
        signal.reverse();
        self.filter_causal_in_place(band, signal);
        signal.reverse();
    }

    /// Splits `signal` into the eight zero-phase band signals.
    pub fn analyze(&self, signal: &[f64]) -> [Vec<f64>; BAND_COUNT] {
        let mut bands: [Vec<f64>; BAND_COUNT] = std::array::from_fn(|_| signal.to_vec());
        self.filter_zero_phase_bands_in_place(&mut bands);
        bands
    }

    /// Causal filtering of `signals[band]` by band `band`, all bands in
    /// one sweep. Results equal [`Self::filter_causal_in_place`] per band.
    pub fn filter_causal_bands_in_place(&self, signals: &mut [Vec<f64>; BAND_COUNT]) {
        self.sweep(signals, false);
    }

    /// Zero-phase filtering of `signals[band]` by band `band`, all bands in
    /// one sweep. Results equal [`Self::filter_zero_phase_in_place`] per band.
    pub fn filter_zero_phase_bands_in_place(&self, signals: &mut [Vec<f64>; BAND_COUNT]) {
        self.sweep(signals, false);
        self.sweep(signals, true);
    }

    /// Both sections of every band over equally long signals, interleaving
    /// the eight independent recursions sample by sample.
    fn sweep(&self, signals: &mut [Vec<f64>; BAND_COUNT], reverse: bool) {
        let len = signals[0].len();
        assert!(signals.iter().all(|s| s.len() == len), "band signals must have equal length");
        let coeff = |f: fn(&Biquad) -> f64| -> [[f64; 2]; BAND_COUNT] {
            std::array::from_fn(|b| [f(&self.sections[b][0]), f(&self.sections[b][1])])
        };
        let (b0, b1, b2, a1, a2) = (coeff(|s| s.b0), coeff(|s| s.b1), coeff(|s| s.b2), coeff(|s| s.a1), coeff(|s| s.a2));
        let mut s1 = [[0.0f64; 2]; BAND_COUNT];
        let mut s2 = [[0.0f64; 2]; BAND_COUNT];
        let mut step = |n: usize| {
            for (band, signal) in signals.iter_mut().enumerate() {
                let mut x = signal[n];
                for k in 0..2 {
                    let y = b0[band][k] * x + s1[band][k];
                    s1[band][k] = flush(b1[band][k] * x - a1[band][k] * y + s2[band][k]);
                    s2[band][k] = flush(b2[band][k] * x - a2[band][k] * y);
                    x = y;
                }
                signal[n] = x;
            }
        };
        if reverse {
            (0..len).rev().for_each(&mut step);
        } else {
            (0..len).for_each(&mut step);
        }
    }

    /// Magnitude of a single causal pass at `freq_hz`. The zero-phase
    /// response is the square of this value.
    pub fn magnitude(&self, band: usize, freq_hz: f64) -> f64 {
        let z_inv = Complex64::from_polar(1.0, -2.0 * PI * freq_hz / self.sample_rate);
        self.sections[band]
            .iter()
            .map(|s| s.response(z_inv))
            .product::<Complex64>()
            .norm()
    }
}

/// Zero-phase octave-band analysis of `signal` (62.5 Hz ... 8 kHz).
pub fn octave_filter_bank(signal: &[f64], sample_rate: f64) -> Result<[Vec<f64>; BAND_COUNT]> {
    Ok(OctaveFilterBank::new(sample_rate)?.analyze(signal))
}

fn design_band(band: usize, fs: f64) -> [Biquad; 2] {
    let (lo, hi) = band_edges(band);
    let warp = |f: f64| 2.0 * fs * (PI * f / fs).tan();
    let (w_lo, w_hi) = (warp(lo), warp(hi));
    let w0_sq = w_lo * w_hi;
    let bw = w_hi - w_lo;

    // Second-order Butterworth low-pass prototype pole; its conjugate yields
    // the conjugate band-pass poles.
    let proto = Complex64::from_polar(1.0, 3.0 * PI / 4.0);
    let pb = proto * bw;
    let disc = (pb * pb - 4.0 * w0_sq).sqrt();
    let analog = [(pb + disc) * 0.5, (pb - disc) * 0.5];

    let mut sections = analog.map(|s| {
        let z = (2.0 * fs + s) / (2.0 * fs - s);
        Biquad { b0: 1.0, b1: 0.0, b2: -1.0, a1: -2.0 * z.re, a2: z.norm_sqr() }
    });

    // Unit gain at the (digital) centre frequency.
    let w_center = 2.0 * (w0_sq.sqrt() / (2.0 * fs)).atan();
    let z_inv = Complex64::from_polar(1.0, -w_center);
    let gain: f64 = sections.iter().map(|s| s.response(z_inv).norm()).product();
    let per_section = gain.sqrt().recip();
    for s in &mut sections {
        s.b0 *= per_section;
        s.b2 *= per_section;
    }
    debug_assert!(BAND_CENTERS_HZ[band] > 0.0);
    sections
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};

    fn energy(x: &[f64]) -> f64 {
        x.iter().map(|v| v * v).sum()
    }

    #[test]
    fn multi_band_sweep_matches_single_band_filtering() {
        let bank = OctaveFilterBank::new(48000.0).unwrap();
        let signal: Vec<f64> = (0..3000).map(|i| ((i * 7919) % 101) as f64 / 50.0 - 1.0).collect();
        let fused = bank.analyze(&signal);
        let mut causal: [Vec<f64>; BAND_COUNT] = std::array::from_fn(|_| signal.clone());
        bank.filter_causal_bands_in_place(&mut causal);
        for band in 0..BAND_COUNT {
            let mut single = signal.clone();
            bank.filter_zero_phase_in_place(band, &mut single);
            assert_eq!(fused[band], single);
            let mut single = signal.clone();
            bank.filter_causal_in_place(band, &mut single);
            assert_eq!(causal[band], single);
        }
    }

    #[test]
    fn butterworth_edges_are_half_power() {
        let bank = OctaveFilterBank::new(48_000.0).unwrap();
        for band in 0..BAND_COUNT {
            let (lo, hi) = band_edges(band);
            let fc = BAND_CENTERS_HZ[band];
            assert!((bank.magnitude(band, fc) - 1.0).abs() < 0.02, "band {band} centre");
            for edge in [lo, hi] {
                let m = bank.magnitude(band, edge);
                assert!((m - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-9, "band {band}: {m}");
            }
        }
    }

    #[test]
    fn sections_are_stable() {
        let bank = OctaveFilterBank::new(44_100.0).unwrap();
        for band in 0..BAND_COUNT {
            for s in bank.sections(band) {
                // Both poles inside the unit circle.
                assert!(s.a2 < 1.0 && s.a2 > 0.0);
                assert!(s.a1.abs() < 1.0 + s.a2);
            }
        }
    }

    #[test]
    fn low_rate_rejected() {
        assert!(matches!(OctaveFilterBank::new(16_000.0), Err(Error::RateTooLow(_))));
        assert!(OctaveFilterBank::new(24_000.0).is_ok());
    }

    #[test]
    fn zero_signal_gives_zero_bands() {
        let bands = octave_filter_bank(&vec![0.0; 512], 48_000.0).unwrap();
        assert!(bands.iter().all(|b| b.len() == 512 && b.iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn sine_energy_lands_in_its_band() {
        let fs = 48_000.0;
        let x: Vec<f64> =
            (0..48_000).map(|n| (2.0 * PI * 1000.0 * n as f64 / fs).sin()).collect();
        let bands = octave_filter_bank(&x, fs).unwrap();
        let energies: Vec<f64> = bands.iter().map(|b| energy(b)).collect();
        let total: f64 = energies.iter().sum();
        assert!(energies[4] / total >= 0.95, "{:?}", energies);
    }

    #[test]
    fn white_noise_band_shares() {
        let fs = 48_000.0;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let x: Vec<f64> = (0..(10.0 * fs) as usize).map(|_| StandardNormal.sample(&mut rng)).collect();
        let e_in = energy(&x);
        let bands = octave_filter_bank(&x, fs).unwrap();
        let e: Vec<f64> = bands.iter().map(|b| energy(b)).collect();
        for band in 0..BAND_COUNT {
            let (lo, hi) = band_edges(band);
            let ideal = e_in * (hi - lo) / (fs / 2.0);
            let db = 10.0 * (e[band] / ideal).log10();
            assert!(db.abs() <= 1.5, "band {band}: {db:.2} dB");
        }
        for band in 1..BAND_COUNT {
            let db = 10.0 * (e[band] / e[band - 1]).log10();
            assert!((db - 10.0 * 2f64.log10()).abs() <= 1.5, "ratio {band}: {db:.2} dB");
        }
        let covered = e_in * (band_edges(7).1 - band_edges(0).0) / (fs / 2.0);
        let db = 10.0 * (e.iter().sum::<f64>() / covered).log10();
        assert!(db.abs() <= 2.0, "energy completeness {db:.2} dB");
    }
}
