//! Schroeder backward integration and ISO 3382-1 style decay-time fits.

use serde::{Deserialize, Serialize};

use crate::bands::BAND_COUNT;
use crate::error::{Error, Result};
use crate::metrics::filterbank::OctaveFilterBank;

/// Backward-integrated energy decay in dB, normalized to 0 dB at the first
/// sample. The curve stops at the last sample that still carries energy.
#[derive(Debug, Clone, PartialEq)]
pub struct DecayCurve {
    sample_rate: f64,
    levels_db: Vec<f64>,
}

impl DecayCurve {
    /// Builds a curve from explicit levels. The first level must be 0 dB and
    /// the sequence must not increase.
    pub fn from_levels(levels_db: Vec<f64>, sample_rate: f64) -> Result<Self> {
        if levels_db.is_empty() || !(sample_rate > 0.0) {
            return Err(Error::InvalidLength("decay curve needs at least one level".into()));
        }
        if levels_db[0].abs() > 1e-9 {
            return Err(Error::DegenerateInput("decay curve must start at 0 dB".into()));
        }
        if levels_db.windows(2).any(|w| !(w[1] <= w[0])) {
            return Err(Error::DegenerateInput("decay curve must be non-increasing".into()));
        }
        Ok(Self { sample_rate, levels_db })
    }

    pub fn levels_db(&self) -> &[f64] {
        &self.levels_db
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.levels_db.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels_db.is_empty()
    }

    pub fn time(&self, index: usize) -> f64 {
        index as f64 / self.sample_rate
    }

    fn first_at_or_below(&self, level_db: f64) -> Option<usize> {
        self.levels_db.iter().position(|&l| l <= level_db)
    }

    /// Least-squares slope in dB/s over samples `start..=end`.
    fn slope(&self, start: usize, end: usize) -> Option<f64> {
        if end <= start {
            return None;
        }
        let n = (end - start + 1) as f64;
        let t_mean = (start + end) as f64 / 2.0 / self.sample_rate;
        let l_mean = self.levels_db[start..=end].iter().sum::<f64>() / n;
        let (mut sxy, mut sxx) = (0.0, 0.0);
        for (i, &l) in self.levels_db[start..=end].iter().enumerate() {
            let dt = (start + i) as f64 / self.sample_rate - t_mean;
            sxy += dt * (l - l_mean);
            sxx += dt * dt;
        }
        let slope = sxy / sxx;
        (slope.is_finite() && slope < 0.0).then_some(slope)
    }

    fn decay_time(&self, from_db: f64, to_db: f64, range: FitRange) -> Option<DecayTime> {
        let start = if from_db >= 0.0 { 0 } else { self.first_at_or_below(from_db)? };
        let end = self.first_at_or_below(to_db)?;
        let slope = self.slope(start, end)?;
        Some(DecayTime { seconds: -60.0 / slope, range })
    }
}

/// Which segment of the decay curve a decay time was fitted on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FitRange {
    /// -5 dB to -35 dB, extrapolated x2.
    T30,
    /// -5 dB to -25 dB, extrapolated x3.
    T20,
    /// 0 dB to -10 dB, extrapolated x6.
    Edt,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayTime {
    pub seconds: f64,
    pub range: FitRange,
}

/// Schroeder curve `10 log10( sum_{tau >= t} h^2 / sum h^2 )`.
pub fn schroeder_decay(band_rir: &[f64], sample_rate: f64) -> Result<DecayCurve> {
    if band_rir.iter().any(|v| !v.is_finite()) {
        return Err(Error::DegenerateInput("non-finite sample in impulse response".into()));
    }
    let last = band_rir.iter().rposition(|&v| v != 0.0).ok_or(Error::ZeroEnergy)?;
    let mut remaining = vec![0.0; last + 1];
    let mut acc = 0.0;
    for i in (0..=last).rev() {
        acc += band_rir[i] * band_rir[i];
        remaining[i] = acc;
    }
    let total = remaining[0];
    if !(total > 0.0) {
        return Err(Error::ZeroEnergy);
    }
    let levels = remaining.iter().map(|&e| 10.0 * (e / total).log10()).collect();
    Ok(DecayCurve { sample_rate, levels_db: levels })
}

/// T30 with a T20 fallback; `None` when the curve never reaches -25 dB.
pub fn rt60_from_decay(curve: &DecayCurve) -> Option<DecayTime> {
    curve
        .decay_time(-5.0, -35.0, FitRange::T30)
        .or_else(|| curve.decay_time(-5.0, -25.0, FitRange::T20))
}

/// Early decay time from the 0 to -10 dB segment.
pub fn edt_from_decay(curve: &DecayCurve) -> Option<DecayTime> {
    curve.decay_time(0.0, -10.0, FitRange::Edt)
}

/// RT60 (T30, T20 fallback) from a backward energy function
/// `energy(i) = sum_{tau >= i} h^2(tau)` over `len` samples.
///
/// Level crossings are located by bisection and the line is fitted on at
/// most `max_points` evenly spaced samples of each segment, so the cost is
/// independent of the signal length once the energy is tabulated.
pub fn rt60_from_energy(energy: impl Fn(usize) -> f64, len: usize, sample_rate: f64, max_points: usize) -> Option<DecayTime> {
    let total = energy(0);
    if len == 0 || !(total > 0.0) || !total.is_finite() {
        return None;
    }
    // Last sample that still carries energy, as in `schroeder_decay`.
    let end_of_curve = first_index(len, |i| !(energy(i) > 0.0)).unwrap_or(len) - 1;
    let crossing = |level_db: f64| {
        let threshold = total * 10f64.powf(level_db / 10.0);
        first_index(end_of_curve + 1, |i| energy(i) <= threshold)
    };
    let fit = |from_db: f64, to_db: f64, range: FitRange| -> Option<DecayTime> {
        let start = crossing(from_db)?;
        let end = crossing(to_db)?;
        if end <= start {
            return None;
        }
        let step = ((end - start) / max_points.max(2)).max(1);
        let points: Vec<(f64, f64)> = (start..=end)
            .step_by(step)
            .chain(std::iter::once(end))
            .collect::<std::collections::BTreeSet<_>>()
            .into_iter()
            .map(|i| (i as f64 / sample_rate, 10.0 * (energy(i) / total).log10()))
            .collect();
        let n = points.len() as f64;
        let t_mean = points.iter().map(|p| p.0).sum::<f64>() / n;
        let l_mean = points.iter().map(|p| p.1).sum::<f64>() / n;
        let (sxy, sxx) = points.iter().fold((0.0, 0.0), |(sxy, sxx), &(t, l)| {
            (sxy + (t - t_mean) * (l - l_mean), sxx + (t - t_mean) * (t - t_mean))
        });
        let slope = sxy / sxx;
        (slope.is_finite() && slope < 0.0).then(|| DecayTime { seconds: -60.0 / slope, range })
    };
    fit(-5.0, -35.0, FitRange::T30).or_else(|| fit(-5.0, -25.0, FitRange::T20))
}

/// First index in `0..len` where a monotone predicate becomes true.
fn first_index(len: usize, pred: impl Fn(usize) -> bool) -> Option<usize> {
    let (mut lo, mut hi) = (0, len);
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        if pred(mid) {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    (lo < len).then_some(lo)
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct BandMetrics {
    pub rt60: Option<DecayTime>,
    pub edt: Option<DecayTime>,
}

impl BandMetrics {
    pub fn rt60_seconds(&self) -> Option<f64> {
        self.rt60.map(|d| d.seconds)
    }

    pub fn edt_seconds(&self) -> Option<f64> {
        self.edt.map(|d| d.seconds)
    }
}

/// Metrics of a signal that is already band-limited.
pub fn band_metrics(band_signal: &[f64], sample_rate: f64) -> BandMetrics {
    match schroeder_decay(band_signal, sample_rate) {
        Ok(curve) => BandMetrics { rt60: rt60_from_decay(&curve), edt: edt_from_decay(&curve) },
        Err(_) => BandMetrics::default(),
    }
}

/// Per-band RT60/EDT of a broadband impulse response.
pub fn measure_rir(rir: &[f64], sample_rate: f64) -> Result<[BandMetrics; BAND_COUNT]> {
    let bank = OctaveFilterBank::new(sample_rate)?;
    Ok(measure_rir_with(&bank, rir))
}

pub fn measure_rir_with(bank: &OctaveFilterBank, rir: &[f64]) -> [BandMetrics; BAND_COUNT] {
    let bands = bank.analyze(rir);
    std::array::from_fn(|band| band_metrics(&bands[band], bank.sample_rate()))
}
