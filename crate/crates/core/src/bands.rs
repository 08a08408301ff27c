//! The eight octave bands shared by absorption spectra, decay times and
//! the analysis filter bank.

pub const BAND_COUNT: usize = 8;

/// Nominal octave-band centre frequencies in Hz.
pub const BAND_CENTERS_HZ: [f64; BAND_COUNT] =
    [62.5, 125.0, 250.0, 500.0, 1000.0, 2000.0, 4000.0, 8000.0];

/// One value per octave band, lowest band first.
pub type BandValues = [f64; BAND_COUNT];

/// Lower and upper edge of a band: `[fc / sqrt(2), fc * sqrt(2)]`.
pub fn band_edges(band: usize) -> (f64, f64) {
    let fc = BAND_CENTERS_HZ[band];
    (fc / std::f64::consts::SQRT_2, fc * std::f64::consts::SQRT_2)
}

/// Short label used in reports ("62.5", "125", ..., "8000").
pub fn band_label(band: usize) -> String {
    let fc = BAND_CENTERS_HZ[band];
    if fc.fract() == 0.0 {
        format!("{}", fc as u32)
    } else {
        format!("{fc}")
    }
}

pub fn band_index(label: &str) -> Option<usize> {
    (0..BAND_COUNT).find(|&b| band_label(b) == label)
}
