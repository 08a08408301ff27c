use crate::bands::{BandValues, BAND_CENTERS_HZ, BAND_COUNT};
use crate::context::AcousticParameterVector;
use crate::error::Result;
use crate::geometry::{Face, ShoeboxModel};
use crate::material::AbsorptionSpectrum;

pub const MIN_RT60: f64 = 0.01;
pub const MAX_RT60: f64 = 10.0;

/// Area-weighted mean absorption of the six faces, per band.
pub fn mean_absorption(shoebox: &ShoeboxModel, faces: &[AbsorptionSpectrum; 6]) -> BandValues {
    let total = shoebox.total_area();
    std::array::from_fn(|b| {
        Face::ALL.iter().map(|&f| shoebox.face_area(f) * faces[f.id()].values()[b]).sum::<f64>() / total
    })
}

/// Eyring reverberation time per band, clamped to `[MIN_RT60, MAX_RT60]`.
pub fn eyring_rt60(shoebox: &ShoeboxModel, faces: &[AbsorptionSpectrum; 6]) -> Result<BandValues> {
    shoebox.validate()?;
    let volume = shoebox.volume();
    let area = shoebox.total_area();
    Ok(mean_absorption(shoebox, faces).map(|alpha| {
        let alpha = alpha.clamp(0.01, 0.99);
        (0.161 * volume / (-area * (1.0 - alpha).ln())).clamp(MIN_RT60, MAX_RT60)
    }))
}

/// Brightness tilt factor for one band, `1` at 1 kHz.
pub fn brightness_tilt(brightness: f64, band: usize) -> f64 {
    1.0 + brightness * (BAND_CENTERS_HZ[band] / 1000.0).log2() / 3.5
}

/// Applies the time modulator and brightness tilt to baseline RT60s.
pub fn refine_rt60(baseline: &BandValues, params: &AcousticParameterVector) -> BandValues {
    refine_rt60_shape(baseline, params.rt_modulator, params.reverb_brightness)
}

pub(crate) fn refine_rt60_shape(baseline: &BandValues, modulator: f64, brightness: f64) -> BandValues {
    let mut out = [0.0; BAND_COUNT];
    for b in 0..BAND_COUNT {
        out[b] = (baseline[b] * modulator * brightness_tilt(brightness, b)).clamp(MIN_RT60, MAX_RT60);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Vec3;
    use approx::assert_relative_eq;

    fn uniform(alpha: f64) -> [AbsorptionSpectrum; 6] {
        [AbsorptionSpectrum::flat(alpha).unwrap(); 6]
    }

    fn room() -> ShoeboxModel {
        ShoeboxModel::from_dimensions(Vec3::new(5.0, 4.0, 3.0)).unwrap()
    }

    #[test]
    fn hand_evaluated_room() {
        let rt = eyring_rt60(&room(), &uniform(0.2)).unwrap();
        let expected = 9.66 / (94.0 * -(0.8f64).ln());
        for t in rt {
            assert_relative_eq!(t, expected, max_relative = 1e-12);
            assert!((t - 0.4605).abs() < 5e-5);
        }
    }

    #[test]
    fn clamps() {
        let high = eyring_rt60(&room(), &uniform(1.0)).unwrap();
        assert_relative_eq!(high[0], 9.66 / (94.0 * 100f64.ln()), max_relative = 1e-12);
        assert!((high[0] - 0.0223).abs() < 1e-4);
        assert_eq!(eyring_rt60(&room(), &uniform(0.0)).unwrap(), [10.0; 8]);
    }

    #[test]
    fn refinement() {
        let base = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8];
        assert_eq!(refine_rt60(&base, &AcousticParameterVector::new(0.1, 1.0, 0.0, 1.0).unwrap()), base);
        let halved = refine_rt60(&base, &AcousticParameterVector::new(0.1, 0.5, 0.0, 1.0).unwrap());
        for b in 0..8 {
            assert_relative_eq!(halved[b], base[b] * 0.5, max_relative = 1e-15);
        }
        let bright = refine_rt60(&[1.0; 8], &AcousticParameterVector::new(0.1, 1.0, 0.35, 1.0).unwrap());
        assert_relative_eq!(bright[7], 1.3, max_relative = 1e-12);
        assert_relative_eq!(bright[4], 1.0, max_relative = 1e-15);
    }
}
