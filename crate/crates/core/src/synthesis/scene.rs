use serde::{Deserialize, Serialize};

use crate::bands::{BandValues, BAND_COUNT};
use crate::context::{AcousticParameterVector, CalibrationEntry, RtModel};
use crate::error::{Error, Result};
use crate::geometry::{Face, ShoeboxModel, Vec3};
use crate::material::{blend_absorption, AbsorptionSpectrum, MaterialLibrary, SurfaceMaterialProfile};
use crate::metrics::{rt60_from_energy, OctaveFilterBank};
use crate::synthesis::compose::{compose_rir, render_early, DirectPath, LateComponent, RoomImpulseResponse};
use crate::synthesis::eyring::{eyring_rt60, refine_rt60, refine_rt60_shape};
use crate::synthesis::ism::{compute_image_sources, synthesize_early, ReflectionTap};
use crate::synthesis::late::{shaped_tail, synthesize_late_with, LateReverbSpec};

/// Earliest late onset after the direct arrival, seconds.
pub const MIXING_TIME: f64 = 0.080;
/// Gap between the last early tap and the late onset, seconds.
pub const ONSET_GAP: f64 = 0.005;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthesisConfig {
    pub sample_rate: f64,
    pub max_order: usize,
    pub speed_of_sound: f64,
    pub seed: u64,
    pub channels: usize,
    /// Fixed response length in seconds; derived from the RT60s when unset.
    pub rir_length: Option<f64>,
}

impl Default for SynthesisConfig {
    fn default() -> Self {
        Self { sample_rate: 48000.0, max_order: 2, speed_of_sound: 343.0, seed: 0, channels: 1, rir_length: None }
    }
}

/// Room geometry with one absorption spectrum per face.
#[derive(Debug, Clone, PartialEq)]
pub struct RoomAcoustics {
    pub shoebox: ShoeboxModel,
    pub faces: [AbsorptionSpectrum; 6],
}

impl RoomAcoustics {
    pub fn uniform(shoebox: ShoeboxModel, spectrum: AbsorptionSpectrum) -> Self {
        Self { shoebox, faces: [spectrum; 6] }
    }

    /// Blends each face profile (indexed by face id) through the library.
    pub fn from_profiles(
        shoebox: ShoeboxModel,
        profiles: &[SurfaceMaterialProfile],
        library: &MaterialLibrary,
    ) -> Result<Self> {
        let mut faces = [library.default_reflective(); 6];
        for face in Face::ALL {
            if let Some(profile) = profiles.iter().find(|p| p.face == face) {
                faces[face.id()] = blend_absorption(profile, library)?;
            }
        }
        Ok(Self { shoebox, faces })
    }

    pub fn eyring_rt60(&self) -> Result<BandValues> {
        eyring_rt60(&self.shoebox, &self.faces)
    }

    pub fn face_reflection(&self) -> [BandValues; 6] {
        self.faces.map(|f| f.reflection_amplitudes())
    }
}

/// Where the baseline reverberation time comes from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DecayModel {
    Eyring,
    Fixed(BandValues),
}

/// Late onset: the mixing time after the direct sound, or just after the
/// last early tap if that is later.
pub fn late_onset(direct: &DirectPath, early: &[ReflectionTap]) -> f64 {
    let last_early = early.iter().map(|t| t.delay).fold(f64::NEG_INFINITY, f64::max);
    (direct.delay + MIXING_TIME).max(last_early + ONSET_GAP)
}

/// Response length covering the onset and 1.2 times the longest RT60.
pub fn default_length(onset: f64, rt60: &BandValues) -> f64 {
    let longest = rt60.iter().copied().fold(0.0, f64::max);
    onset + (1.2 * longest).clamp(0.3, 10.0)
}

/// Seed of the late tail on one output channel.
pub fn channel_seed(seed: u64, channel: usize) -> u64 {
    seed.wrapping_add((channel as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

/// Direct, early and late parts for one source.
struct Parts {
    direct: DirectPath,
    early: Vec<ReflectionTap>,
    onset: f64,
    rt60: BandValues,
    baseline: BandValues,
    length: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthesizedRir {
    pub rir: RoomImpulseResponse,
    /// Refined per-band RT60 target of the late tail.
    pub rt60: BandValues,
    pub baseline: BandValues,
}

/// Responses for a multi-source scene: direct plus early part per source,
/// and one late part shared by all sources.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneRirs {
    pub sources: Vec<RoomImpulseResponse>,
    pub late: RoomImpulseResponse,
    pub rt60: BandValues,
}

/// Scene-level synthesis with a reusable filter bank.
#[derive(Debug, Clone)]
pub struct Synthesizer {
    bank: OctaveFilterBank,
    config: SynthesisConfig,
}

impl Synthesizer {
    pub fn new(config: SynthesisConfig) -> Result<Self> {
        if !(1..=2).contains(&config.channels) {
            return Err(Error::InvalidConfig(format!("{} channels requested; 1 or 2 supported", config.channels)));
        }
        if !(config.speed_of_sound > 0.0) {
            return Err(Error::InvalidConfig("speed of sound must be positive".into()));
        }
        Ok(Self { bank: OctaveFilterBank::new(config.sample_rate)?, config })
    }

    pub fn config(&self) -> &SynthesisConfig {
        &self.config
    }

    pub fn bank(&self) -> &OctaveFilterBank {
        &self.bank
    }

    fn parts(
        &self,
        room: &RoomAcoustics,
        source: &Vec3,
        listener: &Vec3,
        params: &AcousticParameterVector,
        decay: &DecayModel,
    ) -> Result<Parts> {
        params.validate()?;
        let baseline = match decay {
            DecayModel::Eyring => room.eyring_rt60()?,
            DecayModel::Fixed(rt) => *rt,
        };
        let images = compute_image_sources(&room.shoebox, source, self.config.max_order, &room.face_reflection())?;
        let early =
            synthesize_early(&images, listener, &room.shoebox, params.reflection_gain, self.config.speed_of_sound);
        let direct = DirectPath::between(source, listener, self.config.speed_of_sound);
        let onset = late_onset(&direct, &early);
        let rt60 = refine_rt60(&baseline, params);
        let length = self.config.rir_length.unwrap_or_else(|| default_length(onset, &rt60)).max(onset);
        Ok(Parts { direct, early, onset, rt60, baseline, length })
    }

    fn late(&self, parts: &Parts, gain: f64) -> Result<LateComponent> {
        let buffers = (0..self.config.channels)
            .map(|c| {
                let spec = LateReverbSpec::new(parts.rt60, gain, parts.onset, channel_seed(self.config.seed, c));
                synthesize_late_with(&self.bank, &spec, parts.length)
            })
            .collect::<Result<_>>()?;
        Ok(LateComponent { onset: parts.onset, buffers })
    }

    /// Complete response for one source and the listener, both in box
    /// coordinates.
    pub fn synthesize(
        &self,
        room: &RoomAcoustics,
        source: &Vec3,
        listener: &Vec3,
        params: &AcousticParameterVector,
        decay: &DecayModel,
    ) -> Result<SynthesizedRir> {
        let parts = self.parts(room, source, listener, params, decay)?;
        let late = self.late(&parts, params.reverb_gain)?;
        let rir = compose_rir(&parts.direct, &parts.early, &late, &self.bank, self.config.channels)?;
        Ok(SynthesizedRir { rir, rt60: parts.rt60, baseline: parts.baseline })
    }

    /// Per-source direct and early responses plus a shared late response.
    /// The late tail starts at the earliest onset among the sources.
    pub fn synthesize_scene(
        &self,
        room: &RoomAcoustics,
        sources: &[Vec3],
        listener: &Vec3,
        params: &AcousticParameterVector,
        decay: &DecayModel,
    ) -> Result<SceneRirs> {
        if sources.is_empty() {
            return Err(Error::DegenerateInput("scene has no sources".into()));
        }
        let parts: Vec<Parts> =
            sources.iter().map(|s| self.parts(room, s, listener, params, decay)).collect::<Result<_>>()?;
        let mut shared = Parts {
            direct: parts[0].direct,
            early: Vec::new(),
            onset: parts.iter().map(|p| p.onset).fold(f64::INFINITY, f64::min),
            rt60: parts[0].rt60,
            baseline: parts[0].baseline,
            length: parts.iter().map(|p| p.length).fold(0.0, f64::max),
        };
        shared.length = shared.length.max(shared.onset);
        let late_part = self.late(&shared, params.reverb_gain)?;
        let fs = self.config.sample_rate;
        let late_onset = ((shared.onset * fs).round() as usize).min(late_part.buffers[0].len());
        let late = RoomImpulseResponse {
            sample_rate: fs.round() as u32,
            channels: late_part.buffers,
            direct_index: late_onset,
            early_end: late_onset,
            late_onset,
        };
        let sources = parts
            .iter()
            .map(|p| compose_rir(&p.direct, &p.early, &LateComponent::default(), &self.bank, self.config.channels))
            .collect::<Result<_>>()?;
        Ok(SceneRirs { sources, late, rt60: shared.rt60 })
    }
}

/// Default source and listener for a room without explicit poses: the
/// source a third of the way along the floor diagonal, the listener near
/// the centre, both at ear height where the room allows.
pub fn default_positions(dims: &Vec3) -> (Vec3, Vec3) {
    let source = Vec3::new(dims.x / 3.0, dims.y / 3.0, (0.5 * dims.z).min(1.5));
    let listener = Vec3::new(0.6 * dims.x, 0.6 * dims.y, (0.4 * dims.z).min(1.2));
    (source, listener)
}

/// Forward model for calibration: RT60 measured per band on responses
/// synthesized by a [`Synthesizer`].
///
/// Filtering is linear, so the band signals of `direct + r * early +
/// g * late` are mixed from separately filtered parts, and the backward
/// energy of every mix follows from six tabulated cross-energy curves.
/// Bands whose decay cannot be measured count as `0`.
pub struct SynthesisRtModel {
    synth: Synthesizer,
    library: MaterialLibrary,
}

impl SynthesisRtModel {
    pub fn new(config: SynthesisConfig, library: MaterialLibrary) -> Result<Self> {
        Ok(Self { synth: Synthesizer::new(config)?, library })
    }
}

pub struct PreparedEntry {
    direct: DirectPath,
    early: Vec<ReflectionTap>,
    onset: f64,
    baseline: BandValues,
    seed: u64,
}

const CALIBRATION_FIT_POINTS: usize = 4096;

fn backward_cross(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + 1];
    for i in (0..a.len()).rev() {
        out[i] = out[i + 1] + a[i] * b[i];
    }
    out
}

impl RtModel for SynthesisRtModel {
    type Prepared = PreparedEntry;

    fn prepare(&self, entry: &CalibrationEntry) -> Result<PreparedEntry> {
        let room = RoomAcoustics::from_profiles(entry.shoebox.clone(), &entry.profiles, &self.library)?;
        let (default_source, default_listener) = default_positions(&entry.shoebox.dimensions());
        let source = entry.source.unwrap_or(default_source);
        let listener = entry.listener.unwrap_or(default_listener);
        let unit = AcousticParameterVector { reflection_gain: 1.0, ..AcousticParameterVector::neutral() };
        let parts = self.synth.parts(&room, &source, &listener, &unit, &DecayModel::Eyring)?;
        Ok(PreparedEntry {
            direct: parts.direct,
            early: parts.early,
            onset: parts.onset,
            baseline: parts.baseline,
            seed: self.synth.config.seed,
        })
    }

    fn band_rt60_levels(
        &self,
        prepared: &PreparedEntry,
        rt_modulator: f64,
        reverb_brightness: f64,
        levels: &[(f64, f64)],
    ) -> Result<Vec<BandValues>> {
        let bank = &self.synth.bank;
        let fs = bank.sample_rate();
        let rt60 = refine_rt60_shape(&prepared.baseline, rt_modulator, reverb_brightness);
        let length = self.synth.config.rir_length.unwrap_or_else(|| default_length(prepared.onset, &rt60));
        let len = (length.max(prepared.onset) * fs).round() as usize;
        let onset = ((prepared.onset * fs).round() as usize).min(len);
        let direct_index = (prepared.direct.delay * fs).round() as usize;
        let len = len.max(direct_index + 1);

        let mut direct = vec![0.0; len];
        direct[direct_index] = prepared.direct.amplitude;
        let early = render_early(bank, &prepared.early, len);
        let mut late = vec![0.0; len];
        if onset < len {
            let tail = shaped_tail(bank, &rt60, len - onset, prepared.seed);
            let norm = tail.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > 0.0 {
                for (o, t) in late[onset..].iter_mut().zip(&tail) {
                    *o = t / norm;
                }
            }
        }

        let mut out = vec![[0.0; BAND_COUNT]; levels.len()];
        let analyze = |signal: &[f64]| {
            let mut bands = bank.analyze(signal);
            // Keeps the cross products below out of subnormal range.
            bands.iter_mut().flatten().filter(|v| v.abs() < 1e-150).for_each(|v| *v = 0.0);
            bands
        };
        let (d_bands, e_bands, l_bands) = (analyze(&direct), analyze(&early), analyze(&late));
        for band in 0..BAND_COUNT {
            let (d, e, l) = (&d_bands[band], &e_bands[band], &l_bands[band]);
            let curves = [
                backward_cross(d, d),
                backward_cross(e, e),
                backward_cross(l, l),
                backward_cross(d, e),
                backward_cross(d, l),
                backward_cross(e, l),
            ];
            for (slot, &(g, r)) in out.iter_mut().zip(levels) {
                let k = [1.0, r * r, g * g, 2.0 * r, 2.0 * g, 2.0 * r * g];
                let energy = |i: usize| (0..6).map(|c| k[c] * curves[c][i]).sum::<f64>().max(0.0);
                slot[band] = rt60_from_energy(energy, len, fs, CALIBRATION_FIT_POINTS).map_or(0.0, |d| d.seconds);
            }
        }
        Ok(out)
    }
}
