//! Surface materials: absorption library, per-face material profiles built
//! from segmentation observations, and blended face absorption.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::bands::{BandValues, BAND_COUNT};
use crate::error::{Error, Result};
use crate::geometry::{Face, Pose, ShoeboxModel, Vec3};

/// Maximum number of materials tracked per face.
pub const MAX_PROFILE_ENTRIES: usize = 10;

const BUILTIN_LIBRARY: &str = include_str!("../data/materials.tsv");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaterialClass {
    ConcreteBrick,
    Glass,
    WoodPanel,
    Carpet,
    HeavyCurtain,
    PlasterDrywall,
    AcousticTile,
    Metal,
    Other,
    DefaultReflective,
}

impl MaterialClass {
    pub const ALL: [MaterialClass; 10] = [
        MaterialClass::ConcreteBrick,
        MaterialClass::Glass,
        MaterialClass::WoodPanel,
        MaterialClass::Carpet,
        MaterialClass::HeavyCurtain,
        MaterialClass::PlasterDrywall,
        MaterialClass::AcousticTile,
        MaterialClass::Metal,
        MaterialClass::Other,
        MaterialClass::DefaultReflective,
    ];

    pub fn label(self) -> &'static str {
        match self {
            MaterialClass::ConcreteBrick => "concrete_brick",
            MaterialClass::Glass => "glass",
            MaterialClass::WoodPanel => "wood_panel",
            MaterialClass::Carpet => "carpet",
            MaterialClass::HeavyCurtain => "heavy_curtain",
            MaterialClass::PlasterDrywall => "plaster_drywall",
            MaterialClass::AcousticTile => "acoustic_tile",
            MaterialClass::Metal => "metal",
            MaterialClass::Other => "other",
            MaterialClass::DefaultReflective => "default_reflective",
        }
    }
}

impl fmt::Display for MaterialClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for MaterialClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .iter()
            .copied()
            .find(|c| c.label() == s)
            .ok_or_else(|| Error::UnknownMaterial(s.to_string()))
    }
}

/// Per-band energy absorption coefficients in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "BandValues", into = "BandValues")]
pub struct AbsorptionSpectrum(BandValues);

impl AbsorptionSpectrum {
    pub fn new(values: BandValues) -> Result<Self> {
        if let Some(bad) = values.iter().find(|a| !(0.0..=1.0).contains(*a)) {
            return Err(Error::DegenerateInput(format!("absorption coefficient {bad} outside [0, 1]")));
        }
        Ok(Self(values))
    }

    pub fn flat(alpha: f64) -> Result<Self> {
        Self::new([alpha; BAND_COUNT])
    }

    pub fn values(&self) -> &BandValues {
        &self.0
    }

    /// Pressure reflection amplitude `sqrt(1 - alpha)` per band.
    pub fn reflection_amplitudes(&self) -> BandValues {
        self.0.map(|a| (1.0 - a).sqrt())
    }
}

impl TryFrom<BandValues> for AbsorptionSpectrum {
    type Error = Error;

    fn try_from(values: BandValues) -> Result<Self> {
        Self::new(values)
    }
}

impl From<AbsorptionSpectrum> for BandValues {
    fn from(s: AbsorptionSpectrum) -> Self {
        s.0
    }
}

/// Absorption spectrum for every material class.
#[derive(Debug, Clone, PartialEq)]
pub struct MaterialLibrary {
    spectra: BTreeMap<MaterialClass, AbsorptionSpectrum>,
}

impl MaterialLibrary {
    /// The library shipped with the crate.
    pub fn builtin() -> Self {
        Self::parse(BUILTIN_LIBRARY).expect("builtin material library is well formed")
    }

    /// Parses whitespace-separated rows `class a1 .. a8`. Blank lines and
    /// lines starting with `#` are skipped. Every class must appear once.
    pub fn parse(text: &str) -> Result<Self> {
        let mut spectra = BTreeMap::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut fields = line.split_whitespace();
            let class: MaterialClass = fields.next().unwrap_or_default().parse()?;
            let values: Vec<f64> = fields
                .map(|f| f.parse::<f64>().map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 1))))
                .collect::<Result<_>>()?;
            let values: BandValues = values.try_into().map_err(|v: Vec<f64>| {
                Error::Parse(format!("line {}: expected {BAND_COUNT} values, found {}", lineno + 1, v.len()))
            })?;
            let spectrum =
                AbsorptionSpectrum::new(values).map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 1)))?;
            if spectra.insert(class, spectrum).is_some() {
                return Err(Error::Parse(format!("line {}: duplicate class {class}", lineno + 1)));
            }
        }
        if let Some(missing) = MaterialClass::ALL.iter().find(|c| !spectra.contains_key(c)) {
            return Err(Error::Parse(format!("material library lacks class {missing}")));
        }
        Ok(Self { spectra })
    }

    pub fn to_text(&self) -> String {
        let mut out = String::from("# class\t62.5\t125\t250\t500\t1000\t2000\t4000\t8000\n");
        for (class, spectrum) in &self.spectra {
            out.push_str(class.label());
            for a in spectrum.values() {
                out.push_str(&format!("\t{a}"));
            }
            out.push('\n');
        }
        out
    }

    pub fn get(&self, class: MaterialClass) -> Result<&AbsorptionSpectrum> {
        self.spectra.get(&class).ok_or_else(|| Error::UnknownMaterial(class.to_string()))
    }

    pub fn default_reflective(&self) -> AbsorptionSpectrum {
        self.spectra.get(&MaterialClass::DefaultReflective).copied().unwrap_or(AbsorptionSpectrum([0.05; BAND_COUNT]))
    }

    /// Library with an arbitrary subset of classes, for callers that
    /// assemble spectra programmatically.
    pub fn from_entries(entries: impl IntoIterator<Item = (MaterialClass, AbsorptionSpectrum)>) -> Self {
        Self { spectra: entries.into_iter().collect() }
    }
}

fn default_visible_pixels() -> f64 {
    1.0
}

/// Share of one face's visible pixels labeled with one material in one frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaterialObservation {
    pub face: Face,
    pub material: MaterialClass,
    pub pixel_fraction: f64,
    pub confidence: f64,
    pub timestamp: f64,
    /// Number of face pixels visible in the frame; the aggregation weight.
    #[serde(default = "default_visible_pixels")]
    pub visible_pixels: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaterialEntry {
    pub material: MaterialClass,
    pub area_ratio: f64,
    pub confidence: f64,
}

/// Material distribution of one face. `evidence` is the accumulated
/// labeled-pixel weight of the retained entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurfaceMaterialProfile {
    pub face: Face,
    pub entries: Vec<MaterialEntry>,
    pub evidence: f64,
}

impl SurfaceMaterialProfile {
    pub fn empty(face: Face) -> Self {
        Self { face, entries: Vec::new(), evidence: 0.0 }
    }

    /// Profile with given entries at confidence `1`; ratios are normalized.
    pub fn with_ratios(face: Face, ratios: &[(MaterialClass, f64)]) -> Self {
        let total: f64 = ratios.iter().map(|r| r.1).sum();
        let entries = ratios
            .iter()
            .filter(|r| r.1 > 0.0)
            .map(|&(material, r)| MaterialEntry { material, area_ratio: r / total, confidence: 1.0 })
            .collect();
        Self { face, entries, evidence: 1.0 }
    }

    pub fn area_ratio_sum(&self) -> f64 {
        self.entries.iter().map(|e| e.area_ratio).sum()
    }
}

/// Folds observations into a profile, keeping at most
/// [`MAX_PROFILE_ENTRIES`] materials.
pub fn update_profile(
    profile: &SurfaceMaterialProfile,
    observations: &[MaterialObservation],
) -> Result<SurfaceMaterialProfile> {
    update_profile_with_cap(profile, observations, MAX_PROFILE_ENTRIES)
}

/// [`update_profile`] with an explicit entry cap.
///
/// Area ratio is the pixel-weighted mean labeled fraction renormalized over
/// retained materials; confidence is the mean over labeled pixels.
pub fn update_profile_with_cap(
    profile: &SurfaceMaterialProfile,
    observations: &[MaterialObservation],
    cap: usize,
) -> Result<SurfaceMaterialProfile> {
    // (sum of w * f, sum of w * f * c) per material.
    let mut acc: BTreeMap<MaterialClass, (f64, f64)> = profile
        .entries
        .iter()
        .map(|e| {
            let wf = e.area_ratio * profile.evidence;
            (e.material, (wf, wf * e.confidence))
        })
        .collect();

    for obs in observations {
        if obs.face != profile.face {
            return Err(Error::FaceMismatch { expected: profile.face.id(), found: obs.face.id() });
        }
        let valid = (0.0..=1.0).contains(&obs.pixel_fraction)
            && (0.0..=1.0).contains(&obs.confidence)
            && obs.visible_pixels >= 0.0
            && obs.visible_pixels.is_finite();
        if !valid {
            return Err(Error::DegenerateInput(format!("invalid material observation {obs:?}")));
        }
        let wf = obs.visible_pixels * obs.pixel_fraction;
        let slot = acc.entry(obs.material).or_insert((0.0, 0.0));
        slot.0 += wf;
        slot.1 += wf * obs.confidence;
    }

    let mut ranked: Vec<(MaterialClass, f64, f64)> =
        acc.into_iter().filter(|(_, (wf, _))| *wf > 0.0).map(|(m, (wf, wfc))| (m, wf, wfc)).collect();
    // Prominence = ratio * confidence, proportional to the wfc accumulator.
    ranked.sort_by(|a, b| b.2.total_cmp(&a.2).then(b.1.total_cmp(&a.1)).then(a.0.cmp(&b.0)));
    ranked.truncate(cap);

    let evidence: f64 = ranked.iter().map(|r| r.1).sum();
    let entries = ranked
        .iter()
        .map(|&(material, wf, wfc)| MaterialEntry {
            material,
            area_ratio: wf / evidence,
            confidence: (wfc / wf).clamp(0.0, 1.0),
        })
        .collect();
    Ok(SurfaceMaterialProfile { face: profile.face, entries, evidence })
}

/// Confidence-and-area weighted mean absorption of a profile. Empty or
/// zero-weight profiles fall back to the default reflective spectrum.
pub fn blend_absorption(profile: &SurfaceMaterialProfile, library: &MaterialLibrary) -> Result<AbsorptionSpectrum> {
    let mut sum = [0.0; BAND_COUNT];
    let mut total = 0.0;
    for entry in &profile.entries {
        let spectrum = library.get(entry.material)?;
        let w = entry.area_ratio * entry.confidence;
        total += w;
        for (s, a) in sum.iter_mut().zip(spectrum.values()) {
            *s += w * a;
        }
    }
    if !(total > 0.0) {
        return Ok(library.default_reflective());
    }
    AbsorptionSpectrum::new(sum.map(|s| (s / total).clamp(0.0, 1.0)))
}

/// Pinhole camera intrinsics in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Intrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
}

/// Per-pixel material labels (row-major) with per-pixel confidence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentationFrame {
    pub width: usize,
    pub height: usize,
    pub labels: Vec<Option<MaterialClass>>,
    pub confidence: Vec<f64>,
}

impl SegmentationFrame {
    pub fn uniform(width: usize, height: usize, label: MaterialClass, confidence: f64) -> Self {
        Self { width, height, labels: vec![Some(label); width * height], confidence: vec![confidence; width * height] }
    }
}

/// Projects the shoebox faces into a camera frame and turns the labels on
/// each visible face into observations.
///
/// The camera looks along its local `+z` with `+x` right and `+y` down.
/// Each pixel ray is assigned to the nearest front-facing face it hits, so
/// faces occlude each other correctly.
pub fn project_face_coverage(
    shoebox: &ShoeboxModel,
    camera: &Pose,
    intrinsics: &Intrinsics,
    segmentation: &SegmentationFrame,
    timestamp: f64,
) -> Result<Vec<MaterialObservation>> {
    if !(intrinsics.fx > 0.0 && intrinsics.fy > 0.0) {
        return Err(Error::DegenerateInput("focal lengths must be positive".into()));
    }
    let pixels = intrinsics.width * intrinsics.height;
    if segmentation.width != intrinsics.width
        || segmentation.height != intrinsics.height
        || segmentation.labels.len() != pixels
        || segmentation.confidence.len() != pixels
    {
        return Err(Error::DegenerateInput("segmentation size does not match intrinsics".into()));
    }

    let to_local = shoebox.world_to_local_rotation();
    let origin = shoebox.to_box(&camera.position);
    let dims = shoebox.dimensions();

    // Per face: projected pixel count, and per material (count, confidence sum).
    let mut projected = [0usize; 6];
    let mut labeled: [BTreeMap<MaterialClass, (usize, f64)>; 6] = Default::default();

    for v in 0..intrinsics.height {
        for u in 0..intrinsics.width {
            let ray_cam = Vector3::new(
                (u as f64 + 0.5 - intrinsics.cx) / intrinsics.fx,
                (v as f64 + 0.5 - intrinsics.cy) / intrinsics.fy,
                1.0,
            );
            let dir = to_local * (camera.orientation * ray_cam);
            let Some(face) = nearest_face(&origin, &dir, &dims) else { continue };
            projected[face.id()] += 1;
            let idx = v * intrinsics.width + u;
            if let Some(material) = segmentation.labels[idx] {
                let slot = labeled[face.id()].entry(material).or_insert((0, 0.0));
                slot.0 += 1;
                slot.1 += segmentation.confidence[idx];
            }
        }
    }

    let mut out = Vec::new();
    for face in Face::ALL {
        let total = projected[face.id()];
        if total == 0 {
            continue;
        }
        for (&material, &(count, conf_sum)) in &labeled[face.id()] {
            out.push(MaterialObservation {
                face,
                material,
                pixel_fraction: count as f64 / total as f64,
                confidence: (conf_sum / count as f64).clamp(0.0, 1.0),
                timestamp,
                visible_pixels: total as f64,
            });
        }
    }
    Ok(out)
}

/// First face hit by a ray in box coordinates whose inward normal faces
/// the ray.
fn nearest_face(origin: &Vec3, dir: &Vec3, dims: &Vec3) -> Option<Face> {
    let mut best: Option<(f64, Face)> = None;
    for face in Face::ALL {
        let axis = face.axis();
        let n = face.inward_normal();
        if !(dir.dot(&n) < 0.0) {
            continue;
        }
        let plane = if face.is_max() { dims[axis] } else { 0.0 };
        let t = (plane - origin[axis]) / dir[axis];
        if !(t > 0.0) {
            continue;
        }
        let hit = origin + dir * t;
        let inside = (0..3).filter(|&a| a != axis).all(|a| hit[a] >= -1e-9 && hit[a] <= dims[a] + 1e-9);
        if inside && best.map_or(true, |(bt, _)| t < bt) {
            best = Some((t, face));
        }
    }
    best.map(|(_, f)| f)
}
