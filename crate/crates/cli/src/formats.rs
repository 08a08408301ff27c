//! Versioned JSON interchange files: scene descriptors, observation
//! streams, calibration datasets and grids, and ground-truth RT60 tables.

use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::UnitQuaternion;
use roomsynth_core::bands::{BandValues, BAND_COUNT};
use roomsynth_core::context::{CalibrationDataset, CalibrationEntry, CalibrationGrid, SceneType};
use roomsynth_core::geometry::{estimate_shoebox, Face, Plane, Pose, ShoeboxModel, Vec3};
use roomsynth_core::material::{
    update_profile, Intrinsics, MaterialClass, MaterialObservation, SegmentationFrame, SurfaceMaterialProfile,
};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

pub const FORMAT_VERSION: u32 = 1;

/// Reads a JSON file and checks its `format_version`.
pub fn read_json<T: DeserializeOwned + Versioned>(path: &Path) -> CliResult<T> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse_json(&text).map_err(|e| match e {
        CliError::Parse(m) => CliError::Parse(format!("{}: {m}", path.display())),
        other => other,
    })
}

pub fn parse_json<T: DeserializeOwned + Versioned>(text: &str) -> CliResult<T> {
    let value: T = serde_json::from_str(text).map_err(|e| CliError::Parse(e.to_string()))?;
    if value.format_version() != FORMAT_VERSION {
        return Err(CliError::Parse(format!(
            "format_version {} is not supported (expected {FORMAT_VERSION})",
            value.format_version()
        )));
    }
    Ok(value)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Parse(e.to_string()))?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

pub trait Versioned {
    fn format_version(&self) -> u32;
}

macro_rules! versioned {
    ($($t:ty),*) => {
        $(impl Versioned for $t {
            fn format_version(&self) -> u32 {
                self.format_version
            }
        })*
    };
}

versioned!(SceneFile, StreamFile, DatasetFile, GridFile, Rt60TableFile);

fn version() -> u32 {
    FORMAT_VERSION
}

/// Box bounds in the world frame rotated by `frame_yaw` about +z.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShoeboxSpec {
    #[serde(default)]
    pub frame_yaw: f64,
    #[serde(default = "Vec3::zeros")]
    pub min_corner: Vec3,
    pub max_corner: Vec3,
}

impl ShoeboxSpec {
    pub fn dimensions(dims: Vec3) -> Self {
        Self { frame_yaw: 0.0, min_corner: Vec3::zeros(), max_corner: dims }
    }

    pub fn model(&self) -> CliResult<ShoeboxModel> {
        ShoeboxModel::new(self.frame_yaw, self.min_corner, self.max_corner)
            .map_err(|e| CliError::InvalidScene(e.to_string()))
    }
}

/// Area ratios of materials on one face; normalized on load.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FaceMaterials {
    pub face: Face,
    pub ratios: BTreeMap<MaterialClass, f64>,
}

impl FaceMaterials {
    pub fn profile(&self) -> CliResult<SurfaceMaterialProfile> {
        if self.ratios.values().any(|r| !(r.is_finite() && *r >= 0.0)) {
            return Err(CliError::InvalidScene(format!("negative area ratio on face {:?}", self.face)));
        }
        if !(self.ratios.values().sum::<f64>() > 0.0) {
            return Ok(SurfaceMaterialProfile::empty(self.face));
        }
        let ratios: Vec<(MaterialClass, f64)> = self.ratios.iter().map(|(m, r)| (*m, *r)).collect();
        Ok(SurfaceMaterialProfile::with_ratios(self.face, &ratios))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoseSpec {
    pub position: Vec3,
    /// Quaternion `[x, y, z, w]`; identity when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub orientation: Option<UnitQuaternion<f64>>,
    /// Declares that the pose lies outside the room.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub outside: bool,
}

impl PoseSpec {
    pub fn at(position: Vec3) -> Self {
        Self { position, orientation: None, outside: false }
    }

    pub fn pose(&self) -> Pose {
        Pose { position: self.position, orientation: self.orientation.unwrap_or_else(UnitQuaternion::identity) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneFile {
    #[serde(default = "version")]
    pub format_version: u32,
    pub scene_type: SceneType,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shoebox: Option<ShoeboxSpec>,
    /// Raw plane observations, used instead of `shoebox`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub planes: Option<Vec<Plane>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub materials: Option<Vec<FaceMaterials>>,
    /// Raw material observations, used instead of `materials`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub material_observations: Option<Vec<MaterialObservation>>,
    pub listener: PoseSpec,
    pub sources: Vec<PoseSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ground_truth_rt60: Option<BandValues>,
}

/// A scene with geometry and materials resolved. Positions are in box
/// coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub scene_type: SceneType,
    pub shoebox: ShoeboxModel,
    /// One profile per face, indexed by face id.
    pub profiles: Vec<SurfaceMaterialProfile>,
    pub listener: Vec3,
    pub sources: Vec<Vec3>,
    pub ground_truth_rt60: Option<BandValues>,
}

/// Folds observations into per-face profiles, one frame per distinct
/// (face, timestamp) in time order.
pub fn profiles_from_observations(observations: &[MaterialObservation]) -> CliResult<Vec<SurfaceMaterialProfile>> {
    let mut profiles: Vec<SurfaceMaterialProfile> = Face::ALL.iter().map(|&f| SurfaceMaterialProfile::empty(f)).collect();
    let mut sorted = observations.to_vec();
    sorted.sort_by(|a, b| a.timestamp.total_cmp(&b.timestamp).then(a.face.cmp(&b.face)));
    for frame in sorted.chunk_by(|a, b| a.timestamp == b.timestamp && a.face == b.face) {
        let id = frame[0].face.id();
        profiles[id] = update_profile(&profiles[id], frame)?;
    }
    Ok(profiles)
}

fn profiles_from_materials(materials: &[FaceMaterials]) -> CliResult<Vec<SurfaceMaterialProfile>> {
    let mut profiles: Vec<SurfaceMaterialProfile> = Face::ALL.iter().map(|&f| SurfaceMaterialProfile::empty(f)).collect();
    let mut seen = [false; 6];
    for m in materials {
        if std::mem::replace(&mut seen[m.face.id()], true) {
            return Err(CliError::InvalidScene(format!("face {:?} listed twice", m.face)));
        }
        profiles[m.face.id()] = m.profile()?;
    }
    Ok(profiles)
}

impl SceneFile {
    pub fn load(path: &Path) -> CliResult<Scene> {
        read_json::<SceneFile>(path)?.resolve()
    }

    pub fn resolve(&self) -> CliResult<Scene> {
        let shoebox = match (&self.shoebox, &self.planes) {
            (Some(spec), None) => spec.model()?,
            (None, Some(planes)) => {
                let planes: Vec<Plane> = planes.iter().cloned().map(Plane::validated).collect::<Result<_, _>>()?;
                estimate_shoebox(&planes, &self.listener.position)?
            }
            (Some(_), Some(_)) => return Err(CliError::InvalidScene("give either `shoebox` or `planes`, not both".into())),
            (None, None) => return Err(CliError::InvalidScene("scene needs `shoebox` or `planes`".into())),
        };
        let profiles = match (&self.materials, &self.material_observations) {
            (Some(m), None) => profiles_from_materials(m)?,
            (None, Some(obs)) => profiles_from_observations(obs)?,
            (None, None) => Face::ALL.iter().map(|&f| SurfaceMaterialProfile::empty(f)).collect(),
            (Some(_), Some(_)) => {
                return Err(CliError::InvalidScene(
                    "give either `materials` or `material_observations`, not both".into(),
                ))
            }
        };
        if self.sources.is_empty() {
            return Err(CliError::InvalidScene("scene has no sources".into()));
        }
        let place = |name: &str, pose: &PoseSpec| -> CliResult<Vec3> {
            let p = shoebox.to_box(&pose.position);
            if shoebox.contains_box_point(&p) == pose.outside {
                let state = if pose.outside { "is flagged outside but lies inside" } else { "lies outside" };
                return Err(CliError::InvalidScene(format!("{name} {state} the room")));
            }
            Ok(p)
        };
        let listener = place("listener", &self.listener)?;
        let sources = self
            .sources
            .iter()
            .enumerate()
            .map(|(i, s)| place(&format!("source {i}"), s))
            .collect::<CliResult<_>>()?;
        if let Some(gt) = &self.ground_truth_rt60 {
            if gt.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
                return Err(CliError::InvalidScene("ground-truth RT60 must be positive".into()));
            }
        }
        Ok(Scene {
            scene_type: self.scene_type,
            shoebox,
            profiles,
            listener,
            sources,
            ground_truth_rt60: self.ground_truth_rt60,
        })
    }
}

/// One timed record of an observation stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Record {
    Plane { time: f64, plane: Plane },
    Material { time: f64, observation: MaterialObservation },
    Segmentation { time: f64, camera: PoseSpec, intrinsics: Intrinsics, frame: SegmentationFrame },
    SceneType { time: f64, scene_type: SceneType },
}

impl Record {
    pub fn time(&self) -> f64 {
        match self {
            Record::Plane { time, .. }
            | Record::Material { time, .. }
            | Record::Segmentation { time, .. }
            | Record::SceneType { time, .. } => *time,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StreamFile {
    #[serde(default = "version")]
    pub format_version: u32,
    /// World pose of the listener; also anchors faces without planes.
    #[serde(default = "origin")]
    pub listener: PoseSpec,
    /// World pose of the source; placed relative to the room when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<PoseSpec>,
    #[serde(default = "other_scene")]
    pub scene_type: SceneType,
    #[serde(default)]
    pub records: Vec<Record>,
}

fn origin() -> PoseSpec {
    PoseSpec::at(Vec3::zeros())
}

fn other_scene() -> SceneType {
    SceneType::Other
}

impl StreamFile {
    pub fn load(path: &Path) -> CliResult<Self> {
        let stream: StreamFile = read_json(path)?;
        stream.validate()?;
        Ok(stream)
    }

    /// Timestamps must be finite and non-decreasing.
    pub fn validate(&self) -> CliResult<()> {
        let mut previous = f64::NEG_INFINITY;
        for (index, r) in self.records.iter().enumerate() {
            let t = r.time();
            if !t.is_finite() || t < previous {
                return Err(CliError::StreamOrder { index, previous, found: t });
            }
            previous = t;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EntrySpec {
    pub scene_type: SceneType,
    pub shoebox: ShoeboxSpec,
    #[serde(default)]
    pub materials: Vec<FaceMaterials>,
    /// Box coordinates; default placement when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub listener: Option<Vec3>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<Vec3>,
    pub ground_truth_rt60: BandValues,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetFile {
    #[serde(default = "version")]
    pub format_version: u32,
    pub entries: Vec<EntrySpec>,
}

impl DatasetFile {
    pub fn load(path: &Path) -> CliResult<CalibrationDataset> {
        read_json::<DatasetFile>(path)?.resolve()
    }

    pub fn resolve(&self) -> CliResult<CalibrationDataset> {
        let entries = self
            .entries
            .iter()
            .map(|e| {
                Ok(CalibrationEntry {
                    scene_type: e.scene_type,
                    shoebox: e.shoebox.model()?,
                    profiles: profiles_from_materials(&e.materials)?,
                    listener: e.listener,
                    source: e.source,
                    ground_truth_rt60: e.ground_truth_rt60,
                })
            })
            .collect::<CliResult<_>>()?;
        Ok(CalibrationDataset { entries })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridFile {
    #[serde(default = "version")]
    pub format_version: u32,
    #[serde(flatten)]
    pub grid: CalibrationGrid,
}

/// Ground-truth RT60 per scene id and band; `null` marks a missing band.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Rt60TableFile {
    #[serde(default = "version")]
    pub format_version: u32,
    pub scenes: BTreeMap<String, [Option<f64>; BAND_COUNT]>,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scene_json(extra: &str) -> String {
        format!(
            r#"{{"format_version": 1, "scene_type": "bedroom", {extra}
                "listener": {{"position": [2, 2, 1.2]}}, "sources": [{{"position": [1, 1, 1.5]}}]}}"#
        )
    }

    #[test]
    fn shoebox_scene_resolves() {
        let file: SceneFile = parse_json(&scene_json(
            r#""shoebox": {"max_corner": [4, 3, 2.5]},
               "materials": [{"face": "z_min", "ratios": {"carpet": 3, "wood_panel": 1}}],"#,
        ))
        .unwrap();
        let scene = file.resolve().unwrap();
        assert_eq!(scene.shoebox.dimensions(), Vec3::new(4.0, 3.0, 2.5));
        let floor = &scene.profiles[Face::ZMin.id()];
        assert!((floor.area_ratio_sum() - 1.0).abs() < 1e-12);
        assert_eq!(floor.entries.len(), 2);
        assert!(scene.profiles[Face::XMin.id()].entries.is_empty());
    }

    #[test]
    fn both_geometry_forms_are_rejected() {
        let file: SceneFile = parse_json(&scene_json(r#""shoebox": {"max_corner": [4, 3, 2.5]}, "planes": [],"#)).unwrap();
        assert!(matches!(file.resolve(), Err(CliError::InvalidScene(_))));
    }

    #[test]
    fn unflagged_outside_pose_is_rejected() {
        let mut file: SceneFile = parse_json(&scene_json(r#""shoebox": {"max_corner": [4, 3, 2.5]},"#)).unwrap();
        file.listener.position = Vec3::new(9.0, 1.0, 1.0);
        assert!(matches!(file.resolve(), Err(CliError::InvalidScene(_))));
        file.listener.outside = true;
        assert!(file.resolve().is_ok());
    }

    #[test]
    fn future_versions_are_refused() {
        let text = scene_json(r#""shoebox": {"max_corner": [4, 3, 2.5]},"#).replace("\"format_version\": 1", "\"format_version\": 2");
        assert!(matches!(parse_json::<SceneFile>(&text), Err(CliError::Parse(_))));
    }

    #[test]
    fn stream_order_is_checked() {
        let stream: StreamFile = parse_json(
            r#"{"format_version": 1, "records": [
                {"kind": "scene_type", "time": 1.0, "scene_type": "bedroom"},
                {"kind": "scene_type", "time": 0.5, "scene_type": "outdoor"}]}"#,
        )
        .unwrap();
        assert!(matches!(stream.validate(), Err(CliError::StreamOrder { index: 1, .. })));
    }
}
