//! The five synthesis modes and the room/parameter choice each one makes.

use clap::ValueEnum;
use roomsynth_core::context::{AcousticParameterVector, ParameterTable};
use roomsynth_core::geometry::{ShoeboxModel, Vec3};
use roomsynth_core::material::{AbsorptionSpectrum, MaterialClass, MaterialLibrary};
use roomsynth_core::synthesis::{default_positions, DecayModel, RoomAcoustics};
use serde::{Deserialize, Serialize};

use crate::error::CliResult;
use crate::formats::Scene;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum PipelineMode {
    /// Fixed generic preset, independent of the scene.
    NonAdaptive,
    /// Scene geometry with default materials.
    GeoOnly,
    /// Scene materials in the canonical room.
    MatOnly,
    /// Scene-type parameters in the default room.
    AeOnly,
    Full,
}

impl PipelineMode {
    pub const ALL: [PipelineMode; 5] =
        [PipelineMode::NonAdaptive, PipelineMode::GeoOnly, PipelineMode::MatOnly, PipelineMode::AeOnly, PipelineMode::Full];

    pub fn label(self) -> &'static str {
        match self {
            PipelineMode::NonAdaptive => "non_adaptive",
            PipelineMode::GeoOnly => "geo_only",
            PipelineMode::MatOnly => "mat_only",
            PipelineMode::AeOnly => "ae_only",
            PipelineMode::Full => "full",
        }
    }
}

impl std::fmt::Display for PipelineMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

pub const PRESET_RT60: f64 = 0.8;
pub const PRESET_ROOM: [f64; 3] = [6.0, 5.0, 3.0];
pub const CANONICAL_ROOM: [f64; 3] = [5.0, 4.0, 3.0];

/// Parameters of the generic preset, also used by the modes that ignore
/// the scene type.
pub fn preset_params() -> AcousticParameterVector {
    AcousticParameterVector { reverb_gain: 0.15, rt_modulator: 1.0, reverb_brightness: 0.0, reflection_gain: 0.8 }
}

fn room(dims: [f64; 3]) -> ShoeboxModel {
    ShoeboxModel::from_dimensions(Vec3::from(dims)).expect("fixed room dimensions are valid")
}

/// Flat absorption giving the preset RT60 in the preset room, so the early
/// reflections agree with the fixed tail.
pub fn preset_absorption() -> AbsorptionSpectrum {
    let shoebox = room(PRESET_ROOM);
    let alpha = 1.0 - (-0.161 * shoebox.volume() / (shoebox.total_area() * PRESET_RT60)).exp();
    AbsorptionSpectrum::flat(alpha).expect("preset absorption lies in [0, 1]")
}

/// Everything the synthesizer needs for one scene in one mode. Positions
/// are in box coordinates of `room`.
#[derive(Debug, Clone, PartialEq)]
pub struct Plan {
    pub room: RoomAcoustics,
    pub listener: Vec3,
    pub sources: Vec<Vec3>,
    pub params: AcousticParameterVector,
    pub decay: DecayModel,
}

fn default_placement(shoebox: &ShoeboxModel, count: usize) -> (Vec3, Vec<Vec3>) {
    let (source, listener) = default_positions(&shoebox.dimensions());
    (listener, vec![source; count])
}

pub fn plan(mode: PipelineMode, scene: &Scene, table: &ParameterTable, library: &MaterialLibrary) -> CliResult<Plan> {
    let count = scene.sources.len();
    let plan = match mode {
        PipelineMode::NonAdaptive => {
            let shoebox = room(PRESET_ROOM);
            let (listener, sources) = default_placement(&shoebox, count);
            Plan {
                room: RoomAcoustics::uniform(shoebox, preset_absorption()),
                listener,
                sources,
                params: preset_params(),
                decay: DecayModel::Fixed([PRESET_RT60; 8]),
            }
        }
        PipelineMode::GeoOnly => Plan {
            room: RoomAcoustics::uniform(scene.shoebox.clone(), *library.get(MaterialClass::Other)?),
            listener: scene.listener,
            sources: scene.sources.clone(),
            params: preset_params(),
            decay: DecayModel::Eyring,
        },
        PipelineMode::MatOnly => {
            let shoebox = room(CANONICAL_ROOM);
            let (listener, sources) = default_placement(&shoebox, count);
            Plan {
                room: RoomAcoustics::from_profiles(shoebox, &scene.profiles, library)?,
                listener,
                sources,
                params: preset_params(),
                decay: DecayModel::Eyring,
            }
        }
        PipelineMode::AeOnly => {
            let shoebox = room(CANONICAL_ROOM);
            let (listener, sources) = default_placement(&shoebox, count);
            Plan {
                room: RoomAcoustics::uniform(shoebox, library.default_reflective()),
                listener,
                sources,
                params: table.params_for_scene(scene.scene_type),
                decay: DecayModel::Eyring,
            }
        }
        PipelineMode::Full => Plan {
            room: RoomAcoustics::from_profiles(scene.shoebox.clone(), &scene.profiles, library)?,
            listener: scene.listener,
            sources: scene.sources.clone(),
            params: table.params_for_scene(scene.scene_type),
            decay: DecayModel::Eyring,
        },
    };
    Ok(plan)
}

#[cfg(test)]
mod tests {
    use super::*;
    use roomsynth_core::context::SceneType;
    use roomsynth_core::geometry::Face;
    use roomsynth_core::material::SurfaceMaterialProfile;

    fn scene(dims: Vec3, scene_type: SceneType) -> Scene {
        Scene {
            scene_type,
            shoebox: ShoeboxModel::from_dimensions(dims).unwrap(),
            profiles: Face::ALL
                .iter()
                .map(|&f| SurfaceMaterialProfile::with_ratios(f, &[(MaterialClass::HeavyCurtain, 1.0)]))
                .collect(),
            listener: dims * 0.5,
            sources: vec![dims * 0.3],
            ground_truth_rt60: None,
        }
    }

    #[test]
    fn preset_absorption_gives_preset_time() {
        let rt = RoomAcoustics::uniform(room(PRESET_ROOM), preset_absorption()).eyring_rt60().unwrap();
        assert!(rt.iter().all(|t| (t - PRESET_RT60).abs() < 1e-9));
    }

    #[test]
    fn non_adaptive_ignores_the_scene() {
        let (table, library) = (ParameterTable::default_table(), MaterialLibrary::builtin());
        let a = plan(PipelineMode::NonAdaptive, &scene(Vec3::new(3.0, 3.0, 2.5), SceneType::Bedroom), &table, &library);
        let b = plan(PipelineMode::NonAdaptive, &scene(Vec3::new(9.0, 7.0, 4.0), SceneType::Outdoor), &table, &library);
        assert_eq!(a.unwrap(), b.unwrap());
    }

    #[test]
    fn curtains_shorten_the_baseline() {
        let (table, library) = (ParameterTable::default_table(), MaterialLibrary::builtin());
        let s = scene(Vec3::new(6.0, 5.0, 3.0), SceneType::Other);
        let full = plan(PipelineMode::Full, &s, &table, &library).unwrap().room.eyring_rt60().unwrap();
        let geo = plan(PipelineMode::GeoOnly, &s, &table, &library).unwrap().room.eyring_rt60().unwrap();
        assert!((2..8).all(|b| full[b] < geo[b]));
    }
}
