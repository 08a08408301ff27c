//! Synthetic benchmark: randomized furnished rooms whose ground-truth
//! responses come from the full forward model with perturbed absorption.

use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use roomsynth_core::context::SceneType;
use roomsynth_core::geometry::{Face, Vec3};
use roomsynth_core::material::{AbsorptionSpectrum, MaterialClass};
use roomsynth_core::synthesis::{SynthesisConfig, SynthesizedRir, Synthesizer};

use crate::audio::write_rir;
use crate::commands::Context;
use crate::error::{CliError, CliResult};
use crate::formats::{write_json, FaceMaterials, PoseSpec, SceneFile, ShoeboxSpec, FORMAT_VERSION};
use crate::pipeline::{plan, PipelineMode};

/// Largest relative deviation applied to each face/band absorption.
pub const PERTURBATION: f64 = 0.2;

const FLOORS: [MaterialClass; 3] = [MaterialClass::Carpet, MaterialClass::WoodPanel, MaterialClass::ConcreteBrick];
const WALLS: [MaterialClass; 5] = [
    MaterialClass::PlasterDrywall,
    MaterialClass::Glass,
    MaterialClass::ConcreteBrick,
    MaterialClass::WoodPanel,
    MaterialClass::HeavyCurtain,
];
const CEILINGS: [MaterialClass; 2] = [MaterialClass::AcousticTile, MaterialClass::PlasterDrywall];
const TYPES: [SceneType; 4] = [SceneType::ConferenceRoom, SceneType::LivingRoom, SceneType::Bedroom, SceneType::Other];

fn face_materials(rng: &mut ChaCha8Rng, face: Face) -> FaceMaterials {
    let palette: &[MaterialClass] = match face {
        Face::ZMin => &FLOORS,
        Face::ZMax => &CEILINGS,
        _ => &WALLS,
    };
    let count = rng.gen_range(1..=2.min(palette.len()));
    let ratios: BTreeMap<MaterialClass, f64> =
        palette.choose_multiple(rng, count).map(|&m| (m, rng.gen_range(0.2..1.0))).collect();
    FaceMaterials { face, ratios }
}

/// `count` scenes with ids `scene_00`, `scene_01`, ...
pub fn benchmark_scenes(count: usize, seed: u64) -> Vec<(String, SceneFile)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|i| {
            let dims = Vec3::new(rng.gen_range(3.0..12.0), rng.gen_range(3.0..9.0), rng.gen_range(2.4..4.5));
            let point = |rng: &mut ChaCha8Rng| dims.map(|d| d * rng.gen_range(0.2..0.8));
            let listener = point(&mut rng);
            let mut source = point(&mut rng);
            while (source - listener).norm() < 1.0 {
                source = point(&mut rng);
            }
            let scene = SceneFile {
                format_version: FORMAT_VERSION,
                scene_type: TYPES[rng.gen_range(0..TYPES.len())],
                shoebox: Some(ShoeboxSpec::dimensions(dims)),
                planes: None,
                materials: Some(Face::ALL.iter().map(|&f| face_materials(&mut rng, f)).collect()),
                material_observations: None,
                listener: PoseSpec::at(listener),
                sources: vec![PoseSpec::at(source)],
                ground_truth_rt60: None,
            };
            (format!("scene_{i:02}"), scene)
        })
        .collect()
}

/// Response of the full model after scaling every face/band absorption by
/// an independent factor in `1 +- PERTURBATION`, with its own noise seed.
pub fn ground_truth_rir(ctx: &Context, scene: &SceneFile, seed: u64) -> CliResult<SynthesizedRir> {
    let resolved = scene.resolve()?;
    let mut plan = plan(PipelineMode::Full, &resolved, &ctx.table, &ctx.library)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for face in plan.room.faces.iter_mut() {
        let values = face.values().map(|a| (a * (1.0 + rng.gen_range(-PERTURBATION..PERTURBATION))).clamp(0.01, 0.99));
        *face = AbsorptionSpectrum::new(values)?;
    }
    let synth = Synthesizer::new(SynthesisConfig { seed: rng.gen(), ..ctx.config.synthesis() })?;
    Ok(synth.synthesize(&plan.room, &plan.sources[0], &plan.listener, &plan.params, &plan.decay)?)
}

/// Writes `scenes/<id>.json` and `truth/<id>.wav` under `dir`.
pub fn write_benchmark(ctx: &Context, dir: &Path, count: usize, seed: u64) -> CliResult<Vec<String>> {
    let scenes_dir = dir.join("scenes");
    let truth_dir = dir.join("truth");
    for d in [&scenes_dir, &truth_dir] {
        std::fs::create_dir_all(d).map_err(|e| CliError::io(d, e))?;
    }
    let mut ids = Vec::with_capacity(count);
    for (i, (id, scene)) in benchmark_scenes(count, seed).into_iter().enumerate() {
        write_json(&scenes_dir.join(format!("{id}.json")), &scene)?;
        let truth = ground_truth_rir(ctx, &scene, seed.wrapping_add(1 + i as u64))?;
        write_rir(&truth_dir.join(format!("{id}.wav")), &truth.rir)?;
        ids.push(id);
    }
    Ok(ids)
}
