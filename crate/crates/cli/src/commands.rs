use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use roomsynth_core::bands::BAND_COUNT;
use roomsynth_core::context::{calibrate, CalibrationGrid, CalibrationResult, ParameterTable};
use roomsynth_core::material::MaterialLibrary;
use roomsynth_core::metrics::{error_summary, format_report, measure_rir, BandMetrics, ErrorSummary, ReportRow};
use roomsynth_core::render::render_offline;
use roomsynth_core::synthesis::{RoomImpulseResponse, SynthesisRtModel, SynthesizedRir, Synthesizer};

use crate::audio::{read_rir, read_wav, write_rir, write_wav, Clip};
use crate::config::Config;
use crate::error::{CliError, CliResult};
use crate::formats::{read_json, DatasetFile, GridFile, Rt60TableFile, Scene, SceneFile};
use crate::pipeline::{plan, PipelineMode};

/// Configuration plus the tables it points to.
#[derive(Debug, Clone)]
pub struct Context {
    pub config: Config,
    pub table: ParameterTable,
    pub library: MaterialLibrary,
}

impl Context {
    pub fn new(config: Config) -> CliResult<Self> {
        let table = config.parameter_table()?;
        let library = config.material_library()?;
        Ok(Self { config, table, library })
    }

    pub fn synthesizer(&self) -> CliResult<Synthesizer> {
        Ok(Synthesizer::new(self.config.synthesis())?)
    }
}

/// Full response (direct, early and late) for one source of a scene.
pub fn synth_rir(ctx: &Context, scene: &Scene, mode: PipelineMode, source: usize) -> CliResult<SynthesizedRir> {
    if source >= scene.sources.len() {
        return Err(CliError::InvalidArgument(format!(
            "source {source} requested; scene has {}",
            scene.sources.len()
        )));
    }
    let plan = plan(mode, scene, &ctx.table, &ctx.library)?;
    let out = ctx.synthesizer()?.synthesize(&plan.room, &plan.sources[source], &plan.listener, &plan.params, &plan.decay);
    out.map_err(|e| match e {
        roomsynth_core::Error::SourceOutsideRoom => CliError::InvalidScene(e.to_string()),
        other => other.into(),
    })
}

pub fn cmd_synth_rir(ctx: &Context, scene: &Path, mode: PipelineMode, source: usize, out: &Path) -> CliResult<SynthesizedRir> {
    let scene = SceneFile::load(scene)?;
    let rir = synth_rir(ctx, &scene, mode, source)?;
    write_rir(out, &rir.rir)?;
    Ok(rir)
}

/// What `render` convolves with.
#[derive(Debug, Clone)]
pub enum RenderTarget {
    /// Per-source responses and a shared late response synthesized from a
    /// scene; one input per source.
    Scene { path: PathBuf, mode: PipelineMode },
    /// One response applied to every input.
    Rir(PathBuf),
}

fn read_inputs(ctx: &Context, inputs: &[PathBuf]) -> CliResult<Vec<Vec<f32>>> {
    inputs
        .iter()
        .map(|path| {
            let clip = read_wav(path)?;
            if clip.sample_rate != ctx.config.sample_rate {
                return Err(CliError::RateMismatch {
                    path: path.display().to_string(),
                    expected: ctx.config.sample_rate,
                    found: clip.sample_rate,
                });
            }
            Ok(clip.mono())
        })
        .collect()
}

pub fn render(ctx: &Context, target: &RenderTarget, inputs: &[Vec<f32>]) -> CliResult<Clip> {
    if inputs.is_empty() {
        return Err(CliError::InvalidArgument("no input audio given".into()));
    }
    let (sources, late): (Vec<RoomImpulseResponse>, Option<RoomImpulseResponse>) = match target {
        RenderTarget::Scene { path, mode } => {
            let scene = SceneFile::load(path)?;
            if scene.sources.len() != inputs.len() {
                return Err(CliError::InvalidArgument(format!(
                    "scene has {} sources but {} inputs were given",
                    scene.sources.len(),
                    inputs.len()
                )));
            }
            let plan = plan(*mode, &scene, &ctx.table, &ctx.library)?;
            let rirs =
                ctx.synthesizer()?.synthesize_scene(&plan.room, &plan.sources, &plan.listener, &plan.params, &plan.decay)?;
            (rirs.sources, Some(rirs.late))
        }
        RenderTarget::Rir(path) => {
            let rir = read_rir(path)?;
            if rir.sample_rate != ctx.config.sample_rate {
                return Err(CliError::RateMismatch {
                    path: path.display().to_string(),
                    expected: ctx.config.sample_rate,
                    found: rir.sample_rate,
                });
            }
            (vec![rir; inputs.len()], None)
        }
    };
    let channels = sources[0].channel_count();
    let config = ctx.config.render(inputs.len(), channels);
    let out = render_offline(&config, &sources, late.as_ref(), inputs)?;
    Ok(Clip { sample_rate: ctx.config.sample_rate, channels: out })
}

pub fn cmd_render(ctx: &Context, target: &RenderTarget, inputs: &[PathBuf], out: &Path) -> CliResult<Clip> {
    let inputs = read_inputs(ctx, inputs)?;
    let clip = render(ctx, target, &inputs)?;
    write_wav(out, &clip)?;
    Ok(clip)
}

/// Scene id (file stem) to path for every `.wav` in a directory.
pub fn wav_set(dir: &Path) -> CliResult<BTreeMap<String, PathBuf>> {
    let mut set = BTreeMap::new();
    for entry in std::fs::read_dir(dir).map_err(|e| CliError::io(dir, e))? {
        let path = entry.map_err(|e| CliError::io(dir, e))?.path();
        if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("wav")) {
            if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                set.insert(stem.to_string(), path);
            }
        }
    }
    Ok(set)
}

fn measure_file(path: &Path) -> CliResult<[BandMetrics; BAND_COUNT]> {
    let rir = read_rir(path)?;
    Ok(measure_rir(&rir.channels[0], rir.sample_rate as f64)?)
}

/// Per-scene metrics and the pooled summary.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub scenes: Vec<(String, [BandMetrics; BAND_COUNT], [BandMetrics; BAND_COUNT])>,
    pub summary: ErrorSummary,
}

impl Evaluation {
    pub fn report(&self) -> String {
        let rows: Vec<ReportRow<'_>> = self
            .scenes
            .iter()
            .map(|(id, est, gt)| ReportRow { scene: id, estimate: est, ground_truth: gt })
            .collect();
        format_report(&rows, &self.summary)
    }
}

/// Compares a directory of estimated responses with a directory of
/// ground-truth responses or an RT60 table file.
pub fn eval(estimates: &Path, ground_truth: &Path) -> CliResult<Evaluation> {
    let est = wav_set(estimates)?;
    let gt: BTreeMap<String, GroundTruth> = if ground_truth.is_dir() {
        wav_set(ground_truth)?.into_iter().map(|(k, p)| (k, GroundTruth::Rir(p))).collect()
    } else {
        let table: Rt60TableFile = read_json(ground_truth)?;
        table.scenes.into_iter().map(|(k, rt)| (k, GroundTruth::Table(rt))).collect()
    };
    let unmatched: Vec<&String> =
        est.keys().filter(|k| !gt.contains_key(*k)).chain(gt.keys().filter(|k| !est.contains_key(*k))).collect();
    if !unmatched.is_empty() {
        let ids: Vec<&str> = unmatched.iter().map(|s| s.as_str()).collect();
        return Err(CliError::MissingPair(format!("no counterpart for scene ids: {}", ids.join(", "))));
    }
    if est.is_empty() {
        return Err(CliError::MissingPair("no scenes to compare".into()));
    }
    let mut scenes = Vec::with_capacity(est.len());
    for (id, path) in &est {
        let e = measure_file(path)?;
        let g = match &gt[id] {
            GroundTruth::Rir(p) => measure_file(p)?,
            GroundTruth::Table(rt) => rt.map(|t| t.map(BandMetrics::from_rt60).unwrap_or_default()),
        };
        scenes.push((id.clone(), e, g));
    }
    let e: Vec<_> = scenes.iter().map(|s| s.1).collect();
    let g: Vec<_> = scenes.iter().map(|s| s.2).collect();
    let summary = error_summary(&e, &g)?;
    Ok(Evaluation { scenes, summary })
}

enum GroundTruth {
    Rir(PathBuf),
    Table([Option<f64>; BAND_COUNT]),
}

pub fn cmd_eval(estimates: &Path, ground_truth: &Path, out: Option<&Path>) -> CliResult<Evaluation> {
    let evaluation = eval(estimates, ground_truth)?;
    if let Some(out) = out {
        std::fs::write(out, evaluation.report()).map_err(|e| CliError::io(out, e))?;
    }
    Ok(evaluation)
}

pub fn load_grid(path: Option<&Path>) -> CliResult<CalibrationGrid> {
    match path {
        Some(path) => Ok(read_json::<GridFile>(path)?.grid),
        None => Ok(CalibrationGrid::default()),
    }
}

pub fn cmd_calibrate(ctx: &Context, dataset: &Path, grid: Option<&Path>, out: &Path) -> CliResult<CalibrationResult> {
    let dataset = DatasetFile::load(dataset)?;
    let grid = load_grid(grid)?;
    let model = SynthesisRtModel::new(ctx.config.synthesis(), ctx.library.clone())?;
    let result = calibrate(&dataset, &grid, &model)?;
    std::fs::write(out, result.table.to_text()).map_err(|e| CliError::io(out, e))?;
    Ok(result)
}

/// One line per scene type: chosen parameters and the MAE they reach.
pub fn calibration_log(result: &CalibrationResult) -> String {
    let mut out = String::from("scene_type\tmae\treverb_gain\trt_modulator\treverb_brightness\treflection_gain\n");
    for (scene, p) in result.table.iter() {
        let _ = writeln!(
            out,
            "{scene}\t{:.6}\t{}\t{}\t{}\t{}",
            result.mae[&scene], p.reverb_gain, p.rt_modulator, p.reverb_brightness, p.reflection_gain
        );
    }
    out
}
