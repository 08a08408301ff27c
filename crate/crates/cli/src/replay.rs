//! Offline replay of an observation stream: the room model is re-estimated
//! at a fixed cadence and the rendering response is swapped when it has
//! changed enough to matter.

use std::fmt::Write as _;
use std::path::Path;

use roomsynth_core::bands::{band_label, BandValues, BAND_COUNT};
use roomsynth_core::geometry::{estimate_shoebox, update_shoebox, Face, Plane, ShoeboxModel, Vec3};
use roomsynth_core::material::{project_face_coverage, update_profile, MaterialObservation, SurfaceMaterialProfile};
use roomsynth_core::render::{RenderEngine, Slot};
use roomsynth_core::synthesis::{default_positions, refine_rt60, DecayModel, RoomImpulseResponse};
use roomsynth_core::Error;

use crate::audio::{read_wav, write_wav, Clip};
use crate::commands::Context;
use crate::error::{CliError, CliResult};
use crate::formats::{Record, Scene, StreamFile};
use crate::pipeline::{plan, PipelineMode, Plan, CANONICAL_ROOM};

/// Relative per-band RT60 change below which a new response is not sent.
pub const RT60_THRESHOLD: f64 = 0.01;
/// Geometry change in metres below which a new response is not sent.
pub const GEOMETRY_THRESHOLD: f64 = 0.02;
/// Margin keeping mapped poses off the walls, metres.
const WALL_MARGIN: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Action {
    /// Direct-only response used until a room is known.
    Default,
    Submitted,
    Skipped,
}

impl Action {
    fn label(self) -> &'static str {
        match self {
            Action::Default => "default",
            Action::Submitted => "submit",
            Action::Skipped => "skip",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogEntry {
    pub time: f64,
    pub action: Action,
    /// Room dimensions of the candidate response.
    pub dimensions: Option<Vec3>,
    /// Per-band RT60 target of the candidate response.
    pub rt60: Option<BandValues>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplayOutcome {
    pub audio: Clip,
    pub log: Vec<LogEntry>,
}

impl ReplayOutcome {
    pub fn submissions(&self) -> impl Iterator<Item = &LogEntry> {
        self.log.iter().filter(|e| e.action == Action::Submitted)
    }

    pub fn log_text(&self) -> String {
        let mut out = String::from("time\taction\tdim_x\tdim_y\tdim_z");
        for band in 0..BAND_COUNT {
            let _ = write!(out, "\trt60_{}", band_label(band));
        }
        out.push('\n');
        for e in &self.log {
            let _ = write!(out, "{:.3}\t{}", e.time, e.action.label());
            match e.dimensions {
                Some(d) => {
                    let _ = write!(out, "\t{:.4}\t{:.4}\t{:.4}", d.x, d.y, d.z);
                }
                None => out.push_str("\tnan\tnan\tnan"),
            }
            for band in 0..BAND_COUNT {
                match e.rt60 {
                    Some(rt) => {
                        let _ = write!(out, "\t{:.6}", rt[band]);
                    }
                    None => out.push_str("\tnan"),
                }
            }
            out.push('\n');
        }
        out
    }
}

/// Accumulated room knowledge.
struct RoomState {
    shoebox: Option<ShoeboxModel>,
    /// Planes seen before the first successful fit.
    backlog: Vec<Plane>,
    planes: Vec<Plane>,
    materials: Vec<MaterialObservation>,
    profiles: Vec<SurfaceMaterialProfile>,
    scene_type: roomsynth_core::context::SceneType,
    dirty: bool,
}

impl RoomState {
    fn ingest(&mut self, record: &Record) -> CliResult<()> {
        match record {
            Record::Plane { plane, .. } => self.planes.push(plane.clone().validated()?),
            Record::Material { observation, .. } => self.materials.push(*observation),
            Record::Segmentation { time, camera, intrinsics, frame } => {
                // Frames seen before any geometry cannot be projected.
                let Some(shoebox) = &self.shoebox else { return Ok(()) };
                let obs = project_face_coverage(shoebox, &camera.pose(), intrinsics, frame, *time)?;
                self.materials.extend(obs);
            }
            Record::SceneType { scene_type, .. } => self.scene_type = *scene_type,
        }
        self.dirty = true;
        Ok(())
    }

    fn refresh(&mut self, listener: &Vec3) -> CliResult<()> {
        let planes = std::mem::take(&mut self.planes);
        match &self.shoebox {
            Some(model) if !planes.is_empty() => self.shoebox = Some(update_shoebox(model, &planes)),
            Some(_) => {}
            None => {
                self.backlog.extend(planes);
                match estimate_shoebox(&self.backlog, listener) {
                    Ok(model) => {
                        self.shoebox = Some(model);
                        self.backlog.clear();
                    }
                    Err(Error::InsufficientPlanes(_)) => {}
                    Err(e) => return Err(e.into()),
                }
            }
        }
        let mut materials = std::mem::take(&mut self.materials);
        materials.sort_by(|a, b| a.timestamp.total_cmp(&b.timestamp).then(a.face.cmp(&b.face)));
        for frame in materials.chunk_by(|a, b| a.timestamp == b.timestamp && a.face == b.face) {
            let id = frame[0].face.id();
            self.profiles[id] = update_profile(&self.profiles[id], frame)?;
        }
        self.dirty = false;
        Ok(())
    }
}

fn clamp_into(shoebox: &ShoeboxModel, world: &Vec3) -> Vec3 {
    let dims = shoebox.dimensions();
    let p = shoebox.to_box(world);
    Vec3::from_fn(|a, _| {
        let m = WALL_MARGIN.min(0.5 * dims[a]);
        p[a].clamp(m, dims[a] - m)
    })
}

fn needs_geometry(mode: PipelineMode) -> bool {
    matches!(mode, PipelineMode::GeoOnly | PipelineMode::Full)
}

fn target_rt60(plan: &Plan) -> CliResult<BandValues> {
    let baseline = match plan.decay {
        DecayModel::Eyring => plan.room.eyring_rt60()?,
        DecayModel::Fixed(rt) => rt,
    };
    Ok(refine_rt60(&baseline, &plan.params))
}

fn geometry_change(a: &Plan, b: &Plan) -> f64 {
    let moved = (a.listener - b.listener).norm().max((a.sources[0] - b.sources[0]).norm());
    a.room.shoebox.max_bound_change(&b.room.shoebox).max(moved)
}

fn rt60_change(a: &BandValues, b: &BandValues) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x / y - 1.0).abs()).fold(0.0, f64::max)
}

/// Runs the stream against `input`, starting from a direct-only response.
/// Records are consumed at cadence ticks; the output is the input length
/// plus the tail of the last active response.
pub fn replay(ctx: &Context, stream: &StreamFile, input: &Clip, mode: PipelineMode) -> CliResult<ReplayOutcome> {
    stream.validate()?;
    let config = &ctx.config;
    if input.sample_rate != config.sample_rate {
        return Err(CliError::RateMismatch {
            path: "replay input".into(),
            expected: config.sample_rate,
            found: input.sample_rate,
        });
    }
    let synth = ctx.synthesizer()?;
    let channels = config.channels;
    let fs = config.sample_rate as f64;
    let block = config.block_size;
    let (mut controller, mut engine) = RenderEngine::create(config.render(1, channels))?;

    let mut impulse = RoomImpulseResponse::impulse(config.sample_rate, 0, 1);
    impulse.channels = vec![impulse.channels[0].clone(); channels];
    controller.submit_rir(Slot::Source(0), &impulse)?;
    let mut log = vec![LogEntry { time: 0.0, action: Action::Default, dimensions: None, rt60: None }];
    let mut active_len = impulse.len();
    let mut last: Option<(Plan, BandValues)> = None;

    let mut state = RoomState {
        shoebox: None,
        backlog: Vec::new(),
        planes: Vec::new(),
        materials: Vec::new(),
        profiles: Face::ALL.iter().map(|&f| SurfaceMaterialProfile::empty(f)).collect(),
        scene_type: stream.scene_type,
        dirty: false,
    };
    let listener_world = stream.listener.position;
    let period = 1.0 / config.cadence_hz;
    let mut records = stream.records.iter().peekable();
    let mut tick = 0u64;

    let x = input.mono();
    let mut output: Vec<Vec<f32>> = vec![Vec::new(); channels];
    let mut frame = vec![0.0f32; block * channels];
    let mut buffer = vec![0.0f32; block];
    let mut start = 0usize;
    let mut total = x.len();
    while start < total {
        let now = start as f64 / fs;
        while (tick as f64) * period <= now {
            let tick_time = tick as f64 * period;
            tick += 1;
            while let Some(r) = records.next_if(|r| r.time() <= tick_time) {
                state.ingest(r)?;
            }
            if !state.dirty {
                continue;
            }
            state.refresh(&listener_world)?;
            if needs_geometry(mode) && state.shoebox.is_none() {
                continue;
            }
            let shoebox = match &state.shoebox {
                Some(s) => s.clone(),
                None => ShoeboxModel::from_dimensions(Vec3::from(CANONICAL_ROOM))?,
            };
            let source = match &stream.source {
                Some(p) => clamp_into(&shoebox, &p.position),
                None => default_positions(&shoebox.dimensions()).0,
            };
            let scene = Scene {
                scene_type: state.scene_type,
                listener: clamp_into(&shoebox, &listener_world),
                sources: vec![source],
                shoebox,
                profiles: state.profiles.clone(),
                ground_truth_rt60: None,
            };
            let candidate = plan(mode, &scene, &ctx.table, &ctx.library)?;
            let rt60 = target_rt60(&candidate)?;
            let dimensions = Some(candidate.room.shoebox.dimensions());
            let unchanged = last.as_ref().is_some_and(|(p, rt)| {
                rt60_change(&rt60, rt) < RT60_THRESHOLD && geometry_change(&candidate, p) < GEOMETRY_THRESHOLD
            });
            if unchanged {
                log.push(LogEntry { time: tick_time, action: Action::Skipped, dimensions, rt60: Some(rt60) });
                continue;
            }
            let rir = synth.synthesize(
                &candidate.room,
                &candidate.sources[0],
                &candidate.listener,
                &candidate.params,
                &candidate.decay,
            )?;
            controller.collect_retired();
            controller.submit_rir(Slot::Source(0), &rir.rir)?;
            active_len = rir.rir.len();
            log.push(LogEntry { time: tick_time, action: Action::Submitted, dimensions, rt60: Some(rir.rt60) });
            last = Some((candidate, rir.rt60));
        }
        if !x.is_empty() {
            total = total.max(x.len() + active_len - 1);
        }
        buffer.fill(0.0);
        if start < x.len() {
            let end = (start + block).min(x.len());
            buffer[..end - start].copy_from_slice(&x[start..end]);
        }
        engine.render_block(&[&buffer], &mut frame)?;
        for (c, out) in output.iter_mut().enumerate() {
            out.extend(frame.iter().skip(c).step_by(channels));
        }
        start += block;
    }
    output.iter_mut().for_each(|o| o.truncate(total));
    Ok(ReplayOutcome { audio: Clip { sample_rate: config.sample_rate, channels: output }, log })
}

pub fn cmd_replay(
    ctx: &Context,
    stream: &Path,
    input: &Path,
    mode: PipelineMode,
    out: &Path,
    log: &Path,
) -> CliResult<ReplayOutcome> {
    let stream = StreamFile::load(stream)?;
    let clip = read_wav(input)?;
    if clip.sample_rate != ctx.config.sample_rate {
        return Err(CliError::RateMismatch {
            path: input.display().to_string(),
            expected: ctx.config.sample_rate,
            found: clip.sample_rate,
        });
    }
    let outcome = replay(ctx, &stream, &clip, mode)?;
    write_wav(out, &outcome.audio)?;
    std::fs::write(log, outcome.log_text()).map_err(|e| CliError::io(log, e))?;
    Ok(outcome)
}
