use rtrb::{Consumer, Producer, RingBuffer};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::render::convolver::{DelayLine, Kernel, Transforms};
use crate::synthesis::RoomImpulseResponse;

pub const DEFAULT_BLOCK_SIZE: usize = 256;
pub const MIN_BLOCK_SIZE: usize = 64;
pub const MAX_BLOCK_SIZE: usize = 4096;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RenderConfig {
    pub sample_rate: u32,
    pub block_size: usize,
    /// Output channels, 1 or 2.
    pub channels: usize,
    pub sources: usize,
    pub master_gain: f64,
    /// Longest impulse response the engine accepts.
    pub max_rir_seconds: f64,
    /// Pending submissions the exchange can hold.
    pub queue_capacity: usize,
}

impl Default for RenderConfig {
    fn default() -> Self {
        Self {
            sample_rate: 48000,
            block_size: DEFAULT_BLOCK_SIZE,
            channels: 1,
            sources: 1,
            master_gain: 1.0,
            max_rir_seconds: 12.0,
            queue_capacity: 16,
        }
    }
}

impl RenderConfig {
    pub fn validate(&self) -> Result<()> {
        let b = self.block_size;
        if !(b.is_power_of_two() && (MIN_BLOCK_SIZE..=MAX_BLOCK_SIZE).contains(&b)) {
            return Err(Error::InvalidConfig(format!(
                "block size {b} must be a power of two in [{MIN_BLOCK_SIZE}, {MAX_BLOCK_SIZE}]"
            )));
        }
        if !(1..=2).contains(&self.channels) {
            return Err(Error::InvalidConfig(format!("{} output channels; 1 or 2 supported", self.channels)));
        }
        if self.sources == 0 {
            return Err(Error::InvalidConfig("at least one source is required".into()));
        }
        if self.sample_rate == 0 {
            return Err(Error::InvalidConfig("sample rate must be positive".into()));
        }
        if !(self.master_gain.is_finite() && self.max_rir_seconds.is_finite() && self.max_rir_seconds > 0.0) {
            return Err(Error::InvalidConfig("master gain and maximum RIR length must be finite".into()));
        }
        if self.queue_capacity == 0 {
            return Err(Error::InvalidConfig("queue capacity must be positive".into()));
        }
        Ok(())
    }

    fn max_partitions(&self) -> usize {
        ((self.max_rir_seconds * self.sample_rate as f64).ceil() as usize).div_ceil(self.block_size)
    }
}

/// Target of an impulse-response submission.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Slot {
    /// Direct and early part of one source.
    Source(usize),
    /// Late reverberation shared by all sources.
    Late,
}

/// Prepared kernels of one response: one shared by all outputs, or one per
/// output channel.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelSet {
    kernels: Vec<Kernel>,
}

impl KernelSet {
    fn kernel(&self, channel: usize) -> &Kernel {
        self.kernels.get(channel).unwrap_or(&self.kernels[0])
    }

    fn shared(&self) -> bool {
        self.kernels.len() == 1
    }
}

struct Update {
    slot: Slot,
    kernels: Box<KernelSet>,
}

/// Convolution state of one input path: a source's direct and early part,
/// or the shared late path.
pub struct SourceState {
    pub slot: Slot,
    delay_line: DelayLine,
    current: Option<Box<KernelSet>>,
    pending: Option<Box<KernelSet>>,
}

impl SourceState {
    fn new(slot: Slot, block: usize, partitions: usize) -> Self {
        Self { slot, delay_line: DelayLine::new(block, partitions), current: None, pending: None }
    }

    pub fn has_pending(&self) -> bool {
        self.pending.is_some()
    }
}

/// Shared late path and engine-wide settings.
pub struct SceneAudioState {
    pub late: SourceState,
    pub sample_rate: u32,
    pub block_size: usize,
    pub master_gain: f64,
}

/// Control-context half: prepares kernels and hands them to the engine.
pub struct RenderController {
    config: RenderConfig,
    transforms: Transforms,
    max_partitions: usize,
    updates: Producer<Update>,
    retired: Consumer<Box<KernelSet>>,
}

impl RenderController {
    pub fn config(&self) -> &RenderConfig {
        &self.config
    }

    /// Prepares `rir` and queues it for `slot`. The engine switches to it at
    /// its next block boundary, crossfading over one block from the
    /// previous response; the first response of a slot applies directly.
    pub fn submit_rir(&mut self, slot: Slot, rir: &RoomImpulseResponse) -> Result<()> {
        self.collect_retired();
        if rir.sample_rate != self.config.sample_rate {
            return Err(Error::RateMismatch { expected: self.config.sample_rate, found: rir.sample_rate });
        }
        rir.validate()?;
        if let Slot::Source(id) = slot {
            if id >= self.config.sources {
                return Err(Error::InvalidConfig(format!("source {id} out of range 0..{}", self.config.sources)));
            }
        }
        if rir.channel_count() != 1 && rir.channel_count() != self.config.channels {
            return Err(Error::InvalidConfig(format!(
                "{}-channel response for a {}-channel engine",
                rir.channel_count(),
                self.config.channels
            )));
        }
        if rir.len().div_ceil(self.config.block_size) > self.max_partitions {
            return Err(Error::InvalidLength(format!(
                "response of {} samples exceeds the {} s maximum",
                rir.len(),
                self.config.max_rir_seconds
            )));
        }
        let kernels = rir.channels.iter().map(|c| Kernel::prepare(c, &mut self.transforms)).collect();
        let update = Update { slot, kernels: Box::new(KernelSet { kernels }) };
        self.updates.push(update).map_err(|_| Error::QueueFull)
    }

    /// Frees kernels the engine has replaced. Returns how many were freed.
    pub fn collect_retired(&mut self) -> usize {
        let mut n = 0;
        while self.retired.pop().is_ok() {
            n += 1;
        }
        n
    }
}

/// Audio-context half: renders blocks without blocking or allocating.
pub struct RenderEngine {
    sources: Vec<SourceState>,
    scene: SceneAudioState,
    channels: usize,
    transforms: Transforms,
    updates: Consumer<Update>,
    retired: Producer<Box<KernelSet>>,
    input: Vec<f64>,
    late_input: Vec<f64>,
    old_out: Vec<f64>,
    new_out: Vec<f64>,
    mix: Vec<Vec<f64>>,
}

impl RenderEngine {
    /// Builds the two halves of an engine connected by a lock-free exchange.
    pub fn create(config: RenderConfig) -> Result<(RenderController, RenderEngine)> {
        config.validate()?;
        let block = config.block_size;
        let max_partitions = config.max_partitions();
        let slots = config.sources + 1;
        let (updates_tx, updates_rx) = RingBuffer::new(config.queue_capacity);
        // Every live kernel is retired at most once and the controller drains
        // before each submission, so this never fills.
        let (retired_tx, retired_rx) = RingBuffer::new(config.queue_capacity + 2 * slots + 1);
        let engine = RenderEngine {
            sources: (0..config.sources).map(|s| SourceState::new(Slot::Source(s), block, max_partitions)).collect(),
            scene: SceneAudioState {
                late: SourceState::new(Slot::Late, block, max_partitions),
                sample_rate: config.sample_rate,
                block_size: block,
                master_gain: config.master_gain,
            },
            channels: config.channels,
            transforms: Transforms::new(block),
            updates: updates_rx,
            retired: retired_tx,
            input: vec![0.0; block],
            late_input: vec![0.0; block],
            old_out: vec![0.0; block],
            new_out: vec![0.0; block],
            mix: vec![vec![0.0; block]; config.channels],
        };
        let controller = RenderController {
            transforms: Transforms::new(block),
            max_partitions,
            updates: updates_tx,
            retired: retired_rx,
            config,
        };
        Ok((controller, engine))
    }

    pub fn block_size(&self) -> usize {
        self.scene.block_size
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn sources(&self) -> &[SourceState] {
        &self.sources
    }

    pub fn scene(&self) -> &SceneAudioState {
        &self.scene
    }

    fn retire(retired: &mut Producer<Box<KernelSet>>, kernels: Box<KernelSet>) {
        // Capacity is sized so this cannot fail; dropping here is the fallback.
        let _ = retired.push(kernels);
    }

    fn apply_updates(&mut self) {
        while let Ok(update) = self.updates.pop() {
            let state = match update.slot {
                Slot::Source(id) => &mut self.sources[id],
                Slot::Late => &mut self.scene.late,
            };
            if let Some(old) = state.pending.replace(update.kernels) {
                Self::retire(&mut self.retired, old);
            }
        }
    }

    /// Renders one block. `inputs` holds one block per source; `output` is
    /// interleaved with `channels` samples per frame.
    pub fn render_block(&mut self, inputs: &[&[f32]], output: &mut [f32]) -> Result<()> {
        let block = self.scene.block_size;
        if inputs.len() != self.sources.len() {
            return Err(Error::InvalidConfig(format!("{} inputs for {} sources", inputs.len(), self.sources.len())));
        }
        if let Some(bad) = inputs.iter().find(|x| x.len() != block) {
            return Err(Error::BlockSizeMismatch { expected: block, found: bad.len() });
        }
        if output.len() != block * self.channels {
            return Err(Error::BlockSizeMismatch { expected: block * self.channels, found: output.len() });
        }
        self.apply_updates();

        self.mix.iter_mut().for_each(|m| m.fill(0.0));
        self.late_input.fill(0.0);
        for (state, samples) in self.sources.iter_mut().zip(inputs) {
            for ((x, l), &s) in self.input.iter_mut().zip(self.late_input.iter_mut()).zip(samples.iter()) {
                *x = s as f64;
                *l += s as f64;
            }
            state.delay_line.push(&self.input, &mut self.transforms);
            Self::convolve_into(
                state,
                &mut self.transforms,
                &mut self.old_out,
                &mut self.new_out,
                &mut self.mix,
                &mut self.retired,
            );
        }
        let late = &mut self.scene.late;
        late.delay_line.push(&self.late_input, &mut self.transforms);
        Self::convolve_into(late, &mut self.transforms, &mut self.old_out, &mut self.new_out, &mut self.mix, &mut self.retired);

        let gain = self.scene.master_gain;
        for (n, frame) in output.chunks_exact_mut(self.channels).enumerate() {
            for (c, o) in frame.iter_mut().enumerate() {
                *o = (self.mix[c][n] * gain) as f32;
            }
        }
        Ok(())
    }

    /// Adds the output of `state` to `mix`, crossfading over this block when
    /// a new kernel is pending.
    fn convolve_into(
        state: &mut SourceState,
        transforms: &mut Transforms,
        old_out: &mut [f64],
        new_out: &mut [f64],
        mix: &mut [Vec<f64>],
        retired: &mut Producer<Box<KernelSet>>,
    ) {
        if state.current.is_none() {
            // Nothing to fade from: the first response applies at once.
            match state.pending.take() {
                Some(first) => state.current = Some(first),
                None => return,
            }
        }
        let block = old_out.len();
        let shared = state.current.as_ref().map_or(true, |k| k.shared()) && state.pending.as_ref().map_or(true, |k| k.shared());
        let outputs = if shared { 1 } else { mix.len() };
        for c in 0..outputs {
            match &state.current {
                Some(k) => state.delay_line.convolve(k.kernel(c), transforms, old_out),
                None => old_out.fill(0.0),
            }
            if let Some(k) = &state.pending {
                state.delay_line.convolve(k.kernel(c), transforms, new_out);
                for (n, (o, &y)) in old_out.iter_mut().zip(new_out.iter()).enumerate() {
                    let t = (n + 1) as f64 / block as f64;
                    *o = (1.0 - t) * *o + t * y;
                }
            }
            let targets = if shared { 0..mix.len() } else { c..c + 1 };
            for m in &mut mix[targets] {
                for (a, &y) in m.iter_mut().zip(old_out.iter()) {
                    *a += y;
                }
            }
        }
        if let Some(next) = state.pending.take() {
            if let Some(old) = state.current.replace(next) {
                Self::retire(retired, old);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rir(data: Vec<f64>) -> RoomImpulseResponse {
        RoomImpulseResponse { sample_rate: 48000, channels: vec![data], direct_index: 0, early_end: 0, late_onset: 0 }
    }

    fn config(block: usize) -> RenderConfig {
        RenderConfig { block_size: block, max_rir_seconds: 1.0, ..RenderConfig::default() }
    }

    #[test]
    fn rejects_bad_block_sizes() {
        for block in [32, 100, 8192] {
            assert!(matches!(RenderEngine::create(config(block)), Err(Error::InvalidConfig(_))));
        }
    }

    #[test]
    fn identity_kernel_passes_input() {
        let (mut ctl, mut eng) = RenderEngine::create(config(64)).unwrap();
        ctl.submit_rir(Slot::Source(0), &RoomImpulseResponse::impulse(48000, 0, 1)).unwrap();
        let input: Vec<f32> = (0..64).map(|i| (i as f32 * 0.1).sin()).collect();
        let mut out = vec![0.0; 64];
        eng.render_block(&[&input], &mut out).unwrap();
        let second = vec![0.25f32; 64];
        eng.render_block(&[&second], &mut out).unwrap();
        assert!(out.iter().all(|&v| (v - 0.25).abs() < 1e-6));
    }

    #[test]
    fn wrong_block_length_is_rejected() {
        let (_, mut eng) = RenderEngine::create(config(64)).unwrap();
        let mut out = vec![0.0; 64];
        assert_eq!(eng.render_block(&[&[0.0; 63]], &mut out), Err(Error::BlockSizeMismatch { expected: 64, found: 63 }));
    }

    #[test]
    fn rate_mismatch_is_rejected_at_submission() {
        let (mut ctl, _) = RenderEngine::create(config(64)).unwrap();
        let mut r = rir(vec![1.0]);
        r.sample_rate = 44100;
        assert_eq!(ctl.submit_rir(Slot::Late, &r), Err(Error::RateMismatch { expected: 48000, found: 44100 }));
    }

    #[test]
    fn replaced_kernels_come_back() {
        let (mut ctl, mut eng) = RenderEngine::create(config(64)).unwrap();
        let mut out = vec![0.0; 64];
        for _ in 0..3 {
            ctl.submit_rir(Slot::Source(0), &rir(vec![0.5; 10])).unwrap();
        }
        eng.render_block(&[&[0.0; 64]], &mut out).unwrap();
        assert_eq!(ctl.collect_retired(), 2);
        assert!(!eng.sources()[0].has_pending());
        ctl.submit_rir(Slot::Source(0), &rir(vec![0.5; 10])).unwrap();
        eng.render_block(&[&[0.0; 64]], &mut out).unwrap();
        assert_eq!(ctl.collect_retired(), 1);
    }
}
