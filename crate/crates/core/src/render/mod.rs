//! Block-based convolution rendering with lock-free impulse-response updates.

mod convolver;
mod engine;

pub use convolver::{DelayLine, Kernel, Transforms};
pub use engine::{
    KernelSet, RenderConfig, RenderController, RenderEngine, SceneAudioState, Slot, SourceState, DEFAULT_BLOCK_SIZE,
    MAX_BLOCK_SIZE, MIN_BLOCK_SIZE,
};

use crate::error::{Error, Result};
use crate::synthesis::RoomImpulseResponse;

/// Renders whole signals through fixed responses. `config.sources` is taken
/// from `inputs`. The output holds one buffer per channel, long enough for
/// the full convolution tail.
pub fn render_offline(
    config: &RenderConfig,
    source_rirs: &[RoomImpulseResponse],
    late: Option<&RoomImpulseResponse>,
    inputs: &[Vec<f32>],
) -> Result<Vec<Vec<f32>>> {
    if inputs.is_empty() || source_rirs.len() != inputs.len() {
        return Err(Error::InvalidConfig(format!("{} responses for {} inputs", source_rirs.len(), inputs.len())));
    }
    let config = RenderConfig { sources: inputs.len(), ..config.clone() };
    let (mut controller, mut engine) = RenderEngine::create(config.clone())?;
    for (s, rir) in source_rirs.iter().enumerate() {
        controller.submit_rir(Slot::Source(s), rir)?;
    }
    if let Some(rir) = late {
        controller.submit_rir(Slot::Late, rir)?;
    }

    let input_len = inputs.iter().map(Vec::len).max().unwrap_or(0);
    let rir_len = source_rirs.iter().chain(late).map(RoomImpulseResponse::len).max().unwrap_or(1);
    let total = if input_len == 0 { 0 } else { input_len + rir_len - 1 };
    let block = config.block_size;
    let channels = config.channels;
    let mut outputs = vec![Vec::with_capacity(total.next_multiple_of(block)); channels];
    let mut blocks = vec![vec![0.0f32; block]; inputs.len()];
    let mut frame = vec![0.0f32; block * channels];
    let mut start = 0;
    while start < total {
        for (b, x) in blocks.iter_mut().zip(inputs) {
            b.fill(0.0);
            if start < x.len() {
                let end = (start + block).min(x.len());
                b[..end - start].copy_from_slice(&x[start..end]);
            }
        }
        let refs: Vec<&[f32]> = blocks.iter().map(Vec::as_slice).collect();
        engine.render_block(&refs, &mut frame)?;
        for (c, out) in outputs.iter_mut().enumerate() {
            out.extend(frame.iter().skip(c).step_by(channels));
        }
        start += block;
    }
    outputs.iter_mut().for_each(|o| o.truncate(total));
    Ok(outputs)
}
