//! Room impulse response synthesis: Eyring baseline decay, image-source
//! early reflections, shaped-noise late reverberation and composition.

pub mod compose;
pub mod eyring;
pub mod ism;
pub mod late;
pub mod scene;

pub use compose::{compose_rir, render_early, DirectPath, LateComponent, RoomImpulseResponse, PEAK_LIMIT};
pub use eyring::{brightness_tilt, eyring_rt60, mean_absorption, refine_rt60, MAX_RT60, MIN_RT60};
pub use ism::{
    compute_image_sources, image_coordinate, reflection_counts, synthesize_early, ImageSource, ReflectionTap,
    MAX_ISM_ORDER, MIN_DISTANCE,
};
pub use late::{synthesize_late, synthesize_late_with, LateReverbSpec, DECAY_CONSTANT};
pub use scene::{
    channel_seed, default_length, default_positions, late_onset, DecayModel, RoomAcoustics, SceneRirs,
    SynthesisConfig, SynthesisRtModel, SynthesizedRir, Synthesizer, MIXING_TIME, ONSET_GAP,
};
