use std::path::{Path, PathBuf};

use roomsynth_core::context::ParameterTable;
use roomsynth_core::material::MaterialLibrary;
use roomsynth_core::render::{RenderConfig, DEFAULT_BLOCK_SIZE};
use roomsynth_core::synthesis::{SynthesisConfig, MAX_ISM_ORDER};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

/// Environment variable naming the configuration file.
pub const CONFIG_ENV: &str = "ROOMSYNTH_CONFIG";

/// Run configuration read from TOML. Every key is optional.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub sample_rate: u32,
    pub block_size: usize,
    pub max_order: usize,
    pub speed_of_sound: f64,
    pub seed: u64,
    /// Output channels of synthesized responses.
    pub channels: usize,
    /// Fixed response length in seconds.
    pub rir_seconds: Option<f64>,
    /// Response resubmissions per second during replay.
    pub cadence_hz: f64,
    pub master_gain: f64,
    /// Parameter table written by `calibrate`; built-in defaults otherwise.
    pub parameter_table: Option<PathBuf>,
    /// Absorption library in the tab-separated format; built-in otherwise.
    pub material_library: Option<PathBuf>,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            sample_rate: 48000,
            block_size: DEFAULT_BLOCK_SIZE,
            max_order: 2,
            speed_of_sound: 343.0,
            seed: 0,
            channels: 1,
            rir_seconds: None,
            cadence_hz: 2.0,
            master_gain: 1.0,
            parameter_table: None,
            material_library: None,
        }
    }
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub sample_rate: Option<u32>,
}

impl Config {
    pub fn parse(text: &str) -> CliResult<Self> {
        let config: Config = toml::from_str(text).map_err(|e| CliError::Parse(format!("config: {}", e.message())))?;
        config.validate()?;
        Ok(config)
    }

    /// Reads `path` when given, defaults otherwise, then applies overrides.
    /// Relative table and library paths resolve against the file's directory.
    pub fn load(path: Option<&Path>, overrides: &Overrides) -> CliResult<Self> {
        let mut config = match path {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
                let mut config = Self::parse(&text)?;
                let base = path.parent().unwrap_or(Path::new(""));
                for p in [&mut config.parameter_table, &mut config.material_library].into_iter().flatten() {
                    if p.is_relative() {
                        *p = base.join(&*p);
                    }
                }
                config
            }
            None => Self::default(),
        };
        if let Some(seed) = overrides.seed {
            config.seed = seed;
        }
        if let Some(rate) = overrides.sample_rate {
            config.sample_rate = rate;
        }
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> CliResult<()> {
        let bad = |m: String| Err(CliError::InvalidArgument(m));
        if self.sample_rate == 0 {
            return bad("sample_rate must be positive".into());
        }
        if self.max_order > MAX_ISM_ORDER {
            return bad(format!("max_order {} exceeds {MAX_ISM_ORDER}", self.max_order));
        }
        if !(self.speed_of_sound > 0.0 && self.speed_of_sound.is_finite()) {
            return bad("speed_of_sound must be positive".into());
        }
        if !(self.cadence_hz > 0.0 && self.cadence_hz.is_finite()) {
            return bad("cadence_hz must be positive".into());
        }
        if let Some(len) = self.rir_seconds {
            if !(len > 0.0 && len.is_finite()) {
                return bad("rir_seconds must be positive".into());
            }
        }
        self.render(1, self.channels).validate()?;
        Ok(())
    }

    pub fn synthesis(&self) -> SynthesisConfig {
        SynthesisConfig {
            sample_rate: self.sample_rate as f64,
            max_order: self.max_order,
            speed_of_sound: self.speed_of_sound,
            seed: self.seed,
            channels: self.channels,
            rir_length: self.rir_seconds,
        }
    }

    pub fn render(&self, sources: usize, channels: usize) -> RenderConfig {
        RenderConfig {
            sample_rate: self.sample_rate,
            block_size: self.block_size,
            channels,
            sources,
            master_gain: self.master_gain,
            ..RenderConfig::default()
        }
    }

    pub fn parameter_table(&self) -> CliResult<ParameterTable> {
        match &self.parameter_table {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
                Ok(ParameterTable::parse(&text)?)
            }
            None => Ok(ParameterTable::default_table()),
        }
    }

    pub fn material_library(&self) -> CliResult<MaterialLibrary> {
        match &self.material_library {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
                Ok(MaterialLibrary::parse(&text)?)
            }
            None => Ok(MaterialLibrary::builtin()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        assert_eq!(Config::parse("").unwrap(), Config::default());
    }

    #[test]
    fn flags_override_file_values() {
        let dir = std::env::temp_dir().join(format!("roomsynth-config-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("run.toml");
        std::fs::write(&path, "seed = 3\nsample_rate = 44100\ncadence_hz = 4.0\n").unwrap();
        let config = Config::load(Some(&path), &Overrides { seed: Some(9), sample_rate: None }).unwrap();
        assert_eq!((config.seed, config.sample_rate, config.cadence_hz), (9, 44100, 4.0));
        std::fs::remove_dir_all(dir).unwrap();
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(matches!(Config::parse("sampel_rate = 1"), Err(CliError::Parse(_))));
    }

    #[test]
    fn order_cap_is_enforced() {
        assert!(Config::parse("max_order = 9").is_err());
    }
}
