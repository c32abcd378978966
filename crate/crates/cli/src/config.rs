//! Run configuration, read from and written as TOML.

use std::path::{Path, PathBuf};

use piconvae_core::attacks::{
    magnitude_grid, schedule_targets, target_count, AttackCampaign, AttackKind, Placement, DEFAULT_ATTACKED_FRACTION,
    DEFAULT_MAX_MAGNITUDE,
};
use piconvae_core::model::ModelConfig;
use piconvae_core::scoring::ScoreConfig;
use piconvae_core::telemetry::{Channel, GeneratorConfig, SeriesSet};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

/// Attack campaign as configured; targets are drawn from the test split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AttackSpec {
    pub kind: AttackKind,
    pub channel: Channel,
    /// Largest |α|.
    pub max_magnitude: f64,
    /// When set, every attacked sample gets exactly this |α|.
    pub magnitude: Option<f64>,
    /// Fraction of test samples attacked (rounded up).
    pub fraction: f64,
    pub placement: Placement,
    pub seed: u64,
}

impl Default for AttackSpec {
    fn default() -> Self {
        AttackSpec {
            kind: AttackKind::Combined,
            channel: Channel::V,
            max_magnitude: DEFAULT_MAX_MAGNITUDE,
            magnitude: None,
            fraction: DEFAULT_ATTACKED_FRACTION,
            placement: Placement::Random,
            seed: 7,
        }
    }
}

impl AttackSpec {
    /// The concrete campaign against `series`.
    pub fn campaign(&self, series: &SeriesSet) -> CliResult<AttackCampaign> {
        if !(self.fraction >= 0.0 && self.fraction <= 1.0) {
            return Err(CliError::Usage(format!("attack fraction {} outside [0, 1]", self.fraction)));
        }
        let m = self.max_magnitude;
        let (alpha_min, alpha_max) = match self.kind {
            AttackKind::Additive => (0.0, m),
            AttackKind::Deductive => (-m, 0.0),
            AttackKind::Combined => (-m, m),
        };
        let test = series.test_range();
        let count = target_count(test.len(), self.fraction);
        let targets = schedule_targets(test.len(), count, self.seed, self.placement)?
            .into_iter()
            .map(|k| k + test.start)
            .collect();
        Ok(AttackCampaign {
            kind: self.kind,
            alpha_min,
            alpha_max,
            fixed_magnitude: self.magnitude,
            channel: self.channel,
            target_indices: targets,
            seed: self.seed,
        })
    }
}

/// Magnitude levels of a sensitivity sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSpec {
    pub min: f64,
    pub max: f64,
    pub steps: usize,
}

impl Default for SweepSpec {
    fn default() -> Self {
        SweepSpec {
            min: 0.01,
            max: 0.05,
            steps: 5,
        }
    }
}

impl SweepSpec {
    pub fn levels(&self) -> CliResult<Vec<f64>> {
        Ok(magnitude_grid(self.min, self.max, self.steps)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// When set, overrides the generator, attack and model seeds.
    pub seed: Option<u64>,
    /// Parent of the timestamped run directories.
    pub output_dir: PathBuf,
    pub generator: GeneratorConfig,
    pub attack: AttackSpec,
    pub sweep: SweepSpec,
    pub model: ModelConfig,
    pub scoring: ScoreConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: None,
            output_dir: PathBuf::from("runs"),
            generator: GeneratorConfig::default(),
            attack: AttackSpec::default(),
            sweep: SweepSpec::default(),
            model: ModelConfig::default(),
            scoring: ScoreConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> CliResult<RunConfig> {
        let text = std::fs::read_to_string(path).map_err(CliError::io(path))?;
        RunConfig::from_toml(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
    }

    pub fn from_toml(text: &str) -> CliResult<RunConfig> {
        toml::from_str(text).map_err(|e| CliError::Usage(format!("invalid config: {e}")))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config serializes")
    }

    /// Applies the master seed and checks every section.
    pub fn resolve(mut self) -> CliResult<RunConfig> {
        if let Some(s) = self.seed {
            self.generator.seed = s;
            self.attack.seed = s;
            self.model.seed = s;
        }
        self.generator.validate()?;
        self.model.validate()?;
        self.scoring.validate()?;
        Ok(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_toml() {
        let c = RunConfig::default();
        let text = c.to_toml();
        assert_eq!(RunConfig::from_toml(&text).unwrap(), c);
    }

    #[test]
    fn partial_file_keeps_defaults() {
        let c = RunConfig::from_toml("seed = 3\n[model]\nepochs = 4\n").unwrap().resolve().unwrap();
        assert_eq!(c.model.epochs, 4);
        assert_eq!(c.model.seed, 3);
        assert_eq!(c.generator.seed, 3);
        assert_eq!(c.model.batch_size, 64);
    }

    #[test]
    fn unknown_channel_is_a_usage_error() {
        let e = RunConfig::from_toml("[attack]\nchannel = \"x\"\n").unwrap_err();
        assert_eq!(e.exit_code(), 1);
    }
}
