use std::path::{Path, PathBuf};

use reciprocity::deep::DeepPRConfig;
use reciprocity::{EnvSpec, Error, PRConfig, Result};
use serde::{Deserialize, Serialize};

/// Overrides the parent directory of every run's output.
pub const OUTPUT_ROOT_VAR: &str = "RECIPROCITY_OUTPUT_ROOT";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Iql,
    TabularPr,
    DeepPr,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingSection {
    pub epochs: usize,
    /// Interactions per epoch of the tabular learners.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inner_steps: Option<usize>,
    /// Interactions per epoch of the deep learner; defaults to the horizon.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steps_per_epoch: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snapshot_every: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub temperature: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub id: String,
    pub env: EnvSpec,
    pub algorithm: Algorithm,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pr: Option<PRConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub deep: Option<DeepPRConfig>,
    pub training: TrainingSection,
    pub seeds: Vec<u64>,
    pub output_dir: PathBuf,
}

/// Pulls the first back-quoted name out of a serde message.
fn quoted_field(msg: &str) -> Option<&str> {
    let start = msg.find('`')? + 1;
    let len = msg[start..].find('`')?;
    Some(&msg[start..start + len])
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| {
            let msg = e.to_string();
            let field = quoted_field(&msg).unwrap_or("config").to_string();
            Error::config(field, msg)
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config("config", format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.id.is_empty() || !self.id.chars().all(|c| c.is_ascii_alphanumeric() || "-_.".contains(c)) {
            return Err(Error::config("id", "use letters, digits, '-', '_' or '.'"));
        }
        if self.seeds.is_empty() {
            return Err(Error::config("seeds", "at least one seed"));
        }
        let mut sorted = self.seeds.clone();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::config("seeds", "seeds must be distinct"));
        }
        if self.training.epochs == 0 {
            return Err(Error::config("training.epochs", "must be positive"));
        }
        if self.training.snapshot_every == Some(0) {
            return Err(Error::config("training.snapshot_every", "must be positive"));
        }
        self.env.validate()?;
        match self.algorithm {
            Algorithm::Iql | Algorithm::TabularPr => {
                if !self.env.is_discrete() {
                    return Err(Error::config("algorithm", "tabular learners need a discrete env"));
                }
                let pr = self
                    .pr
                    .as_ref()
                    .ok_or_else(|| Error::config("pr", "required by tabular learners"))?;
                if self.training.inner_steps.is_none() {
                    return Err(Error::config("training.inner_steps", "required by tabular learners"));
                }
                self.tabular_options().validate()?;
                let env = self.env.build::<f64>()?;
                pr.validate(env.state_space().dim(), env.n_agents())
            }
            Algorithm::DeepPr => {
                if self.env.is_discrete() {
                    return Err(Error::config("env.kind", "deep_pr needs the point_mass env"));
                }
                let deep = self
                    .deep
                    .as_ref()
                    .ok_or_else(|| Error::config("deep", "required by deep_pr"))?;
                if self.training.steps_per_epoch == Some(0) {
                    return Err(Error::config("training.steps_per_epoch", "must be positive"));
                }
                deep.validate(self.env.n_agents())
            }
        }
    }

    pub fn tabular_options(&self) -> reciprocity::TrainOptions {
        let mut o = reciprocity::TrainOptions::new(self.training.epochs, self.training.inner_steps.unwrap_or(0));
        o.snapshot_every = self.training.snapshot_every;
        if let Some(t) = self.training.temperature {
            o.temperature = t;
        }
        o
    }

    pub fn deep_options(&self) -> reciprocity::deep::DeepTrainOptions {
        reciprocity::deep::DeepTrainOptions {
            epochs: self.training.epochs,
            steps_per_epoch: self.training.steps_per_epoch,
        }
    }

    /// `$RECIPROCITY_OUTPUT_ROOT/<id>` when the variable is set, else `output_dir`.
    pub fn resolve_output(&self) -> PathBuf {
        match std::env::var_os(OUTPUT_ROOT_VAR) {
            Some(root) if !root.is_empty() => PathBuf::from(root).join(&self.id),
            _ => self.output_dir.clone(),
        }
    }
}
