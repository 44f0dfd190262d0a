//! Run configuration: flat key = value sections, serialized as TOML.
//!
//! The file mirrors the physics, trainer, reward and selection parameters
//! plus the run axes (stage, reward mode, experience sharing, control time
//! step, seeds). Unknown keys are rejected so snapshots stay authoritative;
//! a snapshot written into a run directory reproduces the identical run.

use crate::curriculum::StageId;
use crate::error::{Error, Result};
use crate::matd3::{RewardMode, TrainerConfig};
use crate::pitch::PitchConfig;
use crate::reward::RewardParams;
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSection {
    /// "1v0", "1v1" or "2v2".
    pub stage: String,
    /// "dense" or "sparse".
    pub reward: String,
    /// Experience sharing: "on" or "off".
    pub es: String,
    /// Higher control time step: "on" or "off".
    pub hct: String,
    pub seeds: Vec<u64>,
    pub output: String,
    /// Champion file of the predecessor stage (required for 1v1/2v2).
    pub opponent: String,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            stage: "1v0".into(),
            reward: "dense".into(),
            es: "on".into(),
            hct: "off".into(),
            seeds: vec![7],
            output: "runs/out".into(),
            opponent: String::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RewardSection {
    pub lambda: f64,
    pub ball_progress_coeff: f64,
    pub step_penalty: f64,
}

impl Default for RewardSection {
    fn default() -> Self {
        Self { lambda: 0.03, ball_progress_coeff: 1.2, step_penalty: 0.1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SelectSection {
    /// Episodes per pool entry in the task evaluation.
    pub n_episodes: usize,
    /// Episodes per pairing in round robins.
    pub episodes_per_pair: usize,
    /// Keep the best success tier when the stage filter would empty the pool.
    pub relax_filter: bool,
    /// Equilibrium certificate tolerance at solver scale.
    pub nash_tol: f64,
}

impl Default for SelectSection {
    fn default() -> Self {
        Self { n_episodes: 100, episodes_per_pair: 10, relax_filter: false, nash_tol: 1e-8 }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub run: RunSection,
    pub pitch: PitchConfig,
    pub trainer: TrainerConfig,
    pub reward: RewardSection,
    pub select: SelectSection,
}

fn parse_switch(name: &str, value: &str) -> Result<bool> {
    match value {
        "on" => Ok(true),
        "off" => Ok(false),
        other => Err(Error::Config(format!("{name} must be 'on' or 'off', got '{other}'"))),
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let config: RunConfig =
            toml::from_str(text).map_err(|e| Error::Config(format!("config parse failed: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(format!("config serialization: {e}")))
    }

    pub fn validate(&self) -> Result<()> {
        let stage = self.stage()?;
        self.reward_mode()?;
        self.es_enabled()?;
        self.hct_enabled()?;
        self.pitch.validate()?;
        self.trainer.validate(stage)?;
        if !(self.reward.lambda > 0.0 && self.reward.lambda < 1.0) {
            return Err(Error::Config(format!(
                "reward lambda must be in (0, 1), got {}",
                self.reward.lambda
            )));
        }
        if self.run.seeds.is_empty() {
            return Err(Error::Config("at least one seed is required".into()));
        }
        if stage != StageId::S1_1v0 && self.run.opponent.is_empty() {
            return Err(Error::MissingArtifact(format!(
                "stage {stage} requires run.opponent to point at the predecessor champion file"
            )));
        }
        Ok(())
    }

    pub fn stage(&self) -> Result<StageId> {
        StageId::parse(&self.run.stage)
    }

    pub fn reward_mode(&self) -> Result<RewardMode> {
        RewardMode::parse(&self.run.reward)
    }

    pub fn es_enabled(&self) -> Result<bool> {
        parse_switch("run.es", &self.run.es)
    }

    pub fn hct_enabled(&self) -> Result<bool> {
        parse_switch("run.hct", &self.run.hct)
    }

    /// Reward scales for the effective pitch of this run (alpha and beta
    /// derive from the episode step budget, so they track HCT).
    pub fn reward_params(&self, effective_pitch: &PitchConfig) -> RewardParams {
        RewardParams::with_options(
            effective_pitch,
            self.reward.lambda,
            self.reward.ball_progress_coeff,
            self.reward.step_penalty,
        )
    }
}
