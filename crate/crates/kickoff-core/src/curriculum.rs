//! Curriculum orchestration: the three training stages, fixed-opponent
//! wiring, checkpoint cadence over the tail of a run, and the
//! higher-control-time-step (HCT) variant.

use crate::arena;
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::matd3::{RewardMode, Trainer, TrainerConfig};
use crate::net::checkpoint;
use crate::net::Mlp;
use crate::observe;
use crate::pitch::PitchConfig;
use crate::policy::NetPolicy;
use crate::reward::RewardParams;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

/// Training stage. Each stage fixes the match population: total players and
/// how many of them learn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum StageId {
    /// Solo scoring: one learner, an empty field.
    S1_1v0,
    /// One learner vs the frozen stage-1 champion.
    S2_1v1,
    /// Two learners vs the frozen stage-2 champion team.
    S3_2v2,
}

impl StageId {
    pub fn n_total(self) -> usize {
        match self {
            StageId::S1_1v0 => 1,
            StageId::S2_1v1 => 2,
            StageId::S3_2v2 => 4,
        }
    }

    pub fn n_train(self) -> usize {
        match self {
            StageId::S1_1v0 | StageId::S2_1v1 => 1,
            StageId::S3_2v2 => 2,
        }
    }

    /// Team id per agent index: learners first (team 0), then fixed
    /// opponents (team 1).
    pub fn team_assignment(self) -> Vec<u8> {
        match self {
            StageId::S1_1v0 => vec![0],
            StageId::S2_1v1 => vec![0, 1],
            StageId::S3_2v2 => vec![0, 0, 1, 1],
        }
    }

    /// Number of other agents each player of this stage observes.
    pub fn n_observed_others(self) -> usize {
        self.n_total() - 1
    }

    /// Observation dimension for policies native to this stage.
    pub fn obs_dim(self) -> usize {
        observe::obs_dim(self.n_observed_others())
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "1v0" => Ok(StageId::S1_1v0),
            "1v1" => Ok(StageId::S2_1v1),
            "2v2" => Ok(StageId::S3_2v2),
            other => Err(Error::Config(format!(
                "unknown stage '{other}' (expected 1v0, 1v1 or 2v2)"
            ))),
        }
    }

    pub fn predecessor(self) -> Option<StageId> {
        match self {
            StageId::S1_1v0 => None,
            StageId::S2_1v1 => Some(StageId::S1_1v0),
            StageId::S3_2v2 => Some(StageId::S2_1v1),
        }
    }
}

impl fmt::Display for StageId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            StageId::S1_1v0 => "1v0",
            StageId::S2_1v1 => "1v1",
            StageId::S3_2v2 => "2v2",
        };
        f.write_str(name)
    }
}

/// Stage-3 wiring: which trained player each fixed stage-2 opponent
/// observes. The binding is a bijection and stays constant for a whole run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OpponentBinding {
    /// `observed_player[k]` is the learner index watched by fixed opponent k.
    observed_player: Vec<usize>,
}

impl OpponentBinding {
    pub fn observed_by(&self, opponent_index: usize) -> usize {
        self.observed_player[opponent_index]
    }
}

/// Assign each fixed stage-2 opponent a single trained player to observe for
/// the whole match. Default is the identity binding (opponent k watches
/// player k); `swapped` crosses them.
pub fn bind_opponents(n_learners: usize, swapped: bool) -> OpponentBinding {
    debug_assert_eq!(n_learners, 2);
    let observed_player = if swapped { vec![1, 0] } else { vec![0, 1] };
    OpponentBinding { observed_player }
}

/// Checkpoint cadence: every `interval` steps during the last `tail`
/// fraction of a `t_train`-step run.
pub fn checkpoint_steps(t_train: u64, interval: u64, tail: f64) -> Vec<u64> {
    let window_start = (t_train as f64 * (1.0 - tail)).ceil() as u64;
    (1..=t_train / interval)
        .map(|k| k * interval)
        .filter(|&s| s >= window_start)
        .collect()
}

/// Serialized agent snapshot descriptor stored alongside the parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub stage: StageId,
    pub global_step: u64,
    pub seed: u64,
    pub eval: Option<EvalSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub success_rate: f64,
    pub mean_episode_length: f64,
    pub mean_vel_to_ball: f64,
}

/// Write a checkpoint: meta plus one actor per trained agent (one for
/// stages 1–2, two for stage 3). Bit-exact round trip.
pub fn save_checkpoint(path: &Path, meta: &CheckpointMeta, actors: &[Mlp]) -> Result<()> {
    checkpoint::save(path, meta, actors)
}

/// Load a checkpoint saved by [`save_checkpoint`], verifying magic and
/// format version.
pub fn load_checkpoint(path: &Path) -> Result<(CheckpointMeta, Vec<Mlp>)> {
    checkpoint::load(path)
}

/// Frozen opposition for a stage run.
pub enum Opposition {
    /// Stage 1: empty field.
    None,
    /// Stage 2: the stage-1 champion.
    Single(Mlp),
    /// Stage 3: the stage-2 champion team plus its observation binding.
    Team([Mlp; 2], OpponentBinding),
}

/// Everything produced by one stage run.
pub struct StageArtifacts {
    pub run_dir: PathBuf,
    pub stats_path: PathBuf,
    pub checkpoint_paths: Vec<PathBuf>,
    /// Success rate over the trailing 50-episode window at the end of the run.
    pub final_window_success: Option<f64>,
    /// Step at which the early-stop threshold was first met, if any.
    pub stopped_at: u64,
}

/// Options controlling a [`run_stage`] invocation beyond the plain configs.
pub struct StageOptions {
    pub reward_mode: RewardMode,
    pub es_enabled: bool,
    pub hct_enabled: bool,
    /// Stop as soon as the 50-episode success window reaches this value.
    pub early_stop_success: Option<f64>,
    /// Write per-step stats rows (`stats.csv`); always on for CLI runs.
    pub write_stats: bool,
}

impl Default for StageOptions {
    fn default() -> Self {
        Self {
            reward_mode: RewardMode::Dense,
            es_enabled: true,
            hct_enabled: false,
            early_stop_success: None,
            write_stats: true,
        }
    }
}

/// Run one curriculum stage: T_train trainer iterations with auto-resetting
/// episodes, checkpoints every 10 000 steps over the last 20% of the run,
/// and a per-step stats stream.
///
/// Stage 1 degenerates to single-agent TD3 (no opponents, experience
/// sharing vacuous). HCT doubles the control time step for data collection
/// and training; evaluation elsewhere always uses the base clock.
pub fn run_stage(
    stage: StageId,
    trainer_config: &TrainerConfig,
    pitch_config: &PitchConfig,
    options: &StageOptions,
    opposition: Opposition,
    seed: u64,
    run_dir: &Path,
) -> Result<StageArtifacts> {
    let mut pitch = pitch_config.clone();
    if options.hct_enabled {
        pitch.control_dt = pitch_config.control_dt * 2.0;
    }
    pitch.validate()?;
    let reward_params = RewardParams::for_pitch(&pitch);

    match (stage, &opposition) {
        (StageId::S1_1v0, Opposition::None) => {}
        (StageId::S2_1v1, Opposition::Single(actor)) => {
            if actor.arch().input_dim() != StageId::S1_1v0.obs_dim() {
                return Err(Error::Contract(format!(
                    "stage-2 opposition must be a 1v0 policy ({}-dim obs), got {}-dim",
                    StageId::S1_1v0.obs_dim(),
                    actor.arch().input_dim()
                )));
            }
        }
        (StageId::S3_2v2, Opposition::Team(actors, _)) => {
            for actor in actors {
                if actor.arch().input_dim() != StageId::S2_1v1.obs_dim() {
                    return Err(Error::Contract(format!(
                        "stage-3 opposition must be 1v1 policies ({}-dim obs), got {}-dim",
                        StageId::S2_1v1.obs_dim(),
                        actor.arch().input_dim()
                    )));
                }
            }
        }
        (s, _) => {
            return Err(Error::MissingArtifact(format!(
                "stage {s} requires the matching predecessor champion as opposition"
            )));
        }
    }

    fs::create_dir_all(run_dir)?;
    let ckpt_dir = run_dir.join("checkpoints");
    fs::create_dir_all(&ckpt_dir)?;

    // Observation layout schema, so checkpoints stay portable.
    let schema_path = run_dir.join("obs_schema.txt");
    fs::write(&schema_path, observe::layout_schema(stage.n_observed_others()))?;

    let fixed: Vec<NetPolicy> = match opposition {
        Opposition::None => vec![],
        Opposition::Single(actor) => vec![NetPolicy::new(actor, vec![])],
        Opposition::Team(actors, binding) => {
            let [a, b] = actors;
            vec![
                NetPolicy::new(a, vec![binding.observed_by(0)]),
                NetPolicy::new(b, vec![binding.observed_by(1)]),
            ]
        }
    };

    let mut trainer = Trainer::new(
        stage,
        trainer_config.clone(),
        pitch,
        reward_params,
        options.reward_mode,
        options.es_enabled,
        fixed,
        seed,
    )?;

    let stats_path = run_dir.join("stats.csv");
    let mut stats = if options.write_stats {
        let file = fs::File::create(&stats_path)?;
        let mut w = std::io::BufWriter::new(file);
        writeln!(w, "{}", trainer.stats_header())?;
        Some(w)
    } else {
        None
    };

    let cadence = checkpoint_steps(trainer_config.t_train, 10_000, 0.20);
    let mut checkpoint_paths = Vec::new();
    let mut final_window = None;
    let mut stopped_at = trainer_config.t_train;

    for t in 1..=trainer_config.t_train {
        let row = trainer.step_iteration()?;
        if let Some(w) = stats.as_mut() {
            writeln!(w, "{row}")?;
        }
        let window = trainer.success_window();
        if window.is_some() {
            final_window = window;
        }
        if cadence.contains(&t) {
            let meta = CheckpointMeta { stage, global_step: t, seed, eval: None };
            let path = ckpt_dir.join(format!("step_{t:010}.ckpt"));
            save_checkpoint(&path, &meta, &trainer.actor_params())?;
            checkpoint_paths.push(path);
        }
        if let (Some(threshold), Some(success)) = (options.early_stop_success, window) {
            if success >= threshold {
                stopped_at = t;
                break;
            }
        }
    }
    if let Some(mut w) = stats {
        w.flush()?;
    }

    // Always leave a final snapshot for selection pools and later stages.
    let final_path = ckpt_dir.join(format!("step_{stopped_at:010}.ckpt"));
    if !checkpoint_paths.iter().any(|p| p == &final_path) {
        let meta = CheckpointMeta { stage, global_step: stopped_at, seed, eval: None };
        save_checkpoint(&final_path, &meta, &trainer.actor_params())?;
        checkpoint_paths.push(final_path);
    }

    Ok(StageArtifacts {
        run_dir: run_dir.to_path_buf(),
        stats_path,
        checkpoint_paths,
        final_window_success: final_window,
        stopped_at,
    })
}

/// Deterministic run directory for `(stage, seed)` under an output root.
pub fn run_dir_for(output_root: &Path, stage: StageId, seed: u64) -> PathBuf {
    output_root.join(format!("stage_{stage}_seed_{seed}"))
}

/// Write the effective configuration snapshot into a run directory.
pub fn write_config_snapshot(run_dir: &Path, config: &RunConfig) -> Result<()> {
    fs::create_dir_all(run_dir)?;
    fs::write(run_dir.join("config.toml"), config.to_toml()?)?;
    Ok(())
}

/// Load a champion produced by `arena::select_champion` from its audit
/// pointer file: one checkpoint path per line.
pub fn load_champion_actors(champion_file: &Path) -> Result<Vec<Mlp>> {
    let text = fs::read_to_string(champion_file).map_err(|e| {
        Error::MissingArtifact(format!("champion file {}: {e}", champion_file.display()))
    })?;
    let mut actors = Vec::new();
    for line in text.lines().filter(|l| !l.trim().is_empty()) {
        let path = PathBuf::from(line.trim());
        let (_, mut nets) = load_checkpoint(&path)?;
        actors.append(&mut nets);
    }
    if actors.is_empty() {
        return Err(Error::MissingArtifact(format!(
            "champion file {} lists no checkpoints",
            champion_file.display()
        )));
    }
    Ok(actors)
}

/// Convenience wrapper used by the CLI and tests: evaluate a checkpoint pool
/// and pick a champion per the stage's selection procedure.
pub fn select_champion_from_dir(
    pool_dir: &Path,
    stage: StageId,
    pitch: &PitchConfig,
    selection: &arena::SelectionConfig,
) -> Result<arena::SelectionReport> {
    let mut entries: Vec<PathBuf> = fs::read_dir(pool_dir)
        .map_err(|e| Error::MissingArtifact(format!("pool dir {}: {e}", pool_dir.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().map(|x| x == "ckpt").unwrap_or(false))
        .collect();
    entries.sort();
    if entries.is_empty() {
        return Err(Error::MissingArtifact(format!(
            "no .ckpt files in {}",
            pool_dir.display()
        )));
    }
    let mut pool = Vec::new();
    let mut skipped = Vec::new();
    for path in entries {
        match load_checkpoint(&path) {
            Ok((meta, actors)) => pool.push(arena::PoolEntry { path, meta, actors }),
            Err(err) => skipped.push((path, err.to_string())),
        }
    }
    if pool.is_empty() {
        return Err(Error::Selection("every checkpoint in the pool failed to load".into()));
    }
    let mut report = arena::select_champion(pool, stage, pitch, selection)?;
    report.skipped = skipped;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stage_populations_match_definition() {
        assert_eq!(StageId::S1_1v0.n_total(), 1);
        assert_eq!(StageId::S1_1v0.n_train(), 1);
        assert_eq!(StageId::S2_1v1.n_total(), 2);
        assert_eq!(StageId::S2_1v1.n_train(), 1);
        assert_eq!(StageId::S3_2v2.n_total(), 4);
        assert_eq!(StageId::S3_2v2.n_train(), 2);
    }

    #[test]
    fn checkpoint_cadence_matches_paper_scale_arithmetic() {
        // 10M-step run: 8.00M, 8.01M, …, 10.00M.
        let steps = checkpoint_steps(10_000_000, 10_000, 0.20);
        assert_eq!(steps.len(), 201);
        assert_eq!(steps[0], 8_000_000);
        assert_eq!(*steps.last().unwrap(), 10_000_000);

        // Desk-scale default: 300k-step stage-1 run.
        let steps = checkpoint_steps(300_000, 10_000, 0.20);
        assert_eq!(steps.len(), 7);
        assert_eq!(steps, vec![240_000, 250_000, 260_000, 270_000, 280_000, 290_000, 300_000]);
    }

    #[test]
    fn opponent_binding_is_fixed_and_swappable() {
        let identity = bind_opponents(2, false);
        assert_eq!(identity.observed_by(0), 0);
        assert_eq!(identity.observed_by(1), 1);
        let swapped = bind_opponents(2, true);
        assert_eq!(swapped.observed_by(0), 1);
        assert_eq!(swapped.observed_by(1), 0);
        // Bindings are plain data: querying never mutates them.
        for _ in 0..10 {
            assert_eq!(identity.observed_by(0), 0);
        }
    }

    #[test]
    fn stage_parse_round_trip() {
        for stage in [StageId::S1_1v0, StageId::S2_1v1, StageId::S3_2v2] {
            assert_eq!(StageId::parse(&stage.to_string()).unwrap(), stage);
        }
        assert!(StageId::parse("3v3").is_err());
    }
}
