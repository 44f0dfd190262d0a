//! Decentralized multi-agent TD3 with experience sharing.
//!
//! Each learner owns an actor, twin critics, their Polyak targets and an
//! independent replay buffer. Fixed opponents act through frozen policies
//! and contribute their own transitions — recorded under the learner-stage
//! observation layout from the opponent's perspective — to separate buffers
//! that experience-sharing batches draw from: ⌊M/(n_fixed + 1)⌋ transitions
//! per contributing buffer.
//!
//! Update schedule per the gated loop: every `update_interval` environment
//! steps (once warm), each learner performs `update_interval` critic
//! updates on one sampled batch; every `policy_delay`-th critic update also
//! refreshes the actor and all targets.

use crate::curriculum::StageId;
use crate::error::{Error, Result};
use crate::net::{adam_step, soft_update, AdamState, ArchSpec, Mlp};
use crate::observe;
use crate::pitch::{self, ActionCommand, PitchConfig, WorldState};
use crate::policy::{NetPolicy, Policy};
use crate::reward::{dense_reward, sparse_reward, RewardContext, RewardParams};
use crate::rng::{stream, Domain};
use ndarray::{Array1, Array2};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RewardMode {
    Dense,
    Sparse,
}

impl RewardMode {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "dense" => Ok(RewardMode::Dense),
            "sparse" => Ok(RewardMode::Sparse),
            other => Err(Error::Config(format!("unknown reward mode '{other}'"))),
        }
    }
}

/// One stored step of experience.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub obs: Vec<f64>,
    pub action: [f64; 3],
    pub reward: f64,
    pub next_obs: Vec<f64>,
    pub done: bool,
}

/// Fixed-capacity ring buffer with FIFO overwrite.
pub struct ReplayBuffer {
    capacity: usize,
    data: Vec<Transition>,
    cursor: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        Self { capacity, data: Vec::new(), cursor: 0 }
    }

    pub fn push(&mut self, t: Transition) {
        if self.data.len() < self.capacity {
            self.data.push(t);
        } else {
            self.data[self.cursor] = t;
            self.cursor = (self.cursor + 1) % self.capacity;
        }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn get(&self, i: usize) -> &Transition {
        &self.data[i]
    }

    /// `amount` distinct uniform indices.
    fn sample_indices(&self, rng: &mut ChaCha8Rng, amount: usize) -> Vec<usize> {
        rand::seq::index::sample(rng, self.data.len(), amount).into_vec()
    }
}

/// All trainer hyperparameters. Defaults follow the TD3 reference values
/// where the original leaves them unstated, with desk-scale network widths
/// and batch size so full runs stay laptop-sized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainerConfig {
    /// Total environment steps of a stage run.
    pub t_train: u64,
    /// Steps with uniform random actions seeding the buffers.
    pub t_warmup: u64,
    /// First step at which updates may run.
    pub t_after: u64,
    /// Batch size M.
    pub batch_size: usize,
    /// Gate modulus and inner update count u.
    pub update_interval: u64,
    /// Actor/target update period d, in critic updates.
    pub policy_delay: u64,
    pub gamma: f64,
    pub tau: f64,
    /// Exploration noise std.
    pub sigma: f64,
    /// Target policy smoothing noise std.
    pub sigma_tilde: f64,
    /// Target noise clip c.
    pub noise_clip: f64,
    pub lr_actor: f64,
    pub lr_critic: f64,
    pub buffer_capacity: usize,
    pub encoder_width: usize,
    pub trunk_widths: Vec<usize>,
}

impl Default for TrainerConfig {
    fn default() -> Self {
        Self {
            t_train: 300_000,
            t_warmup: 10_000,
            t_after: 10_000,
            batch_size: 128,
            update_interval: 1,
            policy_delay: 2,
            gamma: 0.99,
            tau: 0.005,
            sigma: 0.1,
            sigma_tilde: 0.2,
            noise_clip: 0.5,
            lr_actor: 1e-3,
            lr_critic: 1e-3,
            buffer_capacity: 1_000_000,
            encoder_width: 16,
            trunk_widths: vec![64, 64],
        }
    }
}

impl TrainerConfig {
    pub fn validate(&self, stage: StageId) -> Result<()> {
        if es_sample_size(self.batch_size, stage.n_total(), stage.n_train()) < 1 {
            return Err(Error::Config(format!(
                "batch_size {} too small for stage {stage}: per-buffer share would be empty",
                self.batch_size
            )));
        }
        if self.policy_delay < 1 || self.update_interval < 1 {
            return Err(Error::Config("policy_delay and update_interval must be ≥ 1".into()));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::Config(format!("gamma must be in (0, 1], got {}", self.gamma)));
        }
        if self.buffer_capacity < self.batch_size {
            return Err(Error::Config("buffer_capacity smaller than batch_size".into()));
        }
        if self.sigma < 0.0 || self.sigma_tilde < 0.0 || self.noise_clip < 0.0 {
            return Err(Error::Config("noise parameters must be non-negative".into()));
        }
        Ok(())
    }

    fn arch(&self, stage: StageId, head: crate::net::HeadKind) -> ArchSpec {
        let base = match head {
            crate::net::HeadKind::Actor => ArchSpec::actor(stage),
            crate::net::HeadKind::Critic => ArchSpec::critic(stage),
        };
        base.with_widths(self.encoder_width, self.trunk_widths.clone())
    }
}

/// Per-contributing-buffer sample size M′ = ⌊M / (N_total − N_train + 1)⌋.
pub fn es_sample_size(batch_size: usize, n_total: usize, n_train: usize) -> usize {
    batch_size / (n_total - n_train + 1)
}

/// A sampled mini-batch (own transitions first, then one block per fixed
/// opponent, in index order).
pub struct Batch {
    pub obs: Array2<f64>,
    pub actions: Array2<f64>,
    pub rewards: Array1<f64>,
    pub next_obs: Array2<f64>,
    pub done: Array1<f64>,
    /// Transitions contributed per source buffer.
    pub source_counts: Vec<usize>,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.obs.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Compose an experience-sharing batch: M′ uniform draws (without
/// replacement) from the learner's own buffer and from every fixed
/// opponent's buffer. Returns `None` while any contributing buffer has
/// fewer than M′ entries. With sharing disabled the batch is M own
/// transitions.
pub fn sample_es_batch(
    own: &ReplayBuffer,
    fixed: &[&ReplayBuffer],
    batch_size: usize,
    es_enabled: bool,
    rng: &mut ChaCha8Rng,
) -> Option<Batch> {
    let sources: Vec<&ReplayBuffer> = if es_enabled {
        std::iter::once(own).chain(fixed.iter().copied()).collect()
    } else {
        vec![own]
    };
    let share = if es_enabled {
        batch_size / sources.len()
    } else {
        batch_size
    };
    if share == 0 || sources.iter().any(|b| b.len() < share) {
        return None;
    }

    let total = share * sources.len();
    let obs_dim = sources[0].get(0).obs.len();
    let mut obs = Array2::zeros((total, obs_dim));
    let mut actions = Array2::zeros((total, 3));
    let mut rewards = Array1::zeros(total);
    let mut next_obs = Array2::zeros((total, obs_dim));
    let mut done = Array1::zeros(total);

    let mut row = 0;
    for buffer in &sources {
        for idx in buffer.sample_indices(rng, share) {
            let t = buffer.get(idx);
            obs.row_mut(row).assign(&Array1::from_vec(t.obs.clone()));
            actions.row_mut(row).assign(&Array1::from_vec(t.action.to_vec()));
            rewards[row] = t.reward;
            next_obs.row_mut(row).assign(&Array1::from_vec(t.next_obs.clone()));
            done[row] = if t.done { 1.0 } else { 0.0 };
            row += 1;
        }
    }
    Some(Batch {
        obs,
        actions,
        rewards,
        next_obs,
        done,
        source_counts: vec![share; sources.len()],
    })
}

/// Warmup steps draw uniform actions; afterwards the actor output plus
/// Gaussian exploration noise, clamped to the action box.
pub fn select_action(
    t: u64,
    t_warmup: u64,
    sigma: f64,
    actor: &Mlp,
    obs: &[f64],
    rng: &mut ChaCha8Rng,
) -> Result<[f64; 3]> {
    if t <= t_warmup {
        return Ok([
            rng.gen_range(-1.0..=1.0),
            rng.gen_range(-1.0..=1.0),
            rng.gen_range(-1.0..=1.0),
        ]);
    }
    let out = actor.forward_one(obs, None)?;
    let normal = Normal::new(0.0, sigma).map_err(|e| Error::Config(e.to_string()))?;
    let mut a = [0.0; 3];
    for (i, slot) in a.iter_mut().enumerate() {
        *slot = (out[i] + normal.sample(rng)).clamp(-1.0, 1.0);
    }
    Ok(a)
}

/// Single-sample TD target: y = r + γ·(1 − done)·min(q1, q2).
pub fn target_value(reward: f64, done: bool, gamma: f64, q1: f64, q2: f64) -> f64 {
    if done {
        reward
    } else {
        reward + gamma * q1.min(q2)
    }
}

struct Learner {
    actor: Mlp,
    critic1: Mlp,
    critic2: Mlp,
    target_actor: Mlp,
    target_critic1: Mlp,
    target_critic2: Mlp,
    opt_actor: AdamState,
    opt_critic1: AdamState,
    opt_critic2: AdamState,
    buffer: ReplayBuffer,
    updates_done: u64,
    action_rng: ChaCha8Rng,
    sample_rng: ChaCha8Rng,
    noise_rng: ChaCha8Rng,
}

/// Per-learner numbers from one trainer iteration.
#[derive(Debug, Clone, Default)]
pub struct LearnerStats {
    pub critic_loss: Option<f64>,
    pub actor_loss: Option<f64>,
    pub mean_q: Option<f64>,
    pub episode_return: Option<f64>,
}

/// One row of the training stats stream.
#[derive(Debug, Clone)]
pub struct StepStats {
    pub t: u64,
    pub learners: Vec<LearnerStats>,
    pub success_window: Option<f64>,
    pub episodes_done: u64,
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl fmt::Display for StepStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.t)?;
        for l in &self.learners {
            write!(
                f,
                ",{},{},{},{}",
                fmt_opt(l.critic_loss),
                fmt_opt(l.actor_loss),
                fmt_opt(l.mean_q),
                fmt_opt(l.episode_return)
            )?;
        }
        write!(f, ",{}", fmt_opt(self.success_window))
    }
}

/// Owns all mutable training state for one stage run.
pub struct Trainer {
    stage: StageId,
    config: TrainerConfig,
    pitch: PitchConfig,
    reward_params: RewardParams,
    reward_mode: RewardMode,
    es_enabled: bool,
    learners: Vec<Learner>,
    fixed: Vec<NetPolicy>,
    fixed_buffers: Vec<ReplayBuffer>,
    state: WorldState,
    ctxs: Vec<RewardContext>,
    cached_obs: Vec<Vec<f64>>,
    episode_return: Vec<f64>,
    last_episode_return: Vec<Option<f64>>,
    window: VecDeque<bool>,
    episodes_done: u64,
    reset_rng: ChaCha8Rng,
    t: u64,
}

impl Trainer {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        stage: StageId,
        config: TrainerConfig,
        pitch: PitchConfig,
        reward_params: RewardParams,
        reward_mode: RewardMode,
        es_enabled: bool,
        fixed: Vec<NetPolicy>,
        seed: u64,
    ) -> Result<Self> {
        pitch.validate()?;
        config.validate(stage)?;
        let n_fixed = stage.n_total() - stage.n_train();
        if fixed.len() != n_fixed {
            return Err(Error::Contract(format!(
                "stage {stage} needs {n_fixed} fixed opponents, got {}",
                fixed.len()
            )));
        }

        let mut learners = Vec::with_capacity(stage.n_train());
        for i in 0..stage.n_train() {
            let mut init_rng = stream(seed, Domain::Init, i as u64);
            let mut next_seed = || init_rng.gen::<u64>();
            let actor = Mlp::init(config.arch(stage, crate::net::HeadKind::Actor), next_seed())?;
            let critic1 = Mlp::init(config.arch(stage, crate::net::HeadKind::Critic), next_seed())?;
            let critic2 = Mlp::init(config.arch(stage, crate::net::HeadKind::Critic), next_seed())?;
            learners.push(Learner {
                target_actor: actor.clone(),
                target_critic1: critic1.clone(),
                target_critic2: critic2.clone(),
                opt_actor: AdamState::new(&actor, config.lr_actor),
                opt_critic1: AdamState::new(&critic1, config.lr_critic),
                opt_critic2: AdamState::new(&critic2, config.lr_critic),
                actor,
                critic1,
                critic2,
                buffer: ReplayBuffer::new(config.buffer_capacity),
                updates_done: 0,
                action_rng: stream(seed, Domain::Action, i as u64),
                sample_rng: stream(seed, Domain::Sample, i as u64),
                noise_rng: stream(seed, Domain::TargetNoise, i as u64),
            });
        }

        let fixed_buffers = (0..n_fixed).map(|_| ReplayBuffer::new(config.buffer_capacity)).collect();
        let mut reset_rng = stream(seed, Domain::Reset, 0);
        let state = pitch::reset(&pitch, stage, reset_rng.gen())?;
        let ctxs = state.team_of.iter().map(|&team| RewardContext::at_reset(team)).collect();
        let cached_obs = Self::all_obs(&state, &pitch, reward_params.lambda);

        Ok(Self {
            stage,
            es_enabled,
            reward_mode,
            learners,
            fixed,
            fixed_buffers,
            ctxs,
            cached_obs,
            episode_return: vec![0.0; stage.n_train()],
            last_episode_return: vec![None; stage.n_train()],
            window: VecDeque::with_capacity(50),
            episodes_done: 0,
            reset_rng,
            t: 0,
            state,
            config,
            pitch,
            reward_params,
        })
    }

    /// Learner-stage-layout observations for every player.
    fn all_obs(state: &WorldState, pitch: &PitchConfig, lambda: f64) -> Vec<Vec<f64>> {
        (0..state.n_agents())
            .map(|p| {
                let others = observe::canonical_others(state, p);
                observe::build_observation(state, p, &others, pitch, lambda)
            })
            .collect()
    }

    pub fn stats_header(&self) -> String {
        let mut cols = vec!["step".to_string()];
        for i in 0..self.learners.len() {
            cols.push(format!("critic_loss_{i}"));
            cols.push(format!("actor_loss_{i}"));
            cols.push(format!("mean_q_{i}"));
            cols.push(format!("episode_return_{i}"));
        }
        cols.push("success_window_50".to_string());
        cols.join(",")
    }

    /// Success rate over the trailing (up to 50) completed episodes.
    pub fn success_window(&self) -> Option<f64> {
        if self.window.is_empty() {
            return None;
        }
        let wins = self.window.iter().filter(|&&w| w).count();
        Some(wins as f64 / self.window.len() as f64)
    }

    pub fn episodes_done(&self) -> u64 {
        self.episodes_done
    }

    pub fn t(&self) -> u64 {
        self.t
    }

    pub fn learner_buffer(&self, i: usize) -> &ReplayBuffer {
        &self.learners[i].buffer
    }

    pub fn fixed_buffer(&self, j: usize) -> &ReplayBuffer {
        &self.fixed_buffers[j]
    }

    pub fn fixed_actor(&self, j: usize) -> &Mlp {
        self.fixed[j].actor()
    }

    pub fn learner_actor(&self, i: usize) -> &Mlp {
        &self.learners[i].actor
    }

    pub fn learner_critics(&self, i: usize) -> (&Mlp, &Mlp) {
        (&self.learners[i].critic1, &self.learners[i].critic2)
    }

    /// Clones of all learner actors, for checkpointing.
    pub fn actor_params(&self) -> Vec<Mlp> {
        self.learners.iter().map(|l| l.actor.clone()).collect()
    }

    /// One full trainer iteration: act, step the environment, store all
    /// transitions, reset on episode end, and run gated updates.
    pub fn step_iteration(&mut self) -> Result<StepStats> {
        self.t += 1;
        let t = self.t;
        let n_train = self.stage.n_train();
        let lambda = self.reward_params.lambda;

        // Action selection: learners explore, fixed opponents play frozen.
        let mut actions = Vec::with_capacity(self.state.n_agents());
        for i in 0..n_train {
            let learner = &mut self.learners[i];
            let a = select_action(
                t,
                self.config.t_warmup,
                self.config.sigma,
                &learner.actor,
                &self.cached_obs[i],
                &mut learner.action_rng,
            )?;
            actions.push(ActionCommand { a });
        }
        for (j, policy) in self.fixed.iter_mut().enumerate() {
            actions.push(policy.act(&self.state, n_train + j, &self.pitch, lambda)?);
        }

        let (next_state, outcome) = pitch::step(&self.state, &actions, &self.pitch, lambda)?;

        // Rewards from the post-step measurements, each from the player's
        // own team perspective.
        let (d, goal_d) = pitch::distances(&next_state, &self.pitch);
        let mut rewards = Vec::with_capacity(self.state.n_agents());
        for p in 0..self.state.n_agents() {
            self.ctxs[p].advance(d[p], goal_d, outcome.scored_team, lambda);
            let r = match self.reward_mode {
                RewardMode::Dense => dense_reward(&self.ctxs[p], &self.reward_params),
                RewardMode::Sparse => sparse_reward(outcome.scored_team, self.state.team_of[p]),
            };
            if !r.is_finite() {
                return Err(Error::Numeric(format!("non-finite reward for player {p}")));
            }
            rewards.push(r);
        }

        let next_obs = Self::all_obs(&next_state, &self.pitch, lambda);
        for p in 0..self.state.n_agents() {
            let transition = Transition {
                obs: self.cached_obs[p].clone(),
                action: actions[p].a,
                reward: rewards[p],
                next_obs: next_obs[p].clone(),
                done: outcome.terminal,
            };
            if p < n_train {
                self.learners[p].buffer.push(transition);
            } else {
                self.fixed_buffers[p - n_train].push(transition);
            }
        }

        for i in 0..n_train {
            self.episode_return[i] += rewards[i];
        }

        if outcome.terminal {
            self.window.push_back(outcome.scored_team == Some(0));
            if self.window.len() > 50 {
                self.window.pop_front();
            }
            self.episodes_done += 1;
            for i in 0..n_train {
                self.last_episode_return[i] = Some(self.episode_return[i]);
                self.episode_return[i] = 0.0;
            }
            let seed = self.reset_rng.gen();
            self.state = pitch::reset(&self.pitch, self.stage, seed)?;
            for (p, ctx) in self.ctxs.iter_mut().enumerate() {
                *ctx = RewardContext::at_reset(self.state.team_of[p]);
            }
            self.cached_obs = Self::all_obs(&self.state, &self.pitch, lambda);
        } else {
            self.state = next_state;
            self.cached_obs = next_obs;
        }

        // Gated updates.
        let mut stats: Vec<LearnerStats> = (0..n_train).map(|_| LearnerStats::default()).collect();
        if t % self.config.update_interval == 0 && t >= self.config.t_after {
            for i in 0..n_train {
                let learner_stats = self.update_learner(i)?;
                stats[i] = learner_stats;
            }
        }
        for (i, s) in stats.iter_mut().enumerate() {
            s.episode_return = self.last_episode_return[i];
        }

        Ok(StepStats {
            t,
            learners: stats,
            success_window: self.success_window(),
            episodes_done: self.episodes_done,
        })
    }

    fn update_learner(&mut self, i: usize) -> Result<LearnerStats> {
        let fixed_refs: Vec<&ReplayBuffer> = self.fixed_buffers.iter().collect();
        let learner = &mut self.learners[i];
        let batch = match sample_es_batch(
            &learner.buffer,
            &fixed_refs,
            self.config.batch_size,
            self.es_enabled,
            &mut learner.sample_rng,
        ) {
            Some(b) => b,
            None => return Ok(LearnerStats::default()),
        };
        let b = batch.len();

        // Smoothed target actions and twin-min TD targets, computed once
        // per gate.
        let mut target_actions = learner.target_actor.forward(&batch.next_obs, None)?;
        let normal = Normal::new(0.0, self.config.sigma_tilde)
            .map_err(|e| Error::Config(e.to_string()))?;
        let c = self.config.noise_clip;
        for v in target_actions.iter_mut() {
            let eps = normal.sample(&mut learner.noise_rng).clamp(-c, c);
            *v = (*v + eps).clamp(-1.0, 1.0);
        }
        let q1t = learner.target_critic1.forward(&batch.next_obs, Some(&target_actions))?;
        let q2t = learner.target_critic2.forward(&batch.next_obs, Some(&target_actions))?;
        let mut y = Array1::zeros(b);
        for r in 0..b {
            y[r] = target_value(
                batch.rewards[r],
                batch.done[r] > 0.5,
                self.config.gamma,
                q1t[[r, 0]],
                q2t[[r, 0]],
            );
        }

        let mut out = LearnerStats::default();
        for _ in 0..self.config.update_interval {
            // Twin critic regression toward y.
            let mut critic_losses = [0.0; 2];
            let mut mean_q = 0.0;
            for (k, (critic, opt)) in [
                (&mut learner.critic1, &mut learner.opt_critic1),
                (&mut learner.critic2, &mut learner.opt_critic2),
            ]
            .into_iter()
            .enumerate()
            {
                let trace = critic.forward_trace(&batch.obs, Some(&batch.actions))?;
                let q = trace.output();
                let mut upstream = Array2::zeros((b, 1));
                let mut loss = 0.0;
                for r in 0..b {
                    let err = q[[r, 0]] - y[r];
                    loss += err * err;
                    upstream[[r, 0]] = 2.0 * err / b as f64;
                }
                loss /= b as f64;
                if !loss.is_finite() {
                    return Err(Error::Numeric(format!(
                        "critic loss diverged at step {} (learner {i})",
                        self.t
                    )));
                }
                critic_losses[k] = loss;
                if k == 0 {
                    mean_q = q.sum() / b as f64;
                }
                let (grads, _, _) = critic.backward(&trace, &upstream)?;
                adam_step(critic, &grads, opt);
            }
            out.critic_loss = Some((critic_losses[0] + critic_losses[1]) / 2.0);
            out.mean_q = Some(mean_q);

            learner.updates_done += 1;
            if learner.updates_done % self.config.policy_delay == 0 {
                // Deterministic policy gradient through critic 1.
                let actor_trace = learner.actor.forward_trace(&batch.obs, None)?;
                let proposed = actor_trace.output().clone();
                let critic_trace = learner.critic1.forward_trace(&batch.obs, Some(&proposed))?;
                let q = critic_trace.output();
                let actor_loss = -q.sum() / b as f64;
                if !actor_loss.is_finite() {
                    return Err(Error::Numeric(format!(
                        "actor loss diverged at step {} (learner {i})",
                        self.t
                    )));
                }
                let upstream = Array2::from_elem((b, 1), -1.0 / b as f64);
                let (_, _, d_action) = learner.critic1.backward(&critic_trace, &upstream)?;
                let d_action = d_action.expect("critic backward yields action grads");
                let (actor_grads, _, _) = learner.actor.backward(&actor_trace, &d_action)?;
                adam_step(&mut learner.actor, &actor_grads, &mut learner.opt_actor);
                out.actor_loss = Some(actor_loss);

                soft_update(&mut learner.target_actor, &learner.actor, self.config.tau);
                soft_update(&mut learner.target_critic1, &learner.critic1, self.config.tau);
                soft_update(&mut learner.target_critic2, &learner.critic2, self.config.tau);
            }
        }
        Ok(out)
    }
}
