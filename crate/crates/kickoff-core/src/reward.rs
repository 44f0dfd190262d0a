//! Dense and sparse per-step rewards.
//!
//! The dense reward drives a three-phase behaviour: approach the ball
//! (distance delta), then once contact has happened push it toward the
//! opponent goal and away from the own goal (goal-distance deltas), with a
//! one-off bonus the first time the ball comes within kickable range and a
//! large terminal payoff on goals. The sparse variant only scores the final
//! outcome (±1).
//!
//! All distances are normalized by the field diagonal. Deltas compare the
//! current measurement with the previous control step's; the first step of
//! an episode has no previous measurement and its deltas are zero.

use crate::pitch::PitchConfig;
use serde::{Deserialize, Serialize};

/// Scale and threshold constants of the dense reward.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardParams {
    /// Goal payoff: max number of control steps in an episode, divided by 10.
    pub alpha: f64,
    /// First-contact bonus: alpha / 10.
    pub beta: f64,
    /// Normalized kickable-distance threshold.
    pub lambda: f64,
    /// Weight of the ball-to-goal progress term.
    pub ball_progress_coeff: f64,
    /// Constant per-step penalty.
    pub step_penalty: f64,
}

impl RewardParams {
    /// Derive the scales from the episode geometry: alpha tracks the
    /// episode step budget, so doubling the control time step halves alpha.
    pub fn for_pitch(config: &PitchConfig) -> Self {
        Self::with_lambda(config, 0.03)
    }

    pub fn with_lambda(config: &PitchConfig, lambda: f64) -> Self {
        Self::with_options(config, lambda, 1.2, 0.1)
    }

    pub fn with_options(
        config: &PitchConfig,
        lambda: f64,
        ball_progress_coeff: f64,
        step_penalty: f64,
    ) -> Self {
        let max_steps = config.max_control_steps() as f64;
        let alpha = max_steps / 10.0;
        Self { alpha, beta: alpha / 10.0, lambda, ball_progress_coeff, step_penalty }
    }
}

/// Per-agent reward bookkeeping carried across an episode: the previous and
/// current distance measurements plus the contact flags.
///
/// `b_flag` is true when the ball was within kickable distance at some
/// *earlier* control step of the episode; `k_flag` is true exactly on the
/// first step the ball is within range (so `k_flag` implies `!b_flag`).
#[derive(Debug, Clone, PartialEq)]
pub struct RewardContext {
    /// Previous (agent-ball distance, per-team goal distances); `None` on
    /// the first measured step, making all deltas zero.
    pub prev: Option<(f64, [f64; 2])>,
    pub cur_d: f64,
    pub cur_goal_d: [f64; 2],
    pub b_flag: bool,
    pub k_flag: bool,
    /// Team of the rewarded agent.
    pub team: u8,
    /// Team credited with a goal this step, if any.
    pub outcome: Option<u8>,
    measured: bool,
}

impl RewardContext {
    pub fn at_reset(team: u8) -> Self {
        Self {
            prev: None,
            cur_d: 0.0,
            cur_goal_d: [0.0, 0.0],
            b_flag: false,
            k_flag: false,
            team,
            outcome: None,
            measured: false,
        }
    }

    /// Fold in the measurements taken after one control step. Applies the
    /// flag update: `k = ¬b ∧ (d ≤ λ)`, then `b ← b ∨ (d ≤ λ)` takes effect
    /// from the next step on.
    pub fn advance(&mut self, d: f64, goal_d: [f64; 2], outcome: Option<u8>, lambda: f64) {
        self.prev = if self.measured {
            Some((self.cur_d, self.cur_goal_d))
        } else {
            None
        };
        self.measured = true;
        let b_before = self.b_flag || self.k_flag;
        self.k_flag = !b_before && d <= lambda;
        self.b_flag = b_before;
        self.cur_d = d;
        self.cur_goal_d = goal_d;
        self.outcome = outcome;
    }

    pub fn delta_d(&self) -> f64 {
        self.prev.map(|(d, _)| self.cur_d - d).unwrap_or(0.0)
    }

    pub fn delta_goal(&self, team: u8) -> f64 {
        self.prev
            .map(|(_, g)| self.cur_goal_d[team as usize] - g[team as usize])
            .unwrap_or(0.0)
    }
}

/// Free-standing flag update matching [`RewardContext::advance`]:
/// returns `(k_flag, b_flag')` given the latched flag and the new distance.
pub fn update_flags(b_flag: bool, cur_d: f64, params: &RewardParams) -> (bool, bool) {
    let k = !b_flag && cur_d <= params.lambda;
    (k, b_flag || cur_d <= params.lambda)
}

/// Dense reward. On a goal only the terminal payoff applies (±alpha by
/// scoring side); otherwise one of three exclusive branches: first-contact
/// bonus, ball-progress shaping, or approach shaping.
pub fn dense_reward(ctx: &RewardContext, params: &RewardParams) -> f64 {
    if let Some(scorer) = ctx.outcome {
        return if scorer == ctx.team { params.alpha } else { -params.alpha };
    }
    if ctx.k_flag {
        return params.beta - params.step_penalty;
    }
    if ctx.b_flag {
        let own = ctx.delta_goal(ctx.team);
        let opp = ctx.delta_goal(1 - ctx.team);
        return params.ball_progress_coeff * (opp - own) - ctx.delta_d() - params.step_penalty;
    }
    -ctx.delta_d() - params.step_penalty
}

/// Sparse reward: ±1 on the final outcome, 0 otherwise (including timeout).
pub fn sparse_reward(outcome: Option<u8>, team: u8) -> f64 {
    match outcome {
        Some(scorer) if scorer == team => 1.0,
        Some(_) => -1.0,
        None => 0.0,
    }
}
