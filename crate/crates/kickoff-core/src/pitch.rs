//! Deterministic 2D soccer physics: disc agents with acceleration/torque
//! control, a ball slowed by friction, elastic collisions, goal detection
//! and sudden-death termination.
//!
//! A control step integrates `control_dt / physics_dt` identical physics
//! substeps under a held action, so a 0.1 s control step is exactly two
//! 0.05 s control steps (frame-skip composability). All state is `f64` and
//! every operation is bitwise reproducible from `(seed, action sequence)`.
//!
//! Geometry: the field is centred on the origin, x ∈ [−L/2, L/2],
//! y ∈ [−W/2, W/2]. Team 0 attacks the goal at x = +L/2, team 1 the goal at
//! x = −L/2. A goal is scored when the ball centre is beyond a goal line by
//! at least the ball radius, inside the goal mouth |y| ≤ goal_width/2.

use crate::curriculum::StageId;
use crate::error::{Error, Result};
use crate::vec2::Vec2;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Physical constants of the environment. All values are overridable via the
/// run config; defaults give playable desk-scale dynamics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PitchConfig {
    /// Field length along x (m).
    pub field_length: f64,
    /// Field width along y (m).
    pub field_width: f64,
    /// Goal mouth opening (m), centred on y = 0 at both x ends.
    pub goal_width: f64,
    pub agent_radius: f64,
    pub ball_radius: f64,
    pub agent_mass: f64,
    pub ball_mass: f64,
    pub max_speed_agent: f64,
    pub max_speed_ball: f64,
    /// Linear velocity decay rate of the ball (1/s).
    pub ball_friction_coeff: f64,
    /// Collision restitution, shared by all contacts, in [0, 1].
    pub restitution: f64,
    /// Acceleration produced by a full-scale linear command (m/s²).
    pub max_accel: f64,
    /// Torque produced by a full-scale rotation command (N·m).
    pub max_torque: f64,
    /// Rotational velocity decay rate of agents (1/s).
    pub angular_damping: f64,
    /// Physics integration substep (s).
    pub physics_dt: f64,
    /// Interval at which new actions are applied (s); must be an integer
    /// multiple of `physics_dt`.
    pub control_dt: f64,
    /// Wall-clock episode limit (s); episodes time out after
    /// ⌈episode_limit_s / control_dt⌉ control steps.
    pub episode_limit_s: f64,
}

impl Default for PitchConfig {
    fn default() -> Self {
        Self {
            field_length: 40.0,
            field_width: 30.0,
            goal_width: 7.0,
            agent_radius: 0.5,
            ball_radius: 0.25,
            agent_mass: 10.0,
            ball_mass: 0.45,
            max_speed_agent: 8.0,
            max_speed_ball: 15.0,
            ball_friction_coeff: 0.5,
            restitution: 0.7,
            max_accel: 6.0,
            max_torque: 10.0,
            angular_damping: 2.0,
            physics_dt: 0.05,
            control_dt: 0.05,
            episode_limit_s: 30.0,
        }
    }
}

impl PitchConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("field_length", self.field_length),
            ("field_width", self.field_width),
            ("goal_width", self.goal_width),
            ("agent_radius", self.agent_radius),
            ("ball_radius", self.ball_radius),
            ("agent_mass", self.agent_mass),
            ("ball_mass", self.ball_mass),
            ("max_speed_agent", self.max_speed_agent),
            ("max_speed_ball", self.max_speed_ball),
            ("physics_dt", self.physics_dt),
            ("control_dt", self.control_dt),
            ("episode_limit_s", self.episode_limit_s),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Config(format!("{name} must be > 0, got {v}")));
            }
        }
        if self.goal_width >= self.field_width {
            return Err(Error::Config(format!(
                "goal_width ({}) must be smaller than field_width ({})",
                self.goal_width, self.field_width
            )));
        }
        if !(0.0..=1.0).contains(&self.restitution) {
            return Err(Error::Config(format!(
                "restitution must be in [0, 1], got {}",
                self.restitution
            )));
        }
        if self.ball_friction_coeff < 0.0 || self.angular_damping < 0.0 {
            return Err(Error::Config("friction/damping must be non-negative".into()));
        }
        if self.max_accel < 0.0 || self.max_torque < 0.0 {
            return Err(Error::Config("max_accel/max_torque must be non-negative".into()));
        }
        let ratio = self.control_dt / self.physics_dt;
        if (ratio - ratio.round()).abs() > 1e-9 || ratio.round() < 1.0 {
            return Err(Error::Config(format!(
                "control_dt ({}) must be an integer multiple of physics_dt ({})",
                self.control_dt, self.physics_dt
            )));
        }
        if self.ball_friction_coeff * self.physics_dt >= 1.0 {
            return Err(Error::Config(
                "ball_friction_coeff * physics_dt must be < 1".into(),
            ));
        }
        Ok(())
    }

    /// Physics substeps per control step.
    pub fn substeps_per_control(&self) -> u32 {
        (self.control_dt / self.physics_dt).round() as u32
    }

    /// Field diagonal, the distance normalizer for observations and rewards.
    pub fn diag(&self) -> f64 {
        self.field_length.hypot(self.field_width)
    }

    /// Episode step budget: timeout fires after this many control steps.
    pub fn max_control_steps(&self) -> u64 {
        (self.episode_limit_s / self.control_dt).ceil() as u64
    }

    /// Centre of the goal that `team` attacks (should score into).
    pub fn goal_center(&self, team: u8) -> Vec2 {
        if team == 0 {
            Vec2::new(self.field_length / 2.0, 0.0)
        } else {
            Vec2::new(-self.field_length / 2.0, 0.0)
        }
    }

    fn moment_of_inertia(&self) -> f64 {
        0.5 * self.agent_mass * self.agent_radius * self.agent_radius
    }
}

/// Pose and motion of one disc body.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BodyState {
    pub pos: Vec2,
    pub vel: Vec2,
    /// Measured acceleration over the last physics substep, after clamps and
    /// collisions.
    pub accel: Vec2,
    /// Facing direction in [−π, π). Meaningless for the ball (kept at 0).
    pub heading: f64,
    pub angular_vel: f64,
}

impl BodyState {
    fn at_rest(pos: Vec2, heading: f64) -> Self {
        Self { pos, vel: Vec2::default(), accel: Vec2::default(), heading, angular_vel: 0.0 }
    }

    fn is_finite(&self) -> bool {
        self.pos.is_finite()
            && self.vel.is_finite()
            && self.accel.is_finite()
            && self.heading.is_finite()
            && self.angular_vel.is_finite()
    }
}

/// Full physical state at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct WorldState {
    /// Physics substeps elapsed since reset.
    pub time_step: u64,
    pub ball: BodyState,
    pub agents: Vec<BodyState>,
    /// Team id (0 or 1) per agent index.
    pub team_of: Vec<u8>,
    /// Per-agent flag: the ball has been within kickable distance at some
    /// substep of this episode. Monotone within an episode.
    pub kick_history: Vec<bool>,
    /// Team credited with a goal; set implies the episode is over.
    pub scored: Option<u8>,
}

impl WorldState {
    pub fn n_agents(&self) -> usize {
        self.agents.len()
    }

    /// Control steps completed under `config`'s clock.
    pub fn control_steps(&self, config: &PitchConfig) -> u64 {
        self.time_step / self.substeps(config)
    }

    fn substeps(&self, config: &PitchConfig) -> u64 {
        config.substeps_per_control() as u64
    }

    pub fn is_terminal(&self, config: &PitchConfig) -> bool {
        self.scored.is_some() || self.control_steps(config) >= config.max_control_steps()
    }

    pub fn is_finite(&self) -> bool {
        self.ball.is_finite() && self.agents.iter().all(|a| a.is_finite())
    }

    /// Indices of `agent`'s teammates, ascending.
    pub fn teammates_of(&self, agent: usize) -> Vec<usize> {
        let team = self.team_of[agent];
        (0..self.n_agents())
            .filter(|&j| j != agent && self.team_of[j] == team)
            .collect()
    }

    /// Indices of `agent`'s opponents, ascending.
    pub fn opponents_of(&self, agent: usize) -> Vec<usize> {
        let team = self.team_of[agent];
        (0..self.n_agents()).filter(|&j| self.team_of[j] != team).collect()
    }
}

/// One agent's command: (linear acceleration, vertical-axis torque,
/// downward force). Components are clamped to [−1, 1] and the third is
/// forced to zero before application — agents stay on the ground.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ActionCommand {
    pub a: [f64; 3],
}

impl ActionCommand {
    pub fn new(accel: f64, torque: f64) -> Self {
        Self { a: [accel, torque, 0.0] }
    }

    /// The command as applied by the environment.
    pub fn effective(&self) -> (f64, f64) {
        (self.a[0].clamp(-1.0, 1.0), self.a[1].clamp(-1.0, 1.0))
    }
}

/// Result of one control step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub terminal: bool,
    pub scored_team: Option<u8>,
    pub timeout: bool,
}

impl StepOutcome {
    fn running() -> Self {
        Self { terminal: false, scored_team: None, timeout: false }
    }
}

fn wrap_angle(a: f64) -> f64 {
    let mut a = (a + PI).rem_euclid(2.0 * PI) - PI;
    if a >= PI {
        a = -PI;
    }
    a
}

/// Seeded initial state: ball and agents placed uniformly inside the field
/// with rejection sampling against overlaps, headings uniform in [−π, π),
/// everything at rest.
pub fn reset(config: &PitchConfig, stage: StageId, rng_seed: u64) -> Result<WorldState> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let n = stage.n_total();
    let hl = config.field_length / 2.0;
    let hw = config.field_width / 2.0;

    let place = |radius: f64, placed: &[(Vec2, f64)], rng: &mut ChaCha8Rng| -> Result<Vec2> {
        for _ in 0..100_000 {
            let x = rng.gen_range(-(hl - radius)..=(hl - radius));
            let y = rng.gen_range(-(hw - radius)..=(hw - radius));
            let p = Vec2::new(x, y);
            let clear = placed
                .iter()
                .all(|&(q, r)| (p - q).norm() >= radius + r + 1e-3);
            if clear {
                return Ok(p);
            }
        }
        Err(Error::Config("could not place bodies without overlap; field too crowded".into()))
    };

    let mut placed: Vec<(Vec2, f64)> = Vec::with_capacity(n + 1);
    let ball_pos = place(config.ball_radius, &placed, &mut rng)?;
    placed.push((ball_pos, config.ball_radius));

    let mut agents = Vec::with_capacity(n);
    for _ in 0..n {
        let pos = place(config.agent_radius, &placed, &mut rng)?;
        placed.push((pos, config.agent_radius));
        let heading = -PI + rng.gen_range(0.0..1.0) * 2.0 * PI;
        agents.push(BodyState::at_rest(pos, heading));
    }

    Ok(WorldState {
        time_step: 0,
        ball: BodyState::at_rest(ball_pos, 0.0),
        agents,
        team_of: stage.team_assignment(),
        kick_history: vec![false; n],
        scored: None,
    })
}

/// Advance one control step: each action is held for `control_dt` and
/// integrated in `physics_dt` substeps (semi-implicit Euler). `lambda` is
/// the normalized kickable-distance threshold used to latch `kick_history`.
///
/// Stops substepping early if a goal is detected, leaving the state at the
/// scoring substep.
pub fn step(
    state: &WorldState,
    actions: &[ActionCommand],
    config: &PitchConfig,
    lambda: f64,
) -> Result<(WorldState, StepOutcome)> {
    if actions.len() != state.n_agents() {
        return Err(Error::Contract(format!(
            "expected {} actions, got {}",
            state.n_agents(),
            actions.len()
        )));
    }
    if state.is_terminal(config) {
        return Err(Error::Contract("step called on a terminal state".into()));
    }
    if !state.is_finite() {
        return Err(Error::Numeric("non-finite values in world state".into()));
    }

    let mut next = state.clone();
    let mut outcome = StepOutcome::running();
    for _ in 0..config.substeps_per_control() {
        substep(&mut next, actions, config, lambda);
        if let Some(team) = next.scored {
            outcome = StepOutcome { terminal: true, scored_team: Some(team), timeout: false };
            break;
        }
    }
    if !next.is_finite() {
        return Err(Error::Numeric("physics produced non-finite state".into()));
    }
    if outcome.scored_team.is_none()
        && next.control_steps(config) >= config.max_control_steps()
    {
        outcome = StepOutcome { terminal: true, scored_team: None, timeout: true };
    }
    Ok((next, outcome))
}

fn substep(state: &mut WorldState, actions: &[ActionCommand], config: &PitchConfig, lambda: f64) {
    let dt = config.physics_dt;
    let inertia = config.moment_of_inertia();
    let vel_before: Vec<Vec2> = state.agents.iter().map(|a| a.vel).collect();
    let ball_vel_before = state.ball.vel;

    // Integrate commands.
    for (agent, cmd) in state.agents.iter_mut().zip(actions) {
        let (lin, rot) = cmd.effective();
        let dir = Vec2::new(agent.heading.cos(), agent.heading.sin());
        agent.vel += dir * (lin * config.max_accel * dt);
        let ang_acc = rot * config.max_torque / inertia - config.angular_damping * agent.angular_vel;
        agent.angular_vel += ang_acc * dt;
        agent.vel = agent.vel.clamped_norm(config.max_speed_agent);
        agent.pos += agent.vel * dt;
        agent.heading = wrap_angle(agent.heading + agent.angular_vel * dt);
    }
    state.ball.vel = state.ball.vel * (1.0 - config.ball_friction_coeff * dt).max(0.0);
    state.ball.vel = state.ball.vel.clamped_norm(config.max_speed_ball);
    state.ball.pos += state.ball.vel * dt;

    resolve_collisions(state, config);

    for agent in &mut state.agents {
        agent.vel = agent.vel.clamped_norm(config.max_speed_agent);
    }
    state.ball.vel = state.ball.vel.clamped_norm(config.max_speed_ball);

    // Measured (post-clamp, post-collision) acceleration.
    for (agent, before) in state.agents.iter_mut().zip(&vel_before) {
        agent.accel = (agent.vel - *before) * (1.0 / dt);
    }
    state.ball.accel = (state.ball.vel - ball_vel_before) * (1.0 / dt);

    // Latch kickable contact.
    let threshold = lambda * config.diag();
    for i in 0..state.agents.len() {
        if (state.agents[i].pos - state.ball.pos).norm() <= threshold {
            state.kick_history[i] = true;
        }
    }

    state.time_step += 1;

    // Sudden-death goal check: centre fully past the line, inside the mouth.
    let hl = config.field_length / 2.0;
    let in_mouth = state.ball.pos.y.abs() <= config.goal_width / 2.0;
    if in_mouth {
        if state.ball.pos.x > hl + config.ball_radius {
            state.scored = Some(0);
        } else if state.ball.pos.x < -(hl + config.ball_radius) {
            state.scored = Some(1);
        }
    }
}

fn resolve_collisions(state: &mut WorldState, config: &PitchConfig) {
    let n = state.agents.len();
    // Disc-disc, fixed pair order: agent pairs first, then agent-ball.
    for i in 0..n {
        for j in (i + 1)..n {
            let (left, right) = state.agents.split_at_mut(j);
            collide_discs(
                &mut left[i],
                &mut right[0],
                config.agent_radius,
                config.agent_radius,
                config.agent_mass,
                config.agent_mass,
                config.restitution,
            );
        }
    }
    for i in 0..n {
        let agent = &mut state.agents[i];
        collide_discs(
            agent,
            &mut state.ball,
            config.agent_radius,
            config.ball_radius,
            config.agent_mass,
            config.ball_mass,
            config.restitution,
        );
    }

    let hl = config.field_length / 2.0;
    let hw = config.field_width / 2.0;
    let e = config.restitution;
    for agent in &mut state.agents {
        collide_walls(agent, config.agent_radius, hl, hw, e, false, 0.0);
    }
    collide_walls(&mut state.ball, config.ball_radius, hl, hw, e, true, config.goal_width / 2.0);
}

fn collide_discs(
    a: &mut BodyState,
    b: &mut BodyState,
    ra: f64,
    rb: f64,
    ma: f64,
    mb: f64,
    e: f64,
) {
    let delta = b.pos - a.pos;
    let dist = delta.norm();
    let pen = (ra + rb) - dist;
    if pen <= 0.0 || dist == 0.0 {
        return;
    }
    let n = delta * (1.0 / dist);
    let inv_a = 1.0 / ma;
    let inv_b = 1.0 / mb;
    let inv_sum = inv_a + inv_b;

    // Positional de-penetration weighted by inverse mass; velocities untouched.
    a.pos -= n * (pen * inv_a / inv_sum);
    b.pos += n * (pen * inv_b / inv_sum);

    let vrel = (b.vel - a.vel).dot(n);
    if vrel < 0.0 {
        let impulse = -(1.0 + e) * vrel / inv_sum;
        a.vel -= n * (impulse * inv_a);
        b.vel += n * (impulse * inv_b);
    }
}

fn collide_walls(
    body: &mut BodyState,
    radius: f64,
    half_len: f64,
    half_wid: f64,
    e: f64,
    passes_goal_mouth: bool,
    half_mouth: f64,
) {
    let in_mouth = passes_goal_mouth && body.pos.y.abs() <= half_mouth;
    if !in_mouth {
        if body.pos.x - radius < -half_len {
            body.pos.x = -half_len + radius;
            if body.vel.x < 0.0 {
                body.vel.x = -body.vel.x * e;
            }
        } else if body.pos.x + radius > half_len {
            body.pos.x = half_len - radius;
            if body.vel.x > 0.0 {
                body.vel.x = -body.vel.x * e;
            }
        }
    }
    if body.pos.y - radius < -half_wid {
        body.pos.y = -half_wid + radius;
        if body.vel.y < 0.0 {
            body.vel.y = -body.vel.y * e;
        }
    } else if body.pos.y + radius > half_wid {
        body.pos.y = half_wid - radius;
        if body.vel.y > 0.0 {
            body.vel.y = -body.vel.y * e;
        }
    }
}

/// Normalized distances: each agent to the ball, and the ball to each
/// team's target goal centre. All divided by the field diagonal and clamped
/// to [0, 1].
pub fn distances(state: &WorldState, config: &PitchConfig) -> (Vec<f64>, [f64; 2]) {
    let diag = config.diag();
    let d: Vec<f64> = state
        .agents
        .iter()
        .map(|a| ((a.pos - state.ball.pos).norm() / diag).clamp(0.0, 1.0))
        .collect();
    let goal_d = [
        ((state.ball.pos - config.goal_center(0)).norm() / diag).clamp(0.0, 1.0),
        ((state.ball.pos - config.goal_center(1)).norm() / diag).clamp(0.0, 1.0),
    ];
    (d, goal_d)
}

/// Total kinetic energy (translational + rotational), used by sanity checks.
pub fn kinetic_energy(state: &WorldState, config: &PitchConfig) -> f64 {
    let inertia = config.moment_of_inertia();
    let agents: f64 = state
        .agents
        .iter()
        .map(|a| {
            0.5 * config.agent_mass * a.vel.norm_sq()
                + 0.5 * inertia * a.angular_vel * a.angular_vel
        })
        .sum();
    agents + 0.5 * config.ball_mass * state.ball.vel.norm_sq()
}

#[cfg(test)]
mod tests {
    use super::*;

    const LAMBDA: f64 = 0.03;

    fn zero_actions(n: usize) -> Vec<ActionCommand> {
        vec![ActionCommand::default(); n]
    }

    #[test]
    fn reset_is_deterministic() {
        let config = PitchConfig::default();
        let a = reset(&config, StageId::S3_2v2, 42).unwrap();
        let b = reset(&config, StageId::S3_2v2, 42).unwrap();
        assert_eq!(a, b);
        let c = reset(&config, StageId::S3_2v2, 43).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn reset_stage_populations() {
        let config = PitchConfig::default();
        assert_eq!(reset(&config, StageId::S1_1v0, 0).unwrap().n_agents(), 1);
        assert_eq!(reset(&config, StageId::S2_1v1, 0).unwrap().n_agents(), 2);
        let s3 = reset(&config, StageId::S3_2v2, 0).unwrap();
        assert_eq!(s3.n_agents(), 4);
        assert_eq!(s3.team_of, vec![0, 0, 1, 1]);
    }

    #[test]
    fn resets_stay_in_bounds_without_overlap() {
        let config = PitchConfig::default();
        let hl = config.field_length / 2.0;
        let hw = config.field_width / 2.0;
        for seed in 0..10_000 {
            let s = reset(&config, StageId::S3_2v2, seed).unwrap();
            let mut bodies = vec![(s.ball.pos, config.ball_radius)];
            for a in &s.agents {
                bodies.push((a.pos, config.agent_radius));
            }
            for (i, &(p, r)) in bodies.iter().enumerate() {
                assert!(p.x - r >= -hl - 1e-12 && p.x + r <= hl + 1e-12, "seed {seed}");
                assert!(p.y - r >= -hw - 1e-12 && p.y + r <= hw + 1e-12, "seed {seed}");
                for &(q, r2) in &bodies[i + 1..] {
                    assert!((p - q).norm() >= r + r2, "seed {seed}: overlap");
                }
            }
        }
    }

    #[test]
    fn invalid_config_rejected() {
        let mut config = PitchConfig::default();
        config.control_dt = 0.07;
        assert!(matches!(reset(&config, StageId::S1_1v0, 0), Err(Error::Config(_))));
        let mut config = PitchConfig::default();
        config.field_length = 0.0;
        assert!(config.validate().is_err());
        let mut config = PitchConfig::default();
        config.goal_width = 31.0;
        assert!(config.validate().is_err());
    }

    #[test]
    fn zero_action_at_rest_only_advances_time() {
        let config = PitchConfig::default();
        let state = reset(&config, StageId::S2_1v1, 9).unwrap();
        let (next, outcome) = step(&state, &zero_actions(2), &config, LAMBDA).unwrap();
        assert_eq!(next.time_step, 1);
        assert!(!outcome.terminal);
        for (a, b) in state.agents.iter().zip(&next.agents) {
            assert_eq!(a.pos, b.pos);
            assert_eq!(a.heading, b.heading);
        }
        assert_eq!(state.ball.pos, next.ball.pos);
    }

    #[test]
    fn frame_skip_composes_exactly() {
        let coarse = PitchConfig { control_dt: 0.1, ..PitchConfig::default() };
        let fine = PitchConfig::default();
        let actions = vec![
            ActionCommand::new(0.8, -0.3),
            ActionCommand::new(-0.5, 0.9),
            ActionCommand::new(1.0, 1.0),
            ActionCommand::new(0.2, -1.0),
        ];
        let mut a = reset(&coarse, StageId::S3_2v2, 5).unwrap();
        let mut b = a.clone();
        for _ in 0..50 {
            let (na, oa) = step(&a, &actions, &coarse, LAMBDA).unwrap();
            let (mid, ob1) = step(&b, &actions, &fine, LAMBDA).unwrap();
            let nb = if ob1.terminal { mid } else { step(&mid, &actions, &fine, LAMBDA).unwrap().0 };
            assert_eq!(na, nb);
            if oa.terminal {
                break;
            }
            a = na;
            b = nb;
        }
    }

    #[test]
    fn goal_detection_credits_attacking_team() {
        let config = PitchConfig::default();
        let mut state = reset(&config, StageId::S2_1v1, 1).unwrap();
        // Ball rolling through team 1's goal line (x = +L/2) inside the mouth.
        state.ball.pos = Vec2::new(config.field_length / 2.0 - 0.05, 0.0);
        state.ball.vel = Vec2::new(12.0, 0.0);
        let (next, outcome) = step(&state, &zero_actions(2), &config, LAMBDA).unwrap();
        assert!(outcome.terminal);
        assert_eq!(outcome.scored_team, Some(0));
        assert_eq!(next.scored, Some(0));
        assert!(!outcome.timeout);
    }

    #[test]
    fn ball_outside_mouth_bounces_back() {
        let config = PitchConfig::default();
        let mut state = reset(&config, StageId::S1_1v0, 1).unwrap();
        state.ball.pos = Vec2::new(config.field_length / 2.0 - 0.3, 10.0);
        state.ball.vel = Vec2::new(10.0, 0.0);
        let (next, outcome) = step(&state, &zero_actions(1), &config, LAMBDA).unwrap();
        assert!(!outcome.terminal);
        assert!(next.ball.vel.x < 0.0, "ball should reflect off the wall");
    }

    #[test]
    fn action_count_mismatch_is_contract_error() {
        let config = PitchConfig::default();
        let state = reset(&config, StageId::S2_1v1, 0).unwrap();
        assert!(matches!(
            step(&state, &zero_actions(1), &config, LAMBDA),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn nan_state_is_numeric_error() {
        let config = PitchConfig::default();
        let mut state = reset(&config, StageId::S1_1v0, 0).unwrap();
        state.ball.vel.x = f64::NAN;
        assert!(matches!(
            step(&state, &zero_actions(1), &config, LAMBDA),
            Err(Error::Numeric(_))
        ));
    }

    #[test]
    fn episodes_terminate_by_timeout() {
        let config = PitchConfig::default();
        let mut state = reset(&config, StageId::S1_1v0, 3).unwrap();
        let mut steps = 0u64;
        loop {
            let (next, outcome) = step(&state, &zero_actions(1), &config, LAMBDA).unwrap();
            steps += 1;
            state = next;
            if outcome.terminal {
                assert!(outcome.timeout);
                break;
            }
            assert!(steps <= config.max_control_steps());
        }
        assert_eq!(steps, config.max_control_steps());
        assert_eq!(steps, 600);
    }

    #[test]
    fn kick_history_is_monotone_and_latches() {
        let config = PitchConfig::default();
        let mut state = reset(&config, StageId::S1_1v0, 2).unwrap();
        state.agents[0].pos = state.ball.pos + Vec2::new(1.0, 0.0);
        state.agents[0].heading = PI; // facing the ball
        let mut seen = false;
        let actions = vec![ActionCommand::new(1.0, 0.0)];
        for _ in 0..40 {
            let (next, outcome) = step(&state, &actions, &config, LAMBDA).unwrap();
            if seen {
                assert!(next.kick_history[0], "kick_history must stay latched");
            }
            seen |= next.kick_history[0];
            state = next;
            if outcome.terminal {
                break;
            }
        }
        assert!(seen, "agent driving at the ball should reach kickable range");
    }

    #[test]
    fn collision_transfers_momentum_to_ball() {
        let config = PitchConfig::default();
        let mut state = reset(&config, StageId::S1_1v0, 4).unwrap();
        state.agents[0].pos = Vec2::new(0.0, 0.0);
        state.agents[0].vel = Vec2::new(6.0, 0.0);
        state.agents[0].heading = 0.0;
        state.ball.pos = Vec2::new(1.0, 0.0);
        state.ball.vel = Vec2::default();
        let (next, _) = step(&state, &zero_actions(1), &config, LAMBDA).unwrap();
        assert!(next.ball.vel.x > 5.0, "ball should be kicked forward, got {:?}", next.ball.vel);
        assert!(next.ball.vel.x <= config.max_speed_ball);
    }

    #[test]
    fn energy_non_increasing_without_input() {
        let config = PitchConfig::default();
        for seed in 0..50 {
            let mut state = reset(&config, StageId::S3_2v2, seed).unwrap();
            // Random initial velocities, then coast.
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabcd);
            for a in &mut state.agents {
                a.vel = Vec2::new(rng.gen_range(-8.0..8.0), rng.gen_range(-8.0..8.0));
                a.angular_vel = rng.gen_range(-4.0..4.0);
            }
            state.ball.vel = Vec2::new(rng.gen_range(-15.0..15.0), rng.gen_range(-15.0..15.0));
            let mut energy = kinetic_energy(&state, &config);
            for _ in 0..100 {
                let (next, outcome) = step(&state, &zero_actions(4), &config, LAMBDA).unwrap();
                let e = kinetic_energy(&next, &config);
                assert!(e <= energy + 1e-9, "seed {seed}: energy rose {energy} -> {e}");
                energy = e;
                state = next;
                if outcome.terminal {
                    break;
                }
            }
        }
    }

    #[test]
    fn trajectories_are_bitwise_reproducible() {
        let config = PitchConfig::default();
        let actions = vec![ActionCommand::new(0.7, 0.2)];
        let run = || {
            let mut s = reset(&config, StageId::S1_1v0, 11).unwrap();
            for _ in 0..100 {
                let (n, o) = step(&s, &actions, &config, LAMBDA).unwrap();
                s = n;
                if o.terminal {
                    break;
                }
            }
            s
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn distances_examples() {
        let config = PitchConfig::default();
        assert_eq!(config.diag(), 50.0);
        let mut state = reset(&config, StageId::S1_1v0, 0).unwrap();
        // Agent exactly at the ball.
        state.agents[0].pos = state.ball.pos;
        let (d, _) = distances(&state, &config);
        assert_eq!(d[0], 0.0);
        // Ball at the centre of the goal team 0 attacks.
        state.ball.pos = config.goal_center(0);
        let (_, goals) = distances(&state, &config);
        assert_eq!(goals[0], 0.0);
        // Two opposite corners of a 40×30 field are exactly one diagonal apart.
        state.ball.pos = Vec2::new(-20.0, -15.0);
        let far = (Vec2::new(20.0, 15.0) - state.ball.pos).norm() / config.diag();
        assert_eq!(far, 1.0);
    }
}
