//! Action-selection interfaces used by evaluation, fixed opponents and the
//! demo: trained networks, simple baselines, and a scripted chaser.

use crate::error::Result;
use crate::net::Mlp;
use crate::observe;
use crate::pitch::{ActionCommand, PitchConfig, WorldState};
use crate::vec2::Vec2;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub trait Policy {
    fn act(
        &mut self,
        state: &WorldState,
        agent: usize,
        config: &PitchConfig,
        lambda: f64,
    ) -> Result<ActionCommand>;
}

/// A frozen actor network together with the agent indices it observes (its
/// native observation layout). Deterministic and noise-free.
pub struct NetPolicy {
    actor: Mlp,
    others: Vec<usize>,
}

impl NetPolicy {
    pub fn new(actor: Mlp, others: Vec<usize>) -> Self {
        Self { actor, others }
    }

    pub fn actor(&self) -> &Mlp {
        &self.actor
    }

    pub fn others(&self) -> &[usize] {
        &self.others
    }

    pub fn observation(
        &self,
        state: &WorldState,
        agent: usize,
        config: &PitchConfig,
        lambda: f64,
    ) -> Vec<f64> {
        observe::build_observation(state, agent, &self.others, config, lambda)
    }
}

impl Policy for NetPolicy {
    fn act(
        &mut self,
        state: &WorldState,
        agent: usize,
        config: &PitchConfig,
        lambda: f64,
    ) -> Result<ActionCommand> {
        let obs = self.observation(state, agent, config, lambda);
        let out = self.actor.forward_one(&obs, None)?;
        Ok(ActionCommand { a: [out[0], out[1], out[2]] })
    }
}

/// Uniform random actions in [−1, 1]³.
pub struct RandomPolicy {
    pub rng: ChaCha8Rng,
}

impl Policy for RandomPolicy {
    fn act(&mut self, _: &WorldState, _: usize, _: &PitchConfig, _: f64) -> Result<ActionCommand> {
        Ok(ActionCommand {
            a: [
                self.rng.gen_range(-1.0..=1.0),
                self.rng.gen_range(-1.0..=1.0),
                self.rng.gen_range(-1.0..=1.0),
            ],
        })
    }
}

/// Always outputs the zero action (the agent coasts).
pub struct ZeroPolicy;

impl Policy for ZeroPolicy {
    fn act(&mut self, _: &WorldState, _: usize, _: &PitchConfig, _: f64) -> Result<ActionCommand> {
        Ok(ActionCommand::default())
    }
}

/// Scripted baseline: line up behind the ball relative to the attacked goal,
/// then drive through it. The controller tracks a desired velocity rather
/// than a bearing, so it brakes into the aim point instead of orbiting it,
/// and it latches into the pushing phase so contact jitter does not flip it
/// back to repositioning. Good enough to score reliably on an empty field,
/// which makes it a useful evaluation fixture and demo opponent.
#[derive(Default)]
pub struct ChaserPolicy {
    pushing: bool,
}

impl ChaserPolicy {
    pub fn new() -> Self {
        Self::default()
    }
}

fn wrap_err(a: f64) -> f64 {
    let mut e = a;
    while e >= std::f64::consts::PI {
        e -= 2.0 * std::f64::consts::PI;
    }
    while e < -std::f64::consts::PI {
        e += 2.0 * std::f64::consts::PI;
    }
    e
}

impl ChaserPolicy {
    /// Drive toward `target`: track a desired velocity proportional to the
    /// remaining distance, clamped to [min_speed, max_speed].
    fn track(
        me: &crate::pitch::BodyState,
        target: Vec2,
        min_speed: f64,
        max_speed: f64,
    ) -> ActionCommand {
        let to_target = target - me.pos;
        let want = to_target.normalized() * (1.5 * to_target.norm()).clamp(min_speed, max_speed);
        let dv = want - me.vel;
        if dv.norm() < 0.05 {
            return ActionCommand::new(0.0, 0.0);
        }
        let err = wrap_err(dv.angle() - me.heading);
        let torque = (3.0 * err - 0.6 * me.angular_vel).clamp(-1.0, 1.0);
        let accel = (0.6 * dv.norm() * err.cos()).clamp(-1.0, 1.0);
        ActionCommand::new(accel, torque)
    }
}

impl Policy for ChaserPolicy {
    fn act(
        &mut self,
        state: &WorldState,
        agent: usize,
        config: &PitchConfig,
        _: f64,
    ) -> Result<ActionCommand> {
        let me = &state.agents[agent];
        let ball = state.ball.pos;
        let goal = config.goal_center(state.team_of[agent]);
        let mut ball_to_goal = (goal - ball).normalized();
        let standoff = config.agent_radius + config.ball_radius;

        // Near the side walls the ideal pushing spot is unreachable, so
        // bias the push direction off the wall until there is room.
        let wall_band = config.field_width / 2.0 - 2.0;
        if ball.y.abs() > wall_band && (goal - ball).norm() > 5.0 {
            ball_to_goal = (ball_to_goal + Vec2::new(0.0, -ball.y.signum())).normalized();
        }

        // Behind the ball (relative to the goal) is the pushing spot: from
        // there, drive into the ball itself so contact is guaranteed.
        // Anywhere else, orbit around the ball toward that spot without
        // crossing it.
        let rel = me.pos - ball;
        let phi_me = rel.angle();
        let phi_behind = (-ball_to_goal).angle();
        let dphi = wrap_err(phi_behind - phi_me);

        if self.pushing {
            // Drop back to repositioning only when clearly past the ball or
            // it got away.
            if rel.dot(ball_to_goal) > 0.3 * rel.norm() || rel.norm() > 6.0 {
                self.pushing = false;
            }
        } else if dphi.abs() < 0.35 && rel.norm() < 3.5 {
            self.pushing = true;
        }

        if self.pushing {
            let target = ball + ball_to_goal * (0.3 * standoff);
            return Ok(Self::track(me, target, 3.0, config.max_speed_agent));
        }
        let phi_next = phi_me + dphi.clamp(-0.9, 0.9);
        let radius = 2.0 * standoff + 0.4;
        let mut target = ball + Vec2::new(phi_next.cos(), phi_next.sin()) * radius;
        // Keep waypoints reachable when the ball hugs a wall.
        let hx = config.field_length / 2.0 - config.agent_radius;
        let hy = config.field_width / 2.0 - config.agent_radius;
        target.x = target.x.clamp(-hx, hx);
        target.y = target.y.clamp(-hy, hy);
        Ok(Self::track(me, target, 0.0, config.max_speed_agent))
    }
}
