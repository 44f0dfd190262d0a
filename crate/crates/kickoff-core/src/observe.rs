//! Egocentric observation vectors.
//!
//! All geometric quantities are expressed in the observing agent's local
//! frame (translated to the agent, rotated by −heading). Position vectors
//! are polar-encoded: distance normalized by the field diagonal, angle
//! affinely mapped from [−π, π) to [0, 1). Motion vectors use a bounded
//! magnitude √((tanh²cₓ + tanh²c_y)/2) with the same angle encoding. The
//! ball-velocity projection onto the agent→goal direction is squashed with
//! a logistic sigmoid, and the kickable flag is a {0, 1} boolean.
//!
//! Layout, in fixed order (2 entries per row):
//!
//! | rows                                  | content                          |
//! |---------------------------------------|----------------------------------|
//! | 1  own velocity                       | motion encoding                  |
//! | 2  own acceleration                   | motion encoding                  |
//! | 3  ball position                      | polar                            |
//! | 4  ball velocity                      | motion encoding                  |
//! | 5  attacked goal position             | polar                            |
//! | 6  defended goal position             | polar                            |
//! | 7  ball − attacked goal               | polar of the local difference    |
//! | 8  ball − defended goal               | polar of the local difference    |
//! | 9  (velocity projection, kickable)    | sigmoid, boolean                 |
//! | +6 per other agent                    | position, velocity, pos − ball   |
//!
//! Other agents appear teammates-first, then opponents, both in ascending
//! index order. Stage dimensions: 18 (1v0), 24 (1v1), 36 (2v2).

use crate::pitch::{distances, PitchConfig, WorldState};
use crate::vec2::Vec2;
use std::f64::consts::PI;

/// Entries per proprioceptive block (rows 1–9).
pub const PROPRIO_DIM: usize = 18;
/// Entries per observed other agent (row-10 block).
pub const PER_OTHER_DIM: usize = 6;

/// Observation dimension when observing `n_others` other agents.
pub fn obs_dim(n_others: usize) -> usize {
    PROPRIO_DIM + PER_OTHER_DIM * n_others
}

/// Polar encoding of a position vector: (‖rel‖/diag clamped to [0, 1],
/// angle mapped to [0, 1)). The zero vector encodes as (0, 0).
pub fn polar_position(rel: Vec2, diag: f64) -> (f64, f64) {
    if rel.x == 0.0 && rel.y == 0.0 {
        return (0.0, 0.0);
    }
    let rho = (rel.norm() / diag).clamp(0.0, 1.0);
    (rho, encode_angle(rel.angle()))
}

/// Bounded-magnitude encoding of a velocity or acceleration vector:
/// (√((tanh²cₓ + tanh²c_y)/2), angle mapped to [0, 1)). The zero vector
/// encodes as (0, 0).
pub fn polar_motion(v: Vec2) -> (f64, f64) {
    if v.x == 0.0 && v.y == 0.0 {
        return (0.0, 0.0);
    }
    let tx = v.x.tanh();
    let ty = v.y.tanh();
    let rho = ((tx * tx + ty * ty) / 2.0).sqrt();
    (rho, encode_angle(v.angle()))
}

/// [−π, π) → [0, 1).
fn encode_angle(a: f64) -> f64 {
    let t = (a + PI) / (2.0 * PI);
    if t >= 1.0 {
        0.0
    } else {
        t
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Scalar projection of the ball velocity onto the unit vector from the
/// agent to the goal it attacks, squashed through a sigmoid. An agent
/// standing exactly on the goal centre yields projection 0 → 0.5.
pub fn ball_velocity_projection(state: &WorldState, agent: usize, config: &PitchConfig) -> f64 {
    let goal = config.goal_center(state.team_of[agent]);
    projection_with_goal(state, agent, goal)
}

fn projection_with_goal(state: &WorldState, agent: usize, goal: Vec2) -> f64 {
    let to_goal = goal - state.agents[agent].pos;
    let proj = if to_goal.x == 0.0 && to_goal.y == 0.0 {
        0.0
    } else {
        state.ball.vel.dot(to_goal.normalized())
    };
    sigmoid(proj)
}

/// The agents observed by `agent` under its native stage layout:
/// teammates first, then opponents, ascending.
pub fn canonical_others(state: &WorldState, agent: usize) -> Vec<usize> {
    let mut others = state.teammates_of(agent);
    others.extend(state.opponents_of(agent));
    others
}

/// Build the observation of `agent` watching the listed `others` (in the
/// given block order). `lambda` is the normalized kickable threshold.
pub fn build_observation(
    state: &WorldState,
    agent: usize,
    others: &[usize],
    config: &PitchConfig,
    lambda: f64,
) -> Vec<f64> {
    let goals = [config.goal_center(0), config.goal_center(1)];
    build_observation_with_goals(state, agent, others, goals, config.diag(), lambda)
}

/// Core builder with explicit goal centres; `goals[l]` is the goal team `l`
/// attacks. Everything downstream of this function is frame-independent:
/// translating or rotating the whole world (bodies, headings and goals
/// together) leaves the output unchanged.
pub fn build_observation_with_goals(
    state: &WorldState,
    agent: usize,
    others: &[usize],
    goals: [Vec2; 2],
    diag: f64,
    lambda: f64,
) -> Vec<f64> {
    let me = &state.agents[agent];
    let team = state.team_of[agent] as usize;
    let attacked = goals[team];
    let defended = goals[1 - team];
    let to_local = |world: Vec2| world.rotated(-me.heading);
    let local_pos = |p: Vec2| to_local(p - me.pos);

    let ball_pos = local_pos(state.ball.pos);
    let attacked_pos = local_pos(attacked);
    let defended_pos = local_pos(defended);

    let mut out = Vec::with_capacity(obs_dim(others.len()));
    let mut push = |pair: (f64, f64)| {
        out.push(pair.0);
        out.push(pair.1);
    };

    push(polar_motion(to_local(me.vel)));
    push(polar_motion(to_local(me.accel)));
    push(polar_position(ball_pos, diag));
    push(polar_motion(to_local(state.ball.vel)));
    push(polar_position(attacked_pos, diag));
    push(polar_position(defended_pos, diag));
    push(polar_position(ball_pos - attacked_pos, diag));
    push(polar_position(ball_pos - defended_pos, diag));

    let to_goal = attacked - me.pos;
    let proj = if to_goal.x == 0.0 && to_goal.y == 0.0 {
        0.0
    } else {
        state.ball.vel.dot(to_goal.normalized())
    };
    let d_ball = (me.pos - state.ball.pos).norm() / diag;
    let kickable = state.kick_history[agent] || d_ball <= lambda;
    push((sigmoid(proj), if kickable { 1.0 } else { 0.0 }));

    for &j in others {
        let other = &state.agents[j];
        let pos = local_pos(other.pos);
        push(polar_position(pos, diag));
        push(polar_motion(to_local(other.vel)));
        push(polar_position(pos - ball_pos, diag));
    }
    out
}

/// Human-readable layout schema (`index<TAB>component`), written into run
/// directories so checkpoints stay portable.
pub fn layout_schema(n_others: usize) -> String {
    let mut lines = vec![format!("# observation layout v1, {} entries", obs_dim(n_others))];
    let rows: [(&str, &str); 9] = [
        ("own_velocity", "motion"),
        ("own_acceleration", "motion"),
        ("ball_position", "polar"),
        ("ball_velocity", "motion"),
        ("attacked_goal_position", "polar"),
        ("defended_goal_position", "polar"),
        ("ball_minus_attacked_goal", "polar"),
        ("ball_minus_defended_goal", "polar"),
        ("projection_and_kickable", "sigmoid,bool"),
    ];
    let mut idx = 0;
    for (name, enc) in rows {
        lines.push(format!("{idx}\t{name}.rho ({enc})"));
        lines.push(format!("{}\t{name}.theta", idx + 1));
        idx += 2;
    }
    for k in 0..n_others {
        for part in ["position.rho", "position.theta", "velocity.rho", "velocity.theta", "pos_minus_ball.rho", "pos_minus_ball.theta"] {
            lines.push(format!("{idx}\tother{k}.{part}"));
            idx += 1;
        }
    }
    lines.join("\n") + "\n"
}

/// Kickable flag as stored in the observation: latched history or currently
/// within the threshold.
pub fn kickable_flag(state: &WorldState, agent: usize, config: &PitchConfig, lambda: f64) -> bool {
    let (d, _) = distances(state, config);
    state.kick_history[agent] || d[agent] <= lambda
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curriculum::StageId;
    use crate::pitch::{reset, BodyState};
    use proptest::prelude::*;
    use rand::Rng;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const LAMBDA: f64 = 0.03;

    #[test]
    fn polar_position_examples() {
        assert_eq!(polar_position(Vec2::new(0.0, 0.0), 50.0), (0.0, 0.0));
        let (rho, theta) = polar_position(Vec2::new(50.0, 0.0), 50.0);
        assert_eq!(rho, 1.0);
        assert_eq!(theta, 0.5);
        let (rho, _) = polar_position(Vec2::new(3.0, 4.0), 50.0);
        assert!((rho - 0.1).abs() < 1e-15);
        // Distances beyond the diagonal clamp to 1.
        let (rho, _) = polar_position(Vec2::new(100.0, 0.0), 50.0);
        assert_eq!(rho, 1.0);
    }

    #[test]
    fn polar_motion_examples() {
        assert_eq!(polar_motion(Vec2::new(0.0, 0.0)).0, 0.0);
        let (rho, theta) = polar_motion(Vec2::new(1.0, 0.0));
        let expected = 1.0f64.tanh() / 2.0f64.sqrt();
        assert!((rho - expected).abs() < 1e-15);
        assert_eq!(theta, 0.5);
        // Saturation: the magnitude tends to 1 for large inputs (and tanh
        // rounds to exactly 1.0 in f64 well before 1e6).
        let (rho, _) = polar_motion(Vec2::new(1e6, 1e6));
        assert!(rho <= 1.0 && rho > 1.0 - 1e-12);
    }

    #[test]
    fn projection_examples() {
        let config = PitchConfig::default();
        let mut state = reset(&config, StageId::S1_1v0, 0).unwrap();
        state.agents[0].pos = Vec2::new(0.0, 0.0);
        state.ball.pos = Vec2::new(1.0, 0.0);

        state.ball.vel = Vec2::new(0.0, 0.0);
        assert_eq!(ball_velocity_projection(&state, 0, &config), 0.5);

        // Straight at the attacked goal (+x for team 0) at 2 m/s.
        state.ball.vel = Vec2::new(2.0, 0.0);
        let up = ball_velocity_projection(&state, 0, &config);
        assert!((up - sigmoid(2.0)).abs() < 1e-15);
        assert!((up - 0.8808).abs() < 1e-4);

        state.ball.vel = Vec2::new(-2.0, 0.0);
        let down = ball_velocity_projection(&state, 0, &config);
        assert!((down - sigmoid(-2.0)).abs() < 1e-15);
        assert!((down - 0.1192).abs() < 1e-4);

        // Agent exactly on the goal centre: projection defined as 0.
        state.agents[0].pos = config.goal_center(0);
        assert_eq!(ball_velocity_projection(&state, 0, &config), 0.5);
    }

    #[test]
    fn stage_dimensions() {
        let config = PitchConfig::default();
        for (stage, dim) in [
            (StageId::S1_1v0, 18),
            (StageId::S2_1v1, 24),
            (StageId::S3_2v2, 36),
        ] {
            let state = reset(&config, stage, 1).unwrap();
            let others = canonical_others(&state, 0);
            let obs = build_observation(&state, 0, &others, &config, LAMBDA);
            assert_eq!(obs.len(), dim);
            assert_eq!(obs_dim(others.len()), dim);
        }
    }

    #[test]
    fn canonical_order_is_teammates_then_opponents() {
        let config = PitchConfig::default();
        let state = reset(&config, StageId::S3_2v2, 1).unwrap();
        assert_eq!(canonical_others(&state, 0), vec![1, 2, 3]);
        assert_eq!(canonical_others(&state, 1), vec![0, 2, 3]);
        assert_eq!(canonical_others(&state, 2), vec![3, 0, 1]);
    }

    #[test]
    fn kickable_flag_matches_definition() {
        let config = PitchConfig::default();
        let mut state = reset(&config, StageId::S1_1v0, 7).unwrap();
        state.agents[0].pos = Vec2::new(0.0, 0.0);
        state.ball.pos = Vec2::new(30.0, 0.0);
        assert!(!kickable_flag(&state, 0, &config, LAMBDA));
        // Within λ·diag = 1.5 m.
        state.ball.pos = Vec2::new(1.0, 0.0);
        assert!(kickable_flag(&state, 0, &config, LAMBDA));
        // Latched history keeps it on even when far away.
        state.ball.pos = Vec2::new(30.0, 0.0);
        state.kick_history[0] = true;
        assert!(kickable_flag(&state, 0, &config, LAMBDA));
        let obs = build_observation(&state, 0, &[], &config, LAMBDA);
        assert_eq!(obs[17], 1.0);
    }

    fn random_state(seed: u64) -> (PitchConfig, WorldState) {
        let config = PitchConfig::default();
        let mut state = reset(&config, StageId::S3_2v2, seed).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x51a3);
        let mut randomize = |b: &mut BodyState, vmax: f64| {
            b.vel = Vec2::new(rng.gen_range(-vmax..vmax), rng.gen_range(-vmax..vmax));
            b.accel = Vec2::new(rng.gen_range(-10.0..10.0), rng.gen_range(-10.0..10.0));
            b.heading = rng.gen_range(-PI..PI);
            b.angular_vel = rng.gen_range(-4.0..4.0);
        };
        for i in 0..4 {
            let mut b = state.agents[i];
            randomize(&mut b, 8.0);
            state.agents[i] = b;
        }
        let mut ball = state.ball;
        randomize(&mut ball, 15.0);
        ball.heading = 0.0;
        state.ball = ball;
        (config, state)
    }

    #[test]
    fn entries_stay_in_unit_range() {
        for seed in 0..200 {
            let (config, state) = random_state(seed);
            for agent in 0..4 {
                let others = canonical_others(&state, agent);
                let obs = build_observation(&state, agent, &others, &config, LAMBDA);
                for (i, v) in obs.iter().enumerate() {
                    assert!(
                        (0.0..=1.0).contains(v),
                        "seed {seed} agent {agent} entry {i} out of range: {v}"
                    );
                }
            }
        }
    }

    proptest! {
        #[test]
        fn translation_leaves_observations_unchanged(
            seed in 0u64..500,
            tx in -100.0f64..100.0,
            ty in -100.0f64..100.0,
        ) {
            let (config, state) = random_state(seed);
            let shift = Vec2::new(tx, ty);
            let mut moved = state.clone();
            for a in &mut moved.agents {
                a.pos += shift;
            }
            moved.ball.pos += shift;
            let goals = [config.goal_center(0), config.goal_center(1)];
            let moved_goals = [goals[0] + shift, goals[1] + shift];
            for agent in 0..4 {
                let others = canonical_others(&state, agent);
                let a = build_observation_with_goals(&state, agent, &others, goals, config.diag(), LAMBDA);
                let b = build_observation_with_goals(&moved, agent, &others, moved_goals, config.diag(), LAMBDA);
                for (x, y) in a.iter().zip(&b) {
                    prop_assert!((x - y).abs() < 1e-9, "{} vs {}", x, y);
                }
            }
        }

        #[test]
        fn rotation_leaves_observations_unchanged(
            seed in 0u64..500,
            phi in -PI..PI,
        ) {
            let (config, state) = random_state(seed);
            let mut turned = state.clone();
            for a in &mut turned.agents {
                a.pos = a.pos.rotated(phi);
                a.vel = a.vel.rotated(phi);
                a.accel = a.accel.rotated(phi);
                a.heading = {
                    let h = a.heading + phi;
                    // same wrap as the environment
                    let mut w = (h + PI).rem_euclid(2.0 * PI) - PI;
                    if w >= PI { w = -PI; }
                    w
                };
            }
            turned.ball.pos = turned.ball.pos.rotated(phi);
            turned.ball.vel = turned.ball.vel.rotated(phi);
            turned.ball.accel = turned.ball.accel.rotated(phi);
            let goals = [config.goal_center(0), config.goal_center(1)];
            let turned_goals = [goals[0].rotated(phi), goals[1].rotated(phi)];
            for agent in 0..4 {
                let others = canonical_others(&state, agent);
                let a = build_observation_with_goals(&state, agent, &others, goals, config.diag(), LAMBDA);
                let b = build_observation_with_goals(&turned, agent, &others, turned_goals, config.diag(), LAMBDA);
                for (x, y) in a.iter().zip(&b) {
                    prop_assert!((x - y).abs() < 1e-9, "{} vs {}", x, y);
                }
            }
        }
    }

    #[test]
    fn schema_covers_every_index() {
        let schema = layout_schema(3);
        // one header line + one line per entry
        assert_eq!(schema.lines().count(), 1 + 36);
        assert!(schema.contains("other2.pos_minus_ball.theta"));
    }
}
