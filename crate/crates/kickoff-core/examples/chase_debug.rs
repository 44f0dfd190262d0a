// Scratch diagnostics for the scripted chaser (not part of the deliverable surface).
use kickoff_core::curriculum::StageId;
use kickoff_core::pitch::{reset, step, PitchConfig};
use kickoff_core::policy::{ChaserPolicy, Policy};

fn main() {
    let config = PitchConfig::default();
    for seed in 0..40 {
        let mut state = reset(&config, StageId::S1_1v0, seed).unwrap();
        let mut chaser = ChaserPolicy::new();
        println!("=== seed {seed} ===");
        for k in 0..600 {
            let action = chaser.act(&state, 0, &config, 0.03).unwrap();
            let (next, outcome) = step(&state, &[action], &config, 0.03).unwrap();
            if false {
                let me = &next.agents[0];
                let d = (me.pos - next.ball.pos).norm();
                println!(
                    "t={k:3} agent=({:6.2},{:6.2}) h={:5.2} w={:5.2} v={:4.1} ball=({:6.2},{:6.2}) bv={:4.1} d={:5.2} act=({:+.2},{:+.2})",
                    me.pos.x, me.pos.y, me.heading, me.angular_vel, me.vel.norm(),
                    next.ball.pos.x, next.ball.pos.y, next.ball.vel.norm(), d, action.a[0], action.a[1]
                );
            }
            state = next;
            if outcome.terminal {
                println!("terminal at {k}: scored={:?} timeout={}", outcome.scored_team, outcome.timeout);
                break;
            }
        }
    }
}
