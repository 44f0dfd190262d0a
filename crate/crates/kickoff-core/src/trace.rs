//! Replay trace export: line-delimited text, one record per control step.
//!
//! File layout:
//! - line 1: `kickoff-trace v1` (format version),
//! - line 2: run metadata (`stage=… agents=… control_dt=… field=…`),
//! - line 3: CSV column header,
//! - then one CSV row per control step with the post-step state:
//!   `step,outcome,ball_px,ball_py,ball_vx,ball_vy`, followed per agent by
//!   `px,py,vx,vy,heading,ang_vel,cmd_accel,cmd_torque,cmd_vert,reward`.
//!
//! `outcome` is empty on running steps and `goal0`, `goal1` or `timeout` on
//! the terminal row.

use crate::arena::EpisodeRecord;
use crate::curriculum::StageId;
use crate::error::Result;
use crate::pitch::PitchConfig;
use std::io::Write;

pub const TRACE_VERSION: &str = "kickoff-trace v1";

pub fn write_episode(
    w: &mut impl Write,
    stage: StageId,
    config: &PitchConfig,
    record: &EpisodeRecord,
) -> Result<()> {
    let n = stage.n_total();
    writeln!(w, "{TRACE_VERSION}")?;
    writeln!(
        w,
        "stage={stage} agents={n} control_dt={} field={}x{}",
        config.control_dt, config.field_length, config.field_width
    )?;
    let mut cols = vec![
        "step".to_string(),
        "outcome".to_string(),
        "ball_px".to_string(),
        "ball_py".to_string(),
        "ball_vx".to_string(),
        "ball_vy".to_string(),
    ];
    for i in 0..n {
        for field in ["px", "py", "vx", "vy", "heading", "ang_vel", "cmd_accel", "cmd_torque", "cmd_vert", "reward"] {
            cols.push(format!("a{i}_{field}"));
        }
    }
    writeln!(w, "{}", cols.join(","))?;

    let steps = record.actions.len();
    for k in 0..steps {
        // Post-step snapshot for control step k+1.
        let snap = &record.trace.snapshots[k + 1];
        let outcome = if k + 1 == steps {
            match record.outcome.scored_team {
                Some(0) => "goal0",
                Some(_) => "goal1",
                None => "timeout",
            }
        } else {
            ""
        };
        let mut row = format!(
            "{},{},{},{},{},{}",
            k + 1,
            outcome,
            snap.ball_pos.x,
            snap.ball_pos.y,
            snap.ball_vel.x,
            snap.ball_vel.y
        );
        for i in 0..n {
            row.push_str(&format!(
                ",{},{},{},{},{},{},{},{},{},{}",
                snap.agent_pos[i].x,
                snap.agent_pos[i].y,
                snap.agent_vel[i].x,
                snap.agent_vel[i].y,
                snap.agent_heading[i],
                snap.agent_ang_vel[i],
                record.actions[k][i].a[0],
                record.actions[k][i].a[1],
                record.actions[k][i].a[2],
                record.rewards[k][i]
            ));
        }
        writeln!(w, "{row}")?;
    }
    Ok(())
}
