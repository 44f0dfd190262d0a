//! Binary checkpoint format, bit-exact across save/load.
//!
//! Layout (all integers and floats little-endian):
//!
//! ```text
//! magic   b"KCKP"
//! version u32 (currently 1)
//! meta    stage u8 (1|2|3), global_step u64, seed u64,
//!         eval_present u8, success f64, episode_len f64, vel_to_ball f64
//! n_nets  u8
//! net     stage u8, head u8 (0 actor | 1 critic), action_dim u32,
//!         encoder_width u32, n_trunk u32, trunk widths u32×n,
//!         n_layers u32,
//!         layer: out u32, in u32, w f64×(out·in) row-major, b f64×out
//! ```

use super::{ArchSpec, HeadKind, Linear, Mlp};
use crate::curriculum::{CheckpointMeta, EvalSummary, StageId};
use crate::error::{Error, Result};
use ndarray::{Array1, Array2};
use std::fs;
use std::io::{Read, Write};
use std::path::Path;

const MAGIC: &[u8; 4] = b"KCKP";
pub const FORMAT_VERSION: u32 = 1;

fn stage_code(stage: StageId) -> u8 {
    match stage {
        StageId::S1_1v0 => 1,
        StageId::S2_1v1 => 2,
        StageId::S3_2v2 => 3,
    }
}

fn stage_from_code(code: u8) -> Result<StageId> {
    match code {
        1 => Ok(StageId::S1_1v0),
        2 => Ok(StageId::S2_1v1),
        3 => Ok(StageId::S3_2v2),
        other => Err(Error::Checkpoint(format!("unknown stage code {other}"))),
    }
}

pub fn save(path: &Path, meta: &CheckpointMeta, nets: &[Mlp]) -> Result<()> {
    for net in nets {
        if !net.all_finite() {
            return Err(Error::Numeric("refusing to checkpoint non-finite parameters".into()));
        }
    }
    let mut buf: Vec<u8> = Vec::new();
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    buf.push(stage_code(meta.stage));
    buf.extend_from_slice(&meta.global_step.to_le_bytes());
    buf.extend_from_slice(&meta.seed.to_le_bytes());
    match &meta.eval {
        Some(e) => {
            buf.push(1);
            for v in [e.success_rate, e.mean_episode_length, e.mean_vel_to_ball] {
                buf.extend_from_slice(&v.to_le_bytes());
            }
        }
        None => {
            buf.push(0);
            buf.extend_from_slice(&[0u8; 24]);
        }
    }
    buf.push(nets.len() as u8);
    for net in nets {
        let arch = net.arch();
        buf.push(stage_code(arch.stage));
        buf.push(match arch.head {
            HeadKind::Actor => 0,
            HeadKind::Critic => 1,
        });
        buf.extend_from_slice(&(arch.action_dim as u32).to_le_bytes());
        buf.extend_from_slice(&(arch.encoder_width as u32).to_le_bytes());
        buf.extend_from_slice(&(arch.trunk_widths.len() as u32).to_le_bytes());
        for &w in &arch.trunk_widths {
            buf.extend_from_slice(&(w as u32).to_le_bytes());
        }
        buf.extend_from_slice(&(net.layers.len() as u32).to_le_bytes());
        for layer in &net.layers {
            let (out, input) = layer.w.dim();
            buf.extend_from_slice(&(out as u32).to_le_bytes());
            buf.extend_from_slice(&(input as u32).to_le_bytes());
            for v in layer.w.iter() {
                buf.extend_from_slice(&v.to_le_bytes());
            }
            for v in layer.b.iter() {
                buf.extend_from_slice(&v.to_le_bytes());
            }
        }
    }
    let mut file = fs::File::create(path)?;
    file.write_all(&buf)?;
    Ok(())
}

struct Reader {
    data: Vec<u8>,
    pos: usize,
}

impl Reader {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        if self.pos + n > self.data.len() {
            return Err(Error::Checkpoint("unexpected end of file".into()));
        }
        let s = &self.data[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

pub fn load(path: &Path) -> Result<(CheckpointMeta, Vec<Mlp>)> {
    let mut data = Vec::new();
    fs::File::open(path)
        .map_err(|e| Error::Checkpoint(format!("{}: {e}", path.display())))?
        .read_to_end(&mut data)?;
    let mut r = Reader { data, pos: 0 };

    if r.take(4)? != MAGIC {
        return Err(Error::Checkpoint(format!("{}: bad magic", path.display())));
    }
    let version = r.u32()?;
    if version != FORMAT_VERSION {
        return Err(Error::Checkpoint(format!(
            "{}: format version {version} is incompatible with this build (expected {FORMAT_VERSION})",
            path.display()
        )));
    }
    let stage = stage_from_code(r.u8()?)?;
    let global_step = r.u64()?;
    let seed = r.u64()?;
    let eval_present = r.u8()?;
    let vals = [r.f64()?, r.f64()?, r.f64()?];
    let eval = (eval_present == 1).then(|| EvalSummary {
        success_rate: vals[0],
        mean_episode_length: vals[1],
        mean_vel_to_ball: vals[2],
    });
    let meta = CheckpointMeta { stage, global_step, seed, eval };

    let n_nets = r.u8()? as usize;
    let mut nets = Vec::with_capacity(n_nets);
    for _ in 0..n_nets {
        let net_stage = stage_from_code(r.u8()?)?;
        let head = match r.u8()? {
            0 => HeadKind::Actor,
            1 => HeadKind::Critic,
            other => return Err(Error::Checkpoint(format!("unknown head code {other}"))),
        };
        let action_dim = r.u32()? as usize;
        let encoder_width = r.u32()? as usize;
        let n_trunk = r.u32()? as usize;
        if n_trunk > 64 {
            return Err(Error::Checkpoint("implausible trunk depth".into()));
        }
        let mut trunk_widths = Vec::with_capacity(n_trunk);
        for _ in 0..n_trunk {
            trunk_widths.push(r.u32()? as usize);
        }
        let arch = ArchSpec { stage: net_stage, head, encoder_width, trunk_widths, action_dim };
        let n_layers = r.u32()? as usize;
        let mut layers = Vec::with_capacity(n_layers);
        for _ in 0..n_layers {
            let out = r.u32()? as usize;
            let input = r.u32()? as usize;
            if out * input > 100_000_000 {
                return Err(Error::Checkpoint("implausible layer size".into()));
            }
            let mut w = Vec::with_capacity(out * input);
            for _ in 0..out * input {
                w.push(r.f64()?);
            }
            let mut b = Vec::with_capacity(out);
            for _ in 0..out {
                b.push(r.f64()?);
            }
            layers.push(Linear {
                w: Array2::from_shape_vec((out, input), w)
                    .map_err(|e| Error::Checkpoint(e.to_string()))?,
                b: Array1::from_vec(b),
            });
        }
        nets.push(Mlp::from_layers(arch, layers)?);
    }
    if r.pos != r.data.len() {
        return Err(Error::Checkpoint(format!("{}: trailing bytes", path.display())));
    }
    Ok((meta, nets))
}
