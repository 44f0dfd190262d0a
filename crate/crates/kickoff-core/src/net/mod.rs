//! Self-contained differentiable MLP stack for the actor and twin-critic
//! networks, in 64-bit floats throughout.
//!
//! Every observation component gets its own linear encoder so no single
//! block dominates the input; encoder features are concatenated into a
//! tanh trunk. Critics receive the raw action appended to the trunk input,
//! keeping it prominent relative to the encoded observation features. The
//! stage-3 variant feeds both opponent blocks through one weight-shared
//! encoder and concatenates the element-wise minimum and maximum of the two
//! feature vectors, making actor and critic outputs invariant to the order
//! in which opponents are observed.
//!
//! Layer order (also the checkpoint serialization order):
//! nine proprioceptive encoders, the teammate/other-agent encoder (stages
//! 2–3), the shared opponent encoder (stage 3), the trunk layers, the head.

pub mod adam;
pub mod checkpoint;

pub use adam::{adam_step, soft_update, AdamState};

use crate::curriculum::StageId;
use crate::error::{Error, Result};
use crate::observe::{PER_OTHER_DIM, PROPRIO_DIM};
use ndarray::{s, Array1, Array2, Axis};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

const N_PROP_BLOCKS: usize = 9;
const PROP_BLOCK_DIM: usize = PROPRIO_DIM / N_PROP_BLOCKS;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HeadKind {
    Actor,
    Critic,
}

/// Network architecture description. Widths are configurable; the default
/// desk-scale sizes keep full training runs tractable on a laptop.
#[derive(Debug, Clone, PartialEq)]
pub struct ArchSpec {
    pub stage: StageId,
    pub head: HeadKind,
    pub encoder_width: usize,
    pub trunk_widths: Vec<usize>,
    pub action_dim: usize,
}

pub const DEFAULT_ENCODER_WIDTH: usize = 16;
pub const DEFAULT_TRUNK: [usize; 2] = [64, 64];

impl ArchSpec {
    pub fn actor(stage: StageId) -> Self {
        Self {
            stage,
            head: HeadKind::Actor,
            encoder_width: DEFAULT_ENCODER_WIDTH,
            trunk_widths: DEFAULT_TRUNK.to_vec(),
            action_dim: 3,
        }
    }

    pub fn critic(stage: StageId) -> Self {
        Self { head: HeadKind::Critic, ..Self::actor(stage) }
    }

    pub fn with_widths(mut self, encoder: usize, trunk: Vec<usize>) -> Self {
        self.encoder_width = encoder;
        self.trunk_widths = trunk;
        self
    }

    /// Observation dimension this net consumes.
    pub fn input_dim(&self) -> usize {
        PROPRIO_DIM + self.stage.n_observed_others() * PER_OTHER_DIM
    }

    pub fn output_dim(&self) -> usize {
        match self.head {
            HeadKind::Actor => self.action_dim,
            HeadKind::Critic => 1,
        }
    }

    /// Width of the concatenated encoder features.
    fn concat_dim(&self) -> usize {
        let e = self.encoder_width;
        match self.stage {
            StageId::S1_1v0 => N_PROP_BLOCKS * e,
            StageId::S2_1v1 => (N_PROP_BLOCKS + 1) * e,
            // props + teammate + (min ‖ max) of the pooled opponent features
            StageId::S3_2v2 => (N_PROP_BLOCKS + 3) * e,
        }
    }

    fn trunk_input_dim(&self) -> usize {
        self.concat_dim()
            + match self.head {
                HeadKind::Actor => 0,
                HeadKind::Critic => self.action_dim,
            }
    }

    /// (out, in) shape per layer in serialization order.
    fn layer_shapes(&self) -> Vec<(usize, usize)> {
        let e = self.encoder_width;
        let mut shapes = vec![(e, PROP_BLOCK_DIM); N_PROP_BLOCKS];
        match self.stage {
            StageId::S1_1v0 => {}
            StageId::S2_1v1 => shapes.push((e, PER_OTHER_DIM)),
            StageId::S3_2v2 => {
                shapes.push((e, PER_OTHER_DIM)); // teammate encoder
                shapes.push((e, PER_OTHER_DIM)); // shared opponent encoder
            }
        }
        let mut prev = self.trunk_input_dim();
        for &w in &self.trunk_widths {
            shapes.push((w, prev));
            prev = w;
        }
        shapes.push((self.output_dim(), prev));
        shapes
    }

    fn validate(&self) -> Result<()> {
        if self.encoder_width == 0 || self.trunk_widths.iter().any(|&w| w == 0) {
            return Err(Error::Config("network widths must be positive".into()));
        }
        if self.action_dim != 3 {
            return Err(Error::Config("action_dim must be 3".into()));
        }
        Ok(())
    }
}

/// One dense layer; `w` has shape (out, in).
#[derive(Debug, Clone, PartialEq)]
pub struct Linear {
    pub w: Array2<f64>,
    pub b: Array1<f64>,
}

impl Linear {
    fn zeros(out: usize, input: usize) -> Self {
        Self { w: Array2::zeros((out, input)), b: Array1::zeros(out) }
    }
}

/// Gradient of one dense layer, same shapes as the layer.
#[derive(Debug, Clone)]
pub struct LinearGrad {
    pub dw: Array2<f64>,
    pub db: Array1<f64>,
}

/// Parameter gradients aligned with [`Mlp::layers`].
#[derive(Debug, Clone)]
pub struct Gradients {
    pub layers: Vec<LinearGrad>,
}

/// A full actor or critic network.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    arch: ArchSpec,
    pub layers: Vec<Linear>,
}

/// Cached intermediate values of one forward pass, consumed by
/// [`Mlp::backward`].
pub struct Trace {
    obs: Array2<f64>,
    prop_feats: Vec<Array2<f64>>,
    ext_feat: Option<Array2<f64>>,
    opp_feats: Option<(Array2<f64>, Array2<f64>)>,
    trunk_inputs: Vec<Array2<f64>>,
    trunk_feats: Vec<Array2<f64>>,
    head_input: Array2<f64>,
    output: Array2<f64>,
}

impl Trace {
    pub fn output(&self) -> &Array2<f64> {
        &self.output
    }
}

fn linear_fwd(layer: &Linear, x: &Array2<f64>) -> Array2<f64> {
    x.dot(&layer.w.t()) + &layer.b
}

fn tanh_inplace(mut z: Array2<f64>) -> Array2<f64> {
    z.mapv_inplace(f64::tanh);
    z
}

/// dZ for a tanh layer given its activated output and upstream dF.
fn tanh_backward(activated: &Array2<f64>, upstream: &Array2<f64>) -> Array2<f64> {
    let mut dz = upstream.clone();
    dz.zip_mut_with(activated, |d, &f| *d *= 1.0 - f * f);
    dz
}

impl Mlp {
    /// Seeded initialization: uniform fan-in scaling on hidden layers, the
    /// head uniform in ±3e-3 for stable early outputs.
    pub fn init(arch: ArchSpec, seed: u64) -> Result<Self> {
        arch.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let shapes = arch.layer_shapes();
        let last = shapes.len() - 1;
        let layers = shapes
            .iter()
            .enumerate()
            .map(|(i, &(out, input))| {
                let k = if i == last { 3e-3 } else { 1.0 / (input as f64).sqrt() };
                let mut layer = Linear::zeros(out, input);
                for v in layer.w.iter_mut() {
                    *v = rng.gen_range(-k..k);
                }
                for v in layer.b.iter_mut() {
                    *v = rng.gen_range(-k..k);
                }
                layer
            })
            .collect();
        Ok(Self { arch, layers })
    }

    /// All-zero parameters (mostly for tests: outputs are exactly zero).
    pub fn zeros(arch: ArchSpec) -> Result<Self> {
        arch.validate()?;
        let layers = arch.layer_shapes().iter().map(|&(o, i)| Linear::zeros(o, i)).collect();
        Ok(Self { arch, layers })
    }

    pub fn arch(&self) -> &ArchSpec {
        &self.arch
    }

    /// Construct from raw layers (checkpoint loading); shapes are checked
    /// against the architecture.
    pub fn from_layers(arch: ArchSpec, layers: Vec<Linear>) -> Result<Self> {
        arch.validate()?;
        let shapes = arch.layer_shapes();
        if shapes.len() != layers.len() {
            return Err(Error::Checkpoint(format!(
                "expected {} layers, got {}",
                shapes.len(),
                layers.len()
            )));
        }
        for (i, (layer, &(out, input))) in layers.iter().zip(&shapes).enumerate() {
            if layer.w.dim() != (out, input) || layer.b.len() != out {
                return Err(Error::Checkpoint(format!("layer {i} has inconsistent shape")));
            }
        }
        Ok(Self { arch, layers })
    }

    pub fn n_params(&self) -> usize {
        self.layers.iter().map(|l| l.w.len() + l.b.len()).sum()
    }

    fn encoder_layers(&self) -> (usize, Option<usize>, Option<usize>) {
        match self.arch.stage {
            StageId::S1_1v0 => (N_PROP_BLOCKS, None, None),
            StageId::S2_1v1 => (N_PROP_BLOCKS, Some(N_PROP_BLOCKS), None),
            StageId::S3_2v2 => (N_PROP_BLOCKS, Some(N_PROP_BLOCKS), Some(N_PROP_BLOCKS + 1)),
        }
    }

    fn trunk_range(&self) -> std::ops::Range<usize> {
        let (_, ext, opp) = self.encoder_layers();
        let start = N_PROP_BLOCKS + ext.map(|_| 1).unwrap_or(0) + opp.map(|_| 1).unwrap_or(0);
        start..start + self.arch.trunk_widths.len()
    }

    fn head_index(&self) -> usize {
        self.layers.len() - 1
    }

    /// Forward pass over a batch. `action` is required for critics and
    /// rejected for actors.
    pub fn forward(&self, obs: &Array2<f64>, action: Option<&Array2<f64>>) -> Result<Array2<f64>> {
        Ok(self.forward_trace(obs, action)?.output)
    }

    /// Forward pass keeping the intermediate values needed for [`backward`].
    pub fn forward_trace(&self, obs: &Array2<f64>, action: Option<&Array2<f64>>) -> Result<Trace> {
        let batch = obs.nrows();
        if obs.ncols() != self.arch.input_dim() {
            return Err(Error::Contract(format!(
                "observation dim {} does not match architecture ({})",
                obs.ncols(),
                self.arch.input_dim()
            )));
        }
        match (self.arch.head, action) {
            (HeadKind::Critic, Some(a)) => {
                if a.dim() != (batch, self.arch.action_dim) {
                    return Err(Error::Contract("action batch shape mismatch".into()));
                }
            }
            (HeadKind::Critic, None) => {
                return Err(Error::Contract("critic forward requires actions".into()))
            }
            (HeadKind::Actor, Some(_)) => {
                return Err(Error::Contract("actor forward takes no actions".into()))
            }
            (HeadKind::Actor, None) => {}
        }

        let e = self.arch.encoder_width;
        let (_, ext_idx, opp_idx) = self.encoder_layers();

        let mut prop_feats = Vec::with_capacity(N_PROP_BLOCKS);
        for k in 0..N_PROP_BLOCKS {
            let block = obs.slice(s![.., k * PROP_BLOCK_DIM..(k + 1) * PROP_BLOCK_DIM]);
            let f = tanh_inplace(block.dot(&self.layers[k].w.t()) + &self.layers[k].b);
            prop_feats.push(f);
        }

        let mut ext_feat = None;
        let mut opp_feats = None;
        match self.arch.stage {
            StageId::S1_1v0 => {}
            StageId::S2_1v1 => {
                let layer = &self.layers[ext_idx.unwrap()];
                let block = obs.slice(s![.., PROPRIO_DIM..PROPRIO_DIM + PER_OTHER_DIM]);
                ext_feat = Some(tanh_inplace(block.dot(&layer.w.t()) + &layer.b));
            }
            StageId::S3_2v2 => {
                let tm_layer = &self.layers[ext_idx.unwrap()];
                let tm = obs.slice(s![.., PROPRIO_DIM..PROPRIO_DIM + PER_OTHER_DIM]);
                ext_feat = Some(tanh_inplace(tm.dot(&tm_layer.w.t()) + &tm_layer.b));
                let shared = &self.layers[opp_idx.unwrap()];
                let o1 = obs.slice(s![.., PROPRIO_DIM + PER_OTHER_DIM..PROPRIO_DIM + 2 * PER_OTHER_DIM]);
                let o2 = obs.slice(s![.., PROPRIO_DIM + 2 * PER_OTHER_DIM..PROPRIO_DIM + 3 * PER_OTHER_DIM]);
                let f1 = tanh_inplace(o1.dot(&shared.w.t()) + &shared.b);
                let f2 = tanh_inplace(o2.dot(&shared.w.t()) + &shared.b);
                opp_feats = Some((f1, f2));
            }
        }

        // Concatenate features (+ raw action for critics) into the trunk input.
        let mut concat = Array2::zeros((batch, self.arch.trunk_input_dim()));
        let mut col = 0;
        {
            let mut put = |f: &Array2<f64>| {
                concat.slice_mut(s![.., col..col + f.ncols()]).assign(f);
                col += f.ncols();
            };
            for f in &prop_feats {
                put(f);
            }
            if let Some(f) = &ext_feat {
                put(f);
            }
            if let Some((f1, f2)) = &opp_feats {
                let mut fmin = f1.clone();
                fmin.zip_mut_with(f2, |a, &b| *a = a.min(b));
                let mut fmax = f1.clone();
                fmax.zip_mut_with(f2, |a, &b| *a = a.max(b));
                put(&fmin);
                put(&fmax);
            }
            if let Some(a) = action {
                put(&a.to_owned());
            }
        }
        debug_assert_eq!(col, self.arch.trunk_input_dim());
        let _ = e;

        let mut trunk_inputs = Vec::with_capacity(self.arch.trunk_widths.len());
        let mut trunk_feats = Vec::with_capacity(self.arch.trunk_widths.len());
        let mut x = concat;
        for idx in self.trunk_range() {
            trunk_inputs.push(x.clone());
            let f = tanh_inplace(linear_fwd(&self.layers[idx], &x));
            trunk_feats.push(f.clone());
            x = f;
        }

        let head = &self.layers[self.head_index()];
        let z = linear_fwd(head, &x);
        let output = match self.arch.head {
            HeadKind::Actor => tanh_inplace(z),
            HeadKind::Critic => z,
        };

        Ok(Trace {
            obs: obs.to_owned(),
            prop_feats,
            ext_feat,
            opp_feats,
            trunk_inputs,
            trunk_feats,
            head_input: x,
            output,
        })
    }

    /// Reverse-mode gradients for all parameters, the observation input and
    /// (for critics) the action input, given `upstream` = ∂L/∂output.
    pub fn backward(
        &self,
        trace: &Trace,
        upstream: &Array2<f64>,
    ) -> Result<(Gradients, Array2<f64>, Option<Array2<f64>>)> {
        if upstream.dim() != trace.output.dim() {
            return Err(Error::Contract("upstream gradient shape mismatch".into()));
        }
        let batch = trace.obs.nrows();
        let mut grads: Vec<LinearGrad> = self
            .layers
            .iter()
            .map(|l| LinearGrad { dw: Array2::zeros(l.w.dim()), db: Array1::zeros(l.b.len()) })
            .collect();

        // Head.
        let head_idx = self.head_index();
        let dz_head = match self.arch.head {
            HeadKind::Actor => tanh_backward(&trace.output, upstream),
            HeadKind::Critic => upstream.clone(),
        };
        grads[head_idx].dw = dz_head.t().dot(&trace.head_input);
        grads[head_idx].db = dz_head.sum_axis(Axis(0));
        let mut dx = dz_head.dot(&self.layers[head_idx].w);

        // Trunk, reversed.
        let trunk = self.trunk_range();
        for (pos, idx) in trunk.clone().enumerate().rev() {
            let dz = tanh_backward(&trace.trunk_feats[pos], &dx);
            grads[idx].dw = dz.t().dot(&trace.trunk_inputs[pos]);
            grads[idx].db = dz.sum_axis(Axis(0));
            dx = dz.dot(&self.layers[idx].w);
        }

        // Split the concat gradient back into feature blocks.
        let e = self.arch.encoder_width;
        let mut d_obs = Array2::zeros((batch, self.arch.input_dim()));
        let mut col = 0;
        let (_, ext_idx, opp_idx) = self.encoder_layers();

        for k in 0..N_PROP_BLOCKS {
            let df = dx.slice(s![.., col..col + e]).to_owned();
            col += e;
            let dz = tanh_backward(&trace.prop_feats[k], &df);
            let block = trace.obs.slice(s![.., k * PROP_BLOCK_DIM..(k + 1) * PROP_BLOCK_DIM]);
            grads[k].dw = dz.t().dot(&block);
            grads[k].db = dz.sum_axis(Axis(0));
            d_obs
                .slice_mut(s![.., k * PROP_BLOCK_DIM..(k + 1) * PROP_BLOCK_DIM])
                .assign(&dz.dot(&self.layers[k].w));
        }

        if let Some(ext) = ext_idx {
            let feat = trace.ext_feat.as_ref().expect("ext feature cached");
            let df = dx.slice(s![.., col..col + e]).to_owned();
            col += e;
            let dz = tanh_backward(feat, &df);
            let block = trace.obs.slice(s![.., PROPRIO_DIM..PROPRIO_DIM + PER_OTHER_DIM]);
            grads[ext].dw = dz.t().dot(&block);
            grads[ext].db = dz.sum_axis(Axis(0));
            d_obs
                .slice_mut(s![.., PROPRIO_DIM..PROPRIO_DIM + PER_OTHER_DIM])
                .assign(&dz.dot(&self.layers[ext].w));
        }

        if let Some(opp) = opp_idx {
            let (f1, f2) = trace.opp_feats.as_ref().expect("opponent features cached");
            let dmin = dx.slice(s![.., col..col + e]);
            let dmax = dx.slice(s![.., col + e..col + 2 * e]);
            col += 2 * e;

            // Route pooled gradients to the argmin/argmax feature (ties to
            // the first block), then backprop both applications through the
            // shared encoder, accumulating its gradient.
            let mut df1 = Array2::zeros(f1.dim());
            let mut df2 = Array2::zeros(f2.dim());
            for ((i, j), d) in dmin.indexed_iter() {
                if f1[[i, j]] <= f2[[i, j]] {
                    df1[[i, j]] += d;
                } else {
                    df2[[i, j]] += d;
                }
            }
            for ((i, j), d) in dmax.indexed_iter() {
                if f1[[i, j]] >= f2[[i, j]] {
                    df1[[i, j]] += d;
                } else {
                    df2[[i, j]] += d;
                }
            }

            let shared = &self.layers[opp];
            let b1 = trace.obs.slice(s![.., PROPRIO_DIM + PER_OTHER_DIM..PROPRIO_DIM + 2 * PER_OTHER_DIM]);
            let b2 = trace.obs.slice(s![.., PROPRIO_DIM + 2 * PER_OTHER_DIM..PROPRIO_DIM + 3 * PER_OTHER_DIM]);
            let dz1 = tanh_backward(f1, &df1);
            let dz2 = tanh_backward(f2, &df2);
            grads[opp].dw = dz1.t().dot(&b1) + dz2.t().dot(&b2);
            grads[opp].db = dz1.sum_axis(Axis(0)) + dz2.sum_axis(Axis(0));
            d_obs
                .slice_mut(s![.., PROPRIO_DIM + PER_OTHER_DIM..PROPRIO_DIM + 2 * PER_OTHER_DIM])
                .assign(&dz1.dot(&shared.w));
            d_obs
                .slice_mut(s![.., PROPRIO_DIM + 2 * PER_OTHER_DIM..PROPRIO_DIM + 3 * PER_OTHER_DIM])
                .assign(&dz2.dot(&shared.w));
        }

        let d_action = if self.arch.head == HeadKind::Critic {
            Some(dx.slice(s![.., col..col + self.arch.action_dim]).to_owned())
        } else {
            None
        };

        Ok((Gradients { layers: grads }, d_obs, d_action))
    }

    /// Single-sample forward.
    pub fn forward_one(&self, obs: &[f64], action: Option<&[f64]>) -> Result<Vec<f64>> {
        let obs = Array2::from_shape_vec((1, obs.len()), obs.to_vec())
            .map_err(|e| Error::Contract(e.to_string()))?;
        let act_arr = action
            .map(|a| Array2::from_shape_vec((1, a.len()), a.to_vec()))
            .transpose()
            .map_err(|e| Error::Contract(e.to_string()))?;
        let out = self.forward(&obs, act_arr.as_ref())?;
        Ok(out.row(0).to_vec())
    }

    pub fn all_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.w.iter().all(|v| v.is_finite()) && l.b.iter().all(|v| v.is_finite()))
    }
}
