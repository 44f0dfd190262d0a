//! Adam optimizer with bias correction, and Polyak target averaging.

use super::{Gradients, Mlp};
use ndarray::{Array1, Array2};

struct Moments {
    m_w: Array2<f64>,
    v_w: Array2<f64>,
    m_b: Array1<f64>,
    v_b: Array1<f64>,
}

pub struct AdamState {
    moments: Vec<Moments>,
    pub step: u64,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(params: &Mlp, lr: f64) -> Self {
        let moments = params
            .layers
            .iter()
            .map(|l| Moments {
                m_w: Array2::zeros(l.w.dim()),
                v_w: Array2::zeros(l.w.dim()),
                m_b: Array1::zeros(l.b.len()),
                v_b: Array1::zeros(l.b.len()),
            })
            .collect();
        Self { moments, step: 0, lr, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// One Adam update in place.
pub fn adam_step(params: &mut Mlp, grads: &Gradients, state: &mut AdamState) {
    state.step += 1;
    let t = state.step as i32;
    let bc1 = 1.0 - state.beta1.powi(t);
    let bc2 = 1.0 - state.beta2.powi(t);
    let (b1, b2, lr, eps) = (state.beta1, state.beta2, state.lr, state.eps);

    for ((layer, grad), mom) in params.layers.iter_mut().zip(&grads.layers).zip(&mut state.moments)
    {
        ndarray::Zip::from(&mut layer.w)
            .and(&grad.dw)
            .and(&mut mom.m_w)
            .and(&mut mom.v_w)
            .for_each(|p, &g, m, v| {
                *m = b1 * *m + (1.0 - b1) * g;
                *v = b2 * *v + (1.0 - b2) * g * g;
                *p -= lr * (*m / bc1) / ((*v / bc2).sqrt() + eps);
            });
        ndarray::Zip::from(&mut layer.b)
            .and(&grad.db)
            .and(&mut mom.m_b)
            .and(&mut mom.v_b)
            .for_each(|p, &g, m, v| {
                *m = b1 * *m + (1.0 - b1) * g;
                *v = b2 * *v + (1.0 - b2) * g * g;
                *p -= lr * (*m / bc1) / ((*v / bc2).sqrt() + eps);
            });
    }
}

/// Polyak averaging: `target ← τ·online + (1 − τ)·target`, element-wise.
pub fn soft_update(target: &mut Mlp, online: &Mlp, tau: f64) {
    for (t, o) in target.layers.iter_mut().zip(&online.layers) {
        ndarray::Zip::from(&mut t.w).and(&o.w).for_each(|t, &o| *t = tau * o + (1.0 - tau) * *t);
        ndarray::Zip::from(&mut t.b).and(&o.b).for_each(|t, &o| *t = tau * o + (1.0 - tau) * *t);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curriculum::StageId;
    use crate::net::{ArchSpec, LinearGrad};

    fn tiny_net(seed: u64) -> Mlp {
        Mlp::init(ArchSpec::actor(StageId::S1_1v0), seed).unwrap()
    }

    fn grads_like(net: &Mlp, fill: f64) -> Gradients {
        Gradients {
            layers: net
                .layers
                .iter()
                .map(|l| LinearGrad {
                    dw: Array2::from_elem(l.w.dim(), fill),
                    db: Array1::from_elem(l.b.len(), fill),
                })
                .collect(),
        }
    }

    #[test]
    fn zero_gradient_leaves_params_unchanged() {
        let mut net = tiny_net(1);
        let before = net.clone();
        let mut state = AdamState::new(&net, 1e-3);
        let grads = grads_like(&net, 0.0);
        adam_step(&mut net, &grads, &mut state);
        assert_eq!(net, before);
    }

    #[test]
    fn first_step_moves_by_lr() {
        // Single step with g = 1 everywhere: m̂ = 1, v̂ = 1 → Δ = −lr/(1+ε).
        let mut net = tiny_net(2);
        let before = net.clone();
        let mut state = AdamState::new(&net, 1e-3);
        let grads = grads_like(&net, 1.0);
        adam_step(&mut net, &grads, &mut state);
        let delta = net.layers[0].w[[0, 0]] - before.layers[0].w[[0, 0]];
        assert!((delta + 1e-3).abs() < 1e-9, "delta {delta}");
    }

    #[test]
    fn constant_gradient_step_size_approaches_lr() {
        let mut net = tiny_net(3);
        let mut state = AdamState::new(&net, 1e-3);
        let g = grads_like(&net, 0.37);
        let mut prev = net.layers[0].w[[0, 0]];
        let mut last_delta = 0.0;
        for _ in 0..500 {
            adam_step(&mut net, &g, &mut state);
            last_delta = net.layers[0].w[[0, 0]] - prev;
            prev = net.layers[0].w[[0, 0]];
        }
        assert!((last_delta.abs() - 1e-3).abs() < 1e-6, "|Δ| = {}", last_delta.abs());
    }

    #[test]
    fn soft_update_endpoints_and_midpoint() {
        let online = tiny_net(4);
        let base = tiny_net(5);

        let mut t = base.clone();
        soft_update(&mut t, &online, 1.0);
        assert_eq!(t, online);

        let mut t = base.clone();
        soft_update(&mut t, &online, 0.0);
        assert_eq!(t, base);

        let mut zeros = Mlp::zeros(ArchSpec::actor(StageId::S1_1v0)).unwrap();
        let mut twos = Mlp::zeros(ArchSpec::actor(StageId::S1_1v0)).unwrap();
        for l in &mut twos.layers {
            l.w.fill(2.0);
            l.b.fill(2.0);
        }
        soft_update(&mut zeros, &twos, 0.5);
        assert!(zeros.layers.iter().all(|l| l.w.iter().all(|&v| v == 1.0)));
    }

    #[test]
    fn soft_update_contracts_toward_online() {
        let online = tiny_net(6);
        let mut target = tiny_net(7);
        let dist = |a: &Mlp, b: &Mlp| -> f64 {
            a.layers
                .iter()
                .zip(&b.layers)
                .map(|(x, y)| (&x.w - &y.w).mapv(f64::abs).sum() + (&x.b - &y.b).mapv(f64::abs).sum())
                .sum()
        };
        let mut d = dist(&target, &online);
        for _ in 0..20 {
            soft_update(&mut target, &online, 0.3);
            let nd = dist(&target, &online);
            assert!(nd < d);
            d = nd;
        }
    }
}
