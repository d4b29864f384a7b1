//! Adam with decoupled weight decay, over named parameter groups.

use crate::autodiff::{ParamId, ParamStore};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct ParamGroup {
    pub name: String,
    pub ids: Vec<ParamId>,
    pub lr: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamWConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for AdamWConfig {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.98,
            eps: 1e-8,
            weight_decay: 0.01,
        }
    }
}

#[derive(Clone, Debug)]
struct Moments {
    m: Vec<f64>,
    v: Vec<f64>,
}

/// Decay is applied to the parameter before the adaptive step and does not
/// pass through the moment estimates. A parameter without a gradient is
/// treated as having a zero gradient, so it still decays.
#[derive(Clone, Debug)]
pub struct AdamW {
    config: AdamWConfig,
    groups: Vec<ParamGroup>,
    moments: Vec<Option<Moments>>,
    step: u64,
}

impl AdamW {
    pub fn new(config: AdamWConfig, groups: Vec<ParamGroup>, store: &ParamStore) -> Result<Self> {
        let mut seen = vec![false; store.len()];
        for g in &groups {
            if !(g.lr > 0.0 && g.lr.is_finite()) {
                return Err(Error::Argument(format!(
                    "group {} has non-positive learning rate {}",
                    g.name, g.lr
                )));
            }
            for id in &g.ids {
                if std::mem::replace(&mut seen[id.index()], true) {
                    let name = &store.get(*id).name;
                    return Err(Error::Argument(format!("parameter {name} is in two groups")));
                }
            }
        }
        Ok(Self {
            config,
            groups,
            moments: vec![None; store.len()],
            step: 0,
        })
    }

    pub fn groups(&self) -> &[ParamGroup] {
        &self.groups
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    pub fn step(&mut self, store: &mut ParamStore) {
        self.step += 1;
        let c = self.config;
        let t = self.step as i32;
        let bc1 = 1.0 - c.beta1.powi(t);
        let bc2 = 1.0 - c.beta2.powi(t);
        for group in &self.groups {
            for &id in &group.ids {
                let p = store.get_mut(id);
                if !p.requires_grad {
                    continue;
                }
                let n = p.value.len();
                let mom = self.moments[id.index()].get_or_insert_with(|| Moments {
                    m: vec![0.0; n],
                    v: vec![0.0; n],
                });
                let decay = 1.0 - group.lr * c.weight_decay;
                let grad = p.grad.as_deref();
                let values = p.value.data_mut();
                for i in 0..n {
                    let g = grad.map_or(0.0, |g| g[i]);
                    mom.m[i] = c.beta1 * mom.m[i] + (1.0 - c.beta1) * g;
                    mom.v[i] = c.beta2 * mom.v[i] + (1.0 - c.beta2) * g * g;
                    let m_hat = mom.m[i] / bc1;
                    let v_hat = mom.v[i] / bc2;
                    values[i] = values[i] * decay - group.lr * m_hat / (v_hat.sqrt() + c.eps);
                }
            }
        }
    }
}

/// Scales gradients in place so their global L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
pub fn clip_grad_norm(store: &mut ParamStore, max_norm: f64) -> f64 {
    let norm = store
        .iter()
        .filter_map(|(_, p)| p.grad.as_ref())
        .flat_map(|g| g.iter())
        .map(|g| g * g)
        .sum::<f64>()
        .sqrt();
    if norm > max_norm {
        let scale = max_norm / (norm + 1e-6);
        for p in store.iter_mut() {
            if let Some(g) = &mut p.grad {
                g.iter_mut().for_each(|x| *x *= scale);
            }
        }
    }
    norm
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::Tensor;

    fn store() -> (ParamStore, ParamId, ParamId) {
        let mut s = ParamStore::new();
        let a = s.add("a", Tensor::vector(vec![1.0, -2.0]).unwrap());
        let b = s.add("b", Tensor::vector(vec![3.0]).unwrap());
        (s, a, b)
    }

    #[test]
    fn zero_gradient_still_decays() {
        let (mut s, a, b) = store();
        let groups = vec![ParamGroup {
            name: "all".into(),
            ids: vec![a, b],
            lr: 0.1,
        }];
        let mut opt = AdamW::new(AdamWConfig::default(), groups, &s).unwrap();
        s.get_mut(a).grad = Some(vec![0.0, 0.0]);
        opt.step(&mut s);
        assert_eq!(s.get(a).value.data(), &[1.0 * (1.0 - 0.001), -2.0 * (1.0 - 0.001)]);
        assert_eq!(s.get(b).value.data(), &[3.0 * (1.0 - 0.001)]);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let (mut s, a, _) = store();
        let cfg = AdamWConfig {
            weight_decay: 0.0,
            ..Default::default()
        };
        let groups = vec![ParamGroup {
            name: "a".into(),
            ids: vec![a],
            lr: 0.01,
        }];
        let mut opt = AdamW::new(cfg, groups, &s).unwrap();
        s.get_mut(a).grad = Some(vec![5.0, -0.5]);
        opt.step(&mut s);
        let v = s.get(a).value.data();
        assert!((v[0] - 0.99).abs() < 1e-9);
        assert!((v[1] + 1.99).abs() < 1e-9);
    }

    #[test]
    fn ungrouped_and_frozen_params_are_untouched() {
        let (mut s, a, b) = store();
        s.set_requires_grad(a, false);
        let groups = vec![ParamGroup {
            name: "a".into(),
            ids: vec![a],
            lr: 0.1,
        }];
        let mut opt = AdamW::new(AdamWConfig::default(), groups, &s).unwrap();
        s.get_mut(b).grad = Some(vec![1.0]);
        opt.step(&mut s);
        assert_eq!(s.get(a).value.data(), &[1.0, -2.0]);
        assert_eq!(s.get(b).value.data(), &[3.0]);
    }

    #[test]
    fn overlapping_groups_are_rejected() {
        let (s, a, _) = store();
        let g = |name: &str| ParamGroup {
            name: name.into(),
            ids: vec![a],
            lr: 0.1,
        };
        assert!(AdamW::new(AdamWConfig::default(), vec![g("x"), g("y")], &s).is_err());
    }

    #[test]
    fn clipping_bounds_the_global_norm() {
        let (mut s, a, b) = store();
        s.get_mut(a).grad = Some(vec![3.0, 0.0]);
        s.get_mut(b).grad = Some(vec![4.0]);
        let before = clip_grad_norm(&mut s, 1.0);
        assert_eq!(before, 5.0);
        let after = clip_grad_norm(&mut s, 1.0);
        assert!(after <= 1.0 && after > 0.999);
    }
}
