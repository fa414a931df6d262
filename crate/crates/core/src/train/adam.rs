use alloc::vec;
use alloc::vec::Vec;

use num_traits::Float;

use crate::error::{bail, Result};
use crate::nn::{Module, ParamKind};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamConfig {
    pub fn new(learning_rate: f64, beta1: f64, beta2: f64) -> Self {
        Self { learning_rate, beta1, beta2, eps: 1e-8 }
    }
}

/// Moment estimates for one parameter tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<T> {
    pub step: u64,
    pub m: Vec<T>,
    pub v: Vec<T>,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(len: usize) -> Self {
        Self { step: 0, m: vec![T::zero(); len], v: vec![T::zero(); len] }
    }
}

fn update<T: Scalar>(params: &mut [T], grads: &[T], m: &mut [T], v: &mut [T], step: u64, cfg: &AdamConfig) {
    let (b1, b2) = (T::from_f64(cfg.beta1), T::from_f64(cfg.beta2));
    let (c1, c2) = (T::one() - b1, T::one() - b2);
    let t = step as i32;
    let lr_t = T::from_f64(cfg.learning_rate / (1.0 - Float::powi(cfg.beta1, t)));
    let v_scale = T::from_f64(1.0 / Float::sqrt(1.0 - Float::powi(cfg.beta2, t)));
    let eps = T::from_f64(cfg.eps);
    for (((p, &g), m), v) in params.iter_mut().zip(grads).zip(m.iter_mut()).zip(v.iter_mut()) {
        *m = b1 * *m + c1 * g;
        *v = b2 * *v + c2 * g * g;
        *p = *p - lr_t * *m / (v.sqrt() * v_scale + eps);
    }
}

/// One bias-corrected Adam update of a single tensor.
pub fn adam_step<T: Scalar>(params: &mut [T], grads: &[T], state: &mut AdamState<T>, cfg: &AdamConfig) -> Result<()> {
    if params.len() != grads.len() || state.m.len() != params.len() {
        bail!(Validation, "adam: {} params, {} grads, {} moments", params.len(), grads.len(), state.m.len());
    }
    if grads.iter().any(|g| !g.is_finite()) {
        bail!(Numeric, "non-finite gradient; step aborted");
    }
    state.step += 1;
    update(params, grads, &mut state.m, &mut state.v, state.step, cfg);
    Ok(())
}

/// Adam over every trainable parameter of a module, visited in a fixed order.
#[derive(Debug, Clone)]
pub struct Adam<T> {
    pub config: AdamConfig,
    step: u64,
    moments: Vec<(Vec<T>, Vec<T>)>,
}

impl<T: Scalar> Adam<T> {
    pub fn new(config: AdamConfig) -> Self {
        Self { config, step: 0, moments: Vec::new() }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    pub fn step<M: Module<T> + ?Sized>(&mut self, module: &mut M) -> Result<()> {
        let mut bad = None;
        module.visit("", &mut |name, p| {
            if bad.is_none() && p.kind() == ParamKind::Trainable && p.grad.iter().any(|g| !g.is_finite()) {
                bad = Some(alloc::string::String::from(name));
            }
        });
        if let Some(name) = bad {
            bail!(Numeric, "non-finite gradient in `{name}`; step aborted");
        }
        self.step += 1;
        let (step, cfg) = (self.step, self.config);
        let mut slot = 0;
        let moments = &mut self.moments;
        module.visit_mut("", &mut |_, p| {
            if p.kind() != ParamKind::Trainable {
                return;
            }
            if moments.len() == slot {
                moments.push((vec![T::zero(); p.numel()], vec![T::zero(); p.numel()]));
            }
            let (m, v) = &mut moments[slot];
            update(&mut p.value, &p.grad, m, v, step, &cfg);
            slot += 1;
        });
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_params() {
        let cfg = AdamConfig::new(5e-4, 0.99, 0.99);
        let mut p = [1.0f64, -2.0];
        let mut s = AdamState::new(2);
        adam_step(&mut p, &[0.0, 0.0], &mut s, &cfg).unwrap();
        assert_eq!(p, [1.0, -2.0]);
        assert_eq!(s.step, 1);
    }

    #[test]
    fn first_step_moves_by_lr_times_sign() {
        let cfg = AdamConfig::new(5e-4, 0.99, 0.99);
        let mut p = [0.0f64, 0.0, 0.0];
        let mut s = AdamState::new(3);
        adam_step(&mut p, &[3.0, -0.2, 40.0], &mut s, &cfg).unwrap();
        for (v, sign) in p.iter().zip([-1.0, 1.0, -1.0]) {
            assert!((v - sign * 5e-4).abs() < 1e-9, "{v}");
        }
    }

    #[test]
    fn rejects_non_finite() {
        let cfg = AdamConfig::new(1e-3, 0.9, 0.999);
        let mut p = [1.0f32];
        let mut s = AdamState::new(1);
        assert!(matches!(adam_step(&mut p, &[f32::NAN], &mut s, &cfg), Err(crate::Error::Numeric(_))));
        assert_eq!((p[0], s.step), (1.0, 0));
    }
}
