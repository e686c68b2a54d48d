use alloc::vec;
use alloc::vec::Vec;

use super::ParamStore;
use crate::error::{Error, Result};
#[allow(unused_imports)]
use num_traits::Float;

/// Step-decay learning rate: `initial · factor^⌊epoch / interval⌋`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LrSchedule {
    pub initial: f64,
    pub factor: f64,
    pub interval_epochs: usize,
    pub iterations_per_epoch: usize,
}

impl LrSchedule {
    pub fn constant(lr: f64) -> Self {
        LrSchedule { initial: lr, factor: 1.0, interval_epochs: 1, iterations_per_epoch: usize::MAX }
    }

    pub fn at(&self, step: usize) -> f64 {
        let epoch = step / self.iterations_per_epoch.max(1);
        let decays = epoch / self.interval_epochs.max(1);
        self.initial * self.factor.powi(decays as i32)
    }
}

/// Plain SGD with optional momentum and L2 weight decay.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimState {
    pub schedule: LrSchedule,
    pub weight_decay: f64,
    pub momentum: f64,
    pub step: usize,
    velocity: Vec<Vec<f32>>,
}

impl OptimState {
    pub fn new(schedule: LrSchedule, weight_decay: f64, momentum: f64) -> Result<Self> {
        if !(schedule.initial > 0.0) {
            return Err(Error::InvalidConfig("learning rate must be positive".into()));
        }
        if !(0.0..1.0).contains(&momentum) {
            return Err(Error::InvalidConfig("momentum must lie in [0, 1)".into()));
        }
        Ok(OptimState { schedule, weight_decay, momentum, step: 0, velocity: Vec::new() })
    }

    pub fn learning_rate(&self) -> f64 {
        self.schedule.at(self.step)
    }

    /// `θ ← θ − lr·(∂ℓ/∂θ + wd·θ)` (through the momentum buffer when enabled),
    /// then clears the accumulated gradients.
    pub fn sgd_step(&mut self, params: &mut ParamStore<f32>) -> Result<()> {
        if !params.has_accumulated() {
            return Err(Error::NoGradient);
        }
        let lr = self.learning_rate() as f32;
        let wd = self.weight_decay as f32;
        let mu = self.momentum as f32;
        let (values, grads) = params.parts_mut();
        if self.velocity.len() != values.len() {
            self.velocity = values.iter().map(|v| vec![0.0; v.numel()]).collect();
        }
        for ((value, grad), vel) in values.iter_mut().zip(grads).zip(&mut self.velocity) {
            for ((theta, &g), v) in value.data_mut().iter_mut().zip(grad).zip(vel.iter_mut()) {
                let step = g + wd * *theta;
                if mu > 0.0 {
                    *v = mu * *v + step;
                    *theta -= lr * *v;
                } else {
                    *theta -= lr * step;
                }
            }
        }
        params.zero_grad();
        self.step += 1;
        Ok(())
    }
}
