use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::tape::Gradients;
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First/second moment estimates for a list of parameter tensors.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    step: u64,
    first: Vec<Tensor>,
    second: Vec<Tensor>,
}

impl AdamState {
    pub fn new<'a>(shapes: impl IntoIterator<Item = &'a [usize]>, config: AdamConfig) -> Self {
        let (first, second) = shapes.into_iter().map(|s| (Tensor::zeros(s), Tensor::zeros(s))).unzip();
        AdamState {
            config,
            step: 0,
            first,
            second,
        }
    }

    pub fn for_params(params: &ModelParams) -> Self {
        Self::new(params.tensors().iter().map(|(_, t)| t.shape()), AdamConfig::default())
    }

    /// Restore a saved state; moment tensors must pair up one-to-one.
    pub fn from_parts(config: AdamConfig, step: u64, first: Vec<Tensor>, second: Vec<Tensor>) -> Result<Self> {
        if first.len() != second.len() || first.iter().zip(&second).any(|(a, b)| a.shape() != b.shape()) {
            return Err(Error::InvalidArgument("first and second moments do not pair up".into()));
        }
        Ok(AdamState {
            config,
            step,
            first,
            second,
        })
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn first_moments(&self) -> &[Tensor] {
        &self.first
    }

    pub fn second_moments(&self) -> &[Tensor] {
        &self.second
    }

    /// Advance the step counter and return the bias-corrected step size factors.
    fn begin_step(&mut self) -> (f64, f64) {
        self.step += 1;
        let t = self.step as i32;
        (1.0 - self.config.beta1.powi(t), 1.0 - self.config.beta2.powi(t))
    }

    fn update_slot(&mut self, slot: usize, param: &mut [f32], grad: Option<&[f32]>, lr: f64, corr: (f64, f64)) {
        let AdamConfig { beta1, beta2, eps } = self.config;
        let m = self.first[slot].data_mut();
        let v = self.second[slot].data_mut();
        for i in 0..param.len() {
            let g = grad.map_or(0.0, |g| g[i] as f64);
            let mi = beta1 * m[i] as f64 + (1.0 - beta1) * g;
            let vi = beta2 * v[i] as f64 + (1.0 - beta2) * g * g;
            m[i] = mi as f32;
            v[i] = vi as f32;
            let m_hat = mi / corr.0;
            let v_hat = vi / corr.1;
            param[i] -= (lr * m_hat / (v_hat.sqrt() + eps)) as f32;
        }
    }

    /// One bias-corrected update over raw parameter/gradient slices, in slot order.
    pub fn step_slices(&mut self, params: &mut [&mut [f32]], grads: &[&[f32]], lr: f64) -> Result<()> {
        if params.len() != self.first.len() || grads.len() != params.len() {
            return Err(Error::InvalidArgument(format!(
                "optimizer tracks {} tensors but received {} parameters and {} gradients",
                self.first.len(),
                params.len(),
                grads.len()
            )));
        }
        for (slot, (p, g)) in params.iter().zip(grads).enumerate() {
            if p.len() != self.first[slot].len() || g.len() != p.len() {
                return Err(Error::dim("adam", format!("slot {slot} length mismatch")));
            }
            if g.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFiniteGradient {
                    param: format!("slot {slot}"),
                });
            }
        }
        let corr = self.begin_step();
        for (slot, (p, g)) in params.iter_mut().zip(grads).enumerate() {
            self.update_slot(slot, p, Some(g), lr, corr);
        }
        Ok(())
    }
}

/// Apply one Adam update to every model parameter.
///
/// Nothing is modified if any gradient is non-finite or mis-shaped; a
/// parameter without a gradient is updated as if its gradient were zero.
pub fn adam_step(params: &mut ModelParams, grads: &Gradients, state: &mut AdamState, lr: f64) -> Result<()> {
    if state.first.len() != params.len() {
        return Err(Error::InvalidArgument(format!(
            "optimizer tracks {} tensors, model has {}",
            state.first.len(),
            params.len()
        )));
    }
    for (id, g) in grads.iter() {
        if id >= params.len() {
            return Err(Error::InvalidArgument(format!("gradient for unknown parameter id {id}")));
        }
        if g.shape() != params.get(id).shape() {
            return Err(Error::dim(
                "adam",
                format!(
                    "gradient {:?} does not match parameter `{}` {:?}",
                    g.shape(),
                    params.name(id),
                    params.get(id).shape()
                ),
            ));
        }
        if !g.all_finite() {
            return Err(Error::NonFiniteGradient {
                param: params.name(id).to_string(),
            });
        }
    }
    let corr = state.begin_step();
    for id in 0..params.len() {
        let g = grads.get(id).map(Tensor::data);
        state.update_slot(id, params.get_mut(id).data_mut(), g, lr, corr);
    }
    Ok(())
}
