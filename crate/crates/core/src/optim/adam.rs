use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::neural::ModelState;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub step: u64,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon_hat: f64,
}

impl AdamState {
    pub fn new(n_params: usize, learning_rate: f64, beta1: f64, beta2: f64) -> Self {
        AdamState {
            step: 0,
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
            learning_rate,
            beta1,
            beta2,
            epsilon_hat: 1e-8,
        }
    }

    /// One bias-corrected update. On a non-finite gradient nothing changes
    /// and the offending index is returned.
    pub fn update(&mut self, params: &mut [f64], grads: &[f64]) -> std::result::Result<(), usize> {
        assert_eq!(params.len(), self.m.len());
        assert_eq!(grads.len(), self.m.len());
        if let Some(i) = grads.iter().position(|g| !g.is_finite()) {
            return Err(i);
        }
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        for i in 0..params.len() {
            let g = grads[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let mh = self.m[i] / c1;
            let vh = self.v[i] / c2;
            params[i] -= self.learning_rate * mh / (vh.sqrt() + self.epsilon_hat);
        }
        Ok(())
    }
}

/// ADAM step on model parameters; a non-finite gradient is reported with its
/// parameter path.
pub fn adam_step(state: &mut AdamState, params: &mut ModelState, grads: &ModelState) -> Result<()> {
    let mut flat = params.flatten();
    let g = grads.flatten();
    if g.len() != flat.len() || state.m.len() != flat.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} parameters, {} gradients, optimizer sized for {}",
            flat.len(),
            g.len(),
            state.m.len()
        )));
    }
    state
        .update(&mut flat, &g)
        .map_err(|i| Error::NonFinite(format!("gradient of {}", params.param_path(i))))?;
    params.unflatten(&flat)
}
