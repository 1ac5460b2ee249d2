//! Diffusion schedule algebra with the v target `sqrt(1 - a) x0 - sqrt(a) eps`.

use serde::{Deserialize, Serialize};

use super::{ConditioningError, LatentTensor, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleParams {
    pub betas: Vec<f64>,
}

impl Default for ScheduleParams {
    fn default() -> Self {
        Self::linear(1000, 1e-4, 0.02).expect("default schedule is valid")
    }
}

impl ScheduleParams {
    pub fn new(betas: Vec<f64>) -> Result<Self> {
        let p = Self { betas };
        p.validate()?;
        Ok(p)
    }

    /// `steps` betas evenly spaced from `start` to `end` inclusive.
    pub fn linear(steps: usize, start: f64, end: f64) -> Result<Self> {
        if steps == 0 {
            return Err(ConditioningError::Schedule("need at least one step".into()));
        }
        let betas = if steps == 1 {
            vec![start]
        } else {
            (0..steps)
                .map(|i| start + (end - start) * i as f64 / (steps - 1) as f64)
                .collect()
        };
        Self::new(betas)
    }

    pub fn validate(&self) -> Result<()> {
        if self.betas.is_empty() {
            return Err(ConditioningError::Schedule("need at least one step".into()));
        }
        if let Some((i, b)) = self.betas.iter().enumerate().find(|(_, b)| !(**b > 0.0 && **b < 1.0)) {
            return Err(ConditioningError::Schedule(format!("beta_{} = {b} is outside (0, 1)", i + 1)));
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        self.betas.len()
    }

    /// Cumulative product of `1 - beta_i` for `i` in `1..=t`.
    pub fn alpha_bar(&self, t: usize) -> Result<f64> {
        if t == 0 || t > self.betas.len() {
            return Err(ConditioningError::StepOutOfRange {
                t,
                steps: self.betas.len(),
            });
        }
        Ok(self.betas[..t].iter().map(|b| 1.0 - b).product())
    }
}

pub fn noisy_latent(x0: &LatentTensor, eps: &LatentTensor, params: &ScheduleParams, t: usize) -> Result<LatentTensor> {
    let a = params.alpha_bar(t)?;
    let (sa, sb) = (a.sqrt(), (1.0 - a).sqrt());
    x0.zip_map(eps, "x0 and eps", |x, e| sa * x + sb * e)
}

pub fn v_target(x0: &LatentTensor, eps: &LatentTensor, params: &ScheduleParams, t: usize) -> Result<LatentTensor> {
    let a = params.alpha_bar(t)?;
    let (sa, sb) = (a.sqrt(), (1.0 - a).sqrt());
    x0.zip_map(eps, "x0 and eps", |x, e| sb * x - sa * e)
}

/// `x0 = sqrt(a) x_t + sqrt(1 - a) v`.
pub fn recover_x0(xt: &LatentTensor, v: &LatentTensor, params: &ScheduleParams, t: usize) -> Result<LatentTensor> {
    let a = params.alpha_bar(t)?;
    let (sa, sb) = (a.sqrt(), (1.0 - a).sqrt());
    xt.zip_map(v, "x_t and v", |x, v| sa * x + sb * v)
}

/// `eps = sqrt(1 - a) x_t - sqrt(a) v`.
pub fn recover_eps(xt: &LatentTensor, v: &LatentTensor, params: &ScheduleParams, t: usize) -> Result<LatentTensor> {
    let a = params.alpha_bar(t)?;
    let (sa, sb) = (a.sqrt(), (1.0 - a).sqrt());
    xt.zip_map(v, "x_t and v", |x, v| sb * x - sa * v)
}
