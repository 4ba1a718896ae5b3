use serde::{Deserialize, Serialize};

use super::nn::ModelParams;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Bias-corrected Adam.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Adam {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for Adam {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl Adam {
    /// Apply one update in place, advance the moments and clear gradients.
    pub fn step<T: Scalar>(&self, params: &mut ModelParams<T>, lr: f64) -> Result<()> {
        if let Some(p) = params.iter().find(|p| p.grad.is_none()) {
            return Err(Error::Contract(format!("parameter {} has no gradient", p.name)));
        }
        params.step += 1;
        let t = params.step as i32;
        let (b1, b2) = (T::lit(self.beta1), T::lit(self.beta2));
        let (one, eps, lr) = (T::one(), T::lit(self.eps), T::lit(lr));
        let c1 = one - b1.powi(t);
        let c2 = one - b2.powi(t);
        for p in params.iter_mut() {
            let g = p.grad.take().expect("checked above");
            let values = p.value.data_mut();
            let m = p.m.data_mut();
            let v = p.v.data_mut();
            for i in 0..values.len() {
                let gi = g.data()[i];
                m[i] = b1 * m[i] + (one - b1) * gi;
                v[i] = b2 * v[i] + (one - b2) * gi * gi;
                let m_hat = m[i] / c1;
                let v_hat = v[i] / c2;
                values[i] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}

/// Step decay: `initial_lr * gamma^floor(step / step_size)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LrSchedule {
    pub initial_lr: f64,
    pub step_size: usize,
    pub gamma: f64,
}

impl Default for LrSchedule {
    fn default() -> Self {
        Self {
            initial_lr: 0.01,
            step_size: 50,
            gamma: 0.1,
        }
    }
}

/// Training halts once the scheduled rate drops below this value.
pub const MIN_LR: f64 = 1e-5;

// Relative slack on MIN_LR so that a rate that is 1e-5 up to rounding
// (e.g. 0.01 * 0.1^3) is not treated as "below".
const MIN_LR_SLACK: f64 = 1e-9;

impl LrSchedule {
    pub fn validate(&self) -> Result<()> {
        if !(self.initial_lr > 0.0 && self.initial_lr.is_finite()) {
            return Err(Error::Config(format!("initial lr must be positive, got {}", self.initial_lr)));
        }
        if self.step_size == 0 {
            return Err(Error::Config("lr step size must be at least 1".into()));
        }
        // gamma = 1 is accepted as "constant rate".
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::Config(format!("lr gamma must be in (0, 1], got {}", self.gamma)));
        }
        Ok(())
    }

    pub fn lr_at(&self, step: usize) -> f64 {
        scheduled_lr(self, step)
    }

    /// First step whose rate is below [`MIN_LR`], if the rate ever gets there.
    pub fn halt_step(&self) -> Option<usize> {
        if self.gamma >= 1.0 {
            return (self.initial_lr < MIN_LR * (1.0 - MIN_LR_SLACK)).then_some(0);
        }
        (0..64).map(|k| k * self.step_size).find(|&s| below_min_lr(self.lr_at(s)))
    }
}

pub fn below_min_lr(lr: f64) -> bool {
    lr < MIN_LR * (1.0 - MIN_LR_SLACK)
}

pub fn scheduled_lr(schedule: &LrSchedule, step: usize) -> f64 {
    let k = (step / schedule.step_size) as i32;
    schedule.initial_lr * schedule.gamma.powi(k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::tensor::Tensor;
    use approx::assert_relative_eq;

    fn one_param(value: f64) -> ModelParams<f64> {
        let mut p = ModelParams::new();
        p.add("w", Tensor::scalar(value));
        p
    }

    fn set_grad(p: &mut ModelParams<f64>, g: f64) {
        p.iter_mut().for_each(|x| x.grad = Some(Tensor::scalar(g)));
    }

    #[test]
    fn first_step_moves_by_lr() {
        let mut p = one_param(1.0);
        set_grad(&mut p, 3.7);
        Adam::default().step(&mut p, 0.01).unwrap();
        let w = p.by_name("w").unwrap().value.item();
        assert_relative_eq!(1.0 - w, 0.01, max_relative = 1e-6);
        assert!(p.by_name("w").unwrap().grad.is_none());
    }

    #[test]
    fn zero_gradient_leaves_params() {
        let mut p = one_param(0.3);
        set_grad(&mut p, 0.0);
        Adam::default().step(&mut p, 0.01).unwrap();
        assert_eq!(p.by_name("w").unwrap().value.item(), 0.3);
    }

    #[test]
    fn missing_gradient_is_contract_error() {
        let mut p = one_param(0.3);
        assert!(matches!(Adam::default().step(&mut p, 0.01), Err(Error::Contract(_))));
    }

    #[test]
    fn matches_scalar_reference() {
        // Straight-line scalar Adam.
        let (b1, b2, eps, lr) = (0.9f64, 0.999f64, 1e-8f64, 0.1f64);
        let (mut w, mut m, mut v) = (0.0f64, 0.0f64, 0.0f64);
        let mut expected = Vec::new();
        for t in 1..=2 {
            let g = 1.0;
            m = b1 * m + (1.0 - b1) * g;
            v = b2 * v + (1.0 - b2) * g * g;
            let mh = m / (1.0 - b1.powi(t));
            let vh = v / (1.0 - b2.powi(t));
            w -= lr * mh / (vh.sqrt() + eps);
            expected.push(w);
        }
        let mut p = one_param(0.0);
        for e in expected {
            set_grad(&mut p, 1.0);
            Adam::default().step(&mut p, lr).unwrap();
            assert!((p.by_name("w").unwrap().value.item() - e).abs() < 1e-12);
        }
    }

    #[test]
    fn schedule_closed_form() {
        let s = LrSchedule::default();
        assert_eq!(s.lr_at(0), 0.01);
        assert_relative_eq!(s.lr_at(50), 1e-3, max_relative = 1e-12);
        assert_relative_eq!(s.lr_at(149), 1e-4, max_relative = 1e-12);
        assert_relative_eq!(s.lr_at(150), 1e-5, max_relative = 1e-12);
        assert!(!below_min_lr(s.lr_at(150)));
        assert!(below_min_lr(s.lr_at(200)));
        assert_eq!(s.halt_step(), Some(200));
    }

    #[test]
    fn constant_schedule() {
        let s = LrSchedule {
            gamma: 1.0,
            ..LrSchedule::default()
        };
        assert!((0..500).all(|k| s.lr_at(k) == 0.01));
        assert_eq!(s.halt_step(), None);
    }

    #[test]
    fn schedule_validation() {
        let bad = LrSchedule {
            step_size: 0,
            ..LrSchedule::default()
        };
        assert!(bad.validate().is_err());
        assert!(LrSchedule::default().validate().is_ok());
    }
}
