//! L1 loss, Adam and the step learning-rate schedule.

use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::tensor::{Scalar, Tensor};

/// Mean absolute error and its gradient `sign(pred − target) / count`
/// (with `sign(0) = 0`).
pub fn l1_loss<T: Scalar>(pred: &Tensor<T>, target: &Tensor<T>) -> Result<(T, Tensor<T>)> {
    target.expect_shape(pred.shape(), "l1_loss target")?;
    let count = T::from_usize(pred.len()).unwrap();
    let loss = pred.data().iter().zip(target.data()).map(|(&p, &t)| (p - t).abs()).sum::<T>() / count;
    let grad = pred.zip_map(target, |p, t| {
        let d = p - t;
        if d > T::zero() {
            T::one() / count
        } else if d < T::zero() {
            -T::one() / count
        } else {
            T::zero()
        }
    })?;
    Ok((loss, grad))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// First/second moment estimates mirroring the parameter tensors.
#[derive(Clone, Debug)]
pub struct AdamState {
    pub m: ModelParams<f32>,
    pub v: ModelParams<f32>,
    pub t: u64,
    pub hyper: AdamConfig,
}

impl AdamState {
    pub fn new(params: &ModelParams<f32>, hyper: AdamConfig) -> Self {
        Self { m: params.zeros_like(), v: params.zeros_like(), t: 0, hyper }
    }

    /// One bias-corrected Adam update. Fails without touching anything if a
    /// gradient is non-finite.
    pub fn step(&mut self, params: &mut ModelParams<f32>, grads: &ModelParams<f32>, lr: f64) -> Result<()> {
        if let Some(bad) = grads.tensors().into_iter().find(|g| g.data.iter().any(|v| !v.is_finite())) {
            return Err(Error::NonFinite(format!("gradient of {} at step {}", bad.name, self.t + 1)));
        }
        self.t += 1;
        let AdamConfig { beta1, beta2, eps } = self.hyper;
        let bc1 = 1.0 - beta1.powi(self.t as i32);
        let bc2 = 1.0 - beta2.powi(self.t as i32);
        let (b1, b2) = (beta1 as f32, beta2 as f32);
        for (((p, g), m), v) in params
            .tensors_mut()
            .into_iter()
            .zip(grads.tensors())
            .zip(self.m.tensors_mut())
            .zip(self.v.tensors_mut())
        {
            for i in 0..p.data.len() {
                let gi = g.data[i];
                m.data[i] = b1 * m.data[i] + (1.0 - b1) * gi;
                v.data[i] = b2 * v.data[i] + (1.0 - b2) * gi * gi;
                let m_hat = m.data[i] as f64 / bc1;
                let v_hat = v.data[i] as f64 / bc2;
                p.data[i] -= (lr * m_hat / (v_hat.sqrt() + eps)) as f32;
            }
        }
        Ok(())
    }
}

/// `lr0 · 0.5^⌊iter / halve_every⌋`.
pub fn lr_at(iter: u64, lr0: f64, halve_every: u64) -> f64 {
    lr0 * 0.5f64.powi((iter / halve_every.max(1)) as i32)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{NetworkConfig, Paths};
    use crate::tensor::Shape;

    fn row(v: &[f64]) -> Tensor<f64> {
        Tensor::from_vec(Shape::new(1, 1, 1, v.len()), v.to_vec()).unwrap()
    }

    #[test]
    fn l1_examples() {
        let a = row(&[0.3, -1.0, 2.0]);
        assert_eq!(l1_loss(&a, &a).unwrap().0, 0.0);
        assert!((l1_loss(&a.map(|v| v + 0.25), &a).unwrap().0 - 0.25).abs() < 1e-15);
        let (loss, grad) = l1_loss(&row(&[0.0, 2.0]), &row(&[1.0, 0.0])).unwrap();
        assert_eq!(loss, 1.5);
        assert_eq!(grad.data(), &[-0.5, 0.5]);
        assert_eq!(l1_loss(&row(&[1.0]), &row(&[1.0])).unwrap().1.data(), &[0.0]);
        assert!(l1_loss(&row(&[1.0]), &row(&[1.0, 2.0])).is_err());
    }

    #[test]
    fn schedule() {
        assert_eq!(lr_at(0, 1e-4, 200_000), 1e-4);
        assert_eq!(lr_at(199_999, 1e-4, 200_000), 1e-4);
        assert_eq!(lr_at(200_000, 1e-4, 200_000), 5e-5);
        assert_eq!(lr_at(400_000, 1e-4, 200_000), 2.5e-5);
    }

    fn tiny() -> ModelParams<f32> {
        ModelParams::init(&NetworkConfig::new(1, 16, 2, Paths::NONE), 1)
    }

    #[test]
    fn zero_gradient_leaves_params() {
        let mut p = tiny();
        let before = p.clone();
        let g = p.zeros_like();
        let mut s = AdamState::new(&p, AdamConfig::default());
        s.step(&mut p, &g, 1e-3).unwrap();
        assert_eq!(p, before);
        assert_eq!(s.t, 1);
    }

    #[test]
    fn first_step_is_signed_lr() {
        let mut p = tiny();
        let before = p.flatten();
        let mut g = p.zeros_like();
        let gv: Vec<f32> = (0..g.num_params()).map(|i| if i % 3 == 0 { 0.02 } else { -1.5 }).collect();
        g.assign_flat(&gv);
        let mut s = AdamState::new(&p, AdamConfig::default());
        let lr = 1e-3;
        s.step(&mut p, &g, lr).unwrap();
        for ((a, b), gi) in p.flatten().iter().zip(&before).zip(&gv) {
            let expected = -lr * *gi as f64 / (gi.abs() as f64 + 1e-8);
            assert!(((a - b) as f64 - expected).abs() < 1e-6, "{} vs {expected}", a - b);
        }
        // Second identical step moves no further than the first.
        let mid = p.flatten();
        s.step(&mut p, &g, lr).unwrap();
        for ((c, b), a) in p.flatten().iter().zip(&mid).zip(&before) {
            assert!((c - b).abs() as f64 <= (b - a).abs() as f64 + lr * 1e-6 + 1e-7);
        }
        assert!(s.v.flatten().iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn non_finite_gradient_rejected() {
        let mut p = tiny();
        let mut g = p.zeros_like();
        g.head.bias[0] = f32::NAN;
        let mut s = AdamState::new(&p, AdamConfig::default());
        let before = p.clone();
        assert!(matches!(s.step(&mut p, &g, 1e-3), Err(Error::NonFinite(_))));
        assert_eq!(p, before);
        assert_eq!(s.t, 0);
    }
}
