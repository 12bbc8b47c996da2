use serde::{Deserialize, Serialize};

use super::tensor::Tensor;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamSettings {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamSettings {
    pub fn with_learning_rate(learning_rate: f64) -> Self {
        Self {
            learning_rate,
            ..Self::default()
        }
    }
}

impl Default for AdamSettings {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Adam with bias correction. Moment buffers are created lazily on the
/// first update and mirror the parameter shapes from then on.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub settings: AdamSettings,
    step: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new(settings: AdamSettings) -> Self {
        Self {
            settings,
            step: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn first_moments(&self) -> &[Vec<f64>] {
        &self.m
    }

    pub fn second_moments(&self) -> &[Vec<f64>] {
        &self.v
    }

    /// Applies one update. `grads[i]` belongs to `params[i]`; every buffer is
    /// zeroed after use.
    pub fn update(
        &mut self,
        params: &mut [&mut Tensor],
        grads: &mut [Option<Vec<f64>>],
    ) -> Result<()> {
        if params.len() != grads.len() {
            return Err(Error::shape(
                "adam",
                format!("{} parameters but {} gradients", params.len(), grads.len()),
            ));
        }
        for (i, (p, g)) in params.iter().zip(grads.iter()).enumerate() {
            match g {
                None => return Err(Error::MissingGradient(i)),
                Some(g) if g.len() != p.numel() => {
                    return Err(Error::shape(
                        "adam",
                        format!(
                            "gradient {i} has {} values, parameter {}",
                            g.len(),
                            p.numel()
                        ),
                    ))
                }
                Some(g) if g.iter().any(|v| !v.is_finite()) => {
                    return Err(Error::NonFinite(format!("gradient of parameter {i}")))
                }
                _ => {}
            }
        }
        if self.m.is_empty() {
            self.m = params.iter().map(|p| vec![0.0; p.numel()]).collect();
            self.v = self.m.clone();
        } else if self.m.len() != params.len()
            || self
                .m
                .iter()
                .zip(params.iter())
                .any(|(m, p)| m.len() != p.numel())
        {
            return Err(Error::shape(
                "adam",
                "parameter layout changed between steps",
            ));
        }

        self.step += 1;
        let AdamSettings {
            learning_rate,
            beta1,
            beta2,
            eps,
        } = self.settings;
        let t = self.step as i32;
        let bias1 = 1.0 - beta1.powi(t);
        let bias2 = 1.0 - beta2.powi(t);

        for (((p, g), m), v) in params
            .iter_mut()
            .zip(grads.iter_mut())
            .zip(&mut self.m)
            .zip(&mut self.v)
        {
            let g = g.as_mut().expect("checked above");
            for (((w, gi), mi), vi) in p.data_mut().iter_mut().zip(g.iter_mut()).zip(m).zip(v) {
                *mi = beta1 * *mi + (1.0 - beta1) * *gi;
                *vi = beta2 * *vi + (1.0 - beta2) * *gi * *gi;
                let m_hat = *mi / bias1;
                let v_hat = *vi / bias2;
                *w -= learning_rate * m_hat / (v_hat.sqrt() + eps);
                *gi = 0.0;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_is_a_no_op() {
        let mut w = Tensor::new(&[3], vec![1.0, -2.0, 0.5]).unwrap();
        let before = w.clone();
        let mut adam = AdamState::new(AdamSettings::default());
        let mut g = vec![Some(vec![0.0; 3])];
        adam.update(&mut [&mut w], &mut g).unwrap();
        assert_eq!(w, before);
        assert_eq!(adam.step_count(), 1);
        assert!(adam.first_moments()[0].iter().all(|&v| v == 0.0));
        assert!(adam.second_moments()[0].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        // m_hat = 1, v_hat = 1, so the step is lr / (1 + eps).
        let mut w = Tensor::scalar(0.0);
        let mut adam = AdamState::new(AdamSettings::with_learning_rate(0.1));
        adam.update(&mut [&mut w], &mut [Some(vec![1.0])]).unwrap();
        let expect = -0.1 / (1.0 + 1e-8);
        assert!((w.item() - expect).abs() < 1e-15);
    }

    #[test]
    fn converges_on_quadratic() {
        let mut w = Tensor::scalar(0.0);
        let mut adam = AdamState::new(AdamSettings::with_learning_rate(0.1));
        for _ in 0..500 {
            let g = 2.0 * (w.item() - 3.0);
            adam.update(&mut [&mut w], &mut [Some(vec![g])]).unwrap();
        }
        assert!((w.item() - 3.0).abs() < 1e-2, "w = {}", w.item());
    }

    #[test]
    fn gradients_are_zeroed_and_step_counts() {
        let mut w = Tensor::scalar(1.0);
        let mut adam = AdamState::new(AdamSettings::default());
        let mut g = vec![Some(vec![0.3])];
        for expected in 1..=3 {
            g[0].as_mut().unwrap()[0] = 0.3;
            adam.update(&mut [&mut w], &mut g).unwrap();
            assert_eq!(adam.step_count(), expected);
            assert_eq!(g[0].as_ref().unwrap()[0], 0.0);
        }
    }

    #[test]
    fn missing_gradient_is_an_error() {
        let mut w = Tensor::scalar(1.0);
        let mut adam = AdamState::new(AdamSettings::default());
        assert!(matches!(
            adam.update(&mut [&mut w], &mut [None]),
            Err(Error::MissingGradient(0))
        ));
        assert_eq!(adam.step_count(), 0);
    }
}
