use serde::{Deserialize, Serialize};

use crate::numerics::Tensor;

use super::DiffusionError;

/// Parameters of a linear β schedule.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScheduleConfig {
    pub timesteps: usize,
    pub beta_start: f64,
    pub beta_end: f64,
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        Self {
            timesteps: 200,
            beta_start: 1e-4,
            beta_end: 0.02,
        }
    }
}

impl ScheduleConfig {
    pub fn build(&self) -> Result<NoiseSchedule, DiffusionError> {
        build_schedule(self.timesteps, self.beta_start, self.beta_end)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NoiseSchedule {
    betas: Vec<f64>,
    alphas: Vec<f64>,
    alpha_bars: Vec<f64>,
}

/// Linear β from `beta_start` to `beta_end` inclusive over `t` steps.
pub fn build_schedule(t: usize, beta_start: f64, beta_end: f64) -> Result<NoiseSchedule, DiffusionError> {
    if t < 2 {
        return Err(DiffusionError::InvalidSchedule(format!("need at least 2 steps, got {t}")));
    }
    if !(0.0 < beta_start && beta_start < beta_end && beta_end < 1.0) {
        return Err(DiffusionError::InvalidSchedule(format!(
            "need 0 < beta_start < beta_end < 1, got {beta_start} and {beta_end}"
        )));
    }
    let betas: Vec<f64> = (0..t)
        .map(|i| beta_start + (beta_end - beta_start) * i as f64 / (t - 1) as f64)
        .collect();
    let alphas: Vec<f64> = betas.iter().map(|b| 1.0 - b).collect();
    let mut alpha_bars = Vec::with_capacity(t);
    let mut acc = 1.0;
    for a in &alphas {
        acc *= a;
        alpha_bars.push(acc);
    }
    Ok(NoiseSchedule {
        betas,
        alphas,
        alpha_bars,
    })
}

impl NoiseSchedule {
    pub fn len(&self) -> usize {
        self.betas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.betas.is_empty()
    }

    pub fn betas(&self) -> &[f64] {
        &self.betas
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    pub fn alpha_bars(&self) -> &[f64] {
        &self.alpha_bars
    }

    pub fn beta(&self, t: usize) -> f64 {
        self.betas[t]
    }

    pub fn alpha_bar(&self, t: usize) -> f64 {
        self.alpha_bars[t]
    }

    fn check_step(&self, t: usize) -> Result<(), DiffusionError> {
        if t >= self.len() {
            return Err(DiffusionError::Shape(format!("step {t} outside 0..{}", self.len())));
        }
        Ok(())
    }
}

fn check_same(a: &Tensor, b: &Tensor, what: &str) -> Result<(), DiffusionError> {
    if a.shape() != b.shape() {
        return Err(DiffusionError::Shape(format!(
            "{what}: {:?} vs {:?}",
            a.shape(),
            b.shape()
        )));
    }
    Ok(())
}

/// `x_t = √ᾱ_t x₀ + √(1−ᾱ_t) ε`.
pub fn forward_sample(x0: &Tensor, t: usize, eps: &Tensor, schedule: &NoiseSchedule) -> Result<Tensor, DiffusionError> {
    schedule.check_step(t)?;
    check_same(x0, eps, "forward_sample")?;
    let ab = schedule.alpha_bar(t);
    let (a, b) = (ab.sqrt(), (1.0 - ab).sqrt());
    Ok(x0.zip_map(eps, |x, e| a * x + b * e)?)
}

/// `x̂₀ = (x_t − √(1−ᾱ_t) ε̂)/√ᾱ_t`.
pub fn predict_x0(x_t: &Tensor, eps_hat: &Tensor, t: usize, schedule: &NoiseSchedule) -> Result<Tensor, DiffusionError> {
    schedule.check_step(t)?;
    check_same(x_t, eps_hat, "predict_x0")?;
    let ab = schedule.alpha_bar(t);
    let (a, b) = (ab.sqrt(), (1.0 - ab).sqrt());
    Ok(x_t.zip_map(eps_hat, |x, e| (x - b * e) / a)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn endpoints_and_running_product() {
        let s = build_schedule(1000, 1e-4, 0.02).unwrap();
        assert_eq!(s.alpha_bar(0), 0.9999);
        assert!((s.beta(999) - 0.02).abs() < 1e-15);
        for t in 1..s.len() {
            assert_eq!(s.alpha_bar(t), s.alpha_bar(t - 1) * (1.0 - s.beta(t)));
            assert!(s.beta(t) > s.beta(t - 1));
            assert!(s.alpha_bar(t) < s.alpha_bar(t - 1));
        }
        let mid = s.beta(500);
        assert!((mid - (1e-4 + 0.02) / 2.0).abs() < (0.02 - 1e-4) / 999.0);
    }

    #[test]
    fn bad_ranges() {
        assert!(build_schedule(1, 1e-4, 0.02).is_err());
        assert!(build_schedule(10, 0.02, 1e-4).is_err());
        assert!(build_schedule(10, 0.0, 0.5).is_err());
        assert!(build_schedule(10, 0.1, 1.0).is_err());
    }

    #[test]
    fn degenerate_inputs() {
        let s = build_schedule(50, 1e-4, 0.02).unwrap();
        let x0 = Tensor::vector(&[1.0, -2.0, 0.5]).unwrap();
        let zero = Tensor::zeros(&[3]);
        let t = 30;
        let xt = forward_sample(&x0, t, &zero, &s).unwrap();
        for (a, b) in xt.data().iter().zip(x0.data()) {
            assert_eq!(*a, s.alpha_bar(t).sqrt() * b);
        }
        let xt = forward_sample(&zero, t, &x0, &s).unwrap();
        for (a, b) in xt.data().iter().zip(x0.data()) {
            assert_eq!(*a, (1.0 - s.alpha_bar(t)).sqrt() * b);
        }
        assert!(forward_sample(&x0, 50, &zero, &s).is_err());
        assert!(predict_x0(&x0, &Tensor::zeros(&[2]), 0, &s).is_err());
    }
}
