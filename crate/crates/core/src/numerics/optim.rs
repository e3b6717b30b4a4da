use std::collections::BTreeMap;

use super::{Gradients, NumericsError, Params, Tensor};

/// Adaptive-moment optimizer with bias correction.
#[derive(Clone, Debug)]
pub struct Adam {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    step: u64,
    first: BTreeMap<String, Vec<f64>>,
    second: BTreeMap<String, Vec<f64>>,
}

impl Default for Adam {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            step: 0,
            first: BTreeMap::new(),
            second: BTreeMap::new(),
        }
    }
}

impl Adam {
    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    /// One update of every parameter that has a gradient.
    pub fn step(&mut self, params: &mut Params, grads: &Gradients, lr: f64) -> Result<(), NumericsError> {
        self.step += 1;
        let bc1 = 1.0 - self.beta1.powi(self.step as i32);
        let bc2 = 1.0 - self.beta2.powi(self.step as i32);
        let names: Vec<String> = params.names().cloned().collect();
        for name in names {
            let Some(g) = grads.get(&name) else { continue };
            let p = params.get(&name).expect("name from params");
            if g.shape() != p.shape() {
                return Err(NumericsError::ShapeMismatch {
                    op: format!("adam update of {name}"),
                    lhs: p.shape().to_vec(),
                    rhs: g.shape().to_vec(),
                });
            }
            let m = self.first.entry(name.clone()).or_insert_with(|| vec![0.0; p.len()]);
            let v = self.second.entry(name.clone()).or_insert_with(|| vec![0.0; p.len()]);
            let mut data = p.to_vec();
            for i in 0..data.len() {
                let gi = g.data()[i];
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * gi;
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * gi * gi;
                data[i] -= lr * (m[i] / bc1) / ((v[i] / bc2).sqrt() + self.epsilon);
            }
            params.insert(name, Tensor::new(p.shape().to_vec(), data)?);
        }
        Ok(())
    }
}

/// Cosine annealing from `base` down to zero over `total` steps.
pub fn cosine_lr(base: f64, step: usize, total: usize) -> f64 {
    if total == 0 {
        return base;
    }
    let progress = (step as f64 / total as f64).min(1.0);
    0.5 * base * (1.0 + (std::f64::consts::PI * progress).cos())
}

/// Rescales gradients in place so their global L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
pub fn clip_grad_norm(grads: &mut Gradients, max_norm: f64) -> f64 {
    let norm = grads
        .values()
        .flat_map(|t| t.data().iter())
        .map(|g| g * g)
        .sum::<f64>()
        .sqrt();
    if norm > max_norm && norm > 0.0 {
        let s = max_norm / norm;
        for t in grads.values_mut() {
            *t = t.map(|g| g * s);
        }
    }
    norm
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Graph;

    #[test]
    fn adam_minimizes_a_quadratic() {
        let mut p = Params::new();
        p.insert("x", Tensor::vector(&[3.0, -2.0]).unwrap());
        let mut opt = Adam::default();
        for _ in 0..2000 {
            let grads = {
                let g = Graph::new(&p);
                let x = g.param("x").unwrap();
                let sq = g.square(x).unwrap();
                let l = g.sum(sq).unwrap();
                g.backward(l).unwrap()
            };
            opt.step(&mut p, &grads, 0.01).unwrap();
        }
        assert!(p.get("x").unwrap().max_abs() < 1e-2);
    }

    #[test]
    fn cosine_schedule_endpoints() {
        assert_eq!(cosine_lr(2e-4, 0, 100), 2e-4);
        assert!(cosine_lr(2e-4, 100, 100).abs() < 1e-20);
        assert!((cosine_lr(2e-4, 50, 100) - 1e-4).abs() < 1e-18);
    }
}
