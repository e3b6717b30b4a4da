use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::domain::codec::{channel_norms, CHANNELS};
use crate::domain::{decode, Catalog, Fixture, Planogram, PlanogramTensor};
use crate::numerics::Tensor;

use super::{DenoiserModel, DiffusionError, NoiseSchedule};

/// Runs the reverse chain for `count` grids on `fixture`, from pure noise
/// at `t = T−1` down to `t = 0`, with variance `β_t` at every step but the
/// last. Returns `[count, C, S, K]`.
pub fn sample_grids(
    model: &DenoiserModel,
    schedule: &NoiseSchedule,
    fixture: &Fixture,
    seed: u64,
    count: usize,
) -> Result<Tensor, DiffusionError> {
    fixture.validate()?;
    if model.config.in_channels != CHANNELS {
        return Err(DiffusionError::Shape(format!(
            "model expects {} channels, grids have {CHANNELS}",
            model.config.in_channels
        )));
    }
    if count == 0 {
        return Err(DiffusionError::Shape("count must be positive".into()));
    }
    let shape = [count, CHANNELS, fixture.shelf_count, fixture.slot_columns];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = Tensor::randn(&shape, &mut rng);
    for t in (0..schedule.len()).rev() {
        let eps_hat = model.predict(&x, &vec![t; count])?;
        let beta = schedule.beta(t);
        let coef = beta / (1.0 - schedule.alpha_bar(t)).sqrt();
        let inv_sqrt_alpha = 1.0 / schedule.alphas()[t].sqrt();
        let mean = x.zip_map(&eps_hat, |x, e| inv_sqrt_alpha * (x - coef * e))?;
        x = if t > 0 {
            let sigma = beta.sqrt();
            mean.zip_map(&Tensor::randn(&shape, &mut rng), |m, z| m + sigma * z)?
        } else {
            mean
        };
        if !x.all_finite() {
            return Err(DiffusionError::Shape(format!("sampling diverged at step {t}")));
        }
    }
    Ok(x)
}

/// Samples `count` planograms for `fixture`; deterministic in `seed`.
pub fn sample(
    model: &DenoiserModel,
    schedule: &NoiseSchedule,
    fixture: &Fixture,
    catalog: &Catalog,
    seed: u64,
    count: usize,
) -> Result<Vec<Planogram>, DiffusionError> {
    if count == 0 {
        return Ok(Vec::new());
    }
    let grids = sample_grids(model, schedule, fixture, seed, count)?;
    let per = grids.len() / count;
    let norms = channel_norms(catalog, fixture);
    (0..count)
        .map(|i| {
            let grid = Tensor::new(grids.shape()[1..].to_vec(), grids.data()[i * per..(i + 1) * per].to_vec())?;
            let tensor = PlanogramTensor {
                grid,
                norms,
                store_id: format!("sample-{seed}-{i}"),
            };
            Ok(decode(&tensor, catalog, fixture)?)
        })
        .collect()
}

/// `count` planograms spread round-robin over `fixtures`, each fixture
/// sampled as one batch with seed `seed + fixture index`.
pub fn sample_across(
    model: &DenoiserModel,
    schedule: &NoiseSchedule,
    fixtures: &[Fixture],
    catalog: &Catalog,
    seed: u64,
    count: usize,
) -> Result<Vec<Planogram>, DiffusionError> {
    if fixtures.is_empty() {
        return Err(DiffusionError::Shape("no fixtures to sample on".into()));
    }
    let batches: Vec<Vec<Planogram>> = fixtures
        .iter()
        .enumerate()
        .map(|(i, f)| {
            let n = count / fixtures.len() + usize::from(i < count % fixtures.len());
            sample(model, schedule, f, catalog, seed.wrapping_add(i as u64), n)
        })
        .collect::<Result<_, _>>()?;
    let mut iters: Vec<_> = batches.into_iter().map(Vec::into_iter).collect();
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        out.extend(iters.iter_mut().filter_map(Iterator::next));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffusion::{ModelConfig, ScheduleConfig};
    use crate::domain::planogram::tests::{catalog, fixture};

    fn small() -> DenoiserModel {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let config = ModelConfig {
            widths: [4, 4, 4],
            time_dim: 4,
            ..ModelConfig::default()
        };
        DenoiserModel::new(config, &mut rng).unwrap()
    }

    #[test]
    fn deterministic_and_structurally_valid() {
        let model = small();
        let schedule = ScheduleConfig {
            timesteps: 20,
            ..ScheduleConfig::default()
        }
        .build()
        .unwrap();
        let (fx, cat) = (fixture(), catalog());
        let a = sample(&model, &schedule, &fx, &cat, 9, 3).unwrap();
        let b = sample(&model, &schedule, &fx, &cat, 9, 3).unwrap();
        assert_eq!(a, b);
        for p in &a {
            p.check_structure(&cat).unwrap();
        }
        assert!(sample(&model, &schedule, &fx, &cat, 9, 0).unwrap().is_empty());
    }

    #[test]
    fn zero_model_follows_the_prior_chain() {
        let mut model = small();
        let names: Vec<String> = model.params.names().cloned().collect();
        for name in names {
            let shape = model.params.get(&name).unwrap().shape().to_vec();
            model.params.insert(name, Tensor::zeros(&shape));
        }
        let schedule = ScheduleConfig {
            timesteps: 30,
            ..ScheduleConfig::default()
        }
        .build()
        .unwrap();
        let x = sample_grids(&model, &schedule, &fixture(), 1, 40).unwrap();
        // With ε̂ = 0 each coordinate is a sum of independent Gaussians.
        let mut var = 1.0;
        for t in (0..schedule.len()).rev() {
            var /= schedule.alphas()[t];
            if t > 0 {
                var += schedule.beta(t);
            }
        }
        let n = x.len() as f64;
        let mean = x.sum() / n;
        assert!(mean.abs() < 4.0 * (var / n).sqrt(), "mean {mean}, var {var}");
        let empirical = x.data().iter().map(|v| v * v).sum::<f64>() / n;
        assert!((empirical / var - 1.0).abs() < 0.05, "{empirical} vs {var}");
    }
}
