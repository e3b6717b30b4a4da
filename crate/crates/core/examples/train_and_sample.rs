//! Short constraint-aware training run on a small corpus, then sampling on
//! every store fixture and a satisfaction, utilization and revenue report.
//! A few hundred steps only shows the mechanics; real runs use the default
//! 20k-step configuration through `planoforge train`.

use planoforge::corpus::{default_constraints, generate_corpus, synthesize_catalog, CorpusConfig};
use planoforge::diffusion::{sample_across, DenoiserModel, LossContext, ModelConfig, TrainConfig, Trainer, TrainingSet};
use planoforge::evaluation::{build_report, RevenueModel};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> anyhow::Result<()> {
    let steps: usize = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(300);
    let config = CorpusConfig {
        store_count: 10,
        planograms_per_store: 5,
        ..CorpusConfig::default()
    };
    let catalog = synthesize_catalog(config.catalog_size, config.rng_seed)?;
    let data = generate_corpus(&config, &default_constraints(&catalog))?;
    let set = TrainingSet::from_planograms(data.planograms(), &data.catalog)?;

    let train = TrainConfig {
        steps,
        timesteps: 50,
        learning_rate: 1e-3,
        ..TrainConfig::default()
    };
    let model = DenoiserModel::new(ModelConfig::default(), &mut ChaCha8Rng::seed_from_u64(0))?;
    println!("{} parameters, {} training planograms", model.parameter_count(), set.len());
    let revenue_model = RevenueModel::default();
    let ctx = LossContext {
        catalog: &data.catalog,
        constraints: &data.constraints,
        revenue_model: &revenue_model,
        lambda1: train.lambda1,
        lambda2: train.lambda2,
    };
    let mut trainer = Trainer::new(model, train.clone())?;
    trainer.run(&set, &ctx, |step, loss| {
        if step % (steps / 5).max(1) == 0 {
            println!(
                "step {step:>5}: diffusion {:.4}, constraint {:.4}, revenue {:.4}",
                loss.diffusion, loss.constraint, loss.revenue
            );
        }
    })?;

    let fixtures: Vec<_> = data.stores.iter().map(|s| s.fixture.clone()).collect();
    let schedule = train.schedule().build()?;
    let samples = sample_across(&trainer.model, &schedule, &fixtures, &data.catalog, 7, 20)?;
    let report = build_report(&samples, &data.constraints, &data.catalog, &revenue_model)?;
    println!("{}", report.to_table());
    Ok(())
}
