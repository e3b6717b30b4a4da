//! Saves a checkpoint at full precision and as 8-bit weights, reloads both
//! and compares sizes, per-tensor error and the samples they produce.

use planoforge::corpus::{default_constraints, generate_corpus, synthesize_catalog, CorpusConfig};
use planoforge::diffusion::{quantize, sample, Checkpoint, DenoiserModel, ModelConfig, ScheduleConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> anyhow::Result<()> {
    let config = CorpusConfig {
        store_count: 1,
        planograms_per_store: 1,
        ..CorpusConfig::default()
    };
    let catalog = synthesize_catalog(config.catalog_size, config.rng_seed)?;
    let data = generate_corpus(&config, &default_constraints(&catalog))?;

    let model = DenoiserModel::new(ModelConfig::default(), &mut ChaCha8Rng::seed_from_u64(3))?;
    let schedule = ScheduleConfig {
        timesteps: 50,
        ..ScheduleConfig::default()
    };
    let full = Checkpoint::new(model, schedule.clone());
    let (int8, report) = quantize(&full)?;

    let dir = tempfile_dir()?;
    let full_bytes = full.save(dir.join("model.f32.ckpt"))?;
    let int8_bytes = int8.save(dir.join("model.int8.ckpt"))?;
    let reloaded = Checkpoint::load(dir.join("model.int8.ckpt"))?;
    println!(
        "f32 {full_bytes} bytes, int8 {int8_bytes} bytes, ratio {:.3}",
        report.size_ratio
    );
    let mut worst: Vec<_> = report.tensors.iter().collect();
    worst.sort_by(|a, b| b.max_abs_error.total_cmp(&a.max_abs_error));
    for t in worst.iter().take(5) {
        println!("  {:<24} scale {:.2e}  max error {:.2e}", t.name, t.scale, t.max_abs_error);
    }

    let fixture = &data.stores[0].fixture;
    let built = schedule.build()?;
    let a = sample(&full.model, &built, fixture, &data.catalog, 11, 4)?;
    let b = sample(&reloaded.model, &built, fixture, &data.catalog, 11, 4)?;
    let same = a
        .iter()
        .zip(&b)
        .map(|(x, y)| x.placements.iter().zip(&y.placements).filter(|(p, q)| p.sku == q.sku).count())
        .sum::<usize>();
    let total = a.iter().map(|x| x.placements.len()).sum::<usize>();
    println!("same seed, same SKU in {same} of {total} f32 placements");
    Ok(())
}

fn tempfile_dir() -> std::io::Result<std::path::PathBuf> {
    let dir = std::env::temp_dir().join("planoforge-quantize-example");
    std::fs::create_dir_all(&dir)?;
    Ok(dir)
}
