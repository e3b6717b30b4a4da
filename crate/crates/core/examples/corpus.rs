//! Generates a small multi-store corpus, augments it and checks that every
//! planogram still passes hard validation.

use planoforge::constraints::validate_batch;
use planoforge::corpus::{augment, default_constraints, generate_corpus, synthesize_catalog, CorpusConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> anyhow::Result<()> {
    let config = CorpusConfig {
        store_count: 5,
        planograms_per_store: 4,
        ..CorpusConfig::default()
    };
    let catalog = synthesize_catalog(config.catalog_size, config.rng_seed)?;
    let data = generate_corpus(&config, &default_constraints(&catalog))?;
    println!(
        "{} products in {} categories, {} planograms over {} stores",
        data.catalog.len(),
        data.catalog.categories().len(),
        data.len(),
        data.stores.len()
    );
    for store in data.stores.iter().take(3) {
        let f = &store.fixture;
        println!(
            "  {}: {} shelves x {} columns, {:.0} x {:.0} cm",
            store.store_id, f.shelf_count, f.slot_columns, f.width_cm, f.height_cm
        );
    }

    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let augmented: Vec<_> = data
        .planograms()
        .map(|p| augment(p, &data.catalog, &data.constraints, &mut rng))
        .collect();
    let original = validate_batch(data.planograms(), &data.constraints, &data.catalog)?;
    let after = validate_batch(&augmented, &data.constraints, &data.catalog)?;
    println!("satisfaction: corpus {:.3}, augmented {:.3}", original.overall, after.overall);

    let dir = std::env::temp_dir().join("planoforge-corpus-example");
    data.save(&dir)?;
    println!("saved to {}", dir.display());
    Ok(())
}
