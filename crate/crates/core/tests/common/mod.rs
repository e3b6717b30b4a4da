#![allow(dead_code)]

use planoforge::corpus::{default_constraints, generate_corpus, synthesize_catalog, CorpusConfig, Dataset};
use planoforge::diffusion::{Checkpoint, DenoiserModel, ModelConfig, ScheduleConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn small_corpus(stores: usize, per_store: usize) -> Dataset {
    let config = CorpusConfig {
        store_count: stores,
        planograms_per_store: per_store,
        ..CorpusConfig::default()
    };
    let catalog = synthesize_catalog(config.catalog_size, config.rng_seed).unwrap();
    generate_corpus(&config, &default_constraints(&catalog)).unwrap()
}

/// Untrained model on a short schedule, fast enough for request tests.
pub fn tiny_checkpoint(seed: u64, timesteps: usize) -> Checkpoint {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let config = ModelConfig {
        widths: [4, 6, 8],
        time_dim: 8,
        ..ModelConfig::default()
    };
    Checkpoint::new(
        DenoiserModel::new(config, &mut rng).unwrap(),
        ScheduleConfig {
            timesteps,
            ..ScheduleConfig::default()
        },
    )
}

use planoforge::domain::{Catalog, Fixture, Placement, Planogram, ShelfSpec};
use rand::Rng;

/// Fixture with tight clearances and capacities so that random fills hit
/// every kind of violation.
pub fn random_fixture<R: Rng>(rng: &mut R) -> Fixture {
    let shelf_count = rng.random_range(3..=5);
    let per_shelf: Vec<ShelfSpec> = (0..shelf_count)
        .map(|_| ShelfSpec {
            clearance_height_cm: rng.random_range(15.0..45.0),
            weight_capacity_kg: rng.random_range(5.0..60.0),
        })
        .collect();
    let total: f64 = per_shelf.iter().map(|s| s.clearance_height_cm).sum();
    Fixture {
        width_cm: rng.random_range(80.0..160.0),
        height_cm: total + rng.random_range(0.0..20.0),
        shelf_count,
        per_shelf,
        slot_columns: rng.random_range(8..=16),
    }
}

/// Structurally valid planogram with uniformly random products.
pub fn random_planogram<R: Rng>(rng: &mut R, catalog: &Catalog, fixture: Fixture) -> Planogram {
    let mut pg = Planogram::empty(fixture, format!("random-{}", rng.random::<u32>()));
    let k = pg.fixture.slot_columns;
    for shelf in 0..pg.fixture.shelf_count {
        let mut col = 0;
        while col < k {
            if rng.random_bool(0.25) {
                col += 1;
                continue;
            }
            let product = catalog.product(rng.random_range(0..catalog.len()));
            let facings = rng.random_range(1..=3);
            let span = pg.fixture.columns_needed(product.width_cm, facings).max(1) + rng.random_range(0..=1);
            if col + span > k {
                col += 1;
                continue;
            }
            pg.placements.push(Placement {
                sku: product.sku.clone(),
                shelf_index: shelf,
                start_column: col,
                span_columns: span,
                facings,
            });
            col += span;
        }
    }
    pg
}

pub fn default_catalog() -> Catalog {
    let config = CorpusConfig::default();
    synthesize_catalog(config.catalog_size, config.rng_seed).unwrap()
}
