//! Scores a corpus planogram and a deliberately broken copy: signed margins,
//! hinge penalty through both the planogram and the grid path, and the
//! hard-validation report.

use planoforge::constraints::{hinge_loss, hinge_loss_tensor, margins, validate};
use planoforge::corpus::{default_constraints, generate_corpus, synthesize_catalog, CorpusConfig};
use planoforge::domain::encode;

fn main() -> anyhow::Result<()> {
    let config = CorpusConfig {
        store_count: 1,
        planograms_per_store: 1,
        ..CorpusConfig::default()
    };
    let catalog = synthesize_catalog(config.catalog_size, config.rng_seed)?;
    let data = generate_corpus(&config, &default_constraints(&catalog))?;
    let good = data.records[0].planogram.clone();

    let mut bad = good.clone();
    let heavy = data
        .catalog
        .products()
        .iter()
        .filter(|p| p.age_restricted)
        .max_by(|a, b| a.weight_kg.total_cmp(&b.weight_kg))
        .expect("catalog has age-restricted products");
    for p in bad.placements.iter_mut().filter(|p| p.shelf_index == 0) {
        let fits = bad.fixture.max_facings(heavy.width_cm, p.span_columns);
        if fits > 0 {
            p.sku = heavy.sku.clone();
            p.facings = fits;
        }
    }

    for (name, pg) in [("corpus", &good), ("broken", &bad)] {
        let m = margins(&data.constraints, pg, &data.catalog)?;
        let grid = encode(pg, &data.catalog)?;
        println!("{name}:");
        for (c, v) in data.constraints.iter().zip(&m) {
            println!("  {:<18} margin {v:+.3}", c.kind().as_str());
        }
        println!(
            "  hinge {:.4} (grid path {:.4}), overall satisfaction {:.2}",
            hinge_loss(&data.constraints, pg, &data.catalog)?,
            hinge_loss_tensor(&grid, &data.constraints, &data.catalog, &pg.fixture)?,
            validate(pg, &data.constraints, &data.catalog)?.overall
        );
    }
    Ok(())
}
