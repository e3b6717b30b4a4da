//! Same-category substitution and shelf rotation.
//!
//! Both return the input unchanged when no legal move exists, and only
//! accept moves after which every constraint still holds.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::constraints::{validate, ConstraintSet};
use crate::domain::{Catalog, Planogram};

fn still_valid(pg: &Planogram, constraints: &ConstraintSet, catalog: &Catalog) -> bool {
    validate(pg, constraints, catalog).is_ok_and(|r| r.all_satisfied())
}

fn shelf_load(pg: &Planogram, catalog: &Catalog, shelf: usize) -> f64 {
    pg.placements
        .iter()
        .filter(|p| p.shelf_index == shelf)
        .filter_map(|p| catalog.get(&p.sku).map(|prod| prod.weight_kg * p.facings as f64))
        .sum()
}

fn tallest(pg: &Planogram, catalog: &Catalog, shelf: usize) -> f64 {
    pg.placements
        .iter()
        .filter(|p| p.shelf_index == shelf)
        .filter_map(|p| catalog.get(&p.sku).map(|prod| prod.height_cm))
        .fold(0.0, f64::max)
}

/// Replaces one placement's product with a same-category product that fits
/// the same span, shelf clearance and weight budget.
pub fn substitute<R: Rng + ?Sized>(
    planogram: &Planogram,
    catalog: &Catalog,
    constraints: &ConstraintSet,
    rng: &mut R,
) -> Planogram {
    if planogram.placements.is_empty() {
        return planogram.clone();
    }
    let fx = &planogram.fixture;
    let i = rng.random_range(0..planogram.placements.len());
    let target = &planogram.placements[i];
    let Some(current) = catalog.get(&target.sku) else {
        return planogram.clone();
    };
    let shelf = &fx.per_shelf[target.shelf_index];
    let other_load = shelf_load(planogram, catalog, target.shelf_index) - current.weight_kg * target.facings as f64;
    let mut candidates: Vec<_> = catalog
        .products()
        .iter()
        .filter(|p| p.category == current.category && p.sku != current.sku)
        .filter(|p| planogram.placements.iter().all(|q| q.sku != p.sku))
        .filter(|p| p.height_cm <= shelf.clearance_height_cm)
        .collect();
    candidates.shuffle(rng);
    for p in candidates {
        let facings = target.facings.min(fx.max_facings(p.width_cm, target.span_columns));
        if facings == 0 || other_load + p.weight_kg * facings as f64 > shelf.weight_capacity_kg {
            continue;
        }
        let mut out = planogram.clone();
        out.placements[i].sku = p.sku.clone();
        out.placements[i].facings = facings;
        if still_valid(&out, constraints, catalog) {
            return out;
        }
    }
    planogram.clone()
}

/// Swaps the contents of two shelves whose clearance and capacity can hold
/// each other's products.
pub fn rotate_shelves<R: Rng + ?Sized>(
    planogram: &Planogram,
    catalog: &Catalog,
    constraints: &ConstraintSet,
    rng: &mut R,
) -> Planogram {
    let fx = &planogram.fixture;
    let n = fx.shelf_count;
    let mut pairs: Vec<(usize, usize)> = (0..n).flat_map(|a| (a + 1..n).map(move |b| (a, b))).collect();
    pairs.shuffle(rng);
    let holds = |from: usize, to: usize| {
        tallest(planogram, catalog, from) <= fx.per_shelf[to].clearance_height_cm
            && shelf_load(planogram, catalog, from) <= fx.per_shelf[to].weight_capacity_kg
    };
    for (a, b) in pairs {
        if !(holds(a, b) && holds(b, a)) {
            continue;
        }
        let mut out = planogram.clone();
        for p in &mut out.placements {
            if p.shelf_index == a {
                p.shelf_index = b;
            } else if p.shelf_index == b {
                p.shelf_index = a;
            }
        }
        if still_valid(&out, constraints, catalog) {
            return out;
        }
    }
    planogram.clone()
}

/// Applies one of the two augmentations, chosen uniformly.
pub fn augment<R: Rng + ?Sized>(
    planogram: &Planogram,
    catalog: &Catalog,
    constraints: &ConstraintSet,
    rng: &mut R,
) -> Planogram {
    if rng.random_bool(0.5) {
        substitute(planogram, catalog, constraints, rng)
    } else {
        rotate_shelves(planogram, catalog, constraints, rng)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{default_constraints, generate_corpus, CorpusConfig};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn augmentations_preserve_validity_and_categories() {
        let cfg = CorpusConfig {
            store_count: 3,
            planograms_per_store: 4,
            ..CorpusConfig::default()
        };
        let catalog = crate::corpus::synthesize_catalog(cfg.catalog_size, cfg.rng_seed).unwrap();
        let constraints = default_constraints(&catalog);
        let ds = generate_corpus(&cfg, &constraints).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut changed = 0;
        for pg in ds.planograms() {
            for _ in 0..10 {
                let sub = substitute(pg, &ds.catalog, &constraints, &mut rng);
                assert!(still_valid(&sub, &constraints, &ds.catalog));
                for (a, b) in pg.placements.iter().zip(&sub.placements) {
                    assert_eq!(ds.catalog.get(&a.sku).unwrap().category, ds.catalog.get(&b.sku).unwrap().category);
                }
                changed += usize::from(&sub != pg);
                let rot = rotate_shelves(pg, &ds.catalog, &constraints, &mut rng);
                assert!(still_valid(&rot, &constraints, &ds.catalog));
                let strip = |q: &Planogram| {
                    let mut v: Vec<_> = q.placements.iter().map(|p| (p.sku.clone(), p.start_column, p.span_columns, p.facings)).collect();
                    v.sort();
                    v
                };
                assert_eq!(strip(pg), strip(&rot));
            }
        }
        assert!(changed > 0);
    }
}
