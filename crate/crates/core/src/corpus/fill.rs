//! Constructive shelf filling.

use std::collections::{BTreeMap, HashSet};

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Gamma};

use crate::constraints::{validate, BrandContract, ConstraintParams, ConstraintSet};
use crate::domain::{Catalog, Fixture, Placement, Planogram, ShelfSpec};

use super::dataset::{CorpusRecord, Dataset, Manifest, StoreMeta};
use super::synth::synthesize_catalog;
use super::{stream_rng, CorpusConfig, CorpusError, FixtureDistribution};

/// Share of each shelf's capacity the filler is allowed to use.
const LOAD_BUDGET: f64 = 0.95;
const MAX_FACINGS: u32 = 3;

struct Rules<'a> {
    min_age_shelf: usize,
    contracts: Vec<&'a BrandContract>,
}

impl<'a> Rules<'a> {
    fn from(constraints: &'a ConstraintSet) -> Self {
        let mut rules = Rules {
            min_age_shelf: 0,
            contracts: Vec::new(),
        };
        for c in constraints.iter() {
            match &c.params {
                ConstraintParams::RegulatoryAge { min_shelf_index } => {
                    rules.min_age_shelf = rules.min_age_shelf.max(*min_shelf_index)
                }
                ConstraintParams::BrandPlacement { contracts } => rules.contracts.extend(contracts),
                _ => {}
            }
        }
        rules
    }

    fn contract(&self, brand: &str) -> Option<&BrandContract> {
        self.contracts.iter().copied().find(|c| c.brand == brand)
    }
}

fn sample_fixture<R: Rng + ?Sized>(d: &FixtureDistribution, rng: &mut R) -> Fixture {
    let shelves = rng.random_range(d.shelves.min..=d.shelves.max);
    let columns = rng.random_range(d.columns.min..=d.columns.max);
    let round = |v: f64| (v * 10.0).round() / 10.0;
    let width_cm = round(rng.random_range(d.width_cm.min..=d.width_cm.max));
    let height_cm = round(rng.random_range(d.height_cm.min..=d.height_cm.max));
    let base_capacity = rng.random_range(d.weight_capacity_kg.min..=d.weight_capacity_kg.max);
    let per_shelf = (0..shelves)
        .map(|s| ShelfSpec {
            clearance_height_cm: round(height_cm / shelves as f64 - 0.05),
            // lower shelves carry more
            weight_capacity_kg: round(base_capacity * (1.0 + 0.1 * (shelves - 1 - s) as f64)),
        })
        .collect();
    Fixture {
        width_cm,
        height_cm,
        shelf_count: shelves,
        per_shelf,
        slot_columns: columns,
    }
}

fn sample_preferences<R: Rng + ?Sized>(categories: &[String], variance: f64, rng: &mut R) -> Vec<f64> {
    let n = categories.len();
    if variance <= 0.0 {
        return vec![1.0 / n as f64; n];
    }
    let alpha = (1.0 / (variance * variance)).min(1e4);
    let gamma = Gamma::new(alpha, 1.0).expect("positive shape");
    let draws: Vec<f64> = (0..n).map(|_| gamma.sample(rng).max(1e-12)).collect();
    let total: f64 = draws.iter().sum();
    draws.into_iter().map(|d| d / total).collect()
}

fn weighted_pick<R: Rng + ?Sized>(options: &[usize], weights: &[f64], rng: &mut R) -> Option<usize> {
    let total: f64 = options.iter().map(|&o| weights[o]).sum();
    if options.is_empty() || total <= 0.0 {
        return options.first().copied();
    }
    let mut u = rng.random_range(0.0..total);
    for &o in options {
        u -= weights[o];
        if u < 0.0 {
            return Some(o);
        }
    }
    options.last().copied()
}

/// One constructive fill attempt. Structurally valid by construction;
/// constraint satisfaction is checked by the caller.
pub fn fill_planogram<R: Rng + ?Sized>(
    fixture: &Fixture,
    catalog: &Catalog,
    constraints: &ConstraintSet,
    preferences: &[f64],
    store_id: &str,
    rng: &mut R,
) -> Planogram {
    let rules = Rules::from(constraints);
    let categories = catalog.categories();
    let age_categories: HashSet<usize> = catalog
        .products()
        .iter()
        .filter(|p| p.age_restricted)
        .filter_map(|p| catalog.category_index(&p.category))
        .collect();
    let mut by_category: Vec<Vec<usize>> = vec![Vec::new(); categories.len()];
    for (i, p) in catalog.products().iter().enumerate() {
        by_category[catalog.category_index(&p.category).expect("known")].push(i);
    }
    let k = fixture.slot_columns;
    let mut used = HashSet::new();
    let mut contracted_done: HashSet<&str> = HashSet::new();
    let mut placements = Vec::new();

    for shelf in (0..fixture.shelf_count).rev() {
        let spec = &fixture.per_shelf[shelf];
        let budget = LOAD_BUDGET * spec.weight_capacity_kg;
        let mut load = 0.0;
        let mut allowed: Vec<usize> = (0..categories.len())
            .filter(|c| shelf >= rules.min_age_shelf || !age_categories.contains(c))
            .collect();
        let blocks = rng.random_range(1..=2usize);
        let mut chosen = Vec::new();
        for _ in 0..blocks {
            let Some(c) = weighted_pick(&allowed, preferences, rng) else { break };
            allowed.retain(|&a| a != c);
            chosen.push(c);
        }
        let mut col = 0;
        for (b, &cat) in chosen.iter().enumerate() {
            let block_end = if b + 1 == chosen.len() {
                k
            } else {
                col + ((k - col) as f64 * rng.random_range(0.4..0.7)).round() as usize
            };
            let mut brands: Vec<&str> = by_category[cat]
                .iter()
                .map(|&i| catalog.product(i).brand.as_str())
                .collect();
            brands.sort_unstable();
            brands.dedup();
            brands.shuffle(rng);
            let mut placed_brands: Vec<&str> = Vec::new();
            for brand in brands {
                if let Some(contract) = rules.contract(brand) {
                    let top = fixture.shelf_count - 1;
                    let in_band = shelf >= contract.min_shelf && shelf <= contract.max_shelf.min(top);
                    if !in_band || contracted_done.contains(brand) {
                        continue;
                    }
                }
                let mut members: Vec<usize> = by_category[cat]
                    .iter()
                    .copied()
                    .filter(|&i| catalog.product(i).brand == brand && !used.contains(&i))
                    .collect();
                members.shuffle(rng);
                for idx in members {
                    if col >= block_end {
                        break;
                    }
                    let p = catalog.product(idx);
                    if p.height_cm > spec.clearance_height_cm {
                        continue;
                    }
                    let mut facings = rng.random_range(1..=MAX_FACINGS);
                    while facings > 0
                        && (fixture.columns_needed(p.width_cm, facings) > block_end - col
                            || load + p.weight_kg * facings as f64 > budget)
                    {
                        facings -= 1;
                    }
                    if facings == 0 {
                        continue;
                    }
                    let mut span = fixture.columns_needed(p.width_cm, facings);
                    if col + span < block_end && rng.random_bool(0.15) {
                        span += 1;
                    }
                    placements.push(Placement {
                        sku: p.sku.clone(),
                        shelf_index: shelf,
                        start_column: col,
                        span_columns: span,
                        facings,
                    });
                    used.insert(idx);
                    load += p.weight_kg * facings as f64;
                    col += span;
                    if !placed_brands.contains(&brand) {
                        placed_brands.push(brand);
                    }
                }
            }
            contracted_done.extend(placed_brands.into_iter().filter(|b| rules.contract(b).is_some()));
        }
    }
    Planogram {
        fixture: fixture.clone(),
        placements,
        store_id: store_id.to_string(),
    }
}

/// Store metadata plus its planograms, from the store's own RNG stream.
pub fn generate_store(
    config: &CorpusConfig,
    store: usize,
    catalog: &Catalog,
    constraints: &ConstraintSet,
) -> Result<(StoreMeta, Vec<Planogram>), CorpusError> {
    let mut rng = stream_rng(config.rng_seed, Some(store));
    let fixture = sample_fixture(&config.fixture_distribution, &mut rng);
    fixture.validate()?;
    let preferences = sample_preferences(catalog.categories(), config.store_style_variance, &mut rng);
    let store_id = format!("store-{store:03}");
    let mut planograms = Vec::with_capacity(config.planograms_per_store);
    for _ in 0..config.planograms_per_store {
        let mut last_failure = String::new();
        let mut accepted = None;
        for _ in 0..config.max_attempts {
            let pg = fill_planogram(&fixture, catalog, constraints, &preferences, &store_id, &mut rng);
            if pg.placements.is_empty() {
                last_failure = "no product fits the fixture".into();
                continue;
            }
            let report = validate(&pg, constraints, catalog)?;
            if report.all_satisfied() {
                accepted = Some(pg);
                break;
            }
            last_failure = report
                .per_constraint
                .iter()
                .filter(|o| !o.satisfied)
                .map(|o| o.kind.to_string())
                .collect::<Vec<_>>()
                .join(", ");
        }
        match accepted {
            Some(pg) => planograms.push(pg),
            None => {
                return Err(CorpusError::Infeasible {
                    store,
                    attempts: config.max_attempts,
                    reason: last_failure,
                })
            }
        }
    }
    let meta = StoreMeta {
        store_id,
        store_index: store,
        fixture,
        category_preferences: catalog
            .categories()
            .iter()
            .cloned()
            .zip(preferences)
            .collect::<BTreeMap<_, _>>(),
    };
    Ok((meta, planograms))
}

/// Synthesizes the catalog and every store's planograms.
pub fn generate_corpus(config: &CorpusConfig, constraints: &ConstraintSet) -> Result<Dataset, CorpusError> {
    config.validate()?;
    let catalog = synthesize_catalog(config.catalog_size, config.rng_seed)?;
    let mut stores = Vec::with_capacity(config.store_count);
    let mut records = Vec::with_capacity(config.store_count * config.planograms_per_store);
    for store in 0..config.store_count {
        let (meta, planograms) = generate_store(config, store, &catalog, constraints)?;
        records.extend(planograms.into_iter().enumerate().map(|(i, planogram)| CorpusRecord {
            store_id: meta.store_id.clone(),
            store_index: store,
            planogram_index: i,
            planogram,
        }));
        stores.push(meta);
    }
    Ok(Dataset {
        manifest: Manifest::new(config.clone()),
        catalog,
        constraints: constraints.clone(),
        stores,
        records,
    })
}
