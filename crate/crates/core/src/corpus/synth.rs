use rand::Rng;

use crate::constraints::{BrandContract, ConstraintSet};
use crate::domain::{Catalog, Product};

use super::{stream_rng, CorpusError};

/// Attribute ranges for one synthetic category.
#[derive(Clone, Copy, Debug)]
pub struct CategoryProfile {
    pub name: &'static str,
    pub width_cm: (f64, f64),
    pub height_cm: (f64, f64),
    pub weight_kg: (f64, f64),
    pub price: (f64, f64),
    /// Margin as a fraction of price.
    pub margin_rate: (f64, f64),
    pub age_restricted: bool,
}

pub const BRANDS_PER_CATEGORY: usize = 3;

pub const CATEGORY_PROFILES: [CategoryProfile; 8] = [
    CategoryProfile {
        name: "bakery",
        width_cm: (9.0, 14.0),
        height_cm: (8.0, 20.0),
        weight_kg: (0.3, 0.8),
        price: (1.5, 5.0),
        margin_rate: (0.25, 0.45),
        age_restricted: false,
    },
    CategoryProfile {
        name: "beverages",
        width_cm: (7.0, 12.0),
        height_cm: (20.0, 32.0),
        weight_kg: (1.0, 2.2),
        price: (1.0, 4.0),
        margin_rate: (0.15, 0.30),
        age_restricted: false,
    },
    CategoryProfile {
        name: "cleaning",
        width_cm: (8.0, 14.0),
        height_cm: (18.0, 30.0),
        weight_kg: (0.6, 1.8),
        price: (2.5, 9.0),
        margin_rate: (0.20, 0.35),
        age_restricted: false,
    },
    CategoryProfile {
        name: "confectionery",
        width_cm: (4.0, 8.0),
        height_cm: (8.0, 16.0),
        weight_kg: (0.05, 0.3),
        price: (0.8, 3.0),
        margin_rate: (0.35, 0.55),
        age_restricted: false,
    },
    CategoryProfile {
        name: "dairy",
        width_cm: (6.0, 10.0),
        height_cm: (10.0, 22.0),
        weight_kg: (0.4, 1.1),
        price: (1.0, 4.5),
        margin_rate: (0.15, 0.30),
        age_restricted: false,
    },
    CategoryProfile {
        name: "personal-care",
        width_cm: (4.0, 9.0),
        height_cm: (12.0, 24.0),
        weight_kg: (0.1, 0.6),
        price: (2.0, 12.0),
        margin_rate: (0.30, 0.50),
        age_restricted: false,
    },
    CategoryProfile {
        name: "snacks",
        width_cm: (10.0, 16.0),
        height_cm: (15.0, 28.0),
        weight_kg: (0.1, 0.5),
        price: (1.0, 4.0),
        margin_rate: (0.30, 0.50),
        age_restricted: false,
    },
    CategoryProfile {
        name: "spirits",
        width_cm: (8.0, 11.0),
        height_cm: (26.0, 34.0),
        weight_kg: (1.0, 1.6),
        price: (12.0, 40.0),
        margin_rate: (0.20, 0.35),
        age_restricted: true,
    },
];

fn draw<R: Rng + ?Sized>(rng: &mut R, (lo, hi): (f64, f64), decimals: i32) -> f64 {
    let scale = 10f64.powi(decimals);
    (rng.random_range(lo..=hi) * scale).round() / scale
}

/// Deterministic catalog of `size` products spread round-robin over the
/// category profiles, three brands per category.
pub fn synthesize_catalog(size: usize, seed: u64) -> Result<Catalog, CorpusError> {
    if size == 0 {
        return Err(CorpusError::InvalidConfig("catalog_size must be at least 1".into()));
    }
    let mut rng = stream_rng(seed, None);
    let mut per_category = [0usize; CATEGORY_PROFILES.len()];
    let products = (0..size)
        .map(|i| {
            let c = i % CATEGORY_PROFILES.len();
            let profile = &CATEGORY_PROFILES[c];
            let brand = per_category[c] % BRANDS_PER_CATEGORY;
            per_category[c] += 1;
            let price = draw(&mut rng, profile.price, 2);
            let rate = rng.random_range(profile.margin_rate.0..=profile.margin_rate.1);
            Product {
                sku: format!("SKU-{i:04}"),
                width_cm: draw(&mut rng, profile.width_cm, 1),
                height_cm: draw(&mut rng, profile.height_cm, 1),
                depth_cm: draw(&mut rng, (6.0, 25.0), 1),
                weight_kg: draw(&mut rng, profile.weight_kg, 2),
                category: profile.name.to_string(),
                brand: format!("{}-{}", profile.name, ["north", "crest", "vale"][brand]),
                price,
                margin: (price * rate * 100.0).round() / 100.0,
                age_restricted: profile.age_restricted,
            }
        })
        .collect();
    Ok(Catalog::new(products)?)
}

pub const DEFAULT_MIN_AGE_SHELF: usize = 2;

/// One constraint of each kind; the first brand of two categories holds
/// shelf-band contracts.
pub fn default_constraints(catalog: &Catalog) -> ConstraintSet {
    let mut contracts = Vec::new();
    for (category, min_shelf, max_shelf) in [("beverages", 1, 3), ("snacks", 0, 1)] {
        if let Some(p) = catalog.products().iter().find(|p| p.category == category) {
            contracts.push(BrandContract {
                brand: p.brand.clone(),
                min_shelf,
                max_shelf,
            });
        }
    }
    ConstraintSet::standard(DEFAULT_MIN_AGE_SHELF, contracts)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn catalog_is_deterministic_and_balanced() {
        let a = synthesize_catalog(120, 3).unwrap();
        let b = synthesize_catalog(120, 3).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.categories().len(), 8);
        assert_eq!(a.products().iter().filter(|p| p.category == "dairy").count(), 15);
        assert!(a.products().iter().filter(|p| p.age_restricted).all(|p| p.category == "spirits"));
        assert_ne!(a, synthesize_catalog(120, 4).unwrap());
    }

    #[test]
    fn default_contracts_exist() {
        let c = synthesize_catalog(120, 1).unwrap();
        let set = default_constraints(&c);
        assert_eq!(set.len(), 5);
    }
}
