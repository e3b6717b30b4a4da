use crate::domain::{Catalog, DecodedLayout, Fixture, Planogram};

use super::layout::{self, adjacent_pairs, cell_product};
use super::spec::{Constraint, ConstraintParams, ConstraintSet};
use super::ConstraintError;

/// Signed margin of one constraint; `>= 0` exactly when it is satisfied.
pub fn margin(constraint: &Constraint, planogram: &Planogram, catalog: &Catalog) -> Result<f64, ConstraintError> {
    let layout = layout::from_planogram(planogram, catalog)?;
    Ok(layout_margin(&constraint.params, &layout, catalog, &planogram.fixture))
}

/// Margins of every constraint in the set, in order.
pub fn margins(constraints: &ConstraintSet, planogram: &Planogram, catalog: &Catalog) -> Result<Vec<f64>, ConstraintError> {
    let layout = layout::from_planogram(planogram, catalog)?;
    Ok(constraints
        .iter()
        .map(|c| layout_margin(&c.params, &layout, catalog, &planogram.fixture))
        .collect())
}

/// `Σ weightᵢ · max(0, −marginᵢ)`.
pub fn hinge_loss(constraints: &ConstraintSet, planogram: &Planogram, catalog: &Catalog) -> Result<f64, ConstraintError> {
    let m = margins(constraints, planogram, catalog)?;
    Ok(hinge_from_margins(constraints, &m))
}

pub fn hinge_from_margins(constraints: &ConstraintSet, margins: &[f64]) -> f64 {
    constraints
        .iter()
        .zip(margins)
        .map(|(c, &m)| c.weight * (-m).max(0.0))
        .sum()
}

/// Hard boolean validator for one constraint.
pub fn satisfied(constraint: &Constraint, planogram: &Planogram, catalog: &Catalog) -> Result<bool, ConstraintError> {
    let layout = layout::from_planogram(planogram, catalog)?;
    Ok(layout_satisfied(&constraint.params, &layout, catalog, &planogram.fixture))
}

pub(crate) fn layout_margin(params: &ConstraintParams, layout: &DecodedLayout, catalog: &Catalog, fixture: &Fixture) -> f64 {
    match params {
        ConstraintParams::PhysicalFit => {
            let cw = fixture.column_width();
            let slack = layout.placements.iter().zip(&layout.products).map(|(p, &idx)| {
                let required = p.facings as f64 * catalog.product(idx).width_cm;
                (p.span_columns as f64 * cw - required) / cw
            });
            slack
                .chain(layout::height_terms(layout, catalog, fixture))
                .fold(f64::INFINITY, f64::min)
        }
        ConstraintParams::WeightLimit => shelf_loads(layout, catalog, fixture)
            .into_iter()
            .zip(&fixture.per_shelf)
            .map(|(load, shelf)| (shelf.weight_capacity_kg - load) / shelf.weight_capacity_kg)
            .fold(f64::INFINITY, f64::min),
        ConstraintParams::CategoryGrouping { threshold } => {
            let (same, pairs) = category_pairs(layout, catalog, fixture);
            let fraction = if pairs == 0 { 1.0 } else { same as f64 / pairs as f64 };
            fraction - threshold
        }
        ConstraintParams::RegulatoryAge { min_shelf_index } => {
            layout::age_margin(layout, catalog, fixture.shelf_count, *min_shelf_index)
        }
        ConstraintParams::BrandPlacement { contracts } => layout::brand_margin(layout, catalog, fixture, contracts),
    }
}

pub(crate) fn layout_satisfied(params: &ConstraintParams, layout: &DecodedLayout, catalog: &Catalog, fixture: &Fixture) -> bool {
    match params {
        ConstraintParams::PhysicalFit => {
            let cw = fixture.column_width();
            let widths_fit = layout.placements.iter().zip(&layout.products).all(|(p, &idx)| {
                p.facings as f64 * catalog.product(idx).width_cm <= p.span_columns as f64 * cw
            });
            let heights_fit = layout
                .placements
                .iter()
                .zip(&layout.products)
                .all(|(p, &idx)| catalog.product(idx).height_cm <= fixture.per_shelf[p.shelf_index].clearance_height_cm);
            widths_fit && heights_fit
        }
        ConstraintParams::WeightLimit => shelf_loads(layout, catalog, fixture)
            .into_iter()
            .zip(&fixture.per_shelf)
            .all(|(load, shelf)| load <= shelf.weight_capacity_kg),
        ConstraintParams::CategoryGrouping { threshold } => {
            let (same, pairs) = category_pairs(layout, catalog, fixture);
            pairs == 0 || same as f64 / pairs as f64 >= *threshold
        }
        ConstraintParams::RegulatoryAge { min_shelf_index } => layout
            .placements
            .iter()
            .zip(&layout.products)
            .all(|(p, &idx)| !catalog.product(idx).age_restricted || p.shelf_index >= *min_shelf_index),
        ConstraintParams::BrandPlacement { contracts } => contracts
            .iter()
            .all(|c| layout::contract_holds(layout, catalog, fixture, c)),
    }
}

fn shelf_loads(layout: &DecodedLayout, catalog: &Catalog, fixture: &Fixture) -> Vec<f64> {
    let mut loads = vec![0.0; fixture.shelf_count];
    for (p, &idx) in layout.placements.iter().zip(&layout.products) {
        loads[p.shelf_index] += p.facings as f64 * catalog.product(idx).weight_kg;
    }
    loads
}

fn category_pairs(layout: &DecodedLayout, catalog: &Catalog, fixture: &Fixture) -> (usize, usize) {
    let pairs = adjacent_pairs(layout, fixture);
    let category = |cell| catalog.product(cell_product(layout, cell).expect("occupied")).category.as_str();
    let same = pairs.iter().filter(|&&(a, b)| category(a) == category(b)).count();
    (same, pairs.len())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constraints::spec::BrandContract;
    use crate::domain::planogram::tests::{catalog, fixture};
    use crate::domain::{Placement, Product};

    fn place(sku: &str, shelf: usize, start: usize, span: usize, facings: u32) -> Placement {
        Placement {
            sku: sku.into(),
            shelf_index: shelf,
            start_column: start,
            span_columns: span,
            facings,
        }
    }

    fn heavy_catalog() -> Catalog {
        let mut products = catalog().products().to_vec();
        products.push(Product {
            sku: "h".into(),
            width_cm: 10.0,
            height_cm: 10.0,
            depth_cm: 10.0,
            weight_kg: 15.0,
            category: "d".into(),
            brand: "heavy".into(),
            price: 1.0,
            margin: 0.1,
            age_restricted: true,
        });
        Catalog::new(products).unwrap()
    }

    #[test]
    fn weight_limit_is_normalized_slack() {
        let cat = heavy_catalog();
        let mut pg = Planogram::empty(fixture(), "s");
        pg.placements.push(place("h", 0, 0, 2, 2));
        let c = Constraint::new(ConstraintParams::WeightLimit);
        assert!((margin(&c, &pg, &cat).unwrap() - 0.4).abs() < 1e-12);
        pg.placements.push(place("h", 0, 2, 2, 1));
        pg.placements.push(place("a", 0, 4, 1, 1));
        pg.placements.push(place("b", 0, 5, 2, 1));
        // 45 + 1 + 1 = 47 kg
        assert!((margin(&c, &pg, &cat).unwrap() - 3.0 / 50.0).abs() < 1e-12);
        pg.placements.push(place("a", 0, 7, 3, 3));
        assert_eq!(margin(&c, &pg, &cat).unwrap(), 0.0, "load exactly at capacity");
        assert!(satisfied(&c, &pg, &cat).unwrap());
    }

    #[test]
    fn age_restricted_below_min_shelf() {
        let cat = heavy_catalog();
        let mut pg = Planogram::empty(fixture(), "s");
        pg.placements.push(place("h", 0, 0, 1, 1));
        let c = Constraint::new(ConstraintParams::RegulatoryAge { min_shelf_index: 2 });
        assert!((margin(&c, &pg, &cat).unwrap() + 2.0 / 3.0).abs() < 1e-12);
        assert!(!satisfied(&c, &pg, &cat).unwrap());
    }

    #[test]
    fn hinge_arithmetic() {
        let set = ConstraintSet::new(vec![Constraint::new(ConstraintParams::WeightLimit); 3]);
        assert!((hinge_from_margins(&set, &[0.4, -0.25, -0.1]) - 0.35).abs() < 1e-12);
    }

    #[test]
    fn brand_contracts() {
        let cat = catalog();
        let contract = |lo, hi| BrandContract {
            brand: "b".into(),
            min_shelf: lo,
            max_shelf: hi,
        };
        let mut pg = Planogram::empty(fixture(), "s");
        pg.placements.push(place("a", 1, 0, 1, 1));
        pg.placements.push(place("b", 1, 1, 2, 1));
        let c = Constraint::new(ConstraintParams::BrandPlacement {
            contracts: vec![contract(1, 9)],
        });
        assert_eq!(margin(&c, &pg, &cat).unwrap(), 1.0);
        pg.placements.push(place("a", 1, 4, 1, 1));
        assert_eq!(margin(&c, &pg, &cat).unwrap(), -1.0, "gap inside a shelf run");
        let two = Constraint::new(ConstraintParams::BrandPlacement {
            contracts: vec![contract(1, 2), BrandContract { brand: "nobody".into(), min_shelf: 0, max_shelf: 0 }],
        });
        pg.placements.pop();
        pg.placements.push(place("a", 0, 0, 1, 1));
        assert_eq!(margin(&two, &pg, &cat).unwrap(), -0.5, "shelf 0 is outside the band");
    }

    #[test]
    fn empty_planogram_is_compliant() {
        let cat = heavy_catalog();
        let pg = Planogram::empty(fixture(), "s");
        let set = ConstraintSet::standard(2, vec![]);
        assert_eq!(hinge_loss(&set, &pg, &cat).unwrap(), 0.0);
        assert!(margins(&set, &pg, &cat).unwrap().iter().all(|&m| m >= 0.0));
    }

    #[test]
    fn invalid_planogram_is_an_error() {
        let mut pg = Planogram::empty(fixture(), "s");
        pg.placements.push(place("zzz", 0, 0, 1, 1));
        let c = Constraint::new(ConstraintParams::PhysicalFit);
        assert!(matches!(margin(&c, &pg, &catalog()), Err(ConstraintError::Domain(_))));
    }
}
