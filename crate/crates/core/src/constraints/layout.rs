//! Discrete structure shared by the planogram and tensor paths.

use crate::domain::{Catalog, DecodedLayout, Fixture, Planogram};

use super::spec::BrandContract;
use super::ConstraintError;

/// Cell-level layout of a structurally valid planogram.
pub(crate) fn from_planogram(planogram: &Planogram, catalog: &Catalog) -> Result<DecodedLayout, ConstraintError> {
    planogram.check_structure(catalog)?;
    let products = planogram
        .placements
        .iter()
        .map(|p| catalog.index_of(&p.sku).expect("structure checked"))
        .collect();
    Ok(DecodedLayout {
        placements: planogram.placements.clone(),
        products,
        cell_owner: planogram.cell_owners(),
    })
}

pub(crate) fn cell_product(layout: &DecodedLayout, cell: usize) -> Option<usize> {
    layout.cell_owner[cell].map(|i| layout.products[i])
}

/// `(clearance − tallest)/clearance` for each shelf; 1 for empty shelves.
pub(crate) fn height_terms(layout: &DecodedLayout, catalog: &Catalog, fixture: &Fixture) -> Vec<f64> {
    let mut tallest = vec![0.0_f64; fixture.shelf_count];
    for (p, &idx) in layout.placements.iter().zip(&layout.products) {
        tallest[p.shelf_index] = tallest[p.shelf_index].max(catalog.product(idx).height_cm);
    }
    fixture
        .per_shelf
        .iter()
        .zip(tallest)
        .map(|(shelf, h)| (shelf.clearance_height_cm - h) / shelf.clearance_height_cm)
        .collect()
}

/// Minimum of `(shelf − min_shelf)/S` over age-restricted placements, 1 if none.
pub(crate) fn age_margin(layout: &DecodedLayout, catalog: &Catalog, shelves: usize, min_shelf: usize) -> f64 {
    layout
        .placements
        .iter()
        .zip(&layout.products)
        .filter(|(_, &idx)| catalog.product(idx).age_restricted)
        .map(|(p, _)| (p.shelf_index as f64 - min_shelf as f64) / shelves as f64)
        .fold(1.0, f64::min)
}

/// Whether a brand's cells sit inside its band as one contiguous block.
pub(crate) fn contract_holds(layout: &DecodedLayout, catalog: &Catalog, fixture: &Fixture, contract: &BrandContract) -> bool {
    let k = fixture.slot_columns;
    let top = fixture.shelf_count - 1;
    let mut rows: Vec<(usize, usize, usize, usize)> = Vec::new();
    for shelf in 0..fixture.shelf_count {
        let cols: Vec<usize> = (0..k)
            .filter(|&c| cell_product(layout, shelf * k + c).is_some_and(|i| catalog.product(i).brand == contract.brand))
            .collect();
        if let (Some(&first), Some(&last)) = (cols.first(), cols.last()) {
            rows.push((shelf, first, last, cols.len()));
        }
    }
    if rows.is_empty() {
        return true;
    }
    let band = contract.min_shelf..=contract.max_shelf.min(top);
    let in_band = rows.iter().all(|&(s, ..)| band.contains(&s));
    let shelves_contiguous = rows.windows(2).all(|w| w[1].0 == w[0].0 + 1);
    let runs_contiguous = rows.iter().all(|&(_, first, last, n)| last - first + 1 == n);
    in_band && shelves_contiguous && runs_contiguous
}

/// `+1` when every contract holds, else minus the violated fraction.
pub(crate) fn brand_margin(layout: &DecodedLayout, catalog: &Catalog, fixture: &Fixture, contracts: &[BrandContract]) -> f64 {
    let violated = contracts
        .iter()
        .filter(|c| !contract_holds(layout, catalog, fixture, c))
        .count();
    if violated == 0 {
        1.0
    } else {
        -(violated as f64) / contracts.len() as f64
    }
}

/// Horizontally adjacent occupied cell pairs `(left, right)` on the grid.
pub(crate) fn adjacent_pairs(layout: &DecodedLayout, fixture: &Fixture) -> Vec<(usize, usize)> {
    let k = fixture.slot_columns;
    let mut out = Vec::new();
    for shelf in 0..fixture.shelf_count {
        for c in 0..k.saturating_sub(1) {
            let (a, b) = (shelf * k + c, shelf * k + c + 1);
            if layout.cell_owner[a].is_some() && layout.cell_owner[b].is_some() {
                out.push((a, b));
            }
        }
    }
    out
}
