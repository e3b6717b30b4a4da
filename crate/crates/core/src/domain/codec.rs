//! Mapping between discrete planograms and the `C×S×K` channel grid.
//!
//! Channel layout (all values normalized to `[-1, 1]`, raw zero → −1):
//!
//! | index | channel        | raw value per cell                               |
//! |-------|----------------|--------------------------------------------------|
//! | 0     | sku            | product embedding code, −1 when empty            |
//! | 1     | dimension-load | fraction of the span width the facings occupy    |
//! | 2     | weight-load    | kg per column: `weight × facings / span`         |
//! | 3     | category       | category embedding code, −1 when empty           |
//! | 4     | price-level    | product shelf price                              |

use serde::{Deserialize, Serialize};

use super::{Catalog, DomainError, Fixture, Placement, Planogram};
use crate::numerics::Tensor;

pub const CHANNELS: usize = 5;
pub const SKU: usize = 0;
pub const DIMENSION_LOAD: usize = 1;
pub const WEIGHT_LOAD: usize = 2;
pub const CATEGORY: usize = 3;
pub const PRICE_LEVEL: usize = 4;

/// Slack allowed around `[-1, 1]` for tensors that decode cleanly.
pub const RANGE_SLACK: f64 = 0.05;

/// Affine map between raw channel units `[lo, hi]` and `[-1, 1]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelNorm {
    pub lo: f64,
    pub hi: f64,
}

impl ChannelNorm {
    pub const IDENTITY: ChannelNorm = ChannelNorm { lo: -1.0, hi: 1.0 };

    pub fn normalize(&self, raw: f64) -> f64 {
        2.0 * (raw - self.lo) / (self.hi - self.lo) - 1.0
    }

    pub fn denormalize(&self, value: f64) -> f64 {
        self.lo + (value + 1.0) * (self.hi - self.lo) / 2.0
    }

    /// Raw units per normalized unit.
    pub fn raw_per_unit(&self) -> f64 {
        (self.hi - self.lo) / 2.0
    }
}

/// Per-channel normalization for one (catalog, fixture) pair.
pub fn channel_norms(catalog: &Catalog, fixture: &Fixture) -> [ChannelNorm; CHANNELS] {
    let cw = fixture.column_width();
    let max_weight_per_column = catalog
        .products()
        .iter()
        .map(|p| p.weight_kg * cw / p.width_cm)
        .fold(0.0, f64::max);
    let max_price = catalog.products().iter().map(|p| p.price).fold(0.0, f64::max);
    [
        ChannelNorm::IDENTITY,
        ChannelNorm { lo: 0.0, hi: 1.0 },
        ChannelNorm {
            lo: 0.0,
            hi: max_weight_per_column,
        },
        ChannelNorm::IDENTITY,
        ChannelNorm {
            lo: 0.0,
            hi: if max_price > 0.0 { max_price } else { 1.0 },
        },
    ]
}

/// Continuous encoding of a planogram.
#[derive(Clone, Debug, PartialEq)]
pub struct PlanogramTensor {
    /// `[C, S, K]` grid.
    pub grid: Tensor,
    pub norms: [ChannelNorm; CHANNELS],
    pub store_id: String,
}

impl PlanogramTensor {
    pub fn shelves(&self) -> usize {
        self.grid.shape()[1]
    }

    pub fn columns(&self) -> usize {
        self.grid.shape()[2]
    }

    pub fn channel(&self, c: usize) -> &[f64] {
        let plane = self.shelves() * self.columns();
        &self.grid.data()[c * plane..(c + 1) * plane]
    }
}

/// Encodes a structurally valid planogram.
pub fn encode(planogram: &Planogram, catalog: &Catalog) -> Result<PlanogramTensor, DomainError> {
    planogram.check_structure(catalog)?;
    let fx = &planogram.fixture;
    let norms = channel_norms(catalog, fx);
    let (s, k) = (fx.shelf_count, fx.slot_columns);
    let plane = s * k;
    let mut raw = vec![0.0; CHANNELS * plane];
    for c in [SKU, CATEGORY] {
        raw[c * plane..(c + 1) * plane].fill(-1.0);
    }
    let cw = fx.column_width();
    for p in &planogram.placements {
        let idx = catalog.index_of(&p.sku).expect("structure checked");
        let product = catalog.product(idx);
        let category = catalog.category_index(&product.category).expect("catalog category");
        let fill = p.facings as f64 * product.width_cm / (p.span_columns as f64 * cw);
        let weight = product.weight_kg * p.facings as f64 / p.span_columns as f64;
        for col in p.columns() {
            let cell = p.shelf_index * k + col;
            raw[SKU * plane + cell] = catalog.code(idx);
            raw[DIMENSION_LOAD * plane + cell] = fill;
            raw[WEIGHT_LOAD * plane + cell] = weight;
            raw[CATEGORY * plane + cell] = catalog.category_code(category);
            raw[PRICE_LEVEL * plane + cell] = product.price;
        }
    }
    let data = raw
        .chunks(plane)
        .zip(norms.iter())
        .flat_map(|(chunk, norm)| chunk.iter().map(move |&v| norm.normalize(v)))
        .collect();
    Ok(PlanogramTensor {
        grid: Tensor::new(vec![CHANNELS, s, k], data)?,
        norms,
        store_id: planogram.store_id.clone(),
    })
}

/// Cell-level reading of a grid: which catalog product each cell decodes
/// to and how cells group into placements.
#[derive(Clone, Debug, PartialEq)]
pub struct DecodedLayout {
    pub placements: Vec<Placement>,
    /// Catalog index of each decoded placement.
    pub products: Vec<usize>,
    /// Owning placement of each `(shelf, column)` cell, row-major.
    pub cell_owner: Vec<Option<usize>>,
}

/// Segments one `[C, S, K]` grid (flat, normalized values) into placements.
///
/// Each maximal run of cells sharing the same nearest non-empty product code
/// becomes one placement; runs too narrow for a single facing are dropped.
/// The facing count is read from the mean dimension-load over the run and
/// clamped to what physically fits, so the output always satisfies the grid
/// invariants.
pub fn decode_layout(values: &[f64], catalog: &Catalog, fixture: &Fixture) -> Result<DecodedLayout, DomainError> {
    let (s, k) = (fixture.shelf_count, fixture.slot_columns);
    let plane = s * k;
    if values.len() != CHANNELS * plane {
        return Err(DomainError::ShapeMismatch {
            expected: vec![CHANNELS, s, k],
            got: values.len(),
        });
    }
    let fill_norm = channel_norms(catalog, fixture)[DIMENSION_LOAD];
    let cw = fixture.column_width();
    let nearest: Vec<Option<usize>> = values[..plane].iter().map(|&v| catalog.nearest_product(v)).collect();
    let mut layout = DecodedLayout {
        placements: Vec::new(),
        products: Vec::new(),
        cell_owner: vec![None; plane],
    };
    for shelf in 0..s {
        let row = shelf * k;
        let mut col = 0;
        while col < k {
            let Some(product_idx) = nearest[row + col] else {
                col += 1;
                continue;
            };
            let mut end = col + 1;
            while end < k && nearest[row + end] == Some(product_idx) {
                end += 1;
            }
            let span = end - col;
            let product = catalog.product(product_idx);
            let max_facings = fixture.max_facings(product.width_cm, span);
            if max_facings >= 1 {
                let mean_fill: f64 = (col..end)
                    .map(|c| fill_norm.denormalize(values[DIMENSION_LOAD * plane + row + c]))
                    .sum::<f64>()
                    / span as f64;
                let estimate = (mean_fill * span as f64 * cw / product.width_cm).round();
                let facings = estimate.clamp(1.0, max_facings as f64) as u32;
                let id = layout.placements.len();
                layout.placements.push(Placement {
                    sku: product.sku.clone(),
                    shelf_index: shelf,
                    start_column: col,
                    span_columns: span,
                    facings,
                });
                layout.products.push(product_idx);
                for c in col..end {
                    layout.cell_owner[row + c] = Some(id);
                }
            }
            col = end;
        }
    }
    Ok(layout)
}

/// Decodes a grid into a planogram on `fixture`. Total on finite input.
pub fn decode(tensor: &PlanogramTensor, catalog: &Catalog, fixture: &Fixture) -> Result<Planogram, DomainError> {
    let expected = [CHANNELS, fixture.shelf_count, fixture.slot_columns];
    if tensor.grid.shape() != expected {
        return Err(DomainError::ShapeMismatch {
            expected: expected.to_vec(),
            got: tensor.grid.len(),
        });
    }
    let layout = decode_layout(tensor.grid.data(), catalog, fixture)?;
    Ok(Planogram {
        fixture: fixture.clone(),
        placements: layout.placements,
        store_id: tensor.store_id.clone(),
    })
}
