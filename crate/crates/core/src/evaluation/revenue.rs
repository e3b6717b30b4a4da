use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::constraints::ConstraintError;
use crate::domain::codec::{channel_norms, DIMENSION_LOAD};
use crate::domain::{Catalog, DecodedLayout, Fixture, Planogram};
use crate::numerics::{Graph, Tensor, Var};

use super::EvaluationError;

/// Linear revenue stand-in: `facings × margin × demand(category) × position(shelf)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RevenueModel {
    /// Per-category demand rate; categories not listed use `default_demand`.
    pub demand_proxy: BTreeMap<String, f64>,
    pub default_demand: f64,
    /// Height, as a fraction of the fixture, that defines eye level.
    pub eye_level_fraction: f64,
    pub eye_level_multiplier: f64,
    pub base_multiplier: f64,
    /// Explicit per-shelf multipliers (bottom first); overrides eye level.
    pub position_multipliers: Option<Vec<f64>>,
}

impl Default for RevenueModel {
    fn default() -> Self {
        Self {
            demand_proxy: BTreeMap::new(),
            default_demand: 1.0,
            eye_level_fraction: 0.6,
            eye_level_multiplier: 1.5,
            base_multiplier: 1.0,
            position_multipliers: None,
        }
    }
}

impl RevenueModel {
    pub fn validate(&self) -> Result<(), EvaluationError> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        let explicit_ok = self
            .position_multipliers
            .as_ref()
            .is_none_or(|m| m.iter().all(|&v| positive(v)));
        if !(positive(self.eye_level_multiplier) && positive(self.base_multiplier) && explicit_ok) {
            return Err(EvaluationError::InvalidModel("position multipliers must be positive".into()));
        }
        if !(self.default_demand.is_finite() && self.demand_proxy.values().all(|v| v.is_finite())) {
            return Err(EvaluationError::InvalidModel("demand proxies must be finite".into()));
        }
        Ok(())
    }

    pub fn demand(&self, category: &str) -> f64 {
        match self.demand_proxy.get(category) {
            Some(&d) => d,
            None => {
                if !self.demand_proxy.is_empty() {
                    tracing::debug!(category, "no demand proxy, using default");
                }
                self.default_demand
            }
        }
    }

    /// Multiplier for each shelf of `fixture`, bottom first.
    pub fn multipliers(&self, fixture: &Fixture) -> Vec<f64> {
        if let Some(m) = &self.position_multipliers {
            return (0..fixture.shelf_count)
                .map(|s| m.get(s).copied().unwrap_or(self.base_multiplier))
                .collect();
        }
        let eye = self.eye_level_fraction * fixture.height_cm;
        let bottoms = fixture.shelf_bottoms();
        let distance = |s: usize| {
            let lo = bottoms[s];
            let hi = lo + fixture.per_shelf[s].clearance_height_cm;
            if eye < lo {
                lo - eye
            } else if eye >= hi {
                eye - hi
            } else {
                0.0
            }
        };
        let eye_shelf = (0..fixture.shelf_count)
            .min_by(|&a, &b| distance(a).total_cmp(&distance(b)))
            .unwrap_or(0);
        (0..fixture.shelf_count)
            .map(|s| {
                if s == eye_shelf {
                    self.eye_level_multiplier
                } else {
                    self.base_multiplier
                }
            })
            .collect()
    }

    fn unit_value(&self, catalog: &Catalog, product: usize) -> f64 {
        let p = catalog.product(product);
        p.margin * self.demand(&p.category)
    }
}

/// Expected revenue of a structurally valid planogram.
pub fn expected_revenue(planogram: &Planogram, catalog: &Catalog, model: &RevenueModel) -> Result<f64, EvaluationError> {
    planogram.check_structure(catalog)?;
    let mult = model.multipliers(&planogram.fixture);
    Ok(planogram
        .placements
        .iter()
        .map(|p| {
            let idx = catalog.index_of(&p.sku).expect("structure checked");
            p.facings as f64 * model.unit_value(catalog, idx) * mult[p.shelf_index]
        })
        .sum())
}

/// Revenue bound used to make the revenue loss dimensionless: every column
/// of every shelf filled with the densest-value product in the catalog.
pub fn revenue_scale(fixture: &Fixture, catalog: &Catalog, model: &RevenueModel) -> f64 {
    let density = (0..catalog.len())
        .map(|i| model.unit_value(catalog, i).max(0.0) / catalog.product(i).width_cm)
        .fold(0.0, f64::max);
    let bound: f64 = model.multipliers(fixture).iter().sum::<f64>() * fixture.width_cm * density;
    if bound > 0.0 {
        bound
    } else {
        1.0
    }
}

/// Per-sample revenue `[N]` of an `[N, C, S, K]` batch read through the
/// dimension-load channel; facings per cell are `fill × column width / width`.
pub fn revenue_graph(
    g: &Graph,
    x0: Var,
    layouts: &[DecodedLayout],
    fixtures: &[&Fixture],
    catalog: &Catalog,
    model: &RevenueModel,
) -> Result<Var, ConstraintError> {
    crate::constraints::check_batch_shape(&g.shape(x0), fixtures)?;
    let n = fixtures.len();
    let plane = fixtures[0].cell_count();
    let norm = channel_norms(catalog, fixtures[0])[DIMENSION_LOAD];
    let fill = g.slice(x0, 1, DIMENSION_LOAD, 1)?;
    let fill = g.reshape(fill, &[n * plane])?;
    let fill = g.offset(g.scale(g.offset(fill, 1.0)?, norm.raw_per_unit())?, norm.lo)?;
    let k = fixtures[0].slot_columns;
    let mut coef = Vec::with_capacity(n * plane);
    let mut sample = Vec::with_capacity(n * plane);
    for (i, (layout, fixture)) in layouts.iter().zip(fixtures).enumerate() {
        let mult = model.multipliers(fixture);
        let cw = fixture.column_width();
        for (cell, owner) in layout.cell_owner.iter().enumerate() {
            match owner {
                Some(r) => {
                    let idx = layout.products[*r];
                    let width = catalog.product(idx).width_cm;
                    coef.push(cw / width * model.unit_value(catalog, idx) * mult[cell / k]);
                    sample.push(Some(i));
                }
                None => {
                    coef.push(0.0);
                    sample.push(None);
                }
            }
        }
    }
    let value = g.mul(fill, g.constant(Tensor::new(vec![coef.len()], coef).map_err(ConstraintError::from)?))?;
    Ok(g.segment_sum(value, sample, n)?)
}
