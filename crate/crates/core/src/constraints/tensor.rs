//! Differentiable margins over a batch of continuous grids.
//!
//! The discrete structure (which cells belong to which placement, hence
//! which products they hold) is read once from the sku channel and frozen.
//! Margins are then differentiable in the dimension-load channel; terms
//! that depend only on the frozen structure (heights, category adjacency,
//! shelf bands) are constants.

use crate::domain::codec::{channel_norms, CHANNELS, DIMENSION_LOAD};
use crate::domain::{decode_layout, Catalog, ChannelNorm, DecodedLayout, DomainError, Fixture, PlanogramTensor};
use crate::numerics::{Graph, Params, Tensor, Var};

use super::layout;
use super::margins;
use super::spec::{ConstraintParams, ConstraintSet};
use super::ConstraintError;

/// Reads the discrete layout of every sample of an `[N, C, S, K]` batch.
/// `fixtures[i]` is the fixture of sample `i`; all share `S` and `K`.
pub fn freeze_layouts(x0: &Tensor, catalog: &Catalog, fixtures: &[&Fixture]) -> Result<Vec<DecodedLayout>, ConstraintError> {
    let sample = batch_dims(x0.shape(), fixtures)?;
    x0.data()
        .chunks(sample)
        .zip(fixtures)
        .map(|(values, fixture)| decode_layout(values, catalog, fixture).map_err(Into::into))
        .collect()
}

/// Checks an `[N, C, S, K]` shape against per-sample fixtures and returns
/// the per-sample element count.
pub fn batch_dims(shape: &[usize], fixtures: &[&Fixture]) -> Result<usize, ConstraintError> {
    let mismatch = |expected: Vec<usize>| {
        Err(DomainError::ShapeMismatch {
            expected,
            got: shape.iter().product(),
        }
        .into())
    };
    let Some(first) = fixtures.first() else {
        return mismatch(vec![0]);
    };
    let expected = [fixtures.len(), CHANNELS, first.shelf_count, first.slot_columns];
    if shape != expected {
        return mismatch(expected.to_vec());
    }
    if let Some(f) = fixtures.iter().find(|f| (f.shelf_count, f.slot_columns) != (first.shelf_count, first.slot_columns)) {
        return mismatch(vec![CHANNELS, f.shelf_count, f.slot_columns]);
    }
    Ok(expected[1..].iter().product())
}

struct Batch<'a, 'g> {
    g: &'a Graph<'g>,
    n: usize,
    layouts: &'a [DecodedLayout],
    catalog: &'a Catalog,
    fixtures: &'a [&'a Fixture],
    fill: Var,
}

fn raw_channel(g: &Graph, x0: Var, channel: usize, norm: ChannelNorm, flat: usize) -> Result<Var, ConstraintError> {
    let v = g.slice(x0, 1, channel, 1)?;
    let v = g.reshape(v, &[flat])?;
    let v = g.offset(v, 1.0)?;
    let v = g.scale(v, norm.raw_per_unit())?;
    Ok(g.offset(v, norm.lo)?)
}

fn vector(values: Vec<f64>) -> Result<Tensor, ConstraintError> {
    Ok(Tensor::new(vec![values.len()], values)?)
}

impl Batch<'_, '_> {
    fn plane(&self) -> usize {
        self.fixtures[0].cell_count()
    }

    fn shelves(&self) -> usize {
        self.fixtures[0].shelf_count
    }

    fn samples(&self) -> impl Iterator<Item = (usize, &DecodedLayout, &Fixture)> {
        self.layouts.iter().zip(self.fixtures).enumerate().map(|(i, (l, f))| (i, l, *f))
    }

    fn constant(&self, per_sample: impl Fn(&DecodedLayout, &Fixture) -> f64) -> Result<Var, ConstraintError> {
        Ok(self.g.constant(vector(self.samples().map(|(_, l, f)| per_sample(l, f)).collect())?))
    }

    fn physical_fit(&self) -> Result<Var, ConstraintError> {
        let g = self.g;
        let plane = self.plane();
        let s = self.shelves();
        let mut run_of_cell = Vec::with_capacity(self.n * plane);
        let mut run_sample = Vec::new();
        let mut heights = Vec::with_capacity(self.n * s);
        for (i, layout, fixture) in self.samples() {
            let offset = run_sample.len();
            run_of_cell.extend(layout.cell_owner.iter().map(|o| o.map(|r| offset + r)));
            run_sample.extend(std::iter::repeat_n(Some(i), layout.placements.len()));
            heights.extend(layout::height_terms(layout, self.catalog, fixture));
        }
        let heights_var = g.constant(vector(heights)?);
        let height_sample: Vec<Option<usize>> = (0..self.n).flat_map(|i| std::iter::repeat_n(Some(i), s)).collect();
        let runs = run_sample.len();
        if runs == 0 {
            return Ok(g.segment_min(heights_var, height_sample, self.n)?);
        }
        let free = g.offset(g.scale(self.fill, -1.0)?, 1.0)?;
        let slack = g.segment_sum(free, run_of_cell, runs)?;
        let terms = g.concat(&[slack, heights_var], 0)?;
        run_sample.extend(height_sample);
        Ok(g.segment_min(terms, run_sample, self.n)?)
    }

    fn weight_limit(&self) -> Result<Var, ConstraintError> {
        let g = self.g;
        let (s, k) = (self.shelves(), self.fixtures[0].slot_columns);
        let mut coef = Vec::with_capacity(self.n * s * k);
        let mut shelf_of_cell = Vec::with_capacity(self.n * s * k);
        let mut neg_inv_cap = Vec::with_capacity(self.n * s);
        for (i, layout, fixture) in self.samples() {
            let cw = fixture.column_width();
            neg_inv_cap.extend(fixture.per_shelf.iter().map(|sh| -1.0 / sh.weight_capacity_kg));
            for (cell, owner) in layout.cell_owner.iter().enumerate() {
                match owner {
                    Some(r) => {
                        let p = self.catalog.product(layout.products[*r]);
                        coef.push(cw * p.weight_kg / p.width_cm);
                        shelf_of_cell.push(Some(i * s + cell / k));
                    }
                    None => {
                        coef.push(0.0);
                        shelf_of_cell.push(None);
                    }
                }
            }
        }
        let weighted = g.mul(self.fill, g.constant(vector(coef)?))?;
        let loads = g.segment_sum(weighted, shelf_of_cell, self.n * s)?;
        let slack = g.offset(g.mul(loads, g.constant(vector(neg_inv_cap)?))?, 1.0)?;
        let sample: Vec<Option<usize>> = (0..self.n).flat_map(|i| std::iter::repeat_n(Some(i), s)).collect();
        Ok(g.segment_min(slack, sample, self.n)?)
    }
}

/// One `[N]` margin variable per constraint of the set.
pub fn margins_graph(
    g: &Graph,
    x0: Var,
    layouts: &[DecodedLayout],
    fixtures: &[&Fixture],
    constraints: &ConstraintSet,
    catalog: &Catalog,
) -> Result<Vec<Var>, ConstraintError> {
    batch_dims(&g.shape(x0), fixtures)?;
    let n = fixtures.len();
    if layouts.len() != n {
        return Err(DomainError::ShapeMismatch {
            expected: vec![n],
            got: layouts.len(),
        }
        .into());
    }
    // The fill normalization does not depend on the fixture.
    let norms = channel_norms(catalog, fixtures[0]);
    let flat = n * fixtures[0].cell_count();
    let batch = Batch {
        g,
        n,
        layouts,
        catalog,
        fixtures,
        fill: raw_channel(g, x0, DIMENSION_LOAD, norms[DIMENSION_LOAD], flat)?,
    };
    constraints
        .iter()
        .map(|c| match &c.params {
            ConstraintParams::PhysicalFit => batch.physical_fit(),
            ConstraintParams::WeightLimit => batch.weight_limit(),
            ConstraintParams::CategoryGrouping { .. } => {
                batch.constant(|l, f| margins::layout_margin(&c.params, l, catalog, f))
            }
            ConstraintParams::RegulatoryAge { min_shelf_index } => {
                batch.constant(|l, f| layout::age_margin(l, catalog, f.shelf_count, *min_shelf_index))
            }
            ConstraintParams::BrandPlacement { contracts } => {
                batch.constant(|l, f| layout::brand_margin(l, catalog, f, contracts))
            }
        })
        .collect()
}

/// Per-sample hinge penalty `[N]`.
pub fn hinge_graph(
    g: &Graph,
    x0: Var,
    layouts: &[DecodedLayout],
    fixtures: &[&Fixture],
    constraints: &ConstraintSet,
    catalog: &Catalog,
) -> Result<Var, ConstraintError> {
    let margins = margins_graph(g, x0, layouts, fixtures, constraints, catalog)?;
    let mut total = g.constant(Tensor::zeros(&[layouts.len()]));
    for (c, m) in constraints.iter().zip(margins) {
        let violation = g.relu(g.scale(m, -1.0)?)?;
        total = g.add(total, g.scale(violation, c.weight)?)?;
    }
    Ok(total)
}

fn single(tensor: &PlanogramTensor, fixture: &Fixture) -> Result<Tensor, ConstraintError> {
    let expected = [CHANNELS, fixture.shelf_count, fixture.slot_columns];
    if tensor.grid.shape() != expected {
        return Err(DomainError::ShapeMismatch {
            expected: expected.to_vec(),
            got: tensor.grid.len(),
        }
        .into());
    }
    let mut shape = vec![1];
    shape.extend_from_slice(&expected);
    Ok(tensor.grid.reshape(&shape)?)
}

/// Margins of one encoded grid through the differentiable path.
pub fn margins_tensor(
    tensor: &PlanogramTensor,
    constraints: &ConstraintSet,
    catalog: &Catalog,
    fixture: &Fixture,
) -> Result<Vec<f64>, ConstraintError> {
    let x = single(tensor, fixture)?;
    let layouts = freeze_layouts(&x, catalog, &[fixture])?;
    let params = Params::new();
    let g = Graph::new(&params);
    let x0 = g.constant(x);
    let margins = margins_graph(&g, x0, &layouts, &[fixture], constraints, catalog)?;
    Ok(margins.into_iter().map(|m| g.value(m).data()[0]).collect())
}

/// Hinge penalty of one grid through the differentiable path.
pub fn hinge_loss_tensor(
    tensor: &PlanogramTensor,
    constraints: &ConstraintSet,
    catalog: &Catalog,
    fixture: &Fixture,
) -> Result<f64, ConstraintError> {
    let margins = margins_tensor(tensor, constraints, catalog, fixture)?;
    Ok(super::hinge_from_margins(constraints, &margins))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constraints::{hinge_loss, margins, BrandContract};
    use crate::domain::planogram::tests::{catalog, fixture};
    use crate::domain::{encode, Placement, Planogram};
    use crate::numerics::grad_check;

    fn planogram() -> Planogram {
        let mut pg = Planogram::empty(fixture(), "s");
        for (sku, shelf, start, span, facings) in [("a", 0, 0, 3, 2), ("b", 0, 3, 2, 1), ("a", 2, 5, 5, 5)] {
            pg.placements.push(Placement {
                sku: sku.into(),
                shelf_index: shelf,
                start_column: start,
                span_columns: span,
                facings,
            });
        }
        pg
    }

    fn set() -> ConstraintSet {
        let contracts = vec![BrandContract {
            brand: "b".into(),
            min_shelf: 1,
            max_shelf: 2,
        }];
        ConstraintSet::standard(1, contracts)
    }

    #[test]
    fn agrees_with_planogram_path_on_encoded_grids() {
        let (cat, pg) = (catalog(), planogram());
        let t = encode(&pg, &cat).unwrap();
        let a = margins(&set(), &pg, &cat).unwrap();
        let b = margins_tensor(&t, &set(), &cat, &fixture()).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-9, "{a:?} vs {b:?}");
        }
        let ha = hinge_loss(&set(), &pg, &cat).unwrap();
        let hb = hinge_loss_tensor(&t, &set(), &cat, &fixture()).unwrap();
        assert!(ha > 0.0);
        assert!((ha - hb).abs() < 1e-9);
    }

    #[test]
    fn hinge_gradient_matches_finite_differences() {
        let (cat, fx) = (catalog(), fixture());
        let grid = encode(&planogram(), &cat).unwrap().grid;
        // Overfill the load channel slightly so physical-fit is active but
        // stay away from kinks.
        let bumped: Vec<f64> = grid
            .data()
            .iter()
            .enumerate()
            .map(|(i, &v)| if (30..60).contains(&i) && v > -1.0 { v + 0.3 + 0.01 * i as f64 } else { v })
            .collect();
        let x = Tensor::new(vec![1, CHANNELS, 3, 10], bumped).unwrap();
        let layouts = freeze_layouts(&x, &cat, &[&fx]).unwrap();
        let mut params = Params::new();
        params.insert("x", x);
        let report = grad_check(
            |g| {
                let x0 = g.param("x")?;
                let h = hinge_graph(g, x0, &layouts, &[&fx], &set(), &cat).map_err(|e| match e {
                    ConstraintError::Numerics(n) => n,
                    other => panic!("{other}"),
                })?;
                g.sum(h)
            },
            &params,
            1e-6,
        )
        .unwrap();
        assert!(report < 1e-6, "{report}");
    }

    #[test]
    fn wrong_shape_is_rejected() {
        let x = Tensor::zeros(&[1, CHANNELS, 2, 10]);
        assert!(freeze_layouts(&x, &catalog(), &[&fixture()]).is_err());
    }
}
