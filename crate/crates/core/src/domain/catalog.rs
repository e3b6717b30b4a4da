use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::DomainError;

/// One catalog entry.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Product {
    pub sku: String,
    pub width_cm: f64,
    pub height_cm: f64,
    pub depth_cm: f64,
    pub weight_kg: f64,
    pub category: String,
    pub brand: String,
    pub price: f64,
    pub margin: f64,
    pub age_restricted: bool,
}

impl Product {
    fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        for (field, v) in [
            ("width_cm", self.width_cm),
            ("height_cm", self.height_cm),
            ("depth_cm", self.depth_cm),
            ("weight_kg", self.weight_kg),
        ] {
            if !(v.is_finite() && v > 0.0) {
                out.push(format!("{field} must be positive, got {v}"));
            }
        }
        if !(self.price.is_finite() && self.price >= 0.0) {
            out.push(format!("price must be nonnegative, got {}", self.price));
        }
        if !self.margin.is_finite() {
            out.push("margin must be finite".into());
        }
        if self.sku.trim().is_empty() {
            out.push("sku must not be empty".into());
        }
        out
    }
}

/// Validated product catalog.
///
/// Products are held sorted by `(category, sku)`; that order defines the
/// scalar embedding codes used by the sku channel of a planogram tensor.
#[derive(Clone, Debug, PartialEq)]
pub struct Catalog {
    products: Vec<Product>,
    index: HashMap<String, usize>,
    categories: Vec<String>,
}

impl Catalog {
    pub fn new(mut products: Vec<Product>) -> Result<Self, DomainError> {
        let mut offending = Vec::new();
        for p in &products {
            let problems = p.problems();
            if !problems.is_empty() {
                offending.push(format!("{}: {}", p.sku, problems.join("; ")));
            }
        }
        if !offending.is_empty() {
            return Err(DomainError::InvalidRecords(offending));
        }
        if products.is_empty() {
            return Err(DomainError::InvalidRecords(vec!["catalog is empty".into()]));
        }
        products.sort_by(|a, b| (&a.category, &a.sku).cmp(&(&b.category, &b.sku)));
        let mut index = HashMap::with_capacity(products.len());
        for (i, p) in products.iter().enumerate() {
            if index.insert(p.sku.clone(), i).is_some() {
                return Err(DomainError::DuplicateSku(p.sku.clone()));
            }
        }
        let mut categories: Vec<String> = products.iter().map(|p| p.category.clone()).collect();
        categories.dedup();
        Ok(Self {
            products,
            index,
            categories,
        })
    }

    pub fn products(&self) -> &[Product] {
        &self.products
    }

    pub fn len(&self) -> usize {
        self.products.len()
    }

    pub fn is_empty(&self) -> bool {
        self.products.is_empty()
    }

    pub fn index_of(&self, sku: &str) -> Option<usize> {
        self.index.get(sku).copied()
    }

    pub fn get(&self, sku: &str) -> Option<&Product> {
        self.index_of(sku).map(|i| &self.products[i])
    }

    pub fn product(&self, index: usize) -> &Product {
        &self.products[index]
    }

    /// Sorted distinct category names.
    pub fn categories(&self) -> &[String] {
        &self.categories
    }

    pub fn category_index(&self, category: &str) -> Option<usize> {
        self.categories.binary_search_by(|c| c.as_str().cmp(category)).ok()
    }

    /// Sku-channel code of the product at `index`: evenly spaced in (−1, 1].
    pub fn code(&self, index: usize) -> f64 {
        spaced_code(index, self.products.len())
    }

    /// Distance between neighbouring sku codes.
    pub fn code_spacing(&self) -> f64 {
        2.0 / self.products.len() as f64
    }

    pub fn category_code(&self, category_index: usize) -> f64 {
        spaced_code(category_index, self.categories.len())
    }

    pub fn category_code_spacing(&self) -> f64 {
        2.0 / self.categories.len() as f64
    }

    /// Product whose code is nearest to `value`, or `None` when the empty
    /// code −1 is nearest. Ties go to the lower code.
    pub fn nearest_product(&self, value: f64) -> Option<usize> {
        let n = self.products.len();
        let position = (value + 1.0) * n as f64 / 2.0;
        let slot = (position - 0.5).ceil().clamp(0.0, n as f64) as usize;
        slot.checked_sub(1)
    }
}

fn spaced_code(index: usize, count: usize) -> f64 {
    -1.0 + 2.0 * (index + 1) as f64 / count as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn product(sku: &str, category: &str) -> Product {
        Product {
            sku: sku.into(),
            width_cm: 10.0,
            height_cm: 20.0,
            depth_cm: 8.0,
            weight_kg: 1.0,
            category: category.into(),
            brand: "acme".into(),
            price: 3.0,
            margin: 1.0,
            age_restricted: false,
        }
    }

    #[test]
    fn sorted_by_category_then_sku() {
        let c = Catalog::new(vec![product("b", "z"), product("a", "z"), product("c", "a")]).unwrap();
        let skus: Vec<_> = c.products().iter().map(|p| p.sku.as_str()).collect();
        assert_eq!(skus, ["c", "a", "b"]);
        assert_eq!(c.categories(), ["a", "z"]);
    }

    #[test]
    fn duplicate_sku_names_the_sku() {
        let err = Catalog::new(vec![product("dup", "x"), product("dup", "y")]).unwrap_err();
        assert!(err.to_string().contains("dup"));
    }

    #[test]
    fn zero_weight_is_rejected() {
        let mut p = product("w0", "x");
        p.weight_kg = 0.0;
        let err = Catalog::new(vec![p]).unwrap_err();
        assert!(matches!(&err, DomainError::InvalidRecords(r) if r[0].contains("w0") && r[0].contains("weight_kg")));
    }

    #[test]
    fn nearest_code_and_ties() {
        let c = Catalog::new((0..4).map(|i| product(&format!("s{i}"), "x")).collect()).unwrap();
        // codes: -0.5, 0, 0.5, 1.0 ; empty -1
        assert_eq!(c.nearest_product(-1.0), None);
        assert_eq!(c.nearest_product(-0.76), None);
        assert_eq!(c.nearest_product(-0.74), Some(0));
        assert_eq!(c.nearest_product(-0.75), None, "tie breaks toward the lower (empty) code");
        assert_eq!(c.nearest_product(-0.7), Some(0));
        assert_eq!(c.nearest_product(0.25), Some(1), "tie breaks toward the lower code");
        assert_eq!(c.nearest_product(7.0), Some(3));
        assert_eq!(c.nearest_product(-9.0), None);
        for i in 0..4 {
            assert_eq!(c.nearest_product(c.code(i)), Some(i));
        }
    }
}
