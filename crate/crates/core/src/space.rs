//! Discretized mark spaces and the functions living on them.
//!
//! A mark space `(U, mu)` is reduced to a finite list of cells with
//! nonnegative masses. Index elements `h` of the driving semimartingales are
//! [`GridFunction`]s: one real value per cell, constant within the cell, so
//! every integral over `U` is an exact finite sum.

use std::sync::Arc;

use crate::error::{Error, Result};

/// A finite cell decomposition of a mark space with one nonnegative mass per
/// cell.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteMeasureSpace {
    labels: Vec<String>,
    masses: Vec<f64>,
    total_mass: f64,
}

impl DiscreteMeasureSpace {
    /// Builds a space from per-cell masses; cells are auto-labelled `c0..`.
    pub fn new(masses: Vec<f64>) -> Result<Arc<Self>> {
        let labels = (0..masses.len()).map(|i| format!("c{i}")).collect();
        Self::with_labels(labels, masses)
    }

    pub fn with_labels(labels: Vec<String>, masses: Vec<f64>) -> Result<Arc<Self>> {
        if masses.is_empty() {
            return Err(Error::InvalidInput("a measure space needs at least one cell".into()));
        }
        if labels.len() != masses.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} labels for {} cells",
                labels.len(),
                masses.len()
            )));
        }
        if let Some(m) = masses.iter().find(|m| !m.is_finite() || **m < 0.0) {
            return Err(Error::InvalidInput(format!("cell mass {m} is not a finite nonnegative real")));
        }
        let total_mass = masses.iter().sum();
        Ok(Arc::new(Self { labels, masses, total_mass }))
    }

    /// Single cell carrying the whole mass; the workhorse of scalar scenarios.
    pub fn single_cell(mass: f64) -> Result<Arc<Self>> {
        Self::new(vec![mass])
    }

    pub fn len(&self) -> usize {
        self.masses.len()
    }

    pub fn is_empty(&self) -> bool {
        false // at least one cell by construction
    }

    pub fn mass(&self, cell: usize) -> f64 {
        self.masses[cell]
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn label(&self, cell: usize) -> &str {
        &self.labels[cell]
    }

    pub fn total_mass(&self) -> f64 {
        self.total_mass
    }
}

/// An index element `h`: one value per cell of its measure space.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    space: Arc<DiscreteMeasureSpace>,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(space: Arc<DiscreteMeasureSpace>, values: Vec<f64>) -> Result<Self> {
        if values.len() != space.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} values for {} cells",
                values.len(),
                space.len()
            )));
        }
        Ok(Self { space, values })
    }

    pub fn constant(space: Arc<DiscreteMeasureSpace>, c: f64) -> Self {
        let values = vec![c; space.len()];
        Self { space, values }
    }

    /// Indicator of one cell.
    pub fn indicator(space: Arc<DiscreteMeasureSpace>, cell: usize) -> Result<Self> {
        if cell >= space.len() {
            return Err(Error::InvalidInput(format!("cell {cell} out of range")));
        }
        let mut values = vec![0.0; space.len()];
        values[cell] = 1.0;
        Ok(Self { space, values })
    }

    pub fn space(&self) -> &Arc<DiscreteMeasureSpace> {
        &self.space
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, cell: usize) -> f64 {
        self.values[cell]
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `a*self + b*g`, cellwise.
    pub fn linear_combination(&self, a: f64, b: f64, g: &GridFunction) -> Result<GridFunction> {
        self.check_same_space(g)?;
        let values = self
            .values
            .iter()
            .zip(&g.values)
            .map(|(x, y)| a * x + b * y)
            .collect();
        Ok(GridFunction { space: self.space.clone(), values })
    }

    pub fn scale(&self, a: f64) -> GridFunction {
        GridFunction {
            space: self.space.clone(),
            values: self.values.iter().map(|x| a * x).collect(),
        }
    }

    /// Weighted L^2(mu) inner product.
    pub fn inner(&self, g: &GridFunction) -> Result<f64> {
        self.check_same_space(g)?;
        Ok(self
            .values
            .iter()
            .zip(&g.values)
            .zip(self.space.masses())
            .map(|((x, y), m)| x * y * m)
            .sum())
    }

    /// Weighted L^p(mu) norm.
    pub fn lp_norm(&self, p: f64) -> f64 {
        let s: f64 = self
            .values
            .iter()
            .zip(self.space.masses())
            .map(|(x, m)| x.abs().powf(p) * m)
            .sum();
        s.powf(1.0 / p)
    }

    pub fn l2_norm(&self) -> f64 {
        self.inner(self).expect("same space").sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |acc, x| acc.max(x.abs()))
    }

    pub fn check_same_space(&self, g: &GridFunction) -> Result<()> {
        if Arc::ptr_eq(&self.space, &g.space) || self.space == g.space {
            Ok(())
        } else {
            Err(Error::DimensionMismatch("grid functions live on different measure spaces".into()))
        }
    }

    pub fn check_space(&self, space: &DiscreteMeasureSpace) -> Result<()> {
        if self.space.as_ref() == space {
            Ok(())
        } else {
            Err(Error::DimensionMismatch("grid function does not live on the given measure space".into()))
        }
    }
}

/// Integral of `f` over its measure space: the sum of value times mass, in
/// cell order.
pub fn integrate_measure(f: &GridFunction, space: &DiscreteMeasureSpace) -> Result<f64> {
    f.check_space(space)?;
    Ok(f.values()
        .iter()
        .zip(space.masses())
        .map(|(v, m)| v * m)
        .sum())
}
