//! Uniform time grids and cadlag paths on them.
//!
//! All processes live on `[0, T]` sampled at `steps + 1` equally spaced
//! nodes. Step paths are right-continuous with jumps at grid nodes; linear
//! paths interpolate between nodes.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    horizon: f64,
    steps: usize,
    dt: f64,
}

impl TimeGrid {
    pub fn new(horizon: f64, steps: usize) -> Result<Self> {
        if !(horizon > 0.0) || !horizon.is_finite() {
            return Err(Error::InvalidInput(format!("horizon {horizon} must be a positive real")));
        }
        if steps == 0 {
            return Err(Error::InvalidInput("a time grid needs at least one step".into()));
        }
        let dt = horizon / steps as f64;
        Ok(Self { horizon, steps, dt })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn node(&self, j: usize) -> f64 {
        if j >= self.steps {
            self.horizon
        } else {
            j as f64 * self.dt
        }
    }

    /// Index of the last node `<= t` (clamped to the grid).
    pub fn node_floor(&self, t: f64) -> usize {
        if t <= 0.0 {
            return 0;
        }
        if t >= self.horizon {
            return self.steps;
        }
        // Nominal node times need not be representable; nudge by an epsilon
        // so querying at a node lands on that node.
        let j = (t / self.dt + 1e-9).floor() as usize;
        j.min(self.steps)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Interpolation {
    /// Right-continuous step function; the value holds until the next node.
    Step,
    /// Piecewise-linear between nodes.
    Linear,
}

/// A cadlag path on a [`TimeGrid`]: `dim` values per node, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct CadlagPath {
    grid: TimeGrid,
    dim: usize,
    values: Vec<f64>,
    interpolation: Interpolation,
}

impl CadlagPath {
    pub fn new(grid: TimeGrid, dim: usize, values: Vec<f64>, interpolation: Interpolation) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidInput("path dimension must be >= 1".into()));
        }
        if values.len() != (grid.steps() + 1) * dim {
            return Err(Error::DimensionMismatch(format!(
                "{} values for {} nodes of dimension {}",
                values.len(),
                grid.steps() + 1,
                dim
            )));
        }
        Ok(Self { grid, dim, values, interpolation })
    }

    pub fn zero(grid: TimeGrid, dim: usize, interpolation: Interpolation) -> Self {
        Self { grid, dim, values: vec![0.0; (grid.steps() + 1) * dim], interpolation }
    }

    /// Scalar path from one value per node.
    pub fn scalar(grid: TimeGrid, values: Vec<f64>, interpolation: Interpolation) -> Result<Self> {
        Self::new(grid, 1, values, interpolation)
    }

    /// Scalar path sampled from `f` at the grid nodes.
    pub fn sample_scalar(grid: TimeGrid, interpolation: Interpolation, f: impl Fn(f64) -> f64) -> Self {
        let values = (0..=grid.steps()).map(|j| f(grid.node(j))).collect();
        Self { grid, dim: 1, values, interpolation }
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn interpolation(&self) -> Interpolation {
        self.interpolation
    }

    pub fn nodes(&self) -> usize {
        self.grid.steps() + 1
    }

    pub fn node_value(&self, j: usize) -> &[f64] {
        &self.values[j * self.dim..(j + 1) * self.dim]
    }

    pub fn node_value_mut(&mut self, j: usize) -> &mut [f64] {
        &mut self.values[j * self.dim..(j + 1) * self.dim]
    }

    pub fn node_scalar(&self, j: usize) -> f64 {
        debug_assert_eq!(self.dim, 1);
        self.values[j]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Evaluates the path at `t`; step paths use right-continuity.
    pub fn eval(&self, t: f64) -> Vec<f64> {
        let j = self.grid.node_floor(t);
        match self.interpolation {
            Interpolation::Step => self.node_value(j).to_vec(),
            Interpolation::Linear => {
                if j >= self.grid.steps() {
                    return self.node_value(self.grid.steps()).to_vec();
                }
                let t0 = self.grid.node(j);
                let w = ((t - t0) / self.grid.dt()).clamp(0.0, 1.0);
                self.node_value(j)
                    .iter()
                    .zip(self.node_value(j + 1))
                    .map(|(a, b)| a + w * (b - a))
                    .collect()
            }
        }
    }

    pub fn terminal(&self) -> &[f64] {
        self.node_value(self.grid.steps())
    }

    /// Max over nodes of the Euclidean norm.
    pub fn sup_norm(&self) -> f64 {
        (0..self.nodes()).fold(0.0, |acc, j| acc.max(euclidean(self.node_value(j))))
    }

    pub fn check_same_grid(&self, other: &CadlagPath) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch("paths live on different time grids".into()));
        }
        Ok(())
    }
}

fn euclidean(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Sup over grid nodes `<= T` of the Euclidean distance between two paths on
/// the same grid.
pub fn uniform_metric(a: &CadlagPath, b: &CadlagPath, horizon: f64) -> Result<f64> {
    a.check_same_grid(b)?;
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch(format!(
            "path dimensions {} vs {}",
            a.dim(),
            b.dim()
        )));
    }
    let last = a.grid().node_floor(horizon);
    let mut sup: f64 = 0.0;
    for j in 0..=last {
        let d: f64 = a
            .node_value(j)
            .iter()
            .zip(b.node_value(j))
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt();
        sup = sup.max(d);
    }
    Ok(sup)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stream::RandomStream;
    use proptest::prelude::*;

    #[test]
    fn grid_dt_times_steps_is_horizon() {
        let g = TimeGrid::new(1.7, 13).unwrap();
        assert!((g.dt() * g.steps() as f64 - g.horizon()).abs() <= f64::EPSILON * 4.0);
    }

    #[test]
    fn node_floor_respects_exact_nodes() {
        let g = TimeGrid::new(1.0, 10).unwrap();
        assert_eq!(g.node_floor(0.0), 0);
        assert_eq!(g.node_floor(0.3), 3);
        assert_eq!(g.node_floor(0.30000000001), 3);
        assert_eq!(g.node_floor(2.0), 10);
    }

    #[test]
    fn metric_of_identical_paths_is_zero() {
        let g = TimeGrid::new(1.0, 8).unwrap();
        let a = CadlagPath::sample_scalar(g, Interpolation::Step, |t| t * t);
        assert_eq!(uniform_metric(&a, &a, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn metric_of_constant_offset_is_offset() {
        let g = TimeGrid::new(1.0, 8).unwrap();
        let a = CadlagPath::zero(g, 1, Interpolation::Step);
        let b = CadlagPath::sample_scalar(g, Interpolation::Step, |_| -2.5);
        assert_eq!(uniform_metric(&a, &b, 1.0).unwrap(), 2.5);
    }

    #[test]
    fn metric_matches_brute_force_on_brownian_samples() {
        let g = TimeGrid::new(1.0, 256).unwrap();
        let mut s = RandomStream::new(7, 0);
        let dt = g.dt();
        let mut wa = vec![0.0f64];
        let mut wb = vec![0.0f64];
        for _ in 0..256 {
            wa.push(wa.last().unwrap() + dt.sqrt() * s.standard_normal());
            wb.push(wb.last().unwrap() + dt.sqrt() * s.standard_normal());
        }
        let a = CadlagPath::scalar(g, wa.clone(), Interpolation::Step).unwrap();
        let b = CadlagPath::scalar(g, wb.clone(), Interpolation::Step).unwrap();
        let brute = wa
            .iter()
            .zip(&wb)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0f64, f64::max);
        assert_eq!(uniform_metric(&a, &b, 1.0).unwrap(), brute);
    }

    #[test]
    fn mismatched_grids_error() {
        let a = CadlagPath::zero(TimeGrid::new(1.0, 8).unwrap(), 1, Interpolation::Step);
        let b = CadlagPath::zero(TimeGrid::new(1.0, 9).unwrap(), 1, Interpolation::Step);
        assert!(uniform_metric(&a, &b, 1.0).is_err());
    }

    #[test]
    fn step_eval_is_right_continuous() {
        let g = TimeGrid::new(1.0, 4).unwrap();
        let p = CadlagPath::scalar(g, vec![0.0, 1.0, 2.0, 3.0, 4.0], Interpolation::Step).unwrap();
        assert_eq!(p.eval(0.25), vec![1.0]);
        assert_eq!(p.eval(0.2499999), vec![0.0]);
        assert_eq!(p.eval(1.0), vec![4.0]);
    }

    fn random_path(seed: u64, grid: TimeGrid) -> CadlagPath {
        let mut s = RandomStream::new(seed, 1);
        let values = (0..=grid.steps()).map(|_| s.standard_normal()).collect();
        CadlagPath::scalar(grid, values, Interpolation::Step).unwrap()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn metric_axioms_on_random_paths(sa in 0u64..500, sb in 0u64..500, sc in 0u64..500) {
            let g = TimeGrid::new(1.0, 32).unwrap();
            let a = random_path(sa, g);
            let b = random_path(sb, g);
            let c = random_path(sc, g);
            let dab = uniform_metric(&a, &b, 1.0).unwrap();
            let dba = uniform_metric(&b, &a, 1.0).unwrap();
            let dac = uniform_metric(&a, &c, 1.0).unwrap();
            let dcb = uniform_metric(&c, &b, 1.0).unwrap();
            prop_assert_eq!(dab, dba);
            prop_assert!(dab <= dac + dcb + 1e-12);
            // identity of indiscernibles at grid resolution
            if sa == sb {
                prop_assert_eq!(dab, 0.0);
            } else {
                prop_assert!(dab >= 0.0);
            }
        }
    }
}
