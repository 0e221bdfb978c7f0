//! Stochastic and pathwise integrals on the grid.
//!
//! Everything uses left-endpoint (predictable) evaluation: the integrand is
//! frozen at the step's left node before the driver's increment over the
//! step is applied.

use crate::basis::{coefficient_path, PartitionOfUnity, PseudoBasis};
use crate::drivers::Driver;
use crate::error::{Error, Result};
use crate::grid::{CadlagPath, Interpolation};
use crate::space::GridFunction;

/// A simple (finite-rank) integrand `Z(t) = sum_k xi_k(t) h_k`.
#[derive(Debug, Clone)]
pub struct SimpleProcess {
    components: Vec<(CadlagPath, GridFunction)>,
}

impl SimpleProcess {
    pub fn new(components: Vec<(CadlagPath, GridFunction)>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::InvalidInput("a simple process needs at least one component".into()));
        }
        let grid = *components[0].0.grid();
        for (xi, _) in &components {
            if xi.dim() != 1 {
                return Err(Error::DimensionMismatch("coefficient paths must be scalar".into()));
            }
            if *xi.grid() != grid {
                return Err(Error::GridMismatch("coefficient paths must share one grid".into()));
            }
        }
        Ok(Self { components })
    }

    /// A single constant-in-time component.
    pub fn constant(h: GridFunction, grid: crate::grid::TimeGrid) -> Result<Self> {
        let xi = CadlagPath::sample_scalar(grid, Interpolation::Step, |_| 1.0);
        Self::new(vec![(xi, h)])
    }

    pub fn components(&self) -> &[(CadlagPath, GridFunction)] {
        &self.components
    }

    pub fn grid(&self) -> &crate::grid::TimeGrid {
        self.components[0].0.grid()
    }

    /// The value `Z(., t_j)` as a grid function (cellwise combination).
    pub fn value_at_node(&self, j: usize) -> Result<GridFunction> {
        let mut acc = GridFunction::constant(self.components[0].1.space().clone(), 0.0);
        for (xi, h) in &self.components {
            acc = acc.linear_combination(1.0, xi.node_scalar(j), h)?;
        }
        Ok(acc)
    }

    /// Sup over nodes `<= t` of a norm of `Z(., s)`.
    pub fn sup_node_norm(&self, t: f64, norm: impl Fn(&GridFunction) -> f64) -> Result<f64> {
        let last = self.grid().node_floor(t);
        let mut sup = 0.0f64;
        for j in 0..=last {
            sup = sup.max(norm(&self.value_at_node(j)?));
        }
        Ok(sup)
    }
}

/// `Z_- . Y(t_j) = sum_k sum_{i<j} xi_k(t_i) DY(h_k, t_i)`.
pub fn simple_integral(z: &SimpleProcess, driver: &dyn Driver) -> Result<CadlagPath> {
    let grid = *driver.grid();
    if *z.grid() != grid {
        return Err(Error::GridMismatch("integrand and driver grids differ".into()));
    }
    for (_, h) in z.components() {
        h.check_space(driver.space())?;
    }
    let steps = grid.steps();
    let mut values = Vec::with_capacity(steps + 1);
    values.push(0.0);
    let mut acc = 0.0;
    for i in 0..steps {
        for (xi, h) in z.components() {
            acc += xi.node_scalar(i) * driver.increment(h, i);
        }
        values.push(acc);
    }
    CadlagPath::scalar(grid, values, Interpolation::Step)
}

/// The partition-of-unity integral: freeze the index-space path into the
/// simple process with coefficients `psi_k(X(.))` and elements the partition
/// centers, then integrate.
pub fn pou_integral(
    x: &CadlagPath,
    driver: &dyn Driver,
    pou: &PartitionOfUnity,
) -> Result<CadlagPath> {
    if x.dim() != driver.space().len() {
        return Err(Error::DimensionMismatch(format!(
            "path dimension {} vs {} cells of the driver space",
            x.dim(),
            driver.space().len()
        )));
    }
    if x.dim() != pou.dim() {
        return Err(Error::DimensionMismatch(format!(
            "path dimension {} vs partition dimension {}",
            x.dim(),
            pou.dim()
        )));
    }
    if x.grid() != driver.grid() {
        return Err(Error::GridMismatch("path and driver grids differ".into()));
    }
    // coverage first, so the error points at the offending node
    for j in 0..x.nodes() {
        pou.check_covered(x.node_value(j), &format!("path node {j}"))?;
    }
    let grid = *x.grid();
    let mut components = Vec::with_capacity(pou.len());
    for k in 0..pou.len() {
        let xi_values: Vec<f64> = (0..x.nodes()).map(|j| pou.psi(k, x.node_value(j))).collect();
        if xi_values.iter().all(|v| *v == 0.0) {
            continue; // center never activated
        }
        let xi = CadlagPath::scalar(grid, xi_values, Interpolation::Step)?;
        let h = GridFunction::new(driver.space().clone(), pou.center(k).to_vec())?;
        components.push((xi, h));
    }
    simple_integral(&SimpleProcess::new(components)?, driver)
}

/// Piecewise-constant skeleton of `g` sampled at the exit times of
/// `delta`-bands: a new segment starts at the first grid node where the path
/// has left the band around the previous segment value.
pub fn delta_skeleton(g: &CadlagPath, delta: f64) -> Result<CadlagPath> {
    if !(delta > 0.0) {
        return Err(Error::InvalidInput(format!("delta {delta} must be positive")));
    }
    let dim = g.dim();
    let mut values = Vec::with_capacity(g.nodes() * dim);
    let mut anchor: Vec<f64> = g.node_value(0).to_vec();
    values.extend_from_slice(&anchor);
    for j in 1..g.nodes() {
        let v = g.node_value(j);
        let dist: f64 = v
            .iter()
            .zip(&anchor)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        if dist > delta {
            anchor = v.to_vec();
        }
        values.extend_from_slice(&anchor);
    }
    CadlagPath::new(*g.grid(), dim, values, Interpolation::Step)
}

/// Coefficient paths `y` interpreted against a pseudo-basis as the dual-space
/// path `y*(t) = sum_k y_k(t) p_k`.
#[derive(Debug, Clone)]
pub struct FiniteVariationPath {
    coefficients: CadlagPath,
}

impl FiniteVariationPath {
    pub fn new(coefficients: CadlagPath) -> Self {
        Self { coefficients }
    }

    pub fn coefficients(&self) -> &CadlagPath {
        &self.coefficients
    }

    pub fn dim(&self) -> usize {
        self.coefficients.dim()
    }

    pub fn grid(&self) -> &crate::grid::TimeGrid {
        self.coefficients.grid()
    }
}

/// Total variation of `y*` on `[0, t]`: on a grid the sup over partitions is
/// the sum of consecutive increment norms. The dual norm is the coefficient
/// Euclidean norm, exact for orthonormal pseudo-bases.
pub fn total_variation(ystar: &FiniteVariationPath, t: f64) -> f64 {
    let c = &ystar.coefficients;
    let last = c.grid().node_floor(t);
    let mut tv = 0.0;
    for j in 0..last {
        let a = c.node_value(j);
        let b = c.node_value(j + 1);
        tv += a
            .iter()
            .zip(b)
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt();
    }
    tv
}

/// Left-endpoint Riemann–Stieltjes integral of a coefficient-space path `x`
/// against `y*`; the refinement error is bounded by the modulus of
/// continuity of `x` at the mesh times the total variation of `y*`.
pub fn fv_pathwise_integral(x: &CadlagPath, ystar: &FiniteVariationPath) -> Result<CadlagPath> {
    let c = &ystar.coefficients;
    x.check_same_grid(c)?;
    if x.dim() != c.dim() {
        return Err(Error::DimensionMismatch(format!(
            "integrand dimension {} vs dual path dimension {}",
            x.dim(),
            c.dim()
        )));
    }
    let steps = x.grid().steps();
    let mut values = Vec::with_capacity(steps + 1);
    values.push(0.0);
    let mut acc = 0.0;
    for i in 0..steps {
        let xi = x.node_value(i);
        let a = c.node_value(i);
        let b = c.node_value(i + 1);
        acc += xi
            .iter()
            .zip(a.iter().zip(b))
            .map(|(x, (u, v))| x * (v - u))
            .sum::<f64>();
        values.push(acc);
    }
    CadlagPath::scalar(*x.grid(), values, Interpolation::Step)
}

/// Convenience: project an ambient (per-cell) path onto the first `n` basis
/// coefficients and integrate against `y*`.
pub fn fv_integral_of_ambient(
    x_ambient: &CadlagPath,
    ystar: &FiniteVariationPath,
    basis: &PseudoBasis,
) -> Result<CadlagPath> {
    let xc = coefficient_path(x_ambient, basis, ystar.dim())?;
    fv_pathwise_integral(&xc, ystar)
}
