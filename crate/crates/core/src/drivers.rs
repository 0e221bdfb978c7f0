//! Simulators for the driving semimartingale families.
//!
//! Each driver is indexed by grid functions `h` on a discrete mark space and
//! exposes per-step increments of `Y(h, .)`, linear in `h` by construction:
//!
//! * [`GaussianDriver`] — space-time white noise based on `mu x dt`, scaled
//!   by `n^{-1/2}`. Per-cell aggregation keeps `W(h, t)` exactly Gaussian
//!   with variance `||h||_2^2 t`, so all discretization lives in the choice
//!   of cells.
//! * [`PoissonDriver`] — a Poisson random measure with mean `nu x n dt`,
//!   scaled by `1/n`; atoms are sampled with total-rate exponential clocks
//!   and cell marks proportional to mass, so the atom list is exact in
//!   distribution and doubles as the jump source for the SDE solver. Raw by
//!   default; the centered version subtracts the compensator.
//! * [`MarkovCountingDriver`] — the occupation counting measure of a finite
//!   Markov chain, `Y(h, t) = (1/n) sum_{k <= nt} h(xi_k)`.
//!
//! A fourth, deterministic driver wraps a finite-variation coefficient path
//! against a pseudo-basis; it backs the rate-identification checks.

use std::sync::Arc;

use crate::basis::PseudoBasis;
use crate::error::{Error, Result};
use crate::grid::{CadlagPath, Interpolation, TimeGrid};
use crate::space::{DiscreteMeasureSpace, GridFunction};
use crate::stream::RandomStream;

/// A simulated semimartingale realization, queried through increments of
/// `Y(h, .)` at grid steps.
pub trait Driver {
    fn space(&self) -> &Arc<DiscreteMeasureSpace>;

    fn grid(&self) -> &TimeGrid;

    /// `Y(h, t_{i+1}) - Y(h, t_i)` with the family's scaling applied.
    /// Assumes `h` lives on the driver's space; see [`Driver::evaluate`] for
    /// the checked entry point.
    fn increment(&self, h: &GridFunction, step: usize) -> f64;

    /// `Y(h, t)` at the last grid node `<= t`.
    fn evaluate(&self, h: &GridFunction, t: f64) -> Result<f64> {
        h.check_space(self.space())?;
        let j = self.grid().node_floor(t);
        Ok((0..j).map(|i| self.increment(h, i)).sum())
    }

    /// The full path `Y(h, .)` on the grid.
    fn path(&self, h: &GridFunction) -> Result<CadlagPath> {
        h.check_space(self.space())?;
        let steps = self.grid().steps();
        let mut values = Vec::with_capacity(steps + 1);
        let mut acc = 0.0;
        values.push(0.0);
        for i in 0..steps {
            acc += self.increment(h, i);
            values.push(acc);
        }
        CadlagPath::scalar(*self.grid(), values, Interpolation::Step)
    }

    /// Max over grid nodes `<= t` of `|Y(h, s)|`, without materializing the
    /// path.
    fn sup_abs(&self, h: &GridFunction, t: f64) -> Result<f64> {
        h.check_space(self.space())?;
        let j = self.grid().node_floor(t);
        let mut acc = 0.0f64;
        let mut sup = 0.0f64;
        for i in 0..j {
            acc += self.increment(h, i);
            sup = sup.max(acc.abs());
        }
        Ok(sup)
    }
}

/// Space-time Gaussian white noise, `E W(A,t) W(B,s) = mu(A n B) min(t,s)`,
/// scaled by `n^{-1/2}`.
#[derive(Debug, Clone)]
pub struct GaussianDriver {
    space: Arc<DiscreteMeasureSpace>,
    grid: TimeGrid,
    scale_n: u64,
    /// Raw (unscaled) per-step, per-cell increments, `N(0, mass dt)`,
    /// row-major `[step * cells + cell]`.
    increments: Vec<f64>,
}

pub fn simulate_gaussian(
    space: &Arc<DiscreteMeasureSpace>,
    grid: TimeGrid,
    scale_n: u64,
    stream: &mut RandomStream,
) -> Result<GaussianDriver> {
    if scale_n == 0 {
        return Err(Error::InvalidInput("scale n must be >= 1".into()));
    }
    let cells = space.len();
    let dt = grid.dt();
    let mut increments = Vec::with_capacity(grid.steps() * cells);
    let sd: Vec<f64> = space.masses().iter().map(|m| (m * dt).sqrt()).collect();
    for _ in 0..grid.steps() {
        for s in &sd {
            increments.push(s * stream.standard_normal());
        }
    }
    Ok(GaussianDriver { space: space.clone(), grid, scale_n, increments })
}

impl GaussianDriver {
    pub fn scale_n(&self) -> u64 {
        self.scale_n
    }

    /// Raw `Delta W(cell, step)` without the `n^{-1/2}` scaling.
    pub fn raw_increment(&self, cell: usize, step: usize) -> f64 {
        self.increments[step * self.space.len() + cell]
    }
}

impl Driver for GaussianDriver {
    fn space(&self) -> &Arc<DiscreteMeasureSpace> {
        &self.space
    }

    fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    fn increment(&self, h: &GridFunction, step: usize) -> f64 {
        let cells = self.space.len();
        let row = &self.increments[step * cells..(step + 1) * cells];
        let dot: f64 = h.values().iter().zip(row).map(|(a, b)| a * b).sum();
        dot / (self.scale_n as f64).sqrt()
    }
}

/// A Poisson random measure with mean `nu x n dt`, scaled by `1/n`.
#[derive(Debug, Clone)]
pub struct PoissonDriver {
    space: Arc<DiscreteMeasureSpace>,
    grid: TimeGrid,
    scale_n: u64,
    /// `(cell, time)` in increasing time order.
    atoms: Vec<(usize, f64)>,
    /// Index of the first atom with time `> node(i)`, per node.
    step_start: Vec<usize>,
    centered: bool,
}

pub fn simulate_poisson(
    space: &Arc<DiscreteMeasureSpace>,
    grid: TimeGrid,
    scale_n: u64,
    stream: &mut RandomStream,
) -> Result<PoissonDriver> {
    if scale_n == 0 {
        return Err(Error::InvalidInput("scale n must be >= 1".into()));
    }
    let total_rate = space.total_mass() * scale_n as f64;
    let mut atoms = Vec::new();
    if total_rate > 0.0 {
        let mut t = 0.0;
        loop {
            t += stream.exp1() / total_rate;
            if t > grid.horizon() {
                break;
            }
            let cell = stream.categorical(space.masses(), space.total_mass());
            atoms.push((cell, t));
        }
    }
    let mut step_start = Vec::with_capacity(grid.steps() + 1);
    let mut idx = 0;
    for j in 0..=grid.steps() {
        let node = grid.node(j);
        while idx < atoms.len() && atoms[idx].1 <= node {
            idx += 1;
        }
        step_start.push(idx);
    }
    Ok(PoissonDriver {
        space: space.clone(),
        grid,
        scale_n,
        atoms,
        step_start,
        centered: false,
    })
}

impl PoissonDriver {
    /// Switches to the centered indexing (compensator subtracted).
    pub fn centered(mut self, yes: bool) -> Self {
        self.centered = yes;
        self
    }

    pub fn is_centered(&self) -> bool {
        self.centered
    }

    pub fn scale_n(&self) -> u64 {
        self.scale_n
    }

    pub fn atoms(&self) -> &[(usize, f64)] {
        &self.atoms
    }

    /// Atoms with time in `(node(i), node(i+1)]`.
    pub fn atoms_in_step(&self, step: usize) -> &[(usize, f64)] {
        &self.atoms[self.step_start[step]..self.step_start[step + 1]]
    }
}

impl Driver for PoissonDriver {
    fn space(&self) -> &Arc<DiscreteMeasureSpace> {
        &self.space
    }

    fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    fn increment(&self, h: &GridFunction, step: usize) -> f64 {
        let raw: f64 = self
            .atoms_in_step(step)
            .iter()
            .map(|(cell, _)| h.value(*cell))
            .sum();
        let mut v = raw / self.scale_n as f64;
        if self.centered {
            let compensator: f64 = h
                .values()
                .iter()
                .zip(self.space.masses())
                .map(|(x, m)| x * m)
                .sum();
            v -= compensator * self.grid.dt();
        }
        v
    }
}

/// Occupation counting measure of a finite-state Markov chain.
#[derive(Debug, Clone)]
pub struct MarkovCountingDriver {
    space: Arc<DiscreteMeasureSpace>,
    grid: TimeGrid,
    scale_n: u64,
    kernel: Vec<Vec<f64>>,
    /// `xi_1 .. xi_ceil(nT)`; `xi_k` carries chain time `k/n`.
    states: Vec<usize>,
    /// Chain index reached by each grid node: `K_j = floor(n * node(j))`.
    node_chain_index: Vec<usize>,
}

/// Checks rows are nonnegative and sum to one within 1e-12.
pub fn validate_kernel(kernel: &[Vec<f64>]) -> Result<()> {
    if kernel.is_empty() {
        return Err(Error::InvalidKernel("empty kernel".into()));
    }
    let m = kernel.len();
    for (i, row) in kernel.iter().enumerate() {
        if row.len() != m {
            return Err(Error::InvalidKernel(format!("row {i} has {} entries for {m} states", row.len())));
        }
        if row.iter().any(|p| !(*p >= 0.0)) {
            return Err(Error::InvalidKernel(format!("row {i} has a negative entry")));
        }
        let s: f64 = row.iter().sum();
        if (s - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidKernel(format!("row {i} sums to {s}")));
        }
    }
    Ok(())
}

pub fn simulate_markov_chain(
    kernel: &[Vec<f64>],
    initial: &[f64],
    scale_n: u64,
    horizon: f64,
    stream: &mut RandomStream,
) -> Result<MarkovCountingDriver> {
    validate_kernel(kernel)?;
    if scale_n == 0 {
        return Err(Error::InvalidInput("scale n must be >= 1".into()));
    }
    if initial.len() != kernel.len() {
        return Err(Error::DimensionMismatch(format!(
            "initial distribution over {} states for a {}-state kernel",
            initial.len(),
            kernel.len()
        )));
    }
    let isum: f64 = initial.iter().sum();
    if initial.iter().any(|p| !(*p >= 0.0)) || (isum - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidInput("initial distribution must be a probability vector".into()));
    }
    let len = (scale_n as f64 * horizon).ceil() as usize;
    let mut states = Vec::with_capacity(len);
    if len > 0 {
        let mut current = stream.categorical(initial, isum);
        states.push(current);
        for _ in 1..len {
            let row = &kernel[current];
            current = stream.categorical(row, 1.0);
            states.push(current);
        }
    }
    let steps = len.max(1);
    let grid = TimeGrid::new(horizon, steps)?;
    let n = scale_n as f64;
    let node_chain_index = (0..=steps)
        .map(|j| ((n * grid.node(j)) * (1.0 + 1e-12) + 1e-9).floor() as usize)
        .map(|k| k.min(len))
        .collect();
    let space = DiscreteMeasureSpace::with_labels(
        (0..kernel.len()).map(|i| format!("s{i}")).collect(),
        vec![1.0; kernel.len()],
    )?;
    Ok(MarkovCountingDriver {
        space,
        grid,
        scale_n,
        kernel: kernel.to_vec(),
        states,
        node_chain_index,
    })
}

impl MarkovCountingDriver {
    pub fn scale_n(&self) -> u64 {
        self.scale_n
    }

    pub fn kernel(&self) -> &[Vec<f64>] {
        &self.kernel
    }

    pub fn states(&self) -> &[usize] {
        &self.states
    }

    /// Chain index `floor(n t)` clamped to the chain length.
    pub fn chain_index(&self, t: f64) -> usize {
        let k = ((self.scale_n as f64 * t) * (1.0 + 1e-12) + 1e-9).floor() as usize;
        k.min(self.states.len())
    }
}

impl Driver for MarkovCountingDriver {
    fn space(&self) -> &Arc<DiscreteMeasureSpace> {
        &self.space
    }

    fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    fn increment(&self, h: &GridFunction, step: usize) -> f64 {
        let (lo, hi) = (self.node_chain_index[step], self.node_chain_index[step + 1]);
        let s: f64 = self.states[lo..hi].iter().map(|s| h.value(*s)).sum();
        s / self.scale_n as f64
    }
}

/// A deterministic finite-variation driver: `Y(h, t) = sum_k y_k(t) p_k(h)`
/// for a coefficient path `y` against an orthonormal pseudo-basis.
#[derive(Debug, Clone)]
pub struct DeterministicFvDriver {
    basis: PseudoBasis,
    coefficients: CadlagPath,
}

impl DeterministicFvDriver {
    pub fn new(basis: PseudoBasis, coefficients: CadlagPath) -> Result<Self> {
        if coefficients.dim() > basis.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} coefficient paths for a basis of size {}",
                coefficients.dim(),
                basis.len()
            )));
        }
        Ok(Self { basis, coefficients })
    }

    pub fn basis(&self) -> &PseudoBasis {
        &self.basis
    }

    pub fn coefficients(&self) -> &CadlagPath {
        &self.coefficients
    }
}

impl Driver for DeterministicFvDriver {
    fn space(&self) -> &Arc<DiscreteMeasureSpace> {
        self.basis.space()
    }

    fn grid(&self) -> &TimeGrid {
        self.coefficients.grid()
    }

    fn increment(&self, h: &GridFunction, step: usize) -> f64 {
        let a = self.coefficients.node_value(step);
        let b = self.coefficients.node_value(step + 1);
        (0..self.coefficients.dim())
            .map(|k| {
                let p = self.basis.coefficient(k, h).expect("space checked");
                (b[k] - a[k]) * p
            })
            .sum()
    }
}
