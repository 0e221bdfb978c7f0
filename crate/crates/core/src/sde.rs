//! Solvers for the driven equations and the exponential-moment diagnostics
//! that certify exponential tightness.
//!
//! * Markov evolutions `X_{k+1} = X_k + b(X_k, xi_{k+1}) / n`, sampled onto
//!   the chain's grid as `X(t) = X_{floor(nt)}`.
//! * Jump diffusions driven jointly by white noise and a Poisson random
//!   measure, by an Euler left-point scheme: per step the diffusion and
//!   drift use the step's left state, then the step's atoms are applied in
//!   atom-time order at pre-jump states (the s- convention, which makes the
//!   large-n compensator limit come out right).

use std::sync::Arc;

use crate::drivers::{GaussianDriver, MarkovCountingDriver, PoissonDriver};
use crate::error::{Error, Result};
use crate::grid::{CadlagPath, Interpolation};
use crate::space::GridFunction;
use crate::stream::RandomStream;

type FieldFn = Arc<dyn Fn(&[f64], usize) -> Vec<f64> + Send + Sync>;
type DriftFn = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;

/// A mark-dependent coefficient field `F(x, u)` with its declared bounds.
///
/// The closure maps `(state, cell)` to a d-vector; `sup_norm` declares
/// `sup_x ||F(x, .)||` in the relevant function norm and `lipschitz` the
/// Lipschitz constant in the state, both scenario metadata validated by
/// random probing.
#[derive(Clone)]
pub struct CoefficientField {
    pub field: FieldFn,
    pub sup_norm: f64,
    pub lipschitz: f64,
}

impl std::fmt::Debug for CoefficientField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CoefficientField")
            .field("sup_norm", &self.sup_norm)
            .field("lipschitz", &self.lipschitz)
            .finish()
    }
}

impl CoefficientField {
    pub fn new(field: FieldFn, sup_norm: f64, lipschitz: f64) -> Self {
        Self { field, sup_norm, lipschitz }
    }

    pub fn eval(&self, state: &[f64], cell: usize) -> Vec<f64> {
        (self.field)(state, cell)
    }

    /// The slice `F(x, .)` restricted to one output dimension, as a grid
    /// function on `space`.
    pub fn grid_function(
        &self,
        state: &[f64],
        dim_index: usize,
        space: &Arc<crate::space::DiscreteMeasureSpace>,
    ) -> Result<GridFunction> {
        let values = (0..space.len())
            .map(|c| self.eval(state, c)[dim_index])
            .collect();
        GridFunction::new(space.clone(), values)
    }

    /// Probes the declared L^2(mu) sup bound on random states in the box;
    /// errors on the first violation found.
    pub fn validate_l2_bound(
        &self,
        space: &Arc<crate::space::DiscreteMeasureSpace>,
        state_dim: usize,
        state_box: (f64, f64),
        probes: usize,
        stream: &mut RandomStream,
    ) -> Result<()> {
        for _ in 0..probes {
            let x: Vec<f64> = (0..state_dim)
                .map(|_| stream.uniform_range(state_box.0, state_box.1))
                .collect();
            let mut norm_sq = 0.0;
            for c in 0..space.len() {
                let v = self.eval(&x, c);
                let cell_sq: f64 = v.iter().map(|a| a * a).sum();
                norm_sq += cell_sq * space.mass(c);
            }
            if norm_sq.sqrt() > self.sup_norm + 1e-12 {
                return Err(Error::InvalidInput(format!(
                    "declared sup ||F(x,.)|| = {} violated at x = {x:?}: {}",
                    self.sup_norm,
                    norm_sq.sqrt()
                )));
            }
        }
        Ok(())
    }
}

/// A state drift `b(x)` with declared bounds, probed the same way.
#[derive(Clone)]
pub struct DriftField {
    pub drift: DriftFn,
    pub bound: f64,
    pub lipschitz: f64,
}

impl std::fmt::Debug for DriftField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DriftField")
            .field("bound", &self.bound)
            .field("lipschitz", &self.lipschitz)
            .finish()
    }
}

impl DriftField {
    pub fn new(drift: DriftFn, bound: f64, lipschitz: f64) -> Self {
        Self { drift, bound, lipschitz }
    }

    pub fn eval(&self, state: &[f64]) -> Vec<f64> {
        (self.drift)(state)
    }

    pub fn validate_bound(
        &self,
        state_dim: usize,
        state_box: (f64, f64),
        probes: usize,
        stream: &mut RandomStream,
    ) -> Result<()> {
        for _ in 0..probes {
            let x: Vec<f64> = (0..state_dim)
                .map(|_| stream.uniform_range(state_box.0, state_box.1))
                .collect();
            let b = self.eval(&x);
            let norm: f64 = b.iter().map(|a| a * a).sum::<f64>().sqrt();
            if norm > self.bound + 1e-12 {
                return Err(Error::InvalidInput(format!(
                    "declared |b| = {} violated at x = {x:?}: {norm}",
                    self.bound
                )));
            }
        }
        Ok(())
    }
}

/// Exact recursion `X_{k+1} = X_k + b(X_k, xi_{k+1}) / n`, output sampled to
/// the chain's grid.
pub fn solve_markov_evolution(
    b: impl Fn(&[f64], usize) -> Vec<f64>,
    chain: &MarkovCountingDriver,
    x0: &[f64],
) -> Result<CadlagPath> {
    use crate::drivers::Driver;
    let n = chain.scale_n() as f64;
    let grid = *chain.grid();
    let dim = x0.len();
    if dim == 0 {
        return Err(Error::InvalidInput("state dimension must be >= 1".into()));
    }
    // iterate the chain once, recording the state at each chain index
    let mut states_at = Vec::with_capacity(chain.states().len() + 1);
    let mut x = x0.to_vec();
    states_at.push(x.clone());
    for xi in chain.states() {
        let incr = b(&x, *xi);
        if incr.len() != dim {
            return Err(Error::DimensionMismatch(format!(
                "b returned {} components for state dimension {dim}",
                incr.len()
            )));
        }
        for (xi_, bi) in x.iter_mut().zip(&incr) {
            *xi_ += bi / n;
        }
        states_at.push(x.clone());
    }
    let mut values = Vec::with_capacity((grid.steps() + 1) * dim);
    for j in 0..=grid.steps() {
        let k = chain.chain_index(grid.node(j));
        values.extend_from_slice(&states_at[k]);
    }
    CadlagPath::new(grid, dim, values, Interpolation::Step)
}

/// Coefficients of the jump diffusion
/// `dX = sigma1(X, u) W_n(du dt) + b(X) dt + sigma2(X, u) xi_n(du dt)`.
#[derive(Debug, Clone)]
pub struct JumpDiffusionCoeffs {
    pub sigma1: CoefficientField,
    pub sigma2: CoefficientField,
    pub drift: DriftField,
}

/// Euler left-point solve of the jump diffusion at scale `n`; the drivers
/// must share the grid and the scale.
pub fn solve_jump_diffusion(
    coeffs: &JumpDiffusionCoeffs,
    w: &GaussianDriver,
    xi: &PoissonDriver,
    x0: &[f64],
) -> Result<CadlagPath> {
    use crate::drivers::Driver;
    if w.grid() != xi.grid() {
        return Err(Error::GridMismatch("white-noise and Poisson drivers on different grids".into()));
    }
    if w.scale_n() != xi.scale_n() {
        return Err(Error::InvalidInput(format!(
            "driver scales differ: {} vs {}",
            w.scale_n(),
            xi.scale_n()
        )));
    }
    let dim = x0.len();
    if dim == 0 {
        return Err(Error::InvalidInput("state dimension must be >= 1".into()));
    }
    let grid = *w.grid();
    let n = w.scale_n() as f64;
    let sqrt_n = n.sqrt();
    let dt = grid.dt();
    let cells = w.space().len();
    let mut x = x0.to_vec();
    let mut values = Vec::with_capacity((grid.steps() + 1) * dim);
    values.extend_from_slice(&x);
    let mut next = vec![0.0; dim];
    for step in 0..grid.steps() {
        next.copy_from_slice(&x);
        // diffusion and drift at the step's left state
        for c in 0..cells {
            let dw = w.raw_increment(c, step);
            if dw != 0.0 {
                let s1 = coeffs.sigma1.eval(&x, c);
                for (nx, s) in next.iter_mut().zip(&s1) {
                    *nx += s * dw / sqrt_n;
                }
            }
        }
        let b = coeffs.drift.eval(&x);
        for (nx, bi) in next.iter_mut().zip(&b) {
            *nx += bi * dt;
        }
        // jumps in atom-time order at pre-jump states
        for (cell, _time) in xi.atoms_in_step(step) {
            let s2 = coeffs.sigma2.eval(&next, *cell);
            for (nx, s) in next.iter_mut().zip(&s2) {
                *nx += s / n;
            }
        }
        x.copy_from_slice(&next);
        values.extend_from_slice(&x);
    }
    CadlagPath::new(grid, dim, values, Interpolation::Step)
}

/// One `(t, h)` row of the exponential-moment diagnostic.
#[derive(Debug, Clone)]
pub struct ExpTightnessRow {
    pub t: f64,
    pub h: f64,
    pub mean_plus: f64,
    pub mean_minus: f64,
    pub se_plus: f64,
    pub se_minus: f64,
    pub envelope: f64,
    pub pass: bool,
}

#[derive(Debug, Clone)]
pub struct ExpTightnessReport {
    pub rows: Vec<ExpTightnessRow>,
    pub pass: bool,
}

/// Compares the empirical means of `exp(+-n (X(t+h) - X(t)))` over a path
/// ensemble against the analytic envelope `e^{n C h}` at 5-standard-error
/// slack, on the grid of window starts spaced by `h_window`.
///
/// `n * c_declared * h_window` must stay below 30 so the exponentials cannot
/// overflow an honest run.
pub fn exp_tightness_diagnostic(
    paths: &[CadlagPath],
    n: u64,
    h_window: f64,
    c_declared: f64,
) -> Result<ExpTightnessReport> {
    if paths.len() < 1_000 {
        return Err(Error::InsufficientData(format!(
            "ensemble of {} paths, need at least 1000",
            paths.len()
        )));
    }
    let grid = *paths[0].grid();
    for p in paths {
        if *p.grid() != grid {
            return Err(Error::GridMismatch("ensemble paths on different grids".into()));
        }
        if p.dim() != 1 {
            return Err(Error::DimensionMismatch("diagnostic expects scalar paths".into()));
        }
    }
    if !(h_window > 0.0) || h_window > grid.horizon() {
        return Err(Error::InvalidInput(format!("window {h_window} outside (0, T]")));
    }
    let nf = n as f64;
    if nf * c_declared * h_window > 30.0 {
        return Err(Error::Scenario(format!(
            "n * C * h = {} exceeds the overflow guard of 30; rerun with smaller n or window",
            nf * c_declared * h_window
        )));
    }
    let m = paths.len() as f64;
    let mut rows = Vec::new();
    let mut t = 0.0;
    while t + h_window <= grid.horizon() + 1e-12 {
        let j0 = grid.node_floor(t);
        let j1 = grid.node_floor(t + h_window);
        let (mut sp, mut sp2, mut sm, mut sm2) = (0.0, 0.0, 0.0, 0.0);
        for p in paths {
            let d = p.node_scalar(j1) - p.node_scalar(j0);
            let ep = (nf * d).exp();
            let em = (-nf * d).exp();
            sp += ep;
            sp2 += ep * ep;
            sm += em;
            sm2 += em * em;
        }
        let mean_plus = sp / m;
        let mean_minus = sm / m;
        let se_plus = ((sp2 / m - mean_plus * mean_plus).max(0.0) / m).sqrt();
        let se_minus = ((sm2 / m - mean_minus * mean_minus).max(0.0) / m).sqrt();
        let envelope = (nf * c_declared * h_window).exp();
        let pass = mean_plus <= envelope + 5.0 * se_plus && mean_minus <= envelope + 5.0 * se_minus;
        rows.push(ExpTightnessRow {
            t,
            h: h_window,
            mean_plus,
            mean_minus,
            se_plus,
            se_minus,
            envelope,
            pass,
        });
        t += h_window;
    }
    Ok(ExpTightnessReport { pass: rows.iter().all(|r| r.pass), rows })
}
