//! Numerical rate functions.
//!
//! The local costs are Fenchel–Legendre transforms of log moment generating
//! functions; path costs integrate them along piecewise-linear grid paths.
//! Every grid path is absolutely continuous, so the "infinite outside AC"
//! branch of the analytic rate functions shows up here only as slope
//! infeasibility (an unbounded transform or a Gram increment outside range),
//! signalled by `f64::INFINITY`.
//!
//! Optimizers are deterministic: gradient ascent/descent with backtracking
//! line search, Nesterov acceleration for the path minimizer, and
//! counter-based jitter for restarts.

use std::collections::HashMap;
use std::sync::Arc;

use nalgebra::DMatrix;

use crate::drivers::validate_kernel;
use crate::error::{Error, Result};
use crate::grid::{CadlagPath, Interpolation, TimeGrid};
use crate::integrate::{fv_pathwise_integral, total_variation, FiniteVariationPath};
use crate::space::{DiscreteMeasureSpace, GridFunction};
use crate::stream::RandomStream;

type VecFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
type GradFn = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;

/// A log moment generating function `mu` on `R^m` with its gradient
/// (analytic when available, central finite differences otherwise).
#[derive(Clone)]
pub struct LogMgf {
    dim: usize,
    evaluator: VecFn,
    gradient: Option<GradFn>,
}

impl std::fmt::Debug for LogMgf {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LogMgf")
            .field("dim", &self.dim)
            .field("analytic_gradient", &self.gradient.is_some())
            .finish()
    }
}

impl LogMgf {
    pub fn new(dim: usize, evaluator: VecFn, gradient: Option<GradFn>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidInput("log-MGF dimension must be >= 1".into()));
        }
        let mgf = Self { dim, evaluator, gradient };
        mgf.validate()?;
        Ok(mgf)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.dim);
        (self.evaluator)(x)
    }

    pub fn grad(&self, x: &[f64]) -> Vec<f64> {
        match &self.gradient {
            Some(g) => g(x),
            None => {
                let mut out = Vec::with_capacity(self.dim);
                let mut xp = x.to_vec();
                for i in 0..self.dim {
                    let h = 1e-6 * (1.0 + x[i].abs());
                    xp[i] = x[i] + h;
                    let fp = self.eval(&xp);
                    xp[i] = x[i] - h;
                    let fm = self.eval(&xp);
                    xp[i] = x[i];
                    out.push((fp - fm) / (2.0 * h));
                }
                out
            }
        }
    }

    /// `mu(0) = 0` and midpoint convexity on sampled segments.
    pub fn validate(&self) -> Result<()> {
        let zero = vec![0.0; self.dim];
        let at0 = self.eval(&zero);
        if at0.abs() > 1e-12 {
            return Err(Error::InvalidInput(format!("mu(0) = {at0}, expected 0")));
        }
        let mut s = RandomStream::new(0x6d67_665f, 0);
        for _ in 0..24 {
            let a: Vec<f64> = (0..self.dim).map(|_| s.uniform_range(-1.5, 1.5)).collect();
            let b: Vec<f64> = (0..self.dim).map(|_| s.uniform_range(-1.5, 1.5)).collect();
            let mid: Vec<f64> = a.iter().zip(&b).map(|(x, y)| 0.5 * (x + y)).collect();
            let fa = self.eval(&a);
            let fb = self.eval(&b);
            let fm = self.eval(&mid);
            if fa.is_finite() && fb.is_finite() && fm.is_finite() {
                let chord = 0.5 * (fa + fb);
                if fm > chord + 1e-9 * (1.0 + chord.abs()) {
                    return Err(Error::InvalidInput(format!(
                        "mu fails midpoint convexity: mu(mid) = {fm} > {chord}"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Result of a Fenchel–Legendre evaluation.
#[derive(Debug, Clone)]
pub struct LegendreValue {
    pub value: f64,
    pub argmax: Vec<f64>,
    /// Set when the supremum escaped every search box: the transform is
    /// `+infinity` at this point and `value` is `f64::INFINITY`.
    pub unbounded: bool,
    pub iterations: usize,
    pub grad_norm: f64,
    pub converged: bool,
}

const UNBOUNDED_OBJECTIVE: f64 = 1e12;
const MAX_BOX_DOUBLINGS: usize = 40;

/// `lambda(y) = sup_x [x . y - mu(x)]` by gradient ascent with backtracking,
/// started at the origin; the search box `[-box0, box0]^m` doubles while the
/// ascent keeps pushing outward.
pub fn legendre(mgf: &LogMgf, y: &[f64], box0: f64) -> Result<LegendreValue> {
    if y.len() != mgf.dim() {
        return Err(Error::DimensionMismatch(format!(
            "target dimension {} vs log-MGF dimension {}",
            y.len(),
            mgf.dim()
        )));
    }
    if !(box0 > 0.0) {
        return Err(Error::InvalidInput(format!("initial box {box0} must be positive")));
    }
    mgf.validate()?;
    let objective = |x: &[f64]| -> f64 {
        let m = mgf.eval(x);
        if m.is_finite() {
            x.iter().zip(y).map(|(a, b)| a * b).sum::<f64>() - m
        } else {
            f64::NEG_INFINITY
        }
    };
    let mut bound = box0;
    let mut doublings = 0usize;
    let mut x = vec![0.0; mgf.dim()];
    let mut fx = objective(&x);
    let mut step = 1.0f64;
    let mut grad_norm = f64::INFINITY;
    let mut converged = false;
    let mut iterations = 0usize;
    while iterations < 100_000 {
        iterations += 1;
        let gmu = mgf.grad(&x);
        let grad: Vec<f64> = y.iter().zip(&gmu).map(|(a, b)| a - b).collect();
        grad_norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        if grad_norm < 1e-9 {
            converged = true;
            break;
        }
        // backtracking ascent with step growth between iterations
        step *= 2.0;
        let mut accepted = false;
        while step > 1e-18 {
            let cand: Vec<f64> = x
                .iter()
                .zip(&grad)
                .map(|(a, g)| (a + step * g).clamp(-bound, bound))
                .collect();
            let fc = objective(&cand);
            let advance: f64 = grad.iter().zip(cand.iter().zip(&x)).map(|(g, (c, a))| g * (c - a)).sum();
            if fc.is_finite() && fc >= fx + 1e-4 * advance && advance > 0.0 {
                x = cand;
                fx = fc;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        let pinned_outward = x
            .iter()
            .zip(&grad)
            .any(|(a, g)| (*a >= bound && *g > 0.0) || (*a <= -bound && *g < 0.0));
        if pinned_outward {
            if doublings >= MAX_BOX_DOUBLINGS {
                return Ok(LegendreValue {
                    value: f64::INFINITY,
                    argmax: x,
                    unbounded: true,
                    iterations,
                    grad_norm,
                    converged: false,
                });
            }
            bound *= 2.0;
            doublings += 1;
            continue;
        }
        if fx > UNBOUNDED_OBJECTIVE {
            return Ok(LegendreValue {
                value: f64::INFINITY,
                argmax: x,
                unbounded: true,
                iterations,
                grad_norm,
                converged: false,
            });
        }
        if !accepted {
            // line search stalled at machine precision
            converged = true;
            break;
        }
    }
    Ok(LegendreValue { value: fx, argmax: x, unbounded: false, iterations, grad_norm, converged })
}

/// `mu(x) = integral_U (e^{sum_i x_i h_i(u)} - 1) nu(du)` as an exact cell
/// sum, with its analytic gradient.
pub fn poisson_log_mgf(h_list: &[GridFunction], nu: &Arc<DiscreteMeasureSpace>) -> Result<LogMgf> {
    if h_list.is_empty() {
        return Err(Error::InvalidInput("need at least one index function".into()));
    }
    for h in h_list {
        h.check_space(nu)?;
    }
    let dim = h_list.len();
    let cells = nu.len();
    let values: Arc<Vec<Vec<f64>>> = Arc::new(h_list.iter().map(|h| h.values().to_vec()).collect());
    let masses: Arc<Vec<f64>> = Arc::new(nu.masses().to_vec());
    let (v1, m1) = (values.clone(), masses.clone());
    let evaluator: VecFn = Arc::new(move |x: &[f64]| {
        let mut acc = 0.0;
        for c in 0..cells {
            if m1[c] == 0.0 {
                continue;
            }
            let s: f64 = (0..x.len()).map(|i| x[i] * v1[i][c]).sum();
            acc += s.exp_m1() * m1[c];
        }
        acc
    });
    let (v2, m2) = (values, masses);
    let gradient: GradFn = Arc::new(move |x: &[f64]| {
        let mut out = vec![0.0; x.len()];
        for c in 0..cells {
            if m2[c] == 0.0 {
                continue;
            }
            let s: f64 = (0..x.len()).map(|i| x[i] * v2[i][c]).sum();
            let e = s.exp() * m2[c];
            for (i, o) in out.iter_mut().enumerate() {
                *o += v2[i][c] * e;
            }
        }
        out
    });
    LogMgf::new(dim, evaluator, Some(gradient))
}

/// `H(p) = log integral e^{p . h(z)} pi(dz)` for a finite-support
/// distribution, evaluated by a stable log-sum-exp with analytic gradient.
pub fn cramer_log_mgf(h_values: &[Vec<f64>], probabilities: &[f64]) -> Result<LogMgf> {
    if h_values.is_empty() || h_values.len() != probabilities.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} support points vs {} probabilities",
            h_values.len(),
            probabilities.len()
        )));
    }
    let dim = h_values[0].len();
    if dim == 0 || h_values.iter().any(|v| v.len() != dim) {
        return Err(Error::DimensionMismatch("support values must share a nonzero dimension".into()));
    }
    let psum: f64 = probabilities.iter().sum();
    if probabilities.iter().any(|p| !(*p >= 0.0)) || (psum - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidInput("probabilities must be a probability vector".into()));
    }
    let h: Arc<Vec<Vec<f64>>> = Arc::new(h_values.to_vec());
    let logp: Arc<Vec<f64>> = Arc::new(probabilities.iter().map(|p| p.ln()).collect());
    let (h1, lp1) = (h.clone(), logp.clone());
    let lse = move |x: &[f64], h: &[Vec<f64>], logp: &[f64]| -> (f64, Vec<f64>) {
        let exponents: Vec<f64> = h
            .iter()
            .zip(logp)
            .map(|(hz, lp)| lp + x.iter().zip(hz).map(|(a, b)| a * b).sum::<f64>())
            .collect();
        let m = exponents.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let weights: Vec<f64> = exponents.iter().map(|e| (e - m).exp()).collect();
        let z: f64 = weights.iter().sum();
        (m + z.ln(), weights.iter().map(|w| w / z).collect())
    };
    let lse1 = lse;
    let evaluator: VecFn = Arc::new(move |x: &[f64]| lse1(x, &h1, &lp1).0);
    let gradient: GradFn = Arc::new(move |x: &[f64]| {
        let (_, w) = lse(x, &h, &logp);
        let mut out = vec![0.0; x.len()];
        for (wz, hz) in w.iter().zip(h.iter()) {
            for (o, hv) in out.iter_mut().zip(hz) {
                *o += wz * hv;
            }
        }
        out
    });
    LogMgf::new(dim, evaluator, Some(gradient))
}

/// A factor `C` of the Gram matrix `Sigma = [<h_i, h_j>]` with
/// `C C^T = Sigma`, built by symmetric eigendecomposition with eigenvalues
/// below `1e-12 * trace` clamped to zero.
#[derive(Debug, Clone)]
pub struct GramFactor {
    dim: usize,
    /// Orthonormal eigenvectors, column-major.
    eigvecs: DMatrix<f64>,
    /// Clamped eigenvalues.
    eigvals: Vec<f64>,
}

impl GramFactor {
    pub fn from_functions(h: &[GridFunction]) -> Result<Self> {
        if h.is_empty() {
            return Err(Error::InvalidInput("need at least one function".into()));
        }
        let m = h.len();
        let mut sigma = DMatrix::zeros(m, m);
        for i in 0..m {
            for j in i..m {
                let g = h[i].inner(&h[j])?;
                sigma[(i, j)] = g;
                sigma[(j, i)] = g;
            }
        }
        Self::from_matrix(sigma)
    }

    pub fn from_matrix(sigma: DMatrix<f64>) -> Result<Self> {
        let m = sigma.nrows();
        if m == 0 || sigma.ncols() != m {
            return Err(Error::DimensionMismatch("Gram matrix must be square and nonempty".into()));
        }
        let asym = (&sigma - sigma.transpose()).abs().max();
        if asym > 1e-10 {
            return Err(Error::InvalidInput(format!("Gram matrix asymmetry {asym}")));
        }
        let trace = sigma.trace();
        let eig = nalgebra::SymmetricEigen::new(sigma.clone());
        let clamp = 1e-12 * trace.max(f64::MIN_POSITIVE);
        let eigvals: Vec<f64> = eig
            .eigenvalues
            .iter()
            .map(|l| if *l < clamp { 0.0 } else { *l })
            .collect();
        let factor = Self { dim: m, eigvecs: eig.eigenvectors, eigvals };
        // reconstruction check
        let c = factor.matrix();
        let recon = &c * c.transpose();
        let err = (&recon - &sigma).abs().max();
        if err > 1e-10 * (1.0 + trace.abs()) {
            return Err(Error::InvalidInput(format!("eigenfactor reconstruction error {err}")));
        }
        Ok(factor)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rank(&self) -> usize {
        self.eigvals.iter().filter(|l| **l > 0.0).count()
    }

    /// The symmetric square root `C = U sqrt(L) U^T`.
    pub fn matrix(&self) -> DMatrix<f64> {
        let sqrt = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
            self.dim,
            self.eigvals.iter().map(|l| l.sqrt()),
        ));
        &self.eigvecs * sqrt * self.eigvecs.transpose()
    }

    /// Minimum-norm solution of `C v = w` through the pseudo-inverse,
    /// together with the norm of the unreachable component of `w`.
    pub fn solve_min_norm(&self, w: &[f64]) -> (Vec<f64>, f64) {
        let wv = nalgebra::DVector::from_column_slice(w);
        let coords = self.eigvecs.transpose() * &wv;
        let mut sol = nalgebra::DVector::zeros(self.dim);
        let mut residual_sq = 0.0;
        for (k, l) in self.eigvals.iter().enumerate() {
            if *l > 0.0 {
                sol[k] = coords[k] / l.sqrt();
            } else {
                residual_sq += coords[k] * coords[k];
            }
        }
        let v = &self.eigvecs * sol;
        (v.iter().cloned().collect(), residual_sq.sqrt())
    }

    /// `(||C^+ w||^2, residual)` without materializing the solution.
    pub fn min_norm_sq(&self, w: &[f64]) -> (f64, f64) {
        let mut norm_sq = 0.0;
        let mut residual_sq = 0.0;
        for (k, l) in self.eigvals.iter().enumerate() {
            let col = self.eigvecs.column(k);
            let c: f64 = col.iter().zip(w).map(|(u, x)| u * x).sum();
            if *l > 0.0 {
                norm_sq += c * c / l;
            } else {
                residual_sq += c * c;
            }
        }
        (norm_sq, residual_sq.sqrt())
    }
}

/// Schilder path action `1/2 integral ||phi_dot||^2 dt` over the minimum-norm
/// preimage of the increments under the Gram factor; `INFINITY` when an
/// increment leaves the factor's range.
pub fn schilder_action(psi: &CadlagPath, factor: &GramFactor) -> Result<f64> {
    if psi.dim() != factor.dim() {
        return Err(Error::DimensionMismatch(format!(
            "path dimension {} vs Gram dimension {}",
            psi.dim(),
            factor.dim()
        )));
    }
    let start_norm: f64 = psi.node_value(0).iter().map(|v| v * v).sum::<f64>().sqrt();
    if start_norm > 1e-12 {
        return Err(Error::InvalidInput(format!("path must start at 0, got norm {start_norm}")));
    }
    let dt = psi.grid().dt();
    let mut acc = 0.0;
    let mut w = vec![0.0; psi.dim()];
    for j in 0..psi.grid().steps() {
        let a = psi.node_value(j);
        let b = psi.node_value(j + 1);
        for (wi, (x, y)) in w.iter_mut().zip(a.iter().zip(b)) {
            *wi = (y - x) / dt;
        }
        let wnorm: f64 = w.iter().map(|v| v * v).sum::<f64>().sqrt();
        let (norm_sq, residual) = factor.min_norm_sq(&w);
        if residual > 1e-8 * (1.0 + wnorm) {
            return Ok(f64::INFINITY);
        }
        acc += 0.5 * dt * norm_sq;
    }
    Ok(acc)
}

/// Lévy path action `integral lambda(phi_dot) dt` with the transform
/// evaluated by [`legendre`] and cached on repeated slopes.
pub fn levy_path_action(phi: &CadlagPath, mgf: &LogMgf, box0: f64) -> Result<f64> {
    if phi.dim() != mgf.dim() {
        return Err(Error::DimensionMismatch(format!(
            "path dimension {} vs log-MGF dimension {}",
            phi.dim(),
            mgf.dim()
        )));
    }
    let start_norm: f64 = phi.node_value(0).iter().map(|v| v * v).sum::<f64>().sqrt();
    if start_norm > 1e-12 {
        return Err(Error::InvalidInput(format!("path must start at 0, got norm {start_norm}")));
    }
    let dt = phi.grid().dt();
    let mut cache: HashMap<Vec<u64>, f64> = HashMap::new();
    let mut acc = 0.0;
    for j in 0..phi.grid().steps() {
        let a = phi.node_value(j);
        let b = phi.node_value(j + 1);
        let slope: Vec<f64> = a.iter().zip(b).map(|(x, y)| (y - x) / dt).collect();
        let key: Vec<u64> = slope.iter().map(|v| v.to_bits()).collect();
        let lambda = match cache.get(&key) {
            Some(v) => *v,
            None => {
                let lv = legendre(mgf, &slope, box0)?;
                cache.insert(key, lv.value);
                lv.value
            }
        };
        if !lambda.is_finite() {
            return Ok(f64::INFINITY);
        }
        acc += lambda * dt;
    }
    Ok(acc)
}

/// Where a rate evaluation attains its value.
#[derive(Debug, Clone)]
pub enum Argmin {
    Path(CadlagPath),
    Point(Vec<f64>),
}

/// A rate-function evaluation with solver diagnostics. When `converged` is
/// false the value is only an upper bound on the infimum.
#[derive(Debug, Clone)]
pub struct RateReport {
    pub value: f64,
    pub argmin: Argmin,
    pub iterations: usize,
    pub grad_norm: f64,
    pub converged: bool,
}

/// The uniform ergodicity condition behind the occupation-measure LDP:
/// `P^l(x, .) <= (M/N) sum_{m<=N} P^m(y, .)` entrywise for all state pairs.
pub fn uniform_ergodicity_check(kernel: &[Vec<f64>], l: usize, n_pow: usize, m_const: f64) -> Result<bool> {
    validate_kernel(kernel)?;
    if l == 0 || n_pow == 0 || l > n_pow || m_const < 1.0 {
        return Err(Error::InvalidInput(
            "need 1 <= l <= N and M >= 1 in the ergodicity parameters".into(),
        ));
    }
    let d = kernel.len();
    let p = DMatrix::from_fn(d, d, |i, j| kernel[i][j]);
    let mut powers = Vec::with_capacity(n_pow);
    let mut cur = p.clone();
    for _ in 0..n_pow {
        powers.push(cur.clone());
        cur *= &p;
    }
    let pl = &powers[l - 1];
    let mut mix = DMatrix::zeros(d, d);
    for pm in &powers {
        mix += pm;
    }
    mix *= m_const / n_pow as f64;
    for x in 0..d {
        for y in 0..d {
            for u in 0..d {
                if pl[(x, u)] > mix[(y, u)] + 1e-12 {
                    return Ok(false);
                }
            }
        }
    }
    Ok(true)
}

/// Donsker–Varadhan occupation cost `I_P(mu) = -inf_f integral log(Pf/f) dmu`
/// over positive functions, minimized in the log parametrization `f = e^g`
/// with the gauge `g_1 = 0`.
///
/// `ergodicity`: parameters `(l, N, M)` for the uniform ergodicity
/// precondition; `None` waives the check.
pub fn donsker_varadhan(
    kernel: &[Vec<f64>],
    mu: &[f64],
    ergodicity: Option<(usize, usize, f64)>,
) -> Result<RateReport> {
    validate_kernel(kernel)?;
    let d = kernel.len();
    if mu.len() != d {
        return Err(Error::DimensionMismatch(format!(
            "measure over {} states for a {d}-state kernel",
            mu.len()
        )));
    }
    if mu.iter().any(|m| !(*m >= 0.0) || !m.is_finite()) {
        return Err(Error::InvalidInput("mu must be nonnegative and finite".into()));
    }
    if let Some((l, n_pow, m_const)) = ergodicity {
        if !uniform_ergodicity_check(kernel, l, n_pow, m_const)? {
            return Err(Error::InvalidInput(format!(
                "kernel fails the uniform ergodicity condition at (l, N, M) = ({l}, {n_pow}, {m_const})"
            )));
        }
    }
    // K(g) = sum_i mu_i [log (P e^g)_i - g_i], convex in g and invariant
    // under adding constants
    let objective = |g: &[f64]| -> f64 {
        let mut acc = 0.0;
        for i in 0..d {
            if mu[i] == 0.0 {
                continue;
            }
            let m = kernel[i]
                .iter()
                .zip(g)
                .filter(|(p, _)| **p > 0.0)
                .map(|(_, gj)| *gj)
                .fold(f64::NEG_INFINITY, f64::max);
            let z: f64 = kernel[i]
                .iter()
                .zip(g)
                .filter(|(p, _)| **p > 0.0)
                .map(|(p, gj)| p * (gj - m).exp())
                .sum();
            acc += mu[i] * (m + z.ln() - g[i]);
        }
        acc
    };
    let gradient = |g: &[f64]| -> Vec<f64> {
        let mut out: Vec<f64> = mu.iter().map(|m| -m).collect();
        for i in 0..d {
            if mu[i] == 0.0 {
                continue;
            }
            let m = kernel[i]
                .iter()
                .zip(g)
                .filter(|(p, _)| **p > 0.0)
                .map(|(_, gj)| *gj)
                .fold(f64::NEG_INFINITY, f64::max);
            let weights: Vec<f64> = kernel[i]
                .iter()
                .zip(g)
                .map(|(p, gj)| if *p > 0.0 { p * (gj - m).exp() } else { 0.0 })
                .collect();
            let z: f64 = weights.iter().sum();
            for (k, w) in weights.iter().enumerate() {
                out[k] += mu[i] * w / z;
            }
        }
        out
    };
    let mut g = vec![0.0; d];
    let mut fg = objective(&g);
    let mut step = 1.0f64;
    let mut iterations = 0usize;
    let mut grad_norm = f64::INFINITY;
    let mut converged = false;
    while iterations < 100_000 {
        iterations += 1;
        let grad = gradient(&g);
        grad_norm = grad.iter().map(|x| x * x).sum::<f64>().sqrt();
        if grad_norm < 1e-9 {
            converged = true;
            break;
        }
        step *= 2.0;
        let mut accepted = false;
        while step > 1e-18 {
            let mut cand: Vec<f64> = g.iter().zip(&grad).map(|(a, gr)| a - step * gr).collect();
            let base = cand[0];
            for c in cand.iter_mut() {
                *c -= base; // gauge fix, objective is invariant
            }
            let fc = objective(&cand);
            let descent: f64 = grad.iter().zip(cand.iter().zip(&g)).map(|(gr, (c, a))| gr * (c - a)).sum();
            if fc.is_finite() && fc <= fg + 1e-4 * descent && descent < 0.0 {
                g = cand;
                fg = fc;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            converged = true; // stalled at machine precision
            break;
        }
    }
    Ok(RateReport {
        value: (-fg).max(0.0),
        argmin: Argmin::Point(g),
        iterations,
        grad_norm,
        converged,
    })
}

/// Residual check of the controlled equation `x = u + F(x) . y*`.
#[derive(Debug, Clone)]
pub struct ResidualReport {
    pub residual: f64,
    pub threshold: f64,
    pub pass: bool,
}

/// Computes `sup_t ||x(t) - u(t) - (F(x) . y*)(t)||` with `F(state)` giving
/// one coefficient row per state dimension, and passes iff the residual is
/// within `tol (1 + T_T(y*))`.
pub fn verify_controlled_equation(
    x: &CadlagPath,
    u: &CadlagPath,
    coefficient: impl Fn(&[f64]) -> Vec<Vec<f64>>,
    ystar: &FiniteVariationPath,
    tol: f64,
) -> Result<ResidualReport> {
    x.check_same_grid(u)?;
    x.check_same_grid(ystar.coefficients())?;
    if x.dim() != u.dim() {
        return Err(Error::DimensionMismatch(format!("state dimensions {} vs {}", x.dim(), u.dim())));
    }
    let d = x.dim();
    let k = ystar.dim();
    let probe = coefficient(x.node_value(0));
    if probe.len() != d || probe.iter().any(|row| row.len() != k) {
        return Err(Error::DimensionMismatch(format!(
            "coefficient map must return {d} rows of {k} entries"
        )));
    }
    // one Stieltjes integral per state dimension
    let mut integrals = Vec::with_capacity(d);
    for r in 0..d {
        let mut row_values = Vec::with_capacity(x.nodes());
        for j in 0..x.nodes() {
            let rows = coefficient(x.node_value(j));
            row_values.extend_from_slice(&rows[r]);
        }
        let row_path = CadlagPath::new(*x.grid(), k, row_values, Interpolation::Step)?;
        integrals.push(fv_pathwise_integral(&row_path, ystar)?);
    }
    let mut residual = 0.0f64;
    for j in 0..x.nodes() {
        let mut err_sq = 0.0;
        for (r, integral) in integrals.iter().enumerate() {
            let e = x.node_value(j)[r] - u.node_value(j)[r] - integral.node_scalar(j);
            err_sq += e * e;
        }
        residual = residual.max(err_sq.sqrt());
    }
    let threshold = tol * (1.0 + total_variation(ystar, x.grid().horizon()));
    Ok(ResidualReport { residual, threshold, pass: residual <= threshold })
}

/// Node pins for the path minimizer: `(node index, value)` pairs.
pub type NodePins = Vec<(usize, Vec<f64>)>;

/// Minimizes a path functional over piecewise-linear node values with the
/// given nodes pinned, by Nesterov-accelerated projected gradient descent
/// with a finite-difference gradient and backtracking.
///
/// Restarts jitter the free nodes with counter-based noise; the best run
/// wins. Non-convergence leaves `converged = false` and the value is an
/// upper bound only.
pub fn minimize_action(
    action: &(impl Fn(&CadlagPath) -> f64 + ?Sized),
    grid: TimeGrid,
    dim: usize,
    pins: &NodePins,
    init: Option<&CadlagPath>,
    restarts: usize,
    seed: u64,
) -> Result<RateReport> {
    if pins.is_empty() {
        return Err(Error::InvalidInput("need at least one pinned node".into()));
    }
    for (j, v) in pins {
        if *j > grid.steps() {
            return Err(Error::InvalidInput(format!("pinned node {j} beyond the grid")));
        }
        if v.len() != dim {
            return Err(Error::DimensionMismatch(format!(
                "pin at node {j} has dimension {} vs {dim}",
                v.len()
            )));
        }
    }
    let nodes = grid.steps() + 1;
    let mut pinned = vec![false; nodes];
    let base = match init {
        Some(p) => {
            if p.grid() != &grid || p.dim() != dim {
                return Err(Error::GridMismatch("init path does not match grid/dim".into()));
            }
            p.clone()
        }
        None => default_init(grid, dim, pins),
    };
    let mut base_values = base.values().to_vec();
    for (j, v) in pins {
        pinned[*j] = true;
        base_values[j * dim..(j + 1) * dim].copy_from_slice(v);
    }
    let mut best: Option<(f64, Vec<f64>, usize, f64, bool)> = None;
    for r in 0..restarts.max(1) {
        let mut start = base_values.clone();
        if r > 0 {
            let mut s = RandomStream::new(seed, r as u64);
            let scale = 0.1 * (1.0 + start.iter().fold(0.0f64, |a, v| a.max(v.abs())));
            for j in 0..nodes {
                if !pinned[j] {
                    for v in start[j * dim..(j + 1) * dim].iter_mut() {
                        *v += scale * s.standard_normal();
                    }
                }
            }
        }
        let (value, values, iters, gn, conv) =
            descend_path(action, grid, dim, &pinned, start)?;
        let better = match &best {
            None => true,
            Some((bv, ..)) => value < *bv,
        };
        if better {
            best = Some((value, values, iters, gn, conv));
        }
    }
    let (value, values, iterations, grad_norm, converged) = best.expect("at least one restart");
    let path = CadlagPath::new(grid, dim, values, Interpolation::Linear)?;
    Ok(RateReport { value, argmin: Argmin::Path(path), iterations, grad_norm, converged })
}

fn default_init(grid: TimeGrid, dim: usize, pins: &NodePins) -> CadlagPath {
    // piecewise-linear through the pins, constant beyond the outermost ones
    let mut sorted: Vec<(usize, Vec<f64>)> = pins.to_vec();
    sorted.sort_by_key(|(j, _)| *j);
    let nodes = grid.steps() + 1;
    let mut values = vec![0.0; nodes * dim];
    for j in 0..nodes {
        let v: Vec<f64> = match (sorted.iter().rev().find(|(p, _)| *p <= j), sorted.iter().find(|(p, _)| *p >= j)) {
            (Some((pl, vl)), Some((pr, vr))) if pl != pr => {
                let w = (j - pl) as f64 / (pr - pl) as f64;
                vl.iter().zip(vr).map(|(a, b)| a + w * (b - a)).collect()
            }
            (Some((_, vl)), _) => vl.clone(),
            (None, Some((_, vr))) => vr.clone(),
            (None, None) => unreachable!("pins nonempty"),
        };
        values[j * dim..(j + 1) * dim].copy_from_slice(&v);
    }
    CadlagPath::new(grid, dim, values, Interpolation::Linear).expect("consistent by construction")
}

fn descend_path(
    action: &(impl Fn(&CadlagPath) -> f64 + ?Sized),
    grid: TimeGrid,
    dim: usize,
    pinned: &[bool],
    start: Vec<f64>,
) -> Result<(f64, Vec<f64>, usize, f64, bool)> {
    let nodes = grid.steps() + 1;
    let free: Vec<usize> = (0..nodes * dim).filter(|i| !pinned[i / dim]).collect();
    let eval = |values: &[f64]| -> f64 {
        let p = CadlagPath::new(grid, dim, values.to_vec(), Interpolation::Linear).expect("shape");
        action(&p)
    };
    let mut x = start;
    let mut fx = eval(&x);
    if !fx.is_finite() {
        // infeasible start: report the infinity instead of failing, so pin
        // sweeps can pass over it
        return Ok((f64::INFINITY, x, 0, f64::INFINITY, false));
    }
    let mut momentum = x.clone();
    let mut step = 1.0f64;
    let mut iterations = 0usize;
    let mut grad_norm = f64::INFINITY;
    let mut converged = false;
    let mut t_acc = 1.0f64;
    let mut stalled = 0usize;
    while iterations < 100_000 {
        iterations += 1;
        // finite-difference gradient at the momentum point
        let mut grad = vec![0.0; x.len()];
        let mut probe = momentum.clone();
        let f_m = eval(&momentum);
        let mut gn2 = 0.0;
        for &i in &free {
            let h = 1e-6 * (1.0 + momentum[i].abs());
            probe[i] = momentum[i] + h;
            let fp = eval(&probe);
            probe[i] = momentum[i] - h;
            let fm = eval(&probe);
            probe[i] = momentum[i];
            let g = if fp.is_finite() && fm.is_finite() {
                (fp - fm) / (2.0 * h)
            } else if fp.is_finite() {
                (fp - f_m) / h
            } else if fm.is_finite() {
                (f_m - fm) / h
            } else {
                0.0
            };
            grad[i] = g;
            gn2 += g * g;
        }
        grad_norm = gn2.sqrt();
        if grad_norm < 1e-7 {
            converged = true;
            break;
        }
        step *= 2.0;
        let mut accepted = false;
        while step > 1e-16 {
            let cand: Vec<f64> = momentum
                .iter()
                .zip(&grad)
                .map(|(a, g)| a - step * g)
                .collect();
            let fc = eval(&cand);
            if fc.is_finite() && fc <= fx - 1e-4 * step * gn2 {
                // Nesterov update
                let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t_acc * t_acc).sqrt());
                let beta = (t_acc - 1.0) / t_next;
                let mut mom = cand.clone();
                for &i in &free {
                    mom[i] = cand[i] + beta * (cand[i] - x[i]);
                }
                if fx - fc <= 1e-13 * (1.0 + fx.abs()) {
                    stalled += 1;
                } else {
                    stalled = 0;
                }
                x = cand;
                fx = fc;
                momentum = mom;
                t_acc = t_next;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if stalled >= 20 {
            // progress below floating-point resolution of the objective
            converged = true;
            break;
        }
        if !accepted {
            // restart momentum once, then declare the search stalled
            if momentum != x {
                momentum = x.clone();
                t_acc = 1.0;
                continue;
            }
            converged = true;
            break;
        }
    }
    Ok((fx, x, iterations, grad_norm, converged))
}

/// Minimizes the action over scalar paths from 0 forced to reach
/// `|phi| >= level` somewhere on the grid: each node and sign is pinned in
/// turn and the best pinned minimum wins.
pub fn minimize_action_hitting(
    action: &(impl Fn(&CadlagPath) -> f64 + ?Sized),
    level: f64,
    grid: TimeGrid,
    restarts: usize,
    seed: u64,
) -> Result<RateReport> {
    if !(level > 0.0) {
        return Err(Error::InvalidInput(format!("hitting level {level} must be positive")));
    }
    let mut best: Option<RateReport> = None;
    for j in 1..=grid.steps() {
        for sign in [1.0, -1.0] {
            let pins: NodePins = vec![(0, vec![0.0]), (j, vec![sign * level])];
            let report = minimize_action(action, grid, 1, &pins, None, restarts, seed ^ j as u64)?;
            let better = match &best {
                None => true,
                Some(b) => report.value < b.value,
            };
            if better {
                best = Some(report);
            }
        }
    }
    Ok(best.expect("grid has at least one step"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn exp_mgf() -> LogMgf {
        LogMgf::new(
            1,
            Arc::new(|x: &[f64]| x[0].exp_m1()),
            Some(Arc::new(|x: &[f64]| vec![x[0].exp()])),
        )
        .unwrap()
    }

    fn quad_mgf() -> LogMgf {
        LogMgf::new(
            1,
            Arc::new(|x: &[f64]| 0.5 * x[0] * x[0]),
            Some(Arc::new(|x: &[f64]| vec![x[0]])),
        )
        .unwrap()
    }

    #[test]
    fn legendre_of_exponential_at_one_is_zero() {
        let lv = legendre(&exp_mgf(), &[1.0], 10.0).unwrap();
        assert!(lv.converged);
        assert!(lv.value.abs() <= 1e-9, "lambda(1) = {}", lv.value);
    }

    #[test]
    fn legendre_of_exponential_matches_conjugate() {
        // lambda(y) = y ln y - y + 1, cross-checked by a grid-refinement oracle
        let mgf = exp_mgf();
        for y in [0.5, 2.0, 3.7] {
            let lv = legendre(&mgf, &[y], 10.0).unwrap();
            let analytic = y * y.ln() - y + 1.0;
            assert!((lv.value - analytic).abs() <= 1e-8, "y={y}: {} vs {analytic}", lv.value);
            // oracle: dense grid over x, refined twice around the best point
            let mut lo = -10.0;
            let mut hi = 10.0;
            let mut best = f64::NEG_INFINITY;
            for _ in 0..4 {
                let mut bestx = lo;
                for k in 0..=4000 {
                    let x = lo + (hi - lo) * k as f64 / 4000.0;
                    let v = x * y - x.exp_m1();
                    if v > best {
                        best = v;
                        bestx = x;
                    }
                }
                let w = (hi - lo) / 400.0;
                lo = bestx - w;
                hi = bestx + w;
            }
            assert!((lv.value - best).abs() <= 1e-8, "y={y}: {} vs oracle {best}", lv.value);
        }
    }

    #[test]
    fn quadratic_is_self_conjugate() {
        let mgf = quad_mgf();
        for y in [-2.0, 0.3, 1.7] {
            let lv = legendre(&mgf, &[y], 10.0).unwrap();
            assert!((lv.value - 0.5 * y * y).abs() <= 1e-9, "y={y}: {}", lv.value);
        }
    }

    #[test]
    fn legendre_flags_unbounded_directions() {
        // mu linear-bounded above: sup of x*y - mu escapes for y < 0
        let lv = legendre(&exp_mgf(), &[-1.0], 10.0).unwrap();
        assert!(lv.unbounded);
        assert!(lv.value.is_infinite());
    }

    #[test]
    fn non_convex_mgf_rejected() {
        let bad = LogMgf::new(1, Arc::new(|x: &[f64]| -(x[0] * x[0])), None);
        assert!(bad.is_err());
    }

    #[test]
    fn envelope_identity_at_random_points() {
        // lambda(grad mu(x)) = x . grad mu(x) - mu(x)
        let mgf = exp_mgf();
        let mut s = RandomStream::new(3, 0);
        for _ in 0..5 {
            let x = s.uniform_range(-1.0, 1.5);
            let y = mgf.grad(&[x])[0];
            let lv = legendre(&mgf, &[y], 10.0).unwrap();
            let envelope = x * y - mgf.eval(&[x]);
            assert!((lv.value - envelope).abs() <= 1e-7, "x={x}: {} vs {envelope}", lv.value);
        }
    }

    #[test]
    fn rate_vanishes_at_the_mean() {
        // lambda(grad mu(0)) = 0 and lambda >= 0 for every shipped log-MGF
        let space = DiscreteMeasureSpace::new(vec![0.3, 0.7]).unwrap();
        let h = vec![
            GridFunction::new(space.clone(), vec![1.0, -0.5]).unwrap(),
            GridFunction::new(space.clone(), vec![0.2, 0.9]).unwrap(),
        ];
        let pois = poisson_log_mgf(&h, &space).unwrap();
        let cram = cramer_log_mgf(&[vec![0.0], vec![1.0]], &[0.5, 0.5]).unwrap();
        for mgf in [&pois, &cram] {
            let mean = mgf.grad(&vec![0.0; mgf.dim()]);
            let lv = legendre(mgf, &mean, 10.0).unwrap();
            assert!(lv.value.abs() <= 1e-8, "lambda at mean = {}", lv.value);
            let mut s = RandomStream::new(7, 0);
            for _ in 0..4 {
                let y: Vec<f64> = (0..mgf.dim()).map(|_| s.uniform_range(0.1, 1.2)).collect();
                let lv = legendre(mgf, &y, 10.0).unwrap();
                assert!(lv.value >= -1e-10);
            }
        }
    }

    #[test]
    fn poisson_mgf_matches_single_cell_form() {
        let space = DiscreteMeasureSpace::single_cell(1.0).unwrap();
        let h = vec![GridFunction::constant(space.clone(), 1.0)];
        let mgf = poisson_log_mgf(&h, &space).unwrap();
        assert_eq!(mgf.eval(&[0.0]), 0.0);
        for x in [-1.0, 0.5, 2.0] {
            assert!((mgf.eval(&[x]) - x.exp_m1()).abs() <= 1e-14);
        }
    }

    #[test]
    fn poisson_gradient_matches_finite_differences() {
        let space = DiscreteMeasureSpace::new(vec![0.4, 0.6]).unwrap();
        let h = vec![
            GridFunction::new(space.clone(), vec![1.0, -1.0]).unwrap(),
            GridFunction::new(space.clone(), vec![0.5, 0.25]).unwrap(),
        ];
        let mgf = poisson_log_mgf(&h, &space).unwrap();
        let mut s = RandomStream::new(11, 0);
        for _ in 0..5 {
            let x: Vec<f64> = (0..2).map(|_| s.uniform_range(-1.0, 1.0)).collect();
            let g = mgf.grad(&x);
            for i in 0..2 {
                let mut xp = x.clone();
                let hstep = 1e-6 * (1.0 + x[i].abs());
                xp[i] += hstep;
                let fp = mgf.eval(&xp);
                xp[i] = x[i] - hstep;
                let fm = mgf.eval(&xp);
                let fd = (fp - fm) / (2.0 * hstep);
                assert!((g[i] - fd).abs() <= 1e-6 * (1.0 + fd.abs()), "{} vs {fd}", g[i]);
            }
        }
    }

    #[test]
    fn cramer_mgf_of_fair_coin() {
        let mgf = cramer_log_mgf(&[vec![0.0], vec![1.0]], &[0.5, 0.5]).unwrap();
        assert_eq!(mgf.eval(&[0.0]), 0.0);
        for p in [-2.0f64, 0.3, 1.0] {
            let want = ((1.0 + p.exp()) / 2.0).ln();
            assert!((mgf.eval(&[p]) - want).abs() <= 1e-12);
        }
        // gradient check
        let g = mgf.grad(&[0.7]);
        let fd = (mgf.eval(&[0.7 + 1e-6]) - mgf.eval(&[0.7 - 1e-6])) / 2e-6;
        assert!((g[0] - fd).abs() <= 1e-6);
    }

    #[test]
    fn gram_factor_reconstructs_and_whitens() {
        let space = DiscreteMeasureSpace::new(vec![0.5, 0.5]).unwrap();
        let h = vec![
            GridFunction::new(space.clone(), vec![1.0, 0.2]).unwrap(),
            GridFunction::new(space.clone(), vec![0.2, 1.3]).unwrap(),
        ];
        let f = GramFactor::from_functions(&h).unwrap();
        assert_eq!(f.rank(), 2);
        let c = f.matrix();
        let sigma = &c * c.transpose();
        assert!((sigma[(0, 0)] - h[0].inner(&h[0]).unwrap()).abs() <= 1e-10);
        assert!((sigma[(0, 1)] - h[0].inner(&h[1]).unwrap()).abs() <= 1e-10);
    }

    #[test]
    fn schilder_action_of_zero_and_ramp() {
        let grid = TimeGrid::new(1.0, 64).unwrap();
        let factor = GramFactor::from_matrix(DMatrix::from_element(1, 1, 1.0)).unwrap();
        let zero = CadlagPath::zero(grid, 1, Interpolation::Linear);
        assert_eq!(schilder_action(&zero, &factor).unwrap(), 0.0);
        let c = 1.8;
        let ramp = CadlagPath::sample_scalar(grid, Interpolation::Linear, |t| c * t);
        let a = schilder_action(&ramp, &factor).unwrap();
        assert!((a - c * c / 2.0).abs() <= 1e-12, "{a}");
    }

    #[test]
    fn schilder_action_invariant_under_whitening() {
        // action of psi w.r.t. C equals action of the whitened path w.r.t. identity
        let space = DiscreteMeasureSpace::new(vec![0.5, 0.5]).unwrap();
        let h = vec![
            GridFunction::new(space.clone(), vec![1.0, 0.4]).unwrap(),
            GridFunction::new(space.clone(), vec![0.4, 0.9]).unwrap(),
        ];
        let factor = GramFactor::from_functions(&h).unwrap();
        let grid = TimeGrid::new(1.0, 32).unwrap();
        let mut s = RandomStream::new(13, 0);
        let mut phi = vec![0.0, 0.0];
        let mut values = phi.clone();
        for _ in 0..32 {
            phi[0] += 0.2 * s.standard_normal();
            phi[1] += 0.2 * s.standard_normal();
            values.extend_from_slice(&phi);
        }
        let white = CadlagPath::new(grid, 2, values.clone(), Interpolation::Linear).unwrap();
        // psi = C phi nodewise
        let c = factor.matrix();
        let mut psi_values = Vec::with_capacity(values.len());
        for j in 0..=32 {
            let v = nalgebra::DVector::from_column_slice(&values[j * 2..(j + 1) * 2]);
            let w = &c * v;
            psi_values.extend(w.iter());
        }
        let psi = CadlagPath::new(grid, 2, psi_values, Interpolation::Linear).unwrap();
        let ident = GramFactor::from_matrix(DMatrix::identity(2, 2)).unwrap();
        let a1 = schilder_action(&psi, &factor).unwrap();
        let a2 = schilder_action(&white, &ident).unwrap();
        assert!((a1 - a2).abs() <= 1e-8 * (1.0 + a2), "{a1} vs {a2}");
    }

    #[test]
    fn rank_deficient_increments_are_infeasible() {
        let sigma = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]); // rank 1
        let factor = GramFactor::from_matrix(sigma).unwrap();
        assert_eq!(factor.rank(), 1);
        let grid = TimeGrid::new(1.0, 4).unwrap();
        // increments along (1, -1) leave the range of the factor
        let mut values = Vec::new();
        for j in 0..=4 {
            let t = j as f64 / 4.0;
            values.extend_from_slice(&[t, -t]);
        }
        let psi = CadlagPath::new(grid, 2, values, Interpolation::Linear).unwrap();
        assert!(schilder_action(&psi, &factor).unwrap().is_infinite());
    }

    #[test]
    fn levy_action_of_mean_line_is_zero() {
        let space = DiscreteMeasureSpace::single_cell(1.0).unwrap();
        let h = vec![GridFunction::constant(space.clone(), 1.0)];
        let mgf = poisson_log_mgf(&h, &space).unwrap();
        let grid = TimeGrid::new(1.0, 32).unwrap();
        let mean = mgf.grad(&[0.0])[0];
        let line = CadlagPath::sample_scalar(grid, Interpolation::Linear, |t| mean * t);
        let a = levy_path_action(&line, &mgf, 10.0).unwrap();
        assert!(a.abs() <= 1e-7, "{a}");
    }

    #[test]
    fn levy_action_of_double_rate_line() {
        let space = DiscreteMeasureSpace::single_cell(1.0).unwrap();
        let h = vec![GridFunction::constant(space.clone(), 1.0)];
        let mgf = poisson_log_mgf(&h, &space).unwrap();
        let grid = TimeGrid::new(1.0, 64).unwrap();
        let line = CadlagPath::sample_scalar(grid, Interpolation::Linear, |t| 2.0 * t);
        let a = levy_path_action(&line, &mgf, 10.0).unwrap();
        let want = 2.0 * 2.0f64.ln() - 1.0;
        assert!((a - want).abs() <= 1e-7, "{a} vs {want}");
    }

    #[test]
    fn levy_action_adds_over_segments() {
        let space = DiscreteMeasureSpace::single_cell(1.0).unwrap();
        let h = vec![GridFunction::constant(space.clone(), 1.0)];
        let mgf = poisson_log_mgf(&h, &space).unwrap();
        let grid = TimeGrid::new(1.0, 64).unwrap();
        let kink = CadlagPath::sample_scalar(grid, Interpolation::Linear, |t| {
            if t <= 0.5 {
                2.0 * t
            } else {
                1.0 + 0.5 * (t - 0.5)
            }
        });
        let a = levy_path_action(&kink, &mgf, 10.0).unwrap();
        let lam = |y: f64| y * y.ln() - y + 1.0;
        let want = 0.5 * lam(2.0) + 0.5 * lam(0.5);
        assert!((a - want).abs() <= 1e-6, "{a} vs {want}");
    }

    fn two_state_stationary(kernel: &[Vec<f64>]) -> Vec<f64> {
        let (a, b) = (kernel[0][1], kernel[1][0]);
        vec![b / (a + b), a / (a + b)]
    }

    #[test]
    fn dv_vanishes_at_stationary() {
        let kernel = vec![vec![0.7, 0.3], vec![0.4, 0.6]];
        let pi = two_state_stationary(&kernel);
        let r = donsker_varadhan(&kernel, &pi, None).unwrap();
        assert!(r.value <= 1e-8, "I_P(pi) = {}", r.value);
    }

    #[test]
    fn dv_nonnegative_everywhere() {
        let kernel = vec![vec![0.6, 0.4], vec![0.25, 0.75]];
        let mut s = RandomStream::new(19, 0);
        for _ in 0..6 {
            let m1 = s.uniform();
            let r = donsker_varadhan(&kernel, &[m1, 1.0 - m1], None).unwrap();
            assert!(r.value >= 0.0);
        }
    }

    #[test]
    fn dv_matches_brute_force_grid_on_permutation_like_kernel() {
        // near-permutation on 2 states, mu concentrated on state 0; the exact
        // infimum over the brute-force box is attained on its boundary
        let kernel = vec![vec![0.05, 0.95], vec![0.95, 0.05]];
        let mu = [1.0, 0.0];
        let mut brute = f64::INFINITY;
        let mut g2 = -10.0f64;
        while g2 <= 10.0 {
            // gauge g1 = 0 wlog; K depends on g2 - g1 only
            let k = (0.05f64 + 0.95 * g2.exp()).ln();
            brute = brute.min(k);
            g2 += 0.01;
        }
        let brute_value = -brute;
        let r = donsker_varadhan(&kernel, &mu, None).unwrap();
        // the optimizer runs past the box, approaching -ln 0.05
        assert!(r.value >= brute_value - 1e-9);
        assert!(r.value <= -(0.05f64.ln()) + 1e-6);
    }

    #[test]
    fn dv_permutation_equivariance() {
        let kernel = vec![vec![0.7, 0.3], vec![0.4, 0.6]];
        let mu = [0.25, 0.75];
        let swapped_kernel = vec![vec![0.6, 0.4], vec![0.3, 0.7]];
        let swapped_mu = [0.75, 0.25];
        let a = donsker_varadhan(&kernel, &mu, None).unwrap();
        let b = donsker_varadhan(&swapped_kernel, &swapped_mu, None).unwrap();
        assert!((a.value - b.value).abs() <= 1e-10, "{} vs {}", a.value, b.value);
    }

    #[test]
    fn ergodicity_check_accepts_mixing_and_rejects_permutation() {
        let mixing = vec![vec![0.5, 0.5], vec![0.5, 0.5]];
        assert!(uniform_ergodicity_check(&mixing, 1, 1, 1.0).unwrap());
        let perm = vec![vec![0.0, 1.0], vec![1.0, 0.0]];
        assert!(!uniform_ergodicity_check(&perm, 1, 1, 1.0).unwrap());
        // averaging two powers of the permutation fixes it
        assert!(uniform_ergodicity_check(&perm, 1, 2, 2.0).unwrap());
        let r = donsker_varadhan(&perm, &[0.5, 0.5], Some((1, 1, 1.0)));
        assert!(r.is_err());
    }

    #[test]
    fn verify_controlled_equation_self_consistency() {
        // x(t) = u(t) + integral b dt with b constant: residual ~ 0
        let grid = TimeGrid::new(1.0, 64).unwrap();
        let u = CadlagPath::sample_scalar(grid, Interpolation::Step, |_| 0.3);
        let ystar = FiniteVariationPath::new(CadlagPath::sample_scalar(grid, Interpolation::Linear, |t| t));
        // Euler/left-point solution of x' = 2, x(0) = 0.3
        let x = CadlagPath::sample_scalar(grid, Interpolation::Step, |t| 0.3 + 2.0 * t);
        let rep = verify_controlled_equation(&x, &u, |_| vec![vec![2.0]], &ystar, 1e-9).unwrap();
        assert!(rep.pass, "residual {}", rep.residual);

        // injected violation at the endpoint
        let mut bad = x.values().to_vec();
        *bad.last_mut().unwrap() += 1.0;
        let xb = CadlagPath::scalar(grid, bad, Interpolation::Step).unwrap();
        let rep = verify_controlled_equation(&xb, &u, |_| vec![vec![2.0]], &ystar, 1e-9).unwrap();
        assert!(!rep.pass);
        assert!(rep.residual >= 1.0 - 1e-9);

        // F = 0 passes iff x = u
        let rep = verify_controlled_equation(&u, &u, |_| vec![vec![0.0]], &ystar, 1e-9).unwrap();
        assert!(rep.pass);
    }

    #[test]
    fn minimize_fixed_endpoint_schilder_is_the_straight_line() {
        let grid = TimeGrid::new(1.0, 32).unwrap();
        let factor = GramFactor::from_matrix(DMatrix::from_element(1, 1, 1.0)).unwrap();
        let action = move |p: &CadlagPath| schilder_action(p, &factor).unwrap();
        let c = 1.4;
        let pins: NodePins = vec![(0, vec![0.0]), (32, vec![c])];
        let r = minimize_action(&action, grid, 1, &pins, None, 2, 7).unwrap();
        assert!((r.value - c * c / 2.0).abs() <= 1e-6, "value {}", r.value);
        if let Argmin::Path(p) = &r.argmin {
            // straight line within solver tolerance
            for j in 0..=32 {
                let t = grid.node(j);
                assert!((p.node_scalar(j) - c * t).abs() <= 1e-3);
            }
        } else {
            panic!("expected a path argmin");
        }
    }

    #[test]
    fn minimize_hitting_schilder_gives_half() {
        let grid = TimeGrid::new(1.0, 16).unwrap();
        let factor = GramFactor::from_matrix(DMatrix::from_element(1, 1, 1.0)).unwrap();
        let action = move |p: &CadlagPath| schilder_action(p, &factor).unwrap();
        let r = minimize_action_hitting(&action, 1.0, grid, 1, 3).unwrap();
        assert!((r.value - 0.5).abs() <= 1e-6, "value {}", r.value);
    }

    #[test]
    fn minimize_levy_endpoint_matches_line_action() {
        let space = DiscreteMeasureSpace::single_cell(1.0).unwrap();
        let h = vec![GridFunction::constant(space.clone(), 1.0)];
        let mgf = poisson_log_mgf(&h, &space).unwrap();
        let grid = TimeGrid::new(1.0, 16).unwrap();
        let action = move |p: &CadlagPath| levy_path_action(p, &mgf, 10.0).unwrap();
        let pins: NodePins = vec![(0, vec![0.0]), (16, vec![2.0])];
        let r = minimize_action(&action, grid, 1, &pins, None, 1, 11).unwrap();
        let want = 2.0 * 2.0f64.ln() - 1.0;
        assert!((r.value - want).abs() <= 1e-5, "value {} vs {want}", r.value);
    }

    #[test]
    fn gaussian_rate_family_marginalizes_consistently() {
        // minimizing the pair action over the second coordinate reproduces
        // the one-dimensional rate of the first
        let space = DiscreteMeasureSpace::new(vec![0.5, 0.5]).unwrap();
        let grid = TimeGrid::new(1.0, 16).unwrap();
        let mut s = RandomStream::new(23, 0);
        for trial in 0..3 {
            let h1 = GridFunction::new(space.clone(), vec![s.uniform_range(0.5, 1.5), s.uniform_range(-0.5, 0.5)]).unwrap();
            let h2 = GridFunction::new(space.clone(), vec![s.uniform_range(-0.5, 0.5), s.uniform_range(0.5, 1.5)]).unwrap();
            let factor = GramFactor::from_functions(&[h1.clone(), h2.clone()]).unwrap();
            let c = s.uniform_range(0.4, 1.2);
            let sigma11 = h1.inner(&h1).unwrap();
            let analytic = 0.5 * c * c / sigma11;
            // pair action with y1 pinned to the line c t, y2 free
            let action = {
                let factor = factor.clone();
                move |y2: &CadlagPath| {
                    let mut values = Vec::with_capacity(2 * y2.nodes());
                    for j in 0..y2.nodes() {
                        values.push(c * y2.grid().node(j));
                        values.push(y2.node_scalar(j));
                    }
                    let pair = CadlagPath::new(*y2.grid(), 2, values, Interpolation::Linear).unwrap();
                    schilder_action(&pair, &factor).unwrap()
                }
            };
            let pins: NodePins = vec![(0, vec![0.0])];
            let r = minimize_action(&action, grid, 1, &pins, None, 2, 31 + trial).unwrap();
            assert!(
                (r.value - analytic).abs() <= 1e-4 * (1.0 + analytic),
                "trial {trial}: {} vs {analytic}",
                r.value
            );
        }
    }
}
