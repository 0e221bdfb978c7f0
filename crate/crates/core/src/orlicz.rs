//! Young functions and Luxemburg (Orlicz) norms on discrete measure spaces.
//!
//! The Orlicz norm `||f||_Phi = inf{A > 0 : integral Phi(|f|/A) dmu <= 1}` is
//! the unit-ball gauge used by the Poisson exponential-tightness bounds. On a
//! finite cell space the integral is an exact sum, so the norm is computed by
//! bisection in `A` against the monotone map `A -> integral Phi(|f|/A)`.
//!
//! "Finite" here means representable in f64: on a discrete space with finite
//! masses every integral is a finite sum, so the Morse–Transue membership
//! check reduces to an overflow probe at the requested dilations.

use crate::error::{Error, Result};
use crate::space::GridFunction;

type Evaluator = Box<dyn Fn(f64) -> f64 + Send + Sync>;

/// An even, nondecreasing, convex function with `Phi(0) = 0` growing to
/// infinity; validated on a sampled grid at construction.
pub struct YoungFunction {
    evaluator: Evaluator,
    name: String,
    parameters: Vec<f64>,
}

impl std::fmt::Debug for YoungFunction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("YoungFunction")
            .field("name", &self.name)
            .field("parameters", &self.parameters)
            .finish()
    }
}

impl YoungFunction {
    pub fn new(name: &str, parameters: Vec<f64>, evaluator: Evaluator) -> Result<Self> {
        let phi = Self { evaluator, name: name.to_string(), parameters };
        phi.validate()?;
        Ok(phi)
    }

    /// `Phi(x) = e^|x| - 1`, the exponential Orlicz function of the Poisson
    /// bounds.
    pub fn exp_minus_one() -> Self {
        Self {
            evaluator: Box::new(|x: f64| x.abs().exp() - 1.0),
            name: "exp_minus_one".into(),
            parameters: vec![],
        }
    }

    /// `Phi(x) = |x|^p`, reproducing the L^p norm for `p >= 1`.
    pub fn power(p: f64) -> Result<Self> {
        if !(p >= 1.0) {
            return Err(Error::InvalidInput(format!("power_p needs p >= 1, got {p}")));
        }
        Ok(Self {
            evaluator: Box::new(move |x: f64| x.abs().powf(p)),
            name: "power_p".into(),
            parameters: vec![p],
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn parameters(&self) -> &[f64] {
        &self.parameters
    }

    pub fn eval(&self, x: f64) -> f64 {
        (self.evaluator)(x)
    }

    /// Checks the Young-function axioms on a sampled grid.
    pub fn validate(&self) -> Result<()> {
        let phi0 = self.eval(0.0);
        if phi0.abs() > 1e-12 {
            return Err(Error::InvalidInput(format!("Phi(0) = {phi0}, expected 0")));
        }
        let sample: Vec<f64> = (1..=40).map(|i| i as f64 * 0.25).collect();
        for &x in &sample {
            let v = self.eval(x);
            if !v.is_finite() && x <= 5.0 {
                return Err(Error::InvalidInput(format!("Phi({x}) is not finite")));
            }
            if (self.eval(-x) - v).abs() > 1e-9 * (1.0 + v.abs()) {
                return Err(Error::InvalidInput(format!("Phi is not even at x = {x}")));
            }
        }
        for w in sample.windows(2) {
            if self.eval(w[1]) < self.eval(w[0]) - 1e-12 {
                return Err(Error::InvalidInput(format!("Phi decreases on [{}, {}]", w[0], w[1])));
            }
            // midpoint convexity on the sampled pairs
            let mid = 0.5 * (w[0] + w[1]);
            let chord = 0.5 * (self.eval(w[0]) + self.eval(w[1]));
            if self.eval(mid) > chord + 1e-9 * (1.0 + chord.abs()) {
                return Err(Error::InvalidInput(format!("Phi is not convex near x = {mid}")));
            }
        }
        // growth: doubling the argument five times must at least double the
        // value (true for any unbounded convex function, false for bounded ones)
        let far = self.eval(320.0);
        if far.is_finite() && far < 2.0 * self.eval(10.0).max(1e-12) {
            return Err(Error::InvalidInput("Phi does not grow to infinity".into()));
        }
        Ok(())
    }
}

/// Integral of `Phi(|f|/a)` over the space; zero-mass cells contribute
/// nothing even where the evaluator overflows.
fn modular(f: &GridFunction, phi: &YoungFunction, a: f64) -> f64 {
    f.values()
        .iter()
        .zip(f.space().masses())
        .filter(|(_, m)| **m > 0.0)
        .map(|(v, m)| phi.eval(v.abs() / a) * m)
        .sum()
}

/// Luxemburg norm by bisection; returns 0 for `f == 0`.
///
/// The initial bracket is `[max|f| * 1e-6, max|f| * 1e6]`, doubled outward up
/// to 60 times when it fails to straddle the unit level.
pub fn orlicz_norm(f: &GridFunction, phi: &YoungFunction, tol: f64) -> Result<f64> {
    if !(tol > 0.0) {
        return Err(Error::InvalidInput(format!("tolerance {tol} must be positive")));
    }
    phi.validate()?;
    let scale = f.max_abs();
    if scale == 0.0 {
        return Ok(0.0);
    }
    let mut lo = scale * 1e-6;
    let mut hi = scale * 1e6;
    // grow the bracket until modular(lo) >= 1 >= modular(hi)
    let mut doublings = 0;
    while modular(f, phi, lo) < 1.0 {
        hi = lo;
        lo *= 0.5;
        doublings += 1;
        if doublings > 60 {
            // norm is below any positive bracket: the function is negligible
            return Ok(0.0);
        }
    }
    doublings = 0;
    while modular(f, phi, hi) > 1.0 {
        if !modular(f, phi, hi).is_finite() {
            lo = hi;
        }
        hi *= 2.0;
        doublings += 1;
        if doublings > 60 {
            return Err(Error::Unbounded(
                "modular integral stays above 1 at the largest bracket".into(),
            ));
        }
    }
    while hi - lo > tol * hi {
        let mid = 0.5 * (lo + hi);
        let v = modular(f, phi, mid);
        if v > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// `integral Phi(|f|) dmu <= 1`, the unit-ball criterion equivalent to
/// `||f||_Phi <= 1`.
pub fn unit_ball_check(f: &GridFunction, phi: &YoungFunction) -> Result<bool> {
    phi.validate()?;
    Ok(modular(f, phi, 1.0) <= 1.0)
}

/// True when `integral Phi(a |f|) dmu` is finite at every probe dilation.
pub fn morse_transue_member(f: &GridFunction, phi: &YoungFunction, a_probe: &[f64]) -> Result<bool> {
    if a_probe.is_empty() {
        return Err(Error::InvalidInput("probe list must be nonempty".into()));
    }
    if a_probe.iter().any(|a| !(*a > 0.0)) || a_probe.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidInput("probes must be positive and increasing".into()));
    }
    for &a in a_probe {
        let v: f64 = f
            .values()
            .iter()
            .zip(f.space().masses())
            .filter(|(_, m)| **m > 0.0)
            .map(|(x, m)| phi.eval(a * x.abs()) * m)
            .sum();
        if !v.is_finite() {
            return Ok(false);
        }
    }
    Ok(true)
}
