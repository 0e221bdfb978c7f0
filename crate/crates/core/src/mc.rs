//! Rare-event Monte Carlo: tail estimation, decay-rate regression, exact
//! tail oracles, and the empirical uniform-exponential-tightness certificate.
//!
//! Replicas are embarrassingly parallel: replica `i` always runs on the
//! counter-based stream `(seed, i)`, and the only reduction is integer hit
//! counting, so estimates are bit-identical regardless of the worker count.

use rayon::prelude::*;
use statrs::function::gamma::ln_gamma;

use crate::drivers::{simulate_gaussian, simulate_poisson};
use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::integrate::{simple_integral, SimpleProcess};
use crate::orlicz::YoungFunction;
use crate::space::DiscreteMeasureSpace;
use crate::stream::RandomStream;
use std::sync::Arc;

const WILSON_Z: f64 = 1.959963984540054;

/// A rare-event probability estimate at one scale, with its Wilson 95%
/// interval.
#[derive(Debug, Clone, PartialEq)]
pub struct TailEstimate {
    pub n: u64,
    pub hits: u64,
    pub samples: u64,
    pub p_hat: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

impl TailEstimate {
    pub fn from_counts(n: u64, hits: u64, samples: u64) -> Self {
        let s = samples as f64;
        let p = hits as f64 / s;
        let z2 = WILSON_Z * WILSON_Z;
        let denom = 1.0 + z2 / s;
        let center = (p + z2 / (2.0 * s)) / denom;
        let half = WILSON_Z * (p * (1.0 - p) / s + z2 / (4.0 * s * s)).sqrt() / denom;
        // clamp away the 1-ulp excursions at the extremes so the interval
        // always brackets p_hat
        TailEstimate {
            n,
            hits,
            samples,
            p_hat: p,
            ci_low: (center - half).max(0.0).min(p),
            ci_high: (center + half).min(1.0).max(p),
        }
    }

    pub fn zero_hits(&self) -> bool {
        self.hits == 0
    }

    /// `-log(p_hat) / n`, the per-scale decay estimate.
    pub fn neglog_over_n(&self) -> f64 {
        -self.p_hat.ln() / self.n as f64
    }
}

/// Estimates `P[event]` by i.i.d. replicas on streams `(seed, 0..samples)`.
///
/// `simulator` receives the scale `n` and the replica's stream and produces
/// whatever summary the event predicate consumes.
pub fn estimate_tail<T, E, S>(
    event: E,
    simulator: S,
    n: u64,
    samples: u64,
    seed: u64,
) -> Result<TailEstimate>
where
    T: Send,
    E: Fn(&T) -> bool + Sync,
    S: Fn(u64, &mut RandomStream) -> T + Sync,
{
    if samples < 1_000 {
        return Err(Error::InvalidInput(format!(
            "samples {samples} below the minimum of 1000"
        )));
    }
    let hits: u64 = (0..samples)
        .into_par_iter()
        .map(|i| {
            let mut stream = RandomStream::new(seed, i);
            let outcome = simulator(n, &mut stream);
            u64::from(event(&outcome))
        })
        .sum();
    Ok(TailEstimate::from_counts(n, hits, samples))
}

/// A decay-rate fit over the usable scales (hits >= 10).
#[derive(Debug, Clone)]
pub struct DecayFit {
    /// `(n, -log p_hat / n)` for each usable scale.
    pub points: Vec<(u64, f64)>,
    /// Slope of the affine fit `-log p_hat ~ intercept + slope * n` — the
    /// acceptance quantity.
    pub slope: f64,
    pub intercept: f64,
    /// Half-width of the 95% interval on the slope from fit residuals.
    pub slope_ci: f64,
    pub r_squared: f64,
    /// n-weighted mean of the per-scale values at the largest half of the
    /// scales, a prefactor-contaminated cross-check on the slope.
    pub tail_mean: f64,
    /// Scales dropped for having fewer than 10 hits.
    pub excluded_ns: Vec<u64>,
}

/// Fits the exponential decay rate across scales; scales with fewer than 10
/// hits are excluded rather than imputed.
pub fn fit_decay(estimates: &[TailEstimate]) -> Result<DecayFit> {
    let mut usable: Vec<&TailEstimate> = estimates.iter().filter(|e| e.hits >= 10).collect();
    usable.sort_by_key(|e| e.n);
    let excluded_ns: Vec<u64> = estimates
        .iter()
        .filter(|e| e.hits < 10)
        .map(|e| e.n)
        .collect();
    if usable.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "only {} scales with >= 10 hits (need 3); excluded: {excluded_ns:?}",
            usable.len()
        )));
    }
    let m = usable.len() as f64;
    let xs: Vec<f64> = usable.iter().map(|e| e.n as f64).collect();
    let ys: Vec<f64> = usable.iter().map(|e| -e.p_hat.ln()).collect();
    let xbar = xs.iter().sum::<f64>() / m;
    let ybar = ys.iter().sum::<f64>() / m;
    let sxx: f64 = xs.iter().map(|x| (x - xbar) * (x - xbar)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - xbar) * (y - ybar)).sum();
    let slope = sxy / sxx;
    let intercept = ybar - slope * xbar;
    let ss_res: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| {
            let r = y - (intercept + slope * x);
            r * r
        })
        .sum();
    let ss_tot: f64 = ys.iter().map(|y| (y - ybar) * (y - ybar)).sum();
    let r_squared = if ss_tot > 0.0 { (1.0 - ss_res / ss_tot).clamp(0.0, 1.0) } else { 1.0 };
    let slope_ci = if usable.len() > 2 {
        WILSON_Z * (ss_res / (m - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    let tail: &[&TailEstimate] = &usable[usable.len() / 2..];
    let wsum: f64 = tail.iter().map(|e| e.n as f64).sum();
    let tail_mean = tail
        .iter()
        .map(|e| e.n as f64 * e.neglog_over_n())
        .sum::<f64>()
        / wsum;
    Ok(DecayFit {
        points: usable.iter().map(|e| (e.n, e.neglog_over_n())).collect(),
        slope,
        intercept,
        slope_ci,
        r_squared,
        tail_mean,
        excluded_ns,
    })
}

/// `ln P[N >= k]` for `N ~ Poisson(mean)`, by a log-space recurrence. The
/// log form stays representable far past where the probability itself
/// underflows f64 (relative error below 1e-10 for means up to 1e4).
pub fn poisson_tail_ln(mean: f64, k: u64) -> Result<f64> {
    if !(mean > 0.0) || !mean.is_finite() {
        return Err(Error::InvalidInput(format!("mean {mean} must be a positive real")));
    }
    if k == 0 {
        return Ok(0.0);
    }
    let log_pmf = |j: f64| -> f64 { -mean + j * mean.ln() - ln_gamma(j + 1.0) };
    if k as f64 > mean {
        // upper tail: terms eventually decay geometrically
        let base = log_pmf(k as f64);
        let mut term = 1.0f64;
        let mut sum = 1.0f64;
        let mut j = k as f64;
        loop {
            term *= mean / (j + 1.0);
            sum += term;
            j += 1.0;
            if j > mean && term < sum * 1e-18 {
                break;
            }
        }
        Ok(base + sum.ln())
    } else {
        // complement of the lower tail, summed downward from k-1
        let base = log_pmf(k as f64 - 1.0);
        let mut term = 1.0f64;
        let mut sum = 1.0f64;
        let mut j = k as f64 - 1.0;
        while j > 0.0 {
            term *= j / mean;
            sum += term;
            j -= 1.0;
            if term < sum * 1e-18 {
                break;
            }
        }
        Ok((-(base + sum.ln()).exp()).ln_1p())
    }
}

/// `P[N >= k]` for `N ~ Poisson(mean)`; underflows to 0 once the log tail
/// drops below f64 range — use [`poisson_tail_ln`] at large-deviation scales.
pub fn poisson_tail_exact(mean: f64, k: u64) -> Result<f64> {
    Ok(poisson_tail_ln(mean, k)?.exp())
}

/// `ln P[Bin(n, p) >= k]` by the analogous log-space sum.
pub fn binomial_tail_ln(n: u64, p: f64, k: u64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidInput(format!("p {p} must lie in [0, 1]")));
    }
    if k == 0 {
        return Ok(0.0);
    }
    if k > n {
        return Ok(f64::NEG_INFINITY);
    }
    if p == 0.0 {
        return Ok(f64::NEG_INFINITY); // k >= 1 here
    }
    if p == 1.0 {
        return Ok(0.0);
    }
    let q = 1.0 - p;
    let nf = n as f64;
    let log_pmf = |j: f64| -> f64 {
        ln_gamma(nf + 1.0) - ln_gamma(j + 1.0) - ln_gamma(nf - j + 1.0) + j * p.ln() + (nf - j) * q.ln()
    };
    let ratio_up = |j: f64| (nf - j) / (j + 1.0) * (p / q);
    if k as f64 >= nf * p {
        let base = log_pmf(k as f64);
        let mut term = 1.0f64;
        let mut sum = 1.0f64;
        let mut j = k as f64;
        while j < nf {
            term *= ratio_up(j);
            sum += term;
            j += 1.0;
            if term < sum * 1e-18 {
                break;
            }
        }
        Ok(base + sum.ln())
    } else {
        let base = log_pmf(k as f64 - 1.0);
        let mut term = 1.0f64;
        let mut sum = 1.0f64;
        let mut j = k as f64 - 1.0;
        while j > 0.0 {
            term /= ratio_up(j - 1.0);
            sum += term;
            j -= 1.0;
            if term < sum * 1e-18 {
                break;
            }
        }
        Ok((-(base + sum.ln()).exp()).ln_1p())
    }
}

/// `P[Bin(n, p) >= k]`; see [`binomial_tail_ln`] for the log form.
pub fn binomial_tail_exact(n: u64, p: f64, k: u64) -> Result<f64> {
    Ok(binomial_tail_ln(n, p, k)?.exp())
}

/// The driving family a UET certificate exercises.
#[derive(Debug, Clone)]
pub enum DriverFamily {
    Gaussian { space: Arc<DiscreteMeasureSpace>, grid: TimeGrid },
    Poisson { space: Arc<DiscreteMeasureSpace>, grid: TimeGrid },
}

impl DriverFamily {
    fn grid(&self) -> TimeGrid {
        match self {
            DriverFamily::Gaussian { grid, .. } => *grid,
            DriverFamily::Poisson { grid, .. } => *grid,
        }
    }

    /// k(t, a): `sqrt(2 a t)` for the Gaussian family, `t + a` for Poisson.
    pub fn threshold(&self, t: f64, a: f64) -> f64 {
        match self {
            DriverFamily::Gaussian { .. } => (2.0 * a * t).sqrt(),
            DriverFamily::Poisson { .. } => t + a,
        }
    }

    /// Analytic exceedance envelope at scale `n`: `4 e^{-n K^2 / 2t}` for the
    /// Gaussian family, `e^{n t - n K}` for Poisson.
    pub fn envelope(&self, t: f64, a: f64, n: u64) -> f64 {
        let k = self.threshold(t, a);
        match self {
            DriverFamily::Gaussian { .. } => 4.0 * (-(n as f64) * k * k / (2.0 * t)).exp(),
            DriverFamily::Poisson { .. } => ((n as f64) * (t - k)).exp(),
        }
    }
}

/// One adversary/scale row of a UET certificate.
#[derive(Debug, Clone)]
pub struct UetRow {
    pub adversary: String,
    pub n: u64,
    pub threshold: f64,
    pub envelope: f64,
    pub p_hat: f64,
    pub se: f64,
    pub pass: bool,
}

#[derive(Debug, Clone)]
pub struct UetReport {
    pub rows: Vec<UetRow>,
    /// Worst `p_hat - (envelope + 5 se)` over all rows; negative when every
    /// row passes.
    pub worst_margin: f64,
    pub pass: bool,
}

/// Checks the exceedance probabilities of `sup_{s<=t} |Z_- . Y_n(s)|` over an
/// adversary family of unit-ball simple integrands against the analytic
/// envelope, at 5-standard-error slack.
pub fn uet_certificate(
    family: &DriverFamily,
    adversaries: &[(String, SimpleProcess)],
    t: f64,
    a: f64,
    n_list: &[u64],
    samples: u64,
    seed: u64,
) -> Result<UetReport> {
    if adversaries.is_empty() {
        return Err(Error::InvalidAdversary("empty adversary family".into()));
    }
    let grid = family.grid();
    // unit-ball certification, with a 1e-9 grace for construction round-off
    for (name, z) in adversaries {
        if *z.grid() != grid {
            return Err(Error::GridMismatch(format!("adversary {name} is on a different grid")));
        }
        let sup = match family {
            DriverFamily::Gaussian { .. } => z.sup_node_norm(t, |g| g.l2_norm())?,
            DriverFamily::Poisson { .. } => {
                let phi = YoungFunction::exp_minus_one();
                z.sup_node_norm(t, |g| {
                    crate::orlicz::orlicz_norm(g, &phi, 1e-10).unwrap_or(f64::INFINITY)
                })?
            }
        };
        if sup > 1.0 + 1e-9 {
            return Err(Error::InvalidAdversary(format!(
                "adversary {name} has unit-ball norm {sup}"
            )));
        }
    }
    let threshold = family.threshold(t, a);
    let mut rows = Vec::new();
    let mut worst = f64::NEG_INFINITY;
    for (name, z) in adversaries {
        for &n in n_list {
            let est = estimate_tail(
                |sup: &f64| *sup > threshold,
                |n, stream| {
                    let path = match family {
                        DriverFamily::Gaussian { space, grid } => {
                            let d = simulate_gaussian(space, *grid, n, stream).expect("valid scale");
                            simple_integral(z, &d).expect("checked shapes")
                        }
                        DriverFamily::Poisson { space, grid } => {
                            let d = simulate_poisson(space, *grid, n, stream).expect("valid scale");
                            simple_integral(z, &d).expect("checked shapes")
                        }
                    };
                    let last = path.grid().node_floor(t);
                    (0..=last).fold(0.0f64, |acc, j| acc.max(path.node_scalar(j).abs()))
                },
                n,
                samples,
                seed ^ (n << 32),
            )?;
            let envelope = family.envelope(t, a, n);
            let se = (est.p_hat * (1.0 - est.p_hat) / samples as f64).sqrt();
            let margin = est.p_hat - (envelope + 5.0 * se);
            worst = worst.max(margin);
            rows.push(UetRow {
                adversary: name.clone(),
                n,
                threshold,
                envelope,
                p_hat: est.p_hat,
                se,
                pass: margin <= 0.0,
            });
        }
    }
    Ok(UetReport { pass: rows.iter().all(|r| r.pass), worst_margin: worst, rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::GridFunction;
    use proptest::prelude::*;

    #[test]
    fn trivial_events_give_zero_and_one() {
        let e = estimate_tail(|_: &f64| true, |_, _| 0.0, 1, 1_000, 1).unwrap();
        assert_eq!(e.p_hat, 1.0);
        let e = estimate_tail(|_: &f64| false, |_, _| 0.0, 1, 1_000, 1).unwrap();
        assert_eq!(e.p_hat, 0.0);
        assert!(e.zero_hits());
        assert!(e.ci_low <= e.p_hat && e.p_hat <= e.ci_high);
    }

    #[test]
    fn too_few_samples_rejected() {
        assert!(estimate_tail(|_: &f64| true, |_, _| 0.0, 1, 999, 1).is_err());
    }

    #[test]
    fn gaussian_upper_tail_matches_normal_oracle() {
        // P(N(0,1) > 2) = 0.02275013...
        let e = estimate_tail(
            |x: &f64| *x > 2.0,
            |_, s: &mut RandomStream| s.standard_normal(),
            1,
            1_000_000,
            42,
        )
        .unwrap();
        let p: f64 = 0.022750131948179195;
        let se = (p * (1.0 - p) / 1e6).sqrt();
        assert!((e.p_hat - p).abs() <= 3.0 * se, "p_hat {} vs {p}", e.p_hat);
    }

    #[test]
    fn estimate_is_reproducible_bit_exactly() {
        let run = || {
            estimate_tail(
                |x: &f64| *x > 1.0,
                |_, s: &mut RandomStream| s.standard_normal(),
                1,
                10_000,
                7,
            )
            .unwrap()
        };
        let a = run();
        let b = run();
        assert_eq!(a, b);
    }

    #[test]
    fn exact_exponential_fits_with_exact_slope() {
        let estimates: Vec<TailEstimate> = [10u64, 20, 30, 40]
            .iter()
            .map(|&n| TailEstimate {
                n,
                hits: 1_000,
                samples: 1_000_000,
                p_hat: (-0.5 * n as f64).exp(),
                ci_low: 0.0,
                ci_high: 1.0,
            })
            .collect();
        let fit = fit_decay(&estimates).unwrap();
        assert!((fit.slope - 0.5).abs() <= 1e-12, "slope {}", fit.slope);
        assert!(fit.intercept.abs() <= 1e-12);
        assert!((fit.r_squared - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn prefactor_moves_the_intercept_not_the_slope() {
        let c = 0.37f64;
        let estimates: Vec<TailEstimate> = [10u64, 20, 30, 40]
            .iter()
            .map(|&n| TailEstimate {
                n,
                hits: 1_000,
                samples: 1_000_000,
                p_hat: c * (-0.5 * n as f64).exp(),
                ci_low: 0.0,
                ci_high: 1.0,
            })
            .collect();
        let fit = fit_decay(&estimates).unwrap();
        assert!((fit.slope - 0.5).abs() <= 1e-12);
        assert!((fit.intercept - (-c.ln())).abs() <= 1e-12);
    }

    #[test]
    fn zero_hit_scales_are_excluded() {
        let mut estimates: Vec<TailEstimate> = [10u64, 20, 30]
            .iter()
            .map(|&n| TailEstimate::from_counts(n, 500, 10_000))
            .collect();
        estimates.push(TailEstimate::from_counts(40, 0, 10_000));
        let fit = fit_decay(&estimates).unwrap();
        assert_eq!(fit.excluded_ns, vec![40]);
        assert_eq!(fit.points.len(), 3);
        // dropping one more scale leaves too few
        estimates[2].hits = 3;
        assert!(matches!(fit_decay(&estimates), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn poisson_tail_small_cases() {
        assert_eq!(poisson_tail_exact(1.0, 0).unwrap(), 1.0);
        let p = poisson_tail_exact(1.0, 1).unwrap();
        let want = 1.0 - (-1.0f64).exp();
        assert!((p - want).abs() <= 1e-14, "{p} vs {want}");
    }

    #[test]
    fn poisson_tail_large_deviation_scale() {
        // cross-check P(N(100) >= 200) by a 400-term log-space sum; at mean
        // 100 the tail still carries a ~7% prefactor above 2 ln 2 - 1
        let p = poisson_tail_exact(100.0, 200).unwrap();
        let mut direct = 0.0f64;
        for j in 200u64..600 {
            direct += (-100.0 + j as f64 * 100.0f64.ln() - ln_gamma(j as f64 + 1.0)).exp();
        }
        assert!((p - direct).abs() <= 1e-12 * direct, "{p} vs direct {direct}");
        let want = 2.0 * 2.0f64.ln() - 1.0;
        let rate100 = -p.ln() / 100.0;
        assert!((rate100 - want).abs() <= 0.10 * want, "rate {rate100} vs {want}");
        // the prefactor has washed out by mean 2000
        let rate2000 = -poisson_tail_ln(2000.0, 4000).unwrap() / 2000.0;
        assert!((rate2000 - want).abs() <= 0.02 * want, "rate {rate2000} vs {want}");
    }

    #[test]
    fn poisson_tail_matches_direct_sum_at_small_means() {
        for mean in [0.5, 2.0, 9.0] {
            for k in 0u64..25 {
                let p = poisson_tail_exact(mean, k).unwrap();
                let mut direct = 0.0f64;
                let mut term = (-mean).exp();
                for j in 0..200u64 {
                    if j >= k {
                        direct += term;
                    }
                    term *= mean / (j + 1) as f64;
                }
                assert!((p - direct).abs() <= 1e-12, "mean {mean} k {k}: {p} vs {direct}");
            }
        }
    }

    #[test]
    fn binomial_tail_small_cases() {
        assert_eq!(binomial_tail_exact(10, 0.3, 0).unwrap(), 1.0);
        let p = binomial_tail_exact(2, 0.5, 2).unwrap();
        assert!((p - 0.25).abs() <= 1e-15);
        assert_eq!(binomial_tail_exact(5, 0.5, 6).unwrap(), 0.0);
    }

    #[test]
    fn binomial_tail_cramer_scale() {
        // the square-root prefactor leaves ~3.5% at n = 400 and under 1% at
        // n = 2000
        let want = 0.8 * 1.6f64.ln() + 0.2 * 0.4f64.ln();
        let rate400 = -binomial_tail_exact(400, 0.5, 320).unwrap().ln() / 400.0;
        assert!((rate400 - want).abs() <= 0.05 * want, "rate {rate400} vs {want}");
        let rate2000 = -binomial_tail_ln(2000, 0.5, 1600).unwrap() / 2000.0;
        assert!((rate2000 - want).abs() <= 0.02 * want, "rate {rate2000} vs {want}");
    }

    #[test]
    fn binomial_tail_matches_direct_sum_at_small_n() {
        for n in [5u64, 17, 30] {
            for p in [0.2, 0.5, 0.9] {
                for k in 0..=n {
                    let got = binomial_tail_exact(n, p, k).unwrap();
                    // direct sum with exact binomial coefficients
                    let mut direct = 0.0f64;
                    for j in k..=n {
                        let mut c = 1.0f64;
                        for i in 0..j {
                            c = c * (n - i) as f64 / (i + 1) as f64;
                        }
                        direct += c * p.powi(j as i32) * (1.0 - p).powi((n - j) as i32);
                    }
                    assert!(
                        (got - direct).abs() <= 1e-12,
                        "n {n} p {p} k {k}: {got} vs {direct}"
                    );
                }
            }
        }
    }

    #[test]
    fn uet_rejects_adversaries_outside_the_unit_ball() {
        let space = DiscreteMeasureSpace::single_cell(1.0).unwrap();
        let grid = TimeGrid::new(1.0, 32).unwrap();
        let family = DriverFamily::Gaussian { space: space.clone(), grid };
        let z = SimpleProcess::constant(GridFunction::constant(space, 1.5), grid).unwrap();
        let r = uet_certificate(&family, &[("big".into(), z)], 1.0, 1.0, &[2], 1_000, 1);
        assert!(matches!(r, Err(Error::InvalidAdversary(_))));
    }

    #[test]
    fn uet_zero_adversary_never_exceeds() {
        let space = DiscreteMeasureSpace::single_cell(1.0).unwrap();
        let grid = TimeGrid::new(1.0, 32).unwrap();
        let family = DriverFamily::Gaussian { space: space.clone(), grid };
        let z = SimpleProcess::constant(GridFunction::constant(space, 0.0), grid).unwrap();
        let rep = uet_certificate(&family, &[("zero".into(), z)], 1.0, 1.0, &[2], 1_000, 1).unwrap();
        assert!(rep.pass);
        assert_eq!(rep.rows[0].p_hat, 0.0);
    }

    #[test]
    fn uet_gaussian_envelope_holds_at_small_scale() {
        let space = DiscreteMeasureSpace::single_cell(1.0).unwrap();
        let grid = TimeGrid::new(1.0, 64).unwrap();
        let family = DriverFamily::Gaussian { space: space.clone(), grid };
        let z = SimpleProcess::constant(GridFunction::constant(space, 1.0), grid).unwrap();
        let rep =
            uet_certificate(&family, &[("unit".into(), z)], 1.0, 1.0, &[4], 10_000, 5).unwrap();
        assert!(rep.pass, "margin {}", rep.worst_margin);
        assert!(rep.rows[0].p_hat <= rep.rows[0].envelope + 5.0 * rep.rows[0].se);
        // reflection-principle oracle: for a constant unit integrand the
        // exceedance is a Brownian level crossing, bounded by
        // 2 * 2 * Phi_bar(sqrt(2 a n))
        use statrs::distribution::{ContinuousCDF, Normal};
        let normal = Normal::new(0.0, 1.0).unwrap();
        let reflection = 4.0 * (1.0 - normal.cdf((2.0f64 * 1.0 * 4.0).sqrt()));
        assert!(
            rep.rows[0].p_hat <= reflection + 5.0 * rep.rows[0].se,
            "p_hat {} vs reflection bound {reflection}",
            rep.rows[0].p_hat
        );
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn wilson_interval_brackets_p_hat(hits in 0u64..100, extra in 1u64..1000) {
            let samples = hits + extra;
            let e = TailEstimate::from_counts(1, hits, samples);
            prop_assert!(e.ci_low <= e.p_hat + 1e-15);
            prop_assert!(e.p_hat <= e.ci_high + 1e-15);
            prop_assert!((e.p_hat - hits as f64 / samples as f64).abs() <= 1e-15);
        }

        #[test]
        fn decay_fit_slope_prefactor_immune(c in 0.01f64..10.0) {
            let base: Vec<TailEstimate> = [8u64, 16, 24, 32].iter().map(|&n| TailEstimate {
                n, hits: 100, samples: 10_000,
                p_hat: (-0.3 * n as f64).exp(),
                ci_low: 0.0, ci_high: 1.0,
            }).collect();
            let scaled: Vec<TailEstimate> = base.iter().map(|e| TailEstimate {
                p_hat: c * e.p_hat,
                ..e.clone()
            }).collect();
            let f0 = fit_decay(&base).unwrap();
            let f1 = fit_decay(&scaled).unwrap();
            prop_assert!((f0.slope - f1.slope).abs() <= 1e-12);
        }
    }
}
