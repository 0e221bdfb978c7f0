//! Pseudo-basis expansions, finite projections, and partitions of unity.
//!
//! The index space is realized as grid functions on a discrete measure space,
//! i.e. a weighted L^2. The pseudo-basis is taken orthonormal (Haar-style
//! cell aggregation), so the coefficient functionals are plain weighted inner
//! products. The partition of unity is the approximation layer that turns an
//! index-space-valued path into a simple process: Lipschitz bumps around a
//! family of centers, telescoped so they sum to one wherever some bump
//! saturates.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::CadlagPath;
use crate::space::{DiscreteMeasureSpace, GridFunction};

/// An orthonormal pseudo-basis of the weighted L^2 over a discrete space.
///
/// Coefficient functionals are `p_k(x) = <x, phi_k>_mu`, and every `x` in the
/// span reconstructs as `sum_k p_k(x) phi_k`.
#[derive(Debug, Clone)]
pub struct PseudoBasis {
    space: Arc<DiscreteMeasureSpace>,
    elements: Vec<GridFunction>,
}

impl PseudoBasis {
    /// Builds the full Haar-style orthonormal basis by recursive cell
    /// aggregation: the normalized constant first, then mean-zero splits from
    /// coarse to fine. Requires every cell mass to be positive.
    pub fn haar(space: Arc<DiscreteMeasureSpace>) -> Result<Self> {
        if space.masses().iter().any(|m| *m <= 0.0) {
            return Err(Error::InvalidInput(
                "haar basis needs strictly positive cell masses".into(),
            ));
        }
        let n = space.len();
        let total = space.total_mass();
        let mut elements = Vec::with_capacity(n);
        elements.push(GridFunction::constant(space.clone(), 1.0 / total.sqrt()));
        // breadth-first splits keep the ordering coarse-to-fine
        let mut queue = std::collections::VecDeque::new();
        queue.push_back((0usize, n));
        while let Some((lo, hi)) = queue.pop_front() {
            if hi - lo < 2 {
                continue;
            }
            let mid = lo + (hi - lo) / 2;
            let a: f64 = (lo..mid).map(|c| space.mass(c)).sum();
            let b: f64 = (mid..hi).map(|c| space.mass(c)).sum();
            let left = (b / (a * (a + b))).sqrt();
            let right = -(a / (b * (a + b))).sqrt();
            let mut values = vec![0.0; n];
            for v in values.iter_mut().take(mid).skip(lo) {
                *v = left;
            }
            for v in values.iter_mut().take(hi).skip(mid) {
                *v = right;
            }
            elements.push(GridFunction::new(space.clone(), values)?);
            queue.push_back((lo, mid));
            queue.push_back((mid, hi));
        }
        Ok(Self { space, elements })
    }

    /// Wraps caller-supplied elements, checking orthonormality to 1e-10.
    pub fn from_orthonormal(space: Arc<DiscreteMeasureSpace>, elements: Vec<GridFunction>) -> Result<Self> {
        if elements.is_empty() {
            return Err(Error::InvalidInput("a pseudo-basis needs at least one element".into()));
        }
        for e in &elements {
            e.check_space(&space)?;
        }
        for i in 0..elements.len() {
            for j in i..elements.len() {
                let g = elements[i].inner(&elements[j])?;
                let want = if i == j { 1.0 } else { 0.0 };
                if (g - want).abs() > 1e-10 {
                    return Err(Error::InvalidInput(format!(
                        "<phi_{i}, phi_{j}> = {g}, expected {want}"
                    )));
                }
            }
        }
        Ok(Self { space, elements })
    }

    pub fn space(&self) -> &Arc<DiscreteMeasureSpace> {
        &self.space
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn element(&self, k: usize) -> &GridFunction {
        &self.elements[k]
    }

    pub fn elements(&self) -> &[GridFunction] {
        &self.elements
    }

    /// Coefficient functional `p_k(x) = <x, phi_k>_mu`.
    pub fn coefficient(&self, k: usize, x: &GridFunction) -> Result<f64> {
        x.inner(&self.elements[k])
    }

    /// First `n` coefficients `P_N(x)`.
    pub fn coefficients(&self, x: &GridFunction, n: usize) -> Result<Vec<f64>> {
        (0..n).map(|k| self.coefficient(k, x)).collect()
    }
}

/// Partial-sum projection `S_N(x) = sum_{k<=N} p_k(x) phi_k`.
pub fn project_sn(x: &GridFunction, basis: &PseudoBasis, n: usize) -> Result<GridFunction> {
    if n == 0 || n > basis.len() {
        return Err(Error::InvalidInput(format!(
            "projection order {n} out of range 1..={}",
            basis.len()
        )));
    }
    let mut acc = GridFunction::constant(basis.space().clone(), 0.0);
    for k in 0..n {
        let c = basis.coefficient(k, x)?;
        acc = acc.linear_combination(1.0, c, basis.element(k))?;
    }
    Ok(acc)
}

/// Nodewise coefficient projection of an index-space-valued path: each node
/// value (one real per cell) is replaced by its first `n` basis coefficients.
pub fn coefficient_path(x: &CadlagPath, basis: &PseudoBasis, n: usize) -> Result<CadlagPath> {
    if n == 0 || n > basis.len() {
        return Err(Error::InvalidInput(format!(
            "projection order {n} out of range 1..={}",
            basis.len()
        )));
    }
    if x.dim() != basis.space().len() {
        return Err(Error::DimensionMismatch(format!(
            "path dimension {} vs {} cells",
            x.dim(),
            basis.space().len()
        )));
    }
    let mut values = Vec::with_capacity(x.nodes() * n);
    for j in 0..x.nodes() {
        let g = GridFunction::new(basis.space().clone(), x.node_value(j).to_vec())?;
        for k in 0..n {
            values.push(basis.coefficient(k, &g)?);
        }
    }
    CadlagPath::new(*x.grid(), n, values, x.interpolation())
}

/// Lipschitz bumps around a center family, telescoped into a partition of
/// unity on the region within `epsilon/4` of some center.
///
/// The bump is `b_k(x) = clamp(2 - (4/eps) d(x, phi_k), 0, 1)`: it saturates
/// on `B(phi_k, eps/4)` and vanishes outside `B(phi_k, eps/2)`. Telescoping
/// `psi_k = b_k prod_{j<k} (1 - b_j)` makes the family sum to one wherever
/// some bump saturates.
#[derive(Debug, Clone)]
pub struct PartitionOfUnity {
    centers: Vec<Vec<f64>>,
    epsilon: f64,
    /// Per-coordinate metric weights (cell masses when the ambient space is a
    /// weighted L^2); `None` means Euclidean.
    metric_weights: Option<Vec<f64>>,
}

/// Builds a partition of unity with the Euclidean metric.
pub fn build_partition(centers: Vec<Vec<f64>>, epsilon: f64) -> Result<PartitionOfUnity> {
    PartitionOfUnity::new(centers, epsilon, None)
}

/// Builds a partition of unity with a weighted-L^2 metric (one weight per
/// coordinate).
pub fn build_partition_weighted(
    centers: Vec<Vec<f64>>,
    epsilon: f64,
    metric_weights: Vec<f64>,
) -> Result<PartitionOfUnity> {
    PartitionOfUnity::new(centers, epsilon, Some(metric_weights))
}

impl PartitionOfUnity {
    fn new(centers: Vec<Vec<f64>>, epsilon: f64, metric_weights: Option<Vec<f64>>) -> Result<Self> {
        if centers.is_empty() {
            return Err(Error::InvalidInput("need at least one center".into()));
        }
        if !(epsilon > 0.0) {
            return Err(Error::InvalidInput(format!("epsilon {epsilon} must be positive")));
        }
        let dim = centers[0].len();
        if dim == 0 || centers.iter().any(|c| c.len() != dim) {
            return Err(Error::DimensionMismatch("centers must share a nonzero dimension".into()));
        }
        if let Some(w) = &metric_weights {
            if w.len() != dim {
                return Err(Error::DimensionMismatch(format!(
                    "{} metric weights for dimension {dim}",
                    w.len()
                )));
            }
            if w.iter().any(|x| !(*x > 0.0)) {
                return Err(Error::InvalidInput("metric weights must be positive".into()));
            }
        }
        Ok(Self { centers, epsilon, metric_weights })
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn center(&self, k: usize) -> &[f64] {
        &self.centers[k]
    }

    pub fn dim(&self) -> usize {
        self.centers[0].len()
    }

    pub fn distance(&self, x: &[f64], y: &[f64]) -> f64 {
        match &self.metric_weights {
            None => x
                .iter()
                .zip(y)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt(),
            Some(w) => x
                .iter()
                .zip(y)
                .zip(w)
                .map(|((a, b), wi)| wi * (a - b) * (a - b))
                .sum::<f64>()
                .sqrt(),
        }
    }

    fn bump(&self, k: usize, x: &[f64]) -> f64 {
        (2.0 - 4.0 / self.epsilon * self.distance(x, &self.centers[k])).clamp(0.0, 1.0)
    }

    /// `psi_k(x)` for all k.
    pub fn weights_at(&self, x: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.centers.len());
        let mut residual = 1.0;
        for k in 0..self.centers.len() {
            let b = self.bump(k, x);
            out.push(b * residual);
            residual *= 1.0 - b;
        }
        out
    }

    pub fn psi(&self, k: usize, x: &[f64]) -> f64 {
        let mut residual = 1.0;
        for j in 0..k {
            residual *= 1.0 - self.bump(j, x);
        }
        self.bump(k, x) * residual
    }

    /// A point is covered when some bump saturates, which is exactly where
    /// the telescoped family sums to one.
    pub fn covered(&self, x: &[f64]) -> bool {
        (0..self.centers.len()).any(|k| self.bump(k, x) >= 1.0)
    }

    fn nearest(&self, x: &[f64]) -> (usize, f64) {
        let mut best = (0usize, f64::INFINITY);
        for (k, _) in self.centers.iter().enumerate() {
            let d = self.distance(x, &self.centers[k]);
            if d < best.1 {
                best = (k, d);
            }
        }
        best
    }

    pub fn check_covered(&self, x: &[f64], what: &str) -> Result<()> {
        if self.covered(x) {
            Ok(())
        } else {
            let (k, d) = self.nearest(x);
            Err(Error::Coverage(format!(
                "{what} at {x:?} is uncovered: nearest center {k} at distance {d:.6}, need <= {:.6}",
                self.epsilon / 4.0
            )))
        }
    }

    /// Checks that every probe lies in the covered region.
    pub fn verify_cover(&self, probes: &[Vec<f64>]) -> Result<()> {
        for (i, p) in probes.iter().enumerate() {
            self.check_covered(p, &format!("probe {i}"))?;
        }
        Ok(())
    }
}

/// Nodewise replacement of a path by its bump-weighted center combination
/// `x^eps(t) = sum_k psi_k(x(t)) phi_k`; the result stays within `epsilon` of
/// the input at every node (in the partition's metric).
pub fn approximate_xeps(x: &CadlagPath, pou: &PartitionOfUnity) -> Result<CadlagPath> {
    if x.dim() != pou.dim() {
        return Err(Error::DimensionMismatch(format!(
            "path dimension {} vs partition dimension {}",
            x.dim(),
            pou.dim()
        )));
    }
    let dim = x.dim();
    let mut values = vec![0.0; x.nodes() * dim];
    for j in 0..x.nodes() {
        let xv = x.node_value(j);
        pou.check_covered(xv, &format!("path node {j}"))?;
        let w = pou.weights_at(xv);
        let out = &mut values[j * dim..(j + 1) * dim];
        for (k, wk) in w.iter().enumerate() {
            if *wk > 0.0 {
                for (o, c) in out.iter_mut().zip(pou.center(k)) {
                    *o += wk * c;
                }
            }
        }
    }
    CadlagPath::new(*x.grid(), dim, values, x.interpolation())
}
