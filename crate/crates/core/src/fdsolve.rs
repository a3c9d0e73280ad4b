//! Finite differences on `[-L/2, L/2]` with Dirichlet walls, and a
//! symmetric tridiagonal eigensolver (Sturm bisection + inverse iteration).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::potential::SampledPotential;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FdError {
    #[error("need at least 3 interior points, got {0}")]
    TooFewPoints(usize),
    #[error("box length must be positive, got {0}")]
    InvalidLength(f64),
    #[error("potential grid does not match the interior grid: {0}")]
    GridMismatch(String),
    #[error("non-finite operator entry")]
    NonFinite,
    #[error("requested {requested} eigenvalues from an operator of size {size}")]
    TooManyEigenvalues { requested: usize, size: usize },
    #[error("tolerance must be positive")]
    InvalidTolerance,
    #[error("inverse iteration did not converge at lambda = {lambda} (residual {residual:e})")]
    NoConvergence { lambda: f64, residual: f64 },
}

/// Symmetric tridiagonal matrix of `-½ d²/dx² + V` on the interior nodes
/// `x_i = -L/2 + i·h`, `i = 1..=N`, `h = L/(N+1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TridiagonalOperator {
    pub diag: Vec<f64>,
    pub offdiag: Vec<f64>,
    pub length: f64,
    pub spacing: f64,
}

impl TridiagonalOperator {
    pub fn from_parts(diag: Vec<f64>, offdiag: Vec<f64>, length: f64) -> Result<Self, FdError> {
        let n = diag.len();
        if n < 3 {
            return Err(FdError::TooFewPoints(n));
        }
        if offdiag.len() != n - 1 {
            return Err(FdError::GridMismatch("offdiag must have N-1 entries".into()));
        }
        if diag.iter().chain(&offdiag).any(|x| !x.is_finite()) {
            return Err(FdError::NonFinite);
        }
        Ok(TridiagonalOperator {
            diag,
            offdiag,
            length,
            spacing: length / (n as f64 + 1.0),
        })
    }

    pub fn size(&self) -> usize {
        self.diag.len()
    }

    /// Position of the 0-based node `i`.
    pub fn point(&self, i: usize) -> f64 {
        -self.length / 2.0 + (i as f64 + 1.0) * self.spacing
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.size()).map(|i| self.point(i)).collect()
    }

    /// `[min, max]` enclosing the whole spectrum.
    pub fn gershgorin_bounds(&self) -> (f64, f64) {
        let n = self.size();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..n {
            let r = if i > 0 { self.offdiag[i - 1].abs() } else { 0.0 }
                + if i + 1 < n { self.offdiag[i].abs() } else { 0.0 };
            lo = lo.min(self.diag[i] - r);
            hi = hi.max(self.diag[i] + r);
        }
        (lo, hi)
    }

    pub fn norm_inf(&self) -> f64 {
        let (lo, hi) = self.gershgorin_bounds();
        lo.abs().max(hi.abs())
    }

    /// `(T - λ) x`.
    fn shifted_apply(&self, lambda: f64, x: &[f64]) -> Vec<f64> {
        let n = self.size();
        (0..n)
            .map(|i| {
                let mut y = (self.diag[i] - lambda) * x[i];
                if i > 0 {
                    y += self.offdiag[i - 1] * x[i - 1];
                }
                if i + 1 < n {
                    y += self.offdiag[i] * x[i + 1];
                }
                y
            })
            .collect()
    }
}

/// Central differences: `diag_i = 1/h² + V(x_i)`, `offdiag = -1/(2h²)`.
///
/// `potential`, when given, must live on exactly the interior nodes.
pub fn discretize(potential: Option<&SampledPotential>, length: f64, n: usize) -> Result<TridiagonalOperator, FdError> {
    if n < 3 {
        return Err(FdError::TooFewPoints(n));
    }
    if !(length > 0.0 && length.is_finite()) {
        return Err(FdError::InvalidLength(length));
    }
    let h = length / (n as f64 + 1.0);
    let mut diag = vec![1.0 / (h * h); n];
    if let Some(pot) = potential {
        let g = &pot.grid;
        if g.count != n || pot.values.len() != n {
            return Err(FdError::GridMismatch(format!("{} values for {} nodes", pot.values.len(), n)));
        }
        let x1 = -length / 2.0 + h;
        if (g.spacing - h).abs() > 1e-12 * h || (g.x0 - x1).abs() > 1e-9 * h {
            return Err(FdError::GridMismatch(format!(
                "potential grid (x0={}, h={}) vs interior grid (x0={x1}, h={h})",
                g.x0, g.spacing
            )));
        }
        for (d, v) in diag.iter_mut().zip(&pot.values) {
            *d += v;
        }
    }
    TridiagonalOperator::from_parts(diag, vec![-0.5 / (h * h); n - 1], length)
}

/// Number of eigenvalues strictly below `lambda` (LDLᵀ inertia).
pub fn sturm_count(op: &TridiagonalOperator, lambda: f64) -> usize {
    let guard = f64::EPSILON * op.norm_inf().max(f64::MIN_POSITIVE);
    let mut count = 0;
    let mut q = op.diag[0] - lambda;
    for i in 0..op.size() {
        if i > 0 {
            let e = op.offdiag[i - 1];
            q = (op.diag[i] - lambda) - e * e / q;
        }
        if q == 0.0 || q.abs() < guard {
            // a zero pivot counts as non-negative
            q = if q < 0.0 { -guard } else { guard };
        }
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

/// The `index`-th (0-based) eigenvalue by bisection on `[lo, hi]`.
fn bisect_index(op: &TridiagonalOperator, index: usize, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if sturm_count(op, mid) > index {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// The `m` smallest eigenvalues, ascending, each to an interval width below `tol`.
pub fn lowest_eigenvalues(op: &TridiagonalOperator, m: usize, tol: f64) -> Result<Vec<f64>, FdError> {
    eigenvalues_from_index(op, 0, m, tol)
}

/// The `m` smallest eigenvalues at or above `floor`.
pub fn eigenvalues_above(op: &TridiagonalOperator, floor: f64, m: usize, tol: f64) -> Result<Vec<f64>, FdError> {
    let skip = sturm_count(op, floor);
    eigenvalues_from_index(op, skip, m, tol)
}

fn eigenvalues_from_index(op: &TridiagonalOperator, first: usize, m: usize, tol: f64) -> Result<Vec<f64>, FdError> {
    if !(tol > 0.0) {
        return Err(FdError::InvalidTolerance);
    }
    let n = op.size();
    if m == 0 || first + m > n {
        return Err(FdError::TooManyEigenvalues {
            requested: first + m,
            size: n,
        });
    }
    let (lo, hi) = op.gershgorin_bounds();
    let pad = 1e-12 * (hi - lo).abs().max(1.0);
    let (lo, hi) = (lo - pad, hi + pad);
    let mut out: Vec<f64> = Vec::with_capacity(m);
    for index in first..first + m {
        let start = out.last().copied().unwrap_or(lo).max(lo);
        out.push(bisect_index(op, index, start, hi, tol));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EigenPair {
    pub value: f64,
    /// Normalized so that `Σ ψᵢ² h = 1`, first component non-negative.
    pub vector: Vec<f64>,
    /// `‖(T - λ)ψ‖ / ‖ψ‖`.
    pub residual: f64,
}

/// Tridiagonal LU with partial pivoting of `T - σ`.
struct ShiftedLu {
    dl: Vec<f64>,
    d: Vec<f64>,
    du: Vec<f64>,
    du2: Vec<f64>,
    swapped: Vec<bool>,
}

impl ShiftedLu {
    fn new(op: &TridiagonalOperator, sigma: f64) -> Self {
        let n = op.size();
        let mut d: Vec<f64> = op.diag.iter().map(|x| x - sigma).collect();
        let mut dl = op.offdiag.clone();
        let mut du = op.offdiag.clone();
        let mut du2 = vec![0.0; n.saturating_sub(2)];
        let mut swapped = vec![false; n.saturating_sub(1)];
        for i in 0..n - 1 {
            if d[i].abs() >= dl[i].abs() {
                if d[i] != 0.0 {
                    let fact = dl[i] / d[i];
                    dl[i] = fact;
                    d[i + 1] -= fact * du[i];
                }
            } else {
                let fact = d[i] / dl[i];
                d[i] = dl[i];
                dl[i] = fact;
                let temp = du[i];
                du[i] = d[i + 1];
                d[i + 1] = temp - fact * d[i + 1];
                if i + 2 < n {
                    du2[i] = du[i + 1];
                    du[i + 1] = -fact * du[i + 1];
                }
                swapped[i] = true;
            }
        }
        let guard = f64::EPSILON * op.norm_inf().max(f64::MIN_POSITIVE);
        for x in &mut d {
            if x.abs() < guard {
                *x = if *x < 0.0 { -guard } else { guard };
            }
        }
        ShiftedLu { dl, d, du, du2, swapped }
    }

    fn solve(&self, b: &mut [f64]) {
        let n = self.d.len();
        for i in 0..n - 1 {
            if self.swapped[i] {
                let temp = b[i];
                b[i] = b[i + 1];
                b[i + 1] = temp - self.dl[i] * b[i];
            } else {
                b[i + 1] -= self.dl[i] * b[i];
            }
        }
        b[n - 1] /= self.d[n - 1];
        if n > 1 {
            b[n - 2] = (b[n - 2] - self.du[n - 2] * b[n - 1]) / self.d[n - 2];
        }
        for i in (0..n.saturating_sub(2)).rev() {
            b[i] = (b[i] - self.du[i] * b[i + 1] - self.du2[i] * b[i + 2]) / self.d[i];
        }
    }
}

const MAX_INVERSE_ITERATIONS: usize = 5;
const START_SEED: u64 = 0x5eed_f00d;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Inverse iteration at `lambda`, orthogonalized against `cluster`
/// (eigenpairs already computed whose eigenvalues lie within `1e3·tol`).
pub fn eigenvector(op: &TridiagonalOperator, lambda: f64, tol: f64, cluster: &[EigenPair]) -> Result<EigenPair, FdError> {
    if !(tol > 0.0) {
        return Err(FdError::InvalidTolerance);
    }
    let n = op.size();
    let h = op.spacing;
    let threshold = (10.0 * tol).max(1024.0 * f64::EPSILON * op.norm_inf());
    let near: Vec<&EigenPair> = cluster
        .iter()
        .filter(|p| (p.value - lambda).abs() < 1e3 * tol)
        .collect();

    let lu = ShiftedLu::new(op, lambda);
    let mut rng = ChaCha8Rng::seed_from_u64(START_SEED);
    let mut x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mut residual = f64::INFINITY;
    for _ in 0..MAX_INVERSE_ITERATIONS {
        for p in &near {
            // stored vectors carry weight h
            let proj = dot(&x, &p.vector) * h;
            for (xi, vi) in x.iter_mut().zip(&p.vector) {
                *xi -= proj * vi;
            }
        }
        lu.solve(&mut x);
        let norm = dot(&x, &x).sqrt();
        if !(norm.is_finite() && norm > 0.0) {
            break;
        }
        for xi in &mut x {
            *xi /= norm;
        }
        let r = op.shifted_apply(lambda, &x);
        residual = dot(&r, &r).sqrt();
        if residual <= threshold {
            break;
        }
    }
    if residual > threshold {
        return Err(FdError::NoConvergence { lambda, residual });
    }
    let scale = 1.0 / h.sqrt();
    let flip = match x.iter().find(|v| v.abs() > 1e-300) {
        Some(&first) if first < 0.0 => -1.0,
        _ => 1.0,
    };
    Ok(EigenPair {
        value: lambda,
        vector: x.iter().map(|v| v * scale * flip).collect(),
        residual,
    })
}

/// Eigenvectors for a sorted list of eigenvalues, handling clusters.
pub fn eigenpairs(op: &TridiagonalOperator, values: &[f64], tol: f64) -> Result<Vec<EigenPair>, FdError> {
    let mut out: Vec<EigenPair> = Vec::with_capacity(values.len());
    for &lambda in values {
        let pair = eigenvector(op, lambda, tol, &out)?;
        out.push(pair);
    }
    Ok(out)
}
