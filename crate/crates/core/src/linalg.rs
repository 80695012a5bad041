//! Top eigenpair of a symmetric positive semidefinite operator given only
//! as a matrix-vector product.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::mesh::dot;

#[derive(Clone, Debug)]
pub struct Eigenpair {
    pub value: f64,
    /// Unit-norm (Euclidean) Ritz vector.
    pub vector: Vec<f64>,
    pub steps: usize,
    pub converged: bool,
}

/// Default step cap and relative tolerance for operator norms.
pub const MAX_STEPS: usize = 200;
pub const REL_TOL: f64 = 1e-10;

/// Lanczos iteration with full reorthogonalization, started from a seeded
/// positive random vector. Stops once the top Ritz value changes by less than
/// `rel_tol` (relative) between consecutive steps, on an invariant subspace,
/// or after `max_steps`.
pub fn top_eigenpair(
    n: usize,
    apply: impl Fn(&[f64]) -> Vec<f64>,
    seed: u64,
    max_steps: usize,
    rel_tol: f64,
) -> Eigenpair {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let start: Vec<f64> = (0..n).map(|_| rng.gen_range(0.5..1.5)).collect();
    top_eigenpair_from(start, apply, max_steps, rel_tol)
}

pub fn top_eigenpair_from(
    start: Vec<f64>,
    apply: impl Fn(&[f64]) -> Vec<f64>,
    max_steps: usize,
    rel_tol: f64,
) -> Eigenpair {
    let n = start.len();
    let mut basis: Vec<Vec<f64>> = Vec::new();
    let mut alpha: Vec<f64> = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    let norm0 = dot(&start, &start).sqrt();
    if norm0 == 0.0 || n == 0 {
        return Eigenpair {
            value: 0.0,
            vector: vec![0.0; n],
            steps: 0,
            converged: true,
        };
    }
    let mut q: Vec<f64> = start.iter().map(|v| v / norm0).collect();
    let mut last = f64::NAN;
    let mut converged = false;
    let steps_cap = max_steps.min(n).max(1);
    for step in 0..steps_cap {
        let mut w = apply(&q);
        let a = dot(&w, &q);
        basis.push(q.clone());
        alpha.push(a);
        // two passes of Gram-Schmidt against the whole basis
        for _ in 0..2 {
            for b in &basis {
                let c = dot(&w, b);
                w.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
            }
        }
        let top = tridiagonal_top(&alpha, &beta);
        let change = (top - last).abs();
        last = top;
        let bnorm = dot(&w, &w).sqrt();
        if step > 0 && change <= rel_tol * top.abs() {
            converged = true;
            break;
        }
        if bnorm <= 1e-14 * top.abs().max(1e-300) {
            converged = true;
            break;
        }
        if step + 1 == steps_cap {
            break;
        }
        beta.push(bnorm);
        q = w.iter().map(|v| v / bnorm).collect();
    }
    let value = tridiagonal_top(&alpha, &beta[..alpha.len() - 1]);
    let coords = tridiagonal_top_vector(&alpha, &beta[..alpha.len() - 1], value);
    let mut vector = vec![0.0; n];
    for (c, b) in coords.iter().zip(&basis) {
        vector.iter_mut().zip(b).for_each(|(x, y)| *x += c * y);
    }
    let nv = dot(&vector, &vector).sqrt();
    if nv > 0.0 {
        vector.iter_mut().for_each(|x| *x /= nv);
    }
    Eigenpair {
        value,
        vector,
        steps: alpha.len(),
        converged: converged || alpha.len() == n,
    }
}

/// Number of eigenvalues of the symmetric tridiagonal matrix below `x`.
fn count_below(alpha: &[f64], beta: &[f64], x: f64) -> usize {
    let mut count = 0;
    let mut d = 1.0;
    for k in 0..alpha.len() {
        let b2 = if k == 0 { 0.0 } else { beta[k - 1] * beta[k - 1] };
        d = alpha[k] - x - if k == 0 { 0.0 } else { b2 / d };
        if d == 0.0 {
            d = -1e-300;
        }
        if d < 0.0 {
            count += 1;
        }
    }
    count
}

/// Largest eigenvalue by Sturm-sequence bisection.
fn tridiagonal_top(alpha: &[f64], beta: &[f64]) -> f64 {
    let k = alpha.len();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..k {
        let r = if i > 0 { beta[i - 1].abs() } else { 0.0 } + if i < beta.len() { beta[i].abs() } else { 0.0 };
        lo = lo.min(alpha[i] - r);
        hi = hi.max(alpha[i] + r);
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if count_below(alpha, beta, mid) == k {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// Eigenvector for the top eigenvalue by shifted inverse iteration.
fn tridiagonal_top_vector(alpha: &[f64], beta: &[f64], value: f64) -> Vec<f64> {
    let k = alpha.len();
    let shift = value + 1e-10 * value.abs().max(1e-300);
    let mut y = vec![1.0; k];
    for _ in 0..4 {
        // solve (T - shift) x = y with the Thomas algorithm
        let mut c = vec![0.0; k];
        let mut d = vec![0.0; k];
        let mut denom = alpha[0] - shift;
        c[0] = if k > 1 { beta[0] / denom } else { 0.0 };
        d[0] = y[0] / denom;
        for i in 1..k {
            denom = alpha[i] - shift - beta[i - 1] * c[i - 1];
            c[i] = if i + 1 < k { beta[i] / denom } else { 0.0 };
            d[i] = (y[i] - beta[i - 1] * d[i - 1]) / denom;
        }
        let mut x = vec![0.0; k];
        x[k - 1] = d[k - 1];
        for i in (0..k - 1).rev() {
            x[i] = d[i] - c[i] * x[i + 1];
        }
        let nx = dot(&x, &x).sqrt();
        if !(nx.is_finite() && nx > 0.0) {
            break;
        }
        y = x.iter().map(|v| v / nx).collect();
    }
    y
}
