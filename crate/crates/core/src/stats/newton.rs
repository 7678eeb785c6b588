//! Damped Newton maximization shared by the binary (IRLS) and multinomial
//! fits. For the canonical logit link the Newton step and the IRLS
//! weighted-least-squares step coincide.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

/// Rows per partial reduction. Fixed so results do not depend on the thread
/// count.
pub(crate) const CHUNK_ROWS: usize = 4096;

/// Log-likelihood with first and second derivatives.
pub(crate) trait Likelihood: Sync {
    fn dim(&self) -> usize;

    /// Indices excluded from the optional L2 penalty (intercepts).
    fn unpenalized(&self) -> Vec<usize>;

    fn log_likelihood(&self, beta: &[f64]) -> f64;

    /// Log-likelihood, score vector and observed information (negative
    /// Hessian, row-major).
    fn derivatives(&self, beta: &[f64]) -> Derivatives;
}

#[derive(Clone, Debug)]
pub(crate) struct Derivatives {
    pub ll: f64,
    pub score: Vec<f64>,
    pub info: Vec<f64>,
}

impl Derivatives {
    pub fn zeros(p: usize) -> Self {
        Derivatives { ll: 0.0, score: vec![0.0; p], info: vec![0.0; p * p] }
    }

    pub fn add(&mut self, other: &Derivatives) {
        self.ll += other.ll;
        for (a, b) in self.score.iter_mut().zip(&other.score) {
            *a += b;
        }
        for (a, b) in self.info.iter_mut().zip(&other.info) {
            *a += b;
        }
    }

    /// Copies the upper triangle onto the lower one.
    pub fn symmetrize(&mut self) {
        let p = self.score.len();
        for i in 0..p {
            for j in 0..i {
                self.info[i * p + j] = self.info[j * p + i];
            }
        }
    }
}

/// Sums per-chunk contributions in chunk order.
pub(crate) fn reduce_chunks<F>(nrows: usize, p: usize, chunk: F) -> Derivatives
where
    F: Fn(std::ops::Range<usize>) -> Derivatives + Sync,
{
    let starts: Vec<usize> = (0..nrows).step_by(CHUNK_ROWS).collect();
    let parts: Vec<Derivatives> = starts
        .par_iter()
        .map(|&s| chunk(s..(s + CHUNK_ROWS).min(nrows)))
        .collect();
    let mut total = Derivatives::zeros(p);
    for part in &parts {
        total.add(part);
    }
    total.symmetrize();
    total
}

pub(crate) fn reduce_ll<F>(nrows: usize, chunk: F) -> f64
where
    F: Fn(std::ops::Range<usize>) -> f64 + Sync,
{
    let starts: Vec<usize> = (0..nrows).step_by(CHUNK_ROWS).collect();
    let parts: Vec<f64> = starts
        .par_iter()
        .map(|&s| chunk(s..(s + CHUNK_ROWS).min(nrows)))
        .collect();
    parts.iter().sum()
}

/// `ln(1 + e^x)` without overflow.
pub(crate) fn log1p_exp(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

pub(crate) fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[derive(Clone, Copy, Debug)]
pub struct NewtonOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub l2: f64,
    pub ridge: f64,
}

#[derive(Clone, Debug)]
pub(crate) struct NewtonResult {
    pub beta: Vec<f64>,
    pub ll: f64,
    pub covariance: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub ridge_applied: bool,
}

fn penalized(lik: &dyn Likelihood, l2: f64, free: &[bool], beta: &[f64]) -> f64 {
    let ll = lik.log_likelihood(beta);
    if l2 == 0.0 {
        return ll;
    }
    ll - 0.5 * l2 * beta.iter().zip(free).filter(|(_, &f)| f).map(|(b, _)| b * b).sum::<f64>()
}

fn penalized_derivatives(lik: &dyn Likelihood, l2: f64, free: &[bool], beta: &[f64]) -> Derivatives {
    let mut d = lik.derivatives(beta);
    if l2 != 0.0 {
        let p = beta.len();
        for i in (0..p).filter(|&i| free[i]) {
            d.ll -= 0.5 * l2 * beta[i] * beta[i];
            d.score[i] -= l2 * beta[i];
            d.info[i * p + i] += l2;
        }
    }
    d
}

/// Solves `info * x = rhs` by Cholesky, adding `ridge` to the diagonal if
/// the matrix is not positive definite. Returns the solution and whether the
/// ridge was needed.
fn solve(info: &[f64], rhs: &[f64], ridge: f64) -> (Vec<f64>, bool) {
    let p = rhs.len();
    let m = DMatrix::from_row_slice(p, p, info);
    let b = DVector::from_column_slice(rhs);
    if let Some(ch) = m.clone().cholesky() {
        return (ch.solve(&b).iter().copied().collect(), false);
    }
    let ridged = m + DMatrix::identity(p, p) * ridge;
    match ridged.clone().cholesky() {
        Some(ch) => (ch.solve(&b).iter().copied().collect(), true),
        None => {
            let x = ridged
                .lu()
                .solve(&b)
                .map(|v| v.iter().copied().collect())
                .unwrap_or_else(|| vec![0.0; p]);
            (x, true)
        }
    }
}

pub(crate) fn invert(info: &[f64], p: usize, ridge: f64) -> (Vec<f64>, bool) {
    let m = DMatrix::from_row_slice(p, p, info);
    let (inv, ridged) = match m.clone().cholesky() {
        Some(ch) => (ch.inverse(), false),
        None => {
            let r = m + DMatrix::identity(p, p) * ridge;
            let inv = r
                .clone()
                .cholesky()
                .map(|c| c.inverse())
                .or_else(|| r.try_inverse())
                .unwrap_or_else(|| DMatrix::from_element(p, p, f64::NAN));
            (inv, true)
        }
    };
    // nalgebra is column-major; the inverse is symmetric up to rounding, so
    // read it out row by row explicitly.
    let mut out = vec![0.0; p * p];
    for i in 0..p {
        for j in 0..p {
            out[i * p + j] = inv[(i, j)];
        }
    }
    (out, ridged)
}

pub(crate) fn maximize(lik: &dyn Likelihood, start: Vec<f64>, opts: &NewtonOptions) -> NewtonResult {
    let p = lik.dim();
    let mut free = vec![true; p];
    for i in lik.unpenalized() {
        free[i] = false;
    }

    let mut beta = start;
    let mut d = penalized_derivatives(lik, opts.l2, &free, &beta);
    let mut ridge_applied = false;
    let mut converged = false;
    let mut iterations = 0;

    while iterations < opts.max_iter {
        iterations += 1;
        let (step, ridged) = solve(&d.info, &d.score, opts.ridge);
        ridge_applied |= ridged;

        let mut t = 1.0;
        let mut candidate;
        loop {
            candidate = beta.iter().zip(&step).map(|(b, s)| b + t * s).collect::<Vec<_>>();
            let ll = penalized(lik, opts.l2, &free, &candidate);
            if ll.is_finite() && ll >= d.ll - 1e-12 * d.ll.abs().max(1.0) {
                break;
            }
            t *= 0.5;
            if t < 1e-10 {
                candidate = beta.clone();
                break;
            }
        }
        let previous = d.ll;
        beta = candidate;
        d = penalized_derivatives(lik, opts.l2, &free, &beta);
        if (d.ll - previous).abs() < opts.tol {
            converged = true;
            break;
        }
    }

    let (covariance, ridged) = invert(&d.info, p, opts.ridge);
    ridge_applied |= ridged;
    NewtonResult {
        ll: lik.log_likelihood(&beta),
        beta,
        covariance,
        iterations,
        converged,
        ridge_applied,
    }
}
