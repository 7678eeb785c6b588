//! Multinomial logit over {like, repost, quote} with like as the reference
//! outcome, maximized jointly over both equation blocks by Newton's method.

use super::design::{DesignMatrix, Stage};
use super::newton::{self, reduce_chunks, reduce_ll, Derivatives, Likelihood};
use super::{assemble_model, FitOptions, FittedModel};
use crate::error::{Error, Result};

/// Non-reference outcome codes, in equation order.
pub const EQUATIONS: [(u8, &str); 2] = [(1, "repost"), (2, "quote")];

pub(crate) struct MultinomialLikelihood<'a> {
    x: &'a DesignMatrix,
    y: &'a [u8],
    /// Outcome codes that have their own equation.
    active: Vec<u8>,
    intercept: Option<usize>,
}

impl<'a> MultinomialLikelihood<'a> {
    pub(crate) fn new(x: &'a DesignMatrix, y: &'a [u8], active: Vec<u8>) -> Self {
        let intercept = x.names().iter().position(|n| n == "Intercept");
        MultinomialLikelihood { x, y, active, intercept }
    }

    /// Linear predictors for each active equation and the log normalizer.
    fn predictors(&self, row: &[f64], beta: &[f64], eta: &mut [f64]) -> f64 {
        let p = row.len();
        let mut max = 0.0f64;
        for (j, e) in eta.iter_mut().enumerate() {
            *e = row.iter().zip(&beta[j * p..(j + 1) * p]).map(|(a, b)| a * b).sum();
            max = max.max(*e);
        }
        let sum: f64 = (-max).exp() + eta.iter().map(|e| (e - max).exp()).sum::<f64>();
        max + sum.ln()
    }

    fn observed_eta(&self, y: u8, eta: &[f64]) -> f64 {
        self.active
            .iter()
            .position(|&c| c == y)
            .map_or(0.0, |j| eta[j])
    }
}

impl Likelihood for MultinomialLikelihood<'_> {
    fn dim(&self) -> usize {
        self.x.ncols() * self.active.len()
    }

    fn unpenalized(&self) -> Vec<usize> {
        let p = self.x.ncols();
        self.intercept
            .map(|c| (0..self.active.len()).map(|j| j * p + c).collect())
            .unwrap_or_default()
    }

    fn log_likelihood(&self, beta: &[f64]) -> f64 {
        let m = self.active.len();
        reduce_ll(self.x.nrows(), |rows| {
            let mut eta = vec![0.0; m];
            rows.map(|i| {
                let lse = self.predictors(self.x.row(i), beta, &mut eta);
                self.observed_eta(self.y[i], &eta) - lse
            })
            .sum()
        })
    }

    fn derivatives(&self, beta: &[f64]) -> Derivatives {
        let p = self.x.ncols();
        let m = self.active.len();
        let dim = self.dim();
        reduce_chunks(self.x.nrows(), dim, |rows| {
            let mut d = Derivatives::zeros(dim);
            let mut eta = vec![0.0; m];
            let mut prob = vec![0.0; m];
            for i in rows {
                let row = self.x.row(i);
                let lse = self.predictors(row, beta, &mut eta);
                d.ll += self.observed_eta(self.y[i], &eta) - lse;
                for j in 0..m {
                    prob[j] = (eta[j] - lse).exp();
                }
                for j in 0..m {
                    let r = f64::from(u8::from(self.y[i] == self.active[j])) - prob[j];
                    for a in 0..p {
                        d.score[j * p + a] += r * row[a];
                    }
                    for k in j..m {
                        let w = if j == k { prob[j] * (1.0 - prob[j]) } else { -prob[j] * prob[k] };
                        for a in 0..p {
                            let wxa = w * row[a];
                            if wxa == 0.0 {
                                continue;
                            }
                            let r0 = (j * p + a) * dim + k * p;
                            // Within a diagonal block only the upper triangle is needed.
                            let b0 = if j == k { a } else { 0 };
                            for b in b0..p {
                                d.info[r0 + b] += wxa * row[b];
                            }
                        }
                    }
                }
            }
            // Blocks with j < k sit entirely above the diagonal, so together
            // with the diagonal-block upper triangles this fills the whole
            // upper triangle that `symmetrize` mirrors.
            d
        })
    }
}

/// Log-likelihood of the full three-outcome model; `beta` stacks the repost
/// and quote equations.
pub fn multinomial_log_likelihood(x: &DesignMatrix, y: &[u8], beta: &[f64]) -> f64 {
    MultinomialLikelihood::new(x, y, EQUATIONS.map(|(c, _)| c).to_vec()).log_likelihood(beta)
}

pub fn multinomial_score(x: &DesignMatrix, y: &[u8], beta: &[f64]) -> Vec<f64> {
    MultinomialLikelihood::new(x, y, EQUATIONS.map(|(c, _)| c).to_vec())
        .derivatives(beta)
        .score
}

/// Fits the allocation model. An outcome that never occurs leaves its
/// equation inestimable; the remaining equations are still fitted.
pub fn fit_multinomial_logistic(x: &DesignMatrix, y: &[u8], opts: &FitOptions) -> Result<FittedModel> {
    if x.nrows() != y.len() {
        return Err(Error::Validation(format!(
            "design has {} rows but outcome has {}",
            x.nrows(),
            y.len()
        )));
    }
    if y.iter().any(|&v| v > 2) {
        return Err(Error::Validation("allocation outcome must be 0 (like), 1 (repost) or 2 (quote)".into()));
    }
    if x.nrows() < x.ncols() {
        return Err(Error::Validation(format!(
            "need at least as many rows ({}) as columns ({})",
            x.nrows(),
            x.ncols()
        )));
    }
    let mut diagnostics = Vec::new();
    let active: Vec<u8> = EQUATIONS
        .iter()
        .filter(|(code, name)| {
            let present = y.contains(code);
            if !present {
                diagnostics.push(format!("equation `{name}` inestimable: outcome never observed"));
            }
            present
        })
        .map(|(c, _)| *c)
        .collect();
    if !y.contains(&0) {
        diagnostics.push("reference outcome `like` never observed".to_string());
    }
    for (j, name) in x.names().iter().enumerate() {
        if x.column_support(j) == 0 {
            diagnostics.push(format!("rank deficient: column `{name}` is identically zero"));
        }
    }

    let lik = MultinomialLikelihood::new(x, y, active.clone());
    let full = newton::maximize(&lik, vec![0.0; lik.dim()], &opts.newton());
    let ones = DesignMatrix::intercept_only(x.nrows());
    let null_lik = MultinomialLikelihood::new(&ones, y, active.clone());
    let null = newton::maximize(&null_lik, vec![0.0; active.len()], &opts.newton());

    let equations = EQUATIONS
        .iter()
        .map(|(c, name)| (name.to_string(), active.contains(c)))
        .collect();
    Ok(assemble_model(
        Stage::Allocation,
        x.names().to_vec(),
        "like",
        equations,
        full,
        null.ll,
        active.len(),
        x.nrows(),
        opts,
        diagnostics,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn counts(like: usize, repost: usize, quote: usize) -> Vec<u8> {
        let mut y = vec![0u8; like];
        y.extend(std::iter::repeat_n(1u8, repost));
        y.extend(std::iter::repeat_n(2u8, quote));
        y
    }

    #[test]
    fn intercept_only_log_ratios() {
        let y = counts(60, 30, 10);
        let x = DesignMatrix::intercept_only(y.len());
        let m = fit_multinomial_logistic(&x, &y, &FitOptions::default()).unwrap();
        assert!(m.converged);
        assert_abs_diff_eq!(m.equations[0].coefficients[0].estimate, 0.5f64.ln(), epsilon = 1e-6);
        assert_abs_diff_eq!(m.equations[1].coefficients[0].estimate, (1.0f64 / 6.0).ln(), epsilon = 1e-6);
        assert_eq!(m.k, 2);
        assert_eq!(m.k_null, 2);
    }

    #[test]
    fn missing_category_is_inestimable() {
        let y = counts(40, 0, 20);
        let rows: Vec<Vec<f64>> = (0..60).map(|i| vec![1.0, (i % 5) as f64]).collect();
        let x = DesignMatrix::from_rows(&rows, vec!["Intercept".into(), "z".into()]).unwrap();
        let m = fit_multinomial_logistic(&x, &y, &FitOptions::default()).unwrap();
        assert!(!m.equations[0].estimable);
        assert!(m.equations[1].estimable);
        assert!(m.equations[0].coefficients.iter().all(|c| c.estimate.is_nan()));
        assert_eq!(m.k, 2);
        assert!(m.diagnostics.iter().any(|d| d.contains("repost")));
    }

    #[test]
    fn information_is_symmetric_and_matches_finite_difference() {
        let rows: Vec<Vec<f64>> = (0..90).map(|i| vec![1.0, ((i * 7) % 13) as f64 / 13.0, (i % 2) as f64]).collect();
        let y: Vec<u8> = (0..90).map(|i| ((i * 5) % 3) as u8).collect();
        let names = vec!["Intercept".into(), "a".into(), "b".into()];
        let x = DesignMatrix::from_rows(&rows, names).unwrap();
        let lik = MultinomialLikelihood::new(&x, &y, vec![1, 2]);
        let beta = [0.1, -0.3, 0.2, -0.4, 0.5, 0.05];
        let d = lik.derivatives(&beta);
        let dim = 6;
        let h = 1e-5;
        for a in 0..dim {
            let mut up = beta;
            up[a] += h;
            let mut dn = beta;
            dn[a] -= h;
            let su = lik.derivatives(&up).score;
            let sd = lik.derivatives(&dn).score;
            for b in 0..dim {
                let fd = -(su[b] - sd[b]) / (2.0 * h);
                assert_abs_diff_eq!(d.info[a * dim + b], fd, epsilon = 1e-5);
                assert_abs_diff_eq!(d.info[a * dim + b], d.info[b * dim + a], epsilon = 1e-12);
            }
        }
    }
}
