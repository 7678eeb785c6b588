//! Binary logistic regression fitted by IRLS.

use super::design::{DesignMatrix, Stage};
use super::newton::{self, log1p_exp, logistic, reduce_chunks, reduce_ll, Derivatives, Likelihood};
use super::{assemble_model, FitOptions, FittedModel};
use crate::error::{Error, Result};

pub(crate) struct BinaryLikelihood<'a> {
    x: &'a DesignMatrix,
    y: &'a [u8],
    intercept: Option<usize>,
}

impl<'a> BinaryLikelihood<'a> {
    pub(crate) fn new(x: &'a DesignMatrix, y: &'a [u8]) -> Self {
        let intercept = x.names().iter().position(|n| n == "Intercept");
        BinaryLikelihood { x, y, intercept }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl Likelihood for BinaryLikelihood<'_> {
    fn dim(&self) -> usize {
        self.x.ncols()
    }

    fn unpenalized(&self) -> Vec<usize> {
        self.intercept.into_iter().collect()
    }

    fn log_likelihood(&self, beta: &[f64]) -> f64 {
        reduce_ll(self.x.nrows(), |rows| {
            rows.map(|i| {
                let eta = dot(self.x.row(i), beta);
                f64::from(self.y[i]) * eta - log1p_exp(eta)
            })
            .sum()
        })
    }

    fn derivatives(&self, beta: &[f64]) -> Derivatives {
        let p = self.dim();
        reduce_chunks(self.x.nrows(), p, |rows| {
            let mut d = Derivatives::zeros(p);
            for i in rows {
                let row = self.x.row(i);
                let eta = dot(row, beta);
                let y = f64::from(self.y[i]);
                let mu = logistic(eta);
                let w = mu * (1.0 - mu);
                d.ll += y * eta - log1p_exp(eta);
                let r = y - mu;
                for a in 0..p {
                    let xa = row[a];
                    if xa == 0.0 {
                        continue;
                    }
                    d.score[a] += r * xa;
                    let wxa = w * xa;
                    for b in a..p {
                        d.info[a * p + b] += wxa * row[b];
                    }
                }
            }
            d
        })
    }
}

/// Log-likelihood of a binary logit model at `beta`.
pub fn binary_log_likelihood(x: &DesignMatrix, y: &[u8], beta: &[f64]) -> f64 {
    BinaryLikelihood::new(x, y).log_likelihood(beta)
}

/// Analytic score vector (gradient of the log-likelihood).
pub fn binary_score(x: &DesignMatrix, y: &[u8], beta: &[f64]) -> Vec<f64> {
    BinaryLikelihood::new(x, y).derivatives(beta).score
}

fn check(x: &DesignMatrix, y: &[u8]) -> Result<()> {
    if x.nrows() != y.len() {
        return Err(Error::Validation(format!(
            "design has {} rows but outcome has {}",
            x.nrows(),
            y.len()
        )));
    }
    if y.iter().any(|&v| v > 1) {
        return Err(Error::Validation("binary outcome must be 0 or 1".into()));
    }
    if x.nrows() < x.ncols() {
        return Err(Error::Validation(format!(
            "need at least as many rows ({}) as columns ({})",
            x.nrows(),
            x.ncols()
        )));
    }
    Ok(())
}

/// Fits `P(y = 1) = logistic(x . beta)` by IRLS, plus the intercept-only null
/// model for fit statistics.
pub fn fit_binary_logistic(x: &DesignMatrix, y: &[u8], opts: &FitOptions) -> Result<FittedModel> {
    check(x, y)?;
    let full = newton::maximize(&BinaryLikelihood::new(x, y), vec![0.0; x.ncols()], &opts.newton());

    let ones = DesignMatrix::intercept_only(x.nrows());
    let null = newton::maximize(&BinaryLikelihood::new(&ones, y), vec![0.0], &opts.newton());

    let mut diagnostics = Vec::new();
    for (j, name) in x.names().iter().enumerate() {
        if x.column_support(j) == 0 {
            diagnostics.push(format!("rank deficient: column `{name}` is identically zero"));
        }
    }
    Ok(assemble_model(
        Stage::Threshold,
        x.names().to_vec(),
        "read",
        vec![("engage".to_string(), true)],
        full,
        null.ll,
        1,
        x.nrows(),
        opts,
        diagnostics,
    ))
}
