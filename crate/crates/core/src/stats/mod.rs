//! Two-stage inference: engage-vs-read threshold model (binary logit) and
//! like/repost/quote allocation model (multinomial logit).

mod design;
mod logistic;
mod multinomial;
mod newton;
mod predict;
mod published;

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

pub use design::{
    build_design_matrix, column_count, design_row, fill_row, outcome_code, term_names, DesignMatrix, DesignSpec,
    Stage, FULL_COLUMNS, MAIN_EFFECT_COLUMNS,
};
pub use logistic::{binary_log_likelihood, binary_score, fit_binary_logistic};
pub use multinomial::{fit_multinomial_logistic, multinomial_log_likelihood, multinomial_score, EQUATIONS};
pub use newton::NewtonOptions;
pub use predict::{default_grid, predicted_probabilities, read_scenario_grid, OutcomeProbability, Prediction, Scenario};
pub use published::{published_coefficients, published_tables, table_consistency_check, ConsistencyReport, PValue, PublishedRow, RowCheck};

use crate::error::{Error, Result};
use newton::NewtonResult;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    /// Convergence when the log-likelihood changes by less than this.
    pub tol: f64,
    pub max_iter: usize,
    /// Optional L2 penalty on non-intercept coefficients; 0 disables it.
    pub l2: f64,
    /// Diagonal loading used when the information matrix is singular.
    pub ridge: f64,
    /// Any |B| above this marks the fit as non-converged (separation).
    pub separation_bound: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            tol: 1e-8,
            max_iter: 100,
            l2: 0.0,
            ridge: 1e-6,
            separation_bound: 15.0,
        }
    }
}

impl FitOptions {
    fn newton(&self) -> NewtonOptions {
        NewtonOptions {
            tol: self.tol,
            max_iter: self.max_iter,
            l2: self.l2,
            ridge: self.ridge,
        }
    }
}

/// Non-finite values are written as JSON `null` and read back as NaN.
pub(crate) mod nullable_f64 {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Coefficient {
    pub term: String,
    #[serde(with = "nullable_f64")]
    pub estimate: f64,
    #[serde(with = "nullable_f64")]
    pub std_error: f64,
    #[serde(with = "nullable_f64")]
    pub odds_ratio: f64,
    #[serde(with = "nullable_f64")]
    pub p_value: f64,
}

impl Coefficient {
    pub fn new(term: String, estimate: f64, std_error: f64) -> Self {
        Coefficient {
            term,
            estimate,
            std_error,
            odds_ratio: estimate.exp(),
            p_value: wald_p_value(estimate, std_error),
        }
    }
}

/// One linear predictor: the engage equation of the threshold model or one
/// non-reference outcome of the allocation model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Equation {
    pub outcome: String,
    pub estimable: bool,
    pub coefficients: Vec<Coefficient>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FittedModel {
    pub stage: Stage,
    pub terms: Vec<String>,
    pub reference_outcome: String,
    pub equations: Vec<Equation>,
    /// Covariance of the estimable coefficients, stacked in equation order.
    pub covariance: Vec<Vec<f64>>,
    pub ll_full: f64,
    pub ll_null: f64,
    pub k: usize,
    pub k_null: usize,
    pub n_obs: usize,
    pub iterations: usize,
    pub converged: bool,
    pub ridge_applied: bool,
    pub diagnostics: Vec<String>,
}

impl FittedModel {
    pub fn metrics(&self) -> FitMetrics {
        fit_metrics(self.ll_full, self.ll_null, self.k, self.k_null)
    }

    pub fn coefficient(&self, outcome: &str, term: &str) -> Option<&Coefficient> {
        self.equations
            .iter()
            .find(|e| e.outcome == outcome)?
            .coefficients
            .iter()
            .find(|c| c.term == term)
    }

    /// Estimable coefficient vectors, in equation order.
    pub fn estimable_blocks(&self) -> Vec<(usize, Vec<f64>)> {
        self.equations
            .iter()
            .enumerate()
            .filter(|(_, e)| e.estimable)
            .map(|(i, e)| (i, e.coefficients.iter().map(|c| c.estimate).collect()))
            .collect()
    }

    /// Rows for the coefficient CSV: allocation terms are prefixed with the
    /// outcome they belong to.
    pub fn coefficient_rows(&self) -> Vec<CoefficientRow> {
        let prefix = self.stage == Stage::Allocation;
        self.equations
            .iter()
            .flat_map(|e| {
                e.coefficients.iter().map(move |c| CoefficientRow {
                    term: if prefix { format!("{}/{}", e.outcome, c.term) } else { c.term.clone() },
                    b: c.estimate,
                    se: c.std_error,
                    or: c.odds_ratio,
                    p: c.p_value,
                    converged: self.converged && e.estimable,
                })
            })
            .collect()
    }

    pub fn write_coefficients_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        for row in self.coefficient_rows() {
            w.serialize(row)?;
        }
        w.flush().map_err(|e| Error::io(format!("write {}", path.display()), e))
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(format!("create {}", path.display()), e))?;
        serde_json::to_writer_pretty(&mut f, self)?;
        f.write_all(b"\n").map_err(|e| Error::io(format!("write {}", path.display()), e))
    }

    pub fn read_json(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(format!("read {}", path.display()), e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoefficientRow {
    pub term: String,
    #[serde(rename = "B")]
    pub b: f64,
    #[serde(rename = "SE")]
    pub se: f64,
    #[serde(rename = "OR")]
    pub or: f64,
    pub p: f64,
    pub converged: bool,
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn assemble_model(
    stage: Stage,
    terms: Vec<String>,
    reference: &str,
    equations: Vec<(String, bool)>,
    fit: NewtonResult,
    ll_null: f64,
    k_null: usize,
    n_obs: usize,
    opts: &FitOptions,
    mut diagnostics: Vec<String>,
) -> FittedModel {
    let p = terms.len();
    let k = fit.beta.len();
    let mut block = 0;
    let mut separated = Vec::new();
    let equations = equations
        .into_iter()
        .map(|(outcome, estimable)| {
            let coefficients = terms
                .iter()
                .enumerate()
                .map(|(a, term)| {
                    if !estimable {
                        return Coefficient::new(term.clone(), f64::NAN, f64::NAN);
                    }
                    let idx = block * p + a;
                    let b = fit.beta[idx];
                    if b.abs() > opts.separation_bound {
                        separated.push(format!("{outcome}/{term}"));
                    }
                    Coefficient::new(term.clone(), b, fit.covariance[idx * k + idx].sqrt())
                })
                .collect();
            if estimable {
                block += 1;
            }
            Equation { outcome, estimable, coefficients }
        })
        .collect();

    if fit.ridge_applied {
        diagnostics.push(format!(
            "information matrix singular; ridge {:e} added to the diagonal",
            opts.ridge
        ));
    }
    if !fit.converged {
        diagnostics.push(format!("no convergence after {} iterations", fit.iterations));
    }
    if !separated.is_empty() {
        diagnostics.push(format!(
            "possible separation: |B| > {} for {}",
            opts.separation_bound,
            separated.join(", ")
        ));
    }
    for d in &diagnostics {
        log::warn!("{} model: {d}", stage.as_str());
    }

    FittedModel {
        stage,
        terms,
        reference_outcome: reference.to_string(),
        equations,
        covariance: fit.covariance.chunks(k.max(1)).take(k).map(|r| r.to_vec()).collect(),
        ll_full: fit.ll,
        ll_null,
        k,
        k_null,
        n_obs,
        iterations: fit.iterations,
        converged: fit.converged && separated.is_empty(),
        ridge_applied: fit.ridge_applied,
        diagnostics,
    }
}

/// Two-tailed Wald p-value, `2 * Phi(-|B / SE|)`.
pub fn wald_p_value(estimate: f64, std_error: f64) -> f64 {
    let z = (estimate / std_error).abs();
    erfc(z / std::f64::consts::SQRT_2)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitMetrics {
    pub lr_chi2: f64,
    pub df: usize,
    pub mcfadden_r2: f64,
    pub aic: f64,
}

/// Likelihood-ratio chi-square, McFadden pseudo-R² and AIC.
pub fn fit_metrics(ll_full: f64, ll_null: f64, k: usize, k_null: usize) -> FitMetrics {
    let mcfadden_r2 = if ll_null == 0.0 { 0.0 } else { 1.0 - ll_full / ll_null };
    FitMetrics {
        lr_chi2: 2.0 * (ll_full - ll_null),
        df: k.saturating_sub(k_null),
        mcfadden_r2,
        aic: 2.0 * k as f64 - 2.0 * ll_full,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OddsRatioRow {
    pub outcome: String,
    pub term: String,
    pub odds_ratio: f64,
    pub p_value: f64,
}

pub fn odds_ratios(model: &FittedModel) -> Vec<OddsRatioRow> {
    model
        .equations
        .iter()
        .flat_map(|e| {
            e.coefficients.iter().map(|c| OddsRatioRow {
                outcome: e.outcome.clone(),
                term: c.term.clone(),
                odds_ratio: c.estimate.exp(),
                p_value: wald_p_value(c.estimate, c.std_error),
            })
        })
        .collect()
}
