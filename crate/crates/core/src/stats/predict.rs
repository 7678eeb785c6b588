use std::path::Path;

use serde::{Deserialize, Serialize};

use super::design::{column_count, design_row, Stage};
use super::newton::logistic;
use super::FittedModel;
use crate::error::{Error, Result};
use crate::model::{Condition, LoadCondition, NormRegime};

const Z95: f64 = 1.959_963_984_540_054;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub composite: f64,
    pub load: LoadCondition,
    pub norm: NormRegime,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutcomeProbability {
    pub outcome: String,
    pub p: f64,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub scenario: Scenario,
    pub outcomes: Vec<OutcomeProbability>,
    /// Set when an outcome's equation could not be estimated; its
    /// probability is reported as zero.
    pub flagged: bool,
}

/// Composite values 0, 0.25, ..., 5 crossed with all twelve cells.
pub fn default_grid() -> Vec<Scenario> {
    Condition::all()
        .flat_map(|c| {
            (0..=20).map(move |i| Scenario { composite: f64::from(i) * 0.25, load: c.load, norm: c.norm })
        })
        .collect()
}

pub fn read_scenario_grid(path: &Path) -> Result<Vec<Scenario>> {
    let mut r = csv::Reader::from_path(path)?;
    let rows: Vec<Scenario> = r.deserialize().collect::<std::result::Result<_, _>>()?;
    if rows.is_empty() {
        return Err(Error::Validation(format!("{}: empty scenario grid", path.display())));
    }
    Ok(rows)
}

fn quad_form(cov: &[Vec<f64>], g: &[f64]) -> f64 {
    let mut v = 0.0;
    for (i, gi) in g.iter().enumerate() {
        if *gi == 0.0 {
            continue;
        }
        for (j, gj) in g.iter().enumerate() {
            v += gi * cov[i][j] * gj;
        }
    }
    v.max(0.0)
}

fn band(outcome: &str, p: f64, var: f64) -> OutcomeProbability {
    let half = Z95 * var.sqrt();
    OutcomeProbability {
        outcome: outcome.to_string(),
        p,
        lower: (p - half).max(0.0),
        upper: (p + half).min(1.0),
    }
}

/// Predicted probabilities with 95% delta-method bands.
pub fn predicted_probabilities(model: &FittedModel, grid: &[Scenario]) -> Result<Vec<Prediction>> {
    let p = model.terms.len();
    let interactions = match p {
        n if n == column_count(true) => true,
        n if n == column_count(false) => false,
        n => return Err(Error::Validation(format!("model has {n} terms; expected 24 or 7"))),
    };
    let blocks = model.estimable_blocks();
    Ok(grid
        .iter()
        .map(|s| {
            let x = design_row(s.composite, Condition::new(s.load, s.norm), interactions);
            match model.stage {
                Stage::Threshold => threshold_prediction(model, &blocks, *s, &x),
                Stage::Allocation => allocation_prediction(model, &blocks, *s, &x),
            }
        })
        .collect())
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn threshold_prediction(model: &FittedModel, blocks: &[(usize, Vec<f64>)], s: Scenario, x: &[f64]) -> Prediction {
    let Some((_, beta)) = blocks.first() else {
        return Prediction {
            scenario: s,
            outcomes: vec![band("engage", f64::NAN, f64::NAN)],
            flagged: true,
        };
    };
    let pr = logistic(dot(x, beta));
    let g: Vec<f64> = x.iter().map(|xi| pr * (1.0 - pr) * xi).collect();
    Prediction {
        scenario: s,
        outcomes: vec![band("engage", pr, quad_form(&model.covariance, &g))],
        flagged: false,
    }
}

fn allocation_prediction(model: &FittedModel, blocks: &[(usize, Vec<f64>)], s: Scenario, x: &[f64]) -> Prediction {
    let p = x.len();
    let etas: Vec<f64> = blocks.iter().map(|(_, b)| dot(x, b)).collect();
    let max = etas.iter().copied().fold(0.0f64, f64::max);
    let denom = (-max).exp() + etas.iter().map(|e| (e - max).exp()).sum::<f64>();
    let p_ref = (-max).exp() / denom;
    let p_act: Vec<f64> = etas.iter().map(|e| (e - max).exp() / denom).collect();

    // d p_a / d beta_j = c_aj * x, with c_aj = p_a (1[a = j] - p_j).
    let gradient = |coef: &dyn Fn(usize) -> f64| -> Vec<f64> {
        let mut g = vec![0.0; blocks.len() * p];
        for j in 0..blocks.len() {
            let c = coef(j);
            for a in 0..p {
                g[j * p + a] = c * x[a];
            }
        }
        g
    };

    let mut outcomes = Vec::with_capacity(3);
    let g_ref = gradient(&|j| -p_ref * p_act[j]);
    outcomes.push(band(&model.reference_outcome, p_ref, quad_form(&model.covariance, &g_ref)));
    let mut flagged = false;
    for (eq_idx, eq) in model.equations.iter().enumerate() {
        match blocks.iter().position(|(i, _)| *i == eq_idx) {
            Some(m) => {
                let pm = p_act[m];
                let g = gradient(&|j| pm * (f64::from(u8::from(j == m)) - p_act[j]));
                outcomes.push(band(&eq.outcome, pm, quad_form(&model.covariance, &g)));
            }
            None => {
                flagged = true;
                outcomes.push(OutcomeProbability { outcome: eq.outcome.clone(), p: 0.0, lower: 0.0, upper: 0.0 });
            }
        }
    }
    Prediction { scenario: s, outcomes, flagged }
}
